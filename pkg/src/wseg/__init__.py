"""Weakly-supervised semantic segmentation by alternating estimation, at desk scale."""

from .cues import (
    FusionConfig as FusionConfig,
    binarize as binarize,
    fuse_cues as fuse_cues,
    mask_intersection_area as mask_intersection_area,
    target_distribution as target_distribution,
)
from .em import (
    EmConfig as EmConfig,
    EmReport as EmReport,
    StageResult as StageResult,
    e_step as e_step,
    evaluate_params as evaluate_params,
    m_step as m_step,
    run_em as run_em,
    train_initial as train_initial,
)
from .losses import (
    GradCheckReport as GradCheckReport,
    LossConfig as LossConfig,
    LossResult as LossResult,
    combined_loss as combined_loss,
    finite_diff_grad as finite_diff_grad,
    grad_check as grad_check,
    prob_iou as prob_iou,
    prob_iou_gain as prob_iou_gain,
    soft_cross_entropy as soft_cross_entropy,
)
from .metrics import (
    ConfusionMatrix as ConfusionMatrix,
    accumulate as accumulate,
    hard_segmentation as hard_segmentation,
    iou_scores as iou_scores,
    report_json as report_json,
    report_table as report_table,
)
from .posterior import (
    HeuristicConfig as HeuristicConfig,
    PriorVector as PriorVector,
    epsilon_from_heuristic as epsilon_from_heuristic,
    label_prior as label_prior,
    mixed_target as mixed_target,
    regularized_posterior as regularized_posterior,
    relative_margin as relative_margin,
)
from .segmenter import (
    OptConfig as OptConfig,
    SegmenterParams as SegmenterParams,
    TrainingError as TrainingError,
    TrainResult as TrainResult,
    extract_features as extract_features,
    forward as forward,
    load_params as load_params,
    save_params as save_params,
    sgd_step as sgd_step,
    softmax_probs as softmax_probs,
    train as train,
)
from .synth import (
    CueRecord as CueRecord,
    DatasetBundle as DatasetBundle,
    FilterConfig as FilterConfig,
    NoiseConfig as NoiseConfig,
    SceneRecord as SceneRecord,
    build_dataset as build_dataset,
    default_label_space as default_label_space,
    derive_seed as derive_seed,
    filter_complex as filter_complex,
    filter_simple as filter_simple,
    generate_complex as generate_complex,
    generate_simple as generate_simple,
    load_dataset as load_dataset,
    refilter_simple_for_mstep as refilter_simple_for_mstep,
    save_dataset as save_dataset,
    synth_cues as synth_cues,
)
from .tensorfile import (
    TensorFormatError as TensorFormatError,
    read_tensor as read_tensor,
    write_tensor as write_tensor,
)
from .types import (
    CueMap as CueMap,
    DomainError as DomainError,
    LabelSet as LabelSet,
    LabelSpace as LabelSpace,
    LogitMap as LogitMap,
    ProbMap as ProbMap,
    SegMask as SegMask,
    one_hot as one_hot,
    validate as validate,
)
