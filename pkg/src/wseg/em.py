"""Alternating training loop: initial model, then E-step/M-step rounds.

The initial model trains on fused-cue targets from simple single-object
scenes. Each following round freezes per-pixel targets (regularized
posterior blended toward its argmax) over the complex set plus a re-ranked
slice of the simple set, then optimizes the combined objective from the
current parameters. Targets are recomputed once per round, not per batch.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import segmenter
from .cues import FusionConfig, fuse_cues, target_distribution
from .losses import LossConfig
from .metrics import ConfusionMatrix, accumulate, hard_segmentation, iou_scores
from .posterior import HeuristicConfig, mixed_target, regularized_posterior
from .synth import (
    FilterConfig,
    SceneRecord,
    derive_seed,
    filter_complex,
    refilter_simple_for_mstep,
)
from .types import DomainError, LabelSpace, ProbMap


@dataclass(frozen=True)
class EmConfig:
    """Everything the full loop needs; defaults mirror the reference setup
    (eta = 0.05, two rounds, momentum SGD at lr 0.001)."""

    k: int = 2
    eta: float = 0.05
    init_opt: segmenter.OptConfig = segmenter.OptConfig()
    mstep_opt: segmenter.OptConfig = segmenter.OptConfig()
    loss: LossConfig = LossConfig()
    filter: FilterConfig = FilterConfig()
    fusion: FusionConfig = FusionConfig()

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        HeuristicConfig(self.eta)  # range check


@dataclass(frozen=True)
class StageResult:
    name: str
    per_class_iou: tuple
    miou: float
    train_losses: tuple


@dataclass(frozen=True)
class EmReport:
    """Per-stage held-out scores and loss curves plus post-filter dataset sizes."""

    stages: tuple
    dataset_sizes: dict = field(default_factory=dict)


def _map(fn, items, threads: int = 0):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def train_initial(simple_pairs, cfg: EmConfig, threads: int = 0) -> segmenter.TrainResult:
    """Fit the initial model on fused-cue soft targets with plain cross-entropy."""
    if not simple_pairs:
        raise DomainError("initial training set is empty")

    def build(pair):
        scene, cue = pair
        if len(scene.labels) != 1:
            raise DomainError(f"record {scene.id} is not single-object")
        fused = fuse_cues(cue.saliency, cue.attention, cfg.fusion)
        target = target_distribution(fused, scene.labels.ids[0], scene.labels.space)
        return segmenter.extract_features(scene.image), target

    dataset = _map(build, simple_pairs, threads)
    init_loss = replace(cfg.loss, iou_weight=0.0)
    return segmenter.train(dataset, init_loss, cfg.init_opt)


def e_step(
    params: segmenter.SegmenterParams,
    record: SceneRecord,
    eta: float,
    features: Optional[np.ndarray] = None,
) -> ProbMap:
    """Frozen per-pixel target for one record at the current parameters."""
    if features is None:
        features = segmenter.extract_features(record.image)
    logits = segmenter.forward(params, features)
    post = regularized_posterior(logits, record.labels, record.labels.space)
    return mixed_target(post, HeuristicConfig(eta))


def m_step(params: segmenter.SegmenterParams, targets, cfg: EmConfig) -> segmenter.TrainResult:
    """Optimize the combined objective on frozen targets, warm-starting from
    the current parameters."""
    if not targets:
        raise DomainError("m-step target set is empty")
    return segmenter.train(targets, cfg.loss, cfg.mstep_opt, init_params=params)


def evaluate_params(params: segmenter.SegmenterParams, records, space: LabelSpace, threads: int = 0):
    """Per-class IoU and mIoU of hard predictions against the oracle masks."""
    if not records:
        raise DomainError("evaluation set is empty")

    def one(rec: SceneRecord) -> ConfusionMatrix:
        feats = segmenter.extract_features(rec.image)
        pred = hard_segmentation(segmenter.forward(params, feats), space)
        return accumulate(ConfusionMatrix.zeros(space), pred, rec.gt)

    cm = ConfusionMatrix.zeros(space)
    for part in _map(one, records, threads):
        cm = cm + part
    return iou_scores(cm)


def _checkpoint(checkpoint_dir, name, params, stage: StageResult):
    if checkpoint_dir is None:
        return
    base = Path(checkpoint_dir) / name
    base.parent.mkdir(parents=True, exist_ok=True)
    segmenter.save_params(params, base)
    fragment = {
        "name": stage.name,
        "per_class_iou": [None if np.isnan(v) else float(v) for v in stage.per_class_iou],
        "miou": None if np.isnan(stage.miou) else float(stage.miou),
        "train_losses": list(stage.train_losses),
    }
    (base.parent / f"{name}.stage.json").write_text(
        json.dumps(fragment, indent=2, sort_keys=True) + "\n"
    )


def run_em(
    simple_pairs,
    complex_scenes,
    val_scenes,
    cfg: EmConfig,
    checkpoint_dir=None,
    from_checkpoint=None,
    threads: int = 0,
):
    """Full loop. Returns (final params, report with 1 + k stages).

    Stage names are "Initial" and "EM iter 1..k". When ``from_checkpoint``
    is given the initial training is skipped and the parameters are loaded
    from that basename instead. The simple set is re-ranked against the
    current model before every round; round seeds derive from the M-step
    seed and the round index, so a shorter run is a prefix of a longer one.
    """
    if not simple_pairs or not complex_scenes or not val_scenes:
        raise DomainError("run_em requires nonempty simple, complex, and val sets")
    space = val_scenes[0].labels.space
    sizes = {"simple": len(simple_pairs), "complex_raw": len(complex_scenes), "val": len(val_scenes)}

    stage_name = "init"
    try:
        if from_checkpoint is not None:
            params = segmenter.load_params(from_checkpoint)
            init_losses = ()
        else:
            result = train_initial(simple_pairs, cfg, threads)
            params = result.params
            init_losses = result.epoch_losses
        iou, miou = evaluate_params(params, val_scenes, space, threads)
        stages = [StageResult("Initial", tuple(iou), miou, init_losses)]
        _checkpoint(checkpoint_dir, "init", params, stages[-1])

        stage_name = "filter_complex"
        complex_kept = filter_complex(complex_scenes, params, cfg.filter)
        sizes["complex"] = len(complex_kept)
        feature_cache = {}

        def features_of(rec: SceneRecord) -> np.ndarray:
            if rec.id not in feature_cache:
                feature_cache[rec.id] = segmenter.extract_features(rec.image)
            return feature_cache[rec.id]

        for round_idx in range(1, cfg.k + 1):
            stage_name = f"em_iter_{round_idx}"
            simple_kept = refilter_simple_for_mstep(simple_pairs, params, cfg.filter)
            sizes[f"mstep_simple_iter{round_idx}"] = len(simple_kept)
            scenes = list(complex_kept) + [scene for scene, _ in simple_kept]
            frozen = params

            def build(rec: SceneRecord):
                feats = features_of(rec)
                return feats, e_step(frozen, rec, cfg.eta, feats)

            targets = _map(build, scenes, threads)
            round_cfg = replace(
                cfg,
                mstep_opt=replace(
                    cfg.mstep_opt,
                    seed=derive_seed(cfg.mstep_opt.seed, f"mstep/{round_idx}"),
                ),
            )
            result = m_step(params, targets, round_cfg)
            params = result.params
            iou, miou = evaluate_params(params, val_scenes, space, threads)
            stages.append(
                StageResult(f"EM iter {round_idx}", tuple(iou), miou, result.epoch_losses)
            )
            _checkpoint(checkpoint_dir, f"iter_{round_idx:02d}", params, stages[-1])
    except Exception as exc:
        message = f"[stage {stage_name}] {exc}"
        if isinstance(exc, OSError):
            raise OSError(message) from exc
        try:
            wrapped = type(exc)(message)
        except Exception:
            wrapped = RuntimeError(message)
        raise wrapped from exc

    return params, EmReport(tuple(stages), sizes)
