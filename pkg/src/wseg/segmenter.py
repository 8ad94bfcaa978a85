"""Reference per-pixel linear-softmax segmenter over handcrafted features.

The model is deliberately small: logits are a linear map of fixed per-pixel
features, trained with momentum SGD. Anything differentiable that produces a
LogitMap can stand in for it; the training loop only needs features, targets,
and the loss gradients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter

from . import losses
from .tensorfile import read_tensor, write_tensor
from .types import DomainError, LogitMap, ProbMap


class TrainingError(RuntimeError):
    """Optimization hit a non-finite loss or gradient."""


class FeatureExtractor:
    """Deterministic map from an (H, W, 3) image to (H, W, dim) features.

    Feature 0 must be the constant 1 (the bias input).
    """

    dim: int = 0
    version: str = ""

    def extract(self, image: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ColorPositionStats(FeatureExtractor):
    """Colors, normalized position, and clamped 3x3 local channel statistics.

    Per pixel: [1, R, G, B, x/W, y/H, mean3x3(R,G,B), std3x3(R,G,B)].
    """

    dim = 12
    version = "color-pos-stats-v1"

    def extract(self, image: np.ndarray) -> np.ndarray:
        img = np.asarray(image, dtype=np.float64)
        if img.ndim != 3 or img.shape[2] != 3:
            raise DomainError(f"expected an (H, W, 3) image, got shape {img.shape}")
        h, w = img.shape[:2]
        feats = np.empty((h, w, self.dim), dtype=np.float64)
        feats[:, :, 0] = 1.0
        feats[:, :, 1:4] = img
        feats[:, :, 4] = np.arange(w, dtype=np.float64)[None, :] / w
        feats[:, :, 5] = np.arange(h, dtype=np.float64)[:, None] / h
        mean = uniform_filter(img, size=(3, 3, 1), mode="nearest")
        mean_sq = uniform_filter(img * img, size=(3, 3, 1), mode="nearest")
        feats[:, :, 6:9] = mean
        feats[:, :, 9:12] = np.sqrt(np.clip(mean_sq - mean * mean, 0.0, None))
        return feats


DEFAULT_EXTRACTOR = ColorPositionStats()


def extract_features(image: np.ndarray) -> np.ndarray:
    """Per-pixel features from the default extractor."""
    return DEFAULT_EXTRACTOR.extract(image)


@dataclass(frozen=True)
class SegmenterParams:
    """Weight matrix of shape (num_labels, feature_dim); column 0 is the bias."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        w.setflags(write=False)
        if w.ndim != 2:
            raise DomainError(f"weights must be 2-d, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise DomainError("weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def num_labels(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, num_labels: int, feature_dim: int) -> "SegmenterParams":
        return cls(np.zeros((num_labels, feature_dim)))


def forward(params: SegmenterParams, features: np.ndarray) -> LogitMap:
    """Logits f(m, l) = <W_l, features(m)>; linear in the weights."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3 or feats.shape[2] != params.feature_dim:
        raise DomainError(
            f"features shape {feats.shape} incompatible with weights {params.weights.shape}"
        )
    return LogitMap(feats @ params.weights.T)


def softmax_probs(f: LogitMap) -> ProbMap:
    """Per-pixel softmax of a logit map."""
    return ProbMap(losses.softmax(f.values))


@dataclass(frozen=True)
class OptConfig:
    """Momentum SGD settings; the learning rate is divided by ``lr_decay_factor``
    every ``lr_decay_every`` epochs and gradients are averaged over
    ``accumulation`` images per parameter update."""

    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    lr_decay_every: int = 10
    lr_decay_factor: float = 10.0
    epochs: int = 10
    accumulation: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "momentum", "weight_decay"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be >= 0")
        if self.lr_decay_every < 1 or self.lr_decay_factor <= 0.0:
            raise DomainError("invalid learning-rate schedule")
        if self.epochs < 0 or self.accumulation < 1:
            raise DomainError("epochs must be >= 0 and accumulation >= 1")


@dataclass(frozen=True)
class SgdState:
    velocity: np.ndarray

    @classmethod
    def zeros(cls, params: SegmenterParams) -> "SgdState":
        return cls(np.zeros_like(params.weights))


def sgd_step(params: SegmenterParams, grad: np.ndarray, state: SgdState, cfg: OptConfig):
    """One momentum-SGD update with L2 decay folded into the gradient.

    v' = momentum * v + grad + weight_decay * W (bias column excluded);
    W' = W - lr * v'. Returns (params', state').
    """
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.weights.shape:
        raise DomainError(f"gradient shape {g.shape} does not match weights")
    if not np.isfinite(g).all():
        raise TrainingError("non-finite gradient in sgd_step")
    decayed = cfg.weight_decay * params.weights
    decayed = decayed.copy()
    decayed[:, 0] = 0.0
    velocity = cfg.momentum * state.velocity + g + decayed
    weights = params.weights - cfg.learning_rate * velocity
    return SegmenterParams(weights), SgdState(velocity)


@dataclass(frozen=True)
class TrainResult:
    params: SegmenterParams
    epoch_losses: tuple


def _weight_grad(logit_grad: np.ndarray, features: np.ndarray) -> np.ndarray:
    h, w, n_labels = logit_grad.shape
    return logit_grad.reshape(-1, n_labels).T @ features.reshape(h * w, -1)


def train(
    dataset,
    loss_cfg: losses.LossConfig,
    opt_cfg: OptConfig,
    init_params: SegmenterParams = None,
) -> TrainResult:
    """Train on a list of (features, target ProbMap) pairs.

    Starts from zero weights unless ``init_params`` is given, shuffles the
    dataset each epoch with a generator seeded from ``opt_cfg.seed``, and
    averages gradients over groups of ``accumulation`` images per update.
    Records the mean per-image loss of each epoch. Fully deterministic for a
    fixed (dataset order, seed, configs).
    """
    if not dataset:
        raise DomainError("training dataset must be nonempty")
    first_feats, first_target = dataset[0]
    if init_params is None:
        params = SegmenterParams.zeros(first_target.num_labels, first_feats.shape[2])
    else:
        params = init_params
    state = SgdState.zeros(params)
    rng = np.random.default_rng(opt_cfg.seed)
    n = len(dataset)
    epoch_losses = []
    for epoch in range(opt_cfg.epochs):
        lr = opt_cfg.learning_rate / opt_cfg.lr_decay_factor ** (epoch // opt_cfg.lr_decay_every)
        cfg_epoch = replace(opt_cfg, learning_rate=lr)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, opt_cfg.accumulation):
            group = order[start : start + opt_cfg.accumulation]
            acc = np.zeros_like(params.weights)
            for idx in group:
                feats, target = dataset[int(idx)]
                result = losses.combined_loss(target, forward(params, feats), loss_cfg)
                if not np.isfinite(result.value):
                    raise TrainingError(f"non-finite loss at dataset index {int(idx)}")
                total += result.value
                acc += _weight_grad(result.grad, feats)
            acc /= len(group)
            params, state = sgd_step(params, acc, state, cfg_epoch)
        epoch_losses.append(total / n)
    return TrainResult(params, tuple(epoch_losses))


def save_params(params: SegmenterParams, base_path, extractor: FeatureExtractor = DEFAULT_EXTRACTOR):
    """Write <base>.wst (weights) and <base>.json (shape + feature version)."""
    base = Path(base_path)
    write_tensor(base.with_suffix(".wst"), params.weights)
    sidecar = {
        "d": params.feature_dim,
        "num_labels": params.num_labels,
        "feature_version": extractor.version,
    }
    base.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_params(base_path) -> SegmenterParams:
    base = Path(base_path)
    weights = read_tensor(base.with_suffix(".wst")).astype(np.float64)
    meta = json.loads(base.with_suffix(".json").read_text())
    if weights.ndim != 2 or weights.shape != (meta["num_labels"], meta["d"]):
        raise DomainError(
            f"checkpoint shape {weights.shape} does not match sidecar {meta}"
        )
    return SegmenterParams(weights)
