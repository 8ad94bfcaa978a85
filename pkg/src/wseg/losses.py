"""Training objectives with analytic gradients w.r.t. the logits.

Two terms: soft cross-entropy between a target distribution and the softmax
of the logits, and a probabilistic intersection-over-union gain. The combined
objective minimizes ``cross_entropy - iou_weight * iou_gain``. A central
finite-difference estimator is included as an independent gradient oracle.

All accumulation is in float64. Pixels flagged invalid on the target map
contribute zero loss and zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .types import DomainError, LogitMap, ProbMap


@dataclass(frozen=True)
class LossConfig:
    """Weights and ignore-handling shared by all loss terms.

    ``normalization`` applies to the cross-entropy term only: "mean" divides
    by the number of valid pixels, "sum" leaves the raw pixel sum. Classes
    whose soft-union denominator falls below ``denom_eps`` are excluded from
    the IoU mean, so entirely absent classes cannot poison the average.
    """

    iou_weight: float = 1.0
    denom_eps: float = 1e-8
    normalization: str = "mean"

    def __post_init__(self):
        if self.iou_weight < 0.0:
            raise DomainError(f"iou_weight must be >= 0, got {self.iou_weight}")
        if self.denom_eps <= 0.0:
            raise DomainError(f"denom_eps must be > 0, got {self.denom_eps}")
        if self.normalization not in ("mean", "sum"):
            raise DomainError(f"normalization must be 'mean' or 'sum', got {self.normalization!r}")


@dataclass(frozen=True)
class LossResult:
    """Scalar objective value plus d(value)/d(logits), zero on invalid pixels."""

    value: float
    grad: np.ndarray


def log_softmax(values: np.ndarray) -> np.ndarray:
    """Row-stable log softmax over the last axis."""
    shifted = values - values.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(values: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(values))


def _check_pair(target: ProbMap, f: LogitMap) -> np.ndarray:
    if target.values.shape != f.values.shape:
        raise DomainError(
            f"target shape {target.values.shape} does not match logits {f.values.shape}"
        )
    return target.valid_mask()


def soft_cross_entropy(target: ProbMap, f: LogitMap, cfg: LossConfig = LossConfig()) -> LossResult:
    """Cross-entropy of the softmax likelihood against a soft target.

    value = -norm * sum_valid sum_l target(l) * log softmax(f)(l), with the
    gradient norm * (softmax(f) - target) per valid pixel.
    """
    mask = _check_pair(target, f)
    t = target.values
    logp = log_softmax(f.values)
    n_valid = int(mask.sum())
    norm = 1.0 / max(n_valid, 1) if cfg.normalization == "mean" else 1.0
    per_pixel = -(t * logp).sum(axis=-1)
    value = norm * float(per_pixel[mask].sum())
    grad = norm * (np.exp(logp) - t)
    grad[~mask] = 0.0
    return LossResult(value, grad)


def _soft_iou_terms(t: np.ndarray, p: np.ndarray, mask: np.ndarray):
    """Per-class soft intersection and soft union over valid pixels."""
    m = mask[:, :, None]
    tm = np.where(m, t, 0.0)
    pm = np.where(m, p, 0.0)
    inter = (tm * pm).sum(axis=(0, 1))
    union = (tm + pm - tm * pm).sum(axis=(0, 1))
    return inter, union


def prob_iou(target: ProbMap, pred: ProbMap, denom_eps: float = 1e-8) -> float:
    """Probabilistic IoU between two probability maps (value only)."""
    if target.values.shape != pred.values.shape:
        raise DomainError(
            f"target shape {target.values.shape} does not match prediction {pred.values.shape}"
        )
    inter, union = _soft_iou_terms(target.values, pred.values, target.valid_mask())
    include = union >= denom_eps
    if not include.any():
        return 0.0
    return float((inter[include] / union[include]).mean())


def prob_iou_gain(target: ProbMap, f: LogitMap, cfg: LossConfig = LossConfig()) -> LossResult:
    """Probabilistic IoU between target and softmax(f), with its gradient.

    Per class l: inter_l = sum_m t_m(l) p_m(l) and
    union_l = sum_m (t_m(l) + p_m(l) - t_m(l) p_m(l)); the value is the mean
    of inter/union over classes whose union clears ``denom_eps``. The target
    is treated as a constant; the gradient flows only through the softmax.
    """
    mask = _check_pair(target, f)
    t = target.values
    p = softmax(f.values)
    inter, union = _soft_iou_terms(t, p, mask)
    include = union >= cfg.denom_eps
    n_inc = int(include.sum())
    if n_inc == 0:
        return LossResult(0.0, np.zeros_like(p))
    value = float((inter[include] / union[include]).mean())

    # d(inter_l/union_l)/dp_m(l) = (t * union_l - inter_l * (1 - t)) / union_l^2
    g = np.zeros_like(p)
    u2 = union[include] ** 2
    g[:, :, include] = (t[:, :, include] * union[include] - inter[include] * (1.0 - t[:, :, include])) / u2
    g /= n_inc
    # Chain through the softmax: dp(l)/df(k) = p(l) (delta_lk - p(k)).
    grad = p * (g - (g * p).sum(axis=-1, keepdims=True))
    grad[~mask] = 0.0
    return LossResult(value, grad)


def combined_loss(target: ProbMap, f: LogitMap, cfg: LossConfig = LossConfig()) -> LossResult:
    """Cross-entropy minus the weighted IoU gain (a quantity to minimize)."""
    ce = soft_cross_entropy(target, f, cfg)
    if cfg.iou_weight == 0.0:
        return ce
    iou = prob_iou_gain(target, f, cfg)
    return LossResult(ce.value - cfg.iou_weight * iou.value, ce.grad - cfg.iou_weight * iou.grad)


def finite_diff_grad(evaluator: Callable[[LogitMap], float], f: LogitMap, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient estimate of a scalar loss evaluator.

    Perturbs one logit coordinate at a time; the estimator is independent of
    any analytic gradient code and serves as its verification oracle.
    """
    if h <= 0.0:
        raise DomainError(f"step size must be > 0, got {h}")
    base = f.values
    grad = np.zeros_like(base)
    flat = grad.ravel()
    for i in range(base.size):
        bumped = base.copy().ravel()
        bumped[i] += h
        hi = evaluator(LogitMap(bumped.reshape(base.shape)))
        bumped[i] -= 2.0 * h
        lo = evaluator(LogitMap(bumped.reshape(base.shape)))
        flat[i] = (hi - lo) / (2.0 * h)
    return grad


@dataclass(frozen=True)
class GradCheckReport:
    """Worst relative error per loss over a batch of random instances."""

    worst: dict
    worst_overall: float
    worst_loss: str
    worst_coord: tuple
    trials: int

    def passed(self, tolerance: float) -> bool:
        return self.worst_overall < tolerance


def _random_instance(rng: np.random.Generator):
    h = int(rng.integers(1, 9))
    w = int(rng.integers(1, 9))
    n_labels = int(rng.integers(2, 7))
    logits = LogitMap(rng.normal(0.0, 2.0, size=(h, w, n_labels)))
    t = rng.dirichlet(np.ones(n_labels), size=(h, w))
    # Zero out a random subset of classes (renormalized) so targets exercise
    # the excluded-class paths of the IoU term.
    drop = rng.random(n_labels) < 0.3
    if drop.all():
        drop[int(rng.integers(0, n_labels))] = False
    t[:, :, drop] = 0.0
    t /= t.sum(axis=-1, keepdims=True)
    valid = rng.random((h, w)) > 0.15
    if not valid.any():
        valid[0, 0] = True
    target = ProbMap(t, valid=valid)
    return target, logits


def grad_check(trials: int = 100, seed: int = 42, h: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients against finite differences on random cases.

    Relative error is max over coordinates of |a - b| / max(1, |a|), where a
    is the finite-difference estimate.
    """
    rng = np.random.default_rng(seed)
    worst = {"cross_entropy": 0.0, "iou_gain": 0.0, "combined": 0.0}
    worst_overall = -1.0
    worst_loss = ""
    worst_coord = (0, 0, 0)
    for _ in range(int(trials)):
        target, logits = _random_instance(rng)
        cfg = LossConfig(iou_weight=float(rng.uniform(0.0, 2.0)))
        evaluations = (
            ("cross_entropy", lambda lm: soft_cross_entropy(target, lm, cfg)),
            ("iou_gain", lambda lm: prob_iou_gain(target, lm, cfg)),
            ("combined", lambda lm: combined_loss(target, lm, cfg)),
        )
        for name, fn in evaluations:
            analytic = fn(logits).grad
            estimate = finite_diff_grad(lambda lm: fn(lm).value, logits, h)
            err = np.abs(analytic - estimate) / np.maximum(1.0, np.abs(estimate))
            idx = np.unravel_index(int(err.argmax()), err.shape)
            err_max = float(err[idx])
            worst[name] = max(worst[name], err_max)
            if err_max > worst_overall:
                worst_overall = err_max
                worst_loss = name
                worst_coord = tuple(int(i) for i in idx)
    return GradCheckReport(worst, worst_overall, worst_loss, worst_coord, int(trials))
