"""Latent-posterior estimation: the E-step of the training loop.

The image-level label set acts as a prior that zeroes posterior mass on
absent classes; the remaining softmax mass is renormalized over the classes
present in the image plus the background. Each pixel's posterior is then
blended with its own argmax one-hot according to the relative margin between
the two most probable labels, so confident pixels get hard targets and
ambiguous pixels keep soft ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import DomainError, LabelSet, LabelSpace, LogitMap, ProbMap


@dataclass(frozen=True)
class PriorVector:
    """Additive label prior with entries 0 (allowed) or -inf (excluded)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        v.setflags(write=False)
        if v.ndim != 1 or v.shape[0] < 2:
            raise DomainError(f"prior must be a vector over >= 2 labels, got {v.shape}")
        if v[0] != 0.0:
            raise DomainError("background entry of the prior must be 0")
        if not np.all((v == 0.0) | np.isneginf(v)):
            raise DomainError("prior entries must be 0 or -inf")
        object.__setattr__(self, "values", v)

    @property
    def allowed(self) -> np.ndarray:
        return self.values == 0.0


@dataclass(frozen=True)
class HeuristicConfig:
    """Margin threshold for switching to hard per-pixel targets."""

    eta: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")


def label_prior(z: LabelSet, space: LabelSpace) -> PriorVector:
    """0 on background and on every class in z, -inf on the rest."""
    values = np.full(space.num_labels, -np.inf)
    values[0] = 0.0
    values[list(z.ids)] = 0.0
    return PriorVector(values)


def regularized_posterior(f: LogitMap, z: LabelSet, space: LabelSpace) -> ProbMap:
    """Softmax of logits plus the label prior.

    Exclusion is applied by renormalizing over the allowed labels rather than
    by -inf arithmetic; the result is identical and never overflows. Excluded
    labels carry exactly zero mass.
    """
    if f.num_labels != space.num_labels:
        raise DomainError(
            f"logit map has {f.num_labels} labels, space has {space.num_labels}"
        )
    allowed = label_prior(z, space).allowed
    sub = f.values[:, :, allowed]
    sub = sub - sub.max(axis=-1, keepdims=True)
    expd = np.exp(sub)
    expd /= expd.sum(axis=-1, keepdims=True)
    out = np.zeros_like(f.values)
    out[:, :, allowed] = expd
    return ProbMap(out)


def relative_margin(p) -> np.ndarray:
    """(p1 - p2) / p1 for the two largest entries of each distribution.

    Accepts a single length-|L| distribution or any (..., L) stack; returns
    a scalar or the matching (...) array. Exact ties give 0.
    """
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape[-1] < 2:
        raise DomainError("relative margin needs at least two labels")
    top2 = np.partition(arr, arr.shape[-1] - 2, axis=-1)[..., -2:]
    p2 = top2[..., 0]
    p1 = top2[..., 1]
    r = (p1 - p2) / p1
    return r if arr.ndim > 1 else float(r)


def epsilon_from_heuristic(r, cfg: HeuristicConfig = HeuristicConfig()):
    """Blend weight: 1 when the margin clears eta, otherwise the margin itself."""
    r_arr = np.asarray(r, dtype=np.float64)
    eps = np.where(r_arr >= cfg.eta, 1.0, r_arr)
    return eps if eps.ndim else float(eps)


def mixed_target(posterior: ProbMap, cfg: HeuristicConfig = HeuristicConfig()) -> ProbMap:
    """Per-pixel blend (1 - eps) * posterior + eps * one_hot(argmax).

    Ties in the argmax resolve to the lowest label id. The blend never moves
    the per-pixel argmax and keeps zero entries at zero.
    """
    p = posterior.values
    top = p.argmax(axis=-1)
    eps = epsilon_from_heuristic(relative_margin(p), cfg)
    out = (1.0 - eps)[:, :, None] * p
    h, w = top.shape
    ys, xs = np.ogrid[:h, :w]
    out[ys, xs, top] += eps
    return ProbMap(out, valid=posterior.valid)
