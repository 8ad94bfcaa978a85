"""Core label-space and per-pixel map types shared by every other module.

All map types validate their invariants at construction and hold read-only
numpy arrays, so instances are immutable values that can be shared freely
between threads. Pixel index order is row-major throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_IGNORE_LABEL = 255

# Per-pixel probability vectors must sum to 1 within this tolerance.
PROB_SUM_TOL = 1e-9


class DomainError(ValueError):
    """An argument violates a documented precondition or invariant."""


def _readonly(values, dtype) -> np.ndarray:
    out = np.array(values, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LabelSpace:
    """Label ids 0..c, where 0 is the background and 1..c name the classes.

    ``class_names`` lists the foreground classes; id ``i`` is the name at
    position ``i - 1``. ``ignore_label`` is a sentinel outside [0, c] that
    marks pixels excluded from losses and metrics.
    """

    class_names: tuple
    ignore_label: int = DEFAULT_IGNORE_LABEL

    def __post_init__(self):
        names = tuple(str(n) for n in self.class_names)
        object.__setattr__(self, "class_names", names)
        if len(names) < 1:
            raise DomainError("at least one foreground class required")
        if len(set(names)) != len(names):
            raise DomainError("class names must be unique")
        ig = int(self.ignore_label)
        object.__setattr__(self, "ignore_label", ig)
        if 0 <= ig <= self.num_classes:
            raise DomainError(
                f"ignore_label {ig} collides with label ids 0..{self.num_classes}"
            )

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def num_labels(self) -> int:
        return self.num_classes + 1

    @property
    def all_names(self) -> tuple:
        return ("background",) + self.class_names

    def name_of(self, label: int) -> str:
        if not 0 <= label <= self.num_classes:
            raise DomainError(f"label {label} outside [0, {self.num_classes}]")
        return self.all_names[label]


@dataclass(frozen=True)
class CueMap:
    """Dense per-pixel probability field with every value in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values, np.float64)
        if v.ndim != 2:
            raise DomainError(f"cue map must be 2-d, got shape {v.shape}")
        if not np.isfinite(v).all() or v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0:
            raise DomainError("cue values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LogitMap:
    """Per-pixel unnormalized scores, one row of length |L| per pixel."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values, np.float64)
        if v.ndim != 3:
            raise DomainError(f"logit map must be (H, W, L), got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DomainError("logits must be finite")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_labels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ProbMapViolation:
    """First pixel (row-major) at which a probability map breaks the simplex."""

    y: int
    x: int
    message: str

    def __str__(self):
        return f"pixel ({self.y}, {self.x}): {self.message}"


def validate(values, valid=None, tol: float = PROB_SUM_TOL) -> Optional[ProbMapViolation]:
    """Check the per-pixel simplex invariant; return the first violation or None.

    Accepts a ProbMap or a raw (H, W, L) array plus optional (H, W) validity
    mask. Invalid pixels are skipped.
    """
    if isinstance(values, ProbMap):
        valid = values.valid if valid is None else valid
        values = values.values
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 3:
        return ProbMapViolation(0, 0, f"expected (H, W, L) array, got shape {v.shape}")
    neg = (v < 0.0).any(axis=-1)
    off = np.abs(v.sum(axis=-1) - 1.0) > tol
    bad = neg | off | ~np.isfinite(v).all(axis=-1)
    if valid is not None:
        bad &= np.asarray(valid, dtype=bool)
    if not bad.any():
        return None
    flat = int(np.flatnonzero(bad.ravel())[0])
    y, x = divmod(flat, v.shape[1])
    if not np.isfinite(v[y, x]).all():
        msg = f"non-finite entry in {v[y, x]!r}"
    elif neg[y, x]:
        msg = f"negative mass in {v[y, x]!r}"
    else:
        msg = f"values sum to {v[y, x].sum()!r}, not 1"
    return ProbMapViolation(y, x, msg)


@dataclass(frozen=True)
class ProbMap:
    """Per-pixel distribution over the label space.

    ``valid`` is an optional (H, W) boolean mask; False marks pixels that
    carry the ignore label and contribute nothing to losses or metrics.
    """

    values: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        v = _readonly(self.values, np.float64)
        mask = self.valid
        if mask is not None:
            mask = _readonly(mask, bool)
            if mask.shape != v.shape[:2]:
                raise DomainError(
                    f"valid mask shape {mask.shape} does not match map {v.shape[:2]}"
                )
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", mask)
        if v.ndim != 3:
            raise DomainError(f"prob map must be (H, W, L), got shape {v.shape}")
        violation = validate(v, mask)
        if violation is not None:
            raise DomainError(str(violation))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_labels(self) -> int:
        return self.values.shape[2]

    def valid_mask(self) -> np.ndarray:
        """Validity as a concrete boolean array (all-True when valid is None)."""
        if self.valid is None:
            return np.ones(self.values.shape[:2], dtype=bool)
        return self.valid


@dataclass(frozen=True)
class SegMask:
    """Per-pixel hard label assignment, possibly carrying the ignore label."""

    values: np.ndarray
    space: LabelSpace

    def __post_init__(self):
        v = _readonly(self.values, np.int64)
        if v.ndim != 2:
            raise DomainError(f"segmentation mask must be 2-d, got shape {v.shape}")
        ok = ((v >= 0) & (v <= self.space.num_classes)) | (v == self.space.ignore_label)
        if not ok.all():
            bad = int(v[~ok].ravel()[0])
            raise DomainError(
                f"mask value {bad} outside [0, {self.space.num_classes}] "
                f"and not ignore ({self.space.ignore_label})"
            )
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelSet:
    """Nonempty set of foreground class ids present in an image."""

    ids: tuple
    space: LabelSpace

    def __post_init__(self):
        ids = tuple(sorted({int(i) for i in self.ids}))
        object.__setattr__(self, "ids", ids)
        if not ids:
            raise DomainError("label set must be nonempty")
        if ids[0] < 1 or ids[-1] > self.space.num_classes:
            raise DomainError(
                f"label ids {ids} outside foreground range [1, {self.space.num_classes}]"
            )

    def __contains__(self, label) -> bool:
        return int(label) in self.ids

    def __iter__(self):
        return iter(self.ids)

    def __len__(self) -> int:
        return len(self.ids)


def one_hot(label: int, space: LabelSpace) -> np.ndarray:
    """Length-|L| distribution with all mass on ``label``."""
    label = int(label)
    if not 0 <= label <= space.num_classes:
        raise DomainError(f"label {label} outside [0, {space.num_classes}]")
    row = np.zeros(space.num_labels, dtype=np.float64)
    row[label] = 1.0
    return row
