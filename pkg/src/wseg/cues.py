"""Fusing a class-agnostic saliency map with a class-specific attention map.

The fused map M assigns each pixel the probability of belonging to the single
object class declared for the image; 1 - M is the background probability.
That soft two-point distribution is the training target for the initial model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import CueMap, DomainError, LabelSpace, ProbMap, SegMask

COMBINERS = ("max", "product", "mean")

# Placeholder space for binary masks that are not tied to a label space.
_BINARY_SPACE = LabelSpace(("object",))


@dataclass(frozen=True)
class FusionConfig:
    """How saliency and attention are combined and binarized.

    ``max`` is the default combiner (the union of the two cues); ``product``
    and ``mean`` are offered since the combiner is a free choice.
    """

    combiner: str = "max"
    saliency_threshold: float = 0.5
    attention_threshold: float = 0.5

    def __post_init__(self):
        if self.combiner not in COMBINERS:
            raise DomainError(f"combiner must be one of {COMBINERS}, got {self.combiner!r}")
        for name in ("saliency_threshold", "attention_threshold"):
            t = getattr(self, name)
            if not 0.0 <= t <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {t}")


def fuse_cues(saliency: CueMap, attention: CueMap, cfg: FusionConfig = FusionConfig()) -> CueMap:
    """Combine the two cue maps pixelwise into the object-probability map M."""
    if saliency.values.shape != attention.values.shape:
        raise DomainError(
            f"cue shapes differ: {saliency.values.shape} vs {attention.values.shape}"
        )
    s, a = saliency.values, attention.values
    if cfg.combiner == "max":
        fused = np.maximum(s, a)
    elif cfg.combiner == "product":
        fused = s * a
    else:
        fused = 0.5 * (s + a)
    return CueMap(fused)


def target_distribution(fused: CueMap, object_class: int, space: LabelSpace) -> ProbMap:
    """Soft per-pixel target: mass M(m) on the object class, 1 - M(m) on background."""
    z = int(object_class)
    if not 1 <= z <= space.num_classes:
        raise DomainError(f"object class {z} outside [1, {space.num_classes}]")
    h, w = fused.values.shape
    target = np.zeros((h, w, space.num_labels), dtype=np.float64)
    target[:, :, z] = fused.values
    target[:, :, 0] = 1.0 - fused.values
    return ProbMap(target)


def binarize(cue: CueMap, threshold: float, space: LabelSpace = _BINARY_SPACE) -> SegMask:
    """Threshold a cue map into a {0, 1} mask; a pixel is 1 iff value > threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise DomainError(f"threshold must lie in [0, 1], got {threshold}")
    return SegMask((cue.values > threshold).astype(np.int64), space)


def mask_intersection_area(a: SegMask, b: SegMask) -> int:
    """Number of pixels where both masks equal 1."""
    if a.values.shape != b.values.shape:
        raise DomainError(f"mask shapes differ: {a.values.shape} vs {b.values.shape}")
    return int(((a.values == 1) & (b.values == 1)).sum())
