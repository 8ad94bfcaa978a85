"""Synthetic scenes with oracle ground truth, noisy cues, and dataset filters.

Scenes are flat-colored shapes on a textured background; each foreground
class owns one shape family and one color, so a linear per-pixel model can
learn the task while the cues stay imperfect. Saliency and attention cues
are degraded indicators of the oracle masks, standing in for external
saliency/attention networks. The filter functions reproduce the image-list
heuristics (size bounds, predicted-label agreement, probability floor,
intersection-area ranking, foreground-ratio screen) with strict boundaries:
"less than", "greater than", and "below" are all strict comparisons.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, shift as nd_shift
from scipy.stats import truncnorm

from . import segmenter
from .cues import binarize, mask_intersection_area
from .metrics import hard_segmentation
from .tensorfile import read_tensor, write_tensor
from .types import CueMap, DomainError, LabelSet, LabelSpace, SegMask

DEFAULT_CLASS_NAMES = ("circle", "cross", "diamond", "ring", "square", "triangle")

# Background plus one well-separated color per shape family.
_BACKGROUND_COLOR = np.array([0.45, 0.45, 0.45])
_CLASS_COLORS = (
    np.array([0.85, 0.15, 0.15]),  # circle
    np.array([0.15, 0.75, 0.15]),  # cross
    np.array([0.15, 0.25, 0.85]),  # diamond
    np.array([0.85, 0.80, 0.10]),  # ring
    np.array([0.80, 0.15, 0.80]),  # square
    np.array([0.10, 0.80, 0.80]),  # triangle
)
_PIXEL_NOISE = 0.03
_MIN_DIM = 16


def default_label_space(num_classes: int = 6) -> LabelSpace:
    if not 1 <= num_classes <= len(DEFAULT_CLASS_NAMES):
        raise DomainError(
            f"num_classes must lie in [1, {len(DEFAULT_CLASS_NAMES)}], got {num_classes}"
        )
    return LabelSpace(DEFAULT_CLASS_NAMES[:num_classes])


def derive_seed(root: int, tag: str) -> int:
    """Per-purpose seed: root XOR the first 8 little-endian bytes of sha256(tag)."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return (int(root) ^ int.from_bytes(digest[:8], "little")) & 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class NoiseConfig:
    """Cue degradation: pixel flips, a random sub-pixel shift, and a blur."""

    boundary_jitter: float = 0.0
    false_positive_rate: float = 0.0
    false_negative_rate: float = 0.0
    blur_radius: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("false_positive_rate", "false_negative_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {rate}")
        if self.boundary_jitter < 0.0 or self.blur_radius < 0.0:
            raise DomainError("jitter and blur must be >= 0")

    @classmethod
    def from_level(cls, level: float, seed: int = 0) -> "NoiseConfig":
        """Scalar noise knob; 0 is the exact oracle, 1.0 is 'moderate'."""
        if level < 0.0:
            raise DomainError(f"noise level must be >= 0, got {level}")
        return cls(
            boundary_jitter=1.0 * level,
            false_positive_rate=min(0.5, 0.02 * level),
            false_negative_rate=min(0.5, 0.02 * level),
            blur_radius=1.0 * level,
            seed=seed,
        )


@dataclass(frozen=True)
class SceneRecord:
    """One image with its weak labels and oracle mask.

    The oracle mask feeds evaluation and cue synthesis only; training never
    sees it.
    """

    id: str
    image: np.ndarray
    labels: LabelSet
    gt: SegMask

    def __post_init__(self):
        img = np.array(self.image, dtype=np.float64, copy=True)
        img.setflags(write=False)
        if img.ndim != 3 or img.shape[2] != 3:
            raise DomainError(f"image must be (H, W, 3), got shape {img.shape}")
        object.__setattr__(self, "image", img)
        present = set(np.unique(self.gt.values)) - {0}
        if not present <= set(self.labels.ids):
            raise DomainError(
                f"oracle mask labels {sorted(present)} not covered by declared {self.labels.ids}"
            )

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]


@dataclass(frozen=True)
class CueRecord:
    """Synthesized saliency/attention pair plus the mock classifier output."""

    scene_id: str
    saliency: CueMap
    attention: CueMap
    predicted_class: int
    predicted_prob: float

    def __post_init__(self):
        if not 0.0 <= self.predicted_prob <= 1.0:
            raise DomainError(f"predicted_prob must lie in [0, 1], got {self.predicted_prob}")


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the dataset heuristics; all boundaries are strict."""

    min_side: int = 200
    max_side: int = 500
    min_attention_prob: float = 0.2
    saliency_threshold: float = 0.5
    top_k_per_class: int = 1500
    top_k_overrides: dict = field(default_factory=dict)
    fg_ratio_min: float = 0.05
    m_step_top_n: int = 10000

    def __post_init__(self):
        if self.min_side < 1 or self.max_side < self.min_side:
            raise DomainError("need 1 <= min_side <= max_side")
        if not 0.0 <= self.min_attention_prob <= 1.0:
            raise DomainError("min_attention_prob must lie in [0, 1]")
        if not 0.0 <= self.saliency_threshold <= 1.0:
            raise DomainError("saliency_threshold must lie in [0, 1]")
        if not 0.0 <= self.fg_ratio_min <= 1.0:
            raise DomainError("fg_ratio_min must lie in [0, 1]")
        if self.top_k_per_class < 1 or self.m_step_top_n < 1:
            raise DomainError("top_k_per_class and m_step_top_n must be >= 1")


# ---------------------------------------------------------------------------
# Scene generation
# ---------------------------------------------------------------------------

def _shape_mask(class_id: int, dims, cx: float, cy: float, size: float) -> np.ndarray:
    h, w = dims
    ys, xs = np.ogrid[:h, :w]
    dx = xs - cx
    dy = ys - cy
    kind = DEFAULT_CLASS_NAMES[(class_id - 1) % len(DEFAULT_CLASS_NAMES)]
    if kind == "circle":
        return dx * dx + dy * dy <= size * size
    if kind == "cross":
        arm = max(size * 0.35, 1.0)
        return ((np.abs(dx) <= arm) & (np.abs(dy) <= size)) | (
            (np.abs(dy) <= arm) & (np.abs(dx) <= size)
        )
    if kind == "diamond":
        return np.abs(dx) + np.abs(dy) <= size
    if kind == "ring":
        rr = dx * dx + dy * dy
        inner = 0.55 * size
        return (rr <= size * size) & (rr >= inner * inner)
    if kind == "square":
        return (np.abs(dx) <= size) & (np.abs(dy) <= size)
    # triangle: apex up, base at cy + size
    half_width = (dy + size) / 2.0
    return (dy >= -size) & (dy <= size) & (np.abs(dx) <= half_width)


def _textured_background(rng: np.random.Generator, dims) -> np.ndarray:
    h, w = dims
    ys, xs = np.mgrid[:h, :w]
    phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
    freq = rng.uniform(1.0, 3.0, size=2)
    ripple = 0.04 * np.sin(2.0 * np.pi * freq[0] * xs / w + phase[0])
    ripple += 0.04 * np.sin(2.0 * np.pi * freq[1] * ys / h + phase[1])
    return _BACKGROUND_COLOR[None, None, :] + ripple[:, :, None]


def _check_dims(dims) -> tuple:
    h, w = int(dims[0]), int(dims[1])
    if min(h, w) < _MIN_DIM:
        raise DomainError(f"dims {dims} smaller than minimum {_MIN_DIM} px per side")
    return h, w


def _finish_image(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    img = img + rng.normal(0.0, _PIXEL_NOISE, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_simple(seed: int, class_id: int, space: LabelSpace, dims=(64, 64)) -> SceneRecord:
    """One roughly centered shape of the given class on a textured background."""
    if not 1 <= class_id <= space.num_classes:
        raise DomainError(f"class {class_id} outside [1, {space.num_classes}]")
    h, w = _check_dims(dims)
    rng = np.random.default_rng(seed)
    img = _textured_background(rng, (h, w))
    cx = w / 2.0 + rng.uniform(-0.08, 0.08) * w
    cy = h / 2.0 + rng.uniform(-0.08, 0.08) * h
    size = rng.uniform(0.18, 0.30) * min(h, w)
    mask = _shape_mask(class_id, (h, w), cx, cy, size)
    if not mask.any():
        raise DomainError("degenerate shape: no foreground pixels")
    img[mask] = _CLASS_COLORS[(class_id - 1) % len(_CLASS_COLORS)]
    gt = np.where(mask, class_id, 0).astype(np.int64)
    return SceneRecord(
        id=f"simple-c{class_id}-{seed & 0xFFFFFFFFFFFFFFFF:016x}",
        image=_finish_image(img, rng),
        labels=LabelSet((class_id,), space),
        gt=SegMask(gt, space),
    )


def generate_complex(seed: int, classes: LabelSet, space: LabelSpace, dims=(64, 64)) -> SceneRecord:
    """One shape per declared class, random placement, later draw wins overlap."""
    if not 1 <= len(classes) <= 4:
        raise DomainError(f"complex scenes need 1..4 classes, got {len(classes)}")
    h, w = _check_dims(dims)
    rng = np.random.default_rng(seed)
    img = _textured_background(rng, (h, w))
    gt = np.zeros((h, w), dtype=np.int64)
    for class_id in classes.ids:
        cx = rng.uniform(0.2, 0.8) * w
        cy = rng.uniform(0.2, 0.8) * h
        size = rng.uniform(0.12, 0.22) * min(h, w)
        mask = _shape_mask(class_id, (h, w), cx, cy, size)
        if not mask.any():
            raise DomainError("degenerate shape: no foreground pixels")
        img[mask] = _CLASS_COLORS[(class_id - 1) % len(_CLASS_COLORS)]
        gt[mask] = class_id
    tag = "-".join(str(c) for c in classes.ids)
    return SceneRecord(
        id=f"complex-c{tag}-{seed & 0xFFFFFFFFFFFFFFFF:016x}",
        image=_finish_image(img, rng),
        labels=classes,
        gt=SegMask(gt, space),
    )


# ---------------------------------------------------------------------------
# Cue synthesis
# ---------------------------------------------------------------------------

def _noisify(indicator: np.ndarray, noise: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    v = indicator.astype(np.float64)
    if noise.false_negative_rate > 0.0:
        v[indicator & (rng.random(v.shape) < noise.false_negative_rate)] = 0.0
    if noise.false_positive_rate > 0.0:
        v[~indicator & (rng.random(v.shape) < noise.false_positive_rate)] = 1.0
    if noise.boundary_jitter > 0.0:
        offset = rng.normal(0.0, noise.boundary_jitter, size=2)
        v = nd_shift(v, offset, order=1, mode="constant", cval=0.0)
    if noise.blur_radius > 0.0:
        v = gaussian_filter(v, noise.blur_radius)
    return np.clip(v, 0.0, 1.0)


def synth_cues(rec: SceneRecord, class_id: int, noise: NoiseConfig) -> CueRecord:
    """Degraded saliency (any foreground) and attention (given class) indicators.

    The mock classifier output is correct with probability
    1 - false_positive_rate; its confidence is drawn from a truncated normal
    centered at 0.8 when correct and 0.3 when wrong, so both sides of the
    probability floor occur. Deterministic given (record id, class, noise).
    """
    if class_id not in rec.labels:
        raise DomainError(f"class {class_id} not declared for record {rec.id}")
    rng = np.random.default_rng(derive_seed(noise.seed, f"cues/{rec.id}/{class_id}"))
    fg = rec.gt.values > 0
    cls = rec.gt.values == class_id
    saliency = _noisify(fg, noise, rng)
    attention = _noisify(cls, noise, rng)
    correct = bool(rng.random() < 1.0 - noise.false_positive_rate)
    num_classes = rec.labels.space.num_classes
    if correct or num_classes == 1:
        predicted = int(class_id)
        center, spread = 0.8, 0.1
    else:
        others = [c for c in range(1, num_classes + 1) if c != class_id]
        predicted = int(others[int(rng.integers(0, len(others)))])
        center, spread = 0.3, 0.15
    a, b = (0.0 - center) / spread, (1.0 - center) / spread
    prob = float(truncnorm.rvs(a, b, loc=center, scale=spread, random_state=rng))
    return CueRecord(
        scene_id=rec.id,
        saliency=CueMap(saliency),
        attention=CueMap(attention),
        predicted_class=predicted,
        predicted_prob=prob,
    )


# ---------------------------------------------------------------------------
# Dataset filters
# ---------------------------------------------------------------------------

def _declared_class(rec: SceneRecord) -> int:
    if len(rec.labels) != 1:
        raise DomainError(f"record {rec.id} is not single-object")
    return rec.labels.ids[0]


def filter_simple(pairs, cfg: FilterConfig):
    """Size screen, predicted-label agreement, probability floor, then keep the
    top-k records per class by saliency/attention mask intersection area.

    Ties in the ranking break by record id ascending. The output preserves
    the input order and contains the input objects unmodified.
    """
    ranked = {}
    for scene, cue in pairs:
        if cue.scene_id != scene.id:
            raise DomainError(f"cue record {cue.scene_id} does not match scene {scene.id}")
        declared = _declared_class(scene)
        if min(scene.width, scene.height) < cfg.min_side:
            continue
        if max(scene.width, scene.height) > cfg.max_side:
            continue
        if cue.predicted_class != declared:
            continue
        if cue.predicted_prob < cfg.min_attention_prob:
            continue
        area = mask_intersection_area(
            binarize(cue.saliency, cfg.saliency_threshold),
            binarize(cue.attention, cfg.saliency_threshold),
        )
        ranked.setdefault(declared, []).append((area, scene.id))
    keep = set()
    for declared, entries in ranked.items():
        entries.sort(key=lambda e: (-e[0], e[1]))
        top_k = int(cfg.top_k_overrides.get(declared, cfg.top_k_per_class))
        keep.update(scene_id for _, scene_id in entries[:top_k])
    return [pair for pair in pairs if pair[0].id in keep]


def _predicted_mask(params: segmenter.SegmenterParams, rec: SceneRecord) -> SegMask:
    feats = segmenter.extract_features(rec.image)
    return hard_segmentation(segmenter.forward(params, feats), rec.labels.space)


def filter_complex(records, params: segmenter.SegmenterParams, cfg: FilterConfig):
    """Keep records whose predicted foreground fraction is not below the floor."""
    kept = []
    for rec in records:
        pred = _predicted_mask(params, rec)
        ratio = float((pred.values > 0).mean())
        if ratio < cfg.fg_ratio_min:
            continue
        kept.append(rec)
    return kept


def refilter_simple_for_mstep(pairs, params: segmenter.SegmenterParams, cfg: FilterConfig):
    """Re-rank simple records by attention-mask/prediction intersection.

    Uses the current model's hard foreground prediction instead of the
    saliency mask, keeps the top ``m_step_top_n``, ties by id ascending,
    output in input order.
    """
    entries = []
    for scene, cue in pairs:
        pred = _predicted_mask(params, scene)
        fg = SegMask((pred.values > 0).astype(np.int64), scene.labels.space)
        area = mask_intersection_area(binarize(cue.attention, cfg.saliency_threshold), fg)
        entries.append((area, scene.id))
    entries.sort(key=lambda e: (-e[0], e[1]))
    keep = {scene_id for _, scene_id in entries[: cfg.m_step_top_n]}
    return [pair for pair in pairs if pair[0].id in keep]


# ---------------------------------------------------------------------------
# Dataset assembly and manifest I/O
# ---------------------------------------------------------------------------

@dataclass
class DatasetBundle:
    space: LabelSpace
    simple_pairs: list
    complex_scenes: list
    val_scenes: list


def build_dataset(
    space: LabelSpace,
    num_simple: int,
    num_complex: int,
    num_val: int,
    noise: NoiseConfig,
    seed: int,
    dims=(64, 64),
) -> DatasetBundle:
    """Deterministic bundle; record seeds derive from (seed, purpose, index).

    Simple records cycle through the classes; complex and val scenes draw
    1..4 distinct classes each.
    """
    c = space.num_classes
    simple_pairs = []
    for i in range(num_simple):
        class_id = 1 + i % c
        rec = generate_simple(derive_seed(seed, f"simple/{i}"), class_id, space, dims)
        simple_pairs.append((rec, synth_cues(rec, class_id, noise)))

    def _multi(tag: str, count: int):
        scenes = []
        for j in range(count):
            pick = np.random.default_rng(derive_seed(seed, f"{tag}/pick/{j}"))
            k = int(pick.integers(1, min(4, c) + 1))
            ids = pick.choice(np.arange(1, c + 1), size=k, replace=False)
            classes = LabelSet(tuple(int(v) for v in ids), space)
            scenes.append(
                generate_complex(derive_seed(seed, f"{tag}/scene/{j}"), classes, space, dims)
            )
        return scenes

    return DatasetBundle(
        space=space,
        simple_pairs=simple_pairs,
        complex_scenes=_multi("complex", num_complex),
        val_scenes=_multi("val", num_val),
    )


def _write_record(out_dir: Path, rec: SceneRecord, split: str, cue: CueRecord = None) -> dict:
    tensors = out_dir / "tensors"
    image_path = f"tensors/{rec.id}_image.wst"
    gt_path = f"tensors/{rec.id}_gt.wst"
    write_tensor(out_dir / image_path, rec.image)
    write_tensor(out_dir / gt_path, rec.gt.values)
    row = {
        "id": rec.id,
        "labels": [int(v) for v in rec.labels.ids],
        "split": split,
        "image": image_path,
        "gt": gt_path,
        "saliency": None,
        "attention": None,
        "pred_class": None,
        "pred_prob": None,
    }
    if cue is not None:
        sal_path = f"tensors/{rec.id}_sal.wst"
        att_path = f"tensors/{rec.id}_att.wst"
        write_tensor(out_dir / sal_path, cue.saliency.values)
        write_tensor(out_dir / att_path, cue.attention.values)
        row.update(
            saliency=sal_path,
            attention=att_path,
            pred_class=int(cue.predicted_class),
            pred_prob=float(cue.predicted_prob),
        )
    return row


def save_dataset(bundle: DatasetBundle, out_dir) -> Path:
    """Write tensors plus manifest.jsonl and a meta.json naming the label space."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec, cue in bundle.simple_pairs:
        rows.append(_write_record(out, rec, "simple", cue))
    for rec in bundle.complex_scenes:
        rows.append(_write_record(out, rec, "complex"))
    for rec in bundle.val_scenes:
        rows.append(_write_record(out, rec, "val"))
    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    meta = {
        "class_names": list(bundle.space.class_names),
        "ignore_label": bundle.space.ignore_label,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return manifest


def load_dataset(manifest_path, space: LabelSpace = None) -> DatasetBundle:
    """Rebuild a bundle from manifest.jsonl; the label space comes from the
    sibling meta.json unless given explicitly."""
    manifest = Path(manifest_path)
    root = manifest.parent
    if space is None:
        meta_path = root / "meta.json"
        if not meta_path.exists():
            raise DomainError(f"no label space: {meta_path} missing and none supplied")
        meta = json.loads(meta_path.read_text())
        space = LabelSpace(tuple(meta["class_names"]), meta["ignore_label"])
    bundle = DatasetBundle(space, [], [], [])
    with open(manifest) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            image = read_tensor(root / row["image"]).astype(np.float64)
            gt = SegMask(np.rint(read_tensor(root / row["gt"])).astype(np.int64), space)
            rec = SceneRecord(row["id"], image, LabelSet(tuple(row["labels"]), space), gt)
            if row["split"] == "simple":
                cue = CueRecord(
                    scene_id=row["id"],
                    saliency=CueMap(read_tensor(root / row["saliency"]).astype(np.float64)),
                    attention=CueMap(read_tensor(root / row["attention"]).astype(np.float64)),
                    predicted_class=int(row["pred_class"]),
                    predicted_prob=float(row["pred_prob"]),
                )
                bundle.simple_pairs.append((rec, cue))
            elif row["split"] == "complex":
                bundle.complex_scenes.append(rec)
            elif row["split"] == "val":
                bundle.val_scenes.append(rec)
            else:
                raise DomainError(f"unknown split {row['split']!r} in manifest")
    return bundle
