"""Fusing saliency and attention cues into soft training targets.

Generates one synthetic single-object scene, synthesizes noisy cues for it,
combines them with the max rule, and builds the two-point per-pixel target
(object probability on the class index, the remainder on background).
"""

from wseg import (
    FusionConfig,
    NoiseConfig,
    default_label_space,
    fuse_cues,
    generate_simple,
    synth_cues,
    target_distribution,
)

SHADES = " .:-=+*#%@"


def ascii_map(values, width=32):
    """Coarse terminal rendering of a [0, 1] field."""
    step = max(1, values.shape[0] // width)
    rows = []
    for row in values[::step, ::step]:
        rows.append("".join(SHADES[min(int(v * (len(SHADES) - 1)), len(SHADES) - 1)] for v in row))
    return "\n".join(rows)


def main():
    space = default_label_space(6)
    class_id = 4  # ring
    scene = generate_simple(seed=2024, class_id=class_id, space=space)
    print(f"scene {scene.id}: one '{space.name_of(class_id)}' on a textured background")
    print(f"foreground pixels: {(scene.gt.values > 0).sum()} of {scene.gt.values.size}\n")

    noise = NoiseConfig.from_level(1.5, seed=7)
    cue = synth_cues(scene, class_id, noise)
    print("saliency cue (any object, degraded):")
    print(ascii_map(cue.saliency.values), "\n")
    print("attention cue (this class, degraded):")
    print(ascii_map(cue.attention.values), "\n")

    fused = fuse_cues(cue.saliency, cue.attention, FusionConfig("max"))
    print("fused map M = max(saliency, attention):")
    print(ascii_map(fused.values), "\n")

    target = target_distribution(fused, class_id, space)
    fg = scene.gt.values > 0
    print(f"target mass on class {class_id} inside the object: "
          f"{target.values[fg, class_id].mean():.3f} (mean)")
    print(f"target mass on background outside the object: "
          f"{target.values[~fg, 0].mean():.3f} (mean)")
    print("each pixel row sums to", target.values.sum(-1).min(), "..",
          target.values.sum(-1).max())


if __name__ == "__main__":
    main()
