"""The dataset heuristics: what survives each screening step and why.

Applies the single-object filters (size bounds, predicted-label agreement,
confidence floor, per-class intersection ranking) to a noisy batch, then
shows the foreground-ratio screen for multi-object scenes and the
prediction-based re-ranking used before each optimization round.
"""

from wseg import (
    EmConfig,
    FilterConfig,
    LossConfig,
    NoiseConfig,
    OptConfig,
    build_dataset,
    default_label_space,
    filter_complex,
    filter_simple,
    refilter_simple_for_mstep,
    train_initial,
)


def main():
    space = default_label_space(6)
    # Aggressive noise so the screening actually rejects records.
    noise = NoiseConfig(boundary_jitter=1.5, false_positive_rate=0.15,
                        false_negative_rate=0.15, blur_radius=1.0, seed=3)
    bundle = build_dataset(space, num_simple=90, num_complex=40, num_val=0,
                           noise=noise, seed=14)

    cfg = FilterConfig(min_side=16, max_side=512, top_k_per_class=10, m_step_top_n=30)
    pairs = bundle.simple_pairs
    wrong_label = sum(cue.predicted_class != scene.labels.ids[0] for scene, cue in pairs)
    low_prob = sum(cue.predicted_prob < cfg.min_attention_prob for scene, cue in pairs)
    kept = filter_simple(pairs, cfg)
    print(f"single-object pool: {len(pairs)} records")
    print(f"  mock classifier disagrees with the declared label: {wrong_label}")
    print(f"  confidence below {cfg.min_attention_prob}: {low_prob}")
    print(f"  after label/confidence screens and top-{cfg.top_k_per_class} "
          f"per class by cue-mask intersection: {len(kept)} kept\n")

    train_cfg = EmConfig(
        init_opt=OptConfig(epochs=30, learning_rate=0.2, accumulation=5,
                           lr_decay_every=20, seed=1),
        loss=LossConfig(),
        filter=cfg,
    )
    params = train_initial(kept, train_cfg).params

    survivors = filter_complex(bundle.complex_scenes, params, cfg)
    print(f"multi-object pool: {len(bundle.complex_scenes)} scenes")
    print(f"  predicted foreground ratio >= {cfg.fg_ratio_min}: {len(survivors)} kept\n")

    reranked = refilter_simple_for_mstep(kept, params, cfg)
    print(f"re-ranking the kept singles by attention/prediction overlap, "
          f"top {cfg.m_step_top_n}: {len(reranked)} selected")
    print("optimization rounds then train on", len(survivors) + len(reranked),
          "scenes (multi-object plus re-ranked singles)")


if __name__ == "__main__":
    main()
