"""The estimation step: label priors, regularized posteriors, and target blending.

Walks one pixel through the pipeline: raw scores over all labels, the prior
that zeroes classes absent from the image, the renormalized posterior, the
top-two relative margin, and the resulting soft/hard target blend.
"""

import numpy as np

from wseg import (
    HeuristicConfig,
    LabelSet,
    LabelSpace,
    LogitMap,
    epsilon_from_heuristic,
    label_prior,
    mixed_target,
    regularized_posterior,
    relative_margin,
)


def main():
    space = LabelSpace(("cat", "dog", "bird", "boat"))
    present = LabelSet((1, 2), space)  # the image contains a cat and a dog

    prior = label_prior(present, space)
    print("labels:", space.all_names)
    print("present in the image:", [space.name_of(i) for i in present])
    print("additive prior:", prior.values, "\n")

    # A model that confuses 'bird' with 'cat': without the prior,
    # 'bird' would win this pixel outright.
    logits = LogitMap(np.array([[[0.2, 1.1, 0.9, 1.4, -0.5]]]))
    posterior = regularized_posterior(logits, present, space)
    row = posterior.values[0, 0]
    print("posterior over allowed labels:", np.round(row, 4))
    print("absent classes hold exactly zero mass:", row[3] == 0.0 and row[4] == 0.0)

    margin = relative_margin(row)
    cfg = HeuristicConfig(eta=0.05)
    eps = epsilon_from_heuristic(margin, cfg)
    print(f"\ntop-two relative margin r = {margin:.4f}, eta = {cfg.eta}")
    print(f"blend weight eps = {eps:.4f} "
          f"({'hard one-hot target' if eps == 1.0 else 'keeps the soft posterior'})")

    blended = mixed_target(posterior, cfg)
    print("blended target:", np.round(blended.values[0, 0], 4))

    # An ambiguous pixel stays soft: the margin falls below eta.
    close = LogitMap(np.array([[[1.00, 1.02, 0.99, -9.0, -9.0]]]))
    posterior2 = regularized_posterior(close, present, space)
    r2 = relative_margin(posterior2.values[0, 0])
    blended2 = mixed_target(posterior2, cfg)
    print(f"\nambiguous pixel: r = {r2:.4f} < eta, eps = {epsilon_from_heuristic(r2, cfg):.4f}")
    print("its target stays soft:", np.round(blended2.values[0, 0], 4))


if __name__ == "__main__":
    main()
