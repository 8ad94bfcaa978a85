import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wseg import (
    CueMap,
    DomainError,
    FusionConfig,
    LabelSpace,
    binarize,
    fuse_cues,
    mask_intersection_area,
    target_distribution,
    validate,
)

unit_maps = arrays(
    np.float64,
    st.tuples(st.integers(1, 6), st.integers(1, 6)),
    elements=st.floats(0.0, 1.0, allow_nan=False),
)


class TestFuseCues:
    def test_max(self):
        fused = fuse_cues(CueMap([[0.3]]), CueMap([[0.8]]))
        assert fused.values[0, 0] == 0.8

    def test_max_idempotent(self, rng):
        s = CueMap(rng.random((5, 5)))
        fused = fuse_cues(s, s, FusionConfig("max"))
        np.testing.assert_array_equal(fused.values, s.values)

    def test_product(self):
        fused = fuse_cues(CueMap([[0.5]]), CueMap([[0.5]]), FusionConfig("product"))
        assert fused.values[0, 0] == 0.25

    def test_mean(self):
        fused = fuse_cues(CueMap([[0.2]]), CueMap([[0.6]]), FusionConfig("mean"))
        assert fused.values[0, 0] == pytest.approx(0.4)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            fuse_cues(CueMap(np.zeros((2, 2))), CueMap(np.zeros((2, 3))))

    def test_unknown_combiner(self):
        with pytest.raises(DomainError):
            FusionConfig("median")

    @settings(max_examples=50, deadline=None)
    @given(st.data())
    def test_max_dominates_and_commutes(self, data):
        s_vals = data.draw(unit_maps)
        a_vals = data.draw(
            arrays(np.float64, s_vals.shape, elements=st.floats(0.0, 1.0, allow_nan=False))
        )
        s, a = CueMap(s_vals), CueMap(a_vals)
        fused = fuse_cues(s, a)
        assert (fused.values >= s.values).all() and (fused.values >= a.values).all()
        np.testing.assert_array_equal(fused.values, fuse_cues(a, s).values)
        prod_sa = fuse_cues(s, a, FusionConfig("product"))
        prod_as = fuse_cues(a, s, FusionConfig("product"))
        np.testing.assert_array_equal(prod_sa.values, prod_as.values)


class TestTargetDistribution:
    def test_direct_substitution(self):
        space = LabelSpace(("a", "b", "c"))
        target = target_distribution(CueMap([[0.7]]), 2, space)
        np.testing.assert_allclose(target.values[0, 0], [0.3, 0.0, 0.7, 0.0])

    def test_boundaries(self, space3):
        full = target_distribution(CueMap([[1.0]]), 1, space3)
        np.testing.assert_array_equal(full.values[0, 0], [0, 1, 0, 0])
        empty = target_distribution(CueMap([[0.0]]), 1, space3)
        np.testing.assert_array_equal(empty.values[0, 0], [1, 0, 0, 0])

    def test_background_and_out_of_range_rejected(self, space3):
        with pytest.raises(DomainError):
            target_distribution(CueMap([[0.5]]), 0, space3)
        with pytest.raises(DomainError):
            target_distribution(CueMap([[0.5]]), 4, space3)

    @settings(max_examples=50, deadline=None)
    @given(unit_maps)
    def test_always_a_valid_probmap(self, values):
        space = LabelSpace(("a", "b"))
        target = target_distribution(CueMap(values), 1, space)
        assert validate(target) is None


class TestBinarize:
    def test_strictly_greater(self):
        mask = binarize(CueMap([[0.5, 0.51]]), 0.5)
        np.testing.assert_array_equal(mask.values, [[0, 1]])

    def test_all_zero(self):
        mask = binarize(CueMap(np.zeros((3, 3))), 0.5)
        assert mask.values.sum() == 0

    def test_threshold_range(self):
        with pytest.raises(DomainError):
            binarize(CueMap([[0.5]]), 1.5)


class TestMaskIntersectionArea:
    def test_disjoint(self):
        a = binarize(CueMap([[1.0, 0.0]]), 0.5)
        b = binarize(CueMap([[0.0, 1.0]]), 0.5)
        assert mask_intersection_area(a, b) == 0

    def test_identical(self, rng):
        vals = (rng.random((4, 4)) > 0.5).astype(float)
        m = binarize(CueMap(vals), 0.5)
        assert mask_intersection_area(m, m) == int(vals.sum())

    def test_matches_bruteforce_loop(self, rng):
        a_vals = rng.random((8, 8))
        b_vals = rng.random((8, 8))
        a = binarize(CueMap(a_vals), 0.5)
        b = binarize(CueMap(b_vals), 0.5)
        expected = 0
        for y in range(8):
            for x in range(8):
                if a_vals[y, x] > 0.5 and b_vals[y, x] > 0.5:
                    expected += 1
        assert mask_intersection_area(a, b) == expected

    def test_dimension_mismatch(self):
        a = binarize(CueMap(np.zeros((2, 2))), 0.5)
        b = binarize(CueMap(np.zeros((2, 3))), 0.5)
        with pytest.raises(DomainError):
            mask_intersection_area(a, b)
