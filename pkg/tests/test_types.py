import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wseg import (
    CueMap,
    DomainError,
    LabelSet,
    LabelSpace,
    LogitMap,
    ProbMap,
    SegMask,
    one_hot,
    validate,
)
from wseg.segmenter import softmax_probs


class TestLabelSpace:
    def test_ids_and_names(self):
        space = LabelSpace(("cat", "dog"))
        assert space.num_classes == 2
        assert space.num_labels == 3
        assert space.all_names == ("background", "cat", "dog")
        assert space.name_of(0) == "background"
        assert space.name_of(2) == "dog"

    def test_needs_a_class(self):
        with pytest.raises(DomainError):
            LabelSpace(())

    def test_unique_names(self):
        with pytest.raises(DomainError):
            LabelSpace(("a", "a"))

    def test_ignore_label_outside_id_range(self):
        with pytest.raises(DomainError):
            LabelSpace(("a", "b"), ignore_label=1)
        LabelSpace(("a", "b"), ignore_label=-1)  # outside [0, c] is fine


class TestOneHot:
    def test_background(self, space3):
        np.testing.assert_array_equal(one_hot(0, space3), [1, 0, 0, 0])

    def test_last_class(self):
        space = LabelSpace(("a", "b"))
        np.testing.assert_array_equal(one_hot(2, space), [0, 0, 1])

    def test_out_of_range(self):
        space = LabelSpace(("a", "b"))
        with pytest.raises(DomainError):
            one_hot(3, space)
        with pytest.raises(DomainError):
            one_hot(-1, space)

    def test_argmax_roundtrip(self, space3):
        for label in range(space3.num_labels):
            assert int(one_hot(label, space3).argmax()) == label


class TestValidate:
    def test_uniform_21_ok(self):
        values = np.full((2, 3, 21), 1.0 / 21.0)
        assert validate(values) is None

    def test_sum_violation(self):
        values = np.array([[[0.5, 0.6]]])
        violation = validate(values)
        assert violation is not None and (violation.y, violation.x) == (0, 0)
        assert "sum" in violation.message

    def test_negative_mass(self):
        violation = validate(np.array([[[-0.1, 1.1]]]))
        assert violation is not None and "negative" in violation.message

    def test_reports_first_offender_row_major(self):
        values = np.full((2, 2, 2), 0.5)
        values[0, 1] = [0.9, 0.9]
        values[1, 0] = [0.9, 0.9]
        violation = validate(values)
        assert (violation.y, violation.x) == (0, 1)

    def test_invalid_pixels_skipped(self):
        values = np.zeros((1, 2, 2))
        values[0, 0] = [0.5, 0.5]
        valid = np.array([[True, False]])
        assert validate(values, valid) is None
        assert validate(values) is not None


class TestMaps:
    def test_cue_range_enforced(self):
        with pytest.raises(DomainError):
            CueMap(np.array([[0.2, 1.2]]))
        with pytest.raises(DomainError):
            CueMap(np.array([[-0.1, 0.5]]))

    def test_logits_must_be_finite(self):
        with pytest.raises(DomainError):
            LogitMap(np.array([[[np.inf, 0.0]]]))

    def test_probmap_rejects_bad_rows(self):
        with pytest.raises(DomainError):
            ProbMap(np.array([[[0.5, 0.6]]]))

    def test_probmap_valid_mask_shape(self):
        values = np.full((2, 2, 2), 0.5)
        with pytest.raises(DomainError):
            ProbMap(values, valid=np.ones((3, 2), dtype=bool))

    def test_values_are_read_only(self, space3):
        prob = ProbMap(np.full((1, 1, 4), 0.25))
        with pytest.raises(ValueError):
            prob.values[0, 0, 0] = 1.0
        mask = SegMask(np.zeros((2, 2), dtype=int), space3)
        with pytest.raises(ValueError):
            mask.values[0, 0] = 1

    def test_segmask_accepts_ignore(self, space3):
        SegMask(np.array([[0, 3], [255, 1]]), space3)
        with pytest.raises(DomainError):
            SegMask(np.array([[0, 4]]), space3)


class TestLabelSet:
    def test_normalizes_sorted_unique(self, space3):
        z = LabelSet((3, 1, 3), space3)
        assert z.ids == (1, 3)
        assert 1 in z and 2 not in z
        assert len(z) == 2

    def test_nonempty(self, space3):
        with pytest.raises(DomainError):
            LabelSet((), space3)

    def test_background_never_a_member(self, space3):
        with pytest.raises(DomainError):
            LabelSet((0, 1), space3)

    def test_range(self, space3):
        with pytest.raises(DomainError):
            LabelSet((4,), space3)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_softmax_of_any_logits_is_valid_probmap(seed):
    rng = np.random.default_rng(seed)
    logits = LogitMap(rng.normal(0.0, 5.0, size=(3, 4, 5)))
    probs = softmax_probs(logits)
    assert validate(probs) is None
