import numpy as np
import pytest

from wseg import (
    ConfusionMatrix,
    DomainError,
    EmReport,
    LabelSpace,
    LogitMap,
    ProbMap,
    SegMask,
    StageResult,
    accumulate,
    hard_segmentation,
    iou_scores,
    report_json,
    report_table,
)
from wseg.segmenter import softmax_probs


class TestHardSegmentation:
    def test_argmax(self, space3):
        space = LabelSpace(("a", "b"))
        probs = ProbMap(np.array([[[0.2, 0.5, 0.3]]]))
        assert hard_segmentation(probs, space).values[0, 0] == 1

    def test_tie_breaks_to_lowest_id(self):
        space = LabelSpace(("a", "b"))
        probs = ProbMap(np.array([[[0.4, 0.4, 0.2]]]))
        assert hard_segmentation(probs, space).values[0, 0] == 0

    def test_logits_and_softmax_agree(self, rng):
        space = LabelSpace(("a", "b", "c"))
        logits = LogitMap(rng.normal(size=(5, 5, 4)))
        from_logits = hard_segmentation(logits, space)
        from_probs = hard_segmentation(softmax_probs(logits), space)
        np.testing.assert_array_equal(from_logits.values, from_probs.values)

    def test_invalid_pixels_become_ignore(self):
        space = LabelSpace(("a",))
        probs = ProbMap(np.full((1, 2, 2), 0.5), valid=np.array([[True, False]]))
        mask = hard_segmentation(probs, space)
        assert mask.values[0, 1] == space.ignore_label


class TestAccumulate:
    def test_diagonal_on_perfect_prediction(self, space3, rng):
        labels = rng.integers(0, 4, size=(6, 6))
        mask = SegMask(labels, space3)
        cm = accumulate(ConfusionMatrix.zeros(space3), mask, mask)
        assert cm.counts.sum() == 36
        assert np.trace(cm.counts) == 36

    def test_ignore_pixels_skipped(self, space3):
        gt = SegMask(np.full((3, 3), space3.ignore_label), space3)
        pred = SegMask(np.zeros((3, 3), dtype=int), space3)
        cm = accumulate(ConfusionMatrix.zeros(space3), pred, gt)
        assert cm.counts.sum() == 0

    def test_matches_bruteforce_loop(self, space3, rng):
        gt_vals = rng.integers(0, 4, size=(4, 4))
        gt_vals[0, 0] = space3.ignore_label
        pred_vals = rng.integers(0, 4, size=(4, 4))
        cm = accumulate(
            ConfusionMatrix.zeros(space3), SegMask(pred_vals, space3), SegMask(gt_vals, space3)
        )
        expected = np.zeros((4, 4), dtype=np.int64)
        for y in range(4):
            for x in range(4):
                if gt_vals[y, x] != space3.ignore_label:
                    expected[gt_vals[y, x], pred_vals[y, x]] += 1
        np.testing.assert_array_equal(cm.counts, expected)

    def test_merge_is_order_independent(self, space3, rng):
        masks = [SegMask(rng.integers(0, 4, size=(3, 3)), space3) for _ in range(4)]
        parts = [
            accumulate(ConfusionMatrix.zeros(space3), masks[i], masks[i + 1]) for i in (0, 2)
        ]
        np.testing.assert_array_equal((parts[0] + parts[1]).counts, (parts[1] + parts[0]).counts)

    def test_dimension_mismatch(self, space3):
        a = SegMask(np.zeros((2, 2), dtype=int), space3)
        b = SegMask(np.zeros((2, 3), dtype=int), space3)
        with pytest.raises(DomainError):
            accumulate(ConfusionMatrix.zeros(space3), a, b)


class TestIouScores:
    def test_perfect_prediction(self):
        cm = ConfusionMatrix(np.diag([10, 20, 30]))
        iou, miou = iou_scores(cm)
        np.testing.assert_array_equal(iou, [1.0, 1.0, 1.0])
        assert miou == 1.0

    def test_disjoint_prediction(self):
        cm = ConfusionMatrix(np.array([[0, 5], [7, 0]]))
        iou, miou = iou_scores(cm)
        np.testing.assert_array_equal(iou, [0.0, 0.0])
        assert miou == 0.0

    def test_hand_computed_case(self):
        cm = ConfusionMatrix(np.array([[50, 10], [5, 35]]))
        iou, miou = iou_scores(cm)
        assert iou[0] == pytest.approx(50 / 65)
        assert iou[1] == pytest.approx(35 / 50)
        assert miou == pytest.approx((50 / 65 + 0.7) / 2)

    def test_absent_class_excluded_from_mean(self):
        cm = ConfusionMatrix(np.array([[8, 0, 0], [0, 2, 0], [0, 0, 0]]))
        iou, miou = iou_scores(cm)
        assert np.isnan(iou[2])
        assert miou == 1.0

    def test_permutation_equivariance(self, rng):
        counts = rng.integers(0, 50, size=(4, 4))
        perm = rng.permutation(4)
        iou, _ = iou_scores(ConfusionMatrix(counts))
        iou_p, _ = iou_scores(ConfusionMatrix(counts[np.ix_(perm, perm)]))
        np.testing.assert_allclose(iou_p, iou[perm])

    def test_bounds_and_mean_position(self, rng):
        counts = rng.integers(0, 50, size=(5, 5))
        iou, miou = iou_scores(ConfusionMatrix(counts))
        present = ~np.isnan(iou)
        assert ((iou[present] >= 0.0) & (iou[present] <= 1.0)).all()
        assert np.nanmin(iou) <= miou <= np.nanmax(iou)


def two_stage_report():
    return EmReport(
        (
            StageResult("Initial", (1.0, 0.5), 0.75, (0.9, 0.8)),
            StageResult("EM iter 1", (1.0, float("nan")), 1.0, (0.5,)),
        ),
        {"simple": 3},
    )


class TestReportTable:
    def test_perfect_single_stage(self):
        space = LabelSpace(("a", "b"))
        report = EmReport((StageResult("Initial", (1.0, 1.0, 1.0), 1.0, ()),), {})
        table = report_table(report, space)
        row = table.splitlines()[2]
        assert row.split() == ["Initial", "100.0", "100.0", "100.0", "100.0"]

    def test_header_names_in_id_order(self):
        space = LabelSpace(("zebra", "ant"))
        table = report_table(EmReport((), {}), space)
        assert table.splitlines()[0].split() == ["stage", "background", "zebra", "ant", "mIoU"]

    def test_exact_rendering(self):
        space = LabelSpace(("a",))
        table = report_table(two_stage_report(), space)
        expected = (
            "stage      background     a   mIoU\n"
            "---------  ----------  ----  -----\n"
            "Initial         100.0  50.0   75.0\n"
            "EM iter 1       100.0     -  100.0\n"
        )
        assert table == expected


class TestReportJson:
    def test_structure_and_nan_encoding(self):
        space = LabelSpace(("a",))
        payload = report_json(two_stage_report(), space)
        assert payload["class_names"] == ["background", "a"]
        assert payload["dataset_sizes"] == {"simple": 3}
        first, second = payload["stages"]
        assert first == {
            "name": "Initial",
            "per_class_iou": [1.0, 0.5],
            "miou": 0.75,
            "train_losses": [0.9, 0.8],
        }
        assert second["per_class_iou"] == [1.0, None]
