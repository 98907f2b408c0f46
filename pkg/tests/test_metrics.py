from __future__ import annotations

import math

import pytest

from privakit.errors import DegenerateVarianceError, ParameterError
from privakit.imaging import BBox
from privakit.metrics import (
    aggregate_scores,
    alpha_from_records,
    average_precision,
    classification_accuracy,
    cronbach_alpha,
    evaluate_detections,
    iou,
    match_detections,
    mean_ap,
)
from privakit.records import AnnotationRecord, DetectionRecord, GroundTruthBox, PredictionLabel


def brute_force_envelope_ap(flags, gt_count: int) -> float:
    """Independent oracle: integrate the precision envelope point by point.

    Evaluates max precision over all curve points at recall >= r for each
    distinct recall breakpoint, then sums the exact piecewise integral.
    """
    if gt_count == 0 or not flags:
        return 0.0
    tp = fp = 0
    points = []
    for f in flags:
        tp += f == "TP"
        fp += f == "FP"
        points.append((tp / gt_count, tp / (tp + fp)))

    def envelope(r):
        vals = [p for (rr, p) in points if rr >= r - 1e-12]
        return max(vals) if vals else 0.0

    ap = 0.0
    prev = 0.0
    for r in sorted({rr for rr, _ in points}):
        if r > prev:
            ap += (r - prev) * envelope(r)
            prev = r
    return ap


def rec(task, annotator, score, **kw):
    return AnnotationRecord(task_id=task, annotator_id=annotator, score=score, **kw)


class TestAggregateScores:
    def test_constant_scores(self):
        rows = aggregate_scores(
            [rec("t1", "a", 4, attribute="x"), rec("t2", "a", 4, attribute="x"),
             rec("t3", "a", 4, attribute="x")]
        )
        (row,) = rows
        assert row.mean == 4.0 and row.std == 0.0 and row.count == 3

    def test_two_scores_sample_std(self):
        rows = aggregate_scores([rec("t1", "a", 3, attribute="x"), rec("t2", "a", 5, attribute="x")])
        (row,) = rows
        assert row.mean == pytest.approx(4.0)
        assert row.std == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_single_record_flagged(self):
        (row,) = aggregate_scores([rec("t1", "a", 2, attribute="x")])
        assert row.single and row.std == 0.0

    def test_groups_partition_records(self):
        records = [
            rec(f"t{i}", "a", 1 + i % 5, category=("emotion" if i % 2 else "ethnicity"))
            for i in range(37)
        ]
        rows = aggregate_scores(records, group_by="category")
        assert sum(r.count for r in rows) == 37
        assert all(1.0 <= r.mean <= 5.0 for r in rows)

    def test_empty_gives_empty_table(self):
        assert aggregate_scores([]) == []

    def test_unknown_group_by(self):
        with pytest.raises(ParameterError):
            aggregate_scores([], group_by="annotator")


class TestCronbachAlpha:
    def test_parallel_raters_exactly_one(self):
        assert cronbach_alpha([[1, 2, 3], [1, 2, 3], [1, 2, 3]]) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_total_variance(self):
        with pytest.raises(DegenerateVarianceError):
            cronbach_alpha([[1, 2, 3], [3, 2, 1], [2, 2, 2]])

    def test_three_by_four_fixture(self):
        # hand computation: rater variances 5/3, 4/3, 8/3; totals [4,7,10,13] var 15
        alpha = cronbach_alpha([[1, 2, 3, 4], [2, 2, 4, 4], [1, 3, 3, 5]])
        assert alpha == pytest.approx(28.0 / 30.0, abs=1e-12)

    def test_shift_one_rater_invariance(self):
        base = [[1, 2, 3, 4], [2, 2, 4, 4], [1, 3, 3, 5]]
        shifted = [row[:] for row in base]
        shifted[1] = [v + 7 for v in shifted[1]]
        assert cronbach_alpha(shifted) == pytest.approx(cronbach_alpha(base), abs=1e-12)

    def test_requires_two_raters_and_items(self):
        with pytest.raises(ParameterError):
            cronbach_alpha([[1, 2, 3]])
        with pytest.raises(ParameterError):
            cronbach_alpha([[1], [2]])

    def test_alpha_from_records_rotating_panels(self):
        # same 3x4 fixture expressed as records with rotating annotator names
        matrix = [[1, 2, 3, 4], [2, 2, 4, 4], [1, 3, 3, 5]]
        records = []
        for item in range(4):
            for r in range(3):
                records.append(rec(f"task-{item}", f"ann-{r}", matrix[r][item]))
        assert alpha_from_records(records) == pytest.approx(28.0 / 30.0, abs=1e-12)


class TestClassificationAccuracy:
    def test_ratios(self):
        labels = [
            PredictionLabel("i1", "gender", "Male", "Male"),
            PredictionLabel("i2", "gender", "Male", "Female"),
            PredictionLabel("i3", "gender", "Female", "Female"),
            PredictionLabel("i4", "gender", "Unsure", "Unsure"),
            PredictionLabel("i1", "emotion", "Fear", "Anger"),
        ]
        out = classification_accuracy(labels)
        assert out["gender"] == pytest.approx(0.75)
        assert out["emotion"] == 0.0

    def test_all_correct_and_none_correct(self):
        allc = [PredictionLabel(f"i{k}", "age", "4-19", "4-19") for k in range(5)]
        assert classification_accuracy(allc)["age"] == 1.0
        none = [PredictionLabel(f"i{k}", "age", "0-3", "70+") for k in range(5)]
        assert classification_accuracy(none)["age"] == 0.0


class TestIoU:
    def test_identical(self):
        assert iou(BBox(2, 3, 9, 11), BBox(2, 3, 9, 11)) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 5, 5), BBox(6, 6, 9, 9)) == 0.0

    def test_hand_geometry_third(self):
        # areas: inter 50, union 150
        assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-12)


def det(image, label, box, score):
    return DetectionRecord(image_id=image, label=label, box=box, score=score)


def gt(image, label, box):
    return GroundTruthBox(image_id=image, label=label, box=box)


class TestMatchDetections:
    def test_exact_match(self):
        box = BBox(0, 0, 10, 10)
        flagged, fn = match_detections([det("i", "p", box, 0.9)], [gt("i", "p", box)], 0.5)
        assert [f for _, f in flagged] == ["TP"] and fn == 0

    def test_below_threshold(self):
        flagged, fn = match_detections(
            [det("i", "p", BBox(0, 0, 10, 10), 0.9)],
            [gt("i", "p", BBox(0, 6, 10, 16))],  # IoU = 4/16 = 0.25
            0.5,
        )
        assert [f for _, f in flagged] == ["FP"] and fn == 1

    def test_greedy_higher_score_wins(self):
        box = BBox(0, 0, 10, 10)
        flagged, fn = match_detections(
            [det("i", "p", box, 0.9), det("i", "p", box, 0.8)], [gt("i", "p", box)], 0.5
        )
        by_score = {d.score: f for d, f in flagged}
        assert by_score == {0.9: "TP", 0.8: "FP"} and fn == 0

    def test_score_tie_keeps_insertion_order(self):
        a = det("i", "p", BBox(0, 0, 10, 10), 0.7)
        b = det("i", "p", BBox(0, 0, 10, 10), 0.7)
        flagged, _ = match_detections([a, b], [gt("i", "p", BBox(0, 0, 10, 10))], 0.5)
        assert flagged[0][0] is a and flagged[0][1] == "TP"
        assert flagged[1][0] is b and flagged[1][1] == "FP"


class TestAveragePrecision:
    FIXTURE = ["TP", "FP", "TP", "TP", "FP"]

    def test_fixture_against_brute_force_oracle(self):
        expect = brute_force_envelope_ap(self.FIXTURE, 3)
        got = average_precision(self.FIXTURE, 3)
        assert got == pytest.approx(expect, abs=1e-12)
        # envelope integral: 1*(1/3) + (3/4)*(2/3) = 5/6
        assert got == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_perfect_and_empty(self):
        assert average_precision(["TP", "TP", "TP"], 3) == 1.0
        assert average_precision([], 3) == 0.0

    def test_no_ground_truth_flagged_zero(self):
        assert average_precision(["FP", "FP"], 0) == 0.0

    def test_matches_oracle_on_random_sequences(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 25))
            gt_count = int(rng.integers(1, 10))
            flags = []
            tp_budget = gt_count
            for _ in range(n):
                if tp_budget > 0 and rng.random() < 0.5:
                    flags.append("TP")
                    tp_budget -= 1
                else:
                    flags.append("FP")
            assert average_precision(flags, gt_count) == pytest.approx(
                brute_force_envelope_ap(flags, gt_count), abs=1e-12
            )


def random_detection_set(rng, n_images=4, classes=("person", "face")):
    dets, gts = [], []
    for i in range(n_images):
        image = f"img{i}"
        for cls in classes:
            for _ in range(int(rng.integers(0, 4))):
                x0, y0 = int(rng.integers(0, 40)), int(rng.integers(0, 40))
                w, h = int(rng.integers(4, 20)), int(rng.integers(4, 20))
                gts.append(gt(image, cls, BBox(x0, y0, x0 + w, y0 + h)))
            for _ in range(int(rng.integers(0, 5))):
                x0, y0 = int(rng.integers(0, 40)), int(rng.integers(0, 40))
                w, h = int(rng.integers(4, 20)), int(rng.integers(4, 20))
                dets.append(
                    det(image, cls, BBox(x0, y0, x0 + w, y0 + h), float(rng.random()))
                )
    return dets, gts


class TestMeanAp:
    def test_perfect_detections(self):
        boxes = [BBox(0, 0, 10, 10), BBox(20, 20, 40, 44)]
        gts = [gt("a", "person", boxes[0]), gt("a", "person", boxes[1])]
        dets = [det("a", "person", boxes[0], 0.9), det("a", "person", boxes[1], 0.8)]
        out = mean_ap(dets, gts)
        assert out["mAP@0.5"] == 1.0 and out["mAP@[.5:.95]"] == 1.0

    def test_no_detections(self):
        gts = [gt("a", "person", BBox(0, 0, 10, 10))]
        out = mean_ap([], gts)
        assert out["mAP@0.5"] == 0.0 and out["mAP@[.5:.95]"] == 0.0

    def test_loose_threshold_dominates(self, rng):
        for _ in range(200):
            dets, gts = random_detection_set(rng)
            if not gts:
                continue
            out = mean_ap(dets, gts)
            assert out["mAP@0.5"] >= out["mAP@[.5:.95]"] - 1e-12

    def test_rank_invariance_under_monotone_transforms(self, rng):
        for _ in range(100):
            dets, gts = random_detection_set(rng, n_images=3)
            if not gts:
                continue
            base = evaluate_detections(dets, gts, 0.5)
            squashed = [
                DetectionRecord(d.image_id, d.label, d.box, float(d.score**3)) for d in dets
            ]
            assert evaluate_detections(squashed, gts, 0.5) == base
