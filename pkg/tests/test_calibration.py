import numpy as np
import pytest

from suturescore.calibration import (
    CalibrationDataset,
    CalibrationError,
    CalibrationImage,
    CalibrationWarning,
    LabeledInstance,
    binary_accuracy,
    calibrate_pair,
    calibrate_single,
    clean_dataset,
    label_instances,
    pooled_instances,
    pooled_instances_e4,
    pooled_instances_e5,
    reliability_report,
    roc_curve,
    true_accuracy,
    youden_threshold,
)


def li(pairs):
    return [LabeledInstance(value=v, label=l) for v, l in pairs]


class TestLabelInstances:
    def test_positive_score_selects_most_extreme(self):
        out = label_instances([1, 5, 9], 1, "greater")
        assert [(i.value, i.label) for i in out] == [(9.0, True)]

    def test_zero_score_labels_most_extreme_normal(self):
        out = label_instances([1, 5, 9], 0, "greater")
        assert [(i.value, i.label) for i in out] == [(9.0, False)]

    def test_less_direction_selects_smallest(self):
        out = label_instances([1, 5, 9], 2, "less")
        assert {(i.value, i.label) for i in out} == {(1.0, True), (5.0, True)}

    def test_score_exceeding_pool_warns(self):
        with pytest.warns(CalibrationWarning, match="exceeds"):
            out = label_instances([1, 2], 5, "greater")
        assert all(i.label for i in out) and len(out) == 2

    def test_empty_values_rejected(self):
        with pytest.raises(CalibrationError):
            label_instances([], 1, "greater")


def enumerate_best_split(instances, direction):
    """Brute-force Youden oracle over a dense threshold sweep."""
    values = sorted({i.value for i in instances})
    candidates = [values[0] - 1.0]
    candidates += [(a + b) / 2 for a, b in zip(values, values[1:])]
    candidates += [values[-1] + 1.0]
    n_pos = sum(1 for i in instances if i.label)
    n_neg = len(instances) - n_pos
    best = None
    for c in candidates:
        if direction == "greater":
            flagged = [i for i in instances if i.value > c]
        else:
            flagged = [i for i in instances if i.value < c]
        tp = sum(1 for i in flagged if i.label)
        fp = len(flagged) - tp
        j = tp / n_pos - fp / n_neg
        key = (-j, len(flagged))
        if best is None or key < best[0]:
            best = (key, c, j)
    return best[1], best[2]


class TestYouden:
    def test_separable_pool(self):
        pool = li([(0.1, False), (0.2, False), (0.8, True), (0.9, True)])
        threshold, j = youden_threshold(pool, "greater")
        assert threshold == pytest.approx(0.5)
        assert j == pytest.approx(1.0)

    def test_interleaved_pool_below_one(self):
        pool = li([(0.1, True), (0.2, False), (0.3, True), (0.4, False)])
        threshold, j = youden_threshold(pool, "greater")
        assert j < 1.0
        oracle_t, oracle_j = enumerate_best_split(pool, "greater")
        assert j == pytest.approx(oracle_j)
        assert threshold == pytest.approx(oracle_t)

    def test_single_class_degenerate(self):
        with pytest.warns(CalibrationWarning, match="single-class"):
            threshold, j = youden_threshold(li([(1, True), (2, True)]), "greater")
        assert threshold < 1  # flags everything, beyond the data range
        assert j == 0.0

    def test_all_normal_degenerate(self):
        with pytest.warns(CalibrationWarning):
            threshold, j = youden_threshold(li([(1, False), (2, False)]), "greater")
        assert threshold > 2

    def test_matches_enumeration_on_random_pools(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            n = rng.integers(3, 25)
            pool = li(
                [(float(np.round(rng.uniform(0, 10), 2)), bool(rng.uniform() < 0.5)) for _ in range(n)]
            )
            labels = [i.label for i in pool]
            if all(labels) or not any(labels):
                continue
            for direction in ("greater", "less"):
                got_t, got_j = youden_threshold(pool, direction)
                want_t, want_j = enumerate_best_split(pool, direction)
                assert got_j == pytest.approx(want_j), direction
                assert got_t == pytest.approx(want_t), direction

    def test_separable_pools_reach_j_one_inside_gap(self):
        rng = np.random.default_rng(61)
        for _ in range(25):
            split = rng.uniform(2, 8)
            gap = rng.uniform(0.2, 2.0)
            lows = rng.uniform(split - 5, split - gap, rng.integers(1, 8))
            highs = rng.uniform(split + gap, split + 5, rng.integers(1, 8))
            pool = li([(v, False) for v in lows] + [(v, True) for v in highs])
            threshold, j = youden_threshold(pool, "greater")
            assert j == 1.0
            assert max(lows) < threshold < min(highs)

    def test_roc_monotone_along_sweep(self):
        pool = li([(0.1, False), (0.4, True), (0.2, False), (0.9, True), (0.5, False)])
        curve = roc_curve(pool, "greater")
        assert all(a >= b for a, b in zip(curve.tpr, curve.tpr[1:]))
        assert all(a >= b for a, b in zip(curve.fpr, curve.fpr[1:]))
        assert all(0 <= x <= 1 for x in curve.tpr + curve.fpr)


def image(image_id, scores, *, beta=(), alpha=(), aspect=(), norm_width=(), norm_gaps=(), n=None, expected=8):
    n = n if n is not None else max(len(alpha), len(aspect), len(norm_width), 1)
    if not alpha:
        alpha = tuple(1.0 for _ in range(n))
    if not aspect:
        aspect = tuple(3.0 for _ in range(n))
    if not norm_width:
        norm_width = tuple(0.095 for _ in range(n))
    return CalibrationImage(
        image_id=image_id,
        alpha_deg=tuple(alpha),
        beta_deg=tuple(beta),
        aspect=tuple(aspect),
        norm_width=tuple(norm_width),
        norm_gaps=tuple(norm_gaps),
        n=n,
        expected_stitches=expected,
        scores=tuple(scores),
    )


class TestCalibrateSingle:
    def test_two_image_worked_example(self):
        # image A: bends [10, 35], one reported error -> 35 abnormal
        # image B: bends [12, 20], no reported error -> 20 normal
        # pooled {35 T, 20 F}: best split is the midpoint 27.5 with J = 1
        dataset = CalibrationDataset(
            images=(
                image("A", (1, 0, 0, 0, 0), beta=(10, 35), n=4),
                image("B", (0, 0, 0, 0, 0), beta=(12, 20), n=4),
            )
        )
        assert calibrate_single(dataset, "E1") == pytest.approx(27.5)

    def test_all_zero_scores_degenerate(self):
        dataset = CalibrationDataset(
            images=(
                image("A", (0, 0, 0, 0, 0), beta=(10, 12), n=4),
                image("B", (0, 0, 0, 0, 0), beta=(11, 14), n=4),
            )
        )
        with pytest.warns(CalibrationWarning, match="single-class"):
            t = calibrate_single(dataset, "E1")
        assert t > 14

    def test_planted_threshold_recovery(self):
        rng = np.random.default_rng(5)
        planted = 30.0
        images = []
        for k in range(12):
            n_beta = int(rng.integers(3, 7))
            beta = list(rng.uniform(2, 24, n_beta))
            n_abnormal = int(rng.integers(0, 3))
            beta += list(rng.uniform(36, 70, n_abnormal))
            rng.shuffle(beta)
            s1 = sum(1 for b in beta if b > planted)
            images.append(image(f"img{k}", (s1, 0, 0, 0, 0), beta=beta, n=8))
        dataset = CalibrationDataset(images=tuple(images))
        recovered = calibrate_single(dataset, "E1")
        pool = pooled_instances(dataset, "E1")
        assert all((i.value > recovered) == i.label for i in pool)
        assert 24 < recovered < 36

    def test_order_invariance(self):
        images = [
            image("A", (1, 0, 0, 0, 0), beta=(10, 35), n=4),
            image("B", (0, 0, 0, 0, 0), beta=(12, 20), n=4),
            image("C", (2, 0, 0, 0, 0), beta=(40, 50, 5), n=5),
        ]
        d1 = CalibrationDataset(images=tuple(images))
        d2 = CalibrationDataset(images=tuple(reversed(images)))
        assert calibrate_single(d1, "E1") == calibrate_single(d2, "E1")


class TestCalibratePair:
    def planted_e5_dataset(self, low=0.07, high=0.148):
        rng = np.random.default_rng(11)
        images = []
        for k in range(14):
            gaps = list(rng.uniform(0.095, 0.14, int(rng.integers(4, 7))))
            kind = k % 3
            if kind == 1:
                gaps.append(float(rng.uniform(0.152, 0.2)))  # too wide
            elif kind == 2:
                gaps.append(float(rng.uniform(0.03, 0.066)))  # too narrow
            rng.shuffle(gaps)
            s5 = sum(1 for g in gaps if g < low or g > high)
            images.append(
                image(f"img{k}", (0, 0, 0, 0, s5), norm_gaps=gaps, n=len(gaps) + 1)
            )
        return CalibrationDataset(images=tuple(images))

    def test_e5_planted_recovery(self):
        dataset = self.planted_e5_dataset()
        low, high = calibrate_pair(dataset, "E5", grid_step=0.005)
        # low bound recovered on the grid inside the (0.066, 0.095) value gap
        assert 0.066 < low <= 0.095
        assert 0.14 < high < 0.152
        pool = pooled_instances_e5(dataset, low)
        assert all((i.value > high) == i.label for i in pool)

    def test_e4_planted_recovery(self):
        rng = np.random.default_rng(19)
        planted_lw, planted_a = 0.06, 2.43
        images = []
        narrow_widths, benign_widths = [], []
        for k in range(14):
            n = int(rng.integers(5, 9))
            widths = list(rng.uniform(0.08, 0.12, n))
            aspects = list(rng.uniform(2.7, 3.4, n))
            kind = k % 3
            if kind == 1:
                widths[0] = float(rng.uniform(0.03, 0.054))  # too narrow
            elif kind == 2:
                aspects[0] = float(rng.uniform(1.2, 2.3))  # too flat
            narrow_widths += [w for w in widths if w < planted_lw]
            benign_widths += [w for w in widths if w >= planted_lw]
            deficit = int(rng.integers(0, 2))
            s4 = (
                sum(1 for w in widths if w < planted_lw)
                + sum(1 for a in aspects if a < planted_a)
                + deficit
            )
            images.append(
                image(
                    f"img{k}",
                    (0, 0, 0, s4, 0),
                    norm_width=widths,
                    aspect=aspects,
                    n=n,
                    expected=n + deficit,
                )
            )
        dataset = CalibrationDataset(images=tuple(images))
        low, high = calibrate_pair(dataset, "E4", grid_step=0.005)
        # the tie-break picks the left edge of the J = 1 plateau: the first
        # grid value that consumes every planted narrow width
        assert max(narrow_widths) < low <= max(narrow_widths) + 0.005
        assert low < min(benign_widths)
        assert 2.3 < high < 2.7
        pool = pooled_instances_e4(dataset, low)
        assert all((i.value < high) == i.label for i in pool)

    def test_single_grid_point_reduces_to_single(self):
        dataset = self.planted_e5_dataset()
        low, high = calibrate_pair(dataset, "E5", grid_step=1.0)
        assert low == 0.0
        pool = pooled_instances_e5(dataset, 0.0)
        threshold, _ = youden_threshold(pool, "greater")
        assert high == threshold

    def test_no_e4_scores_degenerate_boundary(self):
        images = [
            image(f"i{k}", (0, 0, 0, 0, 0), aspect=(3.0, 3.1, 2.9), norm_width=(0.09, 0.1, 0.11), n=3)
            for k in range(3)
        ]
        low, high = calibrate_pair(CalibrationDataset(images=tuple(images)), "E4")
        assert low == 0.0  # all-normal pools tie at J = 0; smallest grid value wins
        assert high < 2.9  # degenerate threshold flags nothing


class TestAccuracies:
    def test_worked_example(self):
        assert true_accuracy([2, 0, 1], [2, 1, 1]) == pytest.approx(2 / 3)
        assert binary_accuracy([2, 0, 1], [2, 1, 1]) == pytest.approx(2 / 3)

    def test_identical_tables(self):
        assert true_accuracy([1, 2, 0], [1, 2, 0]) == 1.0
        assert binary_accuracy([1, 2, 0], [1, 2, 0]) == 1.0

    def test_count_mismatch_presence_match(self):
        assert true_accuracy([1], [2]) == 0.0
        assert binary_accuracy([1], [2]) == 1.0

    def test_binary_never_below_true(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            n = rng.integers(1, 12)
            a = rng.integers(0, 5, n)
            b = rng.integers(0, 5, n)
            assert binary_accuracy(a, b) >= true_accuracy(a, b)

    def test_report_requires_same_images(self):
        with pytest.raises(CalibrationError, match="only in test"):
            reliability_report({"a": (0,) * 5}, {"b": (0,) * 5})

    def test_report_fields(self):
        report = reliability_report(
            {"a": (2, 0, 0, 0, 0), "b": (0, 1, 0, 0, 0), "c": (1, 1, 0, 0, 0)},
            {"a": (2, 0, 0, 0, 0), "b": (1, 1, 0, 0, 0), "c": (1, 0, 0, 0, 0)},
        )
        e1 = report.per_error["E1"]
        assert e1.true_accuracy == pytest.approx(2 / 3)
        assert e1.agreeing == 2 and e1.conflicting == 1
        for agg in report.per_error.values():
            assert agg.binary_accuracy >= agg.true_accuracy


class TestCleanDataset:
    def test_conflicting_image_removed(self):
        t1 = {"a": (2, 0, 0, 0, 0), "b": (0, 0, 0, 0, 0), "c": (1, 0, 0, 0, 0)}
        t2 = {"a": (2, 0, 0, 0, 0), "b": (1, 0, 0, 0, 0), "c": (1, 0, 0, 0, 0)}
        assert clean_dataset(t1, t2, "E1") == ("a", "c")

    def test_identical_tables_keep_all(self):
        t = {"a": (1, 2, 3, 4, 5), "b": (0, 0, 0, 0, 0)}
        assert clean_dataset(t, dict(t), "E3") == ("a", "b")

    def test_full_conflict_warns_empty(self):
        t1 = {"a": (1, 0, 0, 0, 0), "b": (2, 0, 0, 0, 0)}
        t2 = {"a": (0, 0, 0, 0, 0), "b": (3, 0, 0, 0, 0)}
        with pytest.warns(CalibrationWarning, match="conflict"):
            assert clean_dataset(t1, t2, "E1") == ()
