"""Metric formulas against hand-evaluated values, pair generation, folds,
and the evaluation harness sanity checks."""

import math

import numpy as np
import pytest

from layoutgraph.extraction import ExtractionConfig
from layoutgraph.metrics import (
    FoldPlan,
    PairSample,
    align_error,
    area_error,
    center_baseline_predictor,
    evaluate,
    kfold,
    make_pairs,
    pairs_from_json,
    pairs_to_json,
    pos_error,
    truth_oracle_predictor,
)
from layoutgraph.model import AlignmentKind, BBox, Element, Gui, ValidationError
from layoutgraph.synthetic import gen_synthetic


class TestPosError:
    def test_exact_is_zero(self):
        b = BBox(10, 10, 20, 20)
        assert pos_error(b, b, 100, 100) == 0.0

    def test_opposite_corner_is_one(self):
        # 100x100 canvas, 20x20 element, truth (0,0), pred (80,80)
        assert pos_error(BBox(80, 80, 20, 20), BBox(0, 0, 20, 20), 100, 100) \
            == pytest.approx(1.0, abs=1e-12)

    def test_partial_distance(self):
        # pred (40,0) vs truth (0,0): 40 / (80*sqrt(2))
        expected = 40 / (80 * math.sqrt(2))
        assert pos_error(BBox(40, 0, 20, 20), BBox(0, 0, 20, 20), 100, 100) \
            == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.35355339059327373, abs=1e-15)

    def test_fill_canvas_degenerate(self):
        full = BBox(0, 0, 100, 100)
        assert pos_error(full, full, 100, 100) == 0.0
        shifted = BBox(0, 0, 100, 100)
        truth = BBox(1, 0, 99, 100)
        # denominator zero (pred fills canvas) but positions differ -> 1
        assert pos_error(shifted, truth, 100, 100) in (0.0, 1.0)
        assert pos_error(BBox(0, 0, 100, 100), BBox(1, 1, 99, 99), 100, 100) == 1.0

    def test_clipped_to_unit_interval(self):
        # oversize prediction: clamped denominator terms, result clipped
        v = pos_error(BBox(0, 0, 99, 10), BBox(80, 0, 10, 10), 100, 100)
        assert 0.0 <= v <= 1.0


class TestAreaError:
    def test_equal_sizes_zero(self):
        assert area_error(BBox(0, 0, 10, 10), BBox(50, 50, 10, 10)) == 0.0

    def test_quarter_area(self):
        # 10x10 vs 20x20 -> 300/400
        assert area_error(BBox(0, 0, 10, 10), BBox(0, 0, 20, 20)) == pytest.approx(0.75)

    def test_symmetry(self):
        a, b = BBox(0, 0, 13, 7), BBox(0, 0, 29, 11)
        assert area_error(a, b) == area_error(b, a)

    def test_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = BBox(0, 0, int(rng.integers(1, 500)), int(rng.integers(1, 500)))
            b = BBox(0, 0, int(rng.integers(1, 500)), int(rng.integers(1, 500)))
            assert 0.0 <= area_error(a, b) <= 1.0


class TestAlignError:
    truth = ((AlignmentKind.LEFT, 10), (AlignmentKind.TOP, 50))

    def test_all_satisfied_zero(self):
        assert align_error(BBox(10, 50, 30, 30), self.truth) == 0.0

    def test_half_satisfied(self):
        assert align_error(BBox(10, 90, 30, 30), self.truth) == 0.5

    def test_empty_truth_zero(self):
        assert align_error(BBox(0, 0, 5, 5), ()) == 0.0

    def test_tolerance_applies(self):
        assert align_error(BBox(12, 50, 30, 30), self.truth, tol=2) == 0.0
        assert align_error(BBox(13, 50, 30, 30), self.truth, tol=2) == 0.5


class TestMakePairs:
    def gui(self, n=5):
        els = tuple(Element(f"e{i}", "ListItem", BBox(20, 100 + 60 * i, 320, 50))
                    for i in range(n))
        return Gui(360, 640, els)

    def test_pair_count_per_draw(self):
        pairs = make_pairs(self.gui(5), seed=1, chunks_per_gui=1)
        # one draw with keep k produces n - k pairs
        k = len(pairs[0].partial.elements)
        assert len(pairs) == 5 - k

    def test_keep_n_minus_one_gives_single_pair(self):
        for seed in range(30):
            pairs = make_pairs(self.gui(4), seed=seed, chunks_per_gui=1)
            if len(pairs[0].partial.elements) == 3:
                assert len(pairs) == 1
                return
        pytest.skip("no draw kept n-1 elements")

    def test_same_seed_identical(self):
        a = pairs_to_json(make_pairs(self.gui(6), seed=7, chunks_per_gui=4))
        b = pairs_to_json(make_pairs(self.gui(6), seed=7, chunks_per_gui=4))
        assert a == b

    def test_too_small_gui_rejected(self):
        with pytest.raises(ValidationError):
            make_pairs(self.gui(3), seed=0, chunks_per_gui=1)

    def test_target_absent_from_partial_and_chunk_contiguous(self):
        gui = self.gui(6)
        for pair in make_pairs(gui, seed=3, chunks_per_gui=8):
            ids = {e.id for e in pair.partial.elements}
            assert pair.target.id not in ids
            # contiguity in reading order (same y-order here)
            idx = sorted(int(i[1:]) for i in ids)
            assert idx == list(range(idx[0], idx[0] + len(idx)))

    def test_truth_alignments_recorded(self):
        gui = self.gui(5)
        pairs = make_pairs(gui, seed=2, chunks_per_gui=2)
        assert any(p.truth_alignments for p in pairs)
        for p in pairs:
            for kind, line in p.truth_alignments:
                assert abs(kind.coord(p.target.bbox) - line) <= 2

    def test_round_trip_json(self):
        pairs = make_pairs(self.gui(5), seed=9, chunks_per_gui=2)
        back = pairs_from_json(pairs_to_json(pairs))
        assert pairs_to_json(back) == pairs_to_json(pairs)


class TestKfold:
    def test_ten_guis_five_folds_of_two(self):
        plan = kfold([f"g{i}" for i in range(10)], k=5, seed=0)
        sizes = [len(plan.fold_ids(f)) for f in range(5)]
        assert sizes == [2] * 5

    def test_sizes_differ_by_at_most_one(self):
        for n in (7, 11, 23):
            plan = kfold([f"g{i}" for i in range(n)], k=5, seed=1)
            sizes = [len(plan.fold_ids(f)) for f in range(5)]
            assert max(sizes) - min(sizes) <= 1
            assert sum(sizes) == n

    def test_partition_and_determinism(self):
        ids = [f"g{i}" for i in range(13)]
        a = kfold(ids, k=4, seed=5)
        b = kfold(ids, k=4, seed=5)
        assert a.assignments == b.assignments
        assert sorted(sum((a.fold_ids(f) for f in range(4)), [])) == sorted(ids)

    def test_k_larger_than_dataset_rejected(self):
        with pytest.raises(ValidationError):
            kfold(["a", "b"], k=5, seed=0)


class TestEvaluate:
    def _pairs(self):
        out = []
        for gui in gen_synthetic(5, 8):
            out.extend(make_pairs(gui, seed=11, chunks_per_gui=1))
        return out

    def test_truth_oracle_scores_exact_zero_everywhere(self):
        result = evaluate(truth_oracle_predictor(), self._pairs())
        assert result.report.overall.pos_error == 0.0
        assert result.report.overall.area_error == 0.0
        assert result.report.overall.align_error == 0.0
        for stats in result.report.buckets.values():
            assert stats.pos_error == 0.0
            assert stats.area_error == 0.0
            assert stats.align_error == 0.0

    def test_center_baseline_strictly_positive(self):
        result = evaluate(center_baseline_predictor(), self._pairs())
        assert result.report.overall.pos_error > 0
        assert result.report.overall.area_error > 0
        assert result.report.overall.align_error > 0

    def test_all_metrics_in_unit_interval_and_bucketed(self):
        result = evaluate(center_baseline_predictor(), self._pairs())
        assert result.report.buckets
        for bucket, stats in result.report.buckets.items():
            assert stats.count > 0
            for v in (stats.pos_error, stats.area_error, stats.align_error):
                assert 0.0 <= v <= 1.0
        assert result.report.mean_step_seconds >= 0.0

    def test_report_dict_shape(self):
        result = evaluate(truth_oracle_predictor(), self._pairs()[:3])
        doc = result.report.to_dict()
        assert set(doc) == {"overall", "buckets", "mean_step_seconds"}
