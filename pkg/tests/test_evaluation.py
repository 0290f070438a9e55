import dataclasses

import numpy as np
import pytest

from src.errors import ConfigError, EvaluationError
from src.evaluation.harness import (
    AVERAGE,
    LoadedSplit,
    compare_methods,
    evaluate_split,
    lambda_grid_search,
    parse_grid,
)
from src.evaluation.metrics import (
    ABSENT_CELL,
    OVERALL,
    cmc_curve,
    per_cell_accuracy,
    rank_k_accuracy,
    render_cell_grid,
)
from src.evaluation.reports import accuracy_rows, comparison_frame, ranked_lists_to_frame
from src.identify.gallery import Gallery, Template
from src.identify.identifier import batch_identify
from src.schemas.evaluation import AccuracyReport, MatcherKind, MethodConfig
from src.schemas.identification import RankedEntry, RankedList, SkippedSubject
from src.schemas.matching import FusionConfig, ScoreBreakdown
from src.schemas.synth import SynthConfig
from src.synth.generator import generate_benchmark


def _ranked(probe_id, order, skipped=(), shift=0.0, error=None):
    entries = []
    for i, subject in enumerate(order):
        s = 0.9 - 0.1 * i + shift
        b = ScoreBreakdown(patch_score=s - shift, attribute_score=0.0, fused_score=s - shift, non_occluded_pairs=1, lam=0.0)
        entries.append(RankedEntry(subject_id=subject, score=s, breakdown=b))
    return RankedList(
        probe_id=probe_id,
        entries=entries,
        skipped=[SkippedSubject(subject_id=s, reason="no comparable patches") for s in skipped],
        error=error,
    )


def _split(bench, name="synth") -> LoadedSplit:
    return LoadedSplit(name, bench.gallery, bench.probes, bench.truth, bench.cells)


class TestRankK:
    def test_hand_tallied_twenty_probes(self):
        rng = np.random.default_rng(11)
        subjects = [f"s{i}" for i in range(6)]
        lists, truth, hits1, hits3 = [], {}, 0, 0
        for i in range(20):
            order = list(rng.permutation(subjects))
            true = subjects[i % 6]
            truth[f"p{i}"] = true
            lists.append(_ranked(f"p{i}", order))
            pos = order.index(true) + 1
            hits1 += pos <= 1
            hits3 += pos <= 3
        assert rank_k_accuracy(lists, truth, 1) == pytest.approx(100.0 * hits1 / 20)
        assert rank_k_accuracy(lists, truth, 3) == pytest.approx(100.0 * hits3 / 20)

    def test_k_at_gallery_size_is_complete(self):
        lists = [_ranked("p0", ["a", "b", "c"]), _ranked("p1", ["c", "a", "b"])]
        assert rank_k_accuracy(lists, {"p0": "c", "p1": "b"}, 3) == 100.0

    def test_skipped_and_failed_count_as_misses(self):
        lists = [
            _ranked("p0", ["a"], skipped=["b"]),
            _ranked("p1", [], skipped=["a", "b"], error="IdentificationError: boom"),
            _ranked("p2", ["b", "a"]),
        ]
        assert rank_k_accuracy(lists, {"p0": "b", "p1": "a", "p2": "b"}, 2) == pytest.approx(100.0 / 3)

    def test_errors(self):
        with pytest.raises(EvaluationError):
            rank_k_accuracy([], {}, 1)
        with pytest.raises(EvaluationError):
            rank_k_accuracy([_ranked("p0", ["a"])], {}, 1)
        with pytest.raises(EvaluationError):
            rank_k_accuracy([_ranked("p0", ["a"])], {"p0": "a"}, 0)

    def test_cmc_matches_rank_k(self):
        lists = [_ranked(f"p{i}", ["a", "b", "c", "d"]) for i in range(4)]
        truth = {"p0": "a", "p1": "b", "p2": "d", "p3": "x"}
        curve = cmc_curve(lists, truth, 4)
        assert curve == [rank_k_accuracy(lists, truth, k) for k in range(1, 5)]
        assert curve == sorted(curve)

    def test_constant_shift_is_invisible(self):
        truth = {"p0": "b"}
        a = rank_k_accuracy([_ranked("p0", ["a", "b"])], truth, 1)
        b = rank_k_accuracy([_ranked("p0", ["a", "b"], shift=5.0)], truth, 1)
        assert a == b

    def test_report_rejects_decreasing_curve(self):
        with pytest.raises(ValueError):
            AccuracyReport(split="s", method="m", rank_k=[50.0, 40.0], probes_evaluated=2)


class TestCells:
    def test_two_cells(self):
        lists = [_ranked("p0", ["a", "b"]), _ranked("p1", ["a", "b"]), _ranked("p2", ["a", "b"]), _ranked("p3", ["a", "b"])]
        truth = {"p0": "a", "p1": "a", "p2": "a", "p3": "b"}
        cells = {"p0": "0/0", "p1": "0/0", "p2": "30/0", "p3": "30/0"}
        table = per_cell_accuracy(lists, truth, cells)
        assert table == {"0/0": 100.0, "30/0": 50.0, OVERALL: 75.0}

    def test_single_cell_equals_rank_one(self):
        lists = [_ranked(f"p{i}", ["a", "b"]) for i in range(3)]
        truth = {"p0": "a", "p1": "b", "p2": "a"}
        table = per_cell_accuracy(lists, truth, {p: "only/one" for p in truth})
        assert table["only/one"] == rank_k_accuracy(lists, truth, 1)

    def test_unlabeled_probe(self):
        with pytest.raises(EvaluationError):
            per_cell_accuracy([_ranked("p0", ["a"])], {"p0": "a"}, {})

    def test_grid_marks_absent_cells(self):
        grid = render_cell_grid({"-30/0": 80.0, "0/0": 100.0, "+30/0": 75.5, "0/+15": 90.0, OVERALL: 1.0})
        assert list(grid.columns) == ["-30", "0", "+30"]
        assert list(grid.index) == ["0", "+15"]
        assert grid.loc["+15", "-30"] == ABSENT_CELL
        assert grid.loc["0", "+30"] == "75.50"

    def test_synthetic_labels_sort_numerically(self):
        grid = render_cell_grid({"c10/o0": 1.0, "c2/o0": 2.0})
        assert list(grid.columns) == ["c2", "c10"]


class TestEvaluateSplit:
    def test_noiseless_benchmark_is_perfect(self):
        cfg = SynthConfig(
            seed=1, subjects=15, images_per_subject=3, patch_noise_sigma=0.0, gallery_noise_sigma=0.0,
            attribute_noise_sigma=0.0, corrupt_fraction=0.0, attribute_flip_rate=0.0,
        )
        split = _split(generate_benchmark(cfg))
        for lam in (0.0, 0.1, 1.0):
            report = evaluate_split(split, MethodConfig(name="fusion", lam=lam), max_rank=2)
            assert report.rank_k == [100.0, 100.0]
            assert report.probes_evaluated == 30
            assert report.probes_skipped == 0

    def test_cells_reported(self, small_benchmark):
        report = evaluate_split(_split(small_benchmark), MethodConfig(name="fusion"))
        assert report.cells[OVERALL] == report.rank1
        assert set(report.cells) - {OVERALL} == set(small_benchmark.cells.values())

    def test_relabeling_subjects_changes_nothing(self, small_benchmark):
        rename = {s: f"z-{s[::-1]}" for s in small_benchmark.gallery.subject_ids}

        def relabel(sig):
            return dataclasses.replace(sig, subject_id=rename[sig.subject_id])

        gallery = Gallery.from_signatures(relabel(s) for s in small_benchmark.gallery_signatures)
        probes = [Template(rename[t.subject_id], tuple(relabel(m) for m in t.members), t.template_id) for t in small_benchmark.probes]
        truth = {p: rename[s] for p, s in small_benchmark.truth.items()}
        method = MethodConfig(name="fusion")
        a = evaluate_split(_split(small_benchmark), method, max_rank=3)
        b = evaluate_split(LoadedSplit("synth", gallery, probes, truth), method, max_rank=3)
        assert a.rank_k == b.rank_k

    def test_open_set_truth_rejected(self, small_benchmark):
        truth = dict(small_benchmark.truth)
        truth[next(iter(truth))] = "stranger"
        with pytest.raises(EvaluationError):
            LoadedSplit("x", small_benchmark.gallery, small_benchmark.probes, truth)


class TestGrid:
    def test_parse(self):
        assert parse_grid("0.1:0.1:1.0") == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        assert parse_grid("0.5, 0, 0.5") == [0.0, 0.5]

    @pytest.mark.parametrize("text", ["", "a,b", "0.1:0:1", "1:0.1:0.5", "-0.1", "nan"])
    def test_bad_grids(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)

    def test_single_value(self, small_benchmark):
        result = lambda_grid_search([_split(small_benchmark)], [0.3], MethodConfig(name="fusion"), n_jobs=1)
        assert result.best_lambda == 0.3
        assert len(result.curve) == 1

    def test_ties_go_to_smallest_lambda(self):
        cfg = SynthConfig(seed=2, subjects=10, images_per_subject=2, patch_noise_sigma=0.0, corrupt_fraction=0.0)
        split = _split(generate_benchmark(cfg))
        result = lambda_grid_search([split], parse_grid("0.1:0.1:1.0"), MethodConfig(name="fusion"), n_jobs=1)
        assert all(acc == 100.0 for _, acc in result.curve)
        assert result.best_lambda == 0.1

    def test_best_is_exhaustive_argmax(self, small_benchmark):
        other = generate_benchmark(small_benchmark.config.model_copy(update={"seed": 8}))
        splits = [_split(small_benchmark, "a"), _split(other, "b")]
        grid = [0.0, 0.2, 0.5, 1.0]
        method = MethodConfig(name="fusion")
        result = lambda_grid_search(splits, grid, method, n_jobs=2)
        manual = [(lam, float(np.mean([evaluate_split(s, method, lam=lam).rank1 for s in splits]))) for lam in grid]
        assert result.curve == manual
        best = max(manual, key=lambda x: (x[1], -x[0]))[0]
        assert result.best_lambda == best

    def test_empty_splits(self):
        with pytest.raises(EvaluationError):
            lambda_grid_search([], [0.1], MethodConfig(name="fusion"))


class TestCompare:
    @pytest.fixture(scope="class")
    def splits(self, small_config):
        return [_split(generate_benchmark(small_config.model_copy(update={"seed": s})), f"split{s}") for s in (1, 2, 3)]

    def test_identical_methods_identical_rows(self, splits):
        methods = [MethodConfig(name="a", lam=0.1), MethodConfig(name="b", lam=0.1)]
        cmp = compare_methods(methods, splits, n_jobs=1)
        assert cmp.accuracy.shape == (2, 3)
        assert list(cmp.accuracy.loc["a"]) == list(cmp.accuracy.loc["b"])

    def test_matrix_equals_individual_evaluations(self, splits):
        methods = [MethodConfig(name="patch-only", lam=0.0), MethodConfig(name="fusion", lam=0.1)]
        cmp = compare_methods(methods, splits, n_jobs=2)
        for m in methods:
            for s in splits:
                assert cmp.accuracy.loc[m.name, s.name] == evaluate_split(s, m).rank1
        avg = cmp.with_average()
        assert avg.loc["fusion", AVERAGE] == pytest.approx(cmp.accuracy.loc["fusion"].mean())
        best = cmp.best_per_split()
        for s in splits:
            top = cmp.accuracy[s.name].max()
            assert best[s.name] == [m.name for m in methods if cmp.accuracy.loc[m.name, s.name] == top]

    def test_failures_are_recorded(self, splits):
        methods = [MethodConfig(name="fusion"), MethodConfig(name="fusion-w", matcher=MatcherKind.weighted)]
        cmp = compare_methods(methods, splits, n_jobs=1)
        assert set(cmp.failures) == {("fusion-w", s.name) for s in splits}
        assert cmp.accuracy.loc["fusion-w"].isna().all()
        assert not cmp.accuracy.loc["fusion"].isna().any()
        assert np.isnan(cmp.with_average().loc["fusion-w", AVERAGE])

    def test_needs_two_methods_and_splits(self, splits):
        with pytest.raises(ConfigError):
            compare_methods([MethodConfig(name="a")], splits)
        with pytest.raises(ConfigError):
            compare_methods([MethodConfig(name="a"), MethodConfig(name="b")], splits[:1])

    def test_frame_rounded(self, splits):
        cmp = compare_methods([MethodConfig(name="a"), MethodConfig(name="b", lam=0.0)], splits, n_jobs=1)
        frame = comparison_frame(cmp)
        assert list(frame.columns) == [s.name for s in splits] + [AVERAGE]
        assert (frame.round(2) == frame).all().all()


class TestReports:
    def test_accuracy_rows(self):
        report = AccuracyReport(split="s1", method="m", rank_k=[33.333333, 66.666666], probes_evaluated=3)
        rows = accuracy_rows([report], [1, 2])
        assert rows.to_dict("records") == [
            {"method": "m", "split": "s1", "k": 1, "accuracy": 33.33},
            {"method": "m", "split": "s1", "k": 2, "accuracy": 66.67},
        ]
        with pytest.raises(EvaluationError):
            accuracy_rows([report], [5])

    def test_ranked_frame_has_skips(self, small_benchmark):
        lists = batch_identify(small_benchmark.probes[:2], small_benchmark.gallery, FusionConfig(lam=0.1), n_jobs=1)
        lists.append(_ranked("px", ["a"], skipped=["b"]))
        frame = ranked_lists_to_frame(lists)
        assert len(frame) == sum(len(rl.entries) + len(rl.skipped) for rl in lists)
        skipped = frame[(frame["probe_id"] == "px") & (frame["rank"] == "")]
        assert list(skipped["subject_id"]) == ["b"]
        assert skipped.iloc[0]["note"] == "skipped: no comparable patches"
        ranked = frame[frame["rank"] != ""]
        flat = [e.score for rl in lists for e in rl.entries]
        assert [float(x) for x in ranked["score"]] == flat
