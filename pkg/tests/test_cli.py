import shutil
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from src.cli import app
from src.evaluation.reports import write_ranked_lists
from src.identify.identifier import batch_identify
from src.ingest.loader import load_gallery, load_probes
from src.ingest.sigfile import write_signature
from src.schemas.matching import FusionConfig
from src.synth.generator import generate_benchmark, write_benchmark

from conftest import random_signature

SYNTH_TOML = """\
seed = {seed}
subjects = 8
images_per_subject = 3
patch_count = 4
feature_dim = 12
attribute_dim = 10
patch_noise_sigma = 2.0
corrupt_fraction = 0.2
occlusion_rate = 0.2
"""


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def _error_fields(stderr: str) -> dict:
    line = [ln for ln in stderr.splitlines() if ln.startswith("error ")][-1]
    head, _, message = line.partition(" message=")
    fields = dict(part.split("=", 1) for part in head.split()[1:])
    fields["message"] = message
    return fields


@pytest.fixture
def bench_dir(tmp_path, small_benchmark):
    write_benchmark(small_benchmark, tmp_path / "bench")
    return tmp_path / "bench"


class TestMatch:
    def test_self_match(self, runner, tmp_path, make_signature):
        path = tmp_path / "x.sig"
        write_signature(path, make_signature())
        result = runner.invoke(app, ["match", str(path), str(path), "--lambda", "0"])
        assert result.exit_code == 0, result.stderr
        lines = result.stdout.splitlines()
        assert "patch_score=1.000000" in lines
        assert "fused_score=1.000000" in lines
        assert "lambda=0" in lines

    def test_no_comparable_patches(self, runner, tmp_path, rng):
        occ = np.array([1, 1, 1, 0, 0, 0])
        write_signature(tmp_path / "g.sig", random_signature(rng, "a", "g", occlusion=occ))
        write_signature(tmp_path / "p.sig", random_signature(rng, "a", "p", occlusion=1 - occ))
        result = runner.invoke(app, ["match", str(tmp_path / "g.sig"), str(tmp_path / "p.sig")])
        assert result.exit_code == 6
        fields = _error_fields(result.stderr)
        assert fields["code"] == "no_comparable_patches"
        assert fields["type"] == "NoComparablePatchesError"

    def test_bad_file(self, runner, tmp_path, make_signature):
        good = tmp_path / "good.sig"
        write_signature(good, make_signature())
        bad = tmp_path / "bad.sig"
        bad.write_bytes(b"JUNK" + good.read_bytes()[4:])
        result = runner.invoke(app, ["match", str(good), str(bad)])
        assert result.exit_code == 5
        assert _error_fields(result.stderr)["type"] == "BadMagicError"

    def test_missing_file(self, runner, tmp_path):
        result = runner.invoke(app, ["match", str(tmp_path / "a.sig"), str(tmp_path / "b.sig")])
        assert result.exit_code == 3
        assert _error_fields(result.stderr)["code"] == "io_error"

    def test_weighted_needs_table(self, runner, tmp_path, make_signature):
        path = tmp_path / "x.sig"
        write_signature(path, make_signature())
        result = runner.invoke(app, ["match", str(path), str(path), "--matcher", "weighted"])
        assert result.exit_code == 3
        assert _error_fields(result.stderr)["code"] == "bad_config"

    def test_usage_error_is_one_line(self, runner):
        result = runner.invoke(app, ["match", "--no-such-flag"])
        assert result.exit_code == 2
        assert result.stdout == ""
        assert len(result.stderr.splitlines()) == 1
        fields = _error_fields(result.stderr)
        assert fields["code"] == "usage"
        assert fields["type"] == "NoSuchOption"
        assert "--no-such-flag" in fields["message"]

    def test_unknown_command(self, runner):
        result = runner.invoke(app, ["matchh"])
        assert result.exit_code == 2
        assert _error_fields(result.stderr)["code"] == "usage"

    def test_bad_option_value(self, runner, tmp_path):
        result = runner.invoke(app, ["match", "a.sig", "b.sig", "--lambda", "lots"])
        assert result.exit_code == 2
        assert _error_fields(result.stderr)["type"] == "BadParameter"


class TestIdentify:
    def test_csv_matches_library_output(self, runner, tmp_path, bench_dir):
        out = tmp_path / "ranked.csv"
        args = ["identify", "--gallery", str(bench_dir / "gallery.csv"), "--probe", str(bench_dir / "probe.csv")]
        result = runner.invoke(app, args + ["--lambda", "0.3", "--threads", "2", "--out", str(out)])
        assert result.exit_code == 0, result.stderr

        lists = batch_identify(
            load_probes(bench_dir / "probe.csv").templates,
            load_gallery(bench_dir / "gallery.csv"),
            FusionConfig(lam=0.3),
            n_jobs=1,
        )
        expected = tmp_path / "expected.csv"
        write_ranked_lists(expected, lists)
        assert out.read_bytes() == expected.read_bytes()

        to_stdout = runner.invoke(app, args + ["--lambda", "0.3"])
        assert to_stdout.stdout == expected.read_text(encoding="utf-8")

    def test_bad_manifest(self, runner, tmp_path, bench_dir):
        manifest = tmp_path / "broken.csv"
        manifest.write_text("a,b\n", encoding="utf-8")
        result = runner.invoke(app, ["identify", "--gallery", str(manifest), "--probe", str(bench_dir / "probe.csv")])
        assert result.exit_code == 3
        assert _error_fields(result.stderr)["code"] == "bad_manifest"


class TestValidate:
    def test_directory_ok(self, runner, bench_dir):
        result = runner.invoke(app, ["validate", str(bench_dir / "signatures")])
        assert result.exit_code == 0
        lines = result.stdout.splitlines()
        assert lines and all(ln.endswith(": ok") for ln in lines)

    def test_manifest_with_bad_file(self, runner, bench_dir):
        victim = sorted((bench_dir / "signatures").glob("*.sig"))[0]
        data = bytearray(victim.read_bytes())
        data[40] ^= 0xFF
        victim.write_bytes(bytes(data))
        result = runner.invoke(app, ["validate", "--manifest", str(bench_dir / "gallery.csv")])
        assert result.exit_code == 5
        assert "ChecksumMismatchError" in result.stdout
        assert sum(ln.endswith(": ok") for ln in result.stdout.splitlines()) >= 1


class TestSynth:
    def test_deterministic(self, runner, tmp_path):
        config = tmp_path / "synth.toml"
        config.write_text(SYNTH_TOML.format(seed=3), encoding="utf-8")
        for name in ("a", "b"):
            result = runner.invoke(app, ["synth", "--config", str(config), "--out", str(tmp_path / name)])
            assert result.exit_code == 0, result.stderr
        for rel in ("gallery.csv", "probe.csv", "truth.csv", "signatures/subject0000_img01.sig"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_invalid_config(self, runner, tmp_path):
        config = tmp_path / "synth.toml"
        config.write_text("images_per_subject = 1\n", encoding="utf-8")
        result = runner.invoke(app, ["synth", "--config", str(config), "--out", str(tmp_path / "x")])
        assert result.exit_code == 3
        assert _error_fields(result.stderr)["type"] == "ConfigError"


@pytest.fixture
def splits_toml(tmp_path, small_config):
    blocks = []
    for seed in (1, 2, 3):
        root = tmp_path / f"split{seed}"
        write_benchmark(generate_benchmark(small_config.model_copy(update={"seed": seed})), root)
        blocks.append(f'[[split]]\nname = "split{seed}"\ngallery = "split{seed}/gallery.csv"\nprobe = "split{seed}/probe.csv"\n')
    path = tmp_path / "splits.toml"
    path.write_text("\n".join(blocks), encoding="utf-8")
    return path


class TestPipeline:
    def test_evaluate(self, runner, tmp_path, splits_toml):
        out = tmp_path / "acc.csv"
        result = runner.invoke(
            app,
            ["evaluate", "--splits", str(splits_toml), "--ranks", "1,3", "--out", str(out), "--threads", "1",
             "--cells-dir", str(tmp_path / "cells")],
        )
        assert result.exit_code == 0, result.stderr
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["method", "split", "k", "accuracy"]
        assert len(frame) == 6
        assert sorted(p.name for p in (tmp_path / "cells").iterdir()) == [
            "split1_cells.csv", "split2_cells.csv", "split3_cells.csv",
        ]

    def test_gridsearch(self, runner, tmp_path, splits_toml):
        out = tmp_path / "grid.csv"
        result = runner.invoke(
            app, ["gridsearch", "--splits", str(splits_toml), "--grid", "0,0.5,1", "--matcher", "plain", "--out", str(out)]
        )
        assert result.exit_code == 0, result.stderr
        frame = pd.read_csv(out)
        assert list(frame["lambda"]) == [0.0, 0.5, 1.0]
        assert frame["best"].sum() == 1

    def test_compare_then_stats(self, runner, tmp_path, splits_toml):
        matrix = tmp_path / "cmp.csv"
        result = runner.invoke(app, ["compare", "--splits", str(splits_toml), "--out", str(matrix), "--threads", "2"])
        assert result.exit_code == 0, result.stderr
        frame = pd.read_csv(matrix, index_col=0)
        assert list(frame.index) == ["patch-only", "fusion", "fusion-p"]
        assert list(frame.columns) == ["split1", "split2", "split3", "Average"]

        stats_out = tmp_path / "stats.csv"
        result = runner.invoke(
            app, ["stats", "--matrix", str(matrix), "--fcrit", "3.0", "--qalpha", "1.96", "--out", str(stats_out)]
        )
        # three splits can make one method win everywhere
        assert result.exit_code in (0, 8), result.stderr
        if result.exit_code == 0:
            assert "Friedman chi2_F" in result.stdout
            assert "statistic,value" in stats_out.read_text(encoding="utf-8")
        else:
            assert _error_fields(result.stderr)["code"] == "degenerate_statistic"


class TestStats:
    def test_published_ranks(self, runner):
        result = runner.invoke(app, ["stats", "--ranks", "1.73,1.27", "--datasets", "30", "--fcrit", "2.88", "--qalpha", "1.65"])
        assert result.exit_code == 0, result.stderr
        assert "Iman-Davenport F_F: 7.78" in result.stdout
        assert "critical diff CD  : 0.301" in result.stdout
        assert "null hypothesis   : rejected" in result.stdout

    def test_degenerate(self, runner):
        result = runner.invoke(app, ["stats", "--ranks", "1,2", "--datasets", "10", "--fcrit", "5.12", "--qalpha", "1.645"])
        assert result.exit_code == 8
        assert _error_fields(result.stderr)["code"] == "degenerate_statistic"

    def test_missing_critical_value(self, runner):
        result = runner.invoke(app, ["stats", "--ranks", "1.2,1.8", "--datasets", "11"])
        assert result.exit_code == 8
        assert _error_fields(result.stderr)["type"] == "MissingCriticalValueError"

    def test_needs_one_input(self, runner):
        result = runner.invoke(app, ["stats"])
        assert result.exit_code == 3


def test_log_level_is_checked(runner):
    result = runner.invoke(app, ["--log-level", "LOUD", "stats", "--ranks", "1.5,1.5", "--datasets", "4"])
    assert result.exit_code == 3


CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TestShippedConfigs:
    @pytest.fixture
    def workspace(self, tmp_path):
        (tmp_path / "configs").mkdir()
        for name in ("synth.toml", "splits.toml"):
            shutil.copy(CONFIGS / name, tmp_path / "configs" / name)
        return tmp_path

    def test_splits_need_generated_data(self, runner, workspace):
        result = runner.invoke(
            app, ["evaluate", "--splits", str(workspace / "configs" / "splits.toml"), "--out", str(workspace / "a.csv")]
        )
        assert result.exit_code == 3
        fields = _error_fields(result.stderr)
        assert fields["code"] == "bad_manifest"
        assert "synth" in fields["message"]

    def test_documented_workflow(self, runner, workspace):
        synth_toml = str(workspace / "configs" / "synth.toml")
        for seed in (0, 1):
            result = runner.invoke(
                app, ["synth", "--config", synth_toml, "--out", str(workspace / "data" / f"seed{seed}"), "--seed", str(seed)]
            )
            assert result.exit_code == 0, result.stderr
        out = workspace / "out" / "accuracy.csv"
        result = runner.invoke(
            app, ["evaluate", "--splits", str(workspace / "configs" / "splits.toml"), "--ranks", "1,5", "--out", str(out)]
        )
        assert result.exit_code == 0, result.stderr
        frame = pd.read_csv(out)
        assert sorted(frame["split"].unique()) == ["seed0", "seed1"]


class TestOutputFiles:
    def test_outputs_leave_no_temp_files(self, runner, tmp_path, bench_dir):
        out_dir = tmp_path / "out"
        args = ["identify", "--gallery", str(bench_dir / "gallery.csv"), "--probe", str(bench_dir / "probe.csv")]
        assert runner.invoke(app, args + ["--out", str(out_dir / "ranked.csv")]).exit_code == 0
        stats = ["stats", "--ranks", "1.73,1.27", "--datasets", "30", "--fcrit", "2.88", "--qalpha", "1.65"]
        assert runner.invoke(app, stats + ["--out", str(out_dir / "stats.csv")]).exit_code == 0
        assert sorted(p.name for p in out_dir.iterdir()) == ["ranked.csv", "stats.csv"]
        assert sorted(p.name for p in bench_dir.iterdir()) == ["gallery.csv", "probe.csv", "signatures", "truth.csv"]

    def test_rewrite_replaces_file(self, runner, tmp_path, bench_dir):
        out = tmp_path / "ranked.csv"
        out.write_text("stale\n" * 1000, encoding="utf-8")
        args = ["identify", "--gallery", str(bench_dir / "gallery.csv"), "--probe", str(bench_dir / "probe.csv")]
        assert runner.invoke(app, args + ["--out", str(out)]).exit_code == 0
        assert "stale" not in out.read_text(encoding="utf-8")
        assert out.read_text(encoding="utf-8").startswith("probe_id,rank,")
