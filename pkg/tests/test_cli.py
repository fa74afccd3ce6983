"""CLI subcommand chain, exit codes, manifests, and report formatting."""

import json

import numpy as np
import pytest

from evoroc.cli import run_cli
from evoroc.metrics import auc, roc_curve
from evoroc.report import MethodMetrics, relative_improvement, write_report


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """One small synth -> train -> evolve chain shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = str(root / "data.evod")
    model = str(root / "model.evom")
    hist = str(root / "hist.csv")
    head = str(root / "head.evom")
    stats = str(root / "gen.csv")
    assert run_cli(["synth", "--patients", "12", "--seed", "7", "--out", data]) == 0
    assert (
        run_cli(
            ["train", "--data", data, "--seed", "7", "--epochs", "2",
             "--out", model, "--history", hist]
        )
        == 0
    )
    assert (
        run_cli(
            ["evolve", "--data", data, "--model", model, "--seed", "7",
             "--population", "8", "--max-generations", "3",
             "--out", head, "--stats", stats]
        )
        == 0
    )
    return {"root": root, "data": data, "model": model,
            "hist": hist, "head": head, "stats": stats}


class TestChain:
    def test_synth_output_valid(self, artifacts):
        from evoroc.data import load_dataset

        ds = load_dataset(artifacts["data"])
        assert len({r.patient_id for r in ds.records}) == 12

    def test_train_history_rows(self, artifacts):
        lines = open(artifacts["hist"]).read().strip().splitlines()
        assert lines[0] == "epoch,train_loss,train_auc,val_auc"
        assert len(lines) - 1 <= 50

    def test_evolve_stats_csv(self, artifacts):
        lines = open(artifacts["stats"]).read().strip().splitlines()
        assert lines[0] == "generation,max_train_auc,mean_train_auc,max_val_auc,best_index"

    def test_manifests_written_with_checksums(self, artifacts):
        for key in ("data", "model", "head"):
            manifest_path = artifacts[key] + ".manifest.json"
            manifest = json.load(open(manifest_path))
            assert manifest["seed"] == 7
            assert artifacts[key] in manifest["outputs"]
            assert len(manifest["outputs"][artifacts[key]]) == 64  # sha256 hex

    def test_eval_and_report(self, artifacts, capsys):
        code = run_cli(
            ["eval", "--data", artifacts["data"], "--model", artifacts["model"],
             "--seed", "7", "--split", "val"]
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert printed.startswith("val_auc=")

        base = str(artifacts["root"] / "report")
        code = run_cli(
            ["report", "--data", artifacts["data"], "--model", artifacts["model"],
             "--head", artifacts["head"], "--seed", "7", "--out", base]
        )
        assert code == 0
        txt = open(base + ".txt").read()
        assert "AUC on train set" in txt
        assert "AUC on validation set" in txt
        assert "AUC on test set" in txt
        assert "Relative test-AUC improvement:" in txt

    def test_roc_export_consistent_with_printed_auc(self, artifacts, capsys):
        roc_path = str(artifacts["root"] / "roc.csv")
        code = run_cli(
            ["eval", "--data", artifacts["data"], "--model", artifacts["model"],
             "--seed", "7", "--split", "test", "--roc", roc_path]
        )
        assert code == 0
        printed = capsys.readouterr().out
        value = float(printed.split("test_auc=")[1].split()[0])
        rows = np.genfromtxt(roc_path, delimiter=",", skip_header=1)
        area = float(np.trapezoid(rows[:, 1], rows[:, 0]))
        assert abs(area - value) < 1e-6

    def test_roc_export_deterministic(self, artifacts):
        p1 = str(artifacts["root"] / "roc1.csv")
        p2 = str(artifacts["root"] / "roc2.csv")
        for p in (p1, p2):
            assert (
                run_cli(
                    ["eval", "--data", artifacts["data"], "--model", artifacts["model"],
                     "--seed", "7", "--split", "test", "--roc", p]
                )
                == 0
            )
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestExitCodes:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["synth", "--bogus", "1"])
        assert exc.value.code == 2

    def test_missing_input_file_exits_1(self, tmp_path, capsys):
        code = run_cli(
            ["train", "--data", str(tmp_path / "nope.evod"), "--seed", "0",
             "--out", str(tmp_path / "m.evom")]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_corrupt_data_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.evod"
        bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNKJUNK")
        code = run_cli(
            ["train", "--data", str(bad), "--seed", "0",
             "--out", str(tmp_path / "m.evom")]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestReportFormatting:
    def test_published_values_give_nine_point_three(self, tmp_path):
        sgd = MethodMetrics(0.867, 0.794, 0.707)
        ga = MethodMetrics(0.877, 0.815, 0.773)
        _, txt_path, improvement = write_report(sgd, ga, str(tmp_path / "r"))
        assert f"{improvement:.1f}%" == "9.3%"
        assert "Relative test-AUC improvement: 9.3%" in open(txt_path).read()

    def test_identical_metrics_zero_percent(self, tmp_path):
        m = MethodMetrics(0.9, 0.8, 0.7)
        _, txt_path, _ = write_report(m, m, str(tmp_path / "r"))
        assert "improvement: 0.0%" in open(txt_path).read()

    def test_negative_improvement_signed(self, tmp_path):
        sgd = MethodMetrics(0.9, 0.8, 0.8)
        ga = MethodMetrics(0.9, 0.8, 0.72)
        _, txt_path, improvement = write_report(sgd, ga, str(tmp_path / "r"))
        assert improvement < 0
        assert "improvement: -10.0%" in open(txt_path).read()

    def test_relative_improvement_formula(self):
        assert abs(relative_improvement(0.707, 0.773) - 9.33521924) < 1e-6

    def test_csv_layout(self, tmp_path):
        sgd = MethodMetrics(0.867, 0.794, 0.707)
        ga = MethodMetrics(0.877, 0.815, 0.773)
        csv_path, _, _ = write_report(sgd, ga, str(tmp_path / "r"))
        lines = open(csv_path).read().strip().splitlines()
        assert lines[0] == "metric,sgd,ga"
        assert lines[1].startswith("train_auc,0.867000,0.877000")
        assert lines[-1].startswith("test_improvement_pct,9.3")
