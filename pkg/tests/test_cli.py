import csv
import json
import os

import numpy as np
import pytest

from src.calibration.cli import main as cli
from src.calibration.cli.main import main
from src.calibration.core.constants import VerdictStatus
from src.calibration.core.predictions import LabeledPredictionSet, LogitSet
from src.calibration.persistence.codec import load_predictions, store_predictions
from src.calibration.synthlab.propositions import PropositionReport, Verdict


def write_preds(tmp_path, name, preds):
    path = str(tmp_path / name)
    store_predictions(preds, path)
    return path


def read_json(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def example_csv(tmp_path):
    path = tmp_path / "preds.csv"
    path.write_text("label,p1,p2\n1,0.6,0.4\n")
    return str(path)


class TestMetricsCommand:

    def test_documented_example(self, example_csv, capsys):
        assert main(["metrics", example_csv]) == 0
        report = read_json(capsys)
        assert report["accuracy"] == 1.0
        assert report["ece"] == pytest.approx(0.4)
        assert report["bin_count"] == 15

    def test_csv_table(self, example_csv, capsys):
        assert main(["metrics", example_csv, "--csv"]) == 0
        rows = list(csv.reader(capsys.readouterr().out.splitlines()))
        assert len(rows) == 2
        assert rows[0][-2:] == ["global_gap_all_label_1", "global_gap_all_label_2"]

    def test_output_file(self, example_csv, tmp_path, capsys):
        out = str(tmp_path / "out" / "report.json")
        assert main(["metrics", example_csv, "--exact", "-o", out]) == 0
        assert capsys.readouterr().out == ""
        with open(out) as f:
            report = json.load(f)
        assert report["binning"] == "exact-value"

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["metrics", str(tmp_path / "nope.csv")]) == 2
        assert "error[file not found]" in capsys.readouterr().err

    def test_bad_row_sum_exits_3(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("label,c1,c2\n1,0.6,0.6\n")
        assert main(["metrics", str(path)]) == 3
        assert "error[row sum]" in capsys.readouterr().err

    def test_bad_bin_count_exits_2(self, example_csv):
        assert main(["metrics", example_csv, "--bins", "-3"]) == 2

    def test_unknown_option_exits_2(self, example_csv):
        assert main(["metrics", example_csv, "--no-such-flag"]) == 2

    def test_truth_shape_mismatch_exits_3(self, example_csv, tmp_path):
        truth = write_preds(tmp_path, "truth.bin", LabeledPredictionSet([[0.5, 0.5], [0.5, 0.5]], [0, 1]))
        assert main(["metrics", example_csv, "--truth", truth]) == 3


class TestFitCommand:

    def test_fits_cifar_like_logits(self, cifar_like_path, capsys):
        assert main(["fit", cifar_like_path]) == 0
        result = read_json(capsys)
        assert result["model"]["variant"] == "global"
        assert result["ece"] <= result["ece_at_t1"]

    def test_dynamic_mode(self, cifar_like_path, capsys):
        assert main(["fit", cifar_like_path, "--mode", "dynamic", "--regions", "3"]) == 0
        model = read_json(capsys)["model"]
        assert model["variant"] == "regional"
        assert len(model["temps"]) == len(model["boundaries"]) + 1

    def test_ensemble_input_rejected(self, tmp_path, random_ensemble):
        path = write_preds(tmp_path, "ens.bin", random_ensemble(2, 10, 3))
        assert main(["fit", path]) == 2


class TestCombineCommand:

    def test_single_member_is_unchanged(self, tmp_path, simplex_rows, capsys):
        preds = LabeledPredictionSet(simplex_rows(20, 3), np.arange(20) % 3)
        path = write_preds(tmp_path, "member.bin", preds)
        out = str(tmp_path / "combined.bin")
        assert main(["combine", path, "--out-preds", out]) == 0
        payload = read_json(capsys)
        assert payload["weights"] == [1.0]
        assert load_predictions(out).probs.tobytes() == preds.probs.tobytes()

    def test_post_calibration_with_model_file(self, tmp_path, rng, capsys):
        labels = rng.integers(0, 3, size=50)
        paths = [write_preds(tmp_path, f"m{m}.bin", LogitSet(rng.normal(size=(50, 3)), labels)) for m in range(2)]
        model = tmp_path / "model.json"
        model.write_text(json.dumps({"variant": "global", "temps": [1.5], "boundaries": []}))
        assert main(["combine", *paths, "--calibrate", "post", "--temp-model", str(model)]) == 0
        assert read_json(capsys)["temperature_model"]["temps"] == [1.5]

    def test_weights_file(self, tmp_path, random_ensemble, capsys):
        path = write_preds(tmp_path, "ens.bin", random_ensemble(2, 10, 3))
        weights = tmp_path / "w.json"
        weights.write_text(json.dumps({"weights": [0.25, 0.75]}))
        assert main(["combine", path, "--weights", "file", "--weights-file", str(weights)]) == 0
        assert read_json(capsys)["weights"] == [0.25, 0.75]

    def test_file_weights_need_a_file(self, tmp_path, random_ensemble):
        path = write_preds(tmp_path, "ens.bin", random_ensemble(2, 10, 3))
        assert main(["combine", path, "--weights", "file"]) == 2

    def test_member_shapes_must_match(self, tmp_path, simplex_rows):
        a = write_preds(tmp_path, "a.bin", LabeledPredictionSet(simplex_rows(5, 3), [0] * 5))
        b = write_preds(tmp_path, "b.bin", LabeledPredictionSet(simplex_rows(6, 3), [0] * 6))
        assert main(["combine", a, b]) == 3


class TestSynthCommand:

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        args = ["synth", "--algorithm", "alg1", "--m", "3", "--n", "200", "--seed", "9"]
        assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
        assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
        names = sorted(os.listdir(tmp_path / "a"))
        assert names == ["manifest.json", "member_01.bin", "member_02.bin", "member_03.bin", "truth.bin"]
        for name in names:
            if name.endswith(".bin"):
                assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_alg2_manifest(self, tmp_path, capsys):
        out = tmp_path / "alg2"
        assert main(["synth", "--algorithm", "alg2", "--n", "1000", "--seed", "1", "--out-dir", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["parameters"]["theoretical"]["ace"] == pytest.approx(9 / 32)
        assert manifest["warnings"] == []

    def test_alg2_unequal_counts_warn(self, tmp_path, capsys):
        out = tmp_path / "alg2"
        assert main(["synth", "--algorithm", "alg2", "--n", "1001", "--out-dir", str(out)]) == 0
        assert len(read_json(capsys)["warnings"]) == 1

    def test_example1_csv(self, tmp_path, capsys):
        out = tmp_path / "ex1"
        args = ["synth", "--algorithm", "example1", "--n", "300", "--format", "csv", "--out-dir", str(out)]
        assert main(args) == 0
        assert load_predictions(str(out / "predictions.csv")).n_classes == 4

    def test_tau_out_of_range(self, tmp_path):
        assert main(["synth", "--algorithm", "example1", "--tau", "0.2", "--out-dir", str(tmp_path)]) == 2


class TestVerifyCommand:

    def test_synthetic_members_pass(self, tmp_path, capsys):
        out = tmp_path / "alg1"
        assert main(["synth", "--m", "4", "--n", "400", "--seed", "2", "--out-dir", str(out)]) == 0
        capsys.readouterr()
        members = sorted(str(p) for p in out.glob("member_*.bin"))
        assert main(["verify", *members, "--truth", str(out / "truth.bin")]) == 0
        payload = read_json(capsys)
        assert payload["passed"] is True
        assert payload["verdicts"]["P4"]["status"] == "pass"

    def test_failed_verdict_exits_4(self, tmp_path, random_ensemble, monkeypatch, capsys):
        failing = PropositionReport(
            tolerance=1e-9,
            verdicts={"P2": Verdict(proposition=2, status=VerdictStatus.FAIL, message="forced")},
        )
        monkeypatch.setattr(cli, "verify_propositions", lambda *args, **kwargs: failing)
        path = write_preds(tmp_path, "ens.bin", random_ensemble(2, 10, 3))
        assert main(["verify", path]) == 4
        assert read_json(capsys)["passed"] is False

    def test_unknown_proposition_exits_2(self, tmp_path, random_ensemble):
        path = write_preds(tmp_path, "ens.bin", random_ensemble(2, 10, 3))
        assert main(["verify", path, "--props", "7"]) == 2


class TestTableCommands:

    def test_reliability_skips_empty_bins(self, tmp_path, one_hot_correct, capsys):
        path = write_preds(tmp_path, "preds.bin", one_hot_correct)
        assert main(["reliability", path]) == 0
        rows = list(csv.reader(capsys.readouterr().out.splitlines()))
        assert rows[0] == ["bin_center", "occupancy", "confidence", "accuracy", "count"]
        assert len(rows) == 2
        assert float(rows[1][0]) == pytest.approx(29 / 30)
        assert float(rows[1][3]) == 1.0

    def test_reliability_with_empty_bins(self, tmp_path, one_hot_correct, capsys):
        path = write_preds(tmp_path, "preds.bin", one_hot_correct)
        assert main(["reliability", path, "--bins", "5", "--include-empty"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 6

    def test_sweep(self, tmp_path, random_ensemble, capsys):
        path = write_preds(tmp_path, "ens.bin", random_ensemble(3, 30, 3))
        assert main(["sweep", path, "--bins", "5,1", "--members", "--exact"]) == 0
        rows = list(csv.reader(capsys.readouterr().out.splitlines()))
        assert rows[0] == ["bins", "ace", "ece", "source"]
        assert len(rows) == 1 + 3 * 4
        assert rows[-1][0] == "exact"
        assert float(rows[1 + 4][1]) <= 1e-10
