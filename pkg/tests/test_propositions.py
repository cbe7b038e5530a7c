import pytest

from src.calibration.core.constants import VerdictStatus
from src.calibration.core.errors import InvalidParameterError
from src.calibration.core.predictions import EnsemblePredictions
from src.calibration.ensemble.combination import CombinationWeights
from src.calibration.synthlab.propositions import verify_propositions


class TestIdenticalMembers:

    def test_linear_propositions_hold(self, random_ensemble):
        member = random_ensemble(1, 60, 3).member(0)
        report = verify_propositions(EnsemblePredictions([member] * 3))
        assert report.verdicts["P2"].status == VerdictStatus.PASS
        assert report.verdicts["P3"].status == VerdictStatus.PASS
        assert report.verdicts["P2"].details["max_deviation"] <= 1e-12
        assert report.verdicts["P3"].details["max_deviation"] <= 1e-12
        assert report.passed

    def test_uncalibrated_members_leave_accuracy_bound_unchecked(self, random_ensemble):
        report = verify_propositions(random_ensemble(3, 60, 3), propositions=[1])
        assert list(report.verdicts) == ["P1"]
        assert report.verdicts["P1"].status == VerdictStatus.PRECONDITION_UNMET
        assert report.passed


class TestCalibratedMembers:

    @pytest.fixture(scope="class")
    def report(self, calibrated_members):
        return verify_propositions(
            calibrated_members.ensemble, CombinationWeights.uniform(10), targets=calibrated_members.truth
        )

    def test_gap_linearity(self, report):
        verdict = report.verdicts["P2"]
        assert verdict.status == VerdictStatus.PASS
        assert verdict.details["max_deviation"] <= 1e-12
        assert verdict.details["members_calibrated"]

    def test_top_label_witness_is_under_confident(self, report):
        verdict = report.verdicts["P4"]
        assert verdict.status == VerdictStatus.PASS
        assert verdict.details["ensemble_top_label_gap"] < 0
        assert "under-confident" in verdict.message

    def test_regions_are_not_shared(self, report):
        assert report.verdicts["P3"].status == VerdictStatus.PRECONDITION_UNMET

    def test_report_passes(self, report):
        assert report.passed

    def test_realized_labels_give_no_witness(self, calibrated_members):
        report = verify_propositions(calibrated_members.ensemble, propositions=[4])
        assert report.verdicts["P4"].status == VerdictStatus.NO_WITNESS


class TestArguments:

    def test_unknown_proposition(self, random_ensemble):
        with pytest.raises(InvalidParameterError):
            verify_propositions(random_ensemble(2, 10, 3), propositions=[5])

    def test_report_serializes(self, random_ensemble):
        payload = verify_propositions(random_ensemble(2, 10, 3)).model_dump()
        assert set(payload["verdicts"]) == {"P1", "P2", "P3", "P4"}
        assert payload["verdicts"]["P2"]["status"] == VerdictStatus.PASS
