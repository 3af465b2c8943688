"""
Tests de l'écriture des rapports (JSON, CSV, Excel, console)
"""
import json
import math

import pandas as pd
import pytest
from openpyxl import load_workbook

from src.analyzer import margin_histogram
from src.experiment import RunReport
from src.reporter import RunReporter, emit_reports
from src.utils import ConfigError


def fold_entry(fold, bounds=None):
    return {
        "fold": fold,
        "train_size": 8,
        "test_size": 2,
        "test_error": 0.25,
        "c_err": 0.1,
        "T": 2,
        "T_plus": 1,
        "minimal_immunity_margin": math.inf,
        "baselines": {"peer_a_only": 0.3, "peer_b_only": None, "ideal": 0.2},
        "bounds": bounds,
    }


def bounds_entry():
    return {
        "xi": 0.5, "alpha": 0.8, "rho": 0.5,
        "delta_theta": 1.0, "delta_perm": 0.2, "delta_set": 0.1, "c_of_m": 0.05,
        "deviation_rhs": 0.05, "loss_gap_rhs": 0.4,
        "empirical": {"relative_drift": 0.01, "loss_gap": 0.02},
        "violations": [],
    }


def make_report(audited=False, alerts=()):
    margins = [-0.2, 0.1, 0.4, 0.9]
    errors = [True, True, False, False]
    bounds = bounds_entry() if audited else None
    return RunReport(
        config={"data": "toy.csv", "domain": None, "er": "greedy", "noise_p": 0.1,
                "learner": "taylor", "folds": 2, "seed": 7},
        folds=[fold_entry(0, bounds), fold_entry(1, bounds)],
        mean_test_error=0.25,
        c_err=0.1,
        curve=[(-0.2, 1.0), (0.1, 0.5), (0.4, 0.0), (0.9, 0.0)],
        minimal_immunity_margin=math.inf,
        histogram=margin_histogram(margins, errors, bins=2),
        alerts=list(alerts),
    )


class TestEmitReports:
    def test_default_formats(self, tmp_path):
        written = emit_reports(make_report(), tmp_path)
        assert sorted(p.name for p in written) == ["margin_histogram.csv", "margins.csv", "report.json"]
        assert not (tmp_path / "bounds.json").exists()

    def test_margins_csv(self, tmp_path):
        emit_reports(make_report(), tmp_path, ("csv",))
        lines = (tmp_path / "margins.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "margin,cumulative_error"
        assert len(lines) == 5
        df = pd.read_csv(tmp_path / "margins.csv")
        assert df["cumulative_error"].tolist() == [1.0, 0.5, 0.0, 0.0]

    def test_json_replaces_infinity_with_null(self, tmp_path):
        emit_reports(make_report(), tmp_path, ("json",))
        payload = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert payload["minimal_immunity_margin"] is None
        assert payload["folds"][0]["minimal_immunity_margin"] is None
        assert payload["minimal_immunity_margin_unbounded"] is True
        assert payload["folds"][0]["minimal_immunity_margin_unbounded"] is True
        assert payload["test_errors"] == [0.25, 0.25]
        assert list(payload)[:3] == ["config", "test_errors", "mean_test_error"]

    def test_json_keeps_missing_margin_distinct_from_infinity(self, tmp_path):
        report = make_report()
        report.minimal_immunity_margin = None
        report.folds[1]["minimal_immunity_margin"] = 0.3
        emit_reports(report, tmp_path, ("json",))
        payload = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert payload["minimal_immunity_margin"] is None
        assert payload["minimal_immunity_margin_unbounded"] is False
        assert payload["folds"][1]["minimal_immunity_margin"] == 0.3
        assert payload["folds"][1]["minimal_immunity_margin_unbounded"] is False

    def test_bounds_json_when_audited(self, tmp_path):
        written = emit_reports(make_report(audited=True), tmp_path, ("json",))
        assert tmp_path / "bounds.json" in written
        payload = json.loads((tmp_path / "bounds.json").read_text(encoding="utf-8"))
        assert [f["fold"] for f in payload["folds"]] == [0, 1]
        assert payload["folds"][0]["xi"] == 0.5

    def test_excel_sheets(self, tmp_path):
        emit_reports(make_report(audited=True), tmp_path, ("xlsx",))
        workbook = load_workbook(tmp_path / "report.xlsx")
        assert workbook.sheetnames == ["Plis", "Marges", "Histogramme", "Bornes"]

    def test_excel_without_audit(self, tmp_path):
        emit_reports(make_report(), tmp_path, ("xlsx",))
        assert "Bornes" not in load_workbook(tmp_path / "report.xlsx").sheetnames

    def test_unwritable_directory(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(ConfigError):
            emit_reports(make_report(), blocker / "out")


class TestTextReport:
    def test_no_alert(self):
        text = RunReporter.generate_text_report(make_report())
        assert "Aucune alerte" in text
        assert "25.00%" in text
        assert "∞" in text

    def test_alerts_listed(self):
        text = RunReporter.generate_text_report(make_report(alerts=["⚠️  test"]))
        assert "ALERTES" in text
        assert "⚠️  test" in text
