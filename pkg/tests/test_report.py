"""
Tests for solution, verification and sweep report files.
"""
from __future__ import annotations

import csv
import json
from fractions import Fraction

import pytest

from core.catalog import preset
from core.oracle import VerificationReport
from core.report import (
    REPORT_SCHEMA_VERSION,
    ReportError,
    SweepRow,
    read_solutions,
    solutions_document,
    verification_document,
    write_solutions,
    write_sweep_csv,
    write_verification,
)
from core.solver import BranchFailure, SolveOutcome


def _problem():
    return preset("exact-darboux").spec.with_order(0)


def _outcome(record) -> SolveOutcome:
    return SolveOutcome(
        records=[record],
        failures=[BranchFailure((0, 0), "no admissible completion", ["gtilde[2] = -1/4"])],
        windows=[(0, 0)],
        seed=11,
    )


def _check(passed: bool = True) -> VerificationReport:
    return VerificationReport(
        residual_rel=2e-12,
        residual_rel_coarse=1e-9,
        residual_rel_fine=6e-11,
        node_count=0,
        bounded=True,
        passed=passed,
        grid={"kind": "full-line", "n_pts": 801, "lo": -10.0, "hi": 10.0},
    )


class TestSolutions:
    def test_document_layout(self, darboux_record):
        doc = solutions_document(_problem(), _outcome(darboux_record), {"seed": 11}, [_check()])
        assert doc["schema_version"] == REPORT_SCHEMA_VERSION
        assert doc["kind"] == "solutions"
        assert doc["seed"] == 11
        assert doc["preset"] is None
        assert doc["windows"] == [[0, 0]]
        assert doc["records"][0]["energy"] == "-3/2"
        assert doc["records"][0]["verification"]["passed"] is True
        assert doc["failures"][0]["reason"] == "no admissible completion"

    def test_missing_verification_is_null(self, darboux_record):
        doc = solutions_document(_problem(), _outcome(darboux_record), {})
        assert doc["records"][0]["verification"] is None

    def test_written_bytes_are_stable(self, tmp_path, darboux_record):
        first, second = tmp_path / "a.json", tmp_path / "b" / "c.json"
        doc = solutions_document(_problem(), _outcome(darboux_record), {"seed": 11}, [_check()])
        write_solutions(first, doc)
        write_solutions(second, solutions_document(_problem(), _outcome(darboux_record), {"seed": 11}, [_check()]))
        assert first.read_bytes() == second.read_bytes()
        assert first.read_text(encoding="utf-8").endswith("}\n")

    def test_read_back(self, tmp_path, darboux_record):
        path = tmp_path / "solutions.json"
        write_solutions(path, solutions_document(_problem(), _outcome(darboux_record), {}))
        p, records = read_solutions(path)
        assert p == _problem()
        assert len(records) == 1
        assert records[0].energy == Fraction(-3, 2)
        assert records[0].weight.gtilde[2] == Fraction(1, 4)
        assert records[0].exact


class TestReadErrors:
    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"kind\": \n", encoding="utf-8")
        with pytest.raises(ReportError, match="invalid JSON at line"):
            read_solutions(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ReportError, match="cannot read file"):
            read_solutions(tmp_path / "absent.json")

    def test_wrong_kind(self, tmp_path):
        path = tmp_path / "v.json"
        path.write_text(json.dumps({"kind": "verification", "schema_version": 1}), encoding="utf-8")
        with pytest.raises(ReportError, match="expected a solutions report"):
            read_solutions(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v.json"
        path.write_text(json.dumps({"kind": "solutions", "schema_version": 99}), encoding="utf-8")
        with pytest.raises(ReportError, match="unsupported schema_version 99"):
            read_solutions(path)

    def test_bad_record_is_reported_by_index(self, tmp_path, darboux_record):
        path = tmp_path / "s.json"
        doc = solutions_document(_problem(), _outcome(darboux_record), {})
        del doc["records"][0]["energy"]
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(ReportError) as excinfo:
            read_solutions(path)
        assert excinfo.value.errors[0].startswith("records[0]")

    def test_bad_problem_errors_are_forwarded(self, tmp_path, darboux_record):
        path = tmp_path / "s.json"
        doc = solutions_document(_problem(), _outcome(darboux_record), {})
        doc["problem"]["mode"] = "fancy"
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(ReportError, match="mode must be one of"):
            read_solutions(path)


class TestVerificationDocument:
    def test_overall_pass_needs_every_record(self, tmp_path, darboux_record):
        doc = verification_document(_problem(), [darboux_record, darboux_record], [_check(), _check(False)], "s.json")
        assert doc["kind"] == "verification"
        assert doc["passed"] is False
        assert [r["record"] for r in doc["results"]] == [0, 1]
        path = tmp_path / "verification.json"
        write_verification(path, doc)
        assert json.loads(path.read_text(encoding="utf-8"))["source"] == "s.json"

    def test_order_ratio_serialization(self):
        report = _check()
        assert report.to_json()["order_ratio"] == pytest.approx(1e-9 / 6e-11)
        report.residual_rel_fine = 0.0
        assert report.to_json()["order_ratio"] is None


class TestSweepCsv:
    def test_rows(self, tmp_path):
        rows = [
            SweepRow("b", Fraction(1, 2), 0, Fraction(-1), 1.25, (0, 2), {"V[-1]": Fraction(3)}, 2e-10, True, True),
            SweepRow("b", Fraction(1), 0, 0.5, 2.0, (1, 1)),
        ]
        path = tmp_path / "out" / "sweep.csv"
        assert write_sweep_csv(path, rows) == 2
        with path.open(encoding="utf-8") as fh:
            parsed = list(csv.DictReader(fh))
        assert parsed[0]["value"] == "1/2"
        assert parsed[0]["window"] == "0:2"
        assert parsed[0]["fitted"] == "V[-1]=3"
        assert parsed[0]["residual_rel"] == "2.000000e-10"
        assert parsed[0]["passed"] == "true"
        assert parsed[1]["value"] == "1"
        assert parsed[1]["bounded"] == ""
