"""
Tests for problem documents: parsing, serialization and validation.
"""
from __future__ import annotations

import copy
import json
from fractions import Fraction
from pathlib import Path

import pytest

from core.catalog import preset
from core.model import (
    MODE_GENERAL,
    MODE_SIMPLE,
    PotentialKey,
    ProblemParseError,
    catalog_presets,
    has_errors,
    load_problem,
    parse_problem,
    problem_to_json,
    validate,
)


def _codes(diags) -> set[str]:
    return {d.code for d in diags if d.severity == "error"}


class TestParse:
    def test_parses_exact_values(self, darboux_doc) -> None:
        p = parse_problem(darboux_doc)
        assert p.mode == MODE_SIMPLE
        assert p.potential.vk[-2] == Fraction(-8)
        assert p.potential.amplitude(1) == Fraction(1, 4)
        assert p.basis.f0[2] == 1
        assert p.weight.unknown_mask == frozenset({1, 2})
        assert p.ansatz.lambda_unknown

    def test_collects_every_error(self) -> None:
        doc = {
            "name": "broken",
            "mode": "fancy",
            "potential": {"vmin": "two", "V": {"x": 1}},
            "basis": {"f0": {"0": "1/0"}},
            "extra": True,
        }
        with pytest.raises(ProblemParseError) as excinfo:
            parse_problem(doc, source="broken.json")
        errors = excinfo.value.errors
        assert excinfo.value.source == "broken.json"
        assert any("unknown top-level key: extra" in e for e in errors)
        assert any("mode must be one of" in e for e in errors)
        assert any("potential.vmin must be an integer" in e for e in errors)
        assert any("potential.V key is not an integer" in e for e in errors)
        assert any(e.startswith("basis.f0") for e in errors)

    def test_top_level_must_be_object(self) -> None:
        with pytest.raises(ProblemParseError):
            parse_problem([1, 2, 3])

    def test_adjustable_keys(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["unknowns"]["potential"] = [{"k": -1}, {"k": 0, "l": -1}]
        p = parse_problem(doc)
        assert p.adjustable == (PotentialKey(-1), PotentialKey(0, -1))
        assert [k.name for k in p.adjustable] == ["V[-1]", "v[-1,0]"]

    def test_load_problem_reports_json_position(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text('{\n  "name": "x",\n  oops\n}', encoding="utf-8")
        with pytest.raises(ProblemParseError, match="line 3"):
            load_problem(path)

    def test_load_problem_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ProblemParseError, match="cannot read file"):
            load_problem(tmp_path / "missing.json")

    def test_document_survives_serialization(self, problem_file: Path) -> None:
        p = load_problem(problem_file)
        again = parse_problem(json.loads(json.dumps(problem_to_json(p))))
        assert again == p


class TestDerived:
    def test_default_windows(self, darboux_doc) -> None:
        p = parse_problem(darboux_doc).with_order(3)
        assert p.c_window == (0, 3)
        assert p.with_mode(MODE_GENERAL).c_window == (-3, 3)

    def test_explicit_window_is_kept(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["mode"] = MODE_GENERAL
        doc["ansatz"]["c_window"] = [-1, 2]
        assert parse_problem(doc).c_window == (-1, 2)

    def test_vstar(self) -> None:
        assert preset("exact-darboux").spec.vstar == 2
        assert preset("screened-coulomb").spec.vstar == 2
        assert preset("lame").spec.vstar == 2


class TestValidate:
    @pytest.mark.parametrize("p", catalog_presets(), ids=lambda p: p.name)
    def test_every_preset_is_valid(self, p) -> None:
        diags = validate(p)
        assert not has_errors(diags), [str(d) for d in diags]
        assert any(d.code == "j-window" for d in diags)

    def test_simple_mode_rules(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["weight"] = {"glog": 1}
        doc["basis"]["hprime_sqrt"] = {"0": 1, "2": 1}
        doc["potential"]["vmin"] = 3
        codes = _codes(validate(parse_problem(doc)))
        assert {"simple-log", "simple-sqrt", "simple-vmin"} <= codes

    def test_structural_errors(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["mode"] = MODE_GENERAL
        doc["basis"]["f0"] = {}
        doc["potential"]["V"]["5"] = 1
        doc["weight"] = {"gtilde": {"1": 1}}
        doc["ansatz"]["pivot"] = 4
        codes = _codes(validate(parse_problem(doc)))
        assert {"f0-zero", "potential-key", "weight-mask", "pivot"} <= codes

    def test_empty_window(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["mode"] = MODE_GENERAL
        doc["ansatz"]["c_window"] = [2, 1]
        assert "c-window" in _codes(validate(parse_problem(doc)))

    def test_adjustable_entry_rules(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["unknowns"]["potential"] = [{"k": -1}, {"k": -1}, {"k": 3}]
        diags = validate(parse_problem(doc))
        messages = [d.message for d in diags if d.code == "adjustable"]
        assert any("listed twice" in m for m in messages)
        assert any("outside" in m for m in messages)

    def test_evaluator_rules(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["basis"]["evaluator"] = {"kind": "numeric"}
        assert "evaluator" in _codes(validate(parse_problem(doc)))
        doc["basis"]["evaluator"] = {"kind": "identity", "f_root": "h"}
        assert "evaluator" in _codes(validate(parse_problem(doc)))
        doc["basis"]["evaluator"] = {"kind": "jacobi_sc", "params": {"k": "3/2"}}
        assert "evaluator" in _codes(validate(parse_problem(doc)))

    def test_low_vmin_only_warns(self) -> None:
        diags = validate(preset("screened-coulomb").spec)
        assert not has_errors(diags)
        assert any(d.code == "vmin-low" and d.severity == "warning" for d in diags)

    def test_window_cap_overflow_is_an_error(self, darboux_doc) -> None:
        p = parse_problem(darboux_doc).with_order(600)
        assert "j-window" in _codes(validate(p))
