"""
Pytest fixtures for qes-engine tests.
"""
import json
from fractions import Fraction
from pathlib import Path

import pytest

from core.assembler import WeightValues
from core.catalog import preset
from core.coeffseq import CoeffSeq
from core.model import problem_to_json
from core.solver import SolutionRecord


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep QES_* variables from the developer's shell out of the tests."""
    for name in ("QES_THREADS", "QES_SEED", "QES_TOL_ABS", "QES_GRID_POINTS", "QES_WINDOW_CAP"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def darboux_doc():
    """Problem document of the exactly solvable member at N=0."""
    doc = problem_to_json(preset("exact-darboux").spec)
    doc["ansatz"]["N"] = 0
    return doc


@pytest.fixture
def problem_file(tmp_path: Path, darboux_doc):
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(darboux_doc, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def run_file(tmp_path: Path):
    """Factory writing a YAML run file and returning its path."""

    def _write(text: str, name: str = "run.yml") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def free_doc():
    """Zero potential with f = 1 + h^2 and a trivial weight."""
    return {
        "schema_version": 1,
        "name": "free",
        "mode": "general",
        "potential": {"vmin": 2, "vmax": 0, "V": {}},
        "basis": {"f0": {"0": 1, "2": 1}},
        "ansatz": {"N": 0, "lambda": 0},
        "domain": {"kind": "full-line"},
        "unknowns": {"gtilde": [], "glog": False, "lambda": False, "potential": []},
    }


@pytest.fixture
def darboux_record():
    """Ground state e^{-x^2/4}/(1 + x^2) at E = -3/2, written out by hand."""
    return SolutionRecord(
        lam=Fraction(-1),
        energy=Fraction(-3, 2),
        c=CoeffSeq.delta(0),
        weight=WeightValues(CoeffSeq({2: Fraction(1, 4)})),
        window=(0, 0),
        root_choices=["gtilde[2] = 1/4 (+sqrt root of row j=4)"],
        exact=True,
    )
