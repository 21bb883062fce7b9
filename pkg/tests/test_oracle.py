"""
Tests for the independent verification oracle.
"""
from __future__ import annotations

import copy
import csv
import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from core.assembler import WeightValues
from core.catalog import preset
from core.coeffseq import CoeffSeq
from core.model import DOMAIN_HALF_LINE, DOMAIN_PERIODIC, parse_problem
from core.oracle import (
    DEFAULT_GRID_POINTS,
    DEFAULT_PASS_THRESHOLD,
    MIN_GRID_POINTS,
    MIN_ORDER_RATIO,
    METHOD_NUMEROV,
    Basis,
    Grid,
    OracleError,
    PointSingular,
    count_nodes,
    eval_psi,
    fd_spectrum,
    judge_bounded,
    psi_profile,
    residual_check,
    sample_points,
    write_profile_csv,
)


@pytest.fixture
def darboux():
    return preset("exact-darboux").spec.with_order(0)


def _excited(record):
    # x(3 + x^2) e^{-x^2/4}/(1 + x^2), one node at the origin
    return replace(record, energy=Fraction(3, 2), c=CoeffSeq({1: 3, 3: 1}), window=(1, 3))


class TestGrid:
    def test_full_line_bounds(self, darboux):
        grid = Grid.for_problem(darboux)
        assert grid.bounds == (-10.0, 10.0)
        assert grid.points()[0] == -10.0
        assert grid.spacing == pytest.approx(20.0 / (grid.n_pts - 1))

    def test_periodic_excludes_endpoint(self):
        grid = Grid(kind=DOMAIN_PERIODIC, n_pts=100, period=2.0)
        pts = grid.points()
        assert pts[-1] < 2.0
        assert grid.spacing == pytest.approx(0.02)

    def test_half_line_starts_off_origin(self):
        grid = Grid(kind=DOMAIN_HALF_LINE, n_pts=MIN_GRID_POINTS, length=4.0)
        assert grid.bounds[0] > 0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "full-line", "n_pts": MIN_GRID_POINTS - 1},
            {"kind": DOMAIN_HALF_LINE, "epsilon": -1.0},
            {"kind": DOMAIN_PERIODIC},
            {"kind": DOMAIN_PERIODIC, "period": 0.0},
        ],
    )
    def test_rejects_unusable_grids(self, kwargs):
        with pytest.raises(OracleError):
            Grid(**kwargs)


class TestPsi:
    def test_closed_form_values(self, darboux, darboux_record):
        assert eval_psi(darboux, darboux_record, 0.0) == pytest.approx(1.0)
        assert eval_psi(darboux, darboux_record, 1.0) == pytest.approx(math.exp(-0.25) / 2)

    def test_negative_power_of_vanishing_h(self, darboux, darboux_record):
        singular = replace(darboux_record, c=CoeffSeq({-1: 1}), window=(-1, -1))
        with pytest.raises(PointSingular):
            eval_psi(darboux, singular, 0.0)

    def test_profile_sits_on_sample_points(self, darboux, darboux_record):
        pts = sample_points(darboux)
        assert pts.min() > -10.0 and pts.max() < 10.0
        profile = psi_profile(darboux, darboux_record)
        assert profile.shape == pts.shape
        assert np.all(profile > 0)

    def test_nodes(self, darboux, darboux_record):
        assert count_nodes(psi_profile(darboux, darboux_record)) == 0
        assert count_nodes(psi_profile(darboux, _excited(darboux_record))) == 1
        assert count_nodes(np.array([1.0, 1e-20, -1e-20, 1.0])) == 0
        assert count_nodes(np.array([np.nan, np.nan])) == 0


class TestBoundedness:
    def test_decaying_weight_is_bounded(self, darboux, darboux_record):
        assert judge_bounded(darboux, darboux_record) is True

    def test_growing_weight_is_not(self, darboux, darboux_record):
        growing = replace(darboux_record, weight=WeightValues(CoeffSeq({2: Fraction(-1, 4)})))
        assert judge_bounded(darboux, growing) is False


class TestResidualCheck:
    def test_exact_record_passes(self, darboux, darboux_record):
        report = residual_check(darboux, darboux_record)
        assert report.passed, report.notes
        assert report.residual_rel <= 1e-8
        assert report.node_count == 0
        assert report.bounded is True

    def test_excited_record_passes_with_one_node(self, darboux, darboux_record):
        report = residual_check(darboux, _excited(darboux_record))
        assert report.passed, report.notes
        assert report.residual_rel <= 1e-8
        assert report.node_count == 1

    @pytest.mark.parametrize("excited", [False, True], ids=["ground", "excited"])
    def test_default_grid_judges_the_extrapolated_residual(self, darboux, darboux_record, excited):
        record = _excited(darboux_record) if excited else darboux_record
        report = residual_check(darboux, record, Grid.for_problem(darboux), pass_threshold=DEFAULT_PASS_THRESHOLD)
        assert report.grid["n_pts"] == DEFAULT_GRID_POINTS
        # the raw stencil error on this grid sits above the threshold
        assert report.residual_rel_coarse > DEFAULT_PASS_THRESHOLD
        assert report.residual_rel < report.residual_rel_fine < report.residual_rel_coarse
        assert report.order_ratio >= MIN_ORDER_RATIO
        assert report.passed, report.notes
        assert report.notes == []

    def test_energy_perturbation_is_detected(self, darboux, darboux_record):
        good = residual_check(darboux, darboux_record)
        bad = residual_check(darboux, replace(darboux_record, energy=Fraction(-3, 2) + Fraction(1, 1000)))
        assert not bad.passed
        assert bad.residual_rel >= 100 * good.residual_rel
        assert bad.order_ratio < MIN_ORDER_RATIO
        assert any("refinement ratio" in note for note in bad.notes)

    def test_report_json_carries_every_residual(self, darboux, darboux_record):
        doc = residual_check(darboux, darboux_record).to_json()
        assert doc["residual_rel"] < doc["residual_rel_fine"] < doc["residual_rel_coarse"]
        assert doc["order_ratio"] == pytest.approx(doc["residual_rel_coarse"] / doc["residual_rel_fine"])

    def test_spectrum_cross_check(self, darboux, darboux_record):
        report = residual_check(darboux, darboux_record, with_spectrum=True, n_states=3)
        assert report.fd_eigenvalue == pytest.approx(-1.5, abs=1e-4)
        assert report.fd_gap < 1e-4


class TestSpectrum:
    def test_levels_of_the_exact_member(self, darboux):
        levels = fd_spectrum(darboux, n_states=4)
        assert levels == pytest.approx([-1.5, 1.5, 2.5, 3.5], abs=1e-4)

    def test_numerov_agrees(self, darboux):
        grid = Grid.for_problem(darboux, n_pts=401)
        levels = fd_spectrum(darboux, grid, n_states=2, method=METHOD_NUMEROV)
        assert levels == pytest.approx([-1.5, 1.5], abs=1e-4)


def test_profile_csv(tmp_path, darboux, darboux_record):
    path = tmp_path / "record_000.csv"
    grid = Grid.for_problem(darboux, n_pts=MIN_GRID_POINTS)
    assert write_profile_csv(path, darboux, darboux_record, grid) == MIN_GRID_POINTS
    with path.open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"x", "psi", "residual"}
    assert float(rows[0]["x"]) == -10.0


class TestNumericBasis:
    def _numeric(self, doc, **evaluator):
        doc = copy.deepcopy(doc)
        doc["basis"]["evaluator"] = {"kind": "numeric", **evaluator}
        return parse_problem(doc)

    def test_integrated_h_matches_the_identity(self, darboux_doc, darboux, darboux_record):
        p = self._numeric(darboux_doc, anchor=[0, 0])
        basis = Basis(p, span=(-5.0, 5.0))
        for x in (-4.0, -0.5, 0.0, 1.25, 4.5):
            assert basis.h(x) == pytest.approx(x, abs=1e-10)
        with pytest.raises(PointSingular):
            basis.h(6.0)
        expected = eval_psi(darboux, darboux_record, 1.25)
        assert eval_psi(p, darboux_record, 1.25) == pytest.approx(expected, rel=1e-9)

    def test_anchor_is_required(self, darboux_doc):
        with pytest.raises(OracleError, match="without anchor"):
            Basis(self._numeric(darboux_doc))
