"""
Tests for derived families, h_{m,j} and the assembled residual rows.
"""
from __future__ import annotations

import copy
from fractions import Fraction

import pytest

from core.assembler import (
    PATH_GENERAL,
    PATH_SIMPLE,
    AssemblyError,
    Trial,
    WeightValues,
    assemble,
    build_terms,
    derive_families,
    general_terms,
    hmj,
    resolve_path,
    support_window,
)
from core.catalog import preset
from core.coeffseq import CoeffSeq
from core.model import PotentialKey, parse_problem


def _darboux_ground() -> Trial:
    return Trial(
        weight=WeightValues(CoeffSeq({2: Fraction(1, 4)})),
        lam=Fraction(-1),
        energy=Fraction(-3, 2),
        c=CoeffSeq.delta(0),
    )


class TestFamilies:
    def test_identity_basis_has_no_second_derivative(self) -> None:
        p = preset("tkachuk").spec
        fam = derive_families(p, WeightValues())
        assert fam.h2.is_zero
        assert fam.sq_h == CoeffSeq.delta(0)

    def test_lame_square_of_hprime(self) -> None:
        p = preset("lame", {"k": "1/2"}).spec
        fam = derive_families(p, WeightValues())
        assert fam.sq_h == CoeffSeq({0: 1, 2: Fraction(7, 4), 4: Fraction(3, 4)})

    def test_weight_log_enters_g1(self) -> None:
        p = preset("screened-coulomb").spec
        fam = derive_families(p, WeightValues(CoeffSeq({1: 2}), Fraction(-3, 2)))
        assert fam.g1 == CoeffSeq({-1: Fraction(-3, 2), 0: 2})

    def test_power_table_covers_every_potential_key(self) -> None:
        p = preset("kuliy-tkachuk").spec
        fam = derive_families(p, WeightValues())
        assert len(fam.powers) == p.vstar + p.potential.vmax + 1
        assert set(fam.modulated) == {1, 0, -1, -2}


class TestHmj:
    def test_top_row_of_sextic_vanishes_on_weight_root(self) -> None:
        # h_{0,10} = b^5 V3 - b^2 g3^2 with g3 = 4*gtilde[4]
        p = preset("sextic-general", {"b": 4, "V3": 1}).spec.with_order(0)
        fam = derive_families(p, WeightValues(CoeffSeq({4: 2})))
        assert hmj(p, fam, 0, 10, Fraction(0)) == 0

        off_root = derive_families(p, WeightValues(CoeffSeq({4: 1})))
        assert hmj(p, off_root, 0, 10, Fraction(0)) == 1024 - 256

    def test_free_problem_has_zero_rows(self, free_doc) -> None:
        p = parse_problem(free_doc)
        terms = general_terms(p, derive_families(p, WeightValues()))
        assert terms.h_sequence(0, Fraction(0)).is_zero

    def test_adjustable_entries_take_given_values(self) -> None:
        # at d = 0, V[-1] enters through f = 1 + h^2 and V[-2] through delta_0
        p = preset("sextic-general").spec.with_order(0)
        fam = derive_families(p, WeightValues())
        declared = hmj(p, fam, 0, 0, Fraction(0))
        given = hmj(p, fam, 0, 0, Fraction(0), {PotentialKey(-1): Fraction(3), PotentialKey(-2): Fraction(5)})
        assert given - declared == 8


class TestPaths:
    def test_auto_follows_mode(self) -> None:
        assert resolve_path(preset("tkachuk").spec) == PATH_SIMPLE
        assert resolve_path(preset("lame").spec) == PATH_GENERAL

    def test_simple_path_rejected_for_general_structure(self) -> None:
        with pytest.raises(AssemblyError):
            resolve_path(preset("lame").spec, PATH_SIMPLE)
        with pytest.raises(AssemblyError):
            build_terms(preset("screened-coulomb").spec, WeightValues(glog=Fraction(1)), PATH_SIMPLE)

    @pytest.mark.parametrize("name", ["tkachuk", "sextic-radial-ushveridze", "exact-darboux", "sextic-general"])
    def test_simple_and_general_agree_exactly(self, name: str) -> None:
        p = preset(name).spec
        weight = WeightValues(CoeffSeq({1: Fraction(2, 3), 2: Fraction(-1, 5), 4: 3}))
        simple = build_terms(p, weight, PATH_SIMPLE)
        general = build_terms(p, weight, PATH_GENERAL)
        lam = Fraction(-7, 3)
        for m in range(-1, 4):
            assert simple.h_sequence(m, lam) == general.h_sequence(m, lam)
            assert simple.dh_dlambda(m, lam) == general.dh_dlambda(m, lam)
        assert simple.energy == general.energy
        assert simple.adjustable == general.adjustable

    def test_agreement_with_nontrivial_hprime(self, darboux_doc) -> None:
        doc = copy.deepcopy(darboux_doc)
        doc["basis"]["hprime_poly"] = {"0": 1, "1": "1/2", "2": -1}
        p = parse_problem(doc)
        weight = WeightValues(CoeffSeq({1: 1, 2: Fraction(1, 4)}))
        simple = build_terms(p, weight, PATH_SIMPLE)
        general = build_terms(p, weight, PATH_GENERAL)
        for m in range(0, 3):
            assert simple.h_sequence(m, Fraction(1, 3)) == general.h_sequence(m, Fraction(1, 3))


class TestSystem:
    @pytest.mark.parametrize("path", [PATH_SIMPLE, PATH_GENERAL])
    def test_known_ground_state_zeroes_every_row(self, path: str) -> None:
        p = preset("exact-darboux").spec.with_order(0)
        trial = _darboux_ground()
        system = assemble(p, trial, path=path)
        assert all(value == 0 for value in system.residuals(trial).values())

    def test_excited_state_zeroes_every_row(self) -> None:
        # x(3 + x^2) e^{-x^2/4}/(1 + x^2) at E = 3/2
        p = preset("exact-darboux").spec.with_order(3)
        trial = Trial(
            weight=WeightValues(CoeffSeq({2: Fraction(1, 4)})),
            lam=Fraction(-1),
            energy=Fraction(3, 2),
            c=CoeffSeq({1: 3, 3: 1}),
        )
        system = assemble(p, trial)
        assert all(value == 0 for value in system.residuals(trial).values())

    def test_wrong_energy_leaves_a_residual(self) -> None:
        p = preset("exact-darboux").spec.with_order(0)
        good = _darboux_ground()
        bad = Trial(weight=good.weight, lam=good.lam, energy=Fraction(-1), c=good.c)
        system = assemble(p, bad)
        assert any(value != 0 for value in system.residuals(bad).values())

    def test_rows_stay_inside_the_support_window(self) -> None:
        p = preset("kuliy-tkachuk").spec
        j_lo, j_hi = support_window(p)
        trial = Trial(weight=WeightValues(CoeffSeq({1: 5, 2: Fraction(3, 7)})), lam=Fraction(1, 2))
        system = assemble(p, trial)
        for m in system.columns:
            for seq in (system.h[m], system.b[m]):
                if seq.support is not None:
                    assert j_lo <= seq.lo and seq.hi <= j_hi

    def test_matrices_match_exact_rows(self) -> None:
        p = preset("exact-darboux").spec.with_order(2)
        trial = Trial(weight=WeightValues(CoeffSeq({2: Fraction(1, 4)})), lam=Fraction(-1))
        system = assemble(p, trial)
        hmat, bmat, kmats = system.matrices()
        assert hmat.shape == (len(system.rows), len(system.columns))
        assert kmats == {}
        j0 = system.j_window[0]
        for ci, m in enumerate(system.columns):
            for j in system.rows:
                assert hmat[j - j0, ci] == pytest.approx(float(system.h[m][j]))
                assert bmat[j - j0, ci] == pytest.approx(float(system.b[m][j]))

    def test_window_cap(self) -> None:
        with pytest.raises(AssemblyError, match="exceeds the cap"):
            support_window(preset("darboux-sextic-new").spec, cap=4)

    def test_dump_is_stable(self) -> None:
        p = preset("exact-darboux").spec.with_order(0)
        trial = _darboux_ground()
        first = assemble(p, trial).dump()
        assert first == assemble(p, trial).dump()
        assert first.startswith("# path=simple lambda=-1")
        assert "E·(" in first
