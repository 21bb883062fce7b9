"""
Tests for catalog presets, golden values and the relations they check.
"""
from __future__ import annotations

import math
from dataclasses import replace
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from core.catalog import (
    CatalogError,
    check_energy_relation,
    coulomb_ratio,
    darboux_polynomial,
    default_presets,
    describe,
    golden_values,
    lame_period,
    match_golden,
    preset,
    preset_names,
    profiles_match,
)
from core.formula import parse_formula
from core.model import MODE_GENERAL, MODE_SIMPLE


class TestRegistry:
    def test_names(self):
        assert preset_names() == sorted([
            "darboux-sextic-new",
            "exact-darboux",
            "kuliy-tkachuk",
            "lame",
            "screened-coulomb",
            "sextic-general",
            "sextic-oscillator",
            "sextic-radial-ushveridze",
            "tkachuk",
        ])

    def test_defaults_instantiate(self):
        presets = default_presets()
        assert [p.name for p in presets] == preset_names()
        assert all(p.goldens for p in presets)

    def test_order_override(self):
        assert preset("exact-darboux", order=2).spec.ansatz.n == 2
        assert preset("exact-darboux").spec.ansatz.n == 4

    def test_modes(self):
        assert preset("tkachuk").spec.mode == MODE_SIMPLE
        assert preset("screened-coulomb").spec.mode == MODE_GENERAL

    def test_describe(self):
        rows = {row["name"]: row for row in describe()}
        assert set(rows) == set(preset_names())
        assert rows["exact-darboux"]["goldens"] == 5
        assert rows["lame"]["goldens"] == 8
        assert {p["name"] for p in rows["lame"]["params"]} == {"k", "m"}
        assert next(p for p in rows["lame"]["params"] if p["name"] == "m")["default"] is None


class TestParams:
    def test_unknown_preset(self):
        with pytest.raises(CatalogError, match="Unknown preset: nope"):
            preset("nope")

    def test_unknown_parameter(self):
        with pytest.raises(CatalogError, match="no parameter"):
            preset("tkachuk", {"c": 1})

    def test_integer_parameter(self):
        with pytest.raises(CatalogError, match="must be an integer"):
            preset("sextic-radial-ushveridze", {"n": "1/2"})

    def test_malformed_value(self):
        with pytest.raises(CatalogError, match="tkachuk.a"):
            preset("tkachuk", {"a": "one"})

    @pytest.mark.parametrize(
        "name, params, message",
        [
            ("lame", {"k": 1}, "0 <= k < 1"),
            ("sextic-radial-ushveridze", {"s": "1/4"}, "s must be > 1/4"),
            ("sextic-general", {"a": -1}, "a\\*b must be >= 0"),
            ("screened-coulomb", {"z": 0}, "z must be nonzero"),
            ("sextic-oscillator", {"p": 2}, "p must be 0 or 1"),
        ],
    )
    def test_ranges(self, name, params, message):
        with pytest.raises(CatalogError, match=message):
            preset(name, params)

    def test_parameters_are_exact(self):
        entry = preset("sextic-general", {"b": "3/2", "V0": 2})
        assert entry.params["b"] == Fraction(3, 2)
        assert entry.spec.basis.f0[2] == Fraction(3, 2)


class TestGoldens:
    def test_kuliy_tkachuk_energies(self):
        entry = preset("kuliy-tkachuk")
        energies = [golden_values(entry, g)["energy"] for g in entry.goldens]
        r3 = math.sqrt(3)
        assert energies == pytest.approx([0.0, 3 * (2 - r3), 2 * (3 - r3)], abs=1e-12)

    def test_lame_order_filter(self):
        assert {g.tag for g in preset("lame", {"m": 2}).goldens} == {"m=2 sn cn", "m=2 +", "m=2 -"}
        assert [g.tag for g in preset("lame", {"m": 0}).goldens] == ["m=0"]
        assert all(g.derived for g in preset("lame", {"m": 3}).goldens)

    def test_lame_values_at_half_modulus(self):
        entry = preset("lame", {"k": "1/2", "m": 2})
        values = {g.tag: golden_values(entry, g) for g in entry.goldens}
        r1 = math.sqrt(1 - 0.25 + 0.0625)
        assert values["m=2 sn cn"]["energy"] == pytest.approx(4.25)
        assert values["m=2 +"]["energy"] == pytest.approx(2 * (1.25 + r1))
        assert values["m=2 -"]["energy"] == pytest.approx(2 * (1.25 - r1))
        assert values["m=2 +"]["V[-1]"] == pytest.approx(1.5)

    def test_lame_period(self):
        assert lame_period(0.0) == pytest.approx(2 * math.pi)

    def test_coulomb_values(self):
        entry = preset("screened-coulomb")
        [golden] = entry.goldens
        values = golden_values(entry, golden)
        assert values["v[-1,0]"] == pytest.approx(2.0)
        assert values["energy"] == pytest.approx(-0.25)
        assert values["glog"] == pytest.approx(-2.0)
        assert golden.bounded is True
        assert preset("screened-coulomb", {"H": 1}).goldens[0].bounded is False

    def test_darboux_sextic_weight(self):
        entry = preset("darboux-sextic-new")
        values = golden_values(entry, entry.goldens[0])
        assert values == {"lambda": -1.0, "energy": 0.0, "gtilde[4]": 0.125, "glog": -3.5}

    @pytest.mark.parametrize("n, expected", [(0, "1"), (1, "x*(3 + x**2)"), (2, "x**4 + 2*x**2 - 1")])
    def test_darboux_polynomials(self, n, expected):
        for x in (-1.3, 0.0, 0.4, 2.0):
            env = {"x": x}
            assert parse_formula(darboux_polynomial(n)).evaluate(env) == pytest.approx(
                parse_formula(expected).evaluate(env)
            )

    def test_darboux_energies(self):
        entry = preset("exact-darboux")
        energies = [golden_values(entry, g)["energy"] for g in entry.goldens]
        assert energies == [-1.5, 1.5, 2.5, 3.5, 4.5]
        assert entry.law("ground_gap") == energies[1] - energies[0]

    def test_missing_law(self):
        with pytest.raises(CatalogError, match="no law"):
            preset("tkachuk").law("spacing")

    def test_psi_needs_a_formula(self):
        entry = preset("tkachuk")
        golden = replace(entry.goldens[0], psi=None)
        with pytest.raises(CatalogError, match="no wavefunction"):
            entry.psi(golden, [0.0])


class TestMatching:
    def test_profiles_match_up_to_a_constant(self):
        a = np.array([0.1, 0.5, -1.0, 0.3])
        assert profiles_match(a, -3.0 * a)
        assert not profiles_match(a, a + np.array([0.0, 0.0, 0.0, 1e-3]))
        assert not profiles_match(np.array([np.nan]), np.array([1.0]))

    def test_match_golden(self, darboux_record):
        entry = preset("exact-darboux", order=0)
        assert match_golden(entry, entry.goldens[0], [darboux_record]) is darboux_record
        shifted = replace(darboux_record, energy=Fraction(-1))
        assert match_golden(entry, entry.goldens[0], [shifted]) is None
        assert match_golden(entry, entry.goldens[1], [darboux_record]) is None

    def test_energy_relation(self):
        entry = preset("kuliy-tkachuk")
        r3 = math.sqrt(3)
        ground = SimpleNamespace(window=(0, 0), lam=r3 / (1 + r3), energy=0.0)
        first = SimpleNamespace(window=(1, 1), lam=r3 / (3 + r3), energy=3 * (2 - r3))
        assert check_energy_relation(entry, ground) == pytest.approx(0.0, abs=1e-12)
        assert check_energy_relation(entry, first) == pytest.approx(0.0, abs=1e-12)

    def test_coulomb_ratio(self):
        entry = preset("screened-coulomb")
        record = SimpleNamespace(fitted_potential={"v[-1,0]": 2.0}, energy=-0.25)
        assert coulomb_ratio(entry, record) == pytest.approx(entry.law("ratio", M=1))
        assert coulomb_ratio(entry, record) == pytest.approx(-(3 + math.sqrt(1 + 4 * 2)))

    def test_coulomb_ratio_guards(self):
        record = SimpleNamespace(fitted_potential={"v[-1,0]": 2.0}, energy=0.5)
        with pytest.raises(CatalogError, match="non-negative energy"):
            coulomb_ratio(preset("screened-coulomb"), record)
        with pytest.raises(CatalogError, match="screened-coulomb preset only"):
            coulomb_ratio(preset("tkachuk"), record)
