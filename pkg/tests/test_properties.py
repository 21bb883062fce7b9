"""
Property-based tests using Hypothesis.

Core properties:
- Convolution is commutative, associative and distributes over addition.
- power(f, n) equals n-fold convolution.
- The simple and general assembly paths give identical exact rows.
- A float entry demotes exact arithmetic to floats.
- Sextic constraint fits and the screened-Coulomb ratio law hold over
  random admissible parameters.
"""
from __future__ import annotations

import math
from fractions import Fraction

import pytest

pytest.importorskip("hypothesis")
from hypothesis import given, settings, strategies as st  # type: ignore[import-not-found]

from core.assembler import PATH_GENERAL, PATH_SIMPLE, WeightValues, build_terms
from core.catalog import DEFAULT_MATCH_TOL, coulomb_ratio, golden_values, match_golden, preset
from core.coeffseq import CoeffSeq, convolve, power
from core.oracle import residual_check
from core.solver import solve

_fractions = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def _seqs(lo: int = -3, hi: int = 4, max_size: int = 4):
    return st.dictionaries(st.integers(lo, hi), _fractions, max_size=max_size).map(CoeffSeq)


@settings(deadline=2000)
@given(a=_seqs(), b=_seqs())
def test_convolution_commutes(a: CoeffSeq, b: CoeffSeq) -> None:
    assert convolve(a, b) == convolve(b, a)


@settings(deadline=2000)
@given(a=_seqs(), b=_seqs(), c=_seqs())
def test_convolution_associates_and_distributes(a: CoeffSeq, b: CoeffSeq, c: CoeffSeq) -> None:
    assert convolve(convolve(a, b), c) == convolve(a, convolve(b, c))
    assert convolve(a, b + c) == convolve(a, b) + convolve(a, c)


@settings(deadline=2000)
@given(f0=_seqs(-2, 3, 3), n=st.integers(0, 4))
def test_power_is_repeated_convolution(f0: CoeffSeq, n: int) -> None:
    expected = CoeffSeq.delta(0)
    for _ in range(n):
        expected = convolve(expected, f0)
    assert power(f0, n) == expected


@settings(deadline=2000)
@given(s=_seqs(), k=st.integers(-6, 6))
def test_shift_is_invertible(s: CoeffSeq, k: int) -> None:
    assert s.shifted(k).shifted(-k) == s


@settings(deadline=None, max_examples=1000)
@given(
    name=st.sampled_from(["tkachuk", "sextic-general", "sextic-radial-ushveridze", "exact-darboux"]),
    gtilde=st.dictionaries(st.integers(1, 4), _fractions, max_size=3),
    lam=_fractions,
    m=st.integers(0, 3),
)
def test_simple_and_general_paths_agree(name: str, gtilde: dict, lam: Fraction, m: int) -> None:
    p = preset(name).spec
    weight = WeightValues(CoeffSeq(gtilde))
    simple = build_terms(p, weight, PATH_SIMPLE)
    general = build_terms(p, weight, PATH_GENERAL)
    assert simple.h_sequence(m, lam) == general.h_sequence(m, lam)
    assert simple.energy == general.energy


@settings(deadline=2000)
@given(
    a=_seqs().filter(lambda s: not s.is_zero),
    b=_seqs(),
    value=st.floats(0.5, 5.0) | st.floats(-5.0, -0.5),
)
def test_float_entry_demotes_exact_arithmetic(a: CoeffSeq, b: CoeffSeq, value: float) -> None:
    top = b.hi + 1 if not b.is_zero else 0
    mixed = b + CoeffSeq({top: value})
    assert not mixed.is_exact
    product = convolve(a, mixed)
    assert not product.is_exact
    assert product.promoted
    assert isinstance(product[a.hi + top], float)
    reference = convolve(a.to_float(), mixed.to_float())
    for k in range(product.lo, product.hi + 1):
        assert float(product[k]) == pytest.approx(float(reference[k]), rel=1e-12, abs=1e-12)
    assert convolve(a, b).is_exact


_positive = st.fractions(min_value=Fraction(1, 2), max_value=3, max_denominator=4)


@pytest.mark.slow
@settings(deadline=None, max_examples=10)
@given(
    a=_positive,
    b=_positive,
    V3=_positive,
    V2=st.fractions(min_value=-1, max_value=1, max_denominator=4),
    V1=st.fractions(min_value=-3, max_value=3, max_denominator=4),
)
def test_sextic_fits_follow_the_closed_forms(a: Fraction, b: Fraction, V3: Fraction, V2: Fraction, V1: Fraction) -> None:
    entry = preset("sextic-general", {"a": a, "b": b, "V3": V3, "V2": V2, "V1": V1}, order=1)
    records = solve(entry.spec)
    matched = []
    for golden in entry.goldens:
        record = match_golden(entry, golden, records)
        assert record is not None, golden.tag
        expected = golden_values(entry, golden)
        for key in ("V[-1]", "V[-2]"):
            assert float(record.fitted_potential[key]) == pytest.approx(expected[key], rel=1e-8, abs=1e-8)
        matched.append(record)
    ground, excited = matched
    gap = float(excited.energy) - float(ground.energy)
    assert gap == pytest.approx(entry.law("E1_minus_E0"), rel=1e-8)


@pytest.mark.slow
@settings(deadline=None, max_examples=10)
@given(
    F=st.fractions(min_value=0, max_value=4, max_denominator=4),
    z=st.fractions(min_value=Fraction(1, 2), max_value=2, max_denominator=4),
    margin=st.integers(1, 4),
)
def test_screened_coulomb_ratio_law(F: Fraction, z: Fraction, margin: int) -> None:
    # H z^2 below -(1 + sqrt(1 + 4F)) keeps the ground state bounded
    H = -Fraction(math.ceil(1 + math.sqrt(1 + 4 * F)) + margin) / (z * z)
    entry = preset("screened-coulomb", {"F": F, "H": H, "z": z})
    [golden] = entry.goldens
    assert golden.bounded is True
    record = match_golden(entry, golden, solve(entry.spec))
    assert record is not None
    expected = golden_values(entry, golden)
    assert float(record.fitted_potential["v[-1,0]"]) == pytest.approx(expected["v[-1,0]"], rel=DEFAULT_MATCH_TOL)
    assert float(record.energy) == pytest.approx(expected["energy"], rel=DEFAULT_MATCH_TOL)
    ratio = coulomb_ratio(entry, record)
    assert ratio == pytest.approx(-(3 + math.sqrt(1 + 4 * float(F))), rel=1e-9)
    assert ratio == pytest.approx(entry.law("ratio", M=1), rel=1e-9)
    assert residual_check(entry.spec, record).passed
