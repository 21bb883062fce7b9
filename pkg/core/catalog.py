"""
Bundled problem presets with golden solutions.

Each preset is a parameterised problem document plus a list of golden
records. Golden values are formula strings over the preset parameters
(evaluated through core.formula), so every expected number stays traceable
to its closed form.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from core.coeffseq import CoeffSeqError, Scalar, parse_scalar
from core.formula import FormulaError, evaluate_bindings, parse_formula
from core.model import (
    DOMAIN_FULL_LINE,
    DOMAIN_HALF_LINE,
    DOMAIN_PERIODIC,
    EVALUATOR_IDENTITY,
    EVALUATOR_JACOBI_SC,
    MODE_GENERAL,
    MODE_SIMPLE,
    ProblemSpec,
    parse_problem,
)

logger = logging.getLogger(__name__)

DEFAULT_MATCH_TOL = 1e-9
DEFAULT_PSI_TOL = 1e-8


class CatalogError(Exception):
    """Unknown preset, unknown parameter or parameter out of range."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    default: Scalar | None
    description: str
    integer: bool = False


@dataclass(frozen=True)
class Golden:
    """One expected solution; every value is a formula over the preset namespace."""

    order: int
    lam: str
    energy: str
    citation: str
    psi: str | None = None
    constraints: tuple[tuple[str, str], ...] = ()
    weight: tuple[tuple[str, str], ...] = ()
    tag: str = ""
    bounded: bool | None = True
    derived: bool = False


@dataclass(frozen=True)
class PresetEntry:
    name: str
    params: tuple[ParamSpec, ...]
    build: Callable[[dict[str, Scalar]], dict[str, Any]]
    goldens: Callable[[dict[str, Scalar]], tuple[Golden, ...]]
    provenance: str
    bindings: tuple[tuple[str, str], ...] = ()
    laws: dict[str, str] = field(default_factory=dict)
    check: Callable[[dict[str, Scalar]], list[str]] = lambda _p: []


@dataclass
class Preset:
    """A preset instantiated at concrete parameter values."""

    name: str
    params: dict[str, Scalar]
    spec: ProblemSpec
    goldens: tuple[Golden, ...]
    provenance: str
    bindings: tuple[tuple[str, str], ...] = ()
    laws: dict[str, str] = field(default_factory=dict)

    def namespace(self, **extra: float) -> dict[str, float]:
        base = {k: float(v) for k, v in self.params.items() if v is not None}
        base.update(extra)
        return evaluate_bindings(self.bindings, base)

    def value(self, text: str, **extra: float) -> float:
        return parse_formula(text).evaluate(self.namespace(**extra))

    def law(self, name: str, **extra: float) -> float:
        if name not in self.laws:
            raise CatalogError(f"preset {self.name} has no law {name!r}")
        return self.value(self.laws[name], **extra)

    def psi(self, golden: Golden, points: Iterable[float]) -> np.ndarray:
        if golden.psi is None:
            raise CatalogError(f"golden {golden.tag or golden.order} of {self.name} has no wavefunction")
        formula = parse_formula(golden.psi)
        env = self.namespace()
        return np.array([formula.evaluate({**env, "x": float(x)}) for x in points])


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _doc(
    name: str,
    mode: str,
    f0: Mapping[int, Scalar],
    vmin: int,
    vmax: int,
    v: Mapping[int, Scalar],
    n: int,
    domain: dict[str, Any],
    gtilde_mask: Iterable[int] = (),
    glog: bool = False,
    adjustable: Iterable[dict[str, int]] = (),
    modulation: Mapping[int, Mapping[int, Scalar]] | None = None,
    basis_extra: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    basis: dict[str, Any] = {"f0": {str(k): val for k, val in f0.items()}}
    basis.update(basis_extra or {})
    potential: dict[str, Any] = {
        "vmin": vmin,
        "vmax": vmax,
        "V": {str(k): val for k, val in v.items()},
    }
    if modulation:
        potential["modulation"] = {
            str(k): {str(l): val for l, val in seq.items()} for k, seq in modulation.items()
        }
    return {
        "schema_version": 1,
        "name": name,
        "mode": mode,
        "potential": potential,
        "basis": basis,
        "ansatz": {"N": n},
        "domain": domain,
        "unknowns": {
            "gtilde": sorted(gtilde_mask),
            "glog": glog,
            "lambda": True,
            "potential": list(adjustable),
        },
    }


def _positive(params: Mapping[str, Scalar], *names: str) -> list[str]:
    return [f"{n} must be > 0" for n in names if params[n] is None or params[n] <= 0]


# ---------------------------------------------------------------------------
# Generalized sextic family
# ---------------------------------------------------------------------------

_SEXTIC_BINDINGS: tuple[tuple[str, str], ...] = (
    ("rb", "sqrt(b)"),
    ("rV3", "sqrt(V3)"),
    ("g2", "3/4*a*sqrt(b*V3) + 1/4*sqrt(b/V3)*V2"),
    ("g4", "1/4*sqrt(b**3*V3)"),
    ("lam0", "-3/16*a**2/rb*rV3 - 1/8*a/rb*V2/rV3 + 1/16/rb*V2**2/V3**1.5"
             " - 3/4 - 1/4*V1/sqrt(b*V3)"),
    ("E0", "5/8*a**3*V3 + 3/8*a**2*V2 + 1/2*a*V1 + V0 - 1/8*a*V2**2/V3"
           " + 1/8*V2**3/V3**2 - 1/2*V1*V2/V3 - sqrt(b/V3)*V2"),
    ("Vm1_0", "1/64*V2**4/V3**3 - 1/8*V1*V2**2/V3**2 + 1/4*V1**2/V3"
              " - 1/2*rb*V2**2/V3**1.5 + 2*rb*V1/rV3 + 15/4*b - 1/2*a*rb*V2/rV3"
              " + 1/16*a*V2**3/V3**2 - 1/4*a*V1*V2/V3 - 1/8*a**2*V1"
              " - 7/16*a**3*V2 - 5/32*a**2*V2**2/V3 - 15/64*a**4*V3"),
    ("Vm2_0", "1/8*a*V1*V2**2/V3**2 - 1/4*a*V1**2/V3 - 1/64*a*V2**4/V3**3"
              " - 1/4*a**2*V1*V2/V3 + 1/16*a**2*V2**3/V3**2 - 9/64*a**5*V3"
              " - 3/16*a**4*V2 - 3/8*a**3*V1 - 5/2*a*rb*V1/rV3 - 21/4*a*b"
              " + 1/32*a**3*V2**2/V3 + 5/8*a*rb*V2**2/V3**1.5"
              " - 5/4*a**2*rb*V2/rV3 - 15/8*a**3*rb*rV3"),
    ("Vm1_1", "Vm1_0 - a*rb*V2/rV3 - a**2*sqrt(b*V3)"),
    ("Vm2_1", "Vm2_0 - 6*a*b - a*rb*V1/rV3 + 1/4*a*rb*V2**2/V3**1.5"
              " - 1/2*a**2*rb*V2/rV3 - 3/4*a**3*sqrt(b*V3)"),
)


_TAIL = ({"k": -1}, {"k": -2})


def _sextic_doc(name: str, params: Mapping[str, Scalar], n: int,
                adjustable: Iterable[dict[str, int]] = (),
                vm1: Scalar = 0, domain_kind: str = DOMAIN_FULL_LINE,
                f_root: str | None = None) -> dict[str, Any]:
    a, b = params["a"], params["b"]
    v = {3: params["V3"], 2: params["V2"], 1: params["V1"], 0: params["V0"], -1: vm1}
    f0 = {0: a, 2: b} if a != 0 else {2: b}
    extra = {"evaluator": {"kind": EVALUATOR_IDENTITY, "f_root": f_root}} if f_root else None
    return _doc(
        name=name,
        mode=MODE_SIMPLE,
        f0=f0,
        vmin=2,
        vmax=3,
        v={k: val for k, val in v.items() if val != 0},
        n=n,
        domain={"kind": domain_kind, "length": 5},
        gtilde_mask=(1, 2, 3, 4),
        adjustable=adjustable,
        basis_extra=extra,
    )


def _sextic_general_build(params: dict[str, Scalar]) -> dict[str, Any]:
    return _sextic_doc("sextic-general", params, n=1, adjustable=_TAIL)


def _sextic_general_goldens(_params: dict[str, Scalar]) -> tuple[Golden, ...]:
    weight = (("gtilde[2]", "g2"), ("gtilde[4]", "g4"))
    return (
        Golden(
            order=0,
            lam="lam0",
            energy="E0",
            psi="exp(-(g2*x**2 + g4*x**4))*(a + b*x**2)**lam0",
            constraints=(("V[-1]", "Vm1_0"), ("V[-2]", "Vm2_0")),
            weight=weight,
            tag="ground",
            citation="ground state on the positive weight root; fixes V[-1] and V[-2]",
        ),
        Golden(
            order=1,
            lam="lam0 - 1/2",
            energy="E0 + 2*a*sqrt(b*V3)",
            psi="x*(a + b*x**2)**(lam0 - 1/2)*exp(-(g2*x**2 + g4*x**4))",
            constraints=(("V[-1]", "Vm1_1"), ("V[-2]", "Vm2_1")),
            weight=weight,
            tag="first-excited",
            citation="first excited state x/(a+bx^2)^(1/2) times the ground state",
        ),
    )


def _sextic_general_check(params: dict[str, Scalar]) -> list[str]:
    errors = _positive(params, "b", "V3")
    if params["a"] is not None and params["b"] is not None and params["a"] * params["b"] < 0:
        errors.append("a*b must be >= 0")
    return errors


def _tkachuk_values(params: Mapping[str, Scalar]) -> dict[str, Scalar]:
    a, b = params["a"], params["b"]
    return {
        "a": a,
        "b": b,
        "V3": 1 / (4 * b),
        "V2": -a / (4 * b),
        "V1": Fraction(-3),
        "V0": Fraction(5, 2) * a,
    }


def _tkachuk_build(params: dict[str, Scalar]) -> dict[str, Any]:
    return _sextic_doc("tkachuk", _tkachuk_values(params), n=0, adjustable=_TAIL)


def _tkachuk_goldens(_params: dict[str, Scalar]) -> tuple[Golden, ...]:
    return (
        Golden(
            order=0,
            lam="lam0",
            energy="E0",
            psi="exp(-(g2*x**2 + g4*x**4))*(a + b*x**2)**lam0",
            constraints=(("V[-1]", "3/4*b"), ("V[-2]", "3/4*a*b")),
            weight=(("gtilde[2]", "g2"), ("gtilde[4]", "g4")),
            tag="ground",
            citation="two-solution parameter set; ground-state constraints reproduce its V[-1], V[-2]",
        ),
    )


_TKACHUK_BINDINGS: tuple[tuple[str, str], ...] = (
    ("V3", "1/(4*b)"),
    ("V2", "-a/(4*b)"),
    ("V1", "-3"),
    ("V0", "5/2*a"),
) + _SEXTIC_BINDINGS


# ---------------------------------------------------------------------------
# Radial sextic and sextic oscillator
# ---------------------------------------------------------------------------

_RADIAL_BINDINGS: tuple[tuple[str, str], ...] = (
    ("V1", "-4*t*(s + 1/2 + n)"),
    ("lam", "s - 1/4"),
    ("w", "sqrt(-1/2*V1*t - 3*t**2)"),
    ("c4_even", "2*t**2/(V1 + 8*t)"),
    ("c4_odd", "-4*t**2/(V1 + 10*t)"),
    ("c2_mag", "2*sqrt(2)*sqrt((-V1 - 9*t)*t**2)/abs(V1 + 10*t)"),
)


def _radial_values(params: Mapping[str, Scalar], s: Scalar) -> dict[str, Scalar]:
    t, n = params["t"], params["n"]
    return {
        "a": Fraction(0),
        "b": Fraction(1),
        "V3": t * t,
        "V2": Fraction(0),
        "V1": -4 * t * (s + Fraction(1, 2) + n),
        "V0": Fraction(0),
    }


def _radial_build(params: dict[str, Scalar]) -> dict[str, Any]:
    s = params["s"]
    vm1 = 4 * (s - Fraction(1, 4)) * (s - Fraction(3, 4))
    return _sextic_doc(
        "sextic-radial-ushveridze",
        _radial_values(params, s),
        n=2 * int(params["n"]),
        adjustable=[{"k": -1}] if params.get("adjust") else [],
        vm1=vm1,
        domain_kind=DOMAIN_HALF_LINE,
    )


def _radial_goldens(params: dict[str, Scalar], sextic_envelope: str = "exp(-t*x**4/4)*(x**2)**lam") -> tuple[Golden, ...]:
    n = int(params["n"])
    env = sextic_envelope
    if n == 0:
        return (
            Golden(order=0, lam="lam", energy="0", psi=env, tag="n=0",
                   citation="single zero-energy state"),
        )
    if n == 1:
        return tuple(
            Golden(
                order=2,
                lam="lam",
                energy=f"-4*({eps})/sqrt(t)*w",
                psi=f"{env}*(1 + ({eps})*x**2*t**1.5/w)",
                tag=f"eps={eps}",
                citation="two states of the quadratic window, ground state for eps=+1",
            )
            for eps in ("1", "-1")
        )
    if n == 2:
        odd = tuple(
            Golden(
                order=4,
                lam="lam",
                energy=f"-4*t*({eps})*c2_mag/c4_odd",
                psi=f"{env}*(1 + ({eps})*c2_mag*x**2 + c4_odd*x**4)",
                tag=f"eps={eps}",
                citation="quartic window with both coefficients nonzero",
            )
            for eps in ("1", "-1")
        )
        even = Golden(
            order=4,
            lam="lam",
            energy="0",
            psi=f"{env}*(1 + c4_even*x**4)",
            tag="c2=0",
            citation="quartic window with vanishing middle coefficient (first excited state)",
        )
        return (odd[0], even, odd[1])
    return ()


def _radial_check(params: dict[str, Scalar]) -> list[str]:
    errors = _positive(params, "t")
    if params["s"] is None or params["s"] <= Fraction(1, 4):
        errors.append("s must be > 1/4")
    if params["n"] is None or params["n"] < 0:
        errors.append("n must be >= 0")
    if params.get("adjust") not in (None, 0, 1):
        errors.append("adjust must be 0 or 1")
    return errors


def _oscillator_build(params: dict[str, Scalar]) -> dict[str, Any]:
    s = Fraction(1, 4) + Fraction(params["p"]) / 2
    return _sextic_doc(
        "sextic-oscillator",
        _radial_values(params, s),
        n=2 * int(params["n"]),
        domain_kind=DOMAIN_FULL_LINE,
        f_root="h",
    )


_OSCILLATOR_BINDINGS: tuple[tuple[str, str], ...] = (("s", "1/4 + p/2"),) + _RADIAL_BINDINGS


def _oscillator_goldens(params: dict[str, Scalar]) -> tuple[Golden, ...]:
    envelope = "exp(-t*x**4/4)*x**p" if params["p"] else "exp(-t*x**4/4)"
    return _radial_goldens(params, sextic_envelope=envelope)


def _oscillator_check(params: dict[str, Scalar]) -> list[str]:
    errors = _positive(params, "t")
    if params["p"] not in (0, 1):
        errors.append("p must be 0 or 1")
    if params["n"] is None or params["n"] < 0:
        errors.append("n must be >= 0")
    return errors


# ---------------------------------------------------------------------------
# Fixed-count and exactly solvable sextic members
# ---------------------------------------------------------------------------

def _kuliy_tkachuk_build(params: dict[str, Scalar]) -> dict[str, Any]:
    b = params["b"]
    r3 = math.sqrt(3.0)
    fb = float(b)
    return _doc(
        name="kuliy-tkachuk",
        mode=MODE_SIMPLE,
        f0={0: Fraction(1), 2: b},
        vmin=2,
        vmax=1,
        v={
            1: Fraction(3, 4) * b,
            0: (2.25 - 3.5 * r3) * fb,
            -1: 2 * (3 - r3) * fb,
            -2: (4 * r3 - 6) * fb,
        },
        n=2,
        domain={"kind": DOMAIN_FULL_LINE, "length": 8},
        gtilde_mask=(1, 2),
    )


_KT_BINDINGS: tuple[tuple[str, str], ...] = (
    ("a", "1"),
    ("V1", "3/4*b"),
    ("V0", "(9/4 - 7/2*sqrt(3))*b"),
    ("r3", "sqrt(3)"),
)


def _kuliy_tkachuk_goldens(_params: dict[str, Scalar]) -> tuple[Golden, ...]:
    gauss = "exp(-r3/4*b*x**2)"
    return (
        Golden(order=0, lam="r3/(1 + r3)", energy="0",
               psi=f"{gauss}*(1 + b*x**2)**(r3/(1 + r3))", tag="N=0",
               citation="ground state"),
        Golden(order=1, lam="r3/(3 + r3)", energy="3*(2 - r3)*b",
               psi=f"{gauss}*x*(1 + b*x**2)**(r3/(3 + r3))", tag="N=1",
               citation="odd first excited state"),
        Golden(order=2, lam="(r3 - 1)/2", energy="2*(3 - r3)*b",
               psi=f"{gauss}*(1 - b*x**2)*(1 + b*x**2)**((r3 - 1)/2)", tag="N=2",
               citation="second excited state"),
    )


def _exact_darboux_build(_params: dict[str, Scalar]) -> dict[str, Any]:
    return _doc(
        name="exact-darboux",
        mode=MODE_SIMPLE,
        f0={0: Fraction(1), 2: Fraction(1)},
        vmin=2,
        vmax=1,
        v={1: Fraction(1, 4), 0: Fraction(-1, 4), -1: Fraction(4), -2: Fraction(-8)},
        n=4,
        domain={"kind": DOMAIN_FULL_LINE, "length": 10},
        gtilde_mask=(1, 2),
    )


def darboux_polynomial(n: int) -> str:
    """P_n built from the probabilists' Hermite polynomials, as a formula string."""
    if n == 0:
        return "1"
    return f"(x*(3 + x**2)*He({n - 1}, x) - (1 + x**2)*{n - 1}*He({n - 2}, x))"


def _exact_darboux_goldens(_params: dict[str, Scalar]) -> tuple[Golden, ...]:
    return tuple(
        Golden(
            order=0 if n == 0 else n + 2,
            lam="-1",
            energy="-3/2" if n == 0 else f"{n} + 1/2",
            psi=f"exp(-x**2/4)/(1 + x**2)*{darboux_polynomial(n)}",
            weight=(("gtilde[2]", "1/4"),),
            tag=f"n={n}",
            citation="Hermite-built level of the exactly solvable member; unit spacing above the ground state",
        )
        for n in range(5)
    )


# ---------------------------------------------------------------------------
# Lamé, screened Coulomb and the Darboux-built sextic
# ---------------------------------------------------------------------------

def lame_period(k: float) -> float:
    from scipy import special

    return 4.0 * float(special.ellipk(k * k))


def _lame_build(params: dict[str, Scalar]) -> dict[str, Any]:
    k = params["k"]
    k2 = k * k
    m = params.get("m")
    v: dict[int, Scalar] = {}
    adjustable: list[dict[str, int]] = []
    if m is None:
        adjustable.append({"k": -1})
    else:
        v[-1] = k2 * m * (m + 1)
    return _doc(
        name="lame",
        mode=MODE_GENERAL,
        f0={0: Fraction(1), -2: Fraction(1)},
        vmin=2,
        vmax=0,
        v=v,
        n=1,
        domain={"kind": DOMAIN_PERIODIC, "period": lame_period(float(k))},
        glog=True,
        adjustable=adjustable,
        basis_extra={
            "hprime_poly": {"0": 1},
            "hprime_sqrt": {"0": 1, "2": 2 - k2, "4": 1 - k2},
            "evaluator": {"kind": EVALUATOR_JACOBI_SC, "params": {"k": k}, "f_root": "1/sn"},
        },
    )


_LAME_BINDINGS: tuple[tuple[str, str], ...] = (
    ("k2", "k**2"),
    ("r1", "sqrt(1 - k2 + k2**2)"),
    ("r2", "sqrt(4 - 7*k2 + 4*k2**2)"),
)


def _lame_goldens(params: dict[str, Scalar]) -> tuple[Golden, ...]:
    sn, cn = "sn(x, k)", "cn(x, k)"
    entries = [
        Golden(order=0, lam="0", energy="0", psi="1", constraints=(("V[-1]", "0"),),
               tag="m=0", citation="constant solution"),
        Golden(order=0, lam="-1/2", energy="1 + k2", psi=sn, constraints=(("V[-1]", "2*k2"),),
               tag="m=1 sn", citation="sn solution continued over the full period"),
        Golden(order=0, lam="-1/2", energy="1", psi=cn, constraints=(("V[-1]", "2*k2"),),
               tag="m=1 cn", citation="cn solution; the h^-1 weight absorbs one power of f"),
        Golden(order=1, lam="-1", energy="4 + k2", psi=f"{cn}*{sn}",
               constraints=(("V[-1]", "6*k2"),), tag="m=2 sn cn", citation="sn cn solution"),
    ]
    for sign, flip in (("+", "-"), ("-", "+")):
        entries.append(Golden(
            order=1, lam="-1", energy=f"2*(1 + k2 {sign} r1)",
            psi=f"(1 - k2)*{sn}**2 + (k2 {flip} r1)*{cn}**2",
            constraints=(("V[-1]", "6*k2"),), tag=f"m=2 {sign}",
            citation="even pair in sn^2 and cn^2",
        ))
    for sign, flip in (("-", "-"), ("+", "+")):
        entries.append(Golden(
            order=1, lam="-3/2", energy=f"5 + 5*k2 {sign} 2*r2",
            psi=f"{sn}*(3 - (2*(1 + k2) {flip} r2)*{sn}**2)",
            constraints=(("V[-1]", "12*k2"),), tag=f"m=3 {sign}",
            citation="odd pair sn(1 + beta sn^2); closed form re-derived by substitution",
            derived=True,
        ))
    m = params.get("m")
    if m is None:
        return tuple(entries)
    return tuple(g for g in entries if g.tag.split()[0] == f"m={int(m)}")


def _lame_check(params: dict[str, Scalar]) -> list[str]:
    errors = []
    k = params["k"]
    if k is None or not 0 <= k < 1:
        errors.append("k must satisfy 0 <= k < 1")
    m = params.get("m")
    if m is not None and (m < 0 or Fraction(m).denominator != 1):
        errors.append("m must be a non-negative integer")
    return errors


def _coulomb_build(params: dict[str, Scalar]) -> dict[str, Any]:
    F, H, z = params["F"], params["H"], params["z"]
    return _doc(
        name="screened-coulomb",
        mode=MODE_GENERAL,
        f0={0: z * z, 1: Fraction(1)},
        vmin=1,
        vmax=0,
        v={0: Fraction(1), -1: Fraction(1)},
        modulation={0: {-2: F, -1: Fraction(0)}, -1: {0: H}},
        n=0,
        domain={"kind": DOMAIN_HALF_LINE, "length": 30},
        gtilde_mask=(1,),
        glog=True,
        adjustable=[{"k": 0, "l": -1}],
    )


_COULOMB_BINDINGS: tuple[tuple[str, str], ...] = (
    ("s", "sqrt(1 + 4*F)"),
    ("G", "(4*F + (1 + s)*(4 + H*z**2))/(2*z**2)"),
    ("E0", "-(4*F + 2*(1 + s)*(1 + H*z**2) + (H*z**2)**2)/(4*z**4)"),
    ("kappa", "(1 + s + H*z**2)/(2*z**2)"),
)


def _coulomb_goldens(params: dict[str, Scalar]) -> tuple[Golden, ...]:
    F, H, z = (float(params[n]) for n in ("F", "H", "z"))
    bounded = H * z * z < -(1 + math.sqrt(1 + 4 * F))
    return (
        Golden(
            order=0,
            lam="1",
            energy="E0",
            psi="exp(kappa*x)*x**((1 + s)/2)*(x + z**2)",
            constraints=(("v[-1,0]", "G"),),
            weight=(("glog", "-(1 + s)/2"), ("gtilde[1]", "-kappa")),
            tag="ground",
            citation="polynomial solution; G is fixed by the other couplings",
            bounded=bounded,
        ),
    )


def _coulomb_check(params: dict[str, Scalar]) -> list[str]:
    errors = []
    if params["F"] is None or params["F"] <= Fraction(-1, 4):
        errors.append("F must be > -1/4")
    if params["z"] is None or params["z"] == 0:
        errors.append("z must be nonzero")
    return errors


def _darboux_sextic_build(_params: dict[str, Scalar]) -> dict[str, Any]:
    return _doc(
        name="darboux-sextic-new",
        mode=MODE_GENERAL,
        f0={0: Fraction(20), 4: Fraction(4), 8: Fraction(1)},
        vmin=2,
        vmax=0,
        v={0: Fraction(1), -1: Fraction(1), -2: Fraction(1)},
        modulation={
            0: {-2: Fraction(3, 4), 2: Fraction(1), 6: Fraction(1, 4)},
            -1: {2: Fraction(-96), 6: Fraction(16)},
            -2: {6: Fraction(-2048)},
        },
        n=2,
        domain={"kind": DOMAIN_HALF_LINE, "length": 5},
        gtilde_mask=(1, 2, 3, 4),
        glog=True,
    )


def _darboux_sextic_goldens(_params: dict[str, Scalar]) -> tuple[Golden, ...]:
    return (
        Golden(
            order=2,
            lam="-1",
            energy="0",
            psi="exp(-x**4/8)*x**1.5*(6 + x**4)/(x**8 + 4*x**4 + 20)",
            weight=(("gtilde[4]", "1/8"), ("glog", "-7/2")),
            tag="zero-energy",
            citation="zero-energy state of the Darboux partner of a radial sextic",
        ),
    )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_SEXTIC_PARAMS = (
    ParamSpec("a", Fraction(1), "constant term of f = a + b x^2 (a*b >= 0)"),
    ParamSpec("b", Fraction(1), "quadratic term of f (> 0)"),
    ParamSpec("V3", Fraction(1), "sextic coupling (> 0)"),
    ParamSpec("V2", Fraction(1, 2), "quartic coupling"),
    ParamSpec("V1", Fraction(-3), "quadratic coupling"),
    ParamSpec("V0", Fraction(0), "constant shift"),
)

_ENTRIES: dict[str, PresetEntry] = {
    entry.name: entry
    for entry in (
        PresetEntry(
            name="sextic-general",
            params=_SEXTIC_PARAMS,
            build=_sextic_general_build,
            goldens=_sextic_general_goldens,
            provenance="generalized sextic oscillator with f = a + b x^2; one state per potential, "
                       "V[-1] and V[-2] fitted",
            bindings=_SEXTIC_BINDINGS,
            laws={"E1_minus_E0": "2*a*sqrt(b*V3)"},
            check=_sextic_general_check,
        ),
        PresetEntry(
            name="sextic-radial-ushveridze",
            params=(
                ParamSpec("n", Fraction(1), "number of extra states (n+1 states at N=2n)", integer=True),
                ParamSpec("s", Fraction(1), "centrifugal parameter (> 1/4)"),
                ParamSpec("t", Fraction(1), "sqrt of the sextic coupling (> 0)"),
                ParamSpec("adjust", Fraction(0), "1 leaves V[-1] free to be fitted", integer=True),
            ),
            build=_radial_build,
            goldens=_radial_goldens,
            provenance="sextic radial oscillator on the half line, a=0, b=1, V2=0",
            bindings=_RADIAL_BINDINGS,
            laws={
                "V[-1]": "(V1 + (4*m + 3)*t)*(V1 + (4*m + 5)*t)/(4*t**2)",
                "energy": "-4*t*c_prev/c_top",
            },
            check=_radial_check,
        ),
        PresetEntry(
            name="sextic-oscillator",
            params=(
                ParamSpec("n", Fraction(1), "number of extra states", integer=True),
                ParamSpec("p", Fraction(0), "parity class, 0 even or 1 odd", integer=True),
                ParamSpec("t", Fraction(1), "sqrt of the sextic coupling (> 0)"),
            ),
            build=_oscillator_build,
            goldens=_oscillator_goldens,
            provenance="sextic oscillator on the full line, no centrifugal term; states fall in parity classes",
            bindings=_OSCILLATOR_BINDINGS,
            check=_oscillator_check,
        ),
        PresetEntry(
            name="tkachuk",
            params=(
                ParamSpec("a", Fraction(1), "constant term of f"),
                ParamSpec("b", Fraction(1), "quadratic term of f (> 0)"),
            ),
            build=_tkachuk_build,
            goldens=_tkachuk_goldens,
            provenance="two-solution member of the generalized sextic family",
            bindings=_TKACHUK_BINDINGS,
            check=lambda p: _positive(p, "b") + (["a*b must be >= 0"] if p["a"] * p["b"] < 0 else []),
        ),
        PresetEntry(
            name="kuliy-tkachuk",
            params=(ParamSpec("b", Fraction(1), "quadratic term of f = 1 + b x^2 (> 0)"),),
            build=_kuliy_tkachuk_build,
            goldens=_kuliy_tkachuk_goldens,
            provenance="sextic member with V3 = V2 = 0 and exactly three states",
            bindings=_KT_BINDINGS,
            laws={"energy": "V0 + a*V1 + sqrt(b*V1)*((2*N + 1) + 4*lam)"},
            check=lambda p: _positive(p, "b"),
        ),
        PresetEntry(
            name="exact-darboux",
            params=(),
            build=_exact_darboux_build,
            goldens=_exact_darboux_goldens,
            provenance="x^2/4 + 4/(1+x^2) - 8/(1+x^2)^2, a second-order Darboux partner of the oscillator",
            laws={"spacing": "1", "ground_gap": "3"},
        ),
        PresetEntry(
            name="lame",
            params=(
                ParamSpec("k", Fraction(1, 2), "elliptic modulus, 0 <= k < 1"),
                ParamSpec("m", None, "integer Lamé order; omitted leaves V[-1] free"),
            ),
            build=_lame_build,
            goldens=_lame_goldens,
            provenance="Lamé potential k^2 m(m+1) sn^2 in the basis h = sn/cn, f = 1/sn^2",
            bindings=_LAME_BINDINGS,
            check=_lame_check,
        ),
        PresetEntry(
            name="screened-coulomb",
            params=(
                ParamSpec("F", Fraction(2), "centrifugal coupling (> -1/4)"),
                ParamSpec("H", Fraction(-5), "screening coupling"),
                ParamSpec("z", Fraction(1), "screening offset, f = x + z^2"),
            ),
            build=_coulomb_build,
            goldens=_coulomb_goldens,
            provenance="screened Coulomb F/x^2 + G/x + H/(x+z^2) with G fitted",
            bindings=_COULOMB_BINDINGS,
            laws={"ratio": "-(2*M + 1 + s)"},
            check=_coulomb_check,
        ),
        PresetEntry(
            name="darboux-sextic-new",
            params=(),
            build=_darboux_sextic_build,
            goldens=_darboux_sextic_goldens,
            provenance="sextic with rational dressing f = x^8 + 4x^4 + 20, zero-energy state",
        ),
    )
}


def preset_names() -> list[str]:
    return sorted(_ENTRIES)


def _resolve_params(entry: PresetEntry, params: Mapping[str, object] | None) -> dict[str, Scalar]:
    params = dict(params or {})
    known = {spec.name for spec in entry.params}
    unknown = sorted(set(params) - known)
    if unknown:
        raise CatalogError(f"preset {entry.name} has no parameter(s): {', '.join(unknown)}")
    resolved: dict[str, Scalar] = {}
    for spec in entry.params:
        raw = params.get(spec.name, spec.default)
        if raw is None:
            resolved[spec.name] = None  # type: ignore[assignment]
            continue
        try:
            value = parse_scalar(raw)
        except CoeffSeqError as e:
            raise CatalogError(f"{entry.name}.{spec.name}: {e}") from e
        if spec.integer and (not isinstance(value, Fraction) or value.denominator != 1):
            raise CatalogError(f"{entry.name}.{spec.name} must be an integer")
        resolved[spec.name] = value
    errors = entry.check(resolved)
    if errors:
        raise CatalogError(f"{entry.name}: " + "; ".join(errors))
    return resolved


def preset(name: str, params: Mapping[str, object] | None = None, order: int | None = None) -> Preset:
    """
    Instantiate a preset.

    Args:
        name: Preset name (see preset_names())
        params: Parameter overrides; strings and ints are parsed exactly
        order: Ansatz order N, defaulting to the preset's own

    Raises:
        CatalogError: for an unknown name or parameter, or one out of range.
    """
    entry = _ENTRIES.get(name)
    if entry is None:
        raise CatalogError(f"Unknown preset: {name}. Available: {', '.join(preset_names())}")
    resolved = _resolve_params(entry, params)
    spec = parse_problem(entry.build(resolved), source=f"preset:{name}")
    if order is not None:
        spec = spec.with_order(order)
    logger.debug("Preset %s instantiated at N=%d with %s", name, spec.ansatz.n, resolved)
    return Preset(
        name=name,
        params=resolved,
        spec=spec,
        goldens=entry.goldens(resolved),
        provenance=entry.provenance,
        bindings=entry.bindings,
        laws=dict(entry.laws),
    )


def default_presets() -> list[Preset]:
    return [preset(name) for name in preset_names()]


def describe() -> list[dict[str, Any]]:
    """Listing rows: name, provenance, parameters with defaults, golden count."""
    rows = []
    for name in preset_names():
        entry = _ENTRIES[name]
        rows.append({
            "name": name,
            "provenance": entry.provenance,
            "params": [
                {"name": p.name, "default": None if p.default is None else str(p.default),
                 "description": p.description}
                for p in entry.params
            ],
            "goldens": len(entry.goldens(_resolve_params(entry, None))),
        })
    return rows


# ---------------------------------------------------------------------------
# Golden matching and relations
# ---------------------------------------------------------------------------

def _normalized(values: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(values)))
    peak = values[idx]
    if peak == 0:
        return values
    return values / peak


def profiles_match(a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_PSI_TOL) -> bool:
    """Equal up to one global constant, within tol relative to the peak."""
    mask = np.isfinite(a) & np.isfinite(b)
    if not mask.any():
        return False
    return bool(np.abs(_normalized(a[mask]) - _normalized(b[mask])).max() <= tol)


def match_golden(
    p: Preset,
    golden: Golden,
    records: Iterable[Any],
    tol: float = DEFAULT_MATCH_TOL,
    psi_tol: float = DEFAULT_PSI_TOL,
) -> Any | None:
    """First record agreeing with a golden in λ, E and (when given) ψ."""
    from core.oracle import psi_profile, sample_points

    env = p.namespace()
    lam = parse_formula(golden.lam).evaluate(env)
    energy = parse_formula(golden.energy).evaluate(env)
    expected_psi = None
    points = sample_points(p.spec)
    if golden.psi is not None:
        expected_psi = p.psi(golden, points)
    for record in records:
        if abs(float(record.energy) - energy) > tol * max(1.0, abs(energy)):
            continue
        if abs(float(record.lam) - lam) > tol * max(1.0, abs(lam)):
            continue
        if expected_psi is not None and not profiles_match(psi_profile(p.spec, record, points), expected_psi, psi_tol):
            continue
        return record
    return None


def check_energy_relation(p: Preset, record: Any) -> float:
    """
    Residual of E_N = V0 + a V1 + sqrt(b V1)·((2N+1) + 4λ_N) for a record.

    N is the record's effective degree. Only meaningful for presets with
    V3 = V2 = 0.
    """
    expected = p.law("energy", N=float(record.window[1]), lam=float(record.lam))
    return float(record.energy) - expected


def coulomb_ratio(p: Preset, record: Any) -> float:
    """(G + H)/sqrt(−E) of a screened-Coulomb record, G taken from the fit."""
    if p.name != "screened-coulomb":
        raise CatalogError("the ratio law applies to the screened-coulomb preset only")
    g = float(record.fitted_potential["v[-1,0]"])
    h = float(p.params["H"])
    energy = float(record.energy)
    if energy >= 0:
        raise CatalogError(f"ratio undefined for non-negative energy {energy}")
    return (g + h) / math.sqrt(-energy)


def golden_values(p: Preset, golden: Golden) -> dict[str, float]:
    """Every numeric value a golden asserts, keyed by field name."""
    env = p.namespace()
    try:
        out = {
            "lambda": parse_formula(golden.lam).evaluate(env),
            "energy": parse_formula(golden.energy).evaluate(env),
        }
        for name, text in golden.constraints + golden.weight:
            out[name] = parse_formula(text).evaluate(env)
    except FormulaError as e:
        raise CatalogError(f"{p.name} golden {golden.tag}: {e}") from e
    return out
