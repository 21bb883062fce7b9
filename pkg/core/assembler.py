"""
Assembly of the master algebraic system.

With ψ = g·h^(−γ)·f^λ·Σ_m c_m h^m and the residual −ψ″ + Vψ − Eψ multiplied
by f^(V*−λ)/g, every power h^j of the remaining Laurent polynomial has to
vanish:

    row_j = Σ_m c_m [h_{m,j} − E·(^{V*}f)_{j−m}] = 0

h_{m,j} is built from whole convolved families (one sequence per prefactor
λ(λ−1), λ, −2λ, 2mλ, m, m(m−1), −2m and the constant one), then indexed.
The simple path (no square-root factor, no log weight, V* = 2) composes the
same polynomials through a shorter chain of families and agrees exactly with
the general path in exact arithmetic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from core.coeffseq import (
    CoeffSeq,
    Scalar,
    ZERO,
    convolve,
    is_exact,
    power_table,
    scalar_to_json,
)
from core.model import MODE_SIMPLE, PotentialKey, ProblemSpec

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_CAP = 512

PATH_AUTO = "auto"
PATH_SIMPLE = "simple"
PATH_GENERAL = "general"
PATH_CHOICES = (PATH_AUTO, PATH_SIMPLE, PATH_GENERAL)

HALF = Fraction(1, 2)


class AssemblyError(Exception):
    """Raised when the row support of a system runs away or a path is inapplicable."""


@dataclass(frozen=True)
class WeightValues:
    """Instantiated weight: the full g̃ sequence and the log exponent γ."""

    gtilde: CoeffSeq = field(default_factory=CoeffSeq)
    glog: Scalar = ZERO

    @classmethod
    def from_spec(cls, p: ProblemSpec, assigned: Mapping[str, Scalar] | None = None) -> WeightValues:
        """
        Given entries of the problem overlaid with assigned unknowns.

        Assigned keys are "gtilde[l]" and "glog"; missing unknowns default to 0.
        """
        assigned = assigned or {}
        entries = dict(p.weight.gtilde.items())
        for l in p.weight.unknown_mask:
            entries[l] = assigned.get(f"gtilde[{l}]", ZERO)
        glog = assigned.get("glog", p.weight.glog) if p.weight.glog_unknown else p.weight.glog
        return cls(CoeffSeq(entries), glog)


@dataclass(frozen=True)
class Trial:
    """A point in unknown space. Rows are assembled at (weight, lam)."""

    weight: WeightValues
    lam: Scalar
    energy: Scalar = ZERO
    c: CoeffSeq = field(default_factory=lambda: CoeffSeq.delta(0))
    potential: dict[PotentialKey, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class DerivedFamilies:
    sq_h: CoeffSeq
    ftilde1: CoeffSeq
    sq_ftilde1: CoeffSeq
    sq_f1: CoeffSeq
    g1: CoeffSeq
    sq_gtilde1: CoeffSeq
    sq_g1: CoeffSeq
    fh1: CoeffSeq
    gh1: CoeffSeq
    ftg1: CoeffSeq
    fg1: CoeffSeq
    hht: CoeffSeq
    h2: CoeffSeq
    f2: CoeffSeq
    g2: CoeffSeq
    powers: tuple[CoeffSeq, ...]
    modulated: dict[int, CoeffSeq]


@dataclass(frozen=True)
class SimpleFamilies:
    """Families of the fast path; every one already carries its h′ factor."""

    f1: CoeffSeq
    g1: CoeffSeq
    h1: CoeffSeq
    powers: tuple[CoeffSeq, ...]
    modulated: dict[int, CoeffSeq]


@dataclass(frozen=True)
class TermSet:
    """
    Convolved residual terms, indexed by d = j − m.

    Each sequence is multiplied by its prefactor when h_{m,j} is formed:
    g2 by 1, sq_f by λ(λ−1), f2 by λ, fg by −2λ, fh by 2mλ, h2 by m,
    sq_h by m(m−1) and gh by −2m, all under an overall minus sign.
    """

    g2: CoeffSeq
    sq_f: CoeffSeq
    f2: CoeffSeq
    fg: CoeffSeq
    fh: CoeffSeq
    h2: CoeffSeq
    sq_h: CoeffSeq
    gh: CoeffSeq
    potential: CoeffSeq
    energy: CoeffSeq
    adjustable: dict[PotentialKey, CoeffSeq]

    def h_sequence(self, m: int, lam: Scalar) -> CoeffSeq:
        """h_{m,·} over d = j − m, adjustable potential entries excluded."""
        mm = Fraction(m)
        bracket = (
            self.g2
            + self.sq_f.scaled(lam * (lam - 1))
            + self.f2.scaled(lam)
            + self.fg.scaled(-2 * lam)
            + self.fh.scaled(2 * mm * lam)
            + self.h2.scaled(mm)
            + self.sq_h.scaled(mm * (mm - 1))
            + self.gh.scaled(-2 * mm)
        )
        return self.potential - bracket

    def dh_dlambda(self, m: int, lam: Scalar) -> CoeffSeq:
        mm = Fraction(m)
        bracket = (
            self.sq_f.scaled(2 * lam - 1)
            + self.f2
            + self.fg.scaled(Fraction(-2))
            + self.fh.scaled(2 * mm)
        )
        return -bracket

    def magnitude(self, m: int, lam: Scalar) -> dict[int, float]:
        """Σ |prefactor|·|term| per d; the scale against which cancellation is judged."""
        lam_f = abs(float(lam))
        weights = [
            (self.g2, 1.0),
            (self.sq_f, abs(float(lam) * (float(lam) - 1))),
            (self.f2, lam_f),
            (self.fg, 2 * lam_f),
            (self.fh, 2 * abs(m) * lam_f),
            (self.h2, float(abs(m))),
            (self.sq_h, float(abs(m * (m - 1)))),
            (self.gh, 2.0 * abs(m)),
            (self.potential, 1.0),
        ]
        out: dict[int, float] = {}
        for seq, w in weights:
            if not w:
                continue
            for d, v in seq.items():
                out[d] = out.get(d, 0.0) + w * abs(float(v))
        return out


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

def _half(s: CoeffSeq) -> CoeffSeq:
    return s.scaled(HALF if s.is_exact else 0.5)


def _weight_derivative(weight: WeightValues) -> CoeffSeq:
    """W = dG/dh + γ/h, so that g′/g = −W·h′."""
    w = weight.gtilde.derivative()
    if weight.glog != 0:
        w = w + CoeffSeq.delta(-1, weight.glog)
    return w


def _modulated(p: ProblemSpec, powers: tuple[CoeffSeq, ...]) -> dict[int, CoeffSeq]:
    vstar = p.vstar
    out: dict[int, CoeffSeq] = {}
    for k in p.potential_keys():
        out[k] = convolve(powers[k + vstar], p.potential.modulator(k))
    return out


def derive_families(p: ProblemSpec, weight: WeightValues) -> DerivedFamilies:
    """
    All derived coefficient families for one weight instantiation.

    ²h is the true square of h′, i.e. (Σ h_l u^l)²·Σ h̃_l u^l, and h″ follows
    as ½·d(²h)/dh.
    """
    hp = p.basis.hprime_poly
    hs = p.basis.hprime_sqrt
    hp_sq = convolve(hp, hp)
    sq_h = convolve(hp_sq, hs)

    ftilde1 = p.basis.f0.derivative()
    sq_ftilde1 = convolve(ftilde1, ftilde1)
    sq_f1 = convolve(sq_ftilde1, sq_h)

    g1 = _weight_derivative(weight)
    sq_gtilde1 = convolve(g1, g1)
    sq_g1 = convolve(sq_gtilde1, sq_h)

    fh1 = convolve(ftilde1, sq_h)
    gh1 = convolve(g1, sq_h)
    ftg1 = convolve(ftilde1, g1)
    fg1 = convolve(ftg1, sq_h)

    hht = convolve(hp.derivative(), hp)
    h2 = convolve(hht, hs) + _half(convolve(hp_sq, hs.derivative()))
    f2 = convolve(ftilde1.derivative(), sq_h) + convolve(ftilde1, h2)
    g2 = sq_g1 - convolve(g1.derivative(), sq_h) - convolve(g1, h2)

    powers = tuple(power_table(p.basis.f0, p.vstar + p.potential.vmax))
    return DerivedFamilies(
        sq_h=sq_h,
        ftilde1=ftilde1,
        sq_ftilde1=sq_ftilde1,
        sq_f1=sq_f1,
        g1=g1,
        sq_gtilde1=sq_gtilde1,
        sq_g1=sq_g1,
        fh1=fh1,
        gh1=gh1,
        ftg1=ftg1,
        fg1=fg1,
        hht=hht,
        h2=h2,
        f2=f2,
        g2=g2,
        powers=powers,
        modulated=_modulated(p, powers),
    )


def derive_simple_families(p: ProblemSpec, weight: WeightValues) -> SimpleFamilies:
    if weight.glog != 0:
        raise AssemblyError("simple path forbids a log weight")
    hp = p.basis.hprime_poly
    powers = tuple(power_table(p.basis.f0, 2 + p.potential.vmax))
    return SimpleFamilies(
        f1=convolve(p.basis.f0.derivative(), hp),
        g1=convolve(weight.gtilde.derivative(), hp),
        h1=hp,
        powers=powers,
        modulated={
            k: convolve(powers[k + 2], p.potential.modulator(k)) for k in p.potential_keys()
        },
    )


# ---------------------------------------------------------------------------
# Residual terms
# ---------------------------------------------------------------------------

def _split_potential(
    p: ProblemSpec,
    powers: tuple[CoeffSeq, ...],
    modulated: dict[int, CoeffSeq],
    vstar: int,
) -> tuple[CoeffSeq, dict[PotentialKey, CoeffSeq]]:
    whole_keys = {key.k for key in p.adjustable if key.l is None}
    entry_keys: dict[int, list[int]] = {}
    for key in p.adjustable:
        if key.l is not None:
            entry_keys.setdefault(key.k, []).append(key.l)

    known = CoeffSeq()
    for k, seq in modulated.items():
        amplitude = p.potential.amplitude(k)
        if k in whole_keys or amplitude == 0:
            continue
        if k in entry_keys:
            mod = p.potential.modulator(k)
            kept = CoeffSeq({l: v for l, v in mod.items() if l not in entry_keys[k]})
            seq = convolve(powers[k + vstar], kept)
        known = known + seq.scaled(amplitude)

    adjustable: dict[PotentialKey, CoeffSeq] = {}
    for key in p.adjustable:
        if key.l is None:
            adjustable[key] = modulated[key.k]
        else:
            adjustable[key] = powers[key.k + vstar].shifted(-key.l).scaled(p.potential.amplitude(key.k))
    return known, adjustable


def general_terms(p: ProblemSpec, fam: DerivedFamilies) -> TermSet:
    vstar = p.vstar
    pw = fam.powers
    known, adjustable = _split_potential(p, pw, fam.modulated, vstar)
    return TermSet(
        g2=convolve(pw[vstar], fam.g2),
        sq_f=convolve(pw[vstar - 2], fam.sq_f1),
        f2=convolve(pw[vstar - 1], fam.f2),
        fg=convolve(pw[vstar - 1], fam.fg1),
        fh=convolve(pw[vstar - 1], fam.fh1).shifted(1),
        h2=convolve(pw[vstar], fam.h2).shifted(1),
        sq_h=convolve(pw[vstar], fam.sq_h).shifted(2),
        gh=convolve(pw[vstar], fam.gh1).shifted(1),
        potential=known,
        energy=pw[vstar],
        adjustable=adjustable,
    )


def simple_terms(p: ProblemSpec, fam: SimpleFamilies) -> TermSet:
    pw = fam.powers
    g1, f1, h1 = fam.g1, fam.f1, fam.h1
    g2 = convolve(g1, g1) - convolve(g1.derivative(), h1)
    known, adjustable = _split_potential(p, pw, fam.modulated, 2)
    return TermSet(
        g2=convolve(pw[2], g2),
        sq_f=convolve(pw[0], convolve(f1, f1)),
        f2=convolve(pw[1], convolve(f1.derivative(), h1)),
        fg=convolve(pw[1], convolve(f1, g1)),
        fh=convolve(pw[1], convolve(f1, h1)).shifted(1),
        h2=convolve(pw[2], convolve(h1.derivative(), h1)).shifted(1),
        sq_h=convolve(pw[2], convolve(h1, h1)).shifted(2),
        gh=convolve(pw[2], convolve(g1, h1)).shifted(1),
        potential=known,
        energy=pw[2],
        adjustable=adjustable,
    )


def resolve_path(p: ProblemSpec, path: str = PATH_AUTO) -> str:
    if path == PATH_AUTO:
        return PATH_SIMPLE if p.mode == MODE_SIMPLE else PATH_GENERAL
    if path == PATH_SIMPLE and (
        p.basis.hprime_sqrt != CoeffSeq.delta(0)
        or p.weight.glog != 0
        or p.weight.glog_unknown
        or p.potential.vmin > 2
    ):
        raise AssemblyError("simple path requires hprime_sqrt = delta_0, no log weight and Vmin <= 2")
    return path


def build_terms(p: ProblemSpec, weight: WeightValues, path: str = PATH_AUTO) -> TermSet:
    if resolve_path(p, path) == PATH_SIMPLE:
        return simple_terms(p, derive_simple_families(p, weight))
    return general_terms(p, derive_families(p, weight))


def hmj(
    p: ProblemSpec,
    fam: DerivedFamilies,
    m: int,
    j: int,
    lam: Scalar,
    potential: Mapping[PotentialKey, Scalar] | None = None,
) -> Scalar:
    """
    h_{m,j} with every potential entry included.

    Adjustable entries take the given values, falling back to the values
    declared by the problem.
    """
    terms = general_terms(p, fam)
    value = terms.h_sequence(m, lam)[j - m]
    for key, seq in terms.adjustable.items():
        amount = _declared_value(p, key) if potential is None or key not in potential else potential[key]
        value = value + amount * seq[j - m]
    return value


def _declared_value(p: ProblemSpec, key: PotentialKey) -> Scalar:
    if key.l is None:
        return p.potential.amplitude(key.k)
    return p.potential.modulator(key.k)[key.l]


# ---------------------------------------------------------------------------
# Support windows
# ---------------------------------------------------------------------------

def _generic_weight(p: ProblemSpec) -> WeightValues:
    entries = dict(p.weight.gtilde.items())
    for l in p.weight.unknown_mask:
        entries[l] = Fraction(1) + Fraction(l, 97)
    glog = p.weight.glog
    if p.weight.glog_unknown:
        glog = Fraction(3, 7)
    return WeightValues(CoeffSeq(entries), glog)


def _span(seq: CoeffSeq) -> tuple[int, int] | None:
    return seq.support


def _union(a: tuple[int, int] | None, b: tuple[int, int] | None) -> tuple[int, int] | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a[0], b[0]), max(a[1], b[1])


def term_span(terms: TermSet) -> tuple[int, int] | None:
    """Union of the d-supports of every term that can enter h_{m,·} or B."""
    span: tuple[int, int] | None = None
    for seq in (
        terms.g2, terms.sq_f, terms.f2, terms.fg, terms.fh,
        terms.h2, terms.sq_h, terms.gh, terms.potential, terms.energy,
    ):
        span = _union(span, _span(seq))
    for seq in terms.adjustable.values():
        span = _union(span, _span(seq))
    return span


def support_window(
    p: ProblemSpec,
    weight: WeightValues | None = None,
    cap: int = DEFAULT_WINDOW_CAP,
) -> tuple[int, int]:
    """
    Active j-window [j_lo, j_hi] of the assembled system.

    Unknown weight entries are instantiated at generic nonzero values so that
    the window does not depend on where the solver currently stands.

    Raises:
        AssemblyError: if the window is empty or wider than ``cap``.
    """
    terms = build_terms(p, weight or _generic_weight(p), PATH_GENERAL)
    span = term_span(terms)
    if span is None:
        raise AssemblyError("every residual term vanishes identically")
    lo, hi = p.c_window
    j_lo, j_hi = span[0] + lo, span[1] + hi
    if j_hi - j_lo + 1 > cap:
        raise AssemblyError(f"j-window [{j_lo}, {j_hi}] exceeds the cap of {cap} rows")
    return j_lo, j_hi


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

@dataclass
class AlgebraicSystem:
    """
    Residual rows at fixed (weight, λ), linear in c and affine in E.

    ``h[m][j]`` is h_{m,j} without adjustable potential entries, ``b[m][j]``
    is (^{V*}f)_{j−m} and ``k[key][m][j]`` the coefficient of an adjustable
    entry. ``dh_dlam`` holds ∂h_{m,j}/∂λ.
    """

    j_window: tuple[int, int]
    c_window: tuple[int, int]
    lam: Scalar
    weight: WeightValues
    h: dict[int, CoeffSeq]
    b: dict[int, CoeffSeq]
    k: dict[PotentialKey, dict[int, CoeffSeq]]
    dh_dlam: dict[int, CoeffSeq]
    magnitude: dict[int, dict[int, float]]
    path: str = PATH_GENERAL

    @property
    def rows(self) -> list[int]:
        return list(range(self.j_window[0], self.j_window[1] + 1))

    @property
    def columns(self) -> list[int]:
        return list(range(self.c_window[0], self.c_window[1] + 1))

    def row(
        self,
        j: int,
        energy: Scalar,
        c: CoeffSeq,
        potential: Mapping[PotentialKey, Scalar] | None = None,
    ) -> Scalar:
        potential = potential or {}
        total: Scalar = ZERO
        for m, cm in c.items():
            if m not in self.h:
                continue
            entry = self.h[m][j] - energy * self.b[m][j]
            for key, value in potential.items():
                if key in self.k:
                    entry = entry + value * self.k[key][m][j]
            total = total + cm * entry
        return total

    def residuals(self, trial: Trial) -> dict[int, Scalar]:
        return {j: self.row(j, trial.energy, trial.c, trial.potential) for j in self.rows}

    def row_scales(
        self,
        energy: Scalar,
        c: CoeffSeq,
        potential: Mapping[PotentialKey, Scalar] | None = None,
    ) -> dict[int, float]:
        """Per-row magnitude before cancellation: Σ |terms| of each row."""
        potential = potential or {}
        out: dict[int, float] = {}
        e_abs = abs(float(energy))
        for j in self.rows:
            total = 0.0
            for m, cm in c.items():
                if m not in self.h:
                    continue
                mag = self.magnitude[m].get(j, 0.0) + e_abs * abs(float(self.b[m][j]))
                for key, value in potential.items():
                    if key in self.k:
                        mag += abs(float(value)) * abs(float(self.k[key][m][j]))
                total += abs(float(cm)) * mag
            out[j] = total
        return out

    def scale(
        self,
        energy: Scalar,
        c: CoeffSeq,
        potential: Mapping[PotentialKey, Scalar] | None = None,
    ) -> float:
        """Largest row magnitude before cancellation; tolerances are relative to it."""
        return max(self.row_scales(energy, c, potential).values(), default=0.0)

    def matrices(self) -> tuple[np.ndarray, np.ndarray, dict[PotentialKey, np.ndarray]]:
        """Dense float (H, B, K_key) with rows j_lo..j_hi and columns m_lo..m_hi."""
        rows, cols = self.rows, self.columns
        shape = (len(rows), len(cols))
        hmat = np.zeros(shape)
        bmat = np.zeros(shape)
        kmats = {key: np.zeros(shape) for key in self.k}
        for ci, m in enumerate(cols):
            j0 = self.j_window[0]
            for j, v in self.h[m].items():
                if j0 <= j <= self.j_window[1]:
                    hmat[j - j0, ci] = float(v)
            for j, v in self.b[m].items():
                if j0 <= j <= self.j_window[1]:
                    bmat[j - j0, ci] = float(v)
            for key in self.k:
                for j, v in self.k[key][m].items():
                    if j0 <= j <= self.j_window[1]:
                        kmats[key][j - j0, ci] = float(v)
        return hmat, bmat, kmats

    def lambda_matrix(self) -> np.ndarray:
        rows, cols = self.rows, self.columns
        out = np.zeros((len(rows), len(cols)))
        j0 = self.j_window[0]
        for ci, m in enumerate(cols):
            for j, v in self.dh_dlam[m].items():
                if j0 <= j <= self.j_window[1]:
                    out[j - j0, ci] = float(v)
        return out

    def dump(self) -> str:
        """Stable text rendering: "j: Σ coeff·c[m] + E·(Σ bcoeff·c[m]) + key·(...)"."""
        lines = [f"# path={self.path} lambda={_fmt(self.lam)} j-window={list(self.j_window)}"]
        for j in self.rows:
            h_terms = [f"({_fmt(self.h[m][j])})·c[{m}]" for m in self.columns if self.h[m][j] != 0]
            b_terms = [f"({_fmt(-self.b[m][j])})·c[{m}]" for m in self.columns if self.b[m][j] != 0]
            parts = [" + ".join(h_terms) if h_terms else "0"]
            if b_terms:
                parts.append("E·(" + " + ".join(b_terms) + ")")
            for key in sorted(self.k, key=lambda q: (q.k, q.l if q.l is not None else -10**9)):
                k_terms = [
                    f"({_fmt(self.k[key][m][j])})·c[{m}]"
                    for m in self.columns if self.k[key][m][j] != 0
                ]
                if k_terms:
                    parts.append(f"{key.name}·(" + " + ".join(k_terms) + ")")
            lines.append(f"{j}: " + " + ".join(parts))
        return "\n".join(lines) + "\n"


def _fmt(value: Scalar) -> str:
    rendered = scalar_to_json(value)
    return repr(rendered) if isinstance(rendered, float) else str(rendered)


def assemble_terms(
    p: ProblemSpec,
    terms: TermSet,
    lam: Scalar,
    weight: WeightValues,
    j_window: tuple[int, int],
    path: str,
) -> AlgebraicSystem:
    lo, hi = p.c_window
    h: dict[int, CoeffSeq] = {}
    b: dict[int, CoeffSeq] = {}
    dl: dict[int, CoeffSeq] = {}
    magnitude: dict[int, dict[int, float]] = {}
    for m in range(lo, hi + 1):
        h[m] = terms.h_sequence(m, lam).shifted(-m)
        b[m] = terms.energy.shifted(-m)
        dl[m] = terms.dh_dlambda(m, lam).shifted(-m)
        magnitude[m] = {d + m: v for d, v in terms.magnitude(m, lam).items()}
    k = {
        key: {m: seq.shifted(-m) for m in range(lo, hi + 1)}
        for key, seq in terms.adjustable.items()
    }
    return AlgebraicSystem(
        j_window=j_window,
        c_window=(lo, hi),
        lam=lam,
        weight=weight,
        h=h,
        b=b,
        k=k,
        dh_dlam=dl,
        magnitude=magnitude,
        path=path,
    )


def assemble(
    p: ProblemSpec,
    trial: Trial,
    path: str = PATH_AUTO,
    window_cap: int = DEFAULT_WINDOW_CAP,
    j_window: tuple[int, int] | None = None,
) -> AlgebraicSystem:
    """
    Assemble every row of the system at the trial's weight and λ.

    Args:
        p: Problem specification (assumed valid)
        trial: Weight values and λ; E, c and potential entries are only used
            when the returned system is evaluated
        path: "auto" (by spec mode), "simple" or "general"
        window_cap: Hard cap on the number of rows
        j_window: Precomputed row window, reused across trials of one problem

    Returns:
        AlgebraicSystem over the structural j-window of ``p``

    Raises:
        AssemblyError: on window overflow or an inapplicable path.
    """
    chosen = resolve_path(p, path)
    if j_window is None:
        j_window = support_window(p, cap=window_cap)
    terms = build_terms(p, trial.weight, chosen)
    system = assemble_terms(p, terms, trial.lam, trial.weight, j_window, chosen)
    logger.debug(
        "assembled %s: %d rows, c-window %s, path %s",
        p.name, len(system.rows), system.c_window, chosen,
    )
    return system


def is_exact_trial(trial: Trial) -> bool:
    values: list[object] = [trial.lam, trial.energy, trial.weight.glog, *trial.potential.values()]
    return (
        all(is_exact(v) for v in values)
        and trial.weight.gtilde.is_exact
        and trial.c.is_exact
    )

