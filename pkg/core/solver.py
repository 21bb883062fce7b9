"""
Solver for assembled QES systems.

The unknowns of one problem are the masked weight entries (g̃_l, γ), λ, the
energy E, the expansion coefficients c_m and the adjustable potential
entries. They are resolved the way the problem is worked out by hand:

1. Window scan: every sub-window [m_lo, m_hi] of the c-window is tried with
   c_{m_hi} = 1 and c_{m_lo} ≠ 0. Rows touched only by c_{m_lo} are divided
   by it.
2. stage_weight: rows depending on a single weight unknown (degree ≤ 2 in
   each) are solved top-down, both roots spawning branches.
3. stage_lambda: a row in λ alone, else the indicial equation at the zeros
   of f.
4. stage_pencil: the remaining (E, c) come from a generalized eigenproblem
   on the potential-free rows; adjustable entries are then fitted by least
   squares.
5. Gauss-Newton with multi-start covers everything the stages leave open.

Every candidate is re-checked against all rows before it becomes a
SolutionRecord.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Mapping

import numpy as np
from scipy import linalg

from core.assembler import (
    PATH_AUTO,
    AlgebraicSystem,
    AssemblyError,
    Trial,
    WeightValues,
    assemble,
    derive_families,
    support_window,
)
from core.coeffseq import CoeffSeq, Scalar, ZERO, parse_scalar, scalar_to_json
from core.model import MODE_SIMPLE, PotentialKey, ProblemSpec
from core.observability import log_run_event

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240601
DEFAULT_TOL_ABS = 1e-10
DEFAULT_DEDUPE_TOL = 1e-9
DEFAULT_NEWTON_STARTS = 64
DEFAULT_NEWTON_MAX_ITER = 100
DEFAULT_NEWTON_TOL = 1e-11

# Dependency probing and pruning during staging.
NUDGE_REL_TOL = 1e-9
PRUNE_REL_TOL = 1e-7
COMPLEX_REL_TOL = 1e-9
PSI_MATCH_TOL = 1e-7

KIND_WEIGHT = "weight"
KIND_LAMBDA = "lambda"
KIND_ENERGY = "energy"
KIND_C = "c"
KIND_POTENTIAL = "potential"


class SolverError(Exception):
    """Base class for solver failures on one branch."""


class NoWeightSolution(SolverError):
    """No triangular chain for the weight and the weight Newton search came up empty."""


class NoPencilSolution(SolverError):
    """The (E, c) pencil has no admissible finite eigenpair."""

    def __init__(self, message: str, underdetermined: bool = False) -> None:
        self.underdetermined = underdetermined
        super().__init__(message)


class NewtonFailure(SolverError):
    """Gauss-Newton did not reach the residual tolerance."""

    def __init__(self, message: str, best_residual: float) -> None:
        self.best_residual = best_residual
        super().__init__(message)


class _Infeasible(SolverError):
    """A fully resolved row does not vanish."""


@dataclass(frozen=True)
class SolverSettings:
    tol_abs: float = DEFAULT_TOL_ABS
    dedupe_tol: float = DEFAULT_DEDUPE_TOL
    newton_starts: int = DEFAULT_NEWTON_STARTS
    newton_max_iter: int = DEFAULT_NEWTON_MAX_ITER
    newton_tol: float = DEFAULT_NEWTON_TOL
    seed: int = DEFAULT_SEED
    threads: int = 1
    window_cap: int = 512
    path: str = PATH_AUTO
    judge_bounded: bool = True


@dataclass
class SolutionRecord:
    """One solved eigenpair with its provenance."""

    lam: Scalar
    energy: Scalar
    c: CoeffSeq
    weight: WeightValues
    window: tuple[int, int]
    fitted_potential: dict[str, Scalar] = field(default_factory=dict)
    constraint_residuals: dict[int, float] = field(default_factory=dict)
    root_choices: list[str] = field(default_factory=list)
    equivalent_windows: list[tuple[int, int]] = field(default_factory=list)
    degeneracy: str | None = None
    bounded: bool | None = None
    max_residual: float = 0.0
    scale: float = 0.0
    exact: bool = False

    @property
    def degree(self) -> int:
        return self.window[1] - self.window[0]

    def potential_values(self, p: ProblemSpec) -> dict[PotentialKey, Scalar]:
        by_name = {key.name: key for key in p.adjustable}
        return {by_name[name]: v for name, v in self.fitted_potential.items() if name in by_name}

    def to_json(self) -> dict[str, Any]:
        return {
            "lambda": scalar_to_json(self.lam),
            "energy": scalar_to_json(self.energy),
            "c": self.c.to_json(),
            "weight": {
                "gtilde": self.weight.gtilde.to_json(),
                "glog": scalar_to_json(self.weight.glog),
            },
            "window": list(self.window),
            "equivalent_windows": [list(w) for w in self.equivalent_windows],
            "fitted_potential": {
                name: scalar_to_json(v) for name, v in sorted(self.fitted_potential.items())
            },
            "constraint_residuals": {
                str(j): v for j, v in sorted(self.constraint_residuals.items())
            },
            "max_residual": self.max_residual,
            "scale": self.scale,
            "root_choices": list(self.root_choices),
            "degeneracy": self.degeneracy,
            "bounded": self.bounded,
            "exact": self.exact,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> SolutionRecord:
        weight = data.get("weight", {}) or {}
        window = data.get("window") or [0, 0]
        return cls(
            lam=parse_scalar(data["lambda"]),
            energy=parse_scalar(data["energy"]),
            c=CoeffSeq.from_json(data.get("c", {"0": 1})),
            weight=WeightValues(
                CoeffSeq.from_json(weight.get("gtilde", {}) or {}),
                parse_scalar(weight.get("glog", 0)),
            ),
            window=(int(window[0]), int(window[1])),
            fitted_potential={
                str(k): parse_scalar(v) for k, v in (data.get("fitted_potential") or {}).items()
            },
            constraint_residuals={
                int(k): float(v) for k, v in (data.get("constraint_residuals") or {}).items()
            },
            root_choices=list(data.get("root_choices", [])),
            equivalent_windows=[tuple(w) for w in data.get("equivalent_windows", [])],
            degeneracy=data.get("degeneracy"),
            bounded=data.get("bounded"),
            max_residual=float(data.get("max_residual", 0.0)),
            scale=float(data.get("scale", 0.0)),
            exact=bool(data.get("exact", False)),
        )


@dataclass
class BranchFailure:
    window: tuple[int, int]
    reason: str
    choices: list[str] = field(default_factory=list)
    best_residual: float | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "window": list(self.window),
            "reason": self.reason,
            "choices": list(self.choices),
            "best_residual": self.best_residual,
        }


@dataclass
class SolveOutcome:
    records: list[SolutionRecord]
    failures: list[BranchFailure]
    windows: list[tuple[int, int]]
    seed: int


@dataclass(frozen=True)
class Branch:
    """A partial assignment of unknowns inside one c-window."""

    window: tuple[int, int]
    pivot: int
    boundary: int | None
    assigned: Mapping[str, Scalar]
    choices: tuple[str, ...] = ()

    def assign(self, name: str, value: Scalar, choice: str) -> Branch:
        merged = dict(self.assigned)
        merged[name] = value
        return replace(self, assigned=merged, choices=self.choices + (choice,))


def _kind(name: str) -> str:
    if name.startswith("gtilde[") or name == "glog":
        return KIND_WEIGHT
    if name == "lambda":
        return KIND_LAMBDA
    if name == "E":
        return KIND_ENERGY
    if name.startswith("c["):
        return KIND_C
    return KIND_POTENTIAL


def _c_name(m: int) -> str:
    return f"c[{m}]"


def _is_exact(value: object) -> bool:
    return isinstance(value, Fraction)


def _exact_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    num, den = q.numerator, q.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


def _fmt(value: Scalar) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return f"{float(value):.12g}"


def quadratic_roots(a: Scalar, b: Scalar, c: Scalar) -> list[tuple[Scalar, str]]:
    """
    Real roots of a·x² + b·x + c with their branch labels.

    Exact coefficients with a perfect-square discriminant give exact roots.
    """
    exact = all(_is_exact(v) for v in (a, b, c))
    size = max(abs(float(a)), abs(float(b)), abs(float(c)), 1e-300)
    if (exact and a == 0) or (not exact and abs(float(a)) <= 1e-14 * size):
        if (exact and b == 0) or (not exact and abs(float(b)) <= 1e-14 * size):
            return []
        return [(-c / b if exact else -float(c) / float(b), "linear")]
    disc = b * b - 4 * a * c
    if exact:
        if disc < 0:
            return []
        root = _exact_sqrt(disc)
        if root is not None:
            if root == 0:
                return [(-b / (2 * a), "double")]
            return [((-b + root) / (2 * a), "+sqrt"), ((-b - root) / (2 * a), "-sqrt")]
    fa, fb, fc, fdisc = float(a), float(b), float(c), float(disc)
    if fdisc < -1e-12 * fb * fb:
        return []
    s = math.sqrt(max(fdisc, 0.0))
    if s == 0.0:
        return [(-fb / (2 * fa), "double")]
    # Stable pair: q/a and c/q avoid cancellation in -b ± s.
    q = -0.5 * (fb + math.copysign(s, fb))
    near, far = q / fa, fc / q
    if fb >= 0:
        return [(far, "+sqrt"), (near, "-sqrt")]
    return [(near, "+sqrt"), (far, "-sqrt")]


# ---------------------------------------------------------------------------
# Workspace
# ---------------------------------------------------------------------------

class Workspace:
    """Per-thread assembly cache and row evaluation for one problem."""

    def __init__(self, p: ProblemSpec, settings: SolverSettings) -> None:
        self.p = p
        self.settings = settings
        self.j_window = support_window(p, cap=settings.window_cap)
        self._systems: dict[tuple[WeightValues, Scalar], AlgebraicSystem] = {}
        self._matrices: dict[int, tuple[np.ndarray, np.ndarray, dict[PotentialKey, np.ndarray], np.ndarray]] = {}

    def system(self, weight: WeightValues, lam: Scalar) -> AlgebraicSystem:
        key = (weight, lam)
        found = self._systems.get(key)
        if found is None:
            if len(self._systems) > 4096:
                self._systems.clear()
                self._matrices.clear()
            found = assemble(
                self.p,
                Trial(weight=weight, lam=lam),
                path=self.settings.path,
                window_cap=self.settings.window_cap,
                j_window=self.j_window,
            )
            self._systems[key] = found
        return found

    def matrices(
        self, system: AlgebraicSystem
    ) -> tuple[np.ndarray, np.ndarray, dict[PotentialKey, np.ndarray], np.ndarray]:
        key = id(system)
        found = self._matrices.get(key)
        if found is None:
            hmat, bmat, kmats = system.matrices()
            found = (hmat, bmat, kmats, system.lambda_matrix())
            self._matrices[key] = found
        return found

    def lam_of(self, values: Mapping[str, Scalar]) -> Scalar:
        if self.p.ansatz.lam is not None:
            return self.p.ansatz.lam
        return values.get("lambda", ZERO)

    def system_for(self, values: Mapping[str, Scalar]) -> AlgebraicSystem:
        return self.system(WeightValues.from_spec(self.p, values), self.lam_of(values))

    def potential_of(self, values: Mapping[str, Scalar]) -> dict[PotentialKey, Scalar]:
        out: dict[PotentialKey, Scalar] = {}
        for key in self.p.adjustable:
            if key.name in values:
                out[key] = values[key.name]
        return out

    def coefficients(self, values: Mapping[str, Scalar], window: tuple[int, int]) -> CoeffSeq:
        return CoeffSeq({m: values.get(_c_name(m), ZERO) for m in range(window[0], window[1] + 1)})

    def rows(self, values: Mapping[str, Scalar], window: tuple[int, int]) -> tuple[dict[int, Scalar], dict[int, float]]:
        system = self.system_for(values)
        c = self.coefficients(values, window)
        energy = values.get("E", ZERO)
        potential = self.potential_of(values)
        rows = {j: system.row(j, energy, c, potential) for j in system.rows}
        return rows, system.row_scales(energy, c, potential)


def unknown_names(p: ProblemSpec, window: tuple[int, int], pivot: int) -> list[str]:
    names = [f"gtilde[{l}]" for l in sorted(p.weight.unknown_mask)]
    if p.weight.glog_unknown:
        names.append("glog")
    if p.ansatz.lam is None:
        names.append("lambda")
    names.append("E")
    names += [_c_name(m) for m in range(window[0], window[1] + 1) if m != pivot]
    names += [key.name for key in p.adjustable]
    return names


def _unresolved(ws: Workspace, branch: Branch) -> list[str]:
    return [n for n in unknown_names(ws.p, branch.window, branch.pivot) if n not in branch.assigned]


# ---------------------------------------------------------------------------
# Dependency probing
# ---------------------------------------------------------------------------

def _base_values(ws: Workspace, branch: Branch, names: list[str]) -> dict[str, Scalar]:
    rng = np.random.default_rng([ws.settings.seed, len(branch.assigned), len(names)])
    values = dict(branch.assigned)
    for name in names:
        num = int(rng.integers(1, 12)) * (1 if rng.integers(0, 2) else -1)
        den = int(rng.integers(2, 13))
        values[name] = Fraction(num, den)
    values[_c_name(branch.pivot)] = Fraction(1)
    if branch.boundary is not None and _c_name(branch.boundary) in names:
        values[_c_name(branch.boundary)] = Fraction(1)
    return values


def _differs(a: Scalar, b: Scalar, scale: float) -> bool:
    if _is_exact(a) and _is_exact(b):
        return a != b
    return abs(float(a) - float(b)) > NUDGE_REL_TOL * max(scale, 1e-300)


def _dependencies(
    ws: Workspace, branch: Branch
) -> tuple[dict[int, set[str]], dict[str, Scalar], dict[int, Scalar], dict[int, float]]:
    """
    Which unresolved unknowns each row depends on at the current branch.

    Rows whose only coefficient dependence is the boundary c_{m_lo} are
    reported without it (the row is that coefficient times the rest).
    """
    names = _unresolved(ws, branch)
    base = _base_values(ws, branch, names)
    rows, scales = ws.rows(base, branch.window)
    global_scale = max(scales.values(), default=0.0)
    deps: dict[int, set[str]] = {j: set() for j in rows}
    for name in names:
        steps = (1, 2) if _kind(name) in (KIND_WEIGHT, KIND_LAMBDA) else (1,)
        for step in steps:
            trial = dict(base)
            trial[name] = base[name] + step
            moved, _ = ws.rows(trial, branch.window)
            for j, v in moved.items():
                floor = max(scales.get(j, 0.0), 1e-6 * global_scale)
                if _differs(v, rows[j], floor):
                    deps[j].add(name)
    if branch.boundary is not None:
        lo_name = _c_name(branch.boundary)
        for j, d in deps.items():
            c_deps = {n for n in d if _kind(n) == KIND_C}
            if c_deps == {lo_name}:
                d.discard(lo_name)
    return deps, base, rows, scales


def _row_is_zero(value: Scalar, scale: float) -> bool:
    if _is_exact(value):
        return value == 0
    return abs(float(value)) <= PRUNE_REL_TOL * max(scale, 1e-300)


def _univariate(
    ws: Workspace, branch: Branch, base: dict[str, Scalar], j: int, name: str
) -> tuple[Scalar, Scalar, Scalar] | None:
    """Coefficients (a, b, c) of row j as a polynomial of degree ≤ 2 in one unknown."""
    samples: dict[int, Scalar] = {}
    for x in (0, 1, -1, 2):
        trial = dict(base)
        trial[name] = Fraction(x)
        rows, scales = ws.rows(trial, branch.window)
        samples[x] = rows[j]
    q0, q1, qm, q2 = samples[0], samples[1], samples[-1], samples[2]
    a = (q1 + qm) / 2 - q0
    b = (q1 - qm) / 2
    predicted = 4 * a + 2 * b + q0
    if _differs(predicted, q2, max(abs(float(q2)), abs(float(q0)), abs(float(a)), 1e-300)):
        return None
    return a, b, q0


def _chain_step(ws: Workspace, branch: Branch, kinds: Iterable[str]) -> list[Branch] | None:
    """
    Resolve one unknown of the given kinds from a row that depends on it alone.

    Returns None when no such row exists, else the spawned branches (possibly
    none when the row has no real root).

    Raises:
        _Infeasible: if a row with no unresolved dependence does not vanish.
    """
    kinds = set(kinds)
    deps, base, rows, scales = _dependencies(ws, branch)
    global_scale = max(scales.values(), default=0.0)
    for j, d in deps.items():
        if not d and not _row_is_zero(rows[j], max(scales.get(j, 0.0), 1e-6 * global_scale)):
            raise _Infeasible(f"row {j} = {_fmt(rows[j])} with nothing left to adjust")

    candidates = sorted(
        (j for j, d in deps.items() if len(d) == 1 and _kind(next(iter(d))) in kinds),
        reverse=True,
    )
    for j in candidates:
        name = next(iter(deps[j]))
        poly = _univariate(ws, branch, base, j, name)
        if poly is None:
            continue
        roots = quadratic_roots(*poly)
        if not roots:
            logger.debug("branch %s: row %d has no real root in %s", branch.window, j, name)
        spawned = []
        for value, label in roots:
            choice = f"{name} = {_fmt(value)} ({label} root of row j={j})"
            spawned.append(branch.assign(name, value, choice))
        return spawned
    return None


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_weight(ws: Workspace, branch: Branch) -> list[Branch]:
    """
    Resolve weight unknowns through the triangular chain of rows.

    Each chain row depends on one remaining weight unknown with degree at
    most two; both roots are explored. If weight unknowns remain and enough
    rows involve nothing else, they are searched with multi-start Newton.

    Raises:
        NoWeightSolution: if such a weight-only block exists and has no root.
    """
    frontier = [branch]
    done: list[Branch] = []
    while frontier:
        current = frontier.pop(0)
        try:
            step = _chain_step(ws, current, {KIND_WEIGHT})
        except _Infeasible as e:
            logger.debug("branch %s rejected: %s", current.window, e)
            continue
        if step is None:
            done.append(current)
        else:
            frontier.extend(step)

    out: list[Branch] = []
    for current in done:
        open_weights = [n for n in _unresolved(ws, current) if _kind(n) == KIND_WEIGHT]
        if not open_weights:
            out.append(current)
            continue
        deps, _, _, _ = _dependencies(ws, current)
        block = [j for j, d in deps.items() if d and d <= set(open_weights)]
        if len(block) < len(open_weights):
            out.append(current)
            continue
        found = _newton_multistart(ws, current, open_weights, rows_subset=block)
        if not found:
            raise NoWeightSolution(
                f"no triangular chain and Newton exhausted for {', '.join(open_weights)}"
            )
        out.extend(found)
    return out


def _indicial_lambda(ws: Workspace, branch: Branch) -> list[tuple[Scalar, str]]:
    """
    λ candidates from the zeros of f.

    At a simple nonzero zero u₀ of f every residual term but two carries a
    factor f, so the polynomial identity leaves
    −λ(λ−1)·(f′)²(u₀) + V₋₂·v₋₂(u₀) = 0.
    """
    p = ws.p
    if p.vstar != 2 or any(key.k == -2 for key in p.adjustable):
        return []
    f0 = p.basis.f0
    if f0.is_zero or f0.lo == f0.hi:
        return []
    coeffs = [float(f0[l]) for l in range(f0.hi, f0.lo - 1, -1)]
    zeros = np.roots(coeffs)
    sq_f1 = derive_families(p, WeightValues()).sq_f1
    df = f0.derivative()
    amp = p.potential.amplitude(-2)
    mod = p.potential.modulator(-2)
    scale = max(f0.max_abs(), 1.0)

    found: list[tuple[Scalar, str]] = []
    for u0 in zeros:
        u0 = complex(u0)
        if abs(u0) < 1e-12 or abs(complex(df.evaluate(u0))) < 1e-9 * scale:
            continue
        s = complex(sq_f1.evaluate(u0))
        const = complex(float(amp)) * complex(mod.evaluate(u0)) if amp != 0 else 0j
        if abs(s) <= 1e-12 * max(1.0, abs(const)):
            continue
        for r in np.roots([-s, s, const]):
            if abs(r.imag) > COMPLEX_REL_TOL * max(1.0, abs(r)):
                continue
            value: Scalar = float(r.real)
            if f0.is_exact:
                approx = Fraction(value).limit_denominator(10_000)
                if abs(float(approx) - value) <= 1e-12 * max(1.0, abs(value)):
                    value = approx
            if any(abs(float(value) - float(v)) <= 1e-9 * max(1.0, abs(float(v))) for v, _ in found):
                continue
            found.append((value, f"indicial root at zero u0={u0.real:.6g}{u0.imag:+.6g}j of f"))
    return found


def stage_lambda(ws: Workspace, branch: Branch) -> list[Branch] | None:
    """
    Fix λ from a row in λ alone, else from the indicial equation at zeros of f.

    Returns None when λ has to be left to the Newton stage.
    """
    if "lambda" not in _unresolved(ws, branch):
        return [branch]
    try:
        step = _chain_step(ws, branch, {KIND_LAMBDA})
    except _Infeasible as e:
        logger.debug("branch %s rejected: %s", branch.window, e)
        return []
    if step is not None:
        return step
    roots = _indicial_lambda(ws, branch)
    if not roots:
        return None
    return [
        branch.assign("lambda", value, f"lambda = {_fmt(value)} ({label})")
        for value, label in roots
    ]


def _stage_potential(ws: Workspace, branch: Branch) -> list[Branch]:
    frontier = [branch]
    done: list[Branch] = []
    while frontier:
        current = frontier.pop(0)
        try:
            step = _chain_step(ws, current, {KIND_POTENTIAL})
        except _Infeasible as e:
            logger.debug("branch %s rejected: %s", current.window, e)
            continue
        if step is None:
            done.append(current)
        else:
            frontier.extend(step)
    return done


def _vector(values: Mapping[str, Scalar], window: tuple[int, int]) -> np.ndarray:
    return np.array(
        [float(values.get(_c_name(m), 0.0)) for m in range(window[0], window[1] + 1)]
    )


def stage_pencil(ws: Workspace, branch: Branch) -> list[Branch]:
    """
    Solve the remaining (E, c) as a generalized eigenproblem.

    E-free potential-free rows restrict c to a null space Z; the E-rows give
    (M − E·N)·y = 0 with M = H₁Z and N = B₁Z, projected onto the leading left
    singular vectors of N. Adjustable potential entries still open are then
    fitted by least squares on all rows.

    Raises:
        NoPencilSolution: when no finite real eigenpair survives, or with
            ``underdetermined`` set when the rows cannot fix (E, c).
    """
    p = ws.p
    values = dict(branch.assigned)
    system = ws.system_for(values)
    hmat, bmat, kmats, _ = ws.matrices(system)
    lo, hi = branch.window
    offset = system.c_window[0]
    cols = [m - offset for m in range(lo, hi + 1)]
    h = hmat[:, cols].copy()
    b = bmat[:, cols]
    open_keys = [key for key in p.adjustable if key.name not in values]
    for key in p.adjustable:
        if key.name in values:
            h += float(values[key.name]) * kmats[key][:, cols]

    tiny = 1e-12 * max(np.abs(h).max(initial=0.0), np.abs(b).max(initial=0.0), 1.0)
    v_free = np.ones(h.shape[0], dtype=bool)
    for key in open_keys:
        v_free &= np.abs(kmats[key][:, cols]).max(axis=1) <= tiny
    e_free = v_free & (np.abs(b).max(axis=1) <= tiny)
    e_rows = v_free & ~e_free
    width = hi - lo + 1

    if width == 1 and e_rows.any():
        pairs = _single_column_energy(system, lo, e_rows, values)
    else:
        pairs = _projected_pencil(h, b, e_free, e_rows, width)

    out: list[Branch] = []
    for energy, cvec, label in pairs:
        pivot_idx = branch.pivot - lo
        norm = np.abs(cvec).max()
        if norm == 0 or abs(cvec[pivot_idx]) <= 1e-9 * norm:
            continue
        cvec = cvec / cvec[pivot_idx]
        if branch.boundary is not None and abs(cvec[branch.boundary - lo]) <= 1e-9 * np.abs(cvec).max():
            continue
        nb = branch.assign("E", energy, f"E = {_fmt(energy)} ({label})")
        for idx, m in enumerate(range(lo, hi + 1)):
            if m != branch.pivot:
                nb = replace(nb, assigned={**nb.assigned, _c_name(m): _clean(cvec[idx])})
        if open_keys:
            nb = _fit_potential(ws, nb, open_keys, h, b, kmats, cols)
            if nb is None:
                continue
        out.append(nb)
    if not out and not pairs:
        raise NoPencilSolution(f"no finite eigenpair in window {branch.window}")
    return out


def _clean(value: Any) -> Scalar:
    if isinstance(value, Fraction):
        return value
    return float(np.real(value))


def _single_column_energy(
    system: AlgebraicSystem, m: int, e_rows: np.ndarray, values: Mapping[str, Scalar]
) -> list[tuple[Scalar, np.ndarray, str]]:
    """A one-coefficient window: E = h_{m,j*}/B_{j*,m} at the lowest usable row."""
    j_star = system.rows[int(np.argmax(e_rows))]
    h_val = system.h[m][j_star]
    for key in system.k:
        if key.name in values:
            h_val = h_val + values[key.name] * system.k[key][m][j_star]
    b_val = system.b[m][j_star]
    if b_val == 0:
        return []
    energy = h_val / b_val
    cvec = np.array([1.0])
    return [(energy if _is_exact(energy) else float(energy), cvec, f"row j={j_star}")]


def _projected_pencil(
    h: np.ndarray, b: np.ndarray, e_free: np.ndarray, e_rows: np.ndarray, width: int
) -> list[tuple[Scalar, np.ndarray, str]]:
    if e_free.any():
        z = linalg.null_space(h[e_free], rcond=1e-9)
    else:
        z = np.eye(width)
    if z.shape[1] == 0:
        return []
    m_mat = h[e_rows] @ z
    n_mat = b[e_rows] @ z
    q = z.shape[1]
    if m_mat.shape[0] < q:
        raise NoPencilSolution("fewer energy rows than free coefficients", underdetermined=True)
    u, s, _ = linalg.svd(n_mat)
    if s.size == 0 or s[0] == 0:
        raise NoPencilSolution("energy does not enter the potential-free rows", underdetermined=True)
    proj = u[:, :q]
    a_sq = proj.T @ m_mat
    b_sq = proj.T @ n_mat
    w, _ = linalg.eig(a_sq, b_sq, homogeneous_eigvals=True)
    alpha, beta = w
    pairs: list[tuple[Scalar, np.ndarray, str]] = []
    for al, be in zip(alpha, beta):
        if abs(be) <= 1e-12 * max(abs(al), 1.0):
            continue
        energy = al / be
        if abs(energy.imag) > COMPLEX_REL_TOL * max(abs(energy), 1.0):
            logger.warning("rejecting complex pencil eigenvalue %s", energy)
            continue
        e_real = float(energy.real)
        pencil = m_mat - e_real * n_mat
        _, _, vh = linalg.svd(pencil)
        y = vh[-1].conj()
        cvec = np.real(z @ y)
        pairs.append((e_real, cvec, f"pencil eigenvalue of {q}x{q} projection"))
    pairs.sort(key=lambda item: float(item[0]))
    return pairs


def _fit_potential(
    ws: Workspace,
    branch: Branch,
    open_keys: list[PotentialKey],
    h: np.ndarray,
    b: np.ndarray,
    kmats: Mapping[PotentialKey, np.ndarray],
    cols: list[int],
) -> Branch | None:
    cvec = np.array(
        [float(branch.assigned.get(_c_name(m), 1.0 if m == branch.pivot else 0.0))
         for m in range(branch.window[0], branch.window[1] + 1)]
    )
    energy = float(branch.assigned["E"])
    rhs = -((h - energy * b) @ cvec)
    design = np.column_stack([kmats[key][:, cols] @ cvec for key in open_keys])
    sol, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
    if rank < len(open_keys):
        logger.debug("branch %s: potential entries not fixed by the rows", branch.window)
        return None
    residual = design @ sol - rhs
    scale = max(np.abs(rhs).max(initial=0.0), np.abs(design).max(initial=0.0), 1.0)
    if np.abs(residual).max(initial=0.0) > 1e-8 * scale:
        logger.debug("branch %s: potential fit residual %.3g", branch.window, np.abs(residual).max())
        return None
    out = branch
    for key, value in zip(open_keys, sol):
        out = out.assign(key.name, float(value), f"{key.name} = {float(value):.12g} (least-squares fit)")
    return out


# ---------------------------------------------------------------------------
# Gauss-Newton
# ---------------------------------------------------------------------------

def _residual(
    ws: Workspace, branch: Branch, names: list[str], x: np.ndarray, rows_subset: list[int] | None
) -> tuple[np.ndarray, np.ndarray, float]:
    values: dict[str, Scalar] = {k: float(v) for k, v in branch.assigned.items()}
    values.update({n: float(v) for n, v in zip(names, x)})
    values[_c_name(branch.pivot)] = 1.0
    system = ws.system_for(values)
    hmat, bmat, kmats, lmat = ws.matrices(system)
    offset = system.c_window[0]
    cvec = np.zeros(hmat.shape[1])
    for m in range(branch.window[0], branch.window[1] + 1):
        cvec[m - offset] = float(values.get(_c_name(m), 0.0))
    energy = float(values.get("E", 0.0))
    amat = hmat - energy * bmat
    for key in ws.p.adjustable:
        if key.name in values:
            amat = amat + float(values[key.name]) * kmats[key]
    r = amat @ cvec

    jac = np.zeros((r.size, len(names)))
    for idx, name in enumerate(names):
        kind = _kind(name)
        if kind == KIND_C:
            m = int(name[2:-1])
            jac[:, idx] = amat[:, m - offset]
        elif kind == KIND_ENERGY:
            jac[:, idx] = -(bmat @ cvec)
        elif kind == KIND_LAMBDA:
            jac[:, idx] = lmat @ cvec
        elif kind == KIND_POTENTIAL:
            key = next(k for k in ws.p.adjustable if k.name == name)
            jac[:, idx] = kmats[key] @ cvec
        else:
            # Rows are quadratic in each weight unknown: a unit central difference is exact.
            cols = []
            for step in (1.0, -1.0):
                trial = dict(values)
                trial[name] = values[name] + step
                other = ws.system_for(trial)
                oh, ob, ok, _ = ws.matrices(other)
                oa = oh - energy * ob
                for key in ws.p.adjustable:
                    if key.name in trial:
                        oa = oa + float(trial[key.name]) * ok[key]
                cols.append(oa @ cvec)
            jac[:, idx] = (cols[0] - cols[1]) / 2.0

    cseq = CoeffSeq({m: values.get(_c_name(m), 0.0) for m in range(branch.window[0], branch.window[1] + 1)})
    scale = system.scale(energy, cseq, ws.potential_of(values))
    if rows_subset is not None:
        idx_rows = [j - system.j_window[0] for j in rows_subset]
        return r[idx_rows], jac[idx_rows], scale
    return r, jac, scale


def newton_polish(
    ws: Workspace,
    branch: Branch,
    names: list[str],
    start: np.ndarray,
    rows_subset: list[int] | None = None,
) -> tuple[np.ndarray, int, float]:
    """
    Gauss-Newton with QR steps and an Armijo backtracking line search.

    Returns:
        (solution, iterations used, final residual ∞-norm)

    Raises:
        NewtonFailure: if ‖r‖∞ ≤ newton_tol·scale is not reached in time.
    """
    settings = ws.settings
    x = np.array(start, dtype=float)
    best = math.inf
    c_1, gamma_dec, alpha_min = 1e-4, 0.5, 1e-12
    for iteration in range(settings.newton_max_iter + 1):
        r, jac, scale = _residual(ws, branch, names, x, rows_subset)
        norm = float(np.abs(r).max(initial=0.0))
        best = min(best, norm)
        if not np.isfinite(norm):
            break
        if norm <= settings.newton_tol * max(scale, 1e-300):
            return x, iteration, norm
        if iteration == settings.newton_max_iter:
            break
        q_mat, r_mat = np.linalg.qr(jac)
        diag = np.abs(np.diag(r_mat)) if r_mat.size else np.array([])
        if diag.size and diag.min() > 1e-12 * max(diag.max(), 1e-300):
            step = linalg.solve_triangular(r_mat, -(q_mat.T @ r))
        else:
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        f_k = float(r @ r)
        g_k = 2.0 * jac.T @ r
        alpha = 1.0
        while True:
            trial = x + alpha * step
            r_new, _, _ = _residual(ws, branch, names, trial, rows_subset)
            f_new = float(r_new @ r_new)
            if np.isfinite(f_new) and f_new <= f_k + c_1 * alpha * float(g_k @ step):
                x = trial
                break
            alpha *= gamma_dec
            if alpha <= alpha_min:
                raise NewtonFailure("line search stalled", best)
    raise NewtonFailure(f"no convergence in {settings.newton_max_iter} iterations", best)


def _start_ranges(ws: Workspace, name: str) -> tuple[float, float]:
    kind = _kind(name)
    vmax = max((abs(float(v)) for v in ws.p.potential.vk.values()), default=1.0)
    spread = 2.0 * (1.0 + vmax)
    if kind == KIND_WEIGHT:
        return -2.0, 2.0
    if kind == KIND_LAMBDA:
        return -2.0, 2.0
    if kind == KIND_C:
        return -1.0, 1.0
    return -spread, spread


def _newton_multistart(
    ws: Workspace,
    branch: Branch,
    names: list[str],
    rows_subset: list[int] | None = None,
) -> list[Branch]:
    settings = ws.settings
    lo, hi = branch.window
    rng = np.random.default_rng([settings.seed, lo + 10_000, hi + 10_000, len(names)])
    ranges = [_start_ranges(ws, n) for n in names]
    solutions: list[np.ndarray] = []
    for start_idx in range(settings.newton_starts):
        start = np.array([rng.uniform(a, b) for a, b in ranges])
        try:
            x, iterations, _ = newton_polish(ws, branch, names, start, rows_subset)
        except (NewtonFailure, AssemblyError, FloatingPointError, np.linalg.LinAlgError):
            continue
        if any(np.allclose(x, s, rtol=1e-6, atol=1e-8) for s in solutions):
            continue
        solutions.append(x)
        logger.debug("branch %s: Newton start #%d converged in %d steps", branch.window, start_idx, iterations)
    out: list[Branch] = []
    for idx, x in enumerate(solutions):
        nb = branch
        for name, value in zip(names, x):
            nb = nb.assign(name, float(value), f"{name} = {float(value):.12g} (Newton solution #{idx})")
        out.append(nb)
    return out


# ---------------------------------------------------------------------------
# Branch driver
# ---------------------------------------------------------------------------

def _stage(ws: Workspace, branch: Branch) -> list[Branch]:
    """Weight and λ staging to a fixed point, then the potential prepass."""
    out: list[Branch] = []
    for current in stage_weight(ws, branch):
        lam_step = stage_lambda(ws, current)
        if lam_step is None:
            out.extend(_stage_potential(ws, current))
            continue
        for nb in lam_step:
            if nb is current:
                out.extend(_stage_potential(ws, nb))
            else:
                out.extend(_stage(ws, nb))
    return out


def _complete(ws: Workspace, branch: Branch) -> list[Branch]:
    open_names = _unresolved(ws, branch)
    nonlinear = [n for n in open_names if _kind(n) in (KIND_WEIGHT, KIND_LAMBDA)]
    if not nonlinear:
        try:
            return stage_pencil(ws, branch)
        except NoPencilSolution as e:
            if not e.underdetermined:
                raise
            logger.debug("branch %s: %s; falling back to Newton", branch.window, e)
    return _newton_multistart(ws, branch, open_names)


def _finalize(ws: Workspace, branch: Branch) -> SolutionRecord | None:
    p = ws.p
    settings = ws.settings
    values = dict(branch.assigned)
    values[_c_name(branch.pivot)] = Fraction(1)
    rows, scales = ws.rows(values, branch.window)
    scale = max(scales.values(), default=0.0)
    limit = settings.tol_abs * max(scale, 1e-300)
    worst = max((abs(float(v)) for v in rows.values()), default=0.0)

    if worst > limit:
        floats = [n for n in _unresolved(ws, replace(branch, assigned={})) if not _is_exact(values.get(n))]
        floats = [n for n in floats if n in values]
        if floats:
            try:
                x, _, _ = newton_polish(ws, branch, floats, np.array([float(values[n]) for n in floats]))
            except NewtonFailure as e:
                logger.debug("branch %s: polish failed (best %.3g)", branch.window, e.best_residual)
                return None
            for n, v in zip(floats, x):
                values[n] = float(v)
            rows, scales = ws.rows(values, branch.window)
            scale = max(scales.values(), default=0.0)
            limit = settings.tol_abs * max(scale, 1e-300)
            worst = max((abs(float(v)) for v in rows.values()), default=0.0)
        if worst > limit:
            return None

    c = ws.coefficients(values, branch.window)
    if branch.boundary is not None and abs(float(c[branch.boundary])) <= 1e-9 * c.max_abs():
        return None
    weight = WeightValues.from_spec(p, values)
    lam = ws.lam_of(values)
    energy = values.get("E", ZERO)
    fitted = {key.name: values[key.name] for key in p.adjustable if key.name in values}
    exact = all(_is_exact(v) for v in rows.values()) and all(v == 0 for v in rows.values())
    return SolutionRecord(
        lam=lam,
        energy=energy,
        c=c,
        weight=weight,
        window=branch.window,
        fitted_potential=fitted,
        constraint_residuals={j: abs(float(v)) for j, v in rows.items()},
        root_choices=list(branch.choices),
        max_residual=worst,
        scale=scale,
        exact=exact,
    )


def _windows(p: ProblemSpec) -> list[tuple[tuple[int, int], int, int | None]]:
    lo, hi = p.c_window
    if p.ansatz.pivot is not None:
        return [((lo, hi), p.ansatz.pivot, None)]
    out = []
    for width in range(0, hi - lo + 1):
        for start in range(lo, hi - width + 1):
            end = start + width
            out.append(((start, end), end, start if width > 0 else None))
    return out


def solve_window(
    p: ProblemSpec,
    settings: SolverSettings,
    window: tuple[int, int],
    pivot: int,
    boundary: int | None,
) -> tuple[list[SolutionRecord], list[BranchFailure]]:
    """All records whose nonzero coefficients span exactly ``window``."""
    ws = Workspace(p, settings)
    root = Branch(window=window, pivot=pivot, boundary=boundary, assigned={})
    records: list[SolutionRecord] = []
    failures: list[BranchFailure] = []
    try:
        staged = _stage(ws, root)
    except SolverError as e:
        failures.append(BranchFailure(window, str(e)))
        return records, failures

    for branch in staged:
        try:
            completed = _complete(ws, branch)
        except NewtonFailure as e:
            failures.append(BranchFailure(window, str(e), list(branch.choices), e.best_residual))
            continue
        except SolverError as e:
            failures.append(BranchFailure(window, str(e), list(branch.choices)))
            continue
        if not completed:
            failures.append(BranchFailure(window, "no admissible completion", list(branch.choices)))
        for done in completed:
            record = _finalize(ws, done)
            if record is None:
                failures.append(BranchFailure(window, "residual check failed", list(done.choices)))
                continue
            records.append(record)
    logger.info(
        "window [%d, %d]: %d staged branch(es), %d record(s)",
        window[0], window[1], len(staged), len(records),
    )
    return records, failures


def _order_of(p: ProblemSpec, window: tuple[int, int]) -> int:
    """Smallest ansatz order N whose c-window contains ``window``."""
    if p.mode == MODE_SIMPLE:
        return window[1]
    return max(abs(window[0]), abs(window[1]))


def _same_state(p: ProblemSpec, a: SolutionRecord, b: SolutionRecord, tol: float) -> bool:
    ea, eb = float(a.energy), float(b.energy)
    if abs(ea - eb) > tol * max(1.0, abs(ea), abs(eb)):
        return False
    from core.oracle import OracleError, psi_profile

    try:
        pa = psi_profile(p, a)
        pb = psi_profile(p, b)
    except OracleError:
        return (
            a.window == b.window
            and abs(float(a.lam) - float(b.lam)) <= tol * max(1.0, abs(float(a.lam)))
            and all(abs(float(a.c[m]) - float(b.c[m])) <= tol for m in range(a.window[0], a.window[1] + 1))
        )
    na, nb = np.linalg.norm(pa), np.linalg.norm(pb)
    if na == 0 or nb == 0:
        return False
    ua, ub = pa / na, pb / nb
    return min(np.abs(ua - ub).max(), np.abs(ua + ub).max()) <= PSI_MATCH_TOL


def dedupe_records(p: ProblemSpec, records: list[SolutionRecord], tol: float) -> list[SolutionRecord]:
    """
    Merge records describing the same state.

    The record from the narrowest window (then the lowest window) is kept;
    the windows of merged duplicates are listed on it.
    """
    ordered = sorted(records, key=lambda r: (r.degree, r.window[0], float(r.energy), float(r.lam)))
    kept: list[SolutionRecord] = []
    for record in ordered:
        match = next((k for k in kept if _same_state(p, k, record, tol)), None)
        if match is None:
            kept.append(record)
        elif record.window != match.window and record.window not in match.equivalent_windows:
            match.equivalent_windows.append(record.window)
    for record in kept:
        record.equivalent_windows.sort()
        order = _order_of(p, record.window)
        if order < p.ansatz.n:
            record.degeneracy = f"duplicates N={order} solution"
    kept.sort(key=lambda r: (float(r.energy), float(r.lam), r.window))
    return kept


def run_solver(p: ProblemSpec, settings: SolverSettings | None = None) -> SolveOutcome:
    """
    Solve a problem over every admissible c-window.

    Windows are independent; they run on a thread pool capped by
    ``settings.threads`` and are merged in window order before dedupe.
    """
    settings = settings or SolverSettings()
    windows = _windows(p)
    log_run_event(
        "solve_started",
        "ok",
        metadata={"problem": p.name, "N": p.ansatz.n, "mode": p.mode, "windows": len(windows), "seed": settings.seed},
    )
    results: list[tuple[list[SolutionRecord], list[BranchFailure]] | None] = [None] * len(windows)
    workers = max(1, int(settings.threads))
    if workers == 1:
        for idx, (window, pivot, boundary) in enumerate(windows):
            results[idx] = solve_window(p, settings, window, pivot, boundary)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(solve_window, p, settings, window, pivot, boundary): idx
                for idx, (window, pivot, boundary) in enumerate(windows)
            }
            for future in as_completed(futures):
                results[futures[future]] = future.result()

    records: list[SolutionRecord] = []
    failures: list[BranchFailure] = []
    for item in results:
        if item is None:
            continue
        records.extend(item[0])
        failures.extend(item[1])

    for failure in failures:
        log_run_event(
            "branch_rejected",
            "skipped",
            metadata={"window": list(failure.window), "reason": failure.reason},
            level=logging.DEBUG,
        )
    merged = dedupe_records(p, records, settings.dedupe_tol)
    if settings.judge_bounded:
        from core.oracle import OracleError, judge_bounded

        for record in merged:
            try:
                record.bounded = judge_bounded(p, record)
            except OracleError as e:
                logger.debug("boundedness undetermined for E=%s: %s", record.energy, e)
                record.bounded = None
    for record in merged:
        log_run_event(
            "record_emitted",
            "ok",
            metadata={"E": record.energy, "lambda": record.lam, "window": list(record.window), "bounded": record.bounded},
        )
    return SolveOutcome(
        records=merged,
        failures=failures,
        windows=[w for w, _, _ in windows],
        seed=settings.seed,
    )


def solve(p: ProblemSpec, settings: SolverSettings | None = None) -> list[SolutionRecord]:
    """All distinct solution records of ``p``, sorted by energy."""
    return run_solver(p, settings).records
