"""
Independent verification of solution records.

Nothing here touches the coefficient algebra: wavefunctions are evaluated
pointwise from closed forms (or a numerically integrated h), substituted into
−ψ″ + Vψ = Eψ with a fourth-order stencil at two step sizes, and eigenvalues
are cross-checked against a finite-difference Hamiltonian.

Wavefunction convention: ψ = exp(−G(h))·h^{−γ}·f^λ·Σ c_m h^m, with G the
g̃ series and γ the log-weight exponent.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable

import numpy as np
from scipy import linalg, special
from scipy.integrate import solve_ivp

from core.coeffseq import CoeffSeq, Scalar
from core.model import (
    DOMAIN_FULL_LINE,
    DOMAIN_HALF_LINE,
    DOMAIN_PERIODIC,
    EVALUATOR_IDENTITY,
    EVALUATOR_JACOBI_SC,
    EVALUATOR_NUMERIC,
    ProblemSpec,
)

if TYPE_CHECKING:
    from core.solver import SolutionRecord

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 801
DEFAULT_LENGTH = 8.0
DEFAULT_PASS_THRESHOLD = 1e-7
DEFAULT_N_STATES = 8
MIN_GRID_POINTS = 64
HALF_LINE_EPS_REL = 1e-3
NODE_NOISE_REL = 1e-9
# Residual floor below which the convergence ratio is not meaningful.
RESIDUAL_FLOOR = 1e-10
MIN_ORDER_RATIO = 8.0
SAMPLE_COUNT = 20
GROWTH_SLOPE_TOL = 1e-3

METHOD_THREE_POINT = "three-point"
METHOD_NUMEROV = "numerov"


class OracleError(Exception):
    """Base class for verification failures."""


class PointSingular(OracleError):
    """ψ or V cannot be evaluated at a point."""


class GridUnusable(OracleError):
    """No grid point admits a residual evaluation."""


@dataclass(frozen=True)
class Grid:
    """
    Uniform verification grid.

    Full line: [−L, L]. Half line: [ε, L] with ε > 0. Periodic: [0, T).
    """

    kind: str
    n_pts: int = DEFAULT_GRID_POINTS
    length: float = DEFAULT_LENGTH
    epsilon: float | None = None
    period: float | None = None

    def __post_init__(self) -> None:
        if self.n_pts < MIN_GRID_POINTS:
            raise OracleError(f"grid needs at least {MIN_GRID_POINTS} points, got {self.n_pts}")
        if self.kind == DOMAIN_HALF_LINE and self.eps <= 0:
            raise OracleError("half-line grid needs epsilon > 0")
        if self.kind == DOMAIN_PERIODIC and (self.period is None or self.period <= 0):
            raise OracleError("periodic grid needs a positive period")

    @classmethod
    def for_problem(cls, p: ProblemSpec, n_pts: int = DEFAULT_GRID_POINTS) -> Grid:
        domain = p.domain
        length = domain.length if domain.length is not None else DEFAULT_LENGTH
        return cls(kind=domain.kind, n_pts=n_pts, length=length, period=domain.period)

    @property
    def eps(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return HALF_LINE_EPS_REL * self.length

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == DOMAIN_PERIODIC:
            return 0.0, float(self.period)
        if self.kind == DOMAIN_HALF_LINE:
            return self.eps, self.length
        return -self.length, self.length

    def points(self) -> np.ndarray:
        lo, hi = self.bounds
        if self.kind == DOMAIN_PERIODIC:
            return np.linspace(lo, hi, self.n_pts, endpoint=False)
        return np.linspace(lo, hi, self.n_pts)

    @property
    def spacing(self) -> float:
        lo, hi = self.bounds
        return (hi - lo) / (self.n_pts if self.kind == DOMAIN_PERIODIC else self.n_pts - 1)

    def to_json(self) -> dict[str, Any]:
        lo, hi = self.bounds
        return {"kind": self.kind, "n_pts": self.n_pts, "lo": lo, "hi": hi}


@dataclass
class VerificationReport:
    """
    residual_rel is the extrapolated residual that PASS is judged on.
    residual_rel_coarse and residual_rel_fine are the raw stencil residuals
    at the grid step and at half of it.
    """

    residual_rel: float
    residual_rel_coarse: float
    residual_rel_fine: float
    node_count: int
    bounded: bool | None
    passed: bool
    grid: dict[str, Any]
    skipped_points: int = 0
    fd_eigenvalue: float | None = None
    fd_gap: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def order_ratio(self) -> float:
        if self.residual_rel_fine == 0 or not math.isfinite(self.residual_rel_fine):
            return math.inf
        return self.residual_rel_coarse / self.residual_rel_fine

    def to_json(self) -> dict[str, Any]:
        ratio = self.order_ratio
        return {
            "residual_rel": self.residual_rel,
            "residual_rel_coarse": self.residual_rel_coarse,
            "residual_rel_fine": self.residual_rel_fine,
            "order_ratio": None if math.isinf(ratio) else ratio,
            "node_count": self.node_count,
            "bounded": self.bounded,
            "passed": self.passed,
            "grid": dict(self.grid),
            "skipped_points": self.skipped_points,
            "fd_eigenvalue": self.fd_eigenvalue,
            "fd_gap": self.fd_gap,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# h(x), f(x) and V(x)
# ---------------------------------------------------------------------------

def _real_power(base: float, exponent: float) -> float:
    if exponent == 0:
        return 1.0
    if base > 0:
        return base ** exponent
    if base == 0:
        if exponent > 0:
            return 0.0
        raise PointSingular("zero base with negative exponent")
    if float(exponent).is_integer():
        return base ** int(exponent)
    raise PointSingular(f"negative base {base:.3g} with exponent {exponent}")


@lru_cache(maxsize=32)
def _numeric_h(
    hprime_poly: CoeffSeq,
    hprime_sqrt: CoeffSeq,
    anchor: tuple[float, float],
    lo: float,
    hi: float,
) -> Callable[[float], float]:
    """Integrate h′ = P(h)·√Q(h) from the anchor to cover [lo, hi]."""

    def rhs(_x: float, y: np.ndarray) -> list[float]:
        u = float(y[0])
        q = float(hprime_sqrt.evaluate(u))
        return [float(hprime_poly.evaluate(u)) * math.sqrt(max(q, 0.0))]

    x0, h0 = anchor
    pieces = []
    for end in (lo, hi):
        if end == x0:
            continue
        sol = solve_ivp(rhs, (x0, end), [h0], method="RK45", rtol=1e-12, atol=1e-14, dense_output=True)
        if not sol.success:
            raise OracleError(f"numeric h integration failed: {sol.message}")
        pieces.append((min(x0, end), max(x0, end), sol.sol))

    def h_of(x: float) -> float:
        if x == x0:
            return h0
        for a, b, dense in pieces:
            if a <= x <= b:
                return float(dense(x)[0])
        raise PointSingular(f"x={x} outside the integrated range [{lo}, {hi}]")

    return h_of


class Basis:
    """Pointwise h(x), f(x)^λ and V(x) for one problem."""

    def __init__(self, p: ProblemSpec, span: tuple[float, float] | None = None) -> None:
        self.p = p
        ev = p.basis.evaluator
        self.kind = ev.kind
        self.f_root = ev.f_root
        self.modulus = float(ev.params.get("k", 0)) if ev.kind == EVALUATOR_JACOBI_SC else 0.0
        self._numeric: Callable[[float], float] | None = None
        if ev.kind == EVALUATOR_NUMERIC:
            if ev.anchor is None:
                raise OracleError("numeric evaluator without anchor")
            lo, hi = span if span is not None else (-DEFAULT_LENGTH, DEFAULT_LENGTH)
            self._numeric = _numeric_h(
                p.basis.hprime_poly, p.basis.hprime_sqrt, ev.anchor, float(lo), float(hi)
            )

    def _jacobi(self, x: float) -> tuple[float, float]:
        sn, cn, _, _ = special.ellipj(x, self.modulus ** 2)
        return float(sn), float(cn)

    def h(self, x: float) -> float:
        if self.kind == EVALUATOR_IDENTITY:
            return float(x)
        if self.kind == EVALUATOR_JACOBI_SC:
            sn, cn = self._jacobi(x)
            if cn == 0:
                raise PointSingular(f"sc has a pole at x={x}")
            return sn / cn
        assert self._numeric is not None
        return self._numeric(x)

    def f(self, u: float) -> float:
        return float(self.p.basis.f0.evaluate(u))

    def f_power(self, x: float, u: float, lam: float) -> float:
        """f^λ, continued through the signed root when one is registered."""
        if self.f_root == "1/sn" and float(2 * lam).is_integer():
            sn, _ = self._jacobi(x)
            if sn == 0:
                if lam < 0:
                    return 0.0
                raise PointSingular(f"f has a pole at x={x}")
            return (1.0 / sn) ** int(round(2 * lam))
        if self.f_root == "h" and float(2 * lam).is_integer():
            if u == 0 and lam < 0:
                raise PointSingular(f"f vanishes at x={x}")
            odd = int(round(2 * lam)) % 2 == 1
            return _real_power(self.f(u), lam) * (-1.0 if odd and u < 0 else 1.0)
        return _real_power(self.f(u), lam)


def _potential_table(
    p: ProblemSpec, record: SolutionRecord | None
) -> list[tuple[int, float, CoeffSeq]]:
    amps = {k: p.potential.amplitude(k) for k in p.potential_keys()}
    mods = {k: p.potential.modulator(k) for k in amps}
    if record is not None:
        for key, value in record.potential_values(p).items():
            if key.l is None:
                amps[key.k] = value
            else:
                entries = dict(mods.get(key.k, CoeffSeq()).items())
                entries[key.l] = value
                mods[key.k] = CoeffSeq(entries)
    return [
        (k, float(amps[k]), mods[k].to_float())
        for k in sorted(amps) if amps[k] != 0
    ]


def potential_at(basis: Basis, table: list[tuple[int, float, CoeffSeq]], x: float) -> float:
    u = basis.h(x)
    fval = basis.f(u)
    total = 0.0
    for k, amp, mod in table:
        total += amp * float(mod.evaluate(u)) * _real_power(fval, k)
    return total


# ---------------------------------------------------------------------------
# Wavefunction
# ---------------------------------------------------------------------------

def _psi_u(p: ProblemSpec, r: SolutionRecord, basis: Basis, x: float, u: float) -> float:
    weight = r.weight
    g_exp = -float(weight.gtilde.evaluate(u)) if not weight.gtilde.is_zero else 0.0
    glog = float(weight.glog)
    value = math.exp(g_exp) if g_exp < 700 else math.inf
    if glog != 0:
        value *= _real_power(u, -glog)
    value *= basis.f_power(x, u, float(r.lam))
    value *= float(r.c.evaluate(u))
    if not math.isfinite(value):
        raise PointSingular(f"ψ overflows at x={x}")
    return value


def eval_psi(p: ProblemSpec, r: SolutionRecord, x: float, basis: Basis | None = None) -> float:
    """
    ψ(x) of a record.

    Raises:
        PointSingular: at poles of h, zeros of f or h under negative
            exponents, and on overflow.
    """
    basis = basis or Basis(p)
    u = basis.h(x)
    if u == 0 and (r.c.lo < 0 or float(r.weight.glog) > 0):
        raise PointSingular(f"h vanishes at x={x}")
    return _psi_u(p, r, basis, x, u)


def sample_points(p: ProblemSpec, count: int = SAMPLE_COUNT) -> np.ndarray:
    """Fixed off-grid sample points inside the problem's domain."""
    grid = Grid.for_problem(p, n_pts=MIN_GRID_POINTS)
    lo, hi = grid.bounds
    if p.domain.kind == DOMAIN_FULL_LINE:
        lo, hi = 0.6 * lo, 0.6 * hi
    elif p.domain.kind == DOMAIN_HALF_LINE:
        lo, hi = 0.05 * hi, 0.6 * hi
    return lo + (hi - lo) * (np.arange(count) + 0.3719) / count


def psi_profile(p: ProblemSpec, r: SolutionRecord, points: np.ndarray | None = None) -> np.ndarray:
    """ψ at the sample points; singular points come back as 0."""
    pts = sample_points(p) if points is None else points
    basis = Basis(p, span=(float(pts.min()), float(pts.max())))
    out = np.zeros(len(pts))
    for i, x in enumerate(pts):
        try:
            out[i] = eval_psi(p, r, float(x), basis)
        except PointSingular:
            out[i] = 0.0
    return out


def log_abs_psi(p: ProblemSpec, r: SolutionRecord, u: float) -> float:
    """log|ψ| as a function of h, free of overflow."""
    total = 0.0
    if not r.weight.gtilde.is_zero:
        total -= float(r.weight.gtilde.evaluate(u))
    glog = float(r.weight.glog)
    if glog != 0:
        total -= glog * math.log(abs(u))
    fval = float(p.basis.f0.evaluate(u))
    lam = float(r.lam)
    if lam != 0:
        total += lam * math.log(abs(fval)) if fval != 0 else -lam * math.inf
    poly = float(r.c.evaluate(u))
    total += math.log(abs(poly)) if poly != 0 else -math.inf
    return total


def _approaches(p: ProblemSpec) -> list[list[float]]:
    """Sequences of h values approaching each boundary or singular point."""
    domain = p.domain.kind
    far = [10.0 ** k for k in range(1, 7)]
    near = [10.0 ** -k for k in range(1, 8)]
    seqs: list[list[float]] = []
    if domain == DOMAIN_HALF_LINE:
        seqs.append(far)
        seqs.append(near)
    else:
        seqs.append(far)
        seqs.append([-v for v in far])
        seqs.append(near)
        seqs.append([-v for v in near])
    f0 = p.basis.f0
    if f0.hi > f0.lo:
        coeffs = [float(f0[l]) for l in range(f0.hi, f0.lo - 1, -1)]
        for root in np.roots(coeffs):
            if abs(root.imag) > 1e-12 or abs(root.real) < 1e-12:
                continue
            u0 = float(root.real)
            if domain == DOMAIN_HALF_LINE and u0 <= 0:
                continue
            seqs.append([u0 + d for d in near])
            seqs.append([u0 - d for d in near])
    return seqs


def judge_bounded(p: ProblemSpec, r: SolutionRecord) -> bool | None:
    """
    Whether ψ stays bounded on the domain.

    log|ψ| is followed towards every boundary and singular point of h; any
    sustained growth marks the record unbounded. Returns None when h has no
    closed form.
    """
    if p.basis.evaluator.kind == EVALUATOR_NUMERIC:
        return None
    if p.domain.kind == DOMAIN_PERIODIC and p.basis.evaluator.kind == EVALUATOR_IDENTITY:
        return None
    for seq in _approaches(p):
        values = []
        for u in seq:
            try:
                values.append(log_abs_psi(p, r, u))
            except (ValueError, OverflowError):
                values.append(math.inf)
        tail = [v for v in values[-3:]]
        if any(v == math.inf for v in tail):
            return False
        finite = [v for v in tail if math.isfinite(v)]
        if len(finite) >= 2 and finite[-1] - finite[-2] > GROWTH_SLOPE_TOL * max(1.0, abs(finite[-2])):
            return False
    return True


# ---------------------------------------------------------------------------
# Residual check
# ---------------------------------------------------------------------------

def _stencil_step(grid: Grid, x: float) -> float:
    step = grid.spacing
    if grid.kind == DOMAIN_HALF_LINE:
        step = min(step, x / 8.0)
    return step


def _second_derivative(psi: Callable[[float], float], x: float, step: float) -> float:
    values = [psi(x + k * step) for k in (-2, -1, 0, 1, 2)]
    return (-values[0] + 16 * values[1] - 30 * values[2] + 16 * values[3] - values[4]) / (12 * step * step)


@dataclass
class _ResidualPass:
    coarse: float
    fine: float
    extrapolated: float
    psi_vals: np.ndarray
    skipped: int


def _residual_pass(
    p: ProblemSpec,
    r: SolutionRecord,
    grid: Grid,
    basis: Basis,
    table: list[tuple[int, float, CoeffSeq]],
) -> _ResidualPass:
    energy = float(r.energy)
    pts = grid.points()
    interior = pts if grid.kind == DOMAIN_PERIODIC else pts[2:-2]

    def psi(x: float) -> float:
        return eval_psi(p, r, x, basis)

    # columns: step, step/2, Richardson combination of the two (O(step^6))
    d2 = np.full((len(interior), 3), np.nan)
    psi_vals = np.full(len(interior), np.nan)
    v_psi = np.full(len(interior), np.nan)
    skipped = 0
    for i, x in enumerate(interior):
        x = float(x)
        try:
            step = _stencil_step(grid, x)
            value = psi(x)
            v = potential_at(basis, table, x)
            d2_coarse = _second_derivative(psi, x, step)
            d2_fine = _second_derivative(psi, x, step / 2)
        except PointSingular:
            skipped += 1
            continue
        psi_vals[i] = value
        v_psi[i] = v * value
        d2[i] = (d2_coarse, d2_fine, (16 * d2_fine - d2_coarse) / 15)
    ok = ~np.isnan(psi_vals)
    if not ok.any():
        raise GridUnusable(f"all {len(interior)} grid points are singular")
    psi_max = float(np.abs(psi_vals[ok]).max())
    denom = abs(energy) * psi_max + float(np.abs(v_psi[ok]).max())
    if denom == 0:
        denom = max(psi_max, 1e-300)
    residual = -d2[ok] + (v_psi[ok] - energy * psi_vals[ok])[:, None]
    coarse, fine, extrapolated = (np.abs(residual).max(axis=0) / denom).tolist()
    return _ResidualPass(coarse, fine, extrapolated, psi_vals, skipped)


def count_nodes(values: np.ndarray) -> int:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0
    cutoff = NODE_NOISE_REL * np.abs(finite).max()
    signs = np.sign(finite[np.abs(finite) > cutoff])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def residual_check(
    p: ProblemSpec,
    r: SolutionRecord,
    grid: Grid | None = None,
    pass_threshold: float = DEFAULT_PASS_THRESHOLD,
    with_spectrum: bool = False,
    n_states: int = DEFAULT_N_STATES,
    fd_method: str = METHOD_THREE_POINT,
) -> VerificationReport:
    """
    Substitute a record into −ψ″ + Vψ = Eψ on a grid.

    Every interior point gets ψ″ from the 5-point stencil at the grid step
    and at half of it. The two are combined by Richardson extrapolation into
    residual_rel, which carries an O(step⁶) truncation error. PASS needs
    residual_rel ≤ pass_threshold and a ratio of at least 8 between the two
    raw residuals, unless both are below the float floor. A wrong E leaves
    the raw residuals level, so the ratio test rejects it.

    Raises:
        GridUnusable: if no grid point can be evaluated.
    """
    grid = grid or Grid.for_problem(p)
    basis = Basis(p, span=(grid.bounds[0] - grid.spacing, grid.bounds[1] + grid.spacing))
    table = _potential_table(p, r)

    measured = _residual_pass(p, r, grid, basis, table)
    coarse, fine = measured.coarse, measured.fine
    if measured.skipped:
        logger.warning("skipped %d singular grid point(s) for E=%s", measured.skipped, r.energy)

    notes: list[str] = []
    converged = max(coarse, fine) <= RESIDUAL_FLOOR or (fine > 0 and coarse / fine >= MIN_ORDER_RATIO)
    if not converged:
        notes.append(f"stencil refinement ratio {coarse / fine if fine else math.inf:.3g} below {MIN_ORDER_RATIO}")
    if measured.extrapolated > pass_threshold:
        notes.append(f"residual {measured.extrapolated:.3g} above {pass_threshold:.3g}")
    passed = measured.extrapolated <= pass_threshold and converged

    report = VerificationReport(
        residual_rel=measured.extrapolated,
        residual_rel_coarse=coarse,
        residual_rel_fine=fine,
        node_count=count_nodes(measured.psi_vals),
        bounded=judge_bounded(p, r),
        passed=passed,
        grid=grid.to_json(),
        skipped_points=measured.skipped,
        notes=notes,
    )
    if with_spectrum:
        try:
            levels = fd_spectrum(p, grid, n_states, record=r, method=fd_method)
        except OracleError as e:
            report.notes.append(f"fd spectrum unavailable: {e}")
        else:
            energy = float(r.energy)
            nearest = min(levels, key=lambda e: abs(e - energy))
            report.fd_eigenvalue = nearest
            report.fd_gap = abs(nearest - energy)
    return report


def write_profile_csv(path: Path, p: ProblemSpec, r: SolutionRecord, grid: Grid | None = None) -> int:
    """Dump (x, ψ(x), residual(x)) rows for plotting. Returns the row count."""
    grid = grid or Grid.for_problem(p)
    basis = Basis(p, span=(grid.bounds[0] - grid.spacing, grid.bounds[1] + grid.spacing))
    table = _potential_table(p, r)
    energy = float(r.energy)
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "psi", "residual"])
        for x in grid.points():
            x = float(x)
            try:
                value = eval_psi(p, r, x, basis)
                d2 = _second_derivative(lambda t: eval_psi(p, r, t, basis), x, _stencil_step(grid, x))
                v = potential_at(basis, table, x)
            except PointSingular:
                continue
            writer.writerow([repr(x), repr(value), repr(-d2 + (v - energy) * value)])
            rows += 1
    return rows


# ---------------------------------------------------------------------------
# Finite-difference spectrum
# ---------------------------------------------------------------------------

def _fd_levels(
    kind: str, lo: float, hi: float, n: int, v_of: Callable[[np.ndarray], np.ndarray],
    n_states: int, method: str,
) -> np.ndarray:
    if kind == DOMAIN_PERIODIC:
        step = (hi - lo) / n
        x = lo + step * np.arange(n)
    else:
        step = (hi - lo) / (n + 1)
        x = lo + step * np.arange(1, n + 1)
    v = v_of(x)
    if method == METHOD_NUMEROV:
        shift = np.eye(n, k=1) + np.eye(n, k=-1)
        if kind == DOMAIN_PERIODIC:
            shift[0, -1] = shift[-1, 0] = 1.0
        kin = (2.0 * np.eye(n) - shift) / step ** 2
        mass = (shift + 10.0 * np.eye(n)) / 12.0
        w = linalg.eig(kin + mass @ np.diag(v), mass, right=False)
        levels = np.sort(np.real(w[np.isfinite(w)]))
        return levels[:n_states]
    if kind == DOMAIN_PERIODIC:
        ham = np.diag(2.0 / step ** 2 + v) - (np.eye(n, k=1) + np.eye(n, k=-1)) / step ** 2
        ham[0, -1] = ham[-1, 0] = -1.0 / step ** 2
        return linalg.eigh(ham, eigvals_only=True, subset_by_index=[0, n_states - 1])
    diag = 2.0 / step ** 2 + v
    off = np.full(n - 1, -1.0 / step ** 2)
    return linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, n_states - 1))


def fd_spectrum(
    p: ProblemSpec,
    grid: Grid | None = None,
    n_states: int = DEFAULT_N_STATES,
    record: SolutionRecord | None = None,
    method: str = METHOD_THREE_POINT,
) -> list[float]:
    """
    Lowest eigenvalues of the discretized Hamiltonian −d²/dx² + V.

    Dirichlet walls on line and half-line grids, wrap-around on periodic
    ones. Two grids with halved spacing are combined by Richardson
    extrapolation (order 2 for three-point, order 4 for Numerov).
    """
    grid = grid or Grid.for_problem(p)
    basis = Basis(p, span=grid.bounds)
    table = _potential_table(p, record)

    def v_of(xs: np.ndarray) -> np.ndarray:
        try:
            return np.array([potential_at(basis, table, float(x)) for x in xs])
        except PointSingular as e:
            raise OracleError(f"potential not evaluable on the grid: {e}") from e

    lo, hi = grid.bounds
    if grid.kind == DOMAIN_HALF_LINE:
        lo = grid.eps
    n = grid.n_pts
    n_fine = 2 * n if grid.kind == DOMAIN_PERIODIC else 2 * n + 1
    coarse = _fd_levels(grid.kind, lo, hi, n, v_of, n_states, method)
    fine = _fd_levels(grid.kind, lo, hi, n_fine, v_of, n_states, method)
    count = min(len(coarse), len(fine))
    factor = 15.0 if method == METHOD_NUMEROV else 3.0
    extrapolated = fine[:count] + (fine[:count] - coarse[:count]) / factor
    return [float(e) for e in extrapolated]
