"""
Problem model for the QES engine.

A ProblemSpec describes one stationary Schrödinger problem in series form:
the potential as powers of a factor function f, the basis function h through
its derivative h', the exponential/log weight, the ansatz order N, the domain
and the set of quantities left unknown.

Problem documents are JSON. Sequences are {"index": value} maps whose values
are numbers or exact "p/q" strings. See docs/PROBLEM_FORMAT.md.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from core.coeffseq import (
    CoeffSeq,
    CoeffSeqError,
    Scalar,
    ZERO,
    parse_scalar,
    scalar_to_json,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

MODE_SIMPLE = "simple"
MODE_GENERAL = "general"
VALID_MODES = (MODE_SIMPLE, MODE_GENERAL)

DOMAIN_FULL_LINE = "full-line"
DOMAIN_HALF_LINE = "half-line"
DOMAIN_PERIODIC = "periodic"
VALID_DOMAINS = (DOMAIN_FULL_LINE, DOMAIN_HALF_LINE, DOMAIN_PERIODIC)

EVALUATOR_IDENTITY = "identity"
EVALUATOR_JACOBI_SC = "jacobi_sc"
EVALUATOR_NUMERIC = "numeric"
VALID_EVALUATORS = (EVALUATOR_IDENTITY, EVALUATOR_JACOBI_SC, EVALUATOR_NUMERIC)

# Signed continuations of f^(1/2) the oracle knows: 1/sn for f = 1 + h^-2 in the
# sn/cn basis, h for f = h^2.
VALID_F_ROOTS = ("1/sn", "h")

_TOP_LEVEL_KEYS = {
    "schema_version",
    "name",
    "mode",
    "potential",
    "basis",
    "weight",
    "ansatz",
    "domain",
    "unknowns",
}

DELTA0 = CoeffSeq.delta(0)


class ProblemParseError(Exception):
    """Raised when a problem document cannot be turned into a ProblemSpec."""

    def __init__(self, source: str, errors: list[str]) -> None:
        self.source = source
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning" | "info"
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}[{self.code}]: {self.message}"


@dataclass(frozen=True)
class PotentialKey:
    """
    An adjustable potential entry.

    With only ``k`` set the whole amplitude V_k is unknown; with ``l`` set the
    single modulation coefficient v_{l,k} is unknown while V_k stays given.
    """

    k: int
    l: int | None = None

    @property
    def name(self) -> str:
        if self.l is None:
            return f"V[{self.k}]"
        return f"v[{self.l},{self.k}]"

    def to_json(self) -> dict[str, int]:
        if self.l is None:
            return {"k": self.k}
        return {"k": self.k, "l": self.l}


@dataclass(frozen=True)
class PotentialSpec:
    vmin: int
    vmax: int
    vk: dict[int, Scalar] = field(default_factory=dict)
    modulation: dict[int, CoeffSeq] = field(default_factory=dict)

    def amplitude(self, k: int) -> Scalar:
        return self.vk.get(k, ZERO)

    def modulator(self, k: int) -> CoeffSeq:
        return self.modulation.get(k, DELTA0)


@dataclass(frozen=True)
class BasisEvaluator:
    """Closed-form (or numeric) evaluation of h(x) for the verification oracle."""

    kind: str = EVALUATOR_IDENTITY
    params: dict[str, Scalar] = field(default_factory=dict)
    anchor: tuple[float, float] | None = None
    f_root: str | None = None


@dataclass(frozen=True)
class BasisSpec:
    hprime_poly: CoeffSeq
    hprime_sqrt: CoeffSeq
    f0: CoeffSeq
    evaluator: BasisEvaluator = field(default_factory=BasisEvaluator)


@dataclass(frozen=True)
class WeightSpec:
    gtilde: CoeffSeq = field(default_factory=CoeffSeq)
    glog: Scalar = ZERO
    unknown_mask: frozenset[int] = frozenset()
    glog_unknown: bool = False


@dataclass(frozen=True)
class AnsatzSpec:
    n: int
    lam: Scalar | None = None
    c_window: tuple[int, int] | None = None
    pivot: int | None = None

    @property
    def lambda_unknown(self) -> bool:
        return self.lam is None


@dataclass(frozen=True)
class DomainSpec:
    kind: str = DOMAIN_FULL_LINE
    length: float | None = None
    period: float | None = None


@dataclass(frozen=True)
class ProblemSpec:
    potential: PotentialSpec
    basis: BasisSpec
    weight: WeightSpec
    ansatz: AnsatzSpec
    domain: DomainSpec = field(default_factory=DomainSpec)
    adjustable: tuple[PotentialKey, ...] = ()
    mode: str = MODE_GENERAL
    name: str = "custom"

    @property
    def vstar(self) -> int:
        """Power of f factored out of the residual: max(Vmin, 2), always 2 in simple mode."""
        if self.mode == MODE_SIMPLE:
            return 2
        return max(self.potential.vmin, 2)

    @property
    def c_window(self) -> tuple[int, int]:
        if self.ansatz.c_window is not None:
            return self.ansatz.c_window
        n = self.ansatz.n
        return (0, n) if self.mode == MODE_SIMPLE else (-n, n)

    def with_order(self, n: int) -> ProblemSpec:
        """Same problem at expansion order n (default window re-derived)."""
        return replace(self, ansatz=replace(self.ansatz, n=n, c_window=None))

    def with_mode(self, mode: str) -> ProblemSpec:
        return replace(self, mode=mode, ansatz=replace(self.ansatz, c_window=None))

    def potential_keys(self) -> list[int]:
        keys = {k for k, v in self.potential.vk.items() if v != 0}
        keys |= {key.k for key in self.adjustable}
        return sorted(keys)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _seq(value: Any, path: str, errors: list[str], default: CoeffSeq | None = None) -> CoeffSeq:
    if value is None:
        return default if default is not None else CoeffSeq()
    try:
        return CoeffSeq.from_json(value)
    except CoeffSeqError as e:
        errors.append(f"{path}: {e}")
        return CoeffSeq()


def _scalar(value: Any, path: str, errors: list[str], default: Scalar = ZERO) -> Scalar:
    if value is None:
        return default
    try:
        return parse_scalar(value)
    except CoeffSeqError as e:
        errors.append(f"{path}: {e}")
        return default


def _int(value: Any, path: str, errors: list[str], default: int = 0) -> int:
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{path} must be an integer")
        return default
    return value


def _section(doc: Mapping[str, Any], key: str, errors: list[str]) -> Mapping[str, Any]:
    value = doc.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        errors.append(f"{key} must be an object")
        return {}
    return value


def parse_problem(doc: Any, source: str = "<document>") -> ProblemSpec:
    """
    Build a ProblemSpec from a decoded problem document.

    Args:
        doc: Decoded JSON object
        source: Name used in error messages

    Returns:
        Parsed ProblemSpec (not yet validated)

    Raises:
        ProblemParseError: if the document is structurally malformed.
    """
    if not isinstance(doc, Mapping):
        raise ProblemParseError(source, ["top level must be an object"])

    errors: list[str] = []
    for key in doc:
        if key not in _TOP_LEVEL_KEYS:
            errors.append(f"unknown top-level key: {key}")

    mode = doc.get("mode", MODE_GENERAL)
    if mode not in VALID_MODES:
        errors.append(f"mode must be one of {', '.join(VALID_MODES)}")
        mode = MODE_GENERAL

    pot = _section(doc, "potential", errors)
    vmin = _int(pot.get("vmin"), "potential.vmin", errors)
    vmax = _int(pot.get("vmax"), "potential.vmax", errors)
    vk: dict[int, Scalar] = {}
    raw_v = pot.get("V", {}) or {}
    if not isinstance(raw_v, Mapping):
        errors.append("potential.V must be an object")
        raw_v = {}
    for key, value in raw_v.items():
        try:
            k = int(str(key))
        except ValueError:
            errors.append(f"potential.V key is not an integer: {key!r}")
            continue
        vk[k] = _scalar(value, f"potential.V.{key}", errors)
    modulation: dict[int, CoeffSeq] = {}
    raw_mod = pot.get("modulation", {}) or {}
    if not isinstance(raw_mod, Mapping):
        errors.append("potential.modulation must be an object")
        raw_mod = {}
    for key, value in raw_mod.items():
        try:
            k = int(str(key))
        except ValueError:
            errors.append(f"potential.modulation key is not an integer: {key!r}")
            continue
        modulation[k] = _seq(value, f"potential.modulation.{key}", errors)

    basis_doc = _section(doc, "basis", errors)
    ev_doc = basis_doc.get("evaluator", {}) or {}
    if not isinstance(ev_doc, Mapping):
        errors.append("basis.evaluator must be an object")
        ev_doc = {}
    ev_kind = ev_doc.get("kind", EVALUATOR_IDENTITY)
    if ev_kind not in VALID_EVALUATORS:
        errors.append(f"basis.evaluator.kind must be one of {', '.join(VALID_EVALUATORS)}")
        ev_kind = EVALUATOR_IDENTITY
    ev_params = {
        str(k): _scalar(v, f"basis.evaluator.params.{k}", errors)
        for k, v in (ev_doc.get("params", {}) or {}).items()
    }
    anchor = None
    if ev_doc.get("anchor") is not None:
        raw_anchor = ev_doc["anchor"]
        if isinstance(raw_anchor, (list, tuple)) and len(raw_anchor) == 2:
            anchor = (
                float(_scalar(raw_anchor[0], "basis.evaluator.anchor[0]", errors)),
                float(_scalar(raw_anchor[1], "basis.evaluator.anchor[1]", errors)),
            )
        else:
            errors.append("basis.evaluator.anchor must be [x0, h0]")
    evaluator = BasisEvaluator(
        kind=ev_kind, params=ev_params, anchor=anchor, f_root=ev_doc.get("f_root")
    )
    basis = BasisSpec(
        hprime_poly=_seq(basis_doc.get("hprime_poly"), "basis.hprime_poly", errors, DELTA0),
        hprime_sqrt=_seq(basis_doc.get("hprime_sqrt"), "basis.hprime_sqrt", errors, DELTA0),
        f0=_seq(basis_doc.get("f0"), "basis.f0", errors),
        evaluator=evaluator,
    )

    unknowns = _section(doc, "unknowns", errors)
    weight_doc = _section(doc, "weight", errors)
    mask_raw = unknowns.get("gtilde", []) or []
    mask: set[int] = set()
    if not isinstance(mask_raw, list):
        errors.append("unknowns.gtilde must be a list of indices")
    else:
        for item in mask_raw:
            mask.add(_int(item, "unknowns.gtilde[]", errors))
    weight = WeightSpec(
        gtilde=_seq(weight_doc.get("gtilde"), "weight.gtilde", errors),
        glog=_scalar(weight_doc.get("glog"), "weight.glog", errors),
        unknown_mask=frozenset(mask),
        glog_unknown=bool(unknowns.get("glog", False)),
    )

    ansatz_doc = _section(doc, "ansatz", errors)
    n = _int(ansatz_doc.get("N"), "ansatz.N", errors)
    lam_unknown = bool(unknowns.get("lambda", ansatz_doc.get("lambda") is None))
    lam = None if lam_unknown else _scalar(ansatz_doc.get("lambda"), "ansatz.lambda", errors)
    c_window = None
    if ansatz_doc.get("c_window") is not None:
        raw_window = ansatz_doc["c_window"]
        if isinstance(raw_window, (list, tuple)) and len(raw_window) == 2:
            c_window = (
                _int(raw_window[0], "ansatz.c_window[0]", errors),
                _int(raw_window[1], "ansatz.c_window[1]", errors),
            )
        else:
            errors.append("ansatz.c_window must be [lo, hi]")
    pivot = ansatz_doc.get("pivot")
    ansatz = AnsatzSpec(
        n=n,
        lam=lam,
        c_window=c_window,
        pivot=None if pivot is None else _int(pivot, "ansatz.pivot", errors),
    )

    domain_doc = _section(doc, "domain", errors)
    kind = domain_doc.get("kind", DOMAIN_FULL_LINE)
    if kind not in VALID_DOMAINS:
        errors.append(f"domain.kind must be one of {', '.join(VALID_DOMAINS)}")
        kind = DOMAIN_FULL_LINE
    domain = DomainSpec(
        kind=kind,
        length=None if domain_doc.get("length") is None
        else float(_scalar(domain_doc.get("length"), "domain.length", errors)),
        period=None if domain_doc.get("period") is None
        else float(_scalar(domain_doc.get("period"), "domain.period", errors)),
    )

    adjustable: list[PotentialKey] = []
    for idx, item in enumerate(unknowns.get("potential", []) or []):
        if not isinstance(item, Mapping) or "k" not in item:
            errors.append(f"unknowns.potential[{idx}] must be an object with 'k'")
            continue
        k = _int(item.get("k"), f"unknowns.potential[{idx}].k", errors)
        l = item.get("l")
        adjustable.append(
            PotentialKey(k=k, l=None if l is None else _int(l, f"unknowns.potential[{idx}].l", errors))
        )

    if errors:
        raise ProblemParseError(source, errors)

    return ProblemSpec(
        potential=PotentialSpec(vmin=vmin, vmax=vmax, vk=vk, modulation=modulation),
        basis=basis,
        weight=weight,
        ansatz=ansatz,
        domain=domain,
        adjustable=tuple(adjustable),
        mode=mode,
        name=str(doc.get("name", "custom")),
    )


def load_problem(path: Path) -> ProblemSpec:
    """Read and parse a JSON problem document from disk."""
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemParseError(str(path), [f"cannot read file: {e}"]) from e
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ProblemParseError(
            str(path), [f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"]
        ) from e
    return parse_problem(doc, source=str(path))


def problem_to_json(p: ProblemSpec) -> dict[str, Any]:
    """Serialize a ProblemSpec back into the document format."""
    ev = p.basis.evaluator
    evaluator: dict[str, Any] = {"kind": ev.kind}
    if ev.params:
        evaluator["params"] = {k: scalar_to_json(v) for k, v in sorted(ev.params.items())}
    if ev.anchor is not None:
        evaluator["anchor"] = [ev.anchor[0], ev.anchor[1]]
    if ev.f_root is not None:
        evaluator["f_root"] = ev.f_root

    ansatz: dict[str, Any] = {"N": p.ansatz.n}
    if p.ansatz.lam is not None:
        ansatz["lambda"] = scalar_to_json(p.ansatz.lam)
    if p.ansatz.c_window is not None:
        ansatz["c_window"] = list(p.ansatz.c_window)
    if p.ansatz.pivot is not None:
        ansatz["pivot"] = p.ansatz.pivot

    domain: dict[str, Any] = {"kind": p.domain.kind}
    if p.domain.length is not None:
        domain["length"] = p.domain.length
    if p.domain.period is not None:
        domain["period"] = p.domain.period

    return {
        "schema_version": SCHEMA_VERSION,
        "name": p.name,
        "mode": p.mode,
        "potential": {
            "vmin": p.potential.vmin,
            "vmax": p.potential.vmax,
            "V": {str(k): scalar_to_json(v) for k, v in sorted(p.potential.vk.items())},
            "modulation": {
                str(k): s.to_json() for k, s in sorted(p.potential.modulation.items())
            },
        },
        "basis": {
            "hprime_poly": p.basis.hprime_poly.to_json(),
            "hprime_sqrt": p.basis.hprime_sqrt.to_json(),
            "f0": p.basis.f0.to_json(),
            "evaluator": evaluator,
        },
        "weight": {
            "gtilde": p.weight.gtilde.to_json(),
            "glog": scalar_to_json(p.weight.glog),
        },
        "ansatz": ansatz,
        "domain": domain,
        "unknowns": {
            "gtilde": sorted(p.weight.unknown_mask),
            "glog": p.weight.glog_unknown,
            "lambda": p.ansatz.lambda_unknown,
            "potential": [key.to_json() for key in p.adjustable],
        },
    }


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)


def validate(p: ProblemSpec) -> list[Diagnostic]:
    """
    Check every structural rule of a ProblemSpec.

    Returns all violations as diagnostics; an error-free list means the problem
    is well-formed. The active j-window of the assembled system is appended
    as an info diagnostic whenever the problem is otherwise sound.
    """
    diags: list[Diagnostic] = []

    def err(code: str, message: str) -> None:
        diags.append(Diagnostic("error", code, message))

    def warn(code: str, message: str) -> None:
        diags.append(Diagnostic("warning", code, message))

    pot = p.potential
    if p.ansatz.n < 0:
        err("ansatz-order", "N must be nonnegative")
    if pot.vmin < 0 or pot.vmax < 0:
        err("potential-range", "Vmin and Vmax must be nonnegative")
    for k in pot.vk:
        if not -pot.vmin <= k <= pot.vmax:
            err("potential-key", f"V key {k} outside [-{pot.vmin}, {pot.vmax}]")
    for k in pot.modulation:
        if not -pot.vmin <= k <= pot.vmax:
            err("potential-key", f"modulation key {k} outside [-{pot.vmin}, {pot.vmax}]")

    if p.basis.f0.is_zero:
        err("f0-zero", "f0 must not vanish identically")
    if p.basis.hprime_poly.is_zero:
        err("hprime-zero", "hprime_poly must not vanish identically")
    if p.basis.hprime_sqrt.is_zero:
        err("hprime-zero", "hprime_sqrt must not vanish identically")

    overlap = sorted(i for i in p.weight.unknown_mask if p.weight.gtilde[i] != 0)
    if overlap:
        err("weight-mask", f"weight indices both given and unknown: {overlap}")
    if 0 in p.weight.unknown_mask:
        warn("weight-mask", "gtilde[0] only rescales psi and is left at its given value")

    lo, hi = p.c_window
    if lo > hi:
        err("c-window", f"c_window [{lo}, {hi}] is empty")
    if p.ansatz.pivot is not None and not lo <= p.ansatz.pivot <= hi:
        err("pivot", f"pivot {p.ansatz.pivot} outside c_window [{lo}, {hi}]")

    if p.mode == MODE_SIMPLE:
        if p.basis.hprime_sqrt != DELTA0:
            err("simple-sqrt", "simple mode requires hprime_sqrt = delta_0")
        if p.weight.glog != 0 or p.weight.glog_unknown:
            err("simple-log", "simple mode forbids log weight")
        if p.c_window != (0, p.ansatz.n):
            err("simple-window", "simple mode requires c_window = [0, N]")
        if pot.vmin > 2:
            err("simple-vmin", "simple mode requires Vmin <= 2")

    negative = [k for k in pot.vk if k < 0 and pot.vk[k] != 0]
    negative += [key.k for key in p.adjustable if key.k < 0]
    if pot.vmin < 2:
        if negative:
            warn("vmin-low", f"Vmin={pot.vmin} with negative powers present; f^(lambda-2) is factored")
        else:
            warn("vmin-low", f"Vmin={pot.vmin} < 2; f^(lambda-2) is factored regardless")

    seen: set[PotentialKey] = set()
    for key in p.adjustable:
        if key in seen:
            err("adjustable", f"{key.name} listed twice")
        seen.add(key)
        if not -pot.vmin <= key.k <= pot.vmax:
            err("adjustable", f"{key.name} outside [-{pot.vmin}, {pot.vmax}]")
        if key.l is not None and pot.amplitude(key.k) == 0:
            err("adjustable", f"{key.name} has no effect because V[{key.k}] = 0")
        if key.l is None and any(o.k == key.k and o.l is not None for o in p.adjustable):
            err("adjustable", f"V[{key.k}] and one of its modulation entries are both adjustable")

    ev = p.basis.evaluator
    if ev.f_root is not None and ev.f_root not in VALID_F_ROOTS:
        err("evaluator", f"f_root must be one of {', '.join(VALID_F_ROOTS)}")
    if ev.f_root == "h" and p.basis.f0.support != (2, 2):
        err("evaluator", "f_root 'h' requires f = c h^2")
    if ev.kind == EVALUATOR_NUMERIC and ev.anchor is None:
        err("evaluator", "numeric evaluator requires an anchor [x0, h0]")
    if ev.kind == EVALUATOR_JACOBI_SC:
        k = ev.params.get("k")
        if k is None or not 0 <= float(k) < 1:
            err("evaluator", "jacobi_sc evaluator requires a modulus 0 <= k < 1")

    if p.domain.kind == DOMAIN_PERIODIC and (p.domain.period is None or p.domain.period <= 0):
        if ev.kind != EVALUATOR_JACOBI_SC:
            err("domain", "periodic domain requires a positive period")
    if p.domain.length is not None and p.domain.length <= 0:
        err("domain", "domain length must be positive")

    if not has_errors(diags):
        # Lazy import: the assembler depends on this module.
        from core.assembler import AssemblyError, support_window

        try:
            j_lo, j_hi = support_window(p)
            diags.append(Diagnostic("info", "j-window", f"active j-window [{j_lo}, {j_hi}]"))
        except AssemblyError as e:
            err("j-window", str(e))
        diags.append(Diagnostic("info", "mode", f"{p.mode} mode, factored power f^(lambda-{p.vstar})"))

    for d in diags:
        if d.severity != "info":
            logger.debug("validate %s: %s", p.name, d)
    return diags


def catalog_presets() -> list[ProblemSpec]:
    """Every bundled preset instantiated at its default parameters."""
    from core.catalog import default_presets

    return [entry.spec for entry in default_presets()]
