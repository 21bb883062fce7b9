"""
Sparse Laurent coefficient sequences.

A CoeffSeq maps integer indices (negative ones included) to scalars. Every
expansion family of the solver engine lives in one: the coefficients of f,
of h' and of the weight, the derived families built from them, and the power
tables of f.

Scalars are either exact rationals (``fractions.Fraction``) or binary
float64. Exact arithmetic is closed; mixing an exact operand with a float one
yields floats and marks the result as promoted.
"""
from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Union

logger = logging.getLogger(__name__)

Scalar = Union[Fraction, float]

ZERO = Fraction(0)
ONE = Fraction(1)

# Float entries at or below this fraction of the largest entry are dropped.
FLOAT_PRUNE_REL = 1e-14


class CoeffSeqError(Exception):
    """Raised for malformed scalars and illegal sequence operations."""


def parse_scalar(value: object) -> Scalar:
    """
    Convert a document or user value into a Scalar.

    Integers and strings ("3", "-7/2", "0.25") become exact Fractions;
    floats stay binary floats.

    Raises:
        CoeffSeqError: for booleans, non-finite floats and unparsable text.
    """
    if isinstance(value, bool):
        raise CoeffSeqError(f"Boolean is not a scalar: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise CoeffSeqError(f"Non-finite scalar: {value!r}")
        return value
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as e:
            raise CoeffSeqError(f"Cannot parse scalar {value!r}: {e}") from e
    raise CoeffSeqError(f"Unsupported scalar type: {type(value).__name__}")


def is_exact(value: object) -> bool:
    return isinstance(value, (Fraction, int)) and not isinstance(value, bool)


def to_float(value: Scalar | int) -> float:
    return float(value)


def scalar_to_json(value: Scalar) -> int | str | float:
    """Exact values serialize as int or "p/q" strings, floats as numbers."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return int(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return value
    return float(value)


def _normalized(raw: Mapping[int, object]) -> dict[int, Scalar]:
    entries: dict[int, Scalar] = {}
    for key, value in raw.items():
        if isinstance(key, bool) or not isinstance(key, int):
            raise CoeffSeqError(f"Index must be an integer: {key!r}")
        scalar = value if isinstance(value, (Fraction, float)) else parse_scalar(value)
        if scalar != 0:
            entries[key] = scalar

    floats = [abs(v) for v in entries.values() if isinstance(v, float)]
    if floats:
        peak = max(abs(float(v)) for v in entries.values())
        cutoff = FLOAT_PRUNE_REL * peak
        entries = {
            k: v for k, v in entries.items()
            if not (isinstance(v, float) and abs(v) <= cutoff)
        }
    return dict(sorted(entries.items()))


class CoeffSeq:
    """
    Immutable finite-support sequence l -> s[l] over the integers.

    Lookup outside the support returns exact zero. The support window
    [lo, hi] is minimal; the zero sequence has an empty window.
    """

    __slots__ = ("_entries", "promoted")

    def __init__(
        self,
        entries: Mapping[int, object] | Iterable[tuple[int, object]] | None = None,
        *,
        promoted: bool = False,
    ) -> None:
        if entries is None:
            raw: dict[int, object] = {}
        elif isinstance(entries, Mapping):
            raw = dict(entries)
        else:
            raw = {}
            for key, value in entries:
                raw[key] = raw.get(key, ZERO) + value  # type: ignore[operator]
        self._entries = _normalized(raw)
        self.promoted = promoted

    # ---- constructors ---------------------------------------------------

    @classmethod
    def delta(cls, index: int = 0, value: object = ONE) -> CoeffSeq:
        return cls({index: value})

    @classmethod
    def zero(cls) -> CoeffSeq:
        return cls()

    @classmethod
    def from_json(cls, data: Mapping[str, object]) -> CoeffSeq:
        """Parse the {"index": value} document encoding."""
        if not isinstance(data, Mapping):
            raise CoeffSeqError("Sequence must be a mapping of index -> value")
        entries: dict[int, Scalar] = {}
        for key, value in data.items():
            try:
                index = int(str(key).strip())
            except ValueError as e:
                raise CoeffSeqError(f"Sequence index is not an integer: {key!r}") from e
            entries[index] = parse_scalar(value)
        return cls(entries)

    # ---- mapping protocol -----------------------------------------------

    def __getitem__(self, index: int) -> Scalar:
        return self._entries.get(index, ZERO)

    def __iter__(self) -> Iterator[int]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)

    def items(self) -> Iterator[tuple[int, Scalar]]:
        return iter(self._entries.items())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoeffSeq):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        return hash(tuple(self._entries.items()))

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self._entries.items())
        return f"CoeffSeq({{{body}}})"

    # ---- support and mode -----------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self._entries

    @property
    def lo(self) -> int:
        return next(iter(self._entries)) if self._entries else 0

    @property
    def hi(self) -> int:
        return next(reversed(self._entries)) if self._entries else -1

    @property
    def support(self) -> tuple[int, int] | None:
        if not self._entries:
            return None
        return self.lo, self.hi

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self._entries.values())

    @property
    def mode(self) -> str:
        return "exact" if self.is_exact else "float"

    def max_abs(self) -> float:
        return max((abs(float(v)) for v in self._entries.values()), default=0.0)

    # ---- arithmetic -----------------------------------------------------

    def _mixes(self, other: CoeffSeq) -> bool:
        if self.is_zero or other.is_zero:
            return self.promoted or other.promoted
        return self.promoted or other.promoted or (self.is_exact != other.is_exact)

    def __add__(self, other: CoeffSeq) -> CoeffSeq:
        out: dict[int, Scalar] = dict(self._entries)
        for k, v in other.items():
            out[k] = out.get(k, ZERO) + v
        return CoeffSeq(out, promoted=self._mixes(other))

    def __sub__(self, other: CoeffSeq) -> CoeffSeq:
        return self + (-other)

    def __neg__(self) -> CoeffSeq:
        return CoeffSeq({k: -v for k, v in self.items()}, promoted=self.promoted)

    def scaled(self, factor: Scalar) -> CoeffSeq:
        mixed = self.promoted or (not self.is_zero and is_exact(factor) != self.is_exact)
        return CoeffSeq({k: factor * v for k, v in self.items()}, promoted=mixed)

    def shifted(self, shift: int) -> CoeffSeq:
        """result[l] = s[l + shift]."""
        return CoeffSeq({k - shift: v for k, v in self.items()}, promoted=self.promoted)

    def derivative(self) -> CoeffSeq:
        """Coefficients of d/du of the series: result[l] = (l+1)·s[l+1]."""
        return weighted_shift(self, lambda l: l + 1, 1)

    def to_float(self) -> CoeffSeq:
        return CoeffSeq({k: float(v) for k, v in self.items()}, promoted=self.promoted)

    def to_json(self) -> dict[str, int | str | float]:
        return {str(k): scalar_to_json(v) for k, v in self.items()}

    def evaluate(self, u: complex | float | Fraction) -> complex | float | Fraction:
        """
        Evaluate Σ s[l]·u^l.

        Exact when both the sequence and u are exact; float sums use
        compensated summation.
        """
        if self.is_zero:
            return ZERO if isinstance(u, Fraction) else 0.0
        if isinstance(u, Fraction) and self.is_exact:
            return sum((v * u ** k for k, v in self.items()), ZERO)
        terms = [complex(float(v)) * complex(u) ** k for k, v in self.items()]
        if isinstance(u, complex):
            return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
        return math.fsum(t.real for t in terms)


def convolve(a: CoeffSeq, b: CoeffSeq) -> CoeffSeq:
    """
    Cauchy product over the integers: result[i] = Σ_j b[j]·a[i−j].

    The result support lies inside [a.lo + b.lo, a.hi + b.hi].
    """
    if a.is_zero or b.is_zero:
        return CoeffSeq(promoted=a.promoted or b.promoted)
    out: dict[int, Scalar] = {}
    for i, x in a.items():
        for j, y in b.items():
            out[i + j] = out.get(i + j, ZERO) + x * y
    return CoeffSeq(out, promoted=a._mixes(b))


def power(f0: CoeffSeq, k: int) -> CoeffSeq:
    """
    k-th convolution power: ⁰f = δ₀ and ᵏf = ᵏ⁻¹f ⊛ f0.

    Raises:
        CoeffSeqError: if k is negative.
    """
    if k < 0:
        raise CoeffSeqError(f"Negative convolution power {k}")
    result = CoeffSeq.delta(0)
    for _ in range(k):
        result = convolve(result, f0)
    return result


def power_table(f0: CoeffSeq, k_max: int) -> list[CoeffSeq]:
    """[⁰f, ¹f, ..., ᵏᵐᵃˣf] built by the recursion, one convolution per step."""
    if k_max < 0:
        return []
    table = [CoeffSeq.delta(0)]
    for _ in range(k_max):
        table.append(convolve(table[-1], f0))
    return table


def scale_shift(s: CoeffSeq, factor: Scalar, shift: int) -> CoeffSeq:
    """result[l] = factor·s[l + shift]."""
    return s.shifted(shift).scaled(factor)


def weighted_shift(s: CoeffSeq, weight: Callable[[int], Scalar | int], shift: int) -> CoeffSeq:
    """result[l] = weight(l)·s[l + shift]."""
    out: dict[int, Scalar] = {}
    for k, v in s.items():
        l = k - shift
        w = weight(l)
        if w:
            out[l] = (Fraction(w) if isinstance(w, int) else w) * v
    return CoeffSeq(out, promoted=s.promoted)
