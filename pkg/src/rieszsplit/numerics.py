"""Exact and guarded scalar arithmetic.

Every floor or ceiling taken on a lattice point goes through this module so
that rational inputs are handled exactly and irrational inputs (supplied as
high-precision approximants) report near-integer results instead of silently
picking a side.

A guarded scalar stores a dyadic approximant (a :class:`fractions.Fraction`
with a power-of-two denominator) of ``prec`` significant bits together with a
``guard``.  Arithmetic on approximants is exact and re-rounded to ``prec``
bits, so the accumulated error stays near ``2**-prec`` and far below any
sensible guard.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np

DEFAULT_PRECISION = 256
DEFAULT_GUARD = 1e-12
INTEGER_LIMIT = 2**62


class NumericsError(ArithmeticError):
    """Base class for arithmetic failures raised by this package."""


class TieError(NumericsError):
    """A guarded floor landed within the guard of an integer."""


class RangeError(NumericsError, OverflowError):
    """A floor result left the supported integer range."""


def _round_to_bits(x: Fraction, prec: int) -> Fraction:
    """Round ``x`` to ``prec`` significant bits (round half to even)."""
    if x == 0:
        return Fraction(0)
    p, q = x.numerator, x.denominator
    # exact binary exponent, so the result does not depend on how x is written
    e = abs(p).bit_length() - q.bit_length()
    if (abs(p) << max(0, -e)) < (q << max(0, e)):
        e -= 1
    shift = prec - 1 - e
    if shift >= 0:
        n = round(Fraction(p << shift, q))
        return Fraction(n, 1 << shift)
    n = round(Fraction(p, q << -shift))
    return Fraction(n << -shift)


@dataclass(frozen=True, eq=False)
class ExactScalar:
    """A rational number or a guarded approximation of an irrational one.

    ``guard is None`` marks an exact rational; otherwise ``value`` is a dyadic
    approximant and ``guard`` the tie tolerance used by :meth:`floor_with_tie`.
    """

    value: Fraction
    guard: Optional[float] = None
    prec: int = DEFAULT_PRECISION

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))
        if self.guard is not None:
            if not self.guard > 0:
                raise ValueError("guard must be positive")
            object.__setattr__(self, "value", _round_to_bits(self.value, self.prec))

    # -- construction ---------------------------------------------------
    @classmethod
    def rational(cls, num: Union[int, Fraction, str], den: int = 1) -> "ExactScalar":
        return cls(Fraction(num) / den)

    @classmethod
    def guarded(cls, value, guard: float = DEFAULT_GUARD,
                prec: int = DEFAULT_PRECISION) -> "ExactScalar":
        """Wrap ``value`` (decimal string, float, Fraction or mpmath number)."""
        if isinstance(value, str):
            value = Fraction(Decimal(value.strip()))
        elif hasattr(value, "man") and hasattr(value, "exp"):  # mpmath.mpf
            man, exp = int(value.man), int(value.exp)
            value = Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)
        else:
            value = Fraction(value)
        return cls(value, float(guard), int(prec))

    @property
    def is_exact(self) -> bool:
        return self.guard is None

    # -- arithmetic -----------------------------------------------------
    def _combine(self, other: "ExactScalar", value: Fraction) -> "ExactScalar":
        guards = [g for g in (self.guard, other.guard) if g is not None]
        if not guards:
            return ExactScalar(value)
        return ExactScalar(value, max(guards), max(self.prec, other.prec))

    def __add__(self, other):
        other = as_scalar(other)
        return self._combine(other, self.value + other.value)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_scalar(other)
        return self._combine(other, self.value - other.value)

    def __rsub__(self, other):
        return as_scalar(other) - self

    def __mul__(self, other):
        other = as_scalar(other)
        return self._combine(other, self.value * other.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_scalar(other)
        if other.value == 0:
            raise ZeroDivisionError("division by zero scalar")
        return self._combine(other, self.value / other.value)

    def __rtruediv__(self, other):
        return as_scalar(other) / self

    def __neg__(self):
        return ExactScalar(-self.value, self.guard, self.prec)

    def __abs__(self):
        return ExactScalar(abs(self.value), self.guard, self.prec)

    # -- comparison uses the stored value ---------------------------------
    def _cmp_value(self, other) -> Fraction:
        if isinstance(other, float):
            return Fraction(other)
        return as_scalar(other).value

    def __eq__(self, other):
        try:
            return self.value == self._cmp_value(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.value, self.guard))

    def __lt__(self, other):
        return self.value < self._cmp_value(other)

    def __le__(self, other):
        return self.value <= self._cmp_value(other)

    def __gt__(self, other):
        return self.value > self._cmp_value(other)

    def __ge__(self, other):
        return self.value >= self._cmp_value(other)

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        if self.is_exact:
            return f"ExactScalar({self.value})"
        return f"ExactScalar(~{to_decimal_string(self.value, 20)}, guard={self.guard:g})"

    # -- rounding ---------------------------------------------------------
    def floor_with_tie(self) -> Tuple[int, bool]:
        """Floor and a flag telling whether the value sits within guard of an integer."""
        n = math.floor(self.value)
        if abs(n) > INTEGER_LIMIT:
            raise RangeError(f"floor {n} outside supported range")
        if self.is_exact:
            return n, False
        frac = self.value - n
        g = Fraction(self.guard)
        return n, bool(frac < g or 1 - frac < g)

    def floor(self, strict: bool = True) -> int:
        n, tie = self.floor_with_tie()
        if tie and strict:
            raise TieError(
                f"value {self!r} is within guard {self.guard:g} of an integer; "
                "input indistinguishable from rational at this precision")
        return n

    def ceil(self, strict: bool = True) -> int:
        return -(-self).floor(strict)

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        if self.is_exact:
            return {"rational": [self.value.numerator, self.value.denominator]}
        digits = int(self.prec * 0.30103) + 3
        return {"float": to_decimal_string(self.value, digits), "guard": self.guard,
                "prec": self.prec}

    @classmethod
    def from_json(cls, obj) -> "ExactScalar":
        if isinstance(obj, (int, float, str)):
            return parse_scalar(str(obj))
        if "rational" in obj:
            num, den = obj["rational"]
            return cls(Fraction(int(num), int(den)))
        if "float" in obj:
            return cls.guarded(str(obj["float"]), obj.get("guard", DEFAULT_GUARD),
                               obj.get("prec", DEFAULT_PRECISION))
        raise ValueError(f"not a scalar: {obj!r}")


def to_decimal_string(x: Fraction, digits: int) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(x.numerator) / Decimal(x.denominator))


def as_scalar(x) -> ExactScalar:
    """Coerce ints, Fractions and ExactScalars; floats become guarded values."""
    if isinstance(x, ExactScalar):
        return x
    if isinstance(x, (int, np.integer, Fraction)):
        return ExactScalar(Fraction(int(x)) if isinstance(x, np.integer) else Fraction(x))
    if isinstance(x, (float, np.floating)):
        return ExactScalar.guarded(float(x))
    if isinstance(x, str):
        return parse_scalar(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as a scalar")


def floor_scaled(x, beta) -> Tuple[int, bool]:
    """Return ``(floor(beta * x), tie_flag)``."""
    beta = as_scalar(beta)
    if beta.value <= 0:
        raise ValueError("beta must be positive")
    return (as_scalar(x) * beta).floor_with_tie()


def lowest_terms_ratio(a, total) -> Optional[Tuple[int, int]]:
    """``(N0, K0)`` with ``a / total = N0 / K0`` reduced, or None when not rational."""
    a, total = as_scalar(a), as_scalar(total)
    if not (a.is_exact and total.is_exact):
        return None
    if not 0 < a.value < total.value:
        raise ValueError("need 0 < a < total")
    r = a.value / total.value
    return r.numerator, r.denominator


# -- named constants --------------------------------------------------------

def sqrt(x, guard: float = DEFAULT_GUARD, prec: int = DEFAULT_PRECISION) -> ExactScalar:
    """Square root; exact when ``x`` is a rational square."""
    x = as_scalar(x)
    if x.value < 0:
        raise ValueError("square root of a negative number")
    p, q = x.value.numerator, x.value.denominator
    rp, rq = math.isqrt(p), math.isqrt(q)
    if x.is_exact and rp * rp == p and rq * rq == q:
        return ExactScalar(Fraction(rp, rq))
    # sqrt(p/q) = sqrt(p*q)/q, evaluated with prec + 8 extra bits
    extra = prec + 8
    shift = max(0, 2 * extra - (p * q).bit_length() + 2)
    shift += shift % 2
    root = math.isqrt((p * q) << shift)
    g = guard if x.is_exact else max(guard, x.guard)
    return ExactScalar(Fraction(root, q << (shift // 2)), g, prec)


def sqrt2inv(guard: float = DEFAULT_GUARD, prec: int = DEFAULT_PRECISION) -> ExactScalar:
    """1/sqrt(2)."""
    return sqrt(Fraction(1, 2), guard, prec)


def golden(guard: float = DEFAULT_GUARD, prec: int = DEFAULT_PRECISION) -> ExactScalar:
    """(sqrt(5) - 1) / 2, the fractional golden ratio."""
    return (sqrt(5, guard, prec) - 1) / 2


def inv_pi(guard: float = DEFAULT_GUARD, prec: int = DEFAULT_PRECISION) -> ExactScalar:
    import mpmath

    with mpmath.workprec(prec + 16):
        return ExactScalar.guarded(1 / mpmath.pi, guard, prec)


NAMED_CONSTANTS = {"sqrt2inv": sqrt2inv, "golden": golden, "invpi": inv_pi}

def _parse_term(term: str, guard: float, prec: int) -> ExactScalar:
    term = term.strip()
    if term in NAMED_CONSTANTS:
        return NAMED_CONSTANTS[term](guard, prec)
    if term.startswith("irr:"):
        return ExactScalar.guarded(term[4:], guard, prec)
    if re.fullmatch(r"\d+(/\d+)?", term):
        return ExactScalar(Fraction(term))
    if re.fullmatch(r"\d*\.\d+(e-?\d+)?|\d+e-?\d+", term):
        # plain decimals are exact rationals; use irr: to mark an approximation
        return ExactScalar(Fraction(Decimal(term)))
    raise ValueError(f"cannot parse scalar term {term!r}")


def parse_scalar(text: str, guard: float = DEFAULT_GUARD,
                 prec: int = DEFAULT_PRECISION) -> ExactScalar:
    """Parse ``p/q``, ``irr:<decimal>``, a named constant, or a +/- chain of them.

    >>> parse_scalar("1-sqrt2inv") < parse_scalar("1/2")
    True
    """
    terms = _split_terms(text)
    total = None
    for sign, body in terms:
        term = _parse_term(body, guard, prec)
        if sign == "-":
            term = -term
        total = term if total is None else total + term
    return total


def _split_terms(text: str):
    """Split on binary +/- while leaving exponent signs such as ``1e-5`` alone."""
    terms, sign, start = [], "+", 0
    text = text.strip()
    if not text:
        raise ValueError("empty scalar")
    if text[0] in "+-":
        sign, start = text[0], 1
    for i in range(start, len(text)):
        ch = text[i]
        if ch not in "+-":
            continue
        prev = text[i - 1] if i else ""
        if prev in "eE" and i >= 2 and text[i - 2].isdigit():
            continue
        body = text[start:i].strip()
        if not body:
            raise ValueError(f"cannot parse scalar {text!r}")
        terms.append((sign, body))
        sign, start = ch, i + 1
    body = text[start:].strip()
    if not body:
        raise ValueError(f"cannot parse scalar {text!r}")
    terms.append((sign, body))
    return terms


# -- vectorized floors --------------------------------------------------------

def _int_object_array(n) -> np.ndarray:
    arr = np.asarray(n)
    if arr.dtype.kind not in "iuO":
        raise TypeError("integer array required")
    return arr.astype(object)


def floor_linear(n, scale, shift=0) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized ``floor(n * scale + shift)`` for an integer array ``n``.

    Returns ``(floors, ties)`` where ``ties`` flags entries within guard of an
    integer.  Exact inputs never produce ties.  Arithmetic is on integers, so
    results are exact for the stored approximants.
    """
    scale, shift = as_scalar(scale), as_scalar(shift)
    floors, rem, den = _floor_parts(n, scale, shift)
    ties = _ties(rem, den, scale, shift)
    return floors, ties


def _floor_parts(n, scale: ExactScalar, shift: ExactScalar):
    n = np.asarray(n)
    p, q = scale.value.numerator, scale.value.denominator
    u, v = shift.value.numerator, shift.value.denominator
    num_coef, num_off, den = p * v, u * q, q * v
    bound = (int(np.abs(n).max()) if n.size else 0) * abs(num_coef) + abs(num_off)
    if bound < 2**62 and den < 2**62:
        numer = n.astype(np.int64) * np.int64(num_coef) + np.int64(num_off)
        floors, rem = np.divmod(numer, np.int64(den))
        return floors.astype(np.int64), rem, den
    numer = _int_object_array(n) * num_coef + num_off
    floors = numer // den
    rem = numer - floors * den
    if floors.size and (np.abs(floors).max() > INTEGER_LIMIT):
        raise RangeError("floor outside supported range")
    return floors.astype(np.int64), rem, den


def _ties(rem, den: int, scale: ExactScalar, shift: ExactScalar) -> np.ndarray:
    guards = [g for g in (scale.guard, shift.guard) if g is not None]
    if not guards:
        return np.zeros(np.shape(rem), dtype=bool)
    g = Fraction(max(guards)) * den
    limit = g.numerator // g.denominator + 1
    rem = np.asarray(rem, dtype=object)
    return np.asarray((rem < limit) | (den - rem < limit), dtype=bool)


def fractional_linear(n, scale, shift=0) -> np.ndarray:
    """Fractional parts of ``n * scale + shift`` as float64, computed from exact remainders."""
    scale, shift = as_scalar(scale), as_scalar(shift)
    _, rem, den = _floor_parts(n, scale, shift)
    if isinstance(rem, np.ndarray) and rem.dtype != object:
        return rem.astype(np.float64) / float(den)
    return np.array([r / den for r in rem.tolist()], dtype=np.float64)


def strict_floor_linear(n, scale, shift=0) -> np.ndarray:
    """Like :func:`floor_linear` but raise :class:`TieError` on any tie."""
    floors, ties = floor_linear(n, scale, shift)
    if ties.any():
        idx = int(np.asarray(n).ravel()[int(np.argmax(ties))]) if np.ndim(n) else int(n)
        raise TieError(f"floor at index {idx} is within guard of an integer; "
                       "input indistinguishable from rational at this precision")
    return floors
