"""Sparse multivariate polynomials with exact rational coefficients.

A polynomial is an immutable map from exponent tuples to nonzero
coefficients.  Coefficients are ``fractions.Fraction`` (or ``int``) in the
symbolic layer; floats are tolerated so that numeric certificates can reuse
the same arithmetic, but nothing in the exact pipeline produces them.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations
from numbers import Number
from typing import Iterable, Mapping, Sequence

Monomial = tuple[int, ...]

#: degree reported for the zero polynomial
ZERO_DEGREE = -math.inf


def mono_degree(alpha: Monomial) -> int:
    return sum(alpha)


def grlex_key(alpha: Monomial):
    """Sort key for graded lexicographic order (constant first)."""
    return (sum(alpha), alpha)


def _as_coeff(c):
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else c
    if isinstance(c, (int, float)):
        return c
    if isinstance(c, Number):
        return Fraction(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, object] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        self.nvars = nvars
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != nvars:
                raise ValueError(f"monomial {alpha} does not have {nvars} exponents")
            if any(e < 0 for e in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            if c != 0:
                clean[alpha] = _as_coeff(c)
        self._terms = clean
        self._hash = None

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, c) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, {tuple(alpha): 1})

    @classmethod
    def monomial(cls, alpha: Monomial, c=1) -> "Polynomial":
        return cls(len(alpha), {tuple(alpha): c})

    @classmethod
    def _raw(cls, nvars: int, terms: dict) -> "Polynomial":
        # terms already validated and zero-free
        p = cls.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        p._hash = None
        return p

    # basic queries --------------------------------------------------------
    @property
    def terms(self) -> dict[Monomial, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, alpha: Monomial):
        return self._terms.get(tuple(alpha), 0)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(sum(a) == 0 for a in self._terms)

    @property
    def degree(self):
        if not self._terms:
            return ZERO_DEGREE
        return max(sum(a) for a in self._terms)

    def is_homogeneous(self) -> bool:
        return len({sum(a) for a in self._terms}) <= 1

    def is_exact(self) -> bool:
        return all(not isinstance(c, float) for c in self._terms.values())

    def support(self) -> list[Monomial]:
        return sorted(self._terms, key=grlex_key)

    # arithmetic -----------------------------------------------------------
    def _check(self, other: "Polynomial"):
        if other.nvars != self.nvars:
            raise ValueError(
                f"variable-count mismatch: {self.nvars} vs {other.nvars}")

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, Number):
            return Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for a, c in other._terms.items():
            s = out.get(a, 0) + c
            if s == 0:
                out.pop(a, None)
            else:
                out[a] = _as_coeff(s)
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            if other == 0:
                return Polynomial.zero(self.nvars)
            return Polynomial._raw(
                self.nvars, {a: _as_coeff(c * other) for a, c in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check(other)
        out: dict = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                k = tuple(x + y for x, y in zip(a, b))
                out[k] = out.get(k, 0) + ca * cb
        return Polynomial._raw(
            self.nvars, {a: _as_coeff(c) for a, c in out.items() if c != 0})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number) and not isinstance(other, float):
            return self * (Fraction(1) / Fraction(other))
        if isinstance(other, float):
            return self * (1.0 / other)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Number):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"Polynomial({self.nvars}, {render(self)!r})"

    # calculus and evaluation ---------------------------------------------
    def diff(self, var: int) -> "Polynomial":
        return poly_diff(self, var)

    def __call__(self, *point):
        if len(point) == 1 and not isinstance(point[0], Number):
            point = point[0]
        return poly_eval(self, point)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    return a * b


def poly_diff(f: Polynomial, var: int) -> Polynomial:
    if not 0 <= var < f.nvars:
        raise IndexError(f"variable index {var} out of range for {f.nvars} variables")
    out = {}
    for a, c in f.items():
        e = a[var]
        if e:
            b = a[:var] + (e - 1,) + a[var + 1:]
            out[b] = _as_coeff(c * e)
    return Polynomial._raw(f.nvars, out)


def gradient(f: Polynomial) -> list[Polynomial]:
    return [poly_diff(f, i) for i in range(f.nvars)]


def poly_eval(f: Polynomial, point: Sequence):
    """Evaluate ``f`` at ``point``.

    Exact when every coordinate is an ``int``/``Fraction``; otherwise the
    arithmetic follows the scalar type of the coordinates (floats, numpy).
    """
    point = list(point)
    if len(point) != f.nvars:
        raise ValueError(f"point has {len(point)} coordinates, expected {f.nvars}")
    total = 0
    cache: list[dict[int, object]] = [{} for _ in point]
    for a, c in f.items():
        term = c
        for i, e in enumerate(a):
            if e:
                pw = cache[i].get(e)
                if pw is None:
                    pw = point[i] ** e
                    cache[i][e] = pw
                term = term * pw
        total = total + term
    return total


def homogenize(f: Polynomial, target_degree: int) -> Polynomial:
    """Return ``x0^d f(x/x0)`` with ``x0`` prepended as variable 0."""
    if not f.is_zero() and target_degree < f.degree:
        raise ValueError(
            f"target degree {target_degree} below polynomial degree {f.degree}")
    out = {(target_degree - sum(a),) + a: c for a, c in f.items()}
    return Polynomial._raw(f.nvars + 1, out)


def dehomogenize(h: Polynomial) -> Polynomial:
    """Set variable 0 to one and drop it."""
    if h.nvars < 2:
        raise ValueError("need at least two variables to dehomogenize")
    out: dict = {}
    for a, c in h.items():
        out[a[1:]] = out.get(a[1:], 0) + c
    return Polynomial(h.nvars - 1, out)


def embed(f: Polynomial, nvars: int, offset: int = 0) -> Polynomial:
    """Place ``f`` into a ring with more variables, starting at ``offset``."""
    if offset + f.nvars > nvars:
        raise ValueError("target ring too small")
    pad_l, pad_r = (0,) * offset, (0,) * (nvars - offset - f.nvars)
    return Polynomial._raw(nvars, {pad_l + a + pad_r: c for a, c in f.items()})


def prod(polys: Iterable[Polynomial], nvars: int) -> Polynomial:
    out = Polynomial.constant(nvars, 1)
    for p in polys:
        out = out * p
    return out


def to_float(f: Polynomial) -> Polynomial:
    return Polynomial._raw(f.nvars, {a: float(c) for a, c in f.items()})


# rendering ------------------------------------------------------------------

def _fmt_coeff(c) -> str:
    if isinstance(c, float):
        return repr(c)
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def render(f: Polynomial, names: Sequence[str] | None = None) -> str:
    """Human-readable form that ``parse_polynomial`` reads back exactly."""
    if names is None:
        names = [f"x{i}" for i in range(f.nvars)]
    if len(names) != f.nvars:
        raise ValueError("wrong number of variable names")
    if f.is_zero():
        return "0"
    parts = []
    for a in sorted(f._terms, key=grlex_key, reverse=True):
        c = f._terms[a]
        neg = c < 0
        mag = -c if neg else c
        factors = []
        for name, e in zip(names, a):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        if not factors:
            body = _fmt_coeff(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = _fmt_coeff(mag) + "*" + "*".join(factors)
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


class PolyMatrix:
    """Dense matrix of polynomials sharing one ring."""

    def __init__(self, entries: Sequence[Sequence[Polynomial]]):
        rows = [list(r) for r in entries]
        if not rows or not rows[0]:
            raise ValueError("empty matrix")
        self.rows, self.cols = len(rows), len(rows[0])
        if any(len(r) != self.cols for r in rows):
            raise ValueError("ragged matrix")
        self.nvars = rows[0][0].nvars
        if any(e.nvars != self.nvars for r in rows for e in r):
            raise ValueError("entries must share nvars")
        self.entries = rows

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[Polynomial]]) -> "PolyMatrix":
        return cls([list(r) for r in zip(*columns)])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def evaluate(self, point) -> list[list]:
        return [[poly_eval(e, point) for e in row] for row in self.entries]


def determinant(rows: Sequence[Sequence[Polynomial]]) -> Polynomial:
    """Exact determinant by Laplace expansion with memoized sub-minors."""
    k = len(rows)
    nvars = rows[0][0].nvars
    memo: dict[tuple[int, ...], Polynomial] = {}

    # expand along rows top to bottom; state = remaining columns
    def rec(r: int, cols: tuple[int, ...]) -> Polynomial:
        if r == k:
            return Polynomial.constant(nvars, 1)
        hit = memo.get(cols)
        if hit is not None:
            return hit
        total = Polynomial.zero(nvars)
        for pos, c in enumerate(cols):
            e = rows[r][c]
            if e.is_zero():
                continue
            sub = rec(r + 1, cols[:pos] + cols[pos + 1:])
            if sub.is_zero():
                continue
            term = e * sub
            total = total - term if pos % 2 else total + term
        memo[cols] = total
        return total

    return rec(0, tuple(range(k)))


def maximal_minors(M: PolyMatrix) -> list[tuple[tuple[int, ...], Polynomial]]:
    """All ``cols x cols`` minors in lexicographic row-set order."""
    if M.rows < M.cols:
        raise ValueError(f"matrix has fewer rows ({M.rows}) than columns ({M.cols})")
    out = []
    for rs in combinations(range(M.rows), M.cols):
        out.append((rs, determinant([M.entries[i] for i in rs])))
    return out
