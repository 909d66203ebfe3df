"""Sparse multivariate polynomial arithmetic over machine floats.

A polynomial in ``n`` variables is a map from exponent vectors (tuples of
nonnegative ints of length ``n``) to float coefficients.  Coefficients with
magnitude at or below ``CLEANUP_EPS`` are dropped after every arithmetic
operation, so the zero polynomial is always the empty term map.

Canonical term order is graded lexicographic: ascending total degree, and
within a degree x1-major descending exponents, which matches the usual
ordering of the monomial vector (x1^d, x1^{d-1}x2, ..., xn^d).

Everything here is a pure function of immutable values; Polynomial instances
never mutate after construction.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

# Exponent vector of a monomial; entry i is the exponent of x_i.
Monomial = tuple[int, ...]

CLEANUP_EPS = 1e-14

# Above this many coefficient products, mul() switches to the vectorized path.
_MUL_VECTORIZE_THRESHOLD = 20_000


def grlex_key(exponents: Monomial) -> tuple:
    """Sort key realizing graded-lex order (degree, then x1-major)."""
    return (sum(exponents), tuple(-e for e in exponents))


class Polynomial:
    """Immutable sparse polynomial with float coefficients."""

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[Monomial, float] | None = None):
        if nvars < 0:
            raise ValueError("nvars must be nonnegative")
        self.nvars = int(nvars)
        cleaned: dict[Monomial, float] = {}
        if terms:
            for mono, coeff in terms.items():
                mono = tuple(int(e) for e in mono)
                if len(mono) != self.nvars:
                    raise ValueError(
                        f"monomial {mono} has {len(mono)} exponents, expected {self.nvars}"
                    )
                if any(e < 0 for e in mono):
                    raise ValueError(f"negative exponent in {mono}")
                c = float(coeff)
                if abs(c) > CLEANUP_EPS:
                    cleaned[mono] = c
        self._terms = cleaned

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial(nvars, {})

    @staticmethod
    def constant(nvars: int, value: float) -> "Polynomial":
        return Polynomial(nvars, {(0,) * nvars: value})

    @staticmethod
    def variable(nvars: int, index: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise IndexError(f"variable index {index} out of range for nvars={nvars}")
        e = [0] * nvars
        e[index] = 1
        return Polynomial(nvars, {tuple(e): 1.0})

    @staticmethod
    def monomial(nvars: int, exponents: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return Polynomial(nvars, {tuple(exponents): coeff})

    @staticmethod
    def from_terms(nvars: int, terms: Iterable[tuple[Sequence[int], float]]) -> "Polynomial":
        acc: dict[Monomial, float] = {}
        for exps, coeff in terms:
            key = tuple(int(e) for e in exps)
            acc[key] = acc.get(key, 0.0) + float(coeff)
        return Polynomial(nvars, acc)

    # -- basic queries -------------------------------------------------

    @property
    def terms(self) -> dict[Monomial, float]:
        """Copy of the term map (no stored zeros)."""
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        if not self._terms:
            return 0
        return max(sum(m) for m in self._terms)

    def is_homogeneous(self) -> bool:
        degs = {sum(m) for m in self._terms}
        return len(degs) <= 1

    def has_only_even_exponents(self) -> bool:
        return all(all(e % 2 == 0 for e in m) for m in self._terms)

    def coefficient(self, exponents: Sequence[int]) -> float:
        return self._terms.get(tuple(exponents), 0.0)

    def max_abs_coeff(self) -> float:
        if not self._terms:
            return 0.0
        return max(abs(c) for c in self._terms.values())

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        return sorted(self._terms.items(), key=lambda kv: grlex_key(kv[0]))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.nvars == other.nvars
            and self._terms == other._terms
        )

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def allclose(self, other: "Polynomial", rtol: float = 1e-9, atol: float = 1e-12) -> bool:
        if self.nvars != other.nvars:
            return False
        keys = set(self._terms) | set(other._terms)
        scale = max(self.max_abs_coeff(), other.max_abs_coeff(), 1.0)
        return all(
            abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) <= atol + rtol * scale
            for k in keys
        )

    def __repr__(self) -> str:
        if not self._terms:
            return "Polynomial(0)"
        parts = []
        for mono, coeff in self.sorted_terms()[:8]:
            vars_str = "*".join(
                f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}" for i, e in enumerate(mono) if e
            )
            parts.append(f"{coeff:+g}{'*' + vars_str if vars_str else ''}")
        tail = " ..." if len(self._terms) > 8 else ""
        return f"Polynomial({' '.join(parts)}{tail})"

    # -- arithmetic ----------------------------------------------------

    def _check_same_vars(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        self._check_same_vars(other)
        out = dict(self._terms)
        for mono, coeff in other._terms.items():
            out[mono] = out.get(mono, 0.0) + coeff
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return self.__add__(other.__neg__())

    def __rsub__(self, other) -> "Polynomial":
        return (-self).__add__(other)

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial(self.nvars, {m: c * factor for m, c in self._terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        self._check_same_vars(other)
        if not self._terms or not other._terms:
            return Polynomial.zero(self.nvars)
        if len(self._terms) * len(other._terms) > _MUL_VECTORIZE_THRESHOLD:
            exps, coeffs = _mul_arrays(*_to_arrays(self), *_to_arrays(other), self.nvars)
            return _from_arrays(self.nvars, exps, coeffs)
        out: dict[Monomial, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                key = tuple(a + b for a, b in zip(m1, m2))
                out[key] = out.get(key, 0.0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0 or int(k) != k:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(self.nvars, 1.0)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self, point)


# ----------------------------------------------------------------------
# vectorized multiplication internals
# ----------------------------------------------------------------------


def _to_arrays(p: Polynomial) -> tuple[np.ndarray, np.ndarray]:
    exps = np.array(sorted(p._terms), dtype=np.int64).reshape(len(p._terms), p.nvars)
    coeffs = np.array([p._terms[tuple(row)] for row in exps.tolist()], dtype=np.float64)
    return exps, coeffs


def _from_arrays(nvars: int, exps: np.ndarray, coeffs: np.ndarray) -> Polynomial:
    keep = np.abs(coeffs) > CLEANUP_EPS
    return Polynomial(
        nvars,
        {tuple(row): c for row, c in zip(exps[keep].tolist(), coeffs[keep].tolist())},
    )


def _pack_keys(exps: np.ndarray, bits: int) -> np.ndarray:
    """Pack each exponent row into one int64 (radix 2**bits per variable)."""
    nvars = exps.shape[1]
    weights = (1 << (bits * np.arange(nvars - 1, -1, -1, dtype=np.int64)))
    return exps @ weights


def _unpack_keys(keys: np.ndarray, bits: int, nvars: int) -> np.ndarray:
    out = np.empty((keys.size, nvars), dtype=np.int64)
    mask = (1 << bits) - 1
    for j in range(nvars - 1, -1, -1):
        out[:, j] = keys & mask
        keys = keys >> bits
    return out


def _mul_arrays(
    e1: np.ndarray,
    c1: np.ndarray,
    e2: np.ndarray,
    c2: np.ndarray,
    nvars: int,
    pair_budget: int = 8_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Product of two polynomials in array form; returns deduplicated arrays.

    Exponent rows are packed into int64 keys so that chunked aggregation is a
    sort over scalars.  Falls back to a dict merge when the packed width would
    exceed 63 bits.
    """
    max_exp = int(e1.max(initial=0)) + int(e2.max(initial=0))
    bits = max(1, max_exp.bit_length())
    if bits * nvars > 63:
        out: dict[Monomial, float] = {}
        for row1, a in zip(e1.tolist(), c1.tolist()):
            for row2, b in zip(e2.tolist(), c2.tolist()):
                key = tuple(x + y for x, y in zip(row1, row2))
                out[key] = out.get(key, 0.0) + a * b
        exps = np.array(sorted(out), dtype=np.int64).reshape(len(out), nvars)
        coeffs = np.array([out[tuple(r)] for r in exps.tolist()])
        return exps, coeffs

    if len(e1) > len(e2):  # iterate chunks over the smaller factor
        e1, c1, e2, c2 = e2, c2, e1, c1
    k1 = _pack_keys(e1, bits)
    k2 = _pack_keys(e2, bits)
    chunk_rows = max(1, pair_budget // max(1, len(k2)))
    key_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    for start in range(0, len(k1), chunk_rows):
        stop = min(start + chunk_rows, len(k1))
        keys = (k1[start:stop, None] + k2[None, :]).ravel()
        vals = (c1[start:stop, None] * c2[None, :]).ravel()
        uk, inv = np.unique(keys, return_inverse=True)
        key_parts.append(uk)
        val_parts.append(np.bincount(inv, weights=vals, minlength=uk.size))
    all_keys = np.concatenate(key_parts)
    all_vals = np.concatenate(val_parts)
    uk, inv = np.unique(all_keys, return_inverse=True)
    sums = np.bincount(inv, weights=all_vals, minlength=uk.size)
    return _unpack_keys(uk, bits, nvars), sums


def mul_multi(
    base_exps: np.ndarray,
    base_coeffs: np.ndarray,
    factor: Polynomial,
) -> tuple[np.ndarray, np.ndarray]:
    """Multiply several stacked coefficient columns by one polynomial.

    ``base_coeffs`` has shape (terms, k); the k columns share the exponent
    rows ``base_exps``.  Returns (exps, coeffs) with coeffs of shape
    (out_terms, k).  Used where a family of polynomials with common support
    (e.g. a polynomial depending polynomially on a scalar parameter) must all
    be multiplied by the same large factor.
    """
    fe, fc = _to_arrays(factor)
    nvars = factor.nvars
    k = base_coeffs.shape[1]
    max_exp = int(base_exps.max(initial=0)) + int(fe.max(initial=0))
    bits = max(1, max_exp.bit_length())
    if bits * nvars > 63:
        raise ValueError("exponents too large for packed multi-column multiply")
    kb = _pack_keys(base_exps, bits)
    kf = _pack_keys(fe, bits)
    pair_budget = 8_000_000
    chunk_rows = max(1, pair_budget // max(1, len(kb)))
    key_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    for start in range(0, len(kf), chunk_rows):
        stop = min(start + chunk_rows, len(kf))
        keys = (kf[start:stop, None] + kb[None, :]).ravel()
        uk, inv = np.unique(keys, return_inverse=True)
        block = np.zeros((uk.size, k))
        vals = fc[start:stop, None, None] * base_coeffs[None, :, :]
        flat = vals.reshape(-1, k)
        for col in range(k):
            block[:, col] = np.bincount(inv, weights=flat[:, col], minlength=uk.size)
        key_parts.append(uk)
        val_parts.append(block)
    all_keys = np.concatenate(key_parts)
    uk, inv = np.unique(all_keys, return_inverse=True)
    sums = np.zeros((uk.size, k))
    offset = 0
    for part_keys, block in zip(key_parts, val_parts):
        idx = inv[offset : offset + part_keys.size]
        np.add.at(sums, idx, block)
        offset += part_keys.size
    return _unpack_keys(uk, bits, nvars), sums


# ----------------------------------------------------------------------
# named operations
# ----------------------------------------------------------------------


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def pow_(p: Polynomial, k: int) -> Polynomial:
    return p**k


def evaluate(p: Polynomial, point: Sequence[float]) -> float:
    """Numeric value of p at a point (length must equal nvars)."""
    pt = np.asarray(point, dtype=float)
    if pt.shape != (p.nvars,):
        raise ValueError(f"point has shape {pt.shape}, expected ({p.nvars},)")
    total = 0.0
    for mono, coeff in p._terms.items():
        v = coeff
        for x, e in zip(pt, mono):
            if e:
                v *= x**e
        total += v
    return total


def partial(p: Polynomial, i: int) -> Polynomial:
    """Partial derivative with respect to x_i."""
    if not 0 <= i < p.nvars:
        raise IndexError(f"variable index {i} out of range for nvars={p.nvars}")
    out: dict[Monomial, float] = {}
    for mono, coeff in p._terms.items():
        e = mono[i]
        if e == 0:
            continue
        new = list(mono)
        new[i] = e - 1
        key = tuple(new)
        out[key] = out.get(key, 0.0) + coeff * e
    return Polynomial(p.nvars, out)


def gradient(p: Polynomial) -> list[Polynomial]:
    return [partial(p, i) for i in range(p.nvars)]


def hessian(p: Polynomial) -> list[list[Polynomial]]:
    grads = gradient(p)
    return [[partial(grads[i], j) for j in range(p.nvars)] for i in range(p.nvars)]


def homogenize(p: Polynomial, degree: int) -> Polynomial:
    """Append a variable y and pad each term to total degree ``degree``.

    Each term c*x^a becomes c*x^a*y^(degree-|a|); evaluating the result at
    y=1 recovers p.  Requires deg(p) <= degree.
    """
    if p.degree() > degree:
        raise ValueError(f"cannot homogenize degree-{p.degree()} polynomial to degree {degree}")
    out = {}
    for mono, coeff in p._terms.items():
        out[mono + (degree - sum(mono),)] = coeff
    return Polynomial(p.nvars + 1, out)


def dehomogenize(p: Polynomial) -> Polynomial:
    """Substitute 1 for the last variable (inverse of homogenize)."""
    out: dict[Monomial, float] = {}
    for mono, coeff in p._terms.items():
        key = mono[:-1]
        out[key] = out.get(key, 0.0) + coeff
    return Polynomial(p.nvars - 1, out)


def substitute_square_difference(p: Polynomial) -> Polynomial:
    """Replace each x_i by v_i^2 - w_i^2; result lives in 2n variables (v, w)."""
    n = p.nvars
    result = Polynomial.zero(2 * n)
    # v_i^2 - w_i^2 as a 2n-variable polynomial, built once per variable
    diffs = []
    for i in range(n):
        ev = [0] * (2 * n)
        ev[i] = 2
        ew = [0] * (2 * n)
        ew[n + i] = 2
        diffs.append(Polynomial(2 * n, {tuple(ev): 1.0, tuple(ew): -1.0}))
    cache: dict[tuple[int, int], Polynomial] = {}

    def diff_power(i: int, e: int) -> Polynomial:
        key = (i, e)
        if key not in cache:
            cache[key] = diffs[i] ** e
        return cache[key]

    for mono, coeff in p._terms.items():
        term = Polynomial.constant(2 * n, coeff)
        for i, e in enumerate(mono):
            if e:
                term = term * diff_power(i, e)
        result = result + term
    return result


def min_coefficient(p: Polynomial) -> float:
    """Smallest stored coefficient (0 for the zero polynomial)."""
    if not p._terms:
        return 0.0
    return min(p._terms.values())


def monomial_bound(p: Polynomial, radius: float) -> float:
    """Upper bound on |p| over the box |x_i| <= radius: sum |c_a| R^|a|."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    return math.fsum(abs(c) * radius ** sum(m) for m, c in p._terms.items())


def squared_norm_poly(nvars: int) -> Polynomial:
    """The quadratic form x_1^2 + ... + x_n^2."""
    terms = {}
    for i in range(nvars):
        e = [0] * nvars
        e[i] = 2
        terms[tuple(e)] = 1.0
    return Polynomial(nvars, terms)


# ----------------------------------------------------------------------
# sphere moments
# ----------------------------------------------------------------------


def sphere_moment(exponents: Monomial) -> Fraction:
    """Mean of x^alpha over the unit sphere (probability measure), exact.

    Zero when any exponent is odd.  For even exponents 2m_j the value is
    prod_j (2m_j)!/(4^{m_j} m_j!)  /  prod_{t=0}^{|m|-1} (n/2 + t),
    obtained from the Gamma-function surface moment divided by the sphere
    area, with half-integer Gammas expanded exactly.
    """
    n = len(exponents)
    if any(e % 2 for e in exponents):
        return Fraction(0)
    ms = [e // 2 for e in exponents]
    num = Fraction(1)
    for m in ms:
        num *= Fraction(math.factorial(2 * m), (4**m) * math.factorial(m))
    total = sum(ms)
    den = Fraction(1)
    for t in range(total):
        den *= Fraction(n, 2) + t
    return num / den


def sphere_average(p: Polynomial) -> float:
    """Mean of p over the unit sphere S^{n-1} (probability measure)."""
    return float(
        math.fsum(c * float(sphere_moment(m)) for m, c in p._terms.items())
    )


def sphere_integral_tr_hessian(g: Polynomial) -> float:
    """Normalized integral of the Hessian trace of g over the unit sphere.

    Computed exactly as a linear functional of g's coefficients: the second
    x_i-derivative of each term contributes coefficient e_i(e_i - 1) times
    the probability-normalized sphere moment of the reduced monomial.
    """
    if g.nvars < 1:
        raise ValueError("polynomial must have at least one variable")
    total = []
    for mono, coeff in g._terms.items():
        for i, e in enumerate(mono):
            if e >= 2:
                reduced = list(mono)
                reduced[i] = e - 2
                moment = sphere_moment(tuple(reduced))
                if moment:
                    total.append(coeff * e * (e - 1) * float(moment))
    return math.fsum(total)


# ----------------------------------------------------------------------
# JSON interchange
# ----------------------------------------------------------------------


def to_json_dict(p: Polynomial) -> dict:
    return {
        "nvars": p.nvars,
        "terms": [[list(m), c] for m, c in p.sorted_terms()],
    }


def from_json_dict(obj: dict) -> Polynomial:
    if not isinstance(obj, dict) or "nvars" not in obj or "terms" not in obj:
        raise ValueError("polynomial JSON must have 'nvars' and 'terms' fields")
    return Polynomial.from_terms(int(obj["nvars"]), [(m, c) for m, c in obj["terms"]])


def dumps(p: Polynomial) -> str:
    return json.dumps(to_json_dict(p))


def loads(text: str) -> Polynomial:
    return from_json_dict(json.loads(text))
