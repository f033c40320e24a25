"""Exact rational arithmetic, multi-indices and sparse linear algebra.

Scalars are :class:`fractions.Fraction` throughout; nothing in this package
touches floating point.  Vectors are sparse dicts ``{index: Fraction}`` with
no stored zeros, and :class:`SparseMatrix` is a thin immutable wrapper around
a ``{(row, col): Fraction}`` dict.
"""
from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import MixedLength, NonRationalSpectrum, OutOfRange

Rational = Fraction
MultiIndex = Tuple[int, ...]
Vector = Dict[int, Fraction]


def rational(value) -> Fraction:
    """Parse ``"p/q"``, ``"n"``, an int or a Fraction into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "." in text or "e" in text.lower():
            raise ValueError(f"not an exact rational: {value!r}")
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# -- multi-indices -----------------------------------------------------------

def mi_add(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def mi_sub(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x - y for x, y in zip(a, b))


def mi_scale(c: int, a: MultiIndex) -> MultiIndex:
    return tuple(c * x for x in a)


def unit(length: int, i: int) -> MultiIndex:
    return tuple(1 if t == i else 0 for t in range(length))


def mi_leq(a: MultiIndex, b: MultiIndex) -> bool:
    """Product partial order: ``a <= b`` iff every entry is."""
    return all(x <= y for x, y in zip(a, b))


def min_elements(s: Iterable[MultiIndex]) -> frozenset:
    """Minimal elements of a finite set under the product partial order."""
    items = set(s)
    lengths = {len(x) for x in items}
    if len(lengths) > 1:
        raise MixedLength(f"multi-indices of lengths {sorted(lengths)}")
    # sorting by entry sum means a dominating element is never seen first
    ordered = sorted(items, key=lambda x: (sum(x), x))
    kept: List[MultiIndex] = []
    for x in ordered:
        if not any(mi_leq(y, x) for y in kept):
            kept.append(x)
    return frozenset(kept)


def floor_multiindex(alpha, k: MultiIndex) -> MultiIndex:
    alpha = rational(alpha)
    if not 0 <= alpha <= 1:
        raise OutOfRange(f"alpha={alpha} outside [0, 1]")
    return tuple(math.floor(alpha * ki) for ki in k)


# -- polynomials in lambda -------------------------------------------------------

class CoeffPoly:
    """Polynomial in the formal variable lambda with rational coefficients."""

    __slots__ = ("_c", "_hash")

    def __init__(self, coeffs: Optional[Mapping[int, object]] = None):
        c = {}
        for deg, val in (coeffs or {}).items():
            val = rational(val)
            if deg < 0:
                raise ValueError("negative lambda degree")
            if val:
                c[deg] = val
        self._c = c
        self._hash = None

    @classmethod
    def const(cls, value) -> "CoeffPoly":
        return cls({0: value})

    @classmethod
    def lam(cls) -> "CoeffPoly":
        return cls({1: 1})

    @property
    def coeffs(self) -> Dict[int, Fraction]:
        return dict(self._c)

    def degree(self) -> int:
        return max(self._c) if self._c else -1

    def is_constant(self) -> bool:
        return all(d == 0 for d in self._c)

    def __bool__(self):
        return bool(self._c)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CoeffPoly.const(other)
        return isinstance(other, CoeffPoly) and self._c == other._c

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._c.items()))
        return self._hash

    def __add__(self, other: "CoeffPoly") -> "CoeffPoly":
        c = dict(self._c)
        for d, v in other._c.items():
            c[d] = c.get(d, 0) + v
        return CoeffPoly(c)

    def __neg__(self):
        return CoeffPoly({d: -v for d, v in self._c.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, q) -> "CoeffPoly":
        q = rational(q)
        return CoeffPoly({d: q * v for d, v in self._c.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        c: Dict[int, Fraction] = defaultdict(Fraction)
        for d1, v1 in self._c.items():
            for d2, v2 in other._c.items():
                c[d1 + d2] += v1 * v2
        return CoeffPoly(c)

    __rmul__ = __mul__

    def shift(self, n: int = 1) -> "CoeffPoly":
        """Multiply by lambda**n."""
        return CoeffPoly({d + n: v for d, v in self._c.items()})

    def evaluate(self, lam) -> Fraction:
        lam = rational(lam)
        return sum((v * lam ** d for d, v in self._c.items()), Fraction(0))

    def __repr__(self):
        if not self._c:
            return "0"
        parts = []
        for d in sorted(self._c):
            v = format_rational(self._c[d])
            parts.append(v if d == 0 else f"{v}*lam" + (f"^{d}" if d > 1 else ""))
        return " + ".join(parts)


# -- sparse matrices -------------------------------------------------------------

class SparseMatrix:
    """Immutable sparse rational matrix."""

    __slots__ = ("rows", "cols", "_e")

    def __init__(self, rows: int, cols: int, entries: Optional[Mapping[Tuple[int, int], object]] = None):
        e = {}
        for (r, c), v in (entries or {}).items():
            if not (0 <= r < rows and 0 <= c < cols):
                raise IndexError(f"entry ({r}, {c}) outside {rows}x{cols}")
            v = rational(v)
            if v:
                e[(r, c)] = v
        self.rows = rows
        self.cols = cols
        self._e = e

    @classmethod
    def _trusted(cls, rows, cols, entries):
        m = cls.__new__(cls)
        m.rows, m.cols, m._e = rows, cols, entries
        return m

    @classmethod
    def from_dense(cls, data: Sequence[Sequence[object]]) -> "SparseMatrix":
        rows = len(data)
        cols = len(data[0]) if rows else 0
        return cls(rows, cols, {(i, j): v for i, row in enumerate(data) for j, v in enumerate(row)})

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls._trusted(n, n, {(i, i): Fraction(1) for i in range(n)})

    @classmethod
    def from_columns(cls, rows: int, columns: Sequence[Mapping[int, Fraction]]) -> "SparseMatrix":
        e = {(r, c): v for c, col in enumerate(columns) for r, v in col.items() if v}
        return cls(rows, len(columns), e)

    @property
    def entries(self) -> Dict[Tuple[int, int], Fraction]:
        return dict(self._e)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def nnz(self) -> int:
        return len(self._e)

    def __getitem__(self, rc) -> Fraction:
        return self._e.get(rc, Fraction(0))

    def __eq__(self, other):
        return (isinstance(other, SparseMatrix) and self.shape == other.shape
                and self._e == other._e)

    def __hash__(self):
        return hash((self.rows, self.cols, frozenset(self._e.items())))

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={len(self._e)})"

    def is_zero(self) -> bool:
        return not self._e

    def to_dense(self) -> List[List[Fraction]]:
        out = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for (r, c), v in self._e.items():
            out[r][c] = v
        return out

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix._trusted(self.cols, self.rows, {(c, r): v for (r, c), v in self._e.items()})

    def row_dicts(self) -> List[Vector]:
        rows: List[Vector] = [dict() for _ in range(self.rows)]
        for (r, c), v in self._e.items():
            rows[r][c] = v
        return rows

    def col_dicts(self) -> List[Vector]:
        cols: List[Vector] = [dict() for _ in range(self.cols)]
        for (r, c), v in self._e.items():
            cols[c][r] = v
        return cols

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        e = dict(self._e)
        for k, v in other._e.items():
            s = e.get(k, 0) + v
            if s:
                e[k] = s
            else:
                e.pop(k, None)
        return SparseMatrix._trusted(self.rows, self.cols, e)

    def __neg__(self):
        return SparseMatrix._trusted(self.rows, self.cols, {k: -v for k, v in self._e.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, q) -> "SparseMatrix":
        q = rational(q)
        if not q:
            return SparseMatrix(self.rows, self.cols)
        return SparseMatrix._trusted(self.rows, self.cols, {k: q * v for k, v in self._e.items()})

    def __matmul__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        right = other.row_dicts()
        e: Dict[Tuple[int, int], Fraction] = {}
        for (r, k), v in self._e.items():
            for c, w in right[k].items():
                key = (r, c)
                s = e.get(key, 0) + v * w
                if s:
                    e[key] = s
                else:
                    e.pop(key, None)
        return SparseMatrix._trusted(self.rows, other.cols, e)

    def apply(self, vec: Mapping[int, Fraction]) -> Vector:
        """Matrix-vector product on sparse dict vectors."""
        cols = defaultdict(list)
        for (r, c), v in self._e.items():
            if c in vec:
                cols[c].append((r, v))
        out: Vector = {}
        for c, x in vec.items():
            for r, v in cols.get(c, ()):
                s = out.get(r, 0) + v * x
                if s:
                    out[r] = s
                else:
                    out.pop(r, None)
        return out

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "SparseMatrix":
        rpos = {r: i for i, r in enumerate(rows)}
        cpos = {c: j for j, c in enumerate(cols)}
        e = {(rpos[r], cpos[c]): v for (r, c), v in self._e.items() if r in rpos and c in cpos}
        return SparseMatrix._trusted(len(rows), len(cols), e)

    def trace(self) -> Fraction:
        return sum((v for (r, c), v in self._e.items() if r == c), Fraction(0))


# -- elimination -------------------------------------------------------------

def _axpy(target: Vector, coeff: Fraction, source: Mapping[int, Fraction]) -> None:
    """In place ``target += coeff * source``."""
    for k, v in source.items():
        s = target.get(k, 0) + coeff * v
        if s:
            target[k] = s
        else:
            target.pop(k, None)


class Echelon:
    """Incrementally maintained echelon basis of a span of sparse vectors.

    Every stored pivot vector remembers which combination of the inserted
    vectors produced it, so membership tests can also return coordinates.
    """

    def __init__(self, track: bool = False):
        self.track = track
        self._pivots: Dict[int, Tuple[Vector, Vector]] = {}
        self._count = 0

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def _reduce(self, vec: Mapping[int, Fraction], combo: Optional[Vector]):
        v = dict(vec)
        pivots = self._pivots
        while v:
            hit = [k for k in v if k in pivots]
            if not hit:
                break
            # eliminate in ascending order so earlier pivots never reappear
            for k in sorted(hit):
                c = v.get(k)
                if not c:
                    continue
                pv, pc = pivots[k]
                _axpy(v, -c, pv)
                if combo is not None:
                    _axpy(combo, -c, pc)
        return v

    def add(self, vec: Mapping[int, Fraction]) -> bool:
        """Insert a vector; return True when it enlarged the span."""
        combo = {self._count: Fraction(1)} if self.track else None
        self._count += 1
        v = self._reduce(vec, combo)
        if not v:
            return False
        lead = min(v)
        inv = 1 / v[lead]
        v = {k: x * inv for k, x in v.items()}
        if combo is not None:
            combo = {k: x * inv for k, x in combo.items()}
        self._pivots[lead] = (v, combo)
        return True

    def contains(self, vec: Mapping[int, Fraction]) -> bool:
        return not self._reduce(vec, None)

    def coordinates(self, vec: Mapping[int, Fraction]) -> Optional[Vector]:
        """Coefficients ``c`` with ``vec = sum c[i] * inserted[i]``, or None."""
        if not self.track:
            raise ValueError("coordinates need an Echelon built with track=True")
        combo: Vector = {}
        rest = self._reduce(vec, combo)
        if rest:
            return None
        return {k: -v for k, v in combo.items() if v}


def components(n: int, edges: Iterable[Tuple[int, int]]) -> List[List[int]]:
    """Connected components of an undirected graph on ``range(n)``."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups: Dict[int, List[int]] = defaultdict(list)
    for x in range(n):
        groups[find(x)].append(x)
    return sorted(groups.values(), key=lambda g: g[0])


def mat_rank(m: SparseMatrix) -> int:
    """Rank over the rationals by sparse Gaussian elimination on rows."""
    ech = Echelon()
    for row in m.row_dicts():
        if row:
            ech.add(row)
    return ech.rank


def rref(m: SparseMatrix) -> Tuple[List[Vector], List[int]]:
    """Reduced row echelon form: list of pivot rows and their pivot columns."""
    ech = Echelon()
    for row in m.row_dicts():
        if row:
            ech.add(row)
    pivots = sorted(ech._pivots)
    rows = {p: dict(ech._pivots[p][0]) for p in pivots}
    # back substitution, last pivot first
    for p in reversed(pivots):
        for q in pivots:
            if q < p:
                c = rows[q].get(p)
                if c:
                    _axpy(rows[q], -c, rows[p])
    return [rows[p] for p in pivots], pivots


def mat_kernel_basis(m: SparseMatrix) -> List[Vector]:
    """Basis of the right kernel ``{v : m v = 0}`` as sparse vectors."""
    rows, pivots = rref(m)
    pivot_set = set(pivots)
    basis = []
    for free in range(m.cols):
        if free in pivot_set:
            continue
        v: Vector = {free: Fraction(1)}
        for p, row in zip(pivots, rows):
            c = row.get(free)
            if c:
                v[p] = -c
        basis.append(v)
    return basis


# -- spectra ---------------------------------------------------------------------

def charpoly(m: SparseMatrix) -> List[Fraction]:
    """Characteristic polynomial ``det(t I - m)``, coefficients low degree first.

    Faddeev-LeVerrier recurrence; exact because all divisions are by
    nonzero integers in Q.
    """
    if m.rows != m.cols:
        raise ValueError("characteristic polynomial of a non-square matrix")
    n = m.rows
    a = m.to_dense()
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    mk = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        c_prev = coeffs[n - k + 1]
        # M_k = A M_{k-1} + c_{n-k+1} I
        prod = [[sum((a[i][t] * mk[t][j] for t in range(n) if a[i][t] and mk[t][j]), Fraction(0))
                 for j in range(n)] for i in range(n)]
        for i in range(n):
            prod[i][i] += c_prev
        mk = prod
        tr = sum((sum((a[i][t] * mk[t][i] for t in range(n)), Fraction(0)) for i in range(n)), Fraction(0))
        coeffs[n - k] = -tr / k
    return coeffs


def _divisors(n: int) -> List[int]:
    n = abs(n)
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def _poly_eval(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _deflate(coeffs: List[Fraction], root: Fraction) -> List[Fraction]:
    """Divide by ``(t - root)``; the remainder is assumed zero."""
    n = len(coeffs) - 1
    out = [Fraction(0)] * n
    carry = Fraction(0)
    for i in range(n, 0, -1):
        carry = coeffs[i] + carry * root if i < n else coeffs[i]
        out[i - 1] = carry
    return out


def rational_roots(coeffs: Sequence[Fraction]) -> Tuple[List[Fraction], List[Fraction]]:
    """Split off all rational roots (with multiplicity).

    Returns ``(roots, remaining_coefficients)``.
    """
    poly = [rational(c) for c in coeffs]
    while len(poly) > 1 and poly[-1] == 0:
        poly.pop()
    roots: List[Fraction] = []
    while len(poly) > 1 and poly[0] == 0:
        roots.append(Fraction(0))
        poly = poly[1:]
    while len(poly) > 1:
        den = 1
        for c in poly:
            den = den * c.denominator // math.gcd(den, c.denominator)
        ints = [int(c * den) for c in poly]
        g = 0
        for c in ints:
            g = math.gcd(g, c)
        ints = [c // g for c in ints]
        found = None
        for p in _divisors(ints[0]):
            for q in _divisors(ints[-1]):
                for cand in (Fraction(p, q), Fraction(-p, q)):
                    if _poly_eval(poly, cand) == 0:
                        found = cand
                        break
                if found is not None:
                    break
            if found is not None:
                break
        if found is None:
            break
        roots.append(found)
        poly = _deflate(poly, found)
    return sorted(roots), poly


def rational_spectrum(m: SparseMatrix) -> List[Fraction]:
    """Eigenvalues with multiplicity, sorted; raises unless all are rational."""
    roots, rest = rational_roots(charpoly(m))
    if len(rest) > 1:
        raise NonRationalSpectrum(roots, rest)
    return roots
