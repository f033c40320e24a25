"""Kontsevich complexes of a monomial function on a product of projective lines.

``X = (P^1)^d`` with affine coordinates ``u_1..u_d`` and ``f = prod u_i^{-a_i}``.
Exactly one axis carries the pole of ``f``; that keeps ``df`` a single
monomial times ``du/u``, which is what the multidegree bookkeeping below uses.

Every sheaf in sight is a sum of line bundles ``O(m) * omega_S`` where
``omega_S`` is the wedge of the log frames ``du_i/u_i`` over an axis subset
``S``.  A summand is encoded by per-axis exponent bounds: on the chart at 0
the allowed monomials are ``u_i^m`` with ``m >= lo_i``, on the chart at
infinity ``m <= hi_i``, so the multidegree is ``hi - lo``.

The Cech-de Rham total complex over the ``2^d`` torus-invariant charts is
graded by the exponent vector ``m``: the Cech coboundary and ``d`` keep ``m``
and ``df`` shifts it by ``-a``.  It is therefore assembled monomial by
monomial inside the window ``[-B, B]^d``; outputs that leave the window are
dropped, which keeps a subquotient complex (the part below ``-B`` is a
subcomplex, the part above ``B`` a quotient).  Stability in ``B`` is
re-checked on every dimension count.

Matrix convention: column = source basis index, row = target basis index.
The sign ``(-1)^c`` of the total differential (``c`` the Cech degree of the
source) is folded into ``d_mat`` and ``df_mat``, so the specialized total
differential is ``cech_mat + lam * d_mat + tau * df_mat``.
"""
from __future__ import annotations

import functools
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

from .errors import InvalidInput, TruncationUnstable, UnsupportedGeometry, WindowTooSmall
from .exact import (Echelon, SparseMatrix, Vector, components, floor_multiindex,
                    mat_kernel_basis, rational)

CHART_ZERO, CHART_INF, CHART_BOTH = 0, 1, 2


@dataclass(frozen=True)
class GeometrySpec:
    """``(P^1)^d`` with ``f = prod u_i^{-a_i}`` and ``D = P_red + H (+ points at infinity)``.

    Axes are 1-based.  ``inf_axes`` lists the axes whose point at infinity
    belongs to ``D``; by default these are the polar axes.
    """
    dim: int
    f_exp: Tuple[int, ...]
    h_axes: FrozenSet[int] = frozenset()
    alpha: Fraction = Fraction(0)
    inf_axes: Optional[FrozenSet[int]] = None

    def __post_init__(self):
        try:
            f_exp = tuple(int(x) for x in self.f_exp)
            alpha = rational(self.alpha)
        except (TypeError, ValueError) as exc:
            raise UnsupportedGeometry(str(exc)) from None
        h_axes = frozenset(int(x) for x in self.h_axes)
        object.__setattr__(self, "f_exp", f_exp)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "h_axes", h_axes)
        if self.dim < 1 or len(f_exp) != self.dim:
            raise UnsupportedGeometry(f"f_exp={f_exp} does not match dim={self.dim}")
        if any(x < 0 for x in f_exp):
            raise UnsupportedGeometry("pole orders must be nonnegative")
        polar = [i for i, x in enumerate(f_exp) if x > 0]
        if len(polar) != 1:
            raise UnsupportedGeometry(
                f"exactly one polar axis is supported, got {len(polar)} in a={f_exp}")
        if not h_axes <= set(range(1, self.dim + 1)):
            raise UnsupportedGeometry(f"h_axes {sorted(h_axes)} outside 1..{self.dim}")
        if any(f_exp[i - 1] for i in h_axes):
            raise UnsupportedGeometry("h_axes must avoid the polar axis")
        if not 0 <= alpha < 1:
            raise UnsupportedGeometry(f"alpha={alpha} outside [0, 1)")
        inf = frozenset(i + 1 for i in polar) if self.inf_axes is None else frozenset(
            int(x) for x in self.inf_axes)
        if not inf <= set(range(1, self.dim + 1)):
            raise UnsupportedGeometry(f"inf_axes {sorted(inf)} outside 1..{self.dim}")
        object.__setattr__(self, "inf_axes", inf)

    @property
    def polar_axis(self) -> int:
        """0-based index of the polar axis."""
        return next(i for i, x in enumerate(self.f_exp) if x)

    @property
    def a(self) -> int:
        return self.f_exp[self.polar_axis]

    @property
    def p(self) -> int:
        return floor_multiindex(self.alpha, (self.a,))[0]

    def zero_in_d(self, i: int) -> bool:
        return i == self.polar_axis or (i + 1) in self.h_axes

    def inf_in_d(self, i: int) -> bool:
        return (i + 1) in self.inf_axes

    def with_alpha(self, alpha) -> "GeometrySpec":
        return GeometrySpec(self.dim, self.f_exp, self.h_axes, rational(alpha), self.inf_axes)


class Summand(NamedTuple):
    axes: Tuple[int, ...]  # 1-based, sorted
    lo: Tuple[int, ...]
    hi: Tuple[int, ...]

    @property
    def bidegree(self) -> Tuple[int, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))


@dataclass(frozen=True)
class KontsevichSheaf:
    q: int
    summands: Tuple[Summand, ...]


def _summand(g: GeometrySpec, axes0: Tuple[int, ...]) -> Summand:
    lo, hi = [], []
    for i in range(g.dim):
        if i in axes0:
            lo.append(0 if g.zero_in_d(i) else 1)
            hi.append(0 if g.inf_in_d(i) else -1)
        else:
            lo.append(0)
            hi.append(0)
    i0 = g.polar_axis
    if i0 not in axes0:
        # g * df must stay logarithmic along the polar divisor
        lo[i0] += g.a
    lo[i0] -= g.p
    return Summand(tuple(i + 1 for i in axes0), tuple(lo), tuple(hi))


def kontsevich_sheaf(g: GeometrySpec, q: int) -> KontsevichSheaf:
    """Line bundle decomposition of the twisted Kontsevich sheaf in degree ``q``."""
    if not 0 <= q <= g.dim:
        raise UnsupportedGeometry(f"form degree {q} outside 0..{g.dim}")
    summands = tuple(_summand(g, s) for s in itertools.combinations(range(g.dim), q))
    return KontsevichSheaf(q, summands)


def _line_h(m: int) -> Tuple[int, int]:
    return max(m + 1, 0), max(-m - 1, 0)


def sheaf_cohomology_dims(s: KontsevichSheaf) -> List[int]:
    """``h^i`` of the sheaf for ``i = 0..d`` by the Kunneth formula."""
    if not s.summands:
        return []
    d = len(s.summands[0].lo)
    out = [0] * (d + 1)
    for summand in s.summands:
        per_axis = [_line_h(m) for m in summand.bidegree]
        for pattern in itertools.product((0, 1), repeat=d):
            prod = 1
            for axis, which in enumerate(pattern):
                prod *= per_axis[axis][which]
            out[sum(pattern)] += prod
    return out


def line_bundle_oracle(g: GeometrySpec) -> List[int]:
    """``sum_j h^{i-j}(Omega_f^j(alpha))``: the hypercohomology at ``(0, 0)``."""
    out = [0] * (2 * g.dim + 1)
    for q in range(g.dim + 1):
        for i, h in enumerate(sheaf_cohomology_dims(kontsevich_sheaf(g, q))):
            out[i + q] += h
    return out


# -- Cech assembly ---------------------------------------------------------------

class BasisKey(NamedTuple):
    charts: Tuple[int, ...]
    axes: Tuple[int, ...]  # 0-based, sorted
    m: Tuple[int, ...]

    @property
    def cech_degree(self) -> int:
        return sum(1 for k in self.charts if k == CHART_BOTH)

    @property
    def degree(self) -> int:
        return self.cech_degree + len(self.axes)


def _insert_sign(axes: Tuple[int, ...], i: int) -> Tuple[int, Tuple[int, ...]]:
    """Sign of ``du_i/u_i ^ omega_S`` relative to the sorted frame, and the new axes."""
    before = sum(1 for s in axes if s < i)
    return (-1) ** before, tuple(sorted(axes + (i,)))


@dataclass(frozen=True, eq=False)
class CechComplex:
    geometry: GeometrySpec
    window: int
    basis: Tuple[BasisKey, ...]
    d_mat: SparseMatrix
    df_mat: SparseMatrix
    cech_mat: SparseMatrix
    index: Dict[BasisKey, int] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def degrees(self) -> List[int]:
        return [b.degree for b in self.basis]

    def spaces(self) -> Dict[Tuple[int, int], List[int]]:
        """Basis indices grouped by (Cech degree, form degree)."""
        out: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for idx, b in enumerate(self.basis):
            out[(b.cech_degree, len(b.axes))].append(idx)
        return dict(out)

    def total(self, lam, tau) -> SparseMatrix:
        lam, tau = rational(lam), rational(tau)
        return self.cech_mat + self.d_mat.scale(lam) + self.df_mat.scale(tau)


def _ranges(s: Summand, charts: Tuple[int, ...], window: int):
    out = []
    for i, kappa in enumerate(charts):
        lo, hi = -window, window
        if kappa == CHART_ZERO:
            lo = max(lo, s.lo[i])
        elif kappa == CHART_INF:
            hi = min(hi, s.hi[i])
        out.append(range(lo, hi + 1))
    return out


@functools.lru_cache(maxsize=64)
def assemble_cech(g: GeometrySpec, window: int) -> CechComplex:
    """Monomial bases and the three sparse matrices of the Cech-de Rham complex."""
    amax = max(g.f_exp)
    if window < amax + 2:
        raise WindowTooSmall(f"window {window} below the minimum {amax + 2}")
    d = g.dim
    sheaves = {q: {tuple(i - 1 for i in s.axes): s for s in kontsevich_sheaf(g, q).summands}
               for q in range(d + 1)}
    basis: List[BasisKey] = []
    for charts in itertools.product((CHART_ZERO, CHART_INF, CHART_BOTH), repeat=d):
        for q in range(d + 1):
            for axes, s in sheaves[q].items():
                for m in itertools.product(*_ranges(s, charts, window)):
                    basis.append(BasisKey(charts, axes, m))
    basis.sort(key=lambda b: (b.degree, b.charts, b.axes, b.m))
    index = {b: n for n, b in enumerate(basis)}

    cech: Dict[Tuple[int, int], Fraction] = {}
    dd: Dict[Tuple[int, int], Fraction] = {}
    df: Dict[Tuple[int, int], Fraction] = {}
    i0, a = g.polar_axis, g.a

    def target(key: BasisKey, must_exist: bool) -> Optional[int]:
        t = index.get(key)
        if t is None and must_exist:
            raise AssertionError(f"assembly left the sheaf at {key}")
        return t

    for col, b in enumerate(basis):
        c = b.cech_degree
        sign_c = (-1) ** c
        seen_both = 0
        for i, kappa in enumerate(b.charts):
            if kappa != CHART_BOTH:
                charts = b.charts[:i] + (CHART_BOTH,) + b.charts[i + 1:]
                row = target(BasisKey(charts, b.axes, b.m), True)
                # restriction from the chart at infinity minus restriction from the chart at 0
                cech[(row, col)] = Fraction((-1) ** seen_both * (1 if kappa == CHART_INF else -1))
            else:
                seen_both += 1
        for i in range(d):
            if i in b.axes or b.m[i] == 0:
                continue
            sgn, axes = _insert_sign(b.axes, i)
            row = target(BasisKey(b.charts, axes, b.m), True)
            dd[(row, col)] = Fraction(sign_c * sgn * b.m[i])
        if i0 not in b.axes:
            shifted = b.m[:i0] + (b.m[i0] - a,) + b.m[i0 + 1:]
            if shifted[i0] >= -window:
                sgn, axes = _insert_sign(b.axes, i0)
                row = target(BasisKey(b.charts, axes, shifted), True)
                df[(row, col)] = Fraction(-a * sign_c * sgn)
    n = len(basis)
    return CechComplex(g, window, tuple(basis),
                       SparseMatrix._trusted(n, n, dd), SparseMatrix._trusted(n, n, df),
                       SparseMatrix._trusted(n, n, cech), index)


def default_window(g: GeometrySpec) -> int:
    return 4 * max(g.f_exp) + 4


# -- cohomology ----------------------------------------------------------------------

class _Blocks(NamedTuple):
    cols: List[Vector]
    comps: List[List[int]]
    degrees: List[int]


def _blocks(degrees: Sequence[int], total: SparseMatrix) -> _Blocks:
    cols = total.col_dicts()
    edges = ((r, c) for (r, c) in total.entries)
    return _Blocks(cols, components(total.cols, edges), list(degrees))


def complex_dims(degrees: Sequence[int], total: SparseMatrix, top: int) -> List[int]:
    """Cohomology dimensions of a graded complex given by one square matrix.

    ``degrees[i]`` is the degree of basis vector ``i``; ``total`` raises the
    degree by one.  The complex is split into connected blocks first.
    """
    blocks = _blocks(degrees, total)
    dims = [0] * (top + 1)
    for comp in blocks.comps:
        by_deg: Dict[int, List[int]] = defaultdict(list)
        for idx in comp:
            by_deg[blocks.degrees[idx]].append(idx)
        ranks = {}
        for n, idxs in by_deg.items():
            ech = Echelon()
            for idx in idxs:
                if blocks.cols[idx]:
                    ech.add(blocks.cols[idx])
            ranks[n] = ech.rank
        for n, idxs in by_deg.items():
            dims[n] += len(idxs) - ranks[n] - ranks.get(n - 1, 0)
    return dims


def _raw_dims(c: CechComplex, lam, tau) -> List[int]:
    return complex_dims(c.degrees, c.total(lam, tau), 2 * c.geometry.dim)


def hyper_dims(c: CechComplex, lam, tau, check: bool = True) -> List[int]:
    """Dimensions of ``H^i(X, Omega_f(alpha), lam d + tau df)`` for ``i = 0..2d``.

    With ``check`` the computation is repeated with the window enlarged by
    ``max(a)``; a disagreement raises :class:`TruncationUnstable`.
    """
    dims = _raw_dims(c, lam, tau)
    if check:
        bigger = assemble_cech(c.geometry, c.window + max(c.geometry.f_exp))
        again = _raw_dims(bigger, lam, tau)
        if again != dims:
            raise TruncationUnstable(
                f"window {c.window} gives {dims}, window {bigger.window} gives {again}")
    return dims


def filtration_dims(c: CechComplex, lam, tau, i: int) -> List[int]:
    """``dim F^j H^i`` for ``j = 0..d+1`` where ``F^j`` is the image of the stupid truncation."""
    total = c.total(lam, tau)
    blocks = _blocks(c.degrees, total)
    forms = [len(b.axes) for b in c.basis]
    d = c.geometry.dim
    out = [0] * (d + 2)
    for comp in blocks.comps:
        src = [x for x in comp if blocks.degrees[x] == i]
        if not src:
            continue
        prev = [x for x in comp if blocks.degrees[x] == i - 1]
        rows = sorted({r for x in src for r in blocks.cols[x]})
        rpos = {r: n for n, r in enumerate(rows)}
        for j in range(d + 2):
            chosen = [x for x in src if forms[x] >= j]
            if not chosen:
                continue
            local = SparseMatrix._trusted(len(rows), len(chosen), {
                (rpos[r], n): v for n, x in enumerate(chosen) for r, v in blocks.cols[x].items()})
            ech = Echelon()
            for x in prev:
                if blocks.cols[x]:
                    ech.add(blocks.cols[x])
            base = ech.rank
            for vec in mat_kernel_basis(local):
                ech.add({chosen[n]: v for n, v in vec.items()})
            out[j] += ech.rank - base
    return out


# -- reports ------------------------------------------------------------------------

@dataclass
class HypercohomologyTable:
    geometry: GeometrySpec
    rows: List[Tuple[Tuple[Fraction, Fraction], List[int]]]
    oracle: List[int]
    oracle_ok: bool

    @property
    def verdict(self) -> bool:
        return all(dims == self.rows[0][1] for _, dims in self.rows)

    @property
    def euler_constant(self) -> bool:
        chis = {sum((-1) ** n * h for n, h in enumerate(dims)) for _, dims in self.rows}
        return len(chis) == 1


def independence_report(g: GeometrySpec, grid: Sequence[Tuple[object, object]],
                        window: Optional[int] = None) -> HypercohomologyTable:
    points = [(rational(lam), rational(tau)) for lam, tau in grid]
    if not points:
        raise InvalidInput("the grid must not be empty")
    if (0, 0) not in points:
        raise InvalidInput("the grid must contain (0, 0)")
    cx = assemble_cech(g, window or default_window(g))
    rows = [(pt, hyper_dims(cx, *pt)) for pt in points]
    oracle = line_bundle_oracle(g)
    zero_row = next(dims for pt, dims in rows if pt == (0, 0))
    return HypercohomologyTable(g, rows, oracle, zero_row == oracle)


@dataclass
class GrFTable:
    geometry: GeometrySpec
    table: List[List[int]]  # table[j][i] = h^{i-j}(Omega_f^j(alpha))
    sums_ok: bool
    graded: Dict[Tuple[Fraction, Fraction], List[List[int]]]  # graded[pt][j][i]

    @property
    def graded_ok(self) -> bool:
        return all(rows == self.table for rows in self.graded.values())

    @property
    def verdict(self) -> bool:
        return self.sums_ok and self.graded_ok


DEFAULT_FILTRATION_GRID = ((1, 0), (1, 1), (2, -1))


def grF_table(g: GeometrySpec, grid: Sequence[Tuple[object, object]] = DEFAULT_FILTRATION_GRID,
              window: Optional[int] = None) -> GrFTable:
    """Graded pieces of the stupid filtration versus sheaf cohomology."""
    d = g.dim
    top = 2 * d
    table = [[0] * (top + 1) for _ in range(d + 1)]
    for j in range(d + 1):
        for r, h in enumerate(sheaf_cohomology_dims(kontsevich_sheaf(g, j))):
            table[j][r + j] = h
    cx = assemble_cech(g, window or default_window(g))
    zero = hyper_dims(cx, 0, 0)
    sums_ok = all(sum(table[j][i] for j in range(d + 1)) == zero[i] for i in range(top + 1))
    graded = {}
    for lam, tau in grid:
        pt = (rational(lam), rational(tau))
        if pt[0] == 0:
            continue
        rows = [[0] * (top + 1) for _ in range(d + 1)]
        for i in range(top + 1):
            f = filtration_dims(cx, *pt, i)
            for j in range(d + 1):
                rows[j][i] = f[j] - f[j + 1]
        graded[pt] = rows
    return GrFTable(g, table, sums_ok, graded)
