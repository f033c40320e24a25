"""The u-model of the family over the tau-line, the residue of tau d/dtau and strictness.

Sections of the family model are spanned by ``x^m U^j omega_S`` with
``U = tau f`` the formal symbol of the generator power ``(tau f)^j v``.  On the
polar axis the chart at 0 allows ``m >= -p`` (times the log frame), the chart
at infinity allows ``m - j a <= hi`` (the coefficient of ``tau^j``), and the
overlap allows everything.  The operators are

    d(x^m U^j) = sum_i (m_i - j a_i) x^m U^j du_i/u_i - a_i x^m U^{j+1} du_i/u_i
    theta(x^m U^j) = j x^m U^j + x^m U^{j+1}          (theta = tau d/dtau)
    tau(x^m U^j) = x^{m+a} U^{j+1}

The finite instance keeps ``j <= top`` and, on the polar axis, ``m <= B`` and
``m - j a >= -B - top a``.  The discarded monomials span a subspace stable
under all three operators, so the instance is an honest quotient and the
bracket identities hold exactly.

The fiber at ``tau = 0`` is the quotient by the image of ``tau``; it is spanned
by the monomials outside that image.  Its higher ``U``-levels only survive on
the chart at 0, and cohomology is read off from ``K_N``, the largest
subcomplex supported in ``j <= N``.  The inclusion ``K_N -> K_{N+1}`` is
checked to be a quasi-isomorphism before anything is reported.
"""
from __future__ import annotations

import functools
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .errors import (BracketCheckFailed, InvalidInput, NonRationalSpectrum,
                     TruncationUnstable, WindowTooSmall)
from .exact import (Echelon, SparseMatrix, Vector, _axpy, components,
                    mat_kernel_basis, rational, rational_spectrum)
from .global_complex import (CHART_BOTH, CHART_INF, CHART_ZERO, BasisKey,
                             GeometrySpec, _insert_sign, assemble_cech,
                             default_window, hyper_dims)


class UKey(NamedTuple):
    charts: Tuple[int, ...]
    axes: Tuple[int, ...]  # 0-based, sorted
    m: Tuple[int, ...]
    j: int

    @property
    def cech_degree(self) -> int:
        return sum(1 for k in self.charts if k == CHART_BOTH)

    @property
    def degree(self) -> int:
        return self.cech_degree + len(self.axes)


def _frame_bounds(g: GeometrySpec, axes0) -> Tuple[List[int], List[int]]:
    lo, hi = [], []
    for i in range(g.dim):
        if i in axes0:
            lo.append(0 if g.zero_in_d(i) else 1)
            hi.append(0 if g.inf_in_d(i) else -1)
        else:
            lo.append(0)
            hi.append(0)
    lo[g.polar_axis] -= g.p
    return lo, hi


@dataclass(frozen=True, eq=False)
class UComplexInstance:
    """Finite u-model.

    ``d_mat`` is the full differential of the Cech-de Rham total complex
    (Cech coboundary plus ``(-1)^c`` times the relative differential).
    """
    geometry: GeometrySpec
    trunc_n: int
    window: int
    top: int
    basis: Tuple[UKey, ...]
    d_mat: SparseMatrix
    tau_mat: SparseMatrix
    theta_mat: SparseMatrix
    index: Dict[UKey, int] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.basis)

    def spaces(self) -> Dict[int, List[int]]:
        """Basis indices grouped by total degree."""
        out: Dict[int, List[int]] = defaultdict(list)
        for n, b in enumerate(self.basis):
            out[b.degree].append(n)
        return dict(out)


def _u_basis(g: GeometrySpec, window: int, top: int) -> List[UKey]:
    d, i0, a = g.dim, g.polar_axis, g.a
    floor_e = -window - top * a
    out = []
    for charts in itertools.product((CHART_ZERO, CHART_INF, CHART_BOTH), repeat=d):
        for q in range(d + 1):
            for axes in itertools.combinations(range(d), q):
                lo, hi = _frame_bounds(g, axes)
                for j in range(top + 1):
                    ranges = []
                    for i, kappa in enumerate(charts):
                        if i == i0:
                            low, high = floor_e + j * a, window
                            if kappa == CHART_ZERO:
                                low = max(low, lo[i])
                            elif kappa == CHART_INF:
                                high = min(high, hi[i] + j * a)
                        else:
                            low, high = -window, window
                            if kappa == CHART_ZERO:
                                low = max(low, lo[i])
                            elif kappa == CHART_INF:
                                high = min(high, hi[i])
                        ranges.append(range(low, high + 1))
                    for m in itertools.product(*ranges):
                        out.append(UKey(charts, axes, m, j))
    out.sort(key=lambda b: (b.degree, b.j, b.charts, b.axes, b.m))
    return out


def _check_brackets(d: SparseMatrix, theta: SparseMatrix, tau: SparseMatrix) -> None:
    if not (d @ d).is_zero():
        raise BracketCheckFailed("d^2 != 0 on the u-model")
    if not (theta @ d - d @ theta).is_zero():
        raise BracketCheckFailed("theta does not commute with d")
    if theta @ tau - tau @ theta != tau:
        raise BracketCheckFailed("[theta, tau] != tau")


def build_u_complex(g: GeometrySpec, trunc_n: Optional[int] = None,
                    window: Optional[int] = None, check: bool = True) -> UComplexInstance:
    """Assemble the u-model for truncation ``trunc_n`` and verify the brackets."""
    trunc_n = default_trunc(g) if trunc_n is None else int(trunc_n)
    window = default_window(g) if window is None else int(window)
    if trunc_n < 1:
        raise ValueError("trunc_n must be at least 1")
    if window < max(g.f_exp) + 2:
        raise WindowTooSmall(f"window {window} below the minimum {max(g.f_exp) + 2}")
    return _build(g, trunc_n, window, check)


@functools.lru_cache(maxsize=32)
def _build(g: GeometrySpec, trunc_n: int, window: int, check: bool) -> UComplexInstance:
    top = trunc_n + 3
    basis = _u_basis(g, window, top)
    index = {b: n for n, b in enumerate(basis)}
    i0, a = g.polar_axis, g.a
    dd: Dict[Tuple[int, int], Fraction] = {}
    th: Dict[Tuple[int, int], Fraction] = {}
    tt: Dict[Tuple[int, int], Fraction] = {}

    def put(store, key, col, value):
        row = index.get(key)
        if row is not None and value:
            store[(row, col)] = store.get((row, col), 0) + Fraction(value)

    for col, b in enumerate(basis):
        sign_c = (-1) ** b.cech_degree
        seen_both = 0
        for i, kappa in enumerate(b.charts):
            if kappa != CHART_BOTH:
                charts = b.charts[:i] + (CHART_BOTH,) + b.charts[i + 1:]
                tgt = UKey(charts, b.axes, b.m, b.j)
                if tgt not in index:
                    raise BracketCheckFailed(f"restriction of {b} left the window")
                put(dd, tgt, col, (-1) ** seen_both * (1 if kappa == CHART_INF else -1))
            else:
                seen_both += 1
        for i in range(g.dim):
            if i in b.axes:
                continue
            sgn, axes = _insert_sign(b.axes, i)
            ai = a if i == i0 else 0
            put(dd, UKey(b.charts, axes, b.m, b.j), col, sign_c * sgn * (b.m[i] - b.j * ai))
            if ai:
                put(dd, UKey(b.charts, axes, b.m, b.j + 1), col, sign_c * sgn * (-ai))
        put(th, b, col, b.j)
        put(th, UKey(b.charts, b.axes, b.m, b.j + 1), col, 1)
        shifted = b.m[:i0] + (b.m[i0] + a,) + b.m[i0 + 1:]
        put(tt, UKey(b.charts, b.axes, shifted, b.j + 1), col, 1)
    n = len(basis)
    clean = lambda e: {k: v for k, v in e.items() if v}
    inst = UComplexInstance(g, trunc_n, window, top, tuple(basis),
                            SparseMatrix._trusted(n, n, clean(dd)),
                            SparseMatrix._trusted(n, n, clean(tt)),
                            SparseMatrix._trusted(n, n, clean(th)), index)
    if check:
        _check_brackets(inst.d_mat, inst.theta_mat, inst.tau_mat)
    return inst


def default_trunc(g: GeometrySpec) -> int:
    return 2 * max(g.f_exp) + 2


# -- linear algebra on subcomplexes -----------------------------------------------

class _Cohomology(NamedTuple):
    classes: List[Vector]       # cocycles representing a basis of H^n
    boundaries: List[Vector]    # spanning set of B^n
    spans: Dict[int, List[Vector]]  # spanning set of the subcomplex in each degree


def _apply(cols: Sequence[Vector], vec: Vector) -> Vector:
    out: Vector = {}
    for c, x in vec.items():
        _axpy(out, x, cols[c])
    return out


def _cocycles(cols: Sequence[Vector], span: List[Vector]) -> List[Vector]:
    if not span:
        return []
    images = [_apply(cols, v) for v in span]
    rows = sorted({r for img in images for r in img})
    rpos = {r: n for n, r in enumerate(rows)}
    mat = SparseMatrix._trusted(len(rows), len(span), {
        (rpos[r], n): x for n, img in enumerate(images) for r, x in img.items()})
    out = []
    for combo in mat_kernel_basis(mat):
        vec: Vector = {}
        for n, c in combo.items():
            _axpy(vec, c, span[n])
        if vec:
            out.append(vec)
    return out


def _cohomology(cols: Sequence[Vector], spans: Dict[int, List[Vector]], n: int) -> _Cohomology:
    boundaries = [b for b in (_apply(cols, v) for v in spans.get(n - 1, [])) if b]
    ech = Echelon()
    for b in boundaries:
        ech.add(b)
    classes = [z for z in _cocycles(cols, spans.get(n, [])) if ech.add(z)]
    return _Cohomology(classes, boundaries, spans)


def _class_coordinates(target: Vector, classes: List[Vector], boundaries: List[Vector]) -> Optional[List[Fraction]]:
    """Coordinates of the class of ``target`` in the basis ``classes``."""
    ech = Echelon(track=True)
    for b in boundaries:
        ech.add(b)
    for z in classes:
        ech.add(z)
    coords = ech.coordinates(target)
    if coords is None:
        return None
    offset = len(boundaries)
    return [coords.get(offset + k, Fraction(0)) for k in range(len(classes))]


# -- the fiber at tau = 0 -------------------------------------------------------

@dataclass(eq=False)
class _Fiber:
    inst: UComplexInstance
    keep: List[int]                 # fiber basis as instance indices
    cols: List[Vector]              # fiber differential, columns keyed by instance index
    theta: List[Vector]
    comps: List[List[int]]


@functools.lru_cache(maxsize=32)
def _fiber(inst: UComplexInstance) -> _Fiber:
    image = {r for (r, _c) in inst.tau_mat.entries}
    keep = [n for n in range(inst.size) if n not in image]
    keep_set = set(keep)
    dcols = inst.d_mat.col_dicts()
    tcols = inst.theta_mat.col_dicts()
    cols: List[Vector] = [dict() for _ in range(inst.size)]
    theta: List[Vector] = [dict() for _ in range(inst.size)]
    edges = []
    for n in keep:
        cols[n] = {r: v for r, v in dcols[n].items() if r in keep_set}
        theta[n] = {r: v for r, v in tcols[n].items() if r in keep_set}
        edges += [(n, r) for r in cols[n]] + [(n, r) for r in theta[n]]
    comps = [c for c in components(inst.size, edges) if c[0] in keep_set]
    return _Fiber(inst, keep, cols, theta, comps)


def _truncated_spans(fib: _Fiber, comp: List[int], level: int) -> Dict[int, List[Vector]]:
    """Spanning sets of ``K_level`` restricted to one component."""
    basis = fib.inst.basis
    spans: Dict[int, List[Vector]] = defaultdict(list)
    edge: Dict[int, List[int]] = defaultdict(list)
    for n in comp:
        b = basis[n]
        if b.j < level:
            spans[b.degree].append({n: Fraction(1)})
        elif b.j == level:
            edge[b.degree].append(n)
    for deg, idxs in edge.items():
        # level-`level` vectors whose differential stays below level + 1
        rows = sorted({r for x in idxs for r in fib.cols[x] if basis[r].j > level})
        rpos = {r: t for t, r in enumerate(rows)}
        mat = SparseMatrix._trusted(len(rows), len(idxs), {
            (rpos[r], t): v for t, x in enumerate(idxs) for r, v in fib.cols[x].items() if r in rpos})
        for combo in mat_kernel_basis(mat):
            spans[deg].append({idxs[t]: c for t, c in combo.items()})
    return spans


@dataclass
class _LevelData:
    dims: List[int]
    per_comp: List[Dict[int, _Cohomology]]


def _level_data(fib: _Fiber, level: int) -> _LevelData:
    top = 2 * fib.inst.geometry.dim
    dims = [0] * (top + 1)
    per_comp = []
    for comp in fib.comps:
        spans = _truncated_spans(fib, comp, level)
        coh = {n: _cohomology(fib.cols, spans, n) for n in range(top + 1)}
        for n in range(top + 1):
            dims[n] += len(coh[n].classes)
        per_comp.append(coh)
    return _LevelData(dims, per_comp)


def _check_inclusion(low: _LevelData, high: _LevelData, n: int) -> bool:
    """Is ``H^n(K_N) -> H^n(K_{N+1})`` an isomorphism?"""
    for c_low, c_high in zip(low.per_comp, high.per_comp):
        a, b = c_low[n], c_high[n]
        if len(a.classes) != len(b.classes):
            return False
        ech = Echelon()
        for v in b.boundaries:
            ech.add(v)
        base = ech.rank
        for z in a.classes:
            ech.add(z)
        if ech.rank - base != len(a.classes):
            return False
    return True


@functools.lru_cache(maxsize=64)
def _levels(inst: UComplexInstance, level: int) -> _LevelData:
    return _level_data(_fiber(inst), level)


def _stable_levels(inst: UComplexInstance, level: int) -> Tuple[_LevelData, _LevelData]:
    low, high = _levels(inst, level), _levels(inst, level + 1)
    top = 2 * inst.geometry.dim
    if low.dims != high.dims or not all(_check_inclusion(low, high, n) for n in range(top + 1)):
        raise TruncationUnstable(
            f"u-degree {level} gives {low.dims}, u-degree {level + 1} gives {high.dims}")
    return low, high


def family_h_dims(u: UComplexInstance) -> List[int]:
    """Cohomology dimensions of the fiber at ``tau = 0``, degrees ``0..2d``."""
    low, _ = _stable_levels(u, u.trunc_n)
    return list(low.dims)


def _residue_at(u: UComplexInstance, i: int, level: int) -> Tuple[SparseMatrix, List[Vector], List[Vector]]:
    low, high = _stable_levels(u, level)
    fib = _fiber(u)
    classes: List[Vector] = []
    blocks = []
    for c_low, c_high in zip(low.per_comp, high.per_comp):
        a, b = c_low[i], c_high[i]
        if not a.classes:
            continue
        block = []
        for z in a.classes:
            coords = _class_coordinates(_apply(fib.theta, z), a.classes, b.boundaries)
            if coords is None:
                raise TruncationUnstable("theta of a class left the span of the classes")
            block.append(coords)
        blocks.append((len(classes), block))
        classes.extend(a.classes)
    entries = {}
    for offset, block in blocks:
        for col, coords in enumerate(block):
            for row, v in enumerate(coords):
                if v:
                    entries[(offset + row, offset + col)] = v
    boundaries = [v for c in low.per_comp for v in c[i].boundaries]
    return SparseMatrix._trusted(len(classes), len(classes), entries), classes, boundaries


def residue_matrix(u: UComplexInstance, i: int) -> SparseMatrix:
    """Matrix of the endomorphism induced by ``tau d/dtau`` on ``H^i`` of the fiber."""
    return _residue_at(u, i, u.trunc_n)[0]


# -- residue reports ------------------------------------------------------------

@dataclass
class ResidueReport:
    h_degree: Optional[int]
    matrix: SparseMatrix
    spectrum: Optional[List[Fraction]]
    interval_ok: bool
    stable: Optional[bool] = None
    violation: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.violation is None and self.interval_ok and self.stable is not False


def residue_spectrum_check(m: SparseMatrix, alpha, reference: Optional[SparseMatrix] = None,
                           h_degree: Optional[int] = None) -> ResidueReport:
    """Spectrum of ``m`` and whether it lies in ``[-alpha, 1 - alpha)``.

    A non-rational spectrum is reported as a violation rather than raised.
    With ``reference`` (the same residue from a finer truncation) the report
    also records whether both spectra agree.
    """
    alpha = rational(alpha)
    try:
        spectrum = rational_spectrum(m)
    except NonRationalSpectrum as exc:
        return ResidueReport(h_degree, m, None, False, None, f"non-rational spectrum: {exc}")
    ok = all(-alpha <= b < 1 - alpha for b in spectrum)
    stable = None
    if reference is not None:
        try:
            stable = rational_spectrum(reference) == spectrum
        except NonRationalSpectrum:
            stable = False
    return ResidueReport(h_degree, m, spectrum, ok, stable)


def residue_report(g: GeometrySpec, i: int, trunc_n: Optional[int] = None,
                   window: Optional[int] = None) -> ResidueReport:
    """Residue on ``H^i`` with the stability comparison against ``trunc_n + 1``."""
    u = build_u_complex(g, trunc_n, window)
    m = residue_matrix(u, i)
    finer = _residue_at(u, i, u.trunc_n + 1)[0]
    return residue_spectrum_check(m, g.alpha, reference=finer, h_degree=i)


# -- strictness -------------------------------------------------------------------

def _vec(values) -> Vector:
    if isinstance(values, dict):
        return {int(k): rational(v) for k, v in values.items() if rational(v)}
    return {n: rational(v) for n, v in enumerate(values) if rational(v)}


def _span(vectors: Sequence[Vector]) -> List[Vector]:
    ech = Echelon()
    return [v for v in vectors if v and ech.add(v)]


def _rank(vectors: Sequence[Vector]) -> int:
    return len(_span(vectors))


def _contains(big: Sequence[Vector], small: Sequence[Vector]) -> bool:
    ech = Echelon()
    for v in big:
        ech.add(v)
    return all(ech.contains(v) for v in small)


def _intersection(a: Sequence[Vector], b: Sequence[Vector]) -> List[Vector]:
    """Basis of ``span(a) & span(b)`` from the kernel of ``[a | -b]``."""
    a, b = _span(a), _span(b)
    if not a or not b:
        return []
    cols = list(a) + [{k: -v for k, v in w.items()} for w in b]
    rows = sorted({r for c in cols for r in c})
    rpos = {r: n for n, r in enumerate(rows)}
    mat = SparseMatrix._trusted(len(rows), len(cols), {
        (rpos[r], n): v for n, c in enumerate(cols) for r, v in c.items()})
    out = []
    for combo in mat_kernel_basis(mat):
        vec: Vector = {}
        for n, c in combo.items():
            if n < len(a):
                _axpy(vec, c, a[n])
        if vec:
            out.append(vec)
    return _span(out)


@dataclass
class FilteredSpace:
    """``(V, decomposition, nilpotent N, increasing filtration)``.

    ``filtration[t]`` spans ``F_{start + t}``; below the list the filtration
    is zero, above it the whole space.
    """
    total_dim: int
    pieces: List[List[Vector]]
    n_mat: SparseMatrix
    filtration: List[List[Vector]]
    start: int = 0

    def __post_init__(self):
        self.pieces = [[_vec(v) for v in piece] for piece in self.pieces]
        self.filtration = [[_vec(v) for v in f] for f in self.filtration]

    def piece(self, j: int) -> List[Vector]:
        t = j - self.start
        if t < 0:
            return []
        if t >= len(self.filtration):
            return [{n: Fraction(1)} for n in range(self.total_dim)]
        return self.filtration[t]

    def image(self, vectors: Sequence[Vector]) -> List[Vector]:
        return [w for w in (self.n_mat.apply(v) for v in vectors) if w]


def validate_filtered_space(fs: FilteredSpace) -> None:
    n = fs.total_dim
    if fs.n_mat.shape != (n, n):
        raise InvalidInput(f"N has shape {fs.n_mat.shape}, expected {(n, n)}")
    for group in fs.pieces + fs.filtration:
        for v in group:
            if any(not 0 <= k < n for k in v):
                raise InvalidInput("vector index outside the space")
    power = SparseMatrix.identity(n)
    for _ in range(n):
        power = power @ fs.n_mat
    if not power.is_zero():
        raise InvalidInput("N is not nilpotent")
    if sum(_rank(p) for p in fs.pieces) != n or _rank([v for p in fs.pieces for v in p]) != n:
        raise InvalidInput("the pieces do not form a direct sum decomposition")
    for p in fs.pieces:
        if not _contains(p, fs.image(p)):
            raise InvalidInput("N does not preserve the decomposition")
    for j in range(fs.start - 1, fs.start + len(fs.filtration) + 1):
        if not _contains(fs.piece(j + 1), fs.piece(j)):
            raise InvalidInput(f"F_{j} is not contained in F_{j + 1}")
        if not _contains(fs.piece(j + 1), fs.image(fs.piece(j))):
            raise InvalidInput(f"N F_{j} is not contained in F_{j + 1}")


def strictness_check(fs: FilteredSpace) -> bool:
    """``N(V) & F_j == N(F_{j-1})`` for every ``j``."""
    validate_filtered_space(fs)
    whole = [{k: Fraction(1)} for k in range(fs.total_dim)]
    nv = fs.image(whole)
    for j in range(fs.start, fs.start + len(fs.filtration) + 2):
        left = _intersection(nv, fs.piece(j))
        right = fs.image(fs.piece(j - 1))
        if not (_contains(left, right) and _contains(right, left)):
            return False
    return True


# -- the strictness statement for the residue ---------------------------------------

def _solve_columns(basis: List[Vector], targets: List[Vector]) -> List[Vector]:
    ech = Echelon(track=True)
    for v in basis:
        ech.add(v)
    out = []
    for t in targets:
        c = ech.coordinates(t)
        if c is None:
            raise InvalidInput("vector outside the span of the basis")
        out.append(c)
    return out


def _jordan_split(r: SparseMatrix) -> Tuple[List[Tuple[Fraction, List[Vector]]], SparseMatrix]:
    """Generalized eigenspaces and the nilpotent part of ``r`` (rational spectrum)."""
    n = r.rows
    spectrum = rational_spectrum(r)
    pieces = []
    for beta in sorted(set(spectrum)):
        mult = spectrum.count(beta)
        shifted = r - SparseMatrix.identity(n).scale(beta)
        power = SparseMatrix.identity(n)
        for _ in range(mult):
            power = power @ shifted
        pieces.append((beta, mat_kernel_basis(power)))
    basis = [v for _, vs in pieces for v in vs]
    eig = [beta for beta, vs in pieces for _ in vs]
    # semisimple part S = P diag(beta) P^{-1}; columns S e_k
    coords = _solve_columns(basis, [{k: Fraction(1)} for k in range(n)])
    entries = {}
    for k, c in enumerate(coords):
        col: Vector = {}
        for t, x in c.items():
            _axpy(col, x * eig[t], basis[t])
        for row, v in col.items():
            entries[(row, k)] = v
    semisimple = SparseMatrix(n, n, entries)
    return pieces, r - semisimple


@dataclass
class TheoremIIIReport:
    h_degree: int
    spectrum: List[Fraction]
    filtration_dims: List[int]  # dim F^j for j = 0..d+1
    nilpotent_rank: int
    strict: bool
    violation: Optional[str] = None

    @property
    def verdict(self) -> bool:
        return self.violation is None and self.strict


def fiber_filtration(g: GeometrySpec, i: int, trunc_n: Optional[int] = None,
                     window: Optional[int] = None):
    """Residue matrix and the stupid filtration transported onto the fiber classes.

    Returns ``(residue, [F^0, F^1, ..., F^{d+1}])`` with each ``F^j`` given by
    vectors in the coordinates of the class basis used by the residue.
    """
    u = build_u_complex(g, trunc_n, window)
    res, classes, boundaries = _residue_at(u, i, u.trunc_n)
    cx = assemble_cech(g, u.window)
    hyper_dims(cx, 1, 0)  # window stability for the Kontsevich side
    total = cx.total(1, 0)
    cols = total.col_dicts()
    deg = cx.degrees
    forms = [len(b.axes) for b in cx.basis]
    src = [n for n in range(cx.size) if deg[n] == i]

    def transport(vec: Vector) -> Vector:
        out = {}
        for n, x in vec.items():
            b = cx.basis[n]
            key = (b.charts, b.axes, b.m, 0)
            idx = u.index.get(key)
            if idx is None:
                raise TruncationUnstable(f"the u-model window misses {b}")
            out[idx] = x
        return out

    levels = []
    image_all = None
    for j in range(g.dim + 2):
        chosen = [{n: Fraction(1)} for n in src if forms[n] >= j]
        cocycles = _cocycles(cols, chosen)
        coords = []
        for z in cocycles:
            c = _class_coordinates(transport(z), classes, boundaries)
            if c is None:
                raise InvalidInput("a Kontsevich cocycle does not map into the fiber classes")
            coords.append({k: v for k, v in enumerate(c) if v})
        span = _span(coords)
        if j == 0:
            image_all = len(span)
        levels.append(span)
    if image_all != len(classes):
        raise InvalidInput("the comparison map is not onto the fiber cohomology")
    return res, levels


def verify_theorem_iii(g: GeometrySpec, i: int, trunc_n: Optional[int] = None,
                       window: Optional[int] = None) -> TheoremIIIReport:
    """Strict compatibility of the nilpotent part of the residue with the filtration."""
    res, levels = fiber_filtration(g, i, trunc_n, window)
    n = res.rows
    try:
        pieces, nil = _jordan_split(res)
    except NonRationalSpectrum as exc:
        return TheoremIIIReport(i, [], [len(f) for f in levels], 0, False, f"non-rational spectrum: {exc}")
    spectrum = rational_spectrum(res)
    # decreasing F^j becomes the increasing F_{-j}
    increasing = list(reversed(levels))
    fs = FilteredSpace(n, [vs for _, vs in pieces], nil, increasing, start=-(len(levels) - 1))
    strict = strictness_check(fs)
    nil_rank = _rank(fs.image([{k: Fraction(1)} for k in range(n)]))
    return TheoremIIIReport(i, spectrum, [len(f) for f in levels], nil_rank, strict)
