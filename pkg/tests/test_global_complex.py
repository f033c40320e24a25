import itertools
import random
from fractions import Fraction

import pytest
import sympy

from kontsevich.errors import InvalidInput, UnsupportedGeometry, WindowTooSmall
from kontsevich.global_complex import (CHART_ZERO, GeometrySpec, assemble_cech,
                                       complex_dims, default_window, grF_table,
                                       hyper_dims, independence_report,
                                       kontsevich_sheaf, line_bundle_oracle,
                                       sheaf_cohomology_dims)

H = Fraction(1, 2)


def g1(a, alpha=0, **kw):
    return GeometrySpec(1, (a,), alpha=Fraction(alpha), **kw)


def test_geometry_validation():
    with pytest.raises(UnsupportedGeometry):
        GeometrySpec(2, (1, 1))
    with pytest.raises(UnsupportedGeometry):
        GeometrySpec(1, (0,))
    with pytest.raises(UnsupportedGeometry):
        GeometrySpec(2, (2, 0), h_axes={1})
    with pytest.raises(UnsupportedGeometry):
        GeometrySpec(1, (2,), alpha=1)
    g = GeometrySpec(2, (0, 3), h_axes={1}, alpha="2/3")
    assert (g.polar_axis, g.a, g.p, g.inf_axes) == (1, 3, 2, frozenset({2}))


def test_sheaf_examples():
    (s,) = kontsevich_sheaf(g1(2), 0).summands
    assert s.bidegree == (-2,)
    (s,) = kontsevich_sheaf(g1(2, H), 1).summands
    assert s.bidegree == (1,)
    # general d=1 shape: degrees floor(alpha a) - a and floor(alpha a)
    for a in range(1, 5):
        for j in range(a):
            g = g1(a, Fraction(j, a))
            assert kontsevich_sheaf(g, 0).summands[0].bidegree == (j - a,)
            assert kontsevich_sheaf(g, 1).summands[0].bidegree == (j,)


def test_sheaf_two_dimensional():
    g = GeometrySpec(2, (2, 0), h_axes={2})
    got = {s.axes: s.bidegree for s in kontsevich_sheaf(g, 1).summands}
    # the df condition binds on the summand without the polar frame
    assert got == {(1,): (0, 0), (2,): (-2, -1)}
    assert [s.bidegree for s in kontsevich_sheaf(g, 0).summands] == [(-2, 0)]
    assert [s.bidegree for s in kontsevich_sheaf(g, 2).summands] == [(0, -1)]


def test_sheaf_cohomology_examples():
    assert sheaf_cohomology_dims(kontsevich_sheaf(g1(2), 0)) == [0, 1]
    assert sheaf_cohomology_dims(kontsevich_sheaf(g1(2), 1)) == [1, 0]
    g = GeometrySpec(2, (2, 0), h_axes={2})
    s = kontsevich_sheaf(g, 1)
    only_bad = type(s)(1, tuple(x for x in s.summands if x.bidegree == (-2, -1)))
    assert sheaf_cohomology_dims(only_bad) == [0, 0, 0]


def test_sheaf_cohomology_monomial_count():
    """Kunneth formula against direct counting of Cech monomials per axis."""
    rng = random.Random(2)
    for _ in range(40):
        d = rng.randint(1, 3)
        lo = [rng.randint(-3, 3) for _ in range(d)]
        hi = [rng.randint(-3, 3) for _ in range(d)]
        from kontsevich.global_complex import KontsevichSheaf, Summand
        s = KontsevichSheaf(0, (Summand((), tuple(lo), tuple(hi)),))
        h0 = [sum(1 for m in range(-10, 11) if lo[i] <= m <= hi[i]) for i in range(d)]
        h1 = [sum(1 for m in range(-10, 11) if hi[i] < m < lo[i]) for i in range(d)]
        expect = [0] * (d + 1)
        for pat in itertools.product((0, 1), repeat=d):
            prod = 1
            for i, w in enumerate(pat):
                prod *= (h1 if w else h0)[i]
            expect[sum(pat)] += prod
        assert sheaf_cohomology_dims(s) == expect


def test_assemble_examples():
    cx = assemble_cech(g1(1), 4)
    m = cx.total(3, 5)
    assert (m @ m).is_zero()
    with pytest.raises(WindowTooSmall):
        assemble_cech(g1(3), 4)
    cx = assemble_cech(g1(2), 8)
    for (row, col), v in cx.df_mat.entries.items():
        src, dst = cx.basis[col], cx.basis[row]
        assert src.axes == () and dst.axes == (0,)
        assert dst.m == (src.m[0] - 2,)
        if src.charts == (CHART_ZERO,):
            assert v == -2
    g = GeometrySpec(2, (2, 0), h_axes={2})
    cx = assemble_cech(g, 5)
    for (row, col) in cx.df_mat.entries:
        assert 0 not in cx.basis[col].axes and 0 in cx.basis[row].axes


@pytest.mark.parametrize("g", [g1(1), g1(2, H), g1(3, Fraction(2, 3)),
                               GeometrySpec(2, (2, 0), h_axes={2}),
                               GeometrySpec(2, (0, 1), h_axes=set(), alpha=0)])
def test_square_zero(g):
    cx = assemble_cech(g, max(g.f_exp) + 2)
    rng = random.Random(4)
    for _ in range(3):
        m = cx.total(Fraction(rng.randint(-3, 3), rng.randint(1, 3)), rng.randint(-3, 3))
        assert (m @ m).is_zero()


def test_hyper_dims_examples():
    cx = assemble_cech(g1(2), default_window(g1(2)))
    assert hyper_dims(cx, 0, 0) == [0, 2, 0]
    assert hyper_dims(cx, 1, 0) == [0, 2, 0]
    g = g1(2, H)
    assert hyper_dims(assemble_cech(g, default_window(g)), 1, 1) == [0, 2, 0]


def _dense_dims(cx, lam, tau):
    """Cohomology via sympy ranks of the dense degree blocks."""
    m = sympy.Matrix(cx.total(lam, tau).to_dense())
    deg = cx.degrees
    top = 2 * cx.geometry.dim
    idx = {n: [i for i, x in enumerate(deg) if x == n] for n in range(-1, top + 2)}
    rank = {}
    for n in range(-1, top + 1):
        rows, cols = idx[n + 1], idx[n]
        rank[n] = m.extract(rows, cols).rank() if rows and cols else 0
    return [len(idx[n]) - rank[n] - rank[n - 1] for n in range(top + 1)]


@pytest.mark.parametrize("g,pt", [(g1(1), (1, 1)), (g1(2), (0, 1)), (g1(2, H), (2, -1))])
def test_hyper_dims_dense_oracle(g, pt):
    cx = assemble_cech(g, max(g.f_exp) + 2)
    assert complex_dims(cx.degrees, cx.total(*pt), 2) == _dense_dims(cx, *pt)


def test_window_monotone():
    g = g1(2, H)
    rows = {w: hyper_dims(assemble_cech(g, w), 1, 1, check=False) for w in range(4, 12)}
    assert len({tuple(r) for r in rows.values()}) == 1


def test_independence_examples():
    grid = [(x, y) for x in (0, 1, -1, H) for y in (0, 1, -1, H)]
    t = independence_report(g1(1), grid)
    assert t.verdict and t.oracle_ok and t.euler_constant
    assert all(dims == [0, 1, 0] for _, dims in t.rows)
    grid9 = [(x, y) for x in (0, 1, -1) for y in (0, 1, -1)]
    t = independence_report(g1(3, Fraction(1, 3)), grid9)
    assert t.verdict and all(dims == [0, 3, 0] for _, dims in t.rows)
    with pytest.raises(InvalidInput):
        independence_report(g1(1), [])
    with pytest.raises(InvalidInput):
        independence_report(g1(1), [(1, 1)])


def test_independence_two_dimensional():
    g = GeometrySpec(2, (2, 0), h_axes={2})
    t = independence_report(g, [(0, 0), (1, 0), (1, 1), (0, 1)], window=6)
    assert t.verdict and t.oracle_ok
    assert t.rows[0][1] == [0, 2, 0, 0, 0]


def test_alternative_divisor_at_infinity():
    g = g1(2, inf_axes=set())
    grid = [(0, 0), (1, 0), (1, 1), (0, 1), (-1, H)]
    t = independence_report(g, grid)
    assert t.verdict and t.oracle_ok
    assert t.rows[0][1] == line_bundle_oracle(g) == [0, 1, 0]


def test_scaling_and_floor_dependence():
    g = g1(3, Fraction(1, 3))
    cx = assemble_cech(g, default_window(g))
    for lam, tau in [(1, 1), (1, -2), (H, 3)]:
        base = hyper_dims(cx, lam, tau)
        for c in (2, Fraction(-1, 3)):
            assert hyper_dims(cx, c * lam, c * tau) == base
    a = hyper_dims(assemble_cech(g1(2, Fraction(1, 4)), 12), 1, 0)
    b = hyper_dims(assemble_cech(g1(2), 12), 1, 0)
    assert a == b
    assert assemble_cech(g1(2, Fraction(1, 4)), 6).basis == assemble_cech(g1(2), 6).basis


def test_grF_examples():
    t = grF_table(g1(2))
    assert t.table == [[0, 1, 0], [0, 1, 0]] and t.verdict
    t = grF_table(g1(2, H))
    assert t.table[0][1] == 0 and t.table[1][1] == 2 and t.verdict
    t = grF_table(g1(1))
    assert t.table[0][1] == 0 and t.table[1][1] == 1 and t.verdict
