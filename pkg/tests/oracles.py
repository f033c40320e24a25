"""Independent reference implementations used by the test suite.

The sympy oracle represents a section ``E * v`` of the local module by the
Laurent expression ``E`` in ``x_i`` and ``tau`` and applies the derivation
rules with sympy differentiation, which shares no code with the library's
index bookkeeping.
"""
import random
from fractions import Fraction

import sympy

from kontsevich.exact import CoeffPoly, Echelon, unit, mi_add
from kontsevich.local_model import Chart, Mode, ModuleElement, Presentation, Term

TAU, LAM = sympy.symbols("tau lam")


def xs(chart):
    return sympy.symbols(f"x1:{chart.ell + 1}")


def f_expr(chart):
    out = sympy.Integer(1)
    for xi, ki in zip(xs(chart), chart.k):
        out *= xi ** (-ki)
    return out


def poly_expr(g: CoeffPoly):
    return sum((sympy.Rational(c.numerator, c.denominator) * LAM ** d
                for d, c in g.coeffs.items()), sympy.Integer(0))


def to_sympy(e: ModuleElement):
    x = xs(e.chart)
    tf = TAU * f_expr(e.chart)
    total = sympy.Integer(0)
    for (m, j), g in e.terms.items():
        mono = sympy.Integer(1)
        for xi, mi in zip(x, m):
            mono *= xi ** mi
        total += poly_expr(g) * mono * tf ** j
    return sympy.expand(total)


def weight(mode):
    return LAM if mode is Mode.TWISTOR else sympy.Integer(1)


def partial(chart, expr, i, mode):
    xi = xs(chart)[i - 1]
    return sympy.expand(weight(mode) * sympy.diff(expr, xi) + expr * TAU * sympy.diff(f_expr(chart), xi))


def tau_del_tau(chart, expr, mode):
    return sympy.expand(weight(mode) * TAU * sympy.diff(expr, TAU) + expr * TAU * f_expr(chart))


def del_tau(chart, expr, mode):
    return sympy.expand(weight(mode) * sympy.diff(expr, TAU) + expr * f_expr(chart))


def mult_tau(chart, expr):
    return sympy.expand(TAU * expr)


def same(a, b):
    return sympy.expand(a - b) == 0


# -- random data -------------------------------------------------------------------

def random_chart(rng, max_ell=3, max_k=4):
    ell = rng.randint(1, max_ell)
    ell1 = rng.randint(1, ell)
    k = tuple(rng.randint(1, max_k) if i < ell1 else 0 for i in range(ell))
    return Chart(ell, ell1, k)


def random_coeff(rng, mode):
    c0 = Fraction(rng.randint(-5, 5), rng.randint(1, 3))
    if mode is Mode.TWISTOR and rng.random() < 0.5:
        return CoeffPoly({0: c0, 1: rng.randint(-3, 3)})
    return CoeffPoly.const(c0 or 1)


def random_element(rng, chart, mode, terms=3):
    data = {}
    for _ in range(rng.randint(1, terms)):
        m = tuple(rng.randint(-3, 3) for _ in range(chart.ell))
        data[(m, rng.randint(0, 2))] = random_coeff(rng, mode)
    return ModuleElement(chart, data)


def random_presentation(rng, chart, mode, max_n=3, max_j=3, terms=3):
    base = tuple(rng.randint(0, chart.k[i]) if i < chart.ell1 else 0 for i in range(chart.ell))
    out = []
    for _ in range(rng.randint(1, terms)):
        n = [0] * chart.ell
        for _ in range(rng.randint(0, max_n)):
            n[rng.randrange(chart.ell)] += 1
        q = tuple(rng.randint(0, 2) for _ in range(chart.ell))
        out.append(Term(tuple(n), q, rng.randint(0, max_j), random_coeff(rng, mode)))
    return Presentation(chart, base, tuple(out))


def re_present(rng, p: Presentation, mode, moves=3):
    """Another presentation of the same section.

    Adds zero combinations ``d^n d_i(g x_i x^{..q}) - d^n(c g x^{..q}) - d^n(-k_i g x^{..q} tau f)``
    and splits coefficients, so the result differs syntactically.
    """
    chart = p.chart
    w = CoeffPoly.lam() if mode is Mode.TWISTOR else CoeffPoly.const(1)
    terms = list(p.terms)
    for _ in range(moves):
        if terms and rng.random() < 0.3:
            t = terms.pop(rng.randrange(len(terms)))
            part = random_coeff(rng, mode)
            terms += [t._replace(g=part), t._replace(g=t.g - part)]
            continue
        i = rng.randrange(chart.ell)
        n = tuple(rng.randint(0, 2) for _ in range(chart.ell))
        q = tuple(rng.randint(0, 2) for _ in range(chart.ell))
        j = rng.randint(0, 2)
        g = random_coeff(rng, mode)
        e_i = unit(chart.ell, i)
        c = q[i] - p.base_p[i] - chart.k[i] * j
        terms.append(Term(mi_add(n, e_i), mi_add(q, e_i), j, g))
        terms.append(Term(n, q, j, -(g * w * c)))
        terms.append(Term(n, q, j + 1, g * chart.k[i]))
    rng.shuffle(terms)
    return Presentation(chart, p.base_p, tuple(terms))


# -- exhaustive membership search -------------------------------------------------

def _vector(e: ModuleElement, index):
    vec = {}
    for key, g in e.terms.items():
        if not g.is_constant():
            raise ValueError("span search works in the classical mode")
        vec[index.setdefault(key, len(index))] = g.coeffs.get(0, Fraction(0))
    return vec


def span_member(chart, base, target: ModuleElement, level, max_q, max_j):
    """Is ``target`` a combination of ``d_1^n(x^{-1-p+q}(tau f)^{j'} v)`` with ``n <= level``?

    Only for one-variable charts, by exhaustive enumeration of generators.
    """
    from kontsevich.local_model import canonical_expand
    index = {}
    ech = Echelon()
    for n in range(level + 1):
        for q in range(max_q + 1):
            for jj in range(max_j + 1):
                gen = canonical_expand(Presentation.single(chart, base, (n,), (q,), jj, 1))
                ech.add(_vector(gen, index))
    vec = _vector(target, index)
    return ech.contains(vec)


# -- filtered spaces -----------------------------------------------------------------

def _mat(vectors, n):
    return sympy.Matrix(n, len(vectors), lambda r, c: vectors[c].get(r, 0)) if vectors else sympy.zeros(n, 0)


def _rank(m):
    return m.rank() if m.cols and m.rows else 0


def strict_oracle(fs):
    """``N(V) & F_j == N(F_{j-1})`` by sympy ranks, for every ``j`` of the list."""
    n = fs.total_dim
    N = sympy.Matrix(fs.n_mat.to_dense()) if n else sympy.zeros(0, 0)
    image_v = N
    for j in range(fs.start - 1, fs.start + len(fs.filtration) + 2):
        fj = _mat(fs.piece(j), n)
        prev = N * _mat(fs.piece(j - 1), n)
        # dim(N(V) & F_j) = rank N(V) + rank F_j - rank [N(V) | F_j]
        inter = _rank(image_v) + _rank(fj) - _rank(image_v.row_join(fj))
        if inter != _rank(prev):
            return False
        # N(F_{j-1}) is inside both, so equal dimensions mean equal spaces
        if _rank(fj.row_join(prev)) != _rank(fj):
            return False
    return True


def random_filtered_space(rng, max_dim=5):
    from kontsevich.exact import SparseMatrix
    from kontsevich.gauss_manin import FilteredSpace
    n = rng.randint(1, max_dim)
    while True:
        P = sympy.Matrix(n, n, lambda r, c: rng.randint(-1, 1) + (1 if r == c else 0))
        if P.det() != 0:
            break
    sizes = []
    left = n
    while left:
        s = rng.randint(1, left)
        sizes.append(s)
        left -= s
    block = sympy.zeros(n, n)
    pieces = []
    start = 0
    for s in sizes:
        for r in range(s):
            for c in range(r + 1, s):
                block[start + r, start + c] = rng.choice([0, 0, 1, -1, 2])
        pieces.append([[P[r, start + c] for r in range(n)] for c in range(s)])
        start += s
    N = P * block * P.inv()
    n_mat = SparseMatrix.from_dense([[Fraction(int(x.p), int(x.q)) for x in row]
                                     for row in N.tolist()])
    levels = []
    current = []
    for _ in range(rng.randint(1, 4)):
        extra = [[rng.randint(-1, 1) for _ in range(n)] for _ in range(rng.randint(0, 2))]
        image = [list(N * sympy.Matrix(v)) for v in current]
        current = current + image + extra
        current = [v for v in current if any(v)]
        levels.append([[Fraction(int(sympy.Rational(x).p), int(sympy.Rational(x).q)) for x in v]
                       for v in current])
    return FilteredSpace(n, [[[Fraction(int(x.p), int(x.q)) for x in v] for v in piece]
                             for piece in pieces],
                         n_mat, levels, start=rng.randint(-2, 1))
