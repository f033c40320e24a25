"""Local model of the meromorphic flat module ``O(*D) v`` on a monomial chart.

On a chart with coordinates ``x_1..x_l`` the function is ``f = x^{-k}`` where
``k_i > 0`` for the first ``ell1`` (polar) coordinates and ``k_i = 0`` for the
remaining ones.  A section is stored in its canonical expansion

    sum_{(m, j)} g_{m,j} x^m (tau f)^j v

with coefficients ``g`` constant along the transverse directions: rationals in
the classical mode, polynomials in ``lambda`` in the twistor mode, where every
derivation acting on coefficients carries one factor of lambda.

Indices of coordinates in the public functions are 1-based, as in the usual
mathematical notation ``d_1, ..., d_l``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

from .errors import BaseMismatch, IndexOutOfRange, InvalidChart, OutOfRange
from .exact import (CoeffPoly, MultiIndex, floor_multiindex, mi_add, mi_sub,
                    min_elements, rational, unit)

Key = Tuple[MultiIndex, int]


class Mode(enum.Enum):
    CLASSICAL = "classical"
    TWISTOR = "twistor"


@dataclass(frozen=True)
class Chart:
    ell: int
    ell1: int
    k: MultiIndex

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        if self.ell < 1:
            raise InvalidChart("a chart needs at least one divisor coordinate")
        if not 0 <= self.ell1 <= self.ell:
            raise InvalidChart(f"ell1={self.ell1} must lie in [0, ell={self.ell}]")
        if len(self.k) != self.ell:
            raise InvalidChart(f"k has length {len(self.k)}, expected {self.ell}")
        for i, ki in enumerate(self.k):
            if i < self.ell1 and ki <= 0:
                raise InvalidChart(f"pole order k_{i + 1}={ki} must be positive")
            if i >= self.ell1 and ki != 0:
                raise InvalidChart(f"k_{i + 1}={ki} must vanish off the polar part")

    @property
    def delta(self) -> MultiIndex:
        return (1,) * self.ell

    @property
    def zero(self) -> MultiIndex:
        return (0,) * self.ell

    @property
    def polar_delta(self) -> MultiIndex:
        return tuple(1 if i < self.ell1 else 0 for i in range(self.ell))


def _coeff(value) -> CoeffPoly:
    if isinstance(value, CoeffPoly):
        return value
    return CoeffPoly.const(rational(value))


def _weight(mode: Mode) -> CoeffPoly:
    """Factor picked up by a derivation acting on coefficients."""
    return CoeffPoly.lam() if mode is Mode.TWISTOR else CoeffPoly.const(1)


class ModuleElement:
    """A section in canonical form ``{(m, j): g}``; immutable."""

    __slots__ = ("chart", "_terms")

    def __init__(self, chart: Chart, terms: Optional[Dict[Key, object]] = None):
        self.chart = chart
        clean: Dict[Key, CoeffPoly] = {}
        for (m, j), g in (terms or {}).items():
            m = tuple(m)
            if len(m) != chart.ell or j < 0:
                raise ValueError(f"bad key {(m, j)} for chart {chart}")
            g = _coeff(g)
            if g:
                clean[(m, j)] = clean[(m, j)] + g if (m, j) in clean else g
        self._terms = {key: g for key, g in clean.items() if g}

    @classmethod
    def monomial(cls, chart: Chart, m: MultiIndex, j: int = 0, g=1) -> "ModuleElement":
        return cls(chart, {(tuple(m), j): g})

    @property
    def terms(self) -> Dict[Key, CoeffPoly]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        return (isinstance(other, ModuleElement) and self.chart == other.chart
                and self._terms == other._terms)

    def __hash__(self):
        return hash((self.chart, frozenset(self._terms.items())))

    def __add__(self, other: "ModuleElement") -> "ModuleElement":
        if other.chart != self.chart:
            raise ValueError("elements live on different charts")
        out = dict(self._terms)
        for key, g in other._terms.items():
            out[key] = out[key] + g if key in out else g
        return ModuleElement(self.chart, out)

    def __neg__(self):
        return ModuleElement(self.chart, {key: -g for key, g in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "ModuleElement":
        c = _coeff(c)
        return ModuleElement(self.chart, {key: g * c for key, g in self._terms.items()})

    def __repr__(self):
        body = ", ".join(f"({m}, {j}): {g!r}" for (m, j), g in sorted(self._terms.items()))
        return f"ModuleElement({{{body}}})"


def _collect(chart: Chart, pieces: Iterable[Tuple[Key, CoeffPoly]]) -> ModuleElement:
    out: Dict[Key, CoeffPoly] = {}
    for key, g in pieces:
        if g:
            out[key] = out[key] + g if key in out else g
    return ModuleElement(chart, out)


# -- operators ---------------------------------------------------------------------

def act_partial(i: int, e: ModuleElement, mode: Mode = Mode.CLASSICAL) -> ModuleElement:
    """Apply the i-th derivation (``d_i`` or its lambda-twisted version)."""
    chart = e.chart
    if not 1 <= i <= chart.ell:
        raise IndexOutOfRange(f"coordinate index {i} outside 1..{chart.ell}")
    t = i - 1
    ki = chart.k[t]
    w = _weight(mode)
    down = unit(chart.ell, t)
    pieces = []
    for (m, j), g in e.terms.items():
        target = mi_sub(m, down)
        # x^m (tau f)^j = tau^j x^{m - j k}: differentiate the monomial
        pieces.append(((target, j), g * w * (m[t] - j * ki)))
        # d_i v = -k_i (tau f) x_i^{-1} v
        if ki:
            pieces.append(((target, j + 1), g * (-ki)))
    return _collect(chart, pieces)


def mul_x(i: int, e: ModuleElement) -> ModuleElement:
    """Multiplication by the coordinate ``x_i``."""
    chart = e.chart
    if not 1 <= i <= chart.ell:
        raise IndexOutOfRange(f"coordinate index {i} outside 1..{chart.ell}")
    up = unit(chart.ell, i - 1)
    return ModuleElement(chart, {(mi_add(m, up), j): g for (m, j), g in e.terms.items()})


def act_tau(e: ModuleElement) -> ModuleElement:
    """Multiplication by tau = (tau f) x^k."""
    k = e.chart.k
    return ModuleElement(e.chart, {(mi_add(m, k), j + 1): g for (m, j), g in e.terms.items()})


def act_tau_del_tau(e: ModuleElement, mode: Mode = Mode.CLASSICAL) -> ModuleElement:
    w = _weight(mode)
    pieces = []
    for (m, j), g in e.terms.items():
        pieces.append(((m, j), g * w * j))
        pieces.append(((m, j + 1), g))
    return _collect(e.chart, pieces)


def act_del_tau(e: ModuleElement, mode: Mode = Mode.CLASSICAL) -> ModuleElement:
    w = _weight(mode)
    k = e.chart.k
    pieces = []
    for (m, j), g in e.terms.items():
        low = mi_sub(m, k)
        if j:
            pieces.append(((low, j - 1), g * w * j))
        pieces.append(((low, j), g))
    return _collect(e.chart, pieces)


# -- presentations -----------------------------------------------------------

class Term(NamedTuple):
    """``d^{n_minus}( g x^{-delta - p + m_plus} (tau f)^j v )``."""
    n_minus: MultiIndex
    m_plus: MultiIndex
    j: int
    g: CoeffPoly

    @property
    def m(self) -> MultiIndex:
        return mi_sub(self.m_plus, self.n_minus)


@dataclass(frozen=True)
class Presentation:
    chart: Chart
    base_p: MultiIndex
    terms: Tuple[Term, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "base_p", tuple(self.base_p))
        norm = []
        for t in self.terms:
            n, q, j, g = t
            norm.append(Term(tuple(n), tuple(q), int(j), _coeff(g)))
        object.__setattr__(self, "terms", tuple(norm))

    @classmethod
    def single(cls, chart, base_p, n_minus, m_plus, j=0, g=1):
        return cls(chart, base_p, (Term(n_minus, m_plus, j, _coeff(g)),))

    def __add__(self, other: "Presentation") -> "Presentation":
        if other.chart != self.chart or other.base_p != self.base_p:
            raise BaseMismatch("presentations over different charts or bases")
        return Presentation(self.chart, self.base_p, self.terms + other.terms)


class PrimitiveExpression(Presentation):
    """A presentation whose terms are primitive with pairwise distinct (m, j)."""

    def __post_init__(self):
        super().__post_init__()
        seen = set()
        for t in self.terms:
            if not t.g:
                raise ValueError("primitive terms need a nonzero coefficient")
            if any(a and b for a, b in zip(t.n_minus, t.m_plus)):
                raise ValueError(f"term {t} is not primitive")
            key = (t.m, t.j)
            if key in seen:
                raise ValueError(f"duplicate primitive datum {key}")
            seen.add(key)


def _check_base(chart: Chart, p: MultiIndex) -> None:
    if len(p) != chart.ell:
        raise BaseMismatch(f"base {p} has wrong length for chart {chart}")
    for i, pi in enumerate(p):
        if pi < 0 or (i >= chart.ell1 and pi != 0):
            raise BaseMismatch(f"base {p} must be >= 0 and vanish beyond ell1={chart.ell1}")


def _check_term(chart: Chart, t: Term) -> None:
    if len(t.n_minus) != chart.ell or len(t.m_plus) != chart.ell:
        raise BaseMismatch(f"term {t} has wrong length for chart {chart}")
    if min(t.n_minus) < 0 or min(t.m_plus) < 0 or t.j < 0:
        raise BaseMismatch(f"term {t} has negative entries")


def canonical_expand(p: Presentation, mode: Mode = Mode.CLASSICAL) -> ModuleElement:
    chart = p.chart
    _check_base(chart, p.base_p)
    total = ModuleElement(chart)
    origin = mi_sub(mi_sub(chart.zero, chart.delta), p.base_p)
    for t in p.terms:
        _check_term(chart, t)
        e = ModuleElement(chart, {(mi_add(origin, t.m_plus), t.j): t.g})
        for i, count in enumerate(t.n_minus):
            for _ in range(count):
                e = act_partial(i + 1, e, mode)
        total = total + e
    return total


def to_primitive(p: Presentation, mode: Mode = Mode.CLASSICAL) -> PrimitiveExpression:
    """Rewrite a presentation into a primitive expression over the same base.

    A term with ``n_i > 0`` and ``q_i > 0`` is rewritten through

        d_i(g x^{-delta-p+q} (tau f)^j v)
            = c (g x^{-delta-p+q-e_i} (tau f)^j v) - k_i g x^{-delta-p+q-e_i} (tau f)^{j+1} v

    with ``c = q_i - p_i - 1 - k_i j`` (times lambda in the twistor mode), which
    strictly lowers ``|n|``.
    """
    chart = p.chart
    _check_base(chart, p.base_p)
    w = _weight(mode)
    pool: Dict[Tuple[MultiIndex, MultiIndex, int], CoeffPoly] = {}

    def put(key, g):
        if not g:
            return
        pool[key] = pool[key] + g if key in pool else g

    for t in p.terms:
        _check_term(chart, t)
        put((t.n_minus, t.m_plus, t.j), t.g)

    def overlap(key):
        n, q, _ = key
        return [i for i in range(chart.ell) if n[i] and q[i]]

    while True:
        todo = [key for key, g in pool.items() if g and overlap(key)]
        if not todo:
            break
        key = max(todo, key=lambda kk: (sum(kk[0]), tuple(-x for x in kk[0]),
                                        tuple(-x for x in kk[1]), -kk[2]))
        n, q, j = key
        g = pool.pop(key)
        i = overlap(key)[0]
        e_i = unit(chart.ell, i)
        n2, q2 = mi_sub(n, e_i), mi_sub(q, e_i)
        c = q[i] - p.base_p[i] - 1 - chart.k[i] * j
        put((n2, q2, j), g * w * c)
        if chart.k[i]:
            put((n2, q2, j + 1), g * (-chart.k[i]))

    terms = sorted((Term(n, q, j, g) for (n, q, j), g in pool.items() if g),
                   key=lambda t: (t.m, t.j))
    return PrimitiveExpression(chart, p.base_p, tuple(terms))


@dataclass(frozen=True)
class SupportInvariants:
    min_pi: frozenset
    min_s: frozenset
    leading: Dict[Key, CoeffPoly]

    def __eq__(self, other):
        return (isinstance(other, SupportInvariants) and self.min_pi == other.min_pi
                and self.min_s == other.min_s and self.leading == other.leading)


def support_invariants(pe: PrimitiveExpression) -> SupportInvariants:
    support = {(t.m, t.j): t.g for t in pe.terms}
    if not support:
        return SupportInvariants(frozenset(), frozenset(), {})
    min_pi = min_elements(m for m, _ in support)
    min_s = frozenset((x[:-1], x[-1]) for x in min_elements(m + (j,) for m, j in support))
    leading = {key: g for key, g in support.items() if key[0] in min_pi or key in min_s}
    return SupportInvariants(min_pi, min_s, leading)


def fj_member(pe: PrimitiveExpression, p_idx: int, j: int) -> bool:
    """Membership in the ``p``-th derivative-order filtration piece of level ``j``."""
    ell = pe.chart.ell
    if not 1 <= p_idx <= ell:
        raise IndexOutOfRange(f"p={p_idx} outside 1..{ell}")
    t = p_idx - 1
    for m in support_invariants(pe).min_pi:
        if any(m[i] < 0 for i in range(t + 1, ell)) or m[t] < -j:
            return False
    return True


# -- identity verification ----------------------------------------------------------

@dataclass
class IdentityReport:
    name: str
    chart: Chart
    mode: Mode
    checks: List[Tuple[str, bool]] = field(default_factory=list)
    no_jump: bool = False
    alpha: Optional[Fraction] = None

    @property
    def holds(self) -> bool:
        return all(ok for _, ok in self.checks)

    def as_dict(self):
        return {
            "name": self.name,
            "chart": {"ell": self.chart.ell, "ell1": self.chart.ell1, "k": list(self.chart.k)},
            "mode": self.mode.value,
            "alpha": None if self.alpha is None else str(self.alpha),
            "no_jump": self.no_jump,
            "checks": {label: ok for label, ok in self.checks},
            "holds": self.holds,
        }


def _shifted_tau_del_tau(e: ModuleElement, alpha: Fraction, mode: Mode) -> ModuleElement:
    return act_tau_del_tau(e, mode) + e.scale(_weight(mode) * alpha)


def verify_nilpotency_identity(c: Chart, alpha, mode: Mode = Mode.CLASSICAL) -> IdentityReport:
    """Check the nilpotency identities for ``tau d_tau + alpha`` on ``x^{-delta-p} v``."""
    alpha = rational(alpha)
    upper_ok = alpha <= 1 if mode is Mode.CLASSICAL else alpha < 1
    if not (0 < alpha and upper_ok):
        raise OutOfRange(f"alpha={alpha} outside the admissible range for {mode.value}")
    p = floor_multiindex(alpha, c.k)
    report = IdentityReport("nilpotency", c, mode, alpha=alpha)
    jumps = [i for i in range(c.ell1) if alpha * c.k[i] == p[i]]
    if not jumps:
        report.no_jump = True
        return report
    origin = mi_sub(mi_sub(c.zero, c.delta), p)
    gen = ModuleElement.monomial(c, origin)
    lhs1 = _shifted_tau_del_tau(gen, alpha, mode)
    for i in jumps:
        rhs = act_partial(i + 1, mul_x(i + 1, gen), mode).scale(Fraction(-1, c.k[i]))
        report.checks.append((f"single_step[{i + 1}]", lhs1 == rhs))

    lhs = gen
    for _ in jumps:
        lhs = _shifted_tau_del_tau(lhs, alpha, mode)
    # witness over the base floor((alpha - eps) k) = p - e_S
    lower = list(p)
    for i in jumps:
        lower[i] -= 1
    lower = tuple(lower)
    n = tuple(1 if i in jumps else 0 for i in range(c.ell))
    scale = Fraction(1)
    for i in jumps:
        scale *= Fraction(-1, c.k[i])
    witness = Presentation.single(c, lower, n, c.zero, 0, scale)
    report.checks.append(("power_identity", lhs == canonical_expand(witness, mode)))
    eps_floor = tuple(-(-(alpha * c.k[i]).numerator // (alpha * c.k[i]).denominator) - 1
                      if i < c.ell1 else 0 for i in range(c.ell))
    report.checks.append(("witness_base_below", lower == eps_floor))
    return report


def verify_shift_inclusions(c: Chart, mode: Mode = Mode.CLASSICAL) -> IdentityReport:
    """Check the generator-level shift inclusions for ``d_tau``, ``tau`` and ``(tau d_tau)^N``."""
    report = IdentityReport("shift_inclusions", c, mode)
    base0 = c.zero
    gen = ModuleElement.monomial(c, mi_sub(c.zero, c.delta))

    # (a) d_tau x^{-delta} v = x^{-delta-k} v, witnessed over the base k
    lhs = act_del_tau(gen, mode)
    witness = Presentation.single(c, c.k, c.zero, c.zero, 0, 1)
    report.checks.append(("del_tau_into_U1", lhs == canonical_expand(witness, mode)))

    # (b) tau x^{-delta-k} v = -k_i^{-1} d_i(x_i x^{-delta} v) for every polar i
    lhs = act_tau(ModuleElement.monomial(c, mi_sub(mi_sub(c.zero, c.delta), c.k)))
    for i in range(c.ell1):
        e_i = unit(c.ell, i)
        witness = Presentation.single(c, base0, e_i, e_i, 0, Fraction(-1, c.k[i]))
        report.checks.append((f"tau_into_U0[{i + 1}]", lhs == canonical_expand(witness, mode)))

    # (c) (tau d_tau)^{ell1+1} x^{-delta} v = tau prod(-k_i^{-1} d_i)(x^{-delta-(k-delta_P)} v)
    lhs = gen
    for _ in range(c.ell1 + 1):
        lhs = act_tau_del_tau(lhs, mode)
    inner = ModuleElement.monomial(c, mi_sub(mi_sub(c.zero, c.delta), mi_sub(c.k, c.polar_delta)))
    for i in range(c.ell1):
        inner = act_partial(i + 1, inner, mode).scale(Fraction(-1, c.k[i]))
    report.checks.append(("power_into_tau_U_lt1", lhs == act_tau(inner)))
    return report
