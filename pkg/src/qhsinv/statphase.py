"""Formal stationary phase: Gaussian moments, stationary-point series, stable limits,
the 2-sphere orbit integral and the reduction of orbit integrals to Gaussian data.

Normalization used everywhere:

    int exp(i K lam x^T A x) x^m dx
        = pi^(n/2) zeta8^sigma |det A|^(-1/2) lam^(-n/2) K^(-n/2)
          * lam^(-k) K^(-k) * m!/k! [y^m] ((i/4) y^T A^-1 y)^k,    k = |m|/2,

with sigma the signature of A and lam > 0 a coupling constant c*pi^e.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .linking import congruence_diagonal, mat_det, mat_inverse
from .ring import I, ONE, PI, ZERO, FormalSeries, LaurentPoly, Scalar, as_scalar

Matrix = Tuple[Tuple[Fraction, ...], ...]


class DegenerateFormError(ValueError):
    pass


class StableLimitError(RuntimeError):
    pass


# -- quadratic forms --------------------------------------------------------

@dataclass(frozen=True)
class QuadraticForm:
    """x^T A x for a symmetric nondegenerate rational matrix A."""

    matrix: Matrix

    def __post_init__(self):
        m = tuple(tuple(Fraction(x) for x in row) for row in self.matrix)
        n = len(m)
        if any(len(r) != n for r in m):
            raise ValueError("quadratic form matrix must be square")
        for i in range(n):
            for j in range(i):
                if m[i][j] != m[j][i]:
                    raise ValueError("quadratic form matrix must be symmetric")
        object.__setattr__(self, "matrix", m)
        if n and not mat_det([list(r) for r in m]):
            raise DegenerateFormError("degenerate quadratic form")

    @property
    def dim(self) -> int:
        return len(self.matrix)

    def det(self) -> Fraction:
        return mat_det([list(r) for r in self.matrix]) if self.dim else Fraction(1)

    def inverse(self) -> List[List[Fraction]]:
        return mat_inverse([list(r) for r in self.matrix])

    def signature(self) -> int:
        d = congruence_diagonal([list(r) for r in self.matrix])
        return sum(1 for x in d if x > 0) - sum(1 for x in d if x < 0)

    @classmethod
    def diagonal(cls, entries: Sequence) -> "QuadraticForm":
        n = len(entries)
        return cls(tuple(tuple(Fraction(entries[i]) if i == j else Fraction(0) for j in range(n))
                         for i in range(n)))


def _coupling_parts(coupling: Scalar) -> Tuple[Fraction, Fraction]:
    if not coupling.is_monomial():
        raise ValueError("coupling must be a single term c*pi^e")
    (z, e, r), c = next(iter(coupling.terms.items()))
    if z or r != 1 or c <= 0:
        raise ValueError("coupling must be a positive rational times a power of pi")
    return c, e


def _rational_power(c: Fraction, exponent: Fraction) -> Scalar:
    """c^exponent for positive rational c and exponent in (1/2)Z."""
    twice = exponent * 2
    if twice.denominator != 1:
        raise ValueError("only half-integer powers are supported")
    twice = int(twice)
    base = Scalar(c ** (twice // 2)) if twice >= 0 else Scalar(Fraction(1) / c ** (-(twice // 2)))
    if twice % 2:
        base = base * Scalar.sqrt(c)
    return base


def gaussian_prefactor(form: QuadraticForm, coupling: Scalar = ONE) -> Scalar:
    """pi^(n/2) zeta8^sigma |det A|^(-1/2) lam^(-n/2), the zeroth moment times K^(n/2)."""
    n = form.dim
    c, e = _coupling_parts(coupling)
    out = Scalar.term(1, zeta8=form.signature(), pi=Fraction(n, 2) * (1 - e))
    out = out * _rational_power(abs(form.det()), Fraction(-1, 2))
    return out * _rational_power(c, Fraction(-n, 2))


def _poly_mul(a: Dict[Tuple[int, ...], Scalar], b: Dict[Tuple[int, ...], Scalar]) -> Dict[Tuple[int, ...], Scalar]:
    out: Dict[Tuple[int, ...], Scalar] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, ZERO) + ca * cb
    return {k: v for k, v in out.items() if v}


class _MomentTable:
    """Relative moments m!/k! [y^m] ((i/4) y^T A^-1 y)^k * lam^-k for one form."""

    def __init__(self, form: QuadraticForm, coupling: Scalar):
        self.form = form
        self.coupling = coupling
        inv = form.inverse() if form.dim else []
        n = form.dim
        q: Dict[Tuple[int, ...], Scalar] = {}
        quarter_i = Scalar.term(Fraction(1, 4), zeta8=2)
        for i in range(n):
            for j in range(n):
                if inv[i][j]:
                    e = [0] * n
                    e[i] += 1
                    e[j] += 1
                    q[tuple(e)] = q.get(tuple(e), ZERO) + quarter_i * inv[i][j]
        self.q = q
        self.powers = [{(0,) * n: ONE}]
        self.lam_inv = coupling.inverse()

    def value(self, m: Tuple[int, ...]) -> Scalar:
        total = sum(m)
        if total % 2:
            return ZERO
        k = total // 2
        while len(self.powers) <= k:
            self.powers.append(_poly_mul(self.powers[-1], self.q))
        c = self.powers[k].get(tuple(m), ZERO)
        if not c:
            return ZERO
        mfact = 1
        for x in m:
            mfact *= math.factorial(x)
        return c * Fraction(mfact, math.factorial(k)) * self.lam_inv ** k


@dataclass(frozen=True)
class GaussianMoment:
    """coefficient * K^(-kinv_power)."""

    coefficient: Scalar
    kinv_power: Fraction


def gaussian_moment(form: QuadraticForm, m: Sequence[int], coupling: Scalar = ONE) -> GaussianMoment:
    """Exact value of int exp(i K lam x^T A x) x^m dx as a Scalar times a power of K."""
    m = tuple(int(x) for x in m)
    if len(m) != form.dim:
        raise ValueError("multi-index length must equal the form's dimension")
    table = _MomentTable(form, as_scalar(coupling))
    rel = table.value(m)
    power = Fraction(form.dim, 2) + Fraction(sum(m), 2)
    if not rel:
        return GaussianMoment(ZERO, power)
    return GaussianMoment(gaussian_prefactor(form, as_scalar(coupling)) * rel, power)


# -- stationary contribution ------------------------------------------------

def x_variables(n: int) -> Tuple[str, ...]:
    return ("x",) if n == 1 else tuple(f"x{i + 1}" for i in range(n))


def _total_degree(e) -> Fraction:
    return sum(e, Fraction(0))


def truncate_degree(p: LaurentPoly, max_degree: int) -> LaurentPoly:
    return LaurentPoly(p.variables, {e: c for e, c in p.terms.items() if _total_degree(e) <= max_degree},
                       p.bounds)


@dataclass(frozen=True)
class PhaseData:
    """f(x* + x) = value + x^T A x + higher_terms(x), higher terms of degree >= 3."""

    stationary_point: Tuple[Fraction, ...]
    quadratic: QuadraticForm
    higher_terms: LaurentPoly
    value: Scalar = ZERO

    def __post_init__(self):
        object.__setattr__(self, "stationary_point", tuple(Fraction(x) for x in self.stationary_point))
        if len(self.stationary_point) != self.quadratic.dim:
            raise ValueError("stationary point dimension does not match the quadratic form")
        for e in self.higher_terms.terms:
            if any(x < 0 or x.denominator != 1 for x in e):
                raise ValueError("higher terms must be a polynomial")
            if _total_degree(e) < 3:
                raise ValueError("higher terms must start at degree 3")

    @classmethod
    def from_polynomial(cls, f: LaurentPoly, point: Sequence) -> "PhaseData":
        """Split a polynomial phase at a given stationary point."""
        n = len(f.variables)
        shifted = f.substitute({v: LaurentPoly.var(f.variables, v) + Fraction(x)
                                for v, x in zip(f.variables, point)}, f.variables)
        value = ZERO
        lin = [ZERO] * n
        quad = [[Fraction(0)] * n for _ in range(n)]
        rest = {}
        for e, c in shifted.terms.items():
            d = _total_degree(e)
            if d == 0:
                value = c
            elif d == 1:
                lin[[i for i in range(n) if e[i]][0]] = c
            elif d == 2:
                idx = [i for i in range(n) for _ in range(int(e[i]))]
                cf = c.as_fraction()
                if idx[0] == idx[1]:
                    quad[idx[0]][idx[0]] += cf
                else:
                    quad[idx[0]][idx[1]] += cf / 2
                    quad[idx[1]][idx[0]] += cf / 2
            else:
                rest[e] = c
        if any(lin):
            raise ValueError("the given point is not stationary")
        return cls(tuple(Fraction(x) for x in point), QuadraticForm(tuple(tuple(r) for r in quad)),
                   LaurentPoly(f.variables, rest), value)


@dataclass(frozen=True)
class ContributionSeries:
    """exp(i K lam value) * prefactor * K^(-kinv_power) * series(K^-1)."""

    phase_value: Scalar
    prefactor: Scalar
    kinv_power: Fraction
    series: FormalSeries

    def evaluate(self, K: float, coupling: Scalar = ONE) -> complex:
        import cmath
        lam = as_scalar(coupling).to_complex()
        return (cmath.exp(1j * K * lam * self.phase_value.to_complex()) * self.prefactor.to_complex()
                * K ** (-float(self.kinv_power)) * self.series.evaluate(1 / K))


def stationary_contribution(phase: PhaseData, prefactor: FormalSeries, order: int,
                            coupling: Scalar = ONE) -> ContributionSeries:
    """Contribution of a nondegenerate stationary point to int exp(i K lam f) g dx.

    prefactor is a series in K^-1 whose coefficients are polynomials in the
    shifted variables x - x* (LaurentPoly in x_variables(n)).
    """
    if prefactor.variable != "Kinv":
        raise ValueError("prefactor must be a series in Kinv")
    if prefactor.order < order:
        raise ValueError("prefactor is truncated below the requested order")
    coupling = as_scalar(coupling)
    form = phase.quadratic
    n = form.dim
    xv = x_variables(n)
    table = _MomentTable(form, coupling)
    max_j = 2 * order
    max_deg = 6 * order
    higher = truncate_degree(phase.higher_terms, max_deg) * coupling if phase.higher_terms.terms else None
    # powers (i K lam h)^j / j!, stored without the K^j
    powers: List[LaurentPoly] = [LaurentPoly.constant(xv, 1)]
    if higher is not None:
        for j in range(1, max_j + 1):
            nxt = truncate_degree(powers[-1] * higher, max_deg) * (I * Fraction(1, j))
            if not nxt:
                break
            powers.append(nxt)
    coeffs = [ZERO] * (order + 1)
    for k in range(order + 1):
        g = prefactor[k]
        if not g:
            continue
        if g.variables != xv:
            g = g.embed(xv)
        for j, hp in enumerate(powers):
            prod = truncate_degree(g * hp, max_deg)
            for e, c in prod.terms.items():
                deg = int(_total_degree(e))
                if deg % 2:
                    continue
                r = deg // 2 - j + k
                if r < 0:
                    raise ValueError("phase higher terms must start at degree 3")
                if r > order:
                    continue
                mom = table.value(tuple(int(x) for x in e))
                if mom:
                    coeffs[r] = coeffs[r] + c * mom
    return ContributionSeries(phase.value, gaussian_prefactor(form, coupling), Fraction(n, 2),
                              FormalSeries(coeffs, order, "Kinv"))


# -- stable limits ----------------------------------------------------------

def default_nmax() -> int:
    return int(os.environ.get("QHS_NMAX", "40"))


def stable_limit(family: Callable[[int], FormalSeries], order: int, start: int = 0, step: int = 1,
                 nmax: Optional[int] = None) -> FormalSeries:
    """Series whose coefficients 0..order agree for consecutive probes N, N+step."""
    nmax = default_nmax() if nmax is None else nmax
    if step < 1:
        raise ValueError("probe step must be positive")
    N = start
    prev = family(N)
    last_diff = None
    while N + step <= nmax:
        cur = family(N + step)
        if prev.order < order or cur.order < order:
            raise StableLimitError(f"family member at N={N} is truncated below order {order}")
        diff = next((k for k in range(order + 1) if prev[k] != cur[k]), None)
        if diff is None:
            return cur.truncate(order)
        last_diff = (N, diff)
        N += step
        prev = cur
    detail = "" if last_diff is None else f"; last change between N={last_diff[0]} and N={last_diff[0] + step} at coefficient {last_diff[1]}"
    raise StableLimitError(f"no stable limit up to N={nmax}{detail}")


# -- sphere integral --------------------------------------------------------

SphereKey = Tuple[Tuple[int, int, int], int, int, int]  # (b exponents, r power, a power, branch)


@dataclass(frozen=True)
class SphereExpression:
    """sum coeff * b^alpha * |b|^(-beta) * a^gamma * exp(branch * i a |b|)."""

    terms: Tuple[Tuple[SphereKey, Scalar], ...]

    def evaluate(self, b: Sequence[complex], a: complex) -> complex:
        import cmath
        r = cmath.sqrt(sum(complex(x) ** 2 for x in b))
        total = 0j
        for ((alpha, beta, gamma, branch), c) in self.terms:
            mono = 1
            for x, e in zip(b, alpha):
                mono *= complex(x) ** e
            total += c.to_complex() * mono * r ** (-beta) * a ** gamma * cmath.exp(branch * 1j * a * r)
        return total

    def is_zero(self) -> bool:
        return not self.terms


def sphere_integral(P: LaurentPoly, mode: str = "full") -> SphereExpression:
    """a * int_{S^2} P(a n) exp(i a b.n) dn as a closed-form expression in b and a.

    Computed as -2 pi i P(-i d/db) [(e^{i a |b|} - e^{-i a |b|}) / |b|]; the
    stationary mode keeps only the e^{+i a |b|} branch.  P is a polynomial in
    three variables.
    """
    if mode not in ("full", "stationary_point"):
        raise ValueError("mode must be 'full' or 'stationary_point'")
    if len(P.variables) != 3:
        raise ValueError("P must be a polynomial in three variables")
    base_coeff = Scalar.term(-2, zeta8=2, pi=1)
    start: Dict[SphereKey, Scalar] = {((0, 0, 0), 1, 0, 1): base_coeff}
    if mode == "full":
        start[((0, 0, 0), 1, 0, -1)] = -base_coeff
    minus_i = Scalar.term(-1, zeta8=2)
    total: Dict[SphereKey, Scalar] = {}
    for e, c in P.terms.items():
        if any(x < 0 or x.denominator != 1 for x in e):
            raise ValueError("P must be a polynomial")
        expr = dict(start)
        for k, times in enumerate(e):
            for _ in range(int(times)):
                expr = _differentiate(expr, k, minus_i)
        for key, v in expr.items():
            total[key] = total.get(key, ZERO) + v * c
    return SphereExpression(tuple(sorted((k, v) for k, v in total.items() if v)))


def _differentiate(expr: Dict[SphereKey, Scalar], k: int, factor: Scalar) -> Dict[SphereKey, Scalar]:
    out: Dict[SphereKey, Scalar] = {}

    def add(key, val):
        out[key] = out.get(key, ZERO) + val

    for (alpha, beta, gamma, branch), c in expr.items():
        c = c * factor
        if alpha[k]:
            na = list(alpha)
            na[k] -= 1
            add((tuple(na), beta, gamma, branch), c * alpha[k])
        na = list(alpha)
        na[k] += 1
        if beta:
            add((tuple(na), beta + 2, gamma, branch), c * (-beta))
        add((tuple(na), beta + 1, gamma + 1, branch), c * Scalar.term(branch, zeta8=2))
    return {key: v for key, v in out.items() if v}


# -- orbit reduction --------------------------------------------------------

def gram_variables(L: int) -> Tuple[str, ...]:
    return tuple(f"g{i + 1}{j + 1}" for i in range(L) for j in range(i, L))


def a_variables(L: int) -> Tuple[str, ...]:
    return tuple(f"a{i + 1}" for i in range(L))


class _Trunc:
    """Polynomials in (a_1..a_L, x_2..x_L, xbar_2..xbar_L) with x-degree and a-degree caps."""

    def __init__(self, L: int, max_x: int, max_a: int):
        self.L = L
        self.nx = L - 1
        self.max_x = max_x
        self.max_a = max_a

    def ok(self, e) -> bool:
        L = self.L
        return sum(e[:L]) <= self.max_a and sum(e[L:]) <= self.max_x

    def mul(self, p, q):
        out = {}
        for e1, c1 in p.items():
            for e2, c2 in q.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                if self.ok(e):
                    out[e] = out.get(e, ZERO) + c1 * c2
        return {k: v for k, v in out.items() if v}

    def add(self, p, q, scale=ONE):
        out = dict(p)
        for e, c in q.items():
            out[e] = out.get(e, ZERO) + c * scale
        return {k: v for k, v in out.items() if v}

    def const(self, c=ONE):
        return {(0,) * (3 * self.L - 2): as_scalar(c)}

    def mono(self, a=None, x=None, xb=None, c=ONE):
        e = [0] * (3 * self.L - 2)
        for i, k in (a or {}).items():
            e[i] += k
        for i, k in (x or {}).items():
            e[self.L + i - 1] += k
        for i, k in (xb or {}).items():
            e[self.L + self.nx + i - 1] += k
        return {tuple(e): as_scalar(c)} if self.ok(e) else {}

    def x_degree(self, e) -> int:
        return sum(e[self.L:])

    def split(self, e):
        L, nx = self.L, self.nx
        return e[:L], e[L:L + nx], e[L + nx:]


@dataclass(frozen=True)
class OrbitReduction:
    """Stationary-orbit data: S_den and the numerators S_num_n as polynomials in a."""

    L: int
    constant_term: LaurentPoly
    bilinear: Tuple[Tuple[LaurentPoly, ...], ...]
    s_den: LaurentPoly
    s_num: Tuple[LaurentPoly, ...]

    def as_series(self) -> FormalSeries:
        return FormalSeries(list(self.s_num), len(self.s_num) - 1, "Kinv")


def _gram_substitution(L: int, tr: _Trunc) -> Dict[str, Dict]:
    """g_ij in terms of a, x, xbar near the collinear configuration with x_1 = 0."""
    cos_s, sin_s = [], []
    for i in range(L):
        if i == 0:
            cos_s.append(tr.const())
            sin_s.append(tr.const())
            continue
        c, s = {}, {}
        n = 0
        while 2 * n <= tr.max_x:
            u = tr.mono(x={i: n}, xb={i: n})
            if u:
                c = tr.add(c, u, Scalar(Fraction((-1) ** n, math.factorial(2 * n))))
                s = tr.add(s, u, Scalar(Fraction((-1) ** n, math.factorial(2 * n + 1))))
            n += 1
        cos_s.append(c)
        sin_s.append(s)
    out = {}
    for i in range(L):
        for j in range(i, L):
            name = f"g{i + 1}{j + 1}"
            if i == j:
                out[name] = tr.mono(a={i: 2})
                continue
            aa = tr.mono(a={i: 1, j: 1})
            val = tr.mul(cos_s[i], cos_s[j])
            if i > 0:
                cross = tr.add(tr.mono(x={i: 1}, xb={j: 1}, c=Fraction(1, 2)),
                               tr.mono(xb={i: 1}, x={j: 1}, c=Fraction(1, 2)))
                val = tr.add(val, tr.mul(tr.mul(sin_s[i], sin_s[j]), cross))
            out[name] = tr.mul(aa, val)
    return out, sin_s


def _eval_gram_poly(p: LaurentPoly, subs: Dict[str, Dict], tr: _Trunc, cache: Dict) -> Dict:
    total: Dict = {}
    for e, c in p.terms.items():
        term = tr.const(c)
        for v, k in zip(p.variables, e):
            if k < 0 or k.denominator != 1:
                raise ValueError("integrand data must be polynomial in the Gram variables")
            for _ in range(int(k)):
                term = tr.mul(term, subs[v])
        total = tr.add(total, term)
    return total


def _poly_det(m: List[List[LaurentPoly]], one: LaurentPoly) -> LaurentPoly:
    n = len(m)
    if n == 0:
        return one
    if n == 1:
        return m[0][0]
    total = one.zero()
    for j in range(n):
        if not m[0][j]:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _poly_det(minor, one)
        total = total + term if j % 2 == 0 else total - term
    return total


def _adjugate(m: List[List[LaurentPoly]], one: LaurentPoly) -> List[List[LaurentPoly]]:
    n = len(m)
    if n == 1:
        return [[one]]
    adj = [[one.zero()] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(m) if k != i]
            c = _poly_det(minor, one)
            adj[j][i] = c if (i + j) % 2 == 0 else -c
    return adj


def _truncate_a(p: LaurentPoly, D: int) -> LaurentPoly:
    return truncate_degree(p, D)


def _homogeneous_degree(p: LaurentPoly) -> Optional[int]:
    degs = {int(_total_degree(e)) * 2 for e in p.terms}
    if len(degs) > 1:
        return None
    return degs.pop() if degs else None


def orbit_reduction(L: int, lk: Sequence[Sequence], invariant_terms: Callable[[int], LaurentPoly],
                    prefactor_terms: Callable[[int, int], LaurentPoly], N: int, order: int,
                    a_degree: int) -> OrbitReduction:
    """Reduce the stationary orbit of a truncated invariant integrand to Gaussian data.

    invariant_terms(m) is the degree-m part of the exponent as a polynomial in
    the Gram variables g_ij = a_i . a_j (m even, m >= 2; odd m must return 0),
    prefactor_terms(m, n) the coefficient of K^-n of degree m.  The exponent
    is exp(i pi K sum_{2<=m<=N} L_m) and the prefactor sum_{m,n<=N} L_{m,n} K^-n.
    Results are truncated at total degree a_degree in a.
    """
    lk = [[Fraction(x) for x in row] for row in lk]
    av = a_variables(L)
    gv = gram_variables(L)
    one = LaurentPoly.constant(av, 1)

    def embed(p: LaurentPoly) -> LaurentPoly:
        return p if p.variables == gv else p.embed(gv)

    e_terms = {}
    for m in range(2, N + 1):
        p = invariant_terms(m)
        if p is None or not p:
            continue
        p = embed(p)
        if m % 2:
            raise ValueError("odd-degree invariant terms are not supported")
        if _homogeneous_degree(p) != m:
            raise ValueError(f"invariant term of degree {m} is not homogeneous of that degree")
        e_terms[m] = p
    p_terms = {}
    for m in range(0, N + 1):
        for n in range(0, N + 1):
            p = prefactor_terms(m, n)
            if p is None or not p:
                continue
            p = embed(p)
            if _homogeneous_degree(p) != m:
                raise ValueError(f"prefactor term ({m},{n}) is not homogeneous of degree {m}")
            p_terms[(m, n)] = p

    # collinear values
    collinear = {f"g{i + 1}{j + 1}": LaurentPoly.monomial(av, [int(k in (i, j)) + int(i == j and k == i) for k in range(L)])
                 for i in range(L) for j in range(i, L)}
    for m, p in e_terms.items():
        val = p.substitute(collinear, av)
        expected = one.zero()
        if m == 2:
            expected = sum((LaurentPoly.monomial(av, [int(k in (i, j)) for k in range(L)], lk[i][j])
                            for i in range(L) for j in range(i + 1, L)), one.zero())
        if val != expected:
            if m == 2:
                raise ValueError("quadratic invariant term does not reduce to the linking form")
            raise ValueError(f"invariant term of degree {m} does not vanish on collinear configurations")
    constant = sum((LaurentPoly.monomial(av, [int(k in (i, j)) for k in range(L)], lk[i][j])
                    for i in range(L) for j in range(i + 1, L)), one.zero())

    if L == 1:
        nums = []
        for n in range(order + 1):
            s = one.zero()
            for (m, nn), p in p_terms.items():
                if nn == n:
                    s = s + p.substitute(collinear, av)
            nums.append(_truncate_a(s, a_degree))
        return OrbitReduction(1, constant, (), one, tuple(nums))

    max_x = 4 * order + 2
    tr = _Trunc(L, max_x, a_degree)
    subs, sin_s = _gram_substitution(L, tr)
    cache: Dict = {}
    exponent: Dict = {}
    for m, p in e_terms.items():
        exponent = tr.add(exponent, _eval_gram_poly(p, subs, tr, cache))
    # split exponent by x-degree
    quad: Dict = {}
    higher: Dict = {}
    nx = L - 1
    for e, c in exponent.items():
        d = tr.x_degree(e)
        a_e, x_e, xb_e = tr.split(e)
        if d == 0:
            continue
        if sum(x_e) != sum(xb_e):
            raise ValueError("exponent breaks the U(1) symmetry of the orbit (found x^2 or xbar^2 terms)")
        if d == 2:
            quad[e] = c
        elif d > 2:
            higher[e] = c
    bilinear = [[one.zero()] * nx for _ in range(nx)]
    for e, c in quad.items():
        a_e, x_e, xb_e = tr.split(e)
        i = x_e.index(1)
        j = xb_e.index(1)
        bilinear[i][j] = bilinear[i][j] + LaurentPoly.monomial(av, a_e, c * 2)
    det = _poly_det(bilinear, one)
    if not det:
        raise DegenerateFormError("U(1)-RC contribution undefined: the orbit bilinear form is degenerate")
    adj = _adjugate(bilinear, one)

    # prefactor: measure factor times the integrand prefactor
    measure = tr.const()
    for i in range(1, L):
        measure = tr.mul(measure, sin_s[i])
    pref_by_n: Dict[int, Dict] = {}
    for (m, n), p in p_terms.items():
        if n > order:
            continue
        pref_by_n[n] = tr.add(pref_by_n.get(n, {}), _eval_gram_poly(p, subs, tr, cache))
    # exp(i pi K H) = sum_j (i pi)^j K^j H^j / j!
    exp_terms = [tr.const()]
    ipi = I * PI
    for j in range(1, order + 1):
        nxt = tr.mul(exp_terms[-1], higher)
        nxt = {k: v * ipi * Fraction(1, j) for k, v in nxt.items()}
        if not nxt:
            break
        exp_terms.append(nxt)

    wick_unit = Scalar.term(2, zeta8=2, pi=-1)  # 2i/pi
    nums = [one.zero() for _ in range(order + 1)]
    wick_cache: Dict = {}
    det_powers = [one]
    for _ in range(2 * order + 1):
        det_powers.append(_truncate_a(det_powers[-1] * det, a_degree))
    for n_p, pref in pref_by_n.items():
        base = tr.mul(pref, measure)
        for j, ex in enumerate(exp_terms):
            prod = tr.mul(base, ex)
            for e, c in prod.items():
                a_e, x_e, xb_e = tr.split(e)
                k = sum(x_e)
                if k != sum(xb_e):
                    continue
                n = k - j + n_p
                if n < 0 or n > order:
                    continue
                if k > 2 * n:
                    raise ValueError("contraction count exceeds the determinant power; check input degrees")
                w = _wick(x_e, xb_e, adj, one, wick_cache)
                if not w:
                    continue
                term = w * (c * wick_unit ** k)
                term = term * LaurentPoly.monomial(av, a_e)
                nums[n] = nums[n] + _truncate_a(term * det_powers[2 * n - k], a_degree)
    return OrbitReduction(L, constant, tuple(tuple(r) for r in bilinear), _truncate_a(det, a_degree),
                          tuple(_truncate_a(x, a_degree) for x in nums))


def _wick(x_e, xb_e, adj, one, cache) -> LaurentPoly:
    key = (tuple(x_e), tuple(xb_e))
    if key in cache:
        return cache[key]
    xs = [i for i, k in enumerate(x_e) for _ in range(k)]
    ys = [j for j, k in enumerate(xb_e) for _ in range(k)]
    total = one if not xs else one.zero()
    if xs:
        # permutations of a list with repeats: each bijection counts once
        for perm in itertools.permutations(ys):
            term = one
            for i, j in zip(xs, perm):
                term = term * adj[i][j]
                if not term:
                    break
            total = total + term
    cache[key] = total
    return total
