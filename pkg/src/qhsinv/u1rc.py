"""Surgery formulas for the trivial-connection and U(1)-reducible contributions,
lens-space closed forms and the numeric WRT sum.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .alexander import (AlexanderFunction, alexander_polynomial, alexander_surgery, link_variables,
                        stationary_u, surgery_variables)
from .alexander import connected_sum as alexander_connected_sum
from .linking import (FramingPhase, LinkPresentation, framing_phase, h1_order, signature,
                      surgery_coefficients, surgery_linking)
from .ring import (ONE, ZERO, DivisionError, FormalSeries, LaurentPoly, Scalar, binomial_series,
                   kinv_from_h, kinv_series_to_h, parse_poly)
from .statphase import QuadraticForm, _MomentTable, gaussian_prefactor, stable_limit


# -- Dedekind sums and lens spaces ------------------------------------------

def _sawtooth(x: Fraction) -> Fraction:
    if x.denominator == 1:
        return Fraction(0)
    return x - math.floor(x) - Fraction(1, 2)


def dedekind_sum(p: int, q: int) -> Fraction:
    """s(p, q) = sum_{k=1}^{p-1} ((k/p)) ((k q/p))."""
    if p < 1:
        raise ValueError("dedekind_sum needs p >= 1")
    if math.gcd(p, q) != 1:
        raise ValueError(f"p={p} and q={q} are not coprime")
    return sum((_sawtooth(Fraction(k, p)) * _sawtooth(Fraction(k * q, p)) for k in range(1, p)), Fraction(0))


def _signed_dedekind(p: int, q: int) -> Fraction:
    return dedekind_sum(p, q) if p > 0 else -dedekind_sum(-p, q)


def _half_difference(e: Fraction, order: int) -> FormalSeries:
    """(1+h)^(e/2) - (1+h)^(-e/2)."""
    return binomial_series(e / 2, order) - binomial_series(-e / 2, order)


def lens_ztr(p: int, q: int, order: int) -> FormalSeries:
    """Closed form of the trivial-connection invariant of L(p, q) as a series in h."""
    if p == 0:
        raise ValueError("p must be nonzero")
    if math.gcd(abs(p), q) != 1:
        raise ValueError(f"p={p} and q={q} are not coprime")
    num = _half_difference(Fraction(1, p), order + 1)
    den = _half_difference(Fraction(1), order + 1)
    ratio = (num / den).truncate(order)
    sign = 1 if p > 0 else -1
    pref = Scalar(sign) * Scalar.sqrt(Fraction(1, abs(p)))
    return binomial_series(3 * _signed_dedekind(p, q), order) * ratio * pref


# -- empty-link surgery formula ---------------------------------------------

def _sinc_series(n_terms: int) -> List[Scalar]:
    """sin(pi r)/(pi r) = sum_k w_k r^(2k)."""
    return [Scalar.term(Fraction((-1) ** k, math.factorial(2 * k + 1)), pi=2 * k) for k in range(n_terms)]


def _bernoulli(n: int) -> List[Fraction]:
    b = [Fraction(1)]
    for m in range(1, n + 1):
        b.append(-sum((math.comb(m + 1, k) * b[k] for k in range(m)), Fraction(0)) / (m + 1))
    return b


def x_over_sin(order: int) -> FormalSeries:
    """(pi/K)/sin(pi/K) as a series in K^-1."""
    bern = _bernoulli(order + 1)
    coeffs = [ZERO] * (order + 1)
    for k in range(order // 2 + 1):
        c = Fraction((-1) ** (k + 1) * 2 * (2 ** (2 * k - 1) - 1)) * bern[2 * k] / math.factorial(2 * k)
        if k == 0:
            c = Fraction(1)
        coeffs[2 * k] = Scalar.term(c, pi=2 * k)
    return FormalSeries(coeffs, order, "Kinv")


def _radial_moment_series(framing: int, kernel: Sequence[Scalar], order: int) -> FormalSeries:
    """sum_k kernel[k] <|c|^(2k)> for exp(i K (pi/2) p |c|^2) in three dimensions, relative to the
    zeroth moment, as a series in K^-1."""
    form = QuadraticForm.diagonal([framing] * 3)
    table = _MomentTable(form, Scalar.term(Fraction(1, 2), pi=1))
    coeffs = [ZERO] * (order + 1)
    for k, w in enumerate(kernel):
        if k > order or not w:
            continue
        total = ZERO
        # expand (x1^2 + x2^2 + x3^2)^k
        for i in range(k + 1):
            for j in range(k + 1 - i):
                l = k - i - j
                mult = math.factorial(k) // (math.factorial(i) * math.factorial(j) * math.factorial(l))
                total = total + table.value((2 * i, 2 * j, 2 * l)) * mult
        coeffs[k] = coeffs[k] + w * total
    return FormalSeries(coeffs, order, "Kinv")


def _framing_factor_h(phase: FramingPhase, order: int) -> Tuple[int, FormalSeries]:
    """exp(2 pi i phi/K) split as zeta8^(8 k_coefficient) times (1+h)^constant.

    Returns the zeta8 exponent (must be integral) and the h-series.
    """
    z = phase.k_coefficient * 8
    if z.denominator != 1:
        raise ValueError("framing phase coefficient of K is not a multiple of 1/8")
    return int(z), binomial_series(phase.constant, order)


def _ztr_unknot_kinv(framing: int, order: int, n_terms: int) -> FormalSeries:
    """Stationary integral for one framed unknot without phases, as a K^-1 series."""
    sinc = _sinc_series(n_terms)
    kernel = [ZERO] * (2 * n_terms)
    for a, wa in enumerate(sinc):
        for b, wb in enumerate(sinc):
            kernel[a + b] = kernel[a + b] + wa * wb
    radial = _radial_moment_series(framing, kernel[:n_terms], order)
    return radial * x_over_sin(order)


def ztr_surgery_empty(pres: LinkPresentation, order: int, nmax: Optional[int] = None) -> FormalSeries:
    """Trivial-connection invariant of the manifold obtained by surgery on disjoint framed unknots.

    The unknot integrand is [sin(pi|c|)/(pi|c|)] * [(pi/K)/sin(pi/K)]; with the
    measure kernel this gives the squared sinc below.  The kernel is truncated
    at N terms and the stable limit in N is returned.
    """
    if pres.L or pres.Lp:
        raise ValueError("ztr_surgery_empty takes a presentation without link components")
    if not pres.Ls:
        return FormalSeries.constant(ONE, order)
    if not pres.is_algebraically_split():
        raise ValueError("built-in integrand covers disjoint framed unknots only")
    framings = pres.framings()
    if any(p == 0 for p in framings):
        raise ValueError("zero framing gives a degenerate Gaussian")

    def family(N: int) -> FormalSeries:
        total = FormalSeries.constant(ONE, order, "Kinv")
        for p in framings:
            total = total * _ztr_unknot_kinv(p, order, N + 1)
        return kinv_series_to_h(total)

    series = stable_limit(family, order, start=order, nmax=nmax)
    zeta_power, qpower = _framing_factor_h(framing_phase(pres), order)
    sigma = signature(pres)
    # Gaussian phase zeta8^(3 sigma) from the three real directions of each component
    if (zeta_power + 3 * sigma) % 8:
        raise ValueError("framing phase does not cancel the Gaussian phase")
    pref = ONE
    for p in framings:
        pref = pref * Scalar.sqrt(Fraction(1, abs(p) ** 3))
    return series * qpower * pref


# -- U(1)-reducible surgery formula -----------------------------------------

class StationaryPointError(ValueError):
    pass


@dataclass(frozen=True)
class S3InvariantData:
    """U(1)-RC data of L u L^s in S^3.

    The invariant is h^-1 / nabla * sum_n numerators[n] / nabla^(2n) * h^n in
    variables link_variables(L) + surgery_variables(Ls); colors are the
    companion colors the numerators were computed for.
    """

    nabla: AlexanderFunction
    numerators: Tuple[LaurentPoly, ...]
    colors: Tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return len(self.numerators) - 1

    def to_dict(self) -> dict:
        return {"nabla": str(self.nabla), "variables": list(self.nabla.variables),
                "numerators": [str(p) for p in self.numerators], "colors": list(self.colors)}

    @classmethod
    def from_dict(cls, d: dict, L: Optional[int] = None) -> "S3InvariantData":
        variables = tuple(d["variables"])
        nabla = AlexanderFunction.parse(d["nabla"], variables, len(variables) if L is None else L)
        nums = tuple(parse_poly(p, variables) for p in d["numerators"])
        return cls(nabla, nums, tuple(int(c) for c in d.get("colors", ())))


def hopf_series(order: int) -> FormalSeries:
    """h/(q^(1/2) - q^(-1/2)) with q = 1 + h."""
    return _half_difference(Fraction(1), order + 1).shift(-1).truncate(order).inverse()


def _quantum_in(variables: Sequence[str], name: str, n: int) -> LaurentPoly:
    """[n] evaluated at q = name, for any integer n."""
    if n == 0:
        return LaurentPoly(variables, {}, [2] * len(variables))
    one = LaurentPoly.constant(variables, 1, [2] * len(variables))
    num = LaurentPoly.var(variables, name, Fraction(abs(n), 2), [2] * len(variables)) \
        - LaurentPoly.var(variables, name, Fraction(-abs(n), 2), [2] * len(variables))
    den = LaurentPoly.var(variables, name, Fraction(1, 2), [2] * len(variables)) \
        - LaurentPoly.var(variables, name, Fraction(-1, 2), [2] * len(variables))
    out = num.exact_divide(den) if abs(n) > 1 else one
    return out if n > 0 else -out


def keychain(framing: int, link_orientations: Sequence[int] = (1,), companion_colors: Sequence[int] = (),
             order: int = 2, casson_walker=None) -> Tuple[S3InvariantData, LinkPresentation]:
    """A framed unknot with L meridians as the link and colored meridians as companions.

    The link components are the cores of L(framing, 1) run in parallel.  The
    S^3 data comes from the colored Jones polynomial prod[alpha_i gamma]
    prod[beta_j gamma] / [gamma]^(L + L' - 1) of the key chain.
    """
    L, Lp = len(link_orientations), len(companion_colors)
    if L < 1:
        raise ValueError("a key chain needs at least one link meridian")
    n = L + Lp + 1
    lk = [[Fraction(0)] * n for _ in range(n)]
    for i, eps in enumerate(link_orientations):
        if eps not in (1, -1):
            raise ValueError("orientations must be +1 or -1")
        lk[i][n - 1] = lk[n - 1][i] = Fraction(eps)
    for j in range(Lp):
        lk[L + j][n - 1] = lk[n - 1][L + j] = Fraction(1)
    lk[n - 1][n - 1] = Fraction(framing)
    orientations = tuple(link_orientations) + (1,) * (Lp + 1)
    pres = LinkPresentation(L, Lp, 1, tuple(tuple(r) for r in lk), tuple(companion_colors), orientations,
                            casson_walker)
    variables = link_variables(L) + surgery_variables(1)
    bounds = [2] * len(variables)
    sign = 1
    for eps in link_orientations:
        sign *= eps
    nabla_poly = LaurentPoly.constant(variables, sign, bounds)
    ubin = LaurentPoly.var(variables, "u1", Fraction(1, 2), bounds) - LaurentPoly.var(variables, "u1", Fraction(-1, 2), bounds)
    for _ in range(L - 1):
        nabla_poly = nabla_poly * ubin
    colored = LaurentPoly.constant(variables, 1, bounds)
    for beta in companion_colors:
        colored = colored * _quantum_in(variables, "u1", int(beta))
    c = hopf_series(order)
    nums = tuple(nabla_poly ** (2 * k) * colored * c[k] for k in range(order + 1))
    return S3InvariantData(AlexanderFunction(nabla_poly, (), L + 1), nums, tuple(companion_colors)), pres


XPoly = Dict[Tuple[int, ...], LaurentPoly]


def _xmul(a: XPoly, b: XPoly, max_deg: int) -> XPoly:
    out: XPoly = {}
    for ea, pa in a.items():
        da = sum(ea)
        for eb, pb in b.items():
            if da + sum(eb) > max_deg:
                continue
            e = tuple(x + y for x, y in zip(ea, eb))
            prod = pa * pb
            out[e] = out[e] + prod if e in out else prod
    return {e: p for e, p in out.items() if p}


def _exp_series_1d(rate: Scalar, max_deg: int) -> List[Scalar]:
    """exp(rate * x) coefficients."""
    out, c = [], ONE
    for k in range(max_deg + 1):
        out.append(c)
        c = c * rate * Fraction(1, k + 1)
    return out


def _two_pi_i(b: Fraction) -> Scalar:
    return Scalar.term(2 * b, zeta8=2, pi=1)


class _StationaryExpansion:
    """Expands functions of (t, u) at u = U(t) exp(2 pi i x) in powers of x."""

    def __init__(self, tv, uv, ustar, bounds, max_deg):
        self.tv, self.uv, self.ustar, self.bounds, self.max_deg = tv, uv, ustar, bounds, max_deg
        self.n = len(uv)

    def monomial(self, e_t, e_u, coeff: Scalar) -> XPoly:
        exps = list(e_t)
        for b, U in zip(e_u, self.ustar):
            for i, x in enumerate(U):
                exps[i] += b * x
        base = LaurentPoly(self.tv, {tuple(exps): coeff}, self.bounds)
        out: XPoly = {(0,) * self.n: base}
        for j, b in enumerate(e_u):
            if not b:
                continue
            series = _exp_series_1d(_two_pi_i(b), self.max_deg)
            factor: XPoly = {}
            for k, s in enumerate(series):
                e = [0] * self.n
                e[j] = k
                factor[tuple(e)] = LaurentPoly.constant(self.tv, s, self.bounds)
            out = _xmul(out, factor, self.max_deg)
        return out

    def poly(self, p: LaurentPoly) -> XPoly:
        ti = [p.variables.index(v) for v in self.tv]
        ui = [p.variables.index(v) for v in self.uv]
        out: XPoly = {}
        for e, c in p.items():
            part = self.monomial([e[i] for i in ti], [e[i] for i in ui], c)
            for k, v in part.items():
                out[k] = out[k] + v if k in out else v
        return {e: v for e, v in out.items() if v}


def _scale_by_degree(f: XPoly, D: LaurentPoly, shift: int = 0) -> XPoly:
    """Multiply the x^e coefficient by D^(|e| + shift)."""
    cache: Dict[int, LaurentPoly] = {}
    out = {}
    for e, p in f.items():
        k = sum(e) + shift
        if k < 0:
            raise ValueError("negative power of the stationary denominator")
        if k not in cache:
            cache[k] = D ** k
        out[e] = p * cache[k]
    return out


def _compatible_bounds(pres: LinkPresentation, polys: Sequence[LaurentPoly]) -> List[int]:
    tv, uv = link_variables(pres.L), surgery_variables(pres.Ls)
    orders = surgery_coefficients(pres).orders[: pres.L]
    tb = {v: 1 for v in tv}
    ub = 2
    for p in polys:
        for v, b in zip(p.variables, p.bounds):
            if v in tb:
                tb[v] = math.lcm(tb[v], b)
            elif v in uv:
                ub = math.lcm(ub, b)
    return [math.lcm(2 * o, tb[v], o * ub) for v, o in zip(tv, orders)]


@dataclass(frozen=True)
class U1RCResult:
    """Z = h^-1 |H|^(-1/2) / nabla * sum_n numerators[n] / template^(2n) * h^n.

    template is nabla itself for L >= 2 and the Alexander polynomial for
    knots.  When the Casson-Walker invariant is known, numerators also equal
    q^phase_exponent * monomial * sum_n numerators_prime[n] / template^(2n) h^n.
    """

    L: int
    colors: Tuple[int, ...]
    h1_half: Scalar
    nabla: AlexanderFunction
    template: LaurentPoly
    numerators: Tuple[LaurentPoly, ...]
    phase_exponent: Optional[Fraction] = None
    monomial: Optional[LaurentPoly] = None
    numerators_prime: Optional[Tuple[LaurentPoly, ...]] = None

    @property
    def order(self) -> int:
        return len(self.numerators) - 1

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.template.variables

    def to_dict(self) -> dict:
        d = {"L": self.L, "colors": list(self.colors), "h1_half": str(self.h1_half),
             "nabla": str(self.nabla), "template": str(self.template),
             "numerators": [str(p) for p in self.numerators]}
        if self.phase_exponent is not None:
            d["phase_exponent"] = str(self.phase_exponent)
            d["monomial"] = str(self.monomial)
            d["numerators_prime"] = [str(p) for p in self.numerators_prime]
        return d

    def __str__(self) -> str:
        lines = [f"Z = h^(-1) * ({self.h1_half}) / nabla * sum_n P_n / A^(2n) * h^n",
                 f"nabla = {self.nabla}", f"A = {self.template}"]
        lines += [f"P_{n} = {p}" for n, p in enumerate(self.numerators)]
        if self.phase_exponent is not None:
            lines.append(f"phase exponent = {self.phase_exponent}")
            lines.append(f"monomial = {self.monomial}")
            lines += [f"P'_{n} = {p}" for n, p in enumerate(self.numerators_prime)]
        return "\n".join(lines)


def _phase_and_monomial(pres: LinkPresentation, tv, bounds) -> Tuple[Optional[Fraction], LaurentPoly]:
    lkm = surgery_linking(pres)
    L, Lp = pres.L, pres.Lp
    beta = [Fraction(b) for b in pres.colors]
    exps = [sum((lkm[i][L + j] * (beta[j] - 1) for j in range(Lp)), Fraction(0)) / 2 for i in range(L)]
    mono = LaurentPoly.monomial(tv, exps, 1, bounds)
    if pres.casson_walker is None:
        return None, mono
    total = Fraction(L)
    total += sum((lkm[i][j] for i in range(L) for j in range(i + 1, L)), Fraction(0))
    total += sum((lkm[L + i][L + j] * (beta[i] - 1) * (beta[j] - 1) for i in range(Lp) for j in range(i + 1, Lp)),
                 Fraction(0))
    total -= sum((lkm[i][L + j] * (beta[j] - 1) for i in range(L) for j in range(Lp)), Fraction(0))
    total -= sum((b - 1 for b in beta), Fraction(0))
    return 3 * pres.casson_walker + total / 2, mono


def _with_primes(result: U1RCResult, pres: LinkPresentation) -> U1RCResult:
    phase, mono = _phase_and_monomial(pres, result.variables, result.template.bounds)
    if phase is None:
        return result
    return _attach_primes(result, phase, mono)


def _attach_primes(result: U1RCResult, phase: Fraction, mono: LaurentPoly) -> U1RCResult:
    inv_q = binomial_series(-phase, result.order)
    mono_inv = mono.inverse()
    primes = []
    for n in range(result.order + 1):
        acc = result.template.zero()
        for k in range(n + 1):
            if inv_q[k]:
                acc = acc + result.numerators[n - k] * result.template ** (2 * k) * inv_q[k]
        primes.append(acc * mono_inv)
    return U1RCResult(result.L, result.colors, result.h1_half, result.nabla, result.template,
                      result.numerators, phase, mono, tuple(primes))


def u1rc_surgery(data: S3InvariantData, pres: LinkPresentation, order: Optional[int] = None) -> U1RCResult:
    """U(1)-RC invariant of the link components of pres in the surgered manifold."""
    L, Ls = pres.L, pres.Ls
    if L < 1:
        raise ValueError("u1rc_surgery needs a non-empty link; use ztr_surgery_empty for L = 0")
    N = data.order if order is None else order
    if N > data.order:
        raise ValueError(f"S^3 data only reaches order {data.order}")
    if tuple(data.colors) != tuple(pres.colors):
        raise ValueError(f"S^3 data colors {data.colors} differ from presentation colors {pres.colors}")
    if not data.nabla.is_polynomial():
        raise ValueError("the S^3 Alexander-Conway function of L u L^s must be a Laurent polynomial")
    tv, uv = link_variables(L), surgery_variables(Ls)
    if tuple(data.nabla.variables) != tv + uv:
        raise ValueError(f"S^3 data must use variables {tv + uv}")
    h1 = h1_order(pres)
    nums = data.numerators[: N + 1]
    if Ls == 0:
        nabla_m = data.nabla
        template = alexander_polynomial(nabla_m, 1) if L == 1 else nabla_m.poly
        res = U1RCResult(L, tuple(pres.colors), ONE, nabla_m, template, tuple(nums))
        return _with_primes(res, pres)

    coeffs = surgery_coefficients(pres).c
    for j in range(Ls):
        if all(coeffs[i][j] == 0 for i in range(L)):
            raise StationaryPointError(f"stationary point of surgery component {j + 1} vanishes identically")
    bounds = _compatible_bounds(pres, [data.nabla.numerator, *nums])
    ustar = stationary_u(pres)
    max_deg = 2 * N
    ex = _StationaryExpansion(tv, uv, ustar, bounds, max_deg)

    nabla_x = ex.poly(data.nabla.numerator)
    zero_e = (0,) * Ls
    D = nabla_x.get(zero_e)
    if D is None or not D:
        raise ZeroDivisionError("S^3 Alexander-Conway function vanishes at the stationary point")
    delta_scaled = _scale_by_degree({e: p for e, p in nabla_x.items() if e != zero_e}, D, -1)
    one = LaurentPoly.constant(tv, 1, bounds)

    # sin(pi c_j) = (U^(1/2) e^(i pi x) - U^(-1/2) e^(-i pi x)) / (2i)
    sin_x: XPoly = {zero_e: one}
    for j, U in enumerate(ustar):
        up = LaurentPoly.monomial(tv, [x / 2 for x in U], 1, bounds)
        um = LaurentPoly.monomial(tv, [-x / 2 for x in U], 1, bounds)
        plus = _exp_series_1d(Scalar.term(1, zeta8=2, pi=1), max_deg)
        minus = _exp_series_1d(Scalar.term(-1, zeta8=2, pi=1), max_deg)
        factor = {}
        for k in range(max_deg + 1):
            e = [0] * Ls
            e[j] = k
            factor[tuple(e)] = up * plus[k] - um * minus[k]
        sin_x = _xmul(sin_x, factor, max_deg)
    sin_x = _scale_by_degree(sin_x, D)

    form = QuadraticForm(pres.surgery_block())
    table = _MomentTable(form, Scalar.term(Fraction(1, 2), pi=1))
    kinv = kinv_from_h(N)
    kinv_powers = [FormalSeries.constant(ONE, N)]
    for _ in range(N):
        kinv_powers.append(kinv_powers[-1] * kinv)
    D_powers = [one]
    for _ in range(2 * N + 2):
        D_powers.append(D_powers[-1] * D)

    graded = [one.zero() for _ in range(N + 1)]
    for n in range(N + 1):
        deg = 2 * (N - n)
        p_x = _scale_by_degree(ex.poly(nums[n]), D)
        inv_power: XPoly = {zero_e: one}
        term: XPoly = {zero_e: one}
        binom = Fraction(1)
        for l in range(1, deg + 1):
            term = _xmul(term, delta_scaled, deg)
            if not term:
                break
            binom = binom * (-(2 * n + 1) - l + 1) / l
            for e, p in term.items():
                inv_power[e] = inv_power[e] + p * binom if e in inv_power else p * binom
        integrand = _xmul(_xmul(p_x, inv_power, deg), sin_x, deg)
        for e, p in integrand.items():
            d = sum(e)
            if d % 2:
                continue
            k = d // 2
            mom = table.value(e)
            if not mom:
                continue
            for m in range(n + k, N + 1):
                c = kinv_powers[k][m - n]
                if c:
                    graded[m] = graded[m] + p * (mom * c) * D_powers[2 * (m - n - k)]

    # framing phase: the alpha^2 terms cancel the stationary value of the Gaussian
    fp = framing_phase(pres)
    zeta_power, _ = _framing_factor_h(fp, N)
    const = fp.constant - sum(fp.alpha_coefficients[:L], Fraction(0))
    for j, beta in enumerate(pres.colors):
        const += fp.alpha_coefficients[L + j] * (beta * beta - 1)
    qpow = binomial_series(const, N)
    pref = Scalar.zeta8(zeta_power) * gaussian_prefactor(form, Scalar.term(Fraction(1, 2), pi=1))
    pref = pref * Scalar.sqrt(Fraction(2 ** Ls)) * Scalar.term(Fraction(1, 2 ** Ls), zeta8=-2 * Ls)
    pref = pref * Scalar.sqrt(h1)
    series = []
    for m in range(N + 1):
        acc = one.zero()
        for j in range(m + 1):
            if qpow[j]:
                acc = acc + graded[m - j] * D_powers[2 * j] * qpow[j]
        series.append(acc * pref)

    nabla_m = alexander_surgery(data.nabla, pres)
    if L == 1:
        template = alexander_polynomial(nabla_m, surgery_coefficients(pres).orders[0])
    else:
        template = nabla_m.poly
    template = template.with_bounds([math.lcm(a, b) for a, b in zip(template.bounds, bounds)])
    num_m = nabla_m.numerator.with_bounds(template.bounds)
    den_m = nabla_m.denominator().with_bounds(template.bounds)
    out = []
    for m, s in enumerate(series):
        top = s * num_m * template ** (2 * m)
        bottom = D_powers[2 * m + 1] * den_m
        try:
            out.append(top.exact_divide(bottom))
        except DivisionError as exc:
            raise DivisionError(f"order {m} numerator is not divisible by the stationary denominator "
                                f"(inconsistent S^3 data)") from exc
    res = U1RCResult(L, tuple(pres.colors), Scalar.sqrt(1 / h1), nabla_m, template, tuple(out))
    return _with_primes(res, pres)


def connected_sum(result: U1RCResult, other: LinkPresentation) -> U1RCResult:
    """The invariant of the same link after connected sum of the manifold with M'.

    M' is the surgery on other (unlinked framed unknots, no link components).
    Z(M # M') = Ztr(M') Z(M), while nabla, the template and |H| all pick up
    the factor |H'|, so the numerators are rescaled to keep the normal form.
    """
    if other.L or other.Lp:
        raise ValueError("the connected summand must be an empty-link surgery presentation")
    N = result.order
    h1_other = h1_order(other)
    ztr = ztr_surgery_empty(other, N)
    scale = Scalar.sqrt(h1_other) * h1_other
    nums = []
    for n in range(N + 1):
        acc = result.template.zero()
        for k in range(n + 1):
            if ztr[k]:
                acc = acc + result.numerators[n - k] * result.template ** (2 * k) * ztr[k]
        nums.append(acc * (scale * h1_other ** (2 * n)))
    out = U1RCResult(result.L, result.colors, result.h1_half * Scalar.sqrt(Fraction(1) / h1_other),
                     alexander_connected_sum(result.nabla, h1_other),
                     result.template * h1_other, tuple(nums))
    if result.phase_exponent is None or other.casson_walker is None:
        return out
    phase = result.phase_exponent + 3 * Fraction(other.casson_walker)
    return _attach_primes(out, phase, result.monomial)


# -- structure checks -------------------------------------------------------

def _in_integral_ring(p: LaurentPoly, h1: Fraction) -> bool:
    """Coefficients in Z[1/(2|H|)] (rational, denominators built from 2 and |H|)."""
    base = 2 * h1.numerator
    for _, c in p.items():
        if not c.is_rational():
            return False
        d = c.as_fraction().denominator
        while d > 1:
            g = math.gcd(d, base)
            if g == 1:
                return False
            d //= g
    return True


def structure_checks(result: U1RCResult,
                     rebuild: Optional[Callable[[Tuple[int, ...], Tuple[int, ...]], U1RCResult]] = None
                     ) -> Dict[str, Optional[bool]]:
    """Check the structural properties of a result.

    rebuild(colors, link_orientations) recomputes the invariant for other
    companion colors (a shorter tuple drops the last companions) or link
    orientations; checks needing it are reported as None when it is missing.
    """
    report: Dict[str, Optional[bool]] = {}
    report["symmetry"] = all(p.invert_all() == p for p in result.numerators)
    h1 = Fraction(1) / (result.h1_half * result.h1_half).as_fraction()
    if all(b % 2 for b in result.colors):
        report["integrality"] = all(_in_integral_ring(p, h1) for p in result.numerators)
    else:
        report["integrality"] = None
    if rebuild is None:
        report["color_one_reduction"] = report["orientation_flip"] = report["color_oddness"] = None
        return report
    base_orient = (1,) * result.L
    ok = True
    for j in range(len(result.colors)):
        colors = list(result.colors)
        colors[j] = 1
        with_one = rebuild(tuple(colors), base_orient)
        colors.pop(j)
        without = rebuild(tuple(colors), base_orient)
        ok = ok and with_one.numerators == without.numerators
    report["color_one_reduction"] = ok if result.colors else None
    ok = True
    for i in range(result.L):
        orient = [1] * result.L
        orient[i] = -1
        flipped = rebuild(tuple(result.colors), tuple(orient))
        name = result.variables[i]
        ok = ok and all(a == b.invert_variable(name) for a, b in zip(flipped.numerators, result.numerators))
    report["orientation_flip"] = ok
    ok = True
    for j in range(len(result.colors)):
        colors = list(result.colors)
        colors[j] = -colors[j]
        negated = rebuild(tuple(colors), base_orient)
        ok = ok and all(a == -b for a, b in zip(negated.numerators, result.numerators))
    report["color_oddness"] = ok if result.colors else None
    return report


def keychain_rebuilder(framing: int, order: int, casson_walker=None
                       ) -> Callable[[Tuple[int, ...], Tuple[int, ...]], U1RCResult]:
    """The rebuild callback of structure_checks for key chain examples."""
    def rebuild(colors: Tuple[int, ...], link_orientations: Tuple[int, ...]) -> U1RCResult:
        data, pres = keychain(framing, link_orientations, colors, order, casson_walker)
        return u1rc_surgery(data, pres)
    return rebuild


# -- WRT sum ----------------------------------------------------------------

def wrt_sum(pres: LinkPresentation, jones: Callable[[Sequence[int]], complex], K: int,
            colors: Sequence[int] = ()) -> complex:
    """Numeric WRT invariant from colored Jones values of the link plus surgery link.

    jones receives the full color vector (link colors followed by the surgery
    colors gamma) and returns the colored Jones value at q = exp(2 pi i/K).
    """
    if K < 3:
        raise ValueError("K must be at least 3")
    colors = list(colors)
    if len(colors) != pres.L:
        raise ValueError("one color per link component is required")
    if pres.Lp:
        raise ValueError("wrt_sum does not take companion components")
    phase = framing_phase(pres)
    phi = phase.value(K, [Fraction(c) for c in colors])
    framings = pres.framings()

    def qpow(x: Fraction) -> complex:
        return cmath.exp(2j * math.pi * float(x) / K)

    total = 0j
    for gammas in _color_grid(pres.Ls, K):
        w = qpow(sum((Fraction(p * g * g, 4) for p, g in zip(framings, gammas)), Fraction(0)))
        for g in gammas:
            w *= qpow(Fraction(g, 2)) - qpow(Fraction(-g, 2))
        total += w * jones(colors + list(gammas))
    return qpow(phi) * total


def _color_grid(n: int, K: int):
    if n == 0:
        yield []
        return
    for rest in _color_grid(n - 1, K):
        for g in range(1, K):
            yield rest + [g]


def quantum_integer(n: int, K: int) -> complex:
    """[n] at q = exp(2 pi i/K)."""
    return math.sin(math.pi * n / K) / math.sin(math.pi / K)


def unknot_jones(K: int) -> Callable[[Sequence[int]], complex]:
    """Colored Jones values of disjoint unknots: products of quantum integers."""
    def jones(colors: Sequence[int]) -> complex:
        out = 1.0
        for c in colors:
            out *= quantum_integer(c, K)
        return out
    return jones
