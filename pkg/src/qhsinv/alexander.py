"""Alexander-Conway functions of links in rational homology spheres.

Functions of links in S^3 are input data.  The surgery formula turns them
into functions of links in the surgered manifold.  A knot function may be a
genuine rational function (the unknot's is 1/(t^(1/2) - t^(-1/2))), so an
AlexanderFunction keeps a numerator and a list of binomial denominator factors.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .linking import LinkPresentation, h1_order, surgery_coefficients, surgery_determinant, surgery_linking
from .ring import (ONE, DivisionError, FormalSeries, LaurentPoly, Scalar, as_scalar, binomial_series,
                   parse_fraction, parse_poly)


class SurgeryDivisionError(DivisionError):
    pass


def link_variables(L: int) -> Tuple[str, ...]:
    return ("t",) if L == 1 else tuple(f"t{i + 1}" for i in range(L))


def surgery_variables(Ls: int) -> Tuple[str, ...]:
    return tuple(f"u{j + 1}" for j in range(Ls))


def half_binomial(variables: Sequence[str], exps: Sequence[Fraction], bounds=None) -> LaurentPoly:
    """m^(1/2) - m^(-1/2) for the monomial m with exponent vector `exps`."""
    half = [Fraction(e) / 2 for e in exps]
    return (LaurentPoly.monomial(variables, half, 1, bounds)
            - LaurentPoly.monomial(variables, [-x for x in half], 1, bounds))


@dataclass(frozen=True)
class AlexanderFunction:
    """numerator / prod(denominators); L components; |H_1| of the ambient manifold."""

    numerator: LaurentPoly
    denominators: Tuple[LaurentPoly, ...] = ()
    L: int = 1
    manifold_h1: Fraction = Fraction(1)

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.numerator.variables

    def is_polynomial(self) -> bool:
        return not self.denominators

    @property
    def poly(self) -> LaurentPoly:
        if self.denominators:
            raise DivisionError("Alexander function is not a Laurent polynomial")
        return self.numerator

    def denominator(self) -> LaurentPoly:
        d = self.numerator.one()
        for f in self.denominators:
            d = d * f
        return d

    def _map(self, f) -> "AlexanderFunction":
        return AlexanderFunction(f(self.numerator), tuple(f(d) for d in self.denominators), self.L,
                                 self.manifold_h1)

    def invert_all(self) -> "AlexanderFunction":
        return self._map(lambda p: p.invert_all())

    def invert_variable(self, name: str) -> "AlexanderFunction":
        return self._map(lambda p: p.invert_variable(name))

    def scaled(self, c) -> "AlexanderFunction":
        return AlexanderFunction(self.numerator * as_scalar(c), self.denominators, self.L, self.manifold_h1)

    def __neg__(self):
        return self.scaled(-1)

    def equals(self, other: "AlexanderFunction") -> bool:
        """Equality as rational functions (cross multiplication)."""
        return self.numerator * other.denominator() == other.numerator * self.denominator()

    def __str__(self) -> str:
        if not self.denominators:
            return str(self.numerator)
        num = str(self.numerator)
        if len(self.numerator) > 1:
            num = f"({num})"
        dens = "*".join(f"({d})" if len(d) > 1 else str(d) for d in self.denominators)
        return f"{num}/{dens}"

    @classmethod
    def parse(cls, text: str, variables: Sequence[str], L: Optional[int] = None,
              manifold_h1: Fraction = Fraction(1)) -> "AlexanderFunction":
        num, den = parse_fraction(text, variables)
        dens = () if den.is_constant() and den.constant_term() == 1 else (den,)
        if dens and den.is_monomial():
            num, dens = num * den.inverse(), ()
        return cls(num, dens, len(variables) if L is None else L, Fraction(manifold_h1))


def unknot(variable: str = "t") -> AlexanderFunction:
    """The unknot in S^3: 1/(t^(1/2) - t^(-1/2))."""
    v = (variable,)
    return AlexanderFunction(LaurentPoly.constant(v, 1, (2,)), (half_binomial(v, [1], (2,)),), 1)


def hopf_link(variables: Sequence[str] = ("t1", "t2")) -> AlexanderFunction:
    """The positive Hopf link in S^3, normalized to 1."""
    return AlexanderFunction(LaurentPoly.constant(tuple(variables), 1, (2, 2)), (), 2)


def load_database(path) -> Dict[str, AlexanderFunction]:
    """Read a JSON map name -> {"nabla": text, "variables": [...], "components": int}."""
    with open(path) as fh:
        raw = json.load(fh)
    out = {}
    for name, entry in raw.items():
        out[name] = AlexanderFunction.parse(entry["nabla"], entry["variables"], int(entry["components"]))
    return out


# -- the surgery formula ----------------------------------------------------

def stationary_u(pres: LinkPresentation) -> List[Tuple[Fraction, ...]]:
    """Exponent vectors (over the link variables) of u_j = prod_i t_i^(-c_ij)."""
    coeffs = surgery_coefficients(pres).c
    return [tuple(-coeffs[i][j] for i in range(pres.L)) for j in range(pres.Ls)]


def _cancel(num: LaurentPoly, dens: Sequence[LaurentPoly]) -> Tuple[LaurentPoly, List[LaurentPoly]]:
    left = []
    for d in dens:
        q, r = num.divmod_exact(d)
        if r:
            left.append(d)
        else:
            num = q
    return num, left


def _positive_leading(num: LaurentPoly, dens: Sequence[LaurentPoly]) -> Tuple[LaurentPoly, List[LaurentPoly]]:
    out = []
    for d in dens:
        if d.leading()[1] == -1:
            d, num = -d, -num
        out.append(d)
    return num, out


def _link_bounds(pres: LinkPresentation, nabla: AlexanderFunction, orders: Sequence[int]) -> List[int]:
    nb = dict(zip(nabla.variables, nabla.numerator.bounds))
    for d in nabla.denominators:
        for v, b in zip(d.variables, d.bounds):
            nb[v] = math.lcm(nb.get(v, 1), b)
    tv, uv = link_variables(pres.L), surgery_variables(pres.Ls)
    ub = math.lcm(2, *(nb.get(v, 1) for v in uv)) if uv else 2
    return [math.lcm(2 * o, nb.get(t, 1), o * ub) for t, o in zip(tv, orders)]


def alexander_surgery(nabla_s3: AlexanderFunction, pres: LinkPresentation) -> AlexanderFunction:
    """Alexander-Conway function of the link components in the surgered manifold.

    nabla_s3 is the function of the link together with the surgery link in
    S^3, in variables link_variables(L) + surgery_variables(Ls).  Companion
    components of the presentation are ignored.
    """
    tv, uv = link_variables(pres.L), surgery_variables(pres.Ls)
    if pres.L < 1:
        raise ValueError("alexander_surgery needs at least one link component")
    if tuple(nabla_s3.variables) != tv + uv:
        raise ValueError(f"S^3 function must be in variables {tv + uv}, got {nabla_s3.variables}")
    h1 = h1_order(pres)
    if not pres.Ls:
        return AlexanderFunction(nabla_s3.numerator, nabla_s3.denominators, pres.L, h1)
    orders = surgery_coefficients(pres).orders[: pres.L]
    bounds = _link_bounds(pres, nabla_s3, orders)
    ustar = stationary_u(pres)
    for j, e in enumerate(ustar):
        if not any(e):
            raise ValueError(f"surgery formula denominator vanishes identically for surgery component {j + 1}")
    mapping = {u: LaurentPoly.monomial(tv, e) for u, e in zip(uv, ustar)}
    num = nabla_s3.numerator.substitute(mapping, tv, bounds)
    dens = [d.substitute(mapping, tv, bounds) for d in nabla_s3.denominators]
    det = surgery_determinant(pres)
    sign = (-1) ** pres.Ls * (1 if det > 0 else -1)
    num = num * sign
    for e in ustar:
        dens.append(half_binomial(tv, e, bounds))
    num, dens = _cancel(num, dens)
    num, dens = _positive_leading(num, dens)
    if dens and pres.L >= 2:
        raise SurgeryDivisionError("surgery formula division failed")
    return AlexanderFunction(num, tuple(dens), pres.L, h1)


def connected_sum(nabla: AlexanderFunction, h1_other) -> AlexanderFunction:
    """The function of the same link after connected sum with a QHS M'.

    Split surgery components have vanishing S^3 function, so this cannot go
    through alexander_surgery; the function just scales by |H_1(M')|.
    """
    h1_other = Fraction(h1_other)
    if h1_other <= 0:
        raise ValueError("|H_1(M')| must be positive")
    return AlexanderFunction(nabla.numerator * as_scalar(h1_other), nabla.denominators, nabla.L,
                             nabla.manifold_h1 * h1_other)


# -- knot polynomial --------------------------------------------------------

def alexander_polynomial(nabla: AlexanderFunction, order: int) -> LaurentPoly:
    """Delta(t) = (t^(1/2o) - t^(-1/2o)) * nabla(t) for a knot of order o."""
    if nabla.L != 1:
        raise ValueError("alexander_polynomial is defined for knots")
    v = nabla.variables
    b = math.lcm(2 * order, nabla.numerator.bounds[0])
    num = nabla.numerator.with_bounds([b]) * half_binomial(v, [Fraction(1, order)], [b])
    num, left = _cancel(num, nabla.denominators)
    if left:
        raise DivisionError("Alexander polynomial is not a Laurent polynomial")
    return num


def value_at_one(delta: LaurentPoly) -> Fraction:
    v = delta.value_at_one()
    return v.as_fraction()


def check_value_at_one(delta: LaurentPoly, h1: Fraction, order: int) -> bool:
    return value_at_one(delta) == Fraction(h1) / order


def symmetry_holds(nabla: AlexanderFunction) -> bool:
    """nabla(t^-1) = (-1)^L nabla(t)."""
    return nabla.invert_all().equals(nabla.scaled((-1) ** nabla.L))


def torrence_factor_check(nabla_full: AlexanderFunction, nabla_sub: AlexanderFunction,
                          lk_row: Sequence[Fraction]) -> bool:
    """nabla(L0 u L)(1, t) = (prod t^(lk/2) - prod t^(-lk/2)) nabla(L)(t).

    nabla_full's first variable belongs to the knot L0; the remaining ones
    must match nabla_sub's variables.
    """
    sub_vars = nabla_sub.variables
    first = nabla_full.variables[0]
    rest = nabla_full.variables[1:]
    if len(rest) != len(sub_vars):
        raise ValueError("component count mismatch between full link and sublink")
    rename = {a: LaurentPoly.var(sub_vars, b) for a, b in zip(rest, sub_vars)}
    rename[first] = LaurentPoly.constant(sub_vars, 1)

    def at_one(p: LaurentPoly) -> LaurentPoly:
        return p.substitute(rename, sub_vars)

    num = at_one(nabla_full.numerator)
    dens = [at_one(d) for d in nabla_full.denominators]
    if any(not d for d in dens):
        raise ValueError("denominator of the full link vanishes at t0 = 1")
    factor = half_binomial(sub_vars, [Fraction(x) for x in lk_row])
    lhs = AlexanderFunction(num, tuple(dens), len(sub_vars))
    rhs = AlexanderFunction(nabla_sub.numerator * factor, nabla_sub.denominators, len(sub_vars))
    return lhs.equals(rhs)


# -- integrality normalization ----------------------------------------------

@dataclass(frozen=True)
class NuData:
    nu: Tuple[Fraction, ...]
    nu_prime: Tuple[Fraction, ...]


def nu_data(pres: LinkPresentation) -> NuData:
    L = pres.L
    lkm = surgery_linking(pres)
    nu = tuple(sum((lkm[i][j] for j in range(L) if j != i), Fraction(0)) + 1 for i in range(L))
    if not pres.Ls:
        return NuData(nu, (Fraction(0),) * L)
    if not pres.is_algebraically_split():
        raise ValueError("nu' is defined only for algebraically split surgery links")
    s = list(pres.surgery_indices)
    nu_p = []
    for i in range(L):
        total = Fraction(0)
        for j in s:
            p = pres.lk[j][j]
            x = pres.lk[i][j]
            total += x * (p - x) / p
        nu_p.append(total)
    return NuData(nu, tuple(nu_p))


def phi_factor(pres: LinkPresentation) -> LaurentPoly:
    """Phi(t) = t^(-(nu + nu')/2) as a monomial in the link variables."""
    d = nu_data(pres)
    return LaurentPoly.monomial(link_variables(pres.L), [-(a + b) / 2 for a, b in zip(d.nu, d.nu_prime)])


def _integral_in(p: LaurentPoly, orders: Sequence[int]) -> bool:
    return p.exponent_lattice_ok(orders) and p.has_integer_coefficients()


def phi_integrality_holds(nabla: AlexanderFunction, pres: LinkPresentation) -> bool:
    """Phi*nabla (L >= 2) or t^(1/2)*Phi*Delta (knots) lies in Z[t^(+-1/o)]."""
    orders = surgery_coefficients(pres).orders[: pres.L]
    phi = phi_factor(pres)
    if pres.L == 1:
        delta = alexander_polynomial(nabla, orders[0])
        target = LaurentPoly.var(delta.variables, delta.variables[0], Fraction(1, 2)) * phi * delta
    else:
        target = phi * nabla.poly
    return _integral_in(target, orders)


# -- inverse odd powers -----------------------------------------------------

def inverse_odd_power(poly: LaurentPoly, n: int, order: int) -> Tuple[LaurentPoly, FormalSeries]:
    """1/poly^(2n+1) = prefactor * series in h, where every variable is 1 + h.

    The prefactor is the inverse odd power of the smallest monomial of
    poly, so the series has constant term 1/poly(1)^(2n+1).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not poly:
        raise ZeroDivisionError("zero polynomial")
    power = 2 * n + 1
    lead_exp = min(poly.terms)
    mono = LaurentPoly.monomial(poly.variables, lead_exp, 1, poly.bounds)
    g = poly * mono.inverse()
    total = FormalSeries.constant(Scalar(0), order)
    for exps, c in g.items():
        total = total + binomial_series(sum(exps, Fraction(0)), order) * c
    if not total[0]:
        raise ZeroDivisionError("polynomial vanishes at the expansion point")
    return mono ** (-power), total.inverse() ** power
