import cmath
import math
from fractions import Fraction

import mpmath as mp
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import cubic_thimble_coefficients, fresnel_moment, fresnel_moment_numeric
from qhsinv.ring import ONE, ZERO, FormalSeries, LaurentPoly, Scalar, parse_poly
from qhsinv.statphase import (DegenerateFormError, PhaseData, QuadraticForm, StableLimitError, gaussian_moment,
                              gaussian_prefactor, gram_variables, orbit_reduction, sphere_integral,
                              stable_limit, stationary_contribution, truncate_degree, x_variables)

nonzero = st.integers(-4, 4).filter(bool)


def unit_prefactor(n: int, order: int) -> FormalSeries:
    return FormalSeries.constant(LaurentPoly.constant(x_variables(n), 1), order, "Kinv")


# -- Gaussian moments ---------------------------------------------------------

def test_moment_examples():
    one = QuadraticForm.diagonal([1])
    assert gaussian_moment(one, [1]).coefficient == ZERO
    m0 = gaussian_moment(one, [0])
    assert m0.coefficient == Scalar.term(1, zeta8=1, pi=Fraction(1, 2)) and m0.kinv_power == Fraction(1, 2)
    assert gaussian_moment(one, [2]).kinv_power == Fraction(3, 2)


@pytest.mark.parametrize("a", [1, 2, -3])
@pytest.mark.parametrize("s", range(4))
def test_moment_matches_fresnel(a, s):
    g = gaussian_moment(QuadraticForm.diagonal([a]), [2 * s])
    assert g.coefficient == fresnel_moment(a, s)
    assert abs(g.coefficient.to_complex() - fresnel_moment_numeric(a, s)) < 1e-10


def test_moment_with_coupling_scales_like_k():
    # coupling lam behaves as K -> lam K
    form = QuadraticForm.diagonal([2])
    lam = Scalar(Fraction(1, 2)) * Scalar.pi()
    g = gaussian_moment(form, [4], lam)
    plain = gaussian_moment(form, [4])
    expected = plain.coefficient.to_complex() * (math.pi / 2) ** (-float(plain.kinv_power))
    assert abs(g.coefficient.to_complex() - expected) < 1e-12


def test_degenerate_form_rejected():
    with pytest.raises(DegenerateFormError):
        QuadraticForm(((1, 1), (1, 1)))


@settings(max_examples=30, deadline=None)
@given(nonzero, st.integers(0, 3).map(lambda k: 2 * k + 1))
def test_odd_moments_vanish(a, m):
    assert gaussian_moment(QuadraticForm.diagonal([a]), [m]).coefficient == ZERO


@settings(max_examples=20, deadline=None)
@given(nonzero, st.integers(-3, 3), nonzero, nonzero, st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_moment_multiplicative_over_blocks(a, b, d, c, m):
    assume(a * d - b * b != 0)
    block = ((a, b), (b, d))
    full = QuadraticForm(((a, b, 0), (b, d, 0), (0, 0, c)))
    lhs = gaussian_moment(full, m)
    left = gaussian_moment(QuadraticForm(block), m[:2])
    right = gaussian_moment(QuadraticForm.diagonal([c]), m[2:])
    assert lhs.coefficient == left.coefficient * right.coefficient
    assert lhs.kinv_power == left.kinv_power + right.kinv_power


def test_two_dim_moment_numeric():
    # rotate both axes: A positive definite, so x = e^{i pi/4} r works componentwise
    A = ((2, 1), (1, 3))
    g = gaussian_moment(QuadraticForm(A), [2, 2])
    rot = cmath.exp(1j * math.pi / 4)

    def f(r, s):
        x, y = rot * r, rot * s
        return mp.exp(-(2 * r * r + 2 * r * s + 3 * s * s)) * x ** 2 * y ** 2 * rot ** 2
    val = complex(mp.quad(f, [-mp.inf, mp.inf], [-mp.inf, mp.inf]))
    assert abs(g.coefficient.to_complex() - val) < 1e-9


# -- stationary contributions ---------------------------------------------------

def test_pure_quadratic_phase():
    f = parse_poly("2*x1^2 - x1*x2 + x2^2", ("x1", "x2"))
    r = stationary_contribution(PhaseData.from_polynomial(f, [0, 0]), unit_prefactor(2, 3), 3)
    assert r.series.coeffs == FormalSeries.constant(1, 3, "Kinv").coeffs
    assert r.prefactor == gaussian_moment(PhaseData.from_polynomial(f, [0, 0]).quadratic, [0, 0]).coefficient
    assert r.kinv_power == 1


def test_cubic_phase_series_exact():
    # independent term-by-term expansion: exp(i K x^3) -> moments <x^{3j}> / j!
    phase = PhaseData.from_polynomial(parse_poly("x^2 + x^3", ("x",)), [0])
    r = stationary_contribution(phase, unit_prefactor(1, 2), 2)
    # K^-1: (iK)^2/2 <x^6>/<1> = -K^2/2 * 15 (i/2K)^3 = 15 i/(16 K)
    assert r.series[1] == Scalar.term(Fraction(15, 16), zeta8=2)
    # K^-2: (iK)^4/24 * 11!! (i/2K)^6 = K^4/24 * 10395 * (-1/64) K^-6
    assert r.series[2] == Scalar(Fraction(-10395, 24 * 64))


def test_cubic_phase_against_quadrature():
    phase = PhaseData.from_polynomial(parse_poly("x^2 + x^3", ("x",)), [0])
    r = stationary_contribution(phase, unit_prefactor(1, 2), 2)
    fitted = cubic_thimble_coefficients(3)
    for k in range(3):
        exact = r.series[k].to_complex()
        assert abs(fitted[k] - exact) <= 1e-4 * abs(exact)


def test_shifted_stationary_point():
    # f = (x - 1)^2 + (x - 1)^3 + 5 has the same expansion at x* = 1
    f = parse_poly("(x - 1)^2 + (x - 1)^3 + 5", ("x",))
    g = parse_poly("x^2 + x^3", ("x",))
    a = stationary_contribution(PhaseData.from_polynomial(f, [1]), unit_prefactor(1, 2), 2)
    b = stationary_contribution(PhaseData.from_polynomial(g, [0]), unit_prefactor(1, 2), 2)
    assert a.series.coeffs == b.series.coeffs and a.phase_value == Scalar(5)


def test_non_stationary_point_rejected():
    with pytest.raises(ValueError, match="not stationary"):
        PhaseData.from_polynomial(parse_poly("x^2 + x", ("x",)), [0])


@pytest.mark.parametrize("P", [((1, 0), (0, 1)), ((1, 1), (0, 1)), ((2, 1), (1, 1)), ((1, -2), (0, 1))])
def test_unimodular_change_of_variables(P):
    xv = ("x1", "x2")
    f = parse_poly("x1^2 + 3*x1*x2 - x2^2 + x1^3 - 2*x1*x2^2 + x2^4", xv)
    x1, x2 = (LaurentPoly.var(xv, v) for v in xv)
    g = parse_poly("1 + x1*x2 + x2^2", xv)
    images = {"x1": x1 * P[0][0] + x2 * P[0][1], "x2": x1 * P[1][0] + x2 * P[1][1]}
    fP, gP = f.substitute(images, xv), g.substitute(images, xv)
    a = stationary_contribution(PhaseData.from_polynomial(f, [0, 0]), FormalSeries.constant(g, 2, "Kinv"), 2)
    b = stationary_contribution(PhaseData.from_polynomial(fP, [0, 0]), FormalSeries.constant(gP, 2, "Kinv"), 2)
    assert a.series.coeffs == b.series.coeffs and a.prefactor == b.prefactor


# -- stable limits -------------------------------------------------------------

def test_stable_limit_constant_family():
    s = FormalSeries([Scalar(1), Scalar(2), Scalar(3)], 2)
    assert stable_limit(lambda N: s, 2) == s


def test_stable_limit_staircase():
    target = [Scalar(Fraction(1, k + 1)) for k in range(6)]

    def family(N):
        return FormalSeries([target[k] if N > k else ZERO for k in range(6)], 5)
    assert stable_limit(family, 3, start=0).coeffs == tuple(target[:4])


def test_stable_limit_probe_schedules_agree():
    phase = parse_poly("x^2 + x^3 + x^4/2 + x^5/3 + x^6/4 + x^7/5 + x^8/6 + x^9/7 + x^10/8", ("x",))

    def family(N):
        trunc = truncate_degree(phase, N)
        return stationary_contribution(PhaseData.from_polynomial(trunc, [0]), unit_prefactor(1, 2), 2).series
    a = stable_limit(family, 2, start=3, step=1)
    b = stable_limit(family, 2, start=4, step=2)
    assert a == b
    # coefficients through K^-m only see degrees up to 3m + ... ; beyond N > 3m nothing changes
    assert family(7).coeffs == family(9).coeffs


def test_stable_limit_diagnoses_failure():
    with pytest.raises(StableLimitError, match="coefficient 0"):
        stable_limit(lambda N: FormalSeries([Scalar(N)], 0), 0, nmax=5)


# -- sphere integral ---------------------------------------------------------------

def sphere_numeric(P, b, a):
    """a * int_{S^2} P(a n) exp(i a b.n) dn by quadrature in spherical coordinates."""
    def f(th, ph):
        n = (mp.sin(th) * mp.cos(ph), mp.sin(th) * mp.sin(ph), mp.cos(th))
        arg = a * sum(bi * ni for bi, ni in zip(b, n))
        return P(*(a * x for x in n)) * mp.expj(arg) * mp.sin(th)
    return complex(a * mp.quad(f, [0, mp.pi], [0, 2 * mp.pi]))


@pytest.mark.parametrize("text,func", [("1", lambda x, y, z: 1), ("y1", lambda x, y, z: x),
                                       ("y1*y3 + y2^2", lambda x, y, z: x * z + y * y)])
def test_sphere_integral_against_quadrature(text, func):
    P = parse_poly(text, ("y1", "y2", "y3"))
    b, a = (0.3, -0.4, 0.5), 1.7
    expr = sphere_integral(P)
    mp.mp.dps = 15
    assert abs(expr.evaluate(b, a) - sphere_numeric(func, b, a)) < 1e-8


def test_sphere_integral_plane_wave_average():
    expr = sphere_integral(parse_poly("1", ("y1", "y2", "y3")))
    b, a = (0.2, 0.1, -0.7), 2.3
    r = math.sqrt(sum(x * x for x in b))
    assert abs(expr.evaluate(b, a) - 4 * math.pi * a * math.sin(a * r) / (a * r)) < 1e-12


def test_sphere_integral_odd_in_radius():
    P = parse_poly("y1^2*y2 + 3*y3 - y1*y2", ("y1", "y2", "y3"))
    expr = sphere_integral(P)
    b = (0.5, 0.25, -1.0)
    for a in (0.3, 1.1, 2.0):
        assert abs(expr.evaluate(b, a) + expr.evaluate(b, -a)) < 1e-10
    assert abs(expr.evaluate(b, 0.0)) < 1e-14


def test_sphere_stationary_branch_only():
    full = sphere_integral(parse_poly("1", ("y1", "y2", "y3")))
    half = sphere_integral(parse_poly("1", ("y1", "y2", "y3")), mode="stationary_point")
    assert all(key[3] == 1 for key, _ in half.terms)
    assert len(full.terms) == 2 * len(half.terms)


# -- orbit reduction -------------------------------------------------------------

def synthetic_terms(L, lk, quartic=True):
    gv = gram_variables(L)

    def invariant(m):
        if m == 2:
            return sum((LaurentPoly.var(gv, f"g{i + 1}{j + 1}") * lk[i][j] for i in range(L) for j in range(i + 1, L)),
                       LaurentPoly.constant(gv, 0))
        if m == 4 and quartic and L >= 2:
            return parse_poly("g11*g22 - g12^2", gv)
        return None

    def prefactor(m, n):
        return LaurentPoly.constant(gv, 1) if (m, n) == (0, 0) else None
    return invariant, prefactor


def test_orbit_single_component():
    r = orbit_reduction(1, [[0]], *synthetic_terms(1, [[0]]), N=4, order=1, a_degree=4)
    assert r.s_den == LaurentPoly.constant(("a1",), 1)
    assert r.s_num[0] == LaurentPoly.constant(("a1",), 1)


def test_orbit_two_components_leading_term():
    r = orbit_reduction(2, [[0, 3], [3, 0]], *synthetic_terms(2, [[0, 3], [3, 0]]), N=4, order=1, a_degree=6)
    lowest = {e: c for e, c in r.s_den.items() if sum(e) == 2}
    assert lowest == {(Fraction(1), Fraction(1)): Scalar(-3)}
    assert r.s_num[0].constant_term() == ONE


def test_orbit_determinant_recursion():
    lk3 = [[0, 2, 1], [2, 0, 3], [1, 3, 0]]
    full = orbit_reduction(3, lk3, *synthetic_terms(3, lk3), N=4, order=1, a_degree=6)
    sub = orbit_reduction(2, [[0, 2], [2, 0]], *synthetic_terms(2, [[0, 2], [2, 0]]), N=4, order=1, a_degree=6)
    av = ("a1", "a2", "a3")
    a = {v: LaurentPoly.var(av, v) for v in av}
    sub3 = sub.s_den.embed(av)
    predicted = a["a3"] * sub3 * (a["a1"] * lk3[0][2] + a["a2"] * lk3[1][2]) * -1
    linear_in_a3 = LaurentPoly(av, {e: c for e, c in full.s_den.items() if e[2] == 1})
    assert linear_in_a3 == LaurentPoly(av, {e: c for e, c in predicted.items() if sum(e) <= 6})


def test_orbit_degenerate_form():
    with pytest.raises(DegenerateFormError, match="undefined"):
        orbit_reduction(2, [[0, 0], [0, 0]], *synthetic_terms(2, [[0, 0], [0, 0]], quartic=False),
                        N=4, order=1, a_degree=6)


def test_orbit_rejects_non_collinear_vanishing():
    gv = gram_variables(2)

    def invariant(m):
        return parse_poly("g12", gv) if m == 2 else (parse_poly("g11*g22", gv) if m == 4 else None)
    with pytest.raises(ValueError, match="collinear"):
        orbit_reduction(2, [[0, 1], [1, 0]], invariant, lambda m, n: None, N=4, order=1, a_degree=6)


def test_orbit_bilinear_is_hermitian_shaped():
    lk3 = [[0, 2, 1], [2, 0, 3], [1, 3, 0]]
    r = orbit_reduction(3, lk3, *synthetic_terms(3, lk3), N=4, order=1, a_degree=6)
    assert r.bilinear[0][1] == r.bilinear[1][0]
