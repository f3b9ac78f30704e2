from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from qhsinv.alexander import (AlexanderFunction, SurgeryDivisionError, alexander_polynomial, alexander_surgery,
                              check_value_at_one, connected_sum, hopf_link, inverse_odd_power, link_variables, load_database,
                              nu_data, phi_factor, phi_integrality_holds, surgery_variables, symmetry_holds,
                              torrence_factor_check, unknot, value_at_one)
from qhsinv.linking import LinkPresentation, block_sum, h1_order, surgery_coefficients, surgery_linking, unknot_surgery
from qhsinv.ring import LaurentPoly, Scalar, parse_poly


def core_presentation(p: int, n_cores: int = 1) -> LinkPresentation:
    n = n_cores + 1
    lk = [[0] * n for _ in range(n)]
    for i in range(n_cores):
        lk[i][n - 1] = lk[n - 1][i] = 1
    lk[n - 1][n - 1] = p
    return LinkPresentation(n_cores, 0, 1, lk)


def s3_function(text: str, L: int, Ls: int) -> AlexanderFunction:
    return AlexanderFunction.parse(text, link_variables(L) + surgery_variables(Ls), L + Ls)


def core_knot(p: int) -> AlexanderFunction:
    return alexander_surgery(s3_function("1", 1, 1), core_presentation(p))


def test_builtin_s3_functions():
    assert str(unknot()) == "1/(t^(1/2) - t^(-1/2))"
    assert str(hopf_link()) == "1"
    assert symmetry_holds(unknot()) and symmetry_holds(hopf_link())


@pytest.mark.parametrize("p", [2, 3, 5, 7, -3])
def test_core_knot_in_lens_space(p):
    nabla = core_knot(p)
    e = Fraction(1, 2 * abs(p))
    t = ("t",)
    expected = AlexanderFunction(LaurentPoly.constant(t, 1, (2 * abs(p),)),
                                 (LaurentPoly.monomial(t, [e], 1, (2 * abs(p),)) - LaurentPoly.monomial(t, [-e], 1, (2 * abs(p),)),))
    assert nabla.equals(expected)
    assert nabla.manifold_h1 == abs(p)


def test_core_knot_text_form():
    assert str(core_knot(5)) == "1/(t^(1/10) - t^(-1/10))"


def test_empty_surgery_keeps_function():
    nabla = s3_function("t1^(1/2)*t2^(1/2) - t1^(-1/2)*t2^(-1/2)", 2, 0)
    assert alexander_surgery(nabla, LinkPresentation(2, 0, 0, [[0, 1], [1, 0]])).equals(nabla)


@pytest.mark.parametrize("p", [3, 5])
def test_orientation_reversal(p):
    pres = core_presentation(p)
    before = alexander_surgery(s3_function("1", 1, 1), pres)
    # reversing one component of the Hopf link flips the sign of its function
    after = alexander_surgery(s3_function("-1", 1, 1), pres.reversed(0))
    assert after.equals(before.invert_variable("t").scaled(-1))


def test_vanishing_denominator_names_component():
    pres = LinkPresentation(1, 0, 2, [[0, 1, 0], [1, 5, 0], [0, 0, 3]])
    with pytest.raises(ValueError, match="component 2"):
        alexander_surgery(s3_function("1", 1, 2), pres)


def test_inexact_division_is_an_error():
    # two cores with a wrong (non-divisible) S^3 function
    with pytest.raises(SurgeryDivisionError, match="division failed"):
        alexander_surgery(s3_function("1", 2, 1), core_presentation(5, 2))


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_alexander_polynomial_of_core(p):
    nabla = core_knot(p)
    o = surgery_coefficients(core_presentation(p)).orders[0]
    delta = alexander_polynomial(nabla, o)
    assert delta == LaurentPoly.constant(("t",), 1, delta.bounds)
    assert value_at_one(delta) == 1
    assert check_value_at_one(delta, nabla.manifold_h1, o)


def test_unknot_alexander_polynomial():
    delta = alexander_polynomial(unknot(), 1)
    assert value_at_one(delta) == 1


def test_torrence_hopf_in_s3():
    sub = AlexanderFunction.parse("1/(t2^(1/2) - t2^(-1/2))", ("t2",), 1)
    assert torrence_factor_check(hopf_link(), sub, [1])


def test_torrence_zero_linking_row():
    # a split link has nabla = 0, and the factor vanishes for lk = 0
    split = AlexanderFunction(LaurentPoly.constant(("t1", "t2"), 0), (), 2)
    assert torrence_factor_check(split, AlexanderFunction.parse("1/(t2^(1/2) - t2^(-1/2))", ("t2",), 1), [0])


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_torrence_two_cores(p):
    full = alexander_surgery(s3_function("u1^(1/2) - u1^(-1/2)", 2, 1), core_presentation(p, 2))
    sub = core_knot(p)._map(lambda q: q.substitute({"t": LaurentPoly.var(("t2",), "t2")}, ("t2",)))
    lk01 = surgery_linking(core_presentation(p, 2))[0][1]
    assert lk01 == Fraction(-1, p)
    assert torrence_factor_check(full, sub, [lk01])
    assert symmetry_holds(full)


def test_nu_examples():
    bare = LinkPresentation(1, 0, 0, [[0]])
    assert nu_data(bare).nu == (1,) and nu_data(bare).nu_prime == (0,)
    assert phi_factor(bare) == LaurentPoly.var(("t",), "t", Fraction(-1, 2))
    assert nu_data(core_presentation(3)).nu_prime == (Fraction(2, 3),)


def test_nu_prime_needs_split_surgery():
    pres = LinkPresentation(1, 0, 2, [[0, 1, 0], [1, 2, 1], [0, 1, 3]])
    with pytest.raises(ValueError):
        nu_data(pres)


@pytest.mark.parametrize("p", [3, 5, 7])
def test_phi_integrality_for_odd_cores(p):
    assert phi_integrality_holds(core_knot(p), core_presentation(p))
    full = alexander_surgery(s3_function("u1^(1/2) - u1^(-1/2)", 2, 1), core_presentation(p, 2))
    assert phi_integrality_holds(full, core_presentation(p, 2))


def _series_oracle(coeffs, n, order):
    h = sympy.symbols("h")
    t = 1 + h
    poly = sum(c * t ** e for e, c in coeffs.items())
    ser = sympy.series(poly ** (-(2 * n + 1)), h, 0, order + 1).removeO()
    return [sympy.Rational(ser.coeff(h, k)) for k in range(order + 1)]


@pytest.mark.parametrize("n", [0, 1, 2])
def test_inverse_odd_power_oracle(n):
    coeffs = {1: 1, 0: 1, -1: 1}
    delta = parse_poly("t + 1 + t^(-1)", ("t",))
    mono, series = inverse_odd_power(delta, n, 4)
    # mono = t^(2n+1) (inverse of the lowest monomial t^-1 raised to 2n+1); fold it back in
    shifted = {e + 1: c for e, c in coeffs.items()}
    assert mono == LaurentPoly.var(("t",), "t", 2 * n + 1)
    assert [series[k] for k in range(5)] == [Scalar(Fraction(int(x.p), int(x.q))) for x in _series_oracle(shifted, n, 4)]
    assert series[0] == Scalar(Fraction(1, 3 ** (2 * n + 1)))


def test_inverse_odd_power_trivial():
    one = LaurentPoly.constant(("t",), 1)
    mono, series = inverse_odd_power(one, 3, 3)
    assert mono == one and all(series[k] == (Scalar(1) if k == 0 else Scalar(0)) for k in range(4))


def test_database(tmp_path):
    db = tmp_path / "links.json"
    db.write_text('{"hopf": {"nabla": "1", "variables": ["t1", "t2"], "components": 2}, '
                  '"unknot": {"nabla": "1/(t^(1/2) - t^(-1/2))", "variables": ["t"], "components": 1}}')
    links = load_database(db)
    assert links["unknot"].equals(unknot())
    assert links["hopf"].equals(hopf_link())


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9).map(lambda x: x if x % 2 else -x), st.sampled_from([1, -1]))
def test_symmetry_after_surgery(p, eps):
    pres = LinkPresentation(1, 0, 1, [[0, eps], [eps, p]])
    nabla = alexander_surgery(s3_function(str(eps), 1, 1), pres)
    assert symmetry_holds(nabla)


@pytest.mark.parametrize("p,summand", [(3, [2]), (5, [-3, 4]), (7, [1])])
def test_connected_sum_scales_delta(p, summand):
    pres = core_presentation(p)
    knot = core_knot(p)
    other = h1_order(unknot_surgery(summand))
    both = connected_sum(knot, other)
    o = surgery_coefficients(pres).orders[0]
    delta = alexander_polynomial(both, o)
    assert delta == alexander_polynomial(knot, o) * Scalar(other)
    # the value at one still equals |H|/o for the summed manifold
    assert check_value_at_one(delta, h1_order(block_sum(pres, unknot_surgery(summand))), o)
    assert both.manifold_h1 == knot.manifold_h1 * other


def test_split_summand_cannot_go_through_the_surgery_formula():
    pres = block_sum(core_presentation(5), unknot_surgery([3]))
    split = AlexanderFunction(LaurentPoly.constant(link_variables(1) + surgery_variables(2), 0), (), 3)
    with pytest.raises(ValueError, match="component 2"):
        alexander_surgery(split, pres)
