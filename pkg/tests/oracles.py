"""Independent reference computations used by several test modules."""
import math
from fractions import Fraction
from typing import List, Sequence

import mpmath as mp

from qhsinv.ring import Scalar


def double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def fresnel_moment(a: int, s: int) -> Scalar:
    """int exp(i K a x^2) x^(2s) dx at K = 1, exactly.

    Gamma(s + 1/2) (-i a)^(-(s + 1/2)) with Gamma(s + 1/2) = (2s-1)!! sqrt(pi) / 2^s
    and (-i a)^(-1/2 - s) = |a|^(-1/2 - s) exp(i pi sgn(a) (2s + 1) / 4).
    """
    sign = 1 if a > 0 else -1
    mag = Fraction(1, abs(a) ** s) * Fraction(double_factorial(2 * s - 1), 2 ** s)
    return Scalar.term(mag, zeta8=sign * (2 * s + 1), pi=Fraction(1, 2)) * Scalar.sqrt(Fraction(1, abs(a)))


def fresnel_moment_numeric(a: float, s: int, K: float = 1.0) -> complex:
    """The same moment by quadrature along the rotated contour x = exp(i pi sgn(a)/4) r."""
    rot = mp.expjpi(mp.mpf(1) / 4 * (1 if a > 0 else -1))
    f = lambda r: mp.exp(-K * abs(a) * r * r) * (rot * r) ** (2 * s) * rot
    return complex(mp.quad(f, [-mp.inf, 0, mp.inf]))


def cubic_thimble_coefficients(n_coeffs: int = 4, Ks: Sequence[int] = (200, 250, 300, 400, 500, 700, 1000, 1500),
                               dps: int = 30) -> List[complex]:
    """Coefficients c_j of the K^-1 expansion of the x* = 0 contribution of exp(i K (x^2 + x^3)).

    The integral is taken over the steepest descent path through 0, parametrized
    by x(s) with x^2 + x^3 = i s^2, so that the integrand is exp(-K s^2) x'(s).
    The normalized values I(K) K^(1/2) / (e^(i pi/4) sqrt(pi)) are fitted by a
    polynomial in 1/K through all sample points (Richardson extrapolation).
    """
    mp.mp.dps = dps
    w = mp.expjpi(mp.mpf(1) / 4)

    def point(s):
        y = w * s
        x = y - y ** 2 / 2 + 5 * y ** 3 / 8
        for _ in range(60):
            step = (x ** 2 + x ** 3 - y ** 2) / (2 * x + 3 * x ** 2)
            x -= step
            if abs(step) < mp.mpf(10) ** (3 - dps):
                break
        return x

    def integrand(s, K):
        if s == 0:
            return w
        x = point(s)
        return mp.exp(-K * s * s) * 2j * s / (2 * x + 3 * x ** 2)

    def integral(K):
        cut = mp.sqrt(70 / mp.mpf(K))
        return mp.quad(lambda s: integrand(s, K), mp.linspace(-cut, cut, 9))

    vals = [integral(K) * mp.sqrt(K) / (w * mp.sqrt(mp.pi)) for K in Ks]
    A = mp.matrix([[mp.mpf(K) ** (-j) for j in range(len(Ks))] for K in Ks])
    c = mp.lu_solve(A, mp.matrix(vals))
    return [complex(c[j]) for j in range(n_coeffs)]


def dedekind_by_cotangents(p: int, q: int) -> float:
    """s(q, p) via the cotangent formula (1/4p) sum cot(pi k/p) cot(pi k q/p)."""
    return sum(1 / math.tan(math.pi * k / p) / math.tan(math.pi * k * q / p) for k in range(1, p)) / (4 * p)
