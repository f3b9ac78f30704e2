"""Exact scalars, Laurent polynomials with fractional exponents, truncated series.

Scalars live in the ring generated over Q by e^{i pi/4}, integer powers of pi
and square roots of positive rationals.  Laurent polynomials carry a fixed
exponent denominator per variable.  Series carry their truncation order.
"""
from __future__ import annotations

import ast
import cmath
import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from sympy.ntheory.factor_ import core as _squarefree_part

Number = Union[int, Fraction]


class DenominatorError(ValueError):
    """An exponent does not fit the declared denominator bound."""


class DivisionError(ValueError):
    """An exact division in the Laurent ring left a remainder."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


@lru_cache(maxsize=4096)
def _split_square(n: int) -> Tuple[int, int]:
    """Return (s, r) with n = s^2 * r and r squarefree."""
    r = int(_squarefree_part(n))
    s = math.isqrt(n // r)
    return s, r


# --------------------------------------------------------------------------
# Scalar
# --------------------------------------------------------------------------

Key = Tuple[int, Fraction, int]  # (zeta8 power in 0..3, pi power in (1/2)Z, squarefree radicand)


class Scalar:
    """Finite sum of c * zeta8^k * pi^m * sqrt(r) with rational c.

    zeta8^4 = -1 is applied so k stays in 0..3; r is a squarefree positive
    integer (a rational radicand a/b is stored as sqrt(ab)/b).
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, value: Union["Scalar", Number, str] = 0):
        if isinstance(value, Scalar):
            self._terms = value._terms
        else:
            c = _frac(value)
            self._terms = {(0, Fraction(0), 1): c} if c else {}
        self._hash = None

    @classmethod
    def _from_terms(cls, terms: Dict[Key, Fraction]) -> "Scalar":
        s = cls.__new__(cls)
        s._terms = {k: v for k, v in terms.items() if v}
        s._hash = None
        return s

    @classmethod
    def term(cls, coeff: Number = 1, zeta8: int = 0, pi: Number = 0, radicand: Number = 1) -> "Scalar":
        c = _frac(coeff)
        pi = _frac(pi)
        if (2 * pi).denominator != 1:
            raise ValueError("pi powers must be half-integers")
        rad = _frac(radicand)
        if rad <= 0:
            raise ValueError("radicand must be positive")
        # sqrt(a/b) = sqrt(a*b)/b
        num = rad.numerator * rad.denominator
        c /= rad.denominator
        s, r = _split_square(num)
        c *= s
        k = zeta8 % 8
        if k >= 4:
            k -= 4
            c = -c
        return cls._from_terms({(k, pi, r): c})

    @classmethod
    def sqrt(cls, r: Number) -> "Scalar":
        return cls.term(1, radicand=r)

    @classmethod
    def zeta8(cls, k: int = 1) -> "Scalar":
        return cls.term(1, zeta8=k)

    @classmethod
    def pi(cls, m: Number = 1) -> "Scalar":
        return cls.term(1, pi=m)

    # -- inspection ------------------------------------------------------
    @property
    def terms(self) -> Dict[Key, Fraction]:
        return dict(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_rational(self) -> bool:
        return all(k == (0, 0, 1) for k in self._terms)

    def as_fraction(self) -> Fraction:
        if not self._terms:
            return Fraction(0)
        if not self.is_rational():
            raise ValueError(f"{self} is not rational")
        return self._terms[(0, Fraction(0), 1)]

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def pi_powers(self) -> set:
        return {k[1] for k in self._terms}

    # -- arithmetic ------------------------------------------------------
    @staticmethod
    def _coerce(other) -> Optional["Scalar"]:
        if isinstance(other, Scalar):
            return other
        if isinstance(other, (int, Fraction)):
            return Scalar(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        out = dict(self._terms)
        for k, v in o._terms.items():
            out[k] = out.get(k, 0) + v
        return Scalar._from_terms(out)

    __radd__ = __add__

    def __neg__(self):
        return Scalar._from_terms({k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return Scalar()
            return Scalar._from_terms({k: v * other for k, v in self._terms.items()})
        if not isinstance(other, Scalar):
            return NotImplemented
        out: Dict[Key, Fraction] = {}
        for (z1, p1, r1), c1 in self._terms.items():
            for (z2, p2, r2), c2 in other._terms.items():
                c = c1 * c2
                z = z1 + z2
                if z >= 4:
                    z -= 4
                    c = -c
                g = math.gcd(r1, r2)
                c *= g
                key = (z, p1 + p2, (r1 // g) * (r2 // g))
                out[key] = out.get(key, 0) + c
        return Scalar._from_terms(out)

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        if not self._terms:
            raise ZeroDivisionError("inverse of zero scalar")
        if len(self._terms) != 1:
            # rational multiples of a common unit are handled by conjugation-free
            # reduction only in the monomial case
            raise ValueError(f"cannot invert non-monomial scalar {self}")
        (z, p, r), c = next(iter(self._terms.items()))
        # 1/(c z^k pi^p sqrt r) = sqrt(r)/(c r) * z^{-k} * pi^{-p}
        return Scalar.term(Fraction(1) / (c * r), zeta8=-z, pi=-p) * Scalar.sqrt(r)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / _frac(other))
        if isinstance(other, Scalar):
            return self * other.inverse()
        return NotImplemented

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        out = Scalar(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "Scalar":
        return sum((Scalar.term(c, zeta8=-z, pi=p) * Scalar.sqrt(r) for (z, p, r), c in self._terms.items()),
                   Scalar())

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self._terms == o._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def to_complex(self) -> complex:
        z8 = cmath.exp(1j * math.pi / 4)
        return sum(float(c) * z8 ** z * math.pi ** float(p) * math.sqrt(r) for (z, p, r), c in self._terms.items())

    # -- text ------------------------------------------------------------
    def _term_text(self, key: Key, c: Fraction) -> str:
        z, p, r = key
        factors = []
        if z:
            factors.append("z8" if z == 1 else f"z8^{z}")
        if p:
            factors.append("pi" if p == 1 else (f"pi^{p}" if p > 0 and p.denominator == 1 else f"pi^({p})"))
        if r != 1:
            factors.append(f"sqrt({r})")
        if not factors:
            return str(c)
        body = "*".join(factors)
        if c == 1:
            return body
        if c == -1:
            return "-" + body
        return f"{c}*{body}"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = [self._term_text(k, self._terms[k]) for k in sorted(self._terms)]
        return _join_signed(parts)

    def __repr__(self) -> str:
        return f"Scalar({str(self)!r})"

    def needs_parens(self) -> bool:
        return len(self._terms) > 1


def _join_signed(parts: Sequence[str]) -> str:
    out = parts[0]
    for s in parts[1:]:
        if s.startswith("-"):
            out += " - " + s[1:]
        else:
            out += " + " + s
    return out


I = Scalar.zeta8(2)
PI = Scalar.pi(1)
ONE = Scalar(1)
ZERO = Scalar(0)


def as_scalar(x) -> Scalar:
    if isinstance(x, Scalar):
        return x
    return Scalar(x)


# --------------------------------------------------------------------------
# LaurentPoly
# --------------------------------------------------------------------------

Exps = Tuple[Fraction, ...]


def _check_exps(exps: Exps, bounds: Sequence[int], variables: Sequence[str]) -> None:
    for e, b, v in zip(exps, bounds, variables):
        if b % e.denominator:
            raise DenominatorError(
                f"exponent {e} of {v} is finer than the declared bound 1/{b}")


class LaurentPoly:
    """Laurent polynomial in named variables with rational exponents.

    Each variable has a denominator bound b: exponents lie in (1/b)Z.
    Coefficients are Scalars.  Binary operations on polynomials with
    different bounds work in the ring with the lcm bounds.
    """

    __slots__ = ("variables", "bounds", "_terms", "_hash")

    def __init__(self, variables: Sequence[str], terms: Optional[Mapping[Sequence, object]] = None,
                 bounds: Optional[Sequence[int]] = None, _trusted: bool = False):
        self.variables = tuple(variables)
        n = len(self.variables)
        clean: Dict[Exps, Scalar] = {}
        if terms:
            if _trusted:
                clean = {k: v for k, v in terms.items() if v}
            else:
                for exps, c in terms.items():
                    ex = tuple(_frac(e) for e in exps)
                    if len(ex) != n:
                        raise ValueError("exponent vector length does not match variables")
                    c = as_scalar(c)
                    if c:
                        clean[ex] = clean.get(ex, ZERO) + c
                clean = {k: v for k, v in clean.items() if v}
        if bounds is None:
            bl = [1] * n
            for ex in clean:
                for i, e in enumerate(ex):
                    bl[i] = math.lcm(bl[i], e.denominator)
            self.bounds = tuple(bl)
        else:
            self.bounds = tuple(int(b) for b in bounds)
            if len(self.bounds) != n or any(b <= 0 for b in self.bounds):
                raise ValueError("bounds must be positive, one per variable")
            if not _trusted:
                for ex in clean:
                    _check_exps(ex, self.bounds, self.variables)
        self._terms = clean
        self._hash = None

    # -- constructors ----------------------------------------------------
    @classmethod
    def constant(cls, variables: Sequence[str], c=1, bounds=None) -> "LaurentPoly":
        n = len(variables)
        return cls(variables, {(Fraction(0),) * n: as_scalar(c)}, bounds)

    @classmethod
    def monomial(cls, variables: Sequence[str], exps: Sequence, c=1, bounds=None) -> "LaurentPoly":
        return cls(variables, {tuple(_frac(e) for e in exps): as_scalar(c)}, bounds)

    @classmethod
    def var(cls, variables: Sequence[str], name: str, power: Number = 1, bounds=None) -> "LaurentPoly":
        exps = [Fraction(0)] * len(variables)
        exps[list(variables).index(name)] = _frac(power)
        return cls.monomial(variables, exps, 1, bounds)

    def zero(self) -> "LaurentPoly":
        return LaurentPoly(self.variables, {}, self.bounds, _trusted=True)

    def one(self) -> "LaurentPoly":
        return LaurentPoly.constant(self.variables, 1, self.bounds)

    # -- inspection ------------------------------------------------------
    @property
    def terms(self) -> Dict[Exps, Scalar]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def is_constant(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and all(e == 0 for e in next(iter(self._terms))))

    def constant_term(self) -> Scalar:
        return self._terms.get((Fraction(0),) * len(self.variables), ZERO)

    def leading(self) -> Tuple[Exps, Scalar]:
        e = max(self._terms)
        return e, self._terms[e]

    def exponent_lattice_ok(self, denominators: Sequence[int]) -> bool:
        """True when every exponent of variable i lies in (1/denominators[i])Z."""
        return all(d % e.denominator == 0 for ex in self._terms for e, d in zip(ex, denominators))

    def has_integer_coefficients(self) -> bool:
        for c in self._terms.values():
            if not c.is_rational() or c.as_fraction().denominator != 1:
                return False
        return True

    # -- arithmetic ------------------------------------------------------
    def _align(self, other: "LaurentPoly") -> Tuple[int, ...]:
        if other.variables != self.variables:
            raise ValueError(f"variable mismatch: {self.variables} vs {other.variables}")
        return tuple(math.lcm(a, b) for a, b in zip(self.bounds, other.bounds))

    def _coerce(self, other) -> Optional["LaurentPoly"]:
        if isinstance(other, LaurentPoly):
            return other
        if isinstance(other, (int, Fraction, Scalar)):
            return LaurentPoly.constant(self.variables, other, self.bounds)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        b = self._align(o)
        out = dict(self._terms)
        for k, v in o._terms.items():
            out[k] = out[k] + v if k in out else v
        return LaurentPoly(self.variables, out, b, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly(self.variables, {k: -v for k, v in self._terms.items()}, self.bounds, _trusted=True)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            if not other:
                return self.zero()
            return LaurentPoly(self.variables, {k: v * other for k, v in self._terms.items()},
                               self.bounds, _trusted=True)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        b = self._align(other)
        out: Dict[Exps, Scalar] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                c = c1 * c2
                out[e] = out[e] + c if e in out else c
        return LaurentPoly(self.variables, out, b, _trusted=True)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        out = self.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def inverse(self) -> "LaurentPoly":
        if not self.is_monomial():
            raise DivisionError("only monomials are units in the Laurent ring")
        e, c = next(iter(self._terms.items()))
        return LaurentPoly(self.variables, {tuple(-x for x in e): c.inverse()}, self.bounds)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, Scalar)):
            return self * (as_scalar(other).inverse())
        if isinstance(other, LaurentPoly):
            return self.exact_divide(other)
        return NotImplemented

    def __eq__(self, other):
        o = self._coerce(other) if not isinstance(other, LaurentPoly) else other
        if o is None:
            return NotImplemented
        if o.variables != self.variables:
            if not self._terms and not o._terms:
                return True
            return False
        return self._terms == o._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.variables, frozenset(self._terms.items())))
        return self._hash

    # -- division --------------------------------------------------------
    def divmod_exact(self, divisor: "LaurentPoly") -> Tuple["LaurentPoly", "LaurentPoly"]:
        """Lex-order division by a single polynomial.

        Returns (quotient, remainder); the remainder is zero exactly when the
        division is exact in the Laurent ring.  Quotient exponents are
        confined to the box forced by the Newton polytopes.
        """
        if not divisor:
            raise ZeroDivisionError("division by zero polynomial")
        b = self._align(divisor)
        n = len(self.variables)
        if not self._terms:
            return self.zero(), self.zero()
        d_lead, d_lc = divisor.leading()
        d_inv = d_lc.inverse()
        lo = [min(e[i] for e in self._terms) - min(e[i] for e in divisor._terms) for i in range(n)]
        hi = [max(e[i] for e in self._terms) - max(e[i] for e in divisor._terms) for i in range(n)]
        rem = dict(self._terms)
        quot: Dict[Exps, Scalar] = {}
        dterms = list(divisor._terms.items())
        while rem:
            e = max(rem)
            qe = tuple(x - y for x, y in zip(e, d_lead))
            if any(qe[i] < lo[i] or qe[i] > hi[i] for i in range(n)):
                break
            c = rem[e] * d_inv
            quot[qe] = c
            for de, dc in dterms:
                k = tuple(x + y for x, y in zip(qe, de))
                v = rem.get(k, ZERO) - c * dc
                if v:
                    rem[k] = v
                else:
                    rem.pop(k, None)
        return (LaurentPoly(self.variables, quot, b, _trusted=True),
                LaurentPoly(self.variables, rem, b, _trusted=True))

    def exact_divide(self, divisor: "LaurentPoly") -> "LaurentPoly":
        q, r = self.divmod_exact(divisor)
        if r:
            raise DivisionError(f"{self} is not divisible by {divisor}")
        return q

    def divides(self, other: "LaurentPoly") -> bool:
        return not other.divmod_exact(self)[1]

    # -- substitution ----------------------------------------------------
    def with_bounds(self, bounds: Sequence[int]) -> "LaurentPoly":
        return LaurentPoly(self.variables, self._terms, bounds)

    def embed(self, variables: Sequence[str], bounds: Optional[Sequence[int]] = None) -> "LaurentPoly":
        """Re-express in a larger (or reordered) variable list."""
        variables = tuple(variables)
        idx = [variables.index(v) for v in self.variables]
        missing = [v for v in self.variables if v not in variables]
        if missing:
            raise ValueError(f"variables {missing} not in target list")
        out = {}
        for e, c in self._terms.items():
            ne = [Fraction(0)] * len(variables)
            for i, x in zip(idx, e):
                ne[i] = x
            out[tuple(ne)] = c
        if bounds is None:
            bl = [1] * len(variables)
            for i, b in zip(idx, self.bounds):
                bl[i] = b
            bounds = bl
        return LaurentPoly(variables, out, bounds)

    def substitute(self, mapping: Mapping[str, object], variables: Sequence[str],
                   bounds: Optional[Sequence[int]] = None) -> "LaurentPoly":
        """Substitute variables by polynomials in the target variables.

        A variable carrying fractional exponents may only be replaced by a
        monomial with coefficient 1 (or by the constant 1); other variables
        accept any Laurent polynomial.  Unmapped variables must appear in
        the target list.  Exponents finer than the target bounds raise
        DenominatorError.
        """
        variables = tuple(variables)
        images: List[Tuple[str, object]] = []
        for i, v in enumerate(self.variables):
            if v in mapping:
                img = mapping[v]
                if isinstance(img, (int, Fraction, Scalar)):
                    img = LaurentPoly.constant(variables, img)
                if img.variables != variables:
                    img = img.embed(variables)
                images.append(("poly", img))
            else:
                images.append(("poly", LaurentPoly.var(variables, v)))
        out: Dict[Exps, Scalar] = {}
        n = len(variables)
        for e, c in self._terms.items():
            acc_exps = [Fraction(0)] * n
            acc_poly = None
            coeff = c
            for (kind, img), x in zip(images, e):
                if x == 0:
                    continue
                if img.is_monomial():
                    ie, ic = next(iter(img._terms.items()))
                    if x.denominator != 1:
                        if ic != 1:
                            raise ValueError("fractional power of a monomial with nontrivial coefficient")
                    else:
                        coeff = coeff * ic ** int(x)
                    for j in range(n):
                        acc_exps[j] += ie[j] * x
                elif not img:
                    coeff = ZERO
                else:
                    if x.denominator != 1:
                        raise ValueError("fractional power of a non-monomial")
                    p = img ** int(x)
                    acc_poly = p if acc_poly is None else acc_poly * p
            if not coeff:
                continue
            mono = LaurentPoly(variables, {tuple(acc_exps): coeff}, _trusted=True)
            term = mono if acc_poly is None else mono * acc_poly
            for k, v in term._terms.items():
                out[k] = out[k] + v if k in out else v
        res = LaurentPoly(variables, out, _trusted=True)
        if bounds is not None:
            for ex in res._terms:
                _check_exps(ex, bounds, variables)
            res = LaurentPoly(variables, res._terms, bounds, _trusted=True)
        else:
            res = LaurentPoly(variables, res._terms)
        return res

    def invert_variable(self, name: str) -> "LaurentPoly":
        i = self.variables.index(name)
        out = {}
        for e, c in self._terms.items():
            ne = list(e)
            ne[i] = -ne[i]
            out[tuple(ne)] = c
        return LaurentPoly(self.variables, out, self.bounds, _trusted=True)

    def invert_all(self) -> "LaurentPoly":
        return LaurentPoly(self.variables, {tuple(-x for x in e): c for e, c in self._terms.items()},
                           self.bounds, _trusted=True)

    def at_one(self, names: Optional[Iterable[str]] = None) -> "LaurentPoly":
        """Set the given variables (default all) to 1, keeping the variable list."""
        names = set(self.variables if names is None else names)
        mask = [v in names for v in self.variables]
        out: Dict[Exps, Scalar] = {}
        for e, c in self._terms.items():
            ne = tuple(Fraction(0) if m else x for x, m in zip(e, mask))
            out[ne] = out[ne] + c if ne in out else c
        return LaurentPoly(self.variables, out, self.bounds, _trusted=True)

    def value_at_one(self) -> Scalar:
        return sum(self._terms.values(), ZERO)

    def drop_variables(self, names: Iterable[str]) -> "LaurentPoly":
        """Remove variables which do not occur (exponent zero everywhere)."""
        names = set(names)
        keep = [i for i, v in enumerate(self.variables) if v not in names]
        for e in self._terms:
            if any(e[i] != 0 for i, v in enumerate(self.variables) if v in names):
                raise ValueError("cannot drop a variable that occurs")
        return LaurentPoly([self.variables[i] for i in keep],
                           {tuple(e[i] for i in keep): c for e, c in self._terms.items()},
                           [self.bounds[i] for i in keep])

    def map_coefficients(self, f: Callable[[Scalar], Scalar]) -> "LaurentPoly":
        return LaurentPoly(self.variables, {e: f(c) for e, c in self._terms.items()}, self.bounds)

    def evaluate_angles(self, angles: Mapping[str, float]) -> complex:
        """Numeric value at t_j = exp(2 pi i a_j), with t^e read as exp(2 pi i a e)."""
        total = 0j
        a = [angles[v] for v in self.variables]
        for e, c in self._terms.items():
            phase = sum(float(x) * y for x, y in zip(e, a))
            total += c.to_complex() * cmath.exp(2j * math.pi * phase)
        return total

    # -- text ------------------------------------------------------------
    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for e, c in sorted(self._terms.items(), reverse=True):
            mono = []
            for v, x in zip(self.variables, e):
                if x == 0:
                    continue
                mono.append(v if x == 1 else f"{v}^({x})")
            m = "*".join(mono)
            if not m:
                parts.append(str(c))
            elif c == 1:
                parts.append(m)
            elif c == -1:
                parts.append("-" + m)
            elif c.needs_parens():
                parts.append(f"({c})*{m}")
            else:
                parts.append(f"{c}*{m}")
        return _join_signed(parts)

    def __repr__(self):
        return f"LaurentPoly({str(self)!r}, variables={self.variables}, bounds={self.bounds})"


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_RESERVED = {"z8", "pi", "sqrt", "i"}


class ParseError(ValueError):
    pass


def _const_fraction(node) -> Fraction:
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return Fraction(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _const_fraction(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Div, ast.Add, ast.Sub, ast.Mult)):
        a, b = _const_fraction(node.left), _const_fraction(node.right)
        if isinstance(node.op, ast.Div):
            return a / b
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        return a * b
    raise ParseError("exponent must be a rational constant")


def _collect_names(tree) -> List[str]:
    seen: List[str] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in _RESERVED and node.id not in seen:
            seen.append(node.id)
    return seen


def _to_ast(text: str):
    try:
        return ast.parse(text.replace("^", "**"), mode="eval").body
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {text!r}: {exc.msg}") from None


def _eval_node(node, variables: Tuple[str, ...]) -> LaurentPoly:
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, int):
            raise ParseError(f"unsupported constant {node.value!r}")
        return LaurentPoly.constant(variables, node.value)
    if isinstance(node, ast.Name):
        if node.id == "z8":
            return LaurentPoly.constant(variables, Scalar.zeta8(1))
        if node.id == "i":
            return LaurentPoly.constant(variables, I)
        if node.id == "pi":
            return LaurentPoly.constant(variables, PI)
        if node.id in variables:
            return LaurentPoly.var(variables, node.id)
        raise ParseError(f"unknown name {node.id!r}")
    if isinstance(node, ast.Call):
        if isinstance(node.func, ast.Name) and node.func.id == "sqrt" and len(node.args) == 1:
            return LaurentPoly.constant(variables, Scalar.sqrt(_const_fraction(node.args[0])))
        raise ParseError("only sqrt(rational) calls are allowed")
    if isinstance(node, ast.UnaryOp):
        v = _eval_node(node.operand, variables)
        if isinstance(node.op, ast.USub):
            return -v
        if isinstance(node.op, ast.UAdd):
            return v
        raise ParseError("unsupported unary operator")
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            e = _const_fraction(node.right)
            if isinstance(node.left, ast.Name) and node.left.id in variables:
                return LaurentPoly.var(variables, node.left.id, e)
            if isinstance(node.left, ast.Name) and node.left.id == "pi":
                return LaurentPoly.constant(variables, Scalar.pi(e))
            if isinstance(node.left, ast.Name) and node.left.id in ("z8", "i"):
                if e.denominator != 1:
                    raise ParseError(f"{node.left.id} needs an integer power")
                base = {"z8": Scalar.zeta8(1), "pi": PI, "i": I}[node.left.id]
                return LaurentPoly.constant(variables, base ** int(e))
            base = _eval_node(node.left, variables)
            if e.denominator != 1:
                if base.is_monomial() and next(iter(base._terms.values())) == 1:
                    (ex, _), = base._terms.items()
                    return LaurentPoly.monomial(variables, [x * e for x in ex])
                raise ParseError("fractional power of a composite expression")
            return base ** int(e)
        left = _eval_node(node.left, variables)
        right = _eval_node(node.right, variables)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if right.is_monomial():
                return left * right.inverse()
            raise ParseError("division by a non-monomial; use parse_fraction")
        raise ParseError("unsupported operator")
    raise ParseError(f"unsupported syntax {type(node).__name__}")


def parse_poly(text: str, variables: Optional[Sequence[str]] = None,
               bounds: Optional[Sequence[int]] = None) -> LaurentPoly:
    """Parse the canonical text form (and the obvious extensions of it)."""
    tree = _to_ast(text)
    if variables is None:
        variables = sorted(_collect_names(tree))
    p = _eval_node(tree, tuple(variables))
    if bounds is not None:
        p = p.with_bounds(bounds)
    return p


def parse_fraction(text: str, variables: Optional[Sequence[str]] = None) -> Tuple[LaurentPoly, LaurentPoly]:
    """Parse `num` or `num/den` where den may be any Laurent polynomial."""
    tree = _to_ast(text)
    if variables is None:
        variables = sorted(_collect_names(tree))
    variables = tuple(variables)
    if isinstance(tree, ast.BinOp) and isinstance(tree.op, ast.Div):
        den = _eval_node(tree.right, variables)
        if not den.is_monomial():
            return _eval_node(tree.left, variables), den
    return _eval_node(tree, variables), LaurentPoly.constant(variables, 1)


def parse_scalar(text: str) -> Scalar:
    p = parse_poly(text, ())
    return p.constant_term()


# --------------------------------------------------------------------------
# FormalSeries
# --------------------------------------------------------------------------

SERIES_VARIABLES = ("h", "Kinv")


def _zero_like(x):
    return x * 0


class FormalSeries:
    """Truncated power series sum_{k<=order} c_k x^k with x in {h, Kinv}."""

    __slots__ = ("variable", "order", "coeffs")

    def __init__(self, coeffs: Sequence, order: Optional[int] = None, variable: str = "h"):
        if variable not in SERIES_VARIABLES:
            raise ValueError(f"series variable must be one of {SERIES_VARIABLES}")
        coeffs = [as_scalar(c) if isinstance(c, (int, Fraction)) else c for c in coeffs]
        if not coeffs:
            raise ValueError("a series needs at least one coefficient (use zero)")
        if order is None:
            order = len(coeffs) - 1
        if order < 0:
            raise ValueError("negative truncation order")
        zero = _zero_like(coeffs[0])
        coeffs = list(coeffs[: order + 1]) + [zero] * (order + 1 - len(coeffs))
        self.variable = variable
        self.order = order
        self.coeffs = tuple(coeffs)

    # -- constructors ----------------------------------------------------
    @classmethod
    def constant(cls, c, order: int, variable: str = "h") -> "FormalSeries":
        c = as_scalar(c) if isinstance(c, (int, Fraction)) else c
        return cls([c], order, variable)

    def _zero(self):
        return _zero_like(self.coeffs[0])

    def _like(self, coeffs, order) -> "FormalSeries":
        return FormalSeries(coeffs, order, self.variable)

    # -- inspection ------------------------------------------------------
    def __getitem__(self, k: int):
        if k > self.order:
            raise IndexError(f"coefficient {k} beyond truncation order {self.order}")
        return self.coeffs[k]

    def valuation(self) -> int:
        for k, c in enumerate(self.coeffs):
            if c:
                return k
        return self.order + 1

    def truncate(self, order: int) -> "FormalSeries":
        if order > self.order:
            raise ValueError("cannot raise the truncation order")
        return self._like(self.coeffs[: order + 1], order)

    def __eq__(self, other):
        if not isinstance(other, FormalSeries):
            return NotImplemented
        return (self.variable == other.variable and self.order == other.order
                and all(a == b for a, b in zip(self.coeffs, other.coeffs)))

    def agrees_with(self, other: "FormalSeries", through: Optional[int] = None) -> bool:
        n = min(self.order, other.order) if through is None else through
        return all(self.coeffs[k] == other.coeffs[k] for k in range(n + 1))

    def __hash__(self):
        return hash((self.variable, self.order, self.coeffs))

    # -- arithmetic ------------------------------------------------------
    def _check(self, other: "FormalSeries"):
        if other.variable != self.variable:
            raise ValueError(f"series variable mismatch: {self.variable} vs {other.variable}")

    def __add__(self, other):
        if not isinstance(other, FormalSeries):
            other = FormalSeries.constant(other, self.order, self.variable)
        self._check(other)
        n = min(self.order, other.order)
        return self._like([self.coeffs[k] + other.coeffs[k] for k in range(n + 1)], n)

    __radd__ = __add__

    def __neg__(self):
        return self._like([-c for c in self.coeffs], self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, FormalSeries):
            return self._like([c * other for c in self.coeffs], self.order)
        self._check(other)
        va, vb = self.valuation(), other.valuation()
        n = min(self.order + vb, other.order + va)
        out = []
        for k in range(n + 1):
            acc = None
            for j in range(max(0, k - other.order), min(k, self.order) + 1):
                a = self.coeffs[j]
                if not a:
                    continue
                b = other.coeffs[k - j]
                if not b:
                    continue
                t = a * b
                acc = t if acc is None else acc + t
            out.append(self._zero() if acc is None else acc)
        return self._like(out, n)

    def __rmul__(self, other):
        return self._like([other * c for c in self.coeffs], self.order)

    def shift(self, k: int) -> "FormalSeries":
        """Multiply by x^k (k >= 0) or divide by x^{-k} when the low terms vanish."""
        if k >= 0:
            return self._like([self._zero()] * k + list(self.coeffs), self.order + k)
        k = -k
        if any(self.coeffs[j] for j in range(min(k, self.order + 1))):
            raise DivisionError("series is not divisible by the requested power")
        if k > self.order:
            raise ValueError("shift exhausts the known coefficients")
        return self._like(self.coeffs[k:], self.order - k)

    def inverse(self) -> "FormalSeries":
        a0 = self.coeffs[0]
        if not a0:
            raise ZeroDivisionError("series with zero constant term is not invertible")
        inv0 = a0.inverse()
        out = [inv0]
        for n in range(1, self.order + 1):
            acc = None
            for k in range(1, n + 1):
                if self.coeffs[k]:
                    t = self.coeffs[k] * out[n - k]
                    acc = t if acc is None else acc + t
            out.append(self._zero() if acc is None else -(acc * inv0))
        return self._like(out, self.order)

    def __truediv__(self, other):
        if not isinstance(other, FormalSeries):
            return self * as_scalar(other).inverse() if isinstance(other, (int, Fraction)) else self * other.inverse()
        self._check(other)
        v = other.valuation()
        if v > other.order:
            raise ZeroDivisionError("division by a series with no known nonzero coefficient")
        num = self.shift(-v) if v else self
        den = other.shift(-v) if v else other
        n = min(num.order, den.order)
        return num.truncate(n) * den.truncate(n).inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result = self._like([self._one_like()], self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def _one_like(self):
        c = self.coeffs[0]
        if isinstance(c, LaurentPoly):
            return c.one()
        return ONE

    def compose(self, inner: "FormalSeries") -> "FormalSeries":
        """self(inner), with inner of valuation >= 1; result in inner's variable."""
        if inner.valuation() < 1:
            raise ValueError("composition requires an inner series of valuation >= 1")
        n = min(self.order, inner.order)
        inner = inner.truncate(n)
        result = FormalSeries([self.coeffs[n] * 1], n, inner.variable)
        # Horner with coefficients promoted to a series
        for k in range(n - 1, -1, -1):
            result = result * inner + FormalSeries.constant(self.coeffs[k], n, inner.variable)
            result = result.truncate(n) if result.order > n else result
        return result

    def exp(self) -> "FormalSeries":
        if self.valuation() < 1:
            raise ValueError("exp requires valuation >= 1")
        n = self.order
        ex = FormalSeries([Scalar(Fraction(1, math.factorial(k))) for k in range(n + 1)], n, self.variable)
        return ex.compose(self)

    def log1p(self) -> "FormalSeries":
        """log(1 + self) for self of valuation >= 1."""
        if self.valuation() < 1:
            raise ValueError("log requires valuation >= 1")
        n = self.order
        lg = FormalSeries([Scalar(0)] + [Scalar(Fraction((-1) ** (k + 1), k)) for k in range(1, n + 1)], n,
                          self.variable)
        return lg.compose(self)

    def power(self, e: Number) -> "FormalSeries":
        """self**e for rational e when the constant term is 1."""
        if self.coeffs[0] != self._one_like():
            raise ValueError("rational powers need constant term 1")
        return binomial_series(e, self.order, self.variable).compose(self - self._one_like())

    def map(self, f: Callable) -> "FormalSeries":
        return self._like([f(c) for c in self.coeffs], self.order)

    def evaluate(self, x: complex) -> complex:
        total = 0j
        for k, c in enumerate(self.coeffs):
            total += c.to_complex() * x ** k
        return total

    def __str__(self) -> str:
        parts = []
        for k, c in enumerate(self.coeffs):
            if not c:
                continue
            cs = str(c)
            if k == 0:
                parts.append(cs if not _needs_paren_text(c) else f"({cs})")
                continue
            mono = self.variable if k == 1 else f"{self.variable}^{k}"
            if cs == "1":
                parts.append(mono)
            elif cs == "-1":
                parts.append("-" + mono)
            elif _needs_paren_text(c):
                parts.append(f"({cs})*{mono}")
            else:
                parts.append(f"{cs}*{mono}")
        body = _join_signed(parts) if parts else "0"
        return f"{body} + O({self.variable}^{self.order + 1})"

    def __repr__(self):
        return f"FormalSeries({str(self)!r})"


def parse_series(text: str, coefficient_variables: Sequence[str] = ()) -> FormalSeries:
    """Parse the rendering of a FormalSeries back (`... + O(h^4)`)."""
    m = re.fullmatch(r"\s*(.*?)\s*\+\s*O\(\s*(h|Kinv)\s*(?:\^\s*(\d+))?\s*\)\s*", text, re.S)
    if not m:
        raise ParseError(f"not a truncated series: {text!r}")
    body, var, top = m.group(1), m.group(2), int(m.group(3) or 1)
    if top < 1:
        raise ParseError("truncation order must be positive")
    cvars = tuple(coefficient_variables)
    full = parse_poly(body, cvars + (var,))
    buckets: Dict[int, Dict] = {}
    for e, c in full.terms.items():
        k = e[-1]
        if k.denominator != 1 or not 0 <= k < top:
            raise ParseError(f"series exponent {k} outside 0..{top - 1}")
        buckets.setdefault(int(k), {})[e[:-1]] = c
    if cvars:
        coeffs = [LaurentPoly(cvars, buckets.get(k, {})) for k in range(top)]
    else:
        coeffs = [buckets.get(k, {}).get((), ZERO) for k in range(top)]
    return FormalSeries(coeffs, top - 1, var)


def _needs_paren_text(c) -> bool:
    if isinstance(c, Scalar):
        return c.needs_parens()
    if isinstance(c, LaurentPoly):
        return len(c) > 1
    return False


# --------------------------------------------------------------------------
# Named series and quantum numbers
# --------------------------------------------------------------------------

def binomial_series(exponent: Number, order: int, variable: str = "h") -> FormalSeries:
    """(1 + x)^exponent = sum_k C(exponent, k) x^k."""
    e = _frac(exponent)
    coeffs = []
    c = Fraction(1)
    for k in range(order + 1):
        coeffs.append(Scalar(c))
        c = c * (e - k) / (k + 1)
    return FormalSeries(coeffs, order, variable)


def kinv_from_h(order: int) -> FormalSeries:
    """K^{-1} = log(1+h)/(2 pi i) as a series in h."""
    # 1/(2 pi i) = -i/(2 pi)
    unit = Scalar.term(Fraction(-1, 2), zeta8=2, pi=-1)
    coeffs = [Scalar(0)] + [unit * Fraction((-1) ** (k + 1), k) for k in range(1, order + 1)]
    return FormalSeries(coeffs, order, "h")


def h_from_kinv(order: int) -> FormalSeries:
    """h = exp(2 pi i K^{-1}) - 1 as a series in K^{-1}."""
    coeffs = [Scalar(0)]
    for k in range(1, order + 1):
        coeffs.append(Scalar.term(Fraction(2 ** k, math.factorial(k)), zeta8=2 * k, pi=k))
    return FormalSeries(coeffs, order, "Kinv")


def kinv_series_to_h(series: FormalSeries) -> FormalSeries:
    """Rewrite a series in K^{-1} as a series in h."""
    if series.variable == "h":
        return series
    return series.compose(kinv_from_h(series.order))


def h_series_to_kinv(series: FormalSeries) -> FormalSeries:
    if series.variable == "Kinv":
        return series
    return series.compose(h_from_kinv(series.order))


Q_VARIABLES = ("q",)


def quantum_number(n: int) -> LaurentPoly:
    """[n] = (q^{n/2} - q^{-n/2}) / (q^{1/2} - q^{-1/2}) in Z[q^{1/2}, q^{-1/2}]."""
    if n < 0:
        raise ValueError("quantum_number needs n >= 0")
    half = Fraction(n, 2)
    num = LaurentPoly.var(Q_VARIABLES, "q", half, (2,)) - LaurentPoly.var(Q_VARIABLES, "q", -half, (2,))
    den = LaurentPoly(Q_VARIABLES, {(Fraction(1, 2),): 1, (Fraction(-1, 2),): -1}, (2,))
    return num.exact_divide(den)


def q_poly_to_h(poly: LaurentPoly, order: int) -> FormalSeries:
    """Expand a Laurent polynomial in q at q = 1 + h."""
    if poly.variables != Q_VARIABLES:
        raise ValueError("expected a polynomial in q")
    total = FormalSeries.constant(ZERO, order)
    for (e,), c in poly.items():
        total = total + binomial_series(e, order) * c
    return total
