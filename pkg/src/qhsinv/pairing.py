"""Linking pairings on finite abelian groups, the Wall generators, and the
stabilization of a pairing by lens-space pairings to a diagonal one.

Pairing values are rationals mod 1.  Internally every prime-primary block
stores its Gram matrix as integers mod the block exponent, which keeps the
isomorphism search in integer arithmetic.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from sympy import Matrix, factorint
from sympy.matrices.normalforms import smith_normal_decomp

DEFAULT_BOUND = 4096


class PairingError(ValueError):
    pass


class BoundExceeded(PairingError):
    pass


def _mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def _prime_power(n: int) -> Tuple[int, int]:
    f = factorint(n)
    if len(f) != 1:
        raise PairingError(f"{n} is not a prime power > 1")
    (p, k), = f.items()
    return p, k


def smallest_nonresidue(p: int) -> int:
    """d_p: the smallest positive quadratic non-residue mod an odd prime p."""
    if p < 3 or len(factorint(p)) != 1 or factorint(p)[p] != 1:
        raise PairingError(f"{p} is not an odd prime")
    squares = {x * x % p for x in range(1, p)}
    return next(d for d in range(2, p) if d not in squares)


@dataclass(frozen=True)
class FiniteAbelianGroup:
    """Direct sum of cyclic groups of prime-power orders."""

    cyclic_orders: Tuple[int, ...]

    def __post_init__(self):
        orders = tuple(int(o) for o in self.cyclic_orders)
        for o in orders:
            _prime_power(o)
        object.__setattr__(self, "cyclic_orders", orders)

    @property
    def order(self) -> int:
        return math.prod(self.cyclic_orders)

    @property
    def rank(self) -> int:
        return len(self.cyclic_orders)

    def primes(self) -> List[int]:
        return sorted({_prime_power(o)[0] for o in self.cyclic_orders})

    def elements(self) -> Iterator[Tuple[int, ...]]:
        return itertools.product(*(range(o) for o in self.cyclic_orders))

    def element_order(self, x: Sequence[int]) -> int:
        out = 1
        for xi, o in zip(x, self.cyclic_orders):
            out = math.lcm(out, o // math.gcd(xi, o))
        return out

    def invariant_signature(self) -> Tuple[int, ...]:
        return tuple(sorted(self.cyclic_orders))


@dataclass(frozen=True)
class LinkingPairing:
    """Symmetric bilinear form G x G -> Q/Z given on the cyclic generators."""

    group: FiniteAbelianGroup
    gram: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self):
        n = self.group.rank
        gram = tuple(tuple(_mod1(Fraction(x)) for x in row) for row in self.gram)
        if len(gram) != n or any(len(r) != n for r in gram):
            raise PairingError(f"gram matrix must be {n}x{n}")
        orders = self.group.cyclic_orders
        for i in range(n):
            for j in range(n):
                if gram[i][j] != gram[j][i]:
                    raise PairingError("gram matrix is not symmetric")
                if (gram[i][j] * math.gcd(orders[i], orders[j])).denominator != 1:
                    raise PairingError(f"gram entry ({i},{j}) is not well defined on the cyclic factors")
        object.__setattr__(self, "gram", gram)

    def value(self, x: Sequence[int], y: Sequence[int]) -> Fraction:
        total = Fraction(0)
        for i, xi in enumerate(x):
            if not xi:
                continue
            for j, yj in enumerate(y):
                if yj:
                    total += self.gram[i][j] * xi * yj
        return _mod1(total)

    def is_nonsingular(self, bound: int = DEFAULT_BOUND) -> bool:
        """x -> b(x, .) is injective; checked against the generators."""
        if self.group.order > bound:
            raise BoundExceeded(f"|G| = {self.group.order} exceeds the bound {bound}")
        n = self.group.rank
        units = [tuple(int(i == j) for j in range(n)) for i in range(n)]
        for x in self.group.elements():
            if any(x) and all(self.value(x, e) == 0 for e in units):
                return False
        return True

    def direct_sum(self, other: "LinkingPairing") -> "LinkingPairing":
        n, m = self.group.rank, other.group.rank
        gram = [[Fraction(0)] * (n + m) for _ in range(n + m)]
        for i in range(n):
            for j in range(n):
                gram[i][j] = self.gram[i][j]
        for i in range(m):
            for j in range(m):
                gram[n + i][n + j] = other.gram[i][j]
        return LinkingPairing(FiniteAbelianGroup(self.group.cyclic_orders + other.group.cyclic_orders),
                              tuple(tuple(r) for r in gram))

    def __add__(self, other: "LinkingPairing") -> "LinkingPairing":
        return self.direct_sum(other)

    def primary_part(self, p: int) -> "LinkingPairing":
        idx = [i for i, o in enumerate(self.group.cyclic_orders) if o % p == 0]
        return LinkingPairing(FiniteAbelianGroup(tuple(self.group.cyclic_orders[i] for i in idx)),
                              tuple(tuple(self.gram[i][j] for j in idx) for i in idx))

    def __str__(self) -> str:
        rows = "; ".join(" ".join(str(x) for x in r) for r in self.gram)
        return f"pairing on Z/{' + Z/'.join(map(str, self.group.cyclic_orders)) or '1'} [{rows}]"


def trivial_pairing() -> LinkingPairing:
    return LinkingPairing(FiniteAbelianGroup(()), ())


def _sum_all(pairings: Sequence[LinkingPairing]) -> LinkingPairing:
    out = trivial_pairing()
    for x in pairings:
        out = out + x
    return out


# -- constructions ----------------------------------------------------------

def iota(A: Sequence[Sequence[int]]) -> LinkingPairing:
    """The pairing v^T A^-1 v' on Z^n / A Z^n, in primary decomposition."""
    M = Matrix(A)
    if M.rows != M.cols:
        raise PairingError("iota needs a square matrix")
    if M != M.T:
        raise PairingError("iota needs a symmetric matrix")
    if any(not x.is_integer for x in M):
        raise PairingError("iota needs an integer matrix")
    if M.rows == 0:
        return trivial_pairing()
    if M.det() == 0:
        raise PairingError("iota needs a nonsingular matrix")
    S, U, _ = smith_normal_decomp(M)
    Uinv = U.inv()
    Ainv = M.inv()
    gens: List[Matrix] = []
    orders: List[int] = []
    for i in range(M.rows):
        d = abs(int(S[i, i]))
        if d == 1:
            continue
        col = Uinv[:, i]
        for p, k in sorted(factorint(d).items()):
            gens.append(col * (d // p ** k))
            orders.append(p ** k)
    n = len(gens)
    gram = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            v = (gens[i].T * Ainv * gens[j])[0, 0]
            gram[i][j] = _mod1(Fraction(int(v.p), int(v.q)))
    return LinkingPairing(FiniteAbelianGroup(tuple(orders)), tuple(tuple(r) for r in gram))


def lens_pairing(a: int, b: int) -> LinkingPairing:
    """[b/a] on Z/a, split into primary parts."""
    if a < 1:
        raise PairingError("lens_pairing needs a >= 1")
    if math.gcd(a, b) != 1:
        raise PairingError(f"a={a} and b={b} are not coprime")
    if a == 1:
        return trivial_pairing()
    orders, diag = [], []
    for p, k in sorted(factorint(a).items()):
        c = a // p ** k
        orders.append(p ** k)
        diag.append(_mod1(Fraction(b * c * c, a)))
    n = len(orders)
    gram = tuple(tuple(diag[i] if i == j else Fraction(0) for j in range(n)) for i in range(n))
    return LinkingPairing(FiniteAbelianGroup(tuple(orders)), gram)


def diagonal_iota(entries: Sequence[int]) -> LinkingPairing:
    return iota([[x if i == j else 0 for j in range(len(entries))] for i, x in enumerate(entries)])


# -- isomorphism test -------------------------------------------------------

class _Block:
    """One primary block with integer Gram matrix mod the exponent."""

    def __init__(self, pairing: LinkingPairing):
        self.orders = pairing.group.cyclic_orders
        self.exp = max(self.orders, default=1)
        self.gram = [[int(x * self.exp) % self.exp for x in row] for row in pairing.gram]
        self.n = len(self.orders)

    def value(self, x, y) -> int:
        total = 0
        for i in range(self.n):
            if x[i]:
                row = self.gram[i]
                for j in range(self.n):
                    if y[j]:
                        total += x[i] * y[j] * row[j]
        return total % self.exp


def _block_isomorphic(b1: _Block, b2: _Block) -> bool:
    if sorted(b1.orders) != sorted(b2.orders):
        return False
    if not b1.n:
        return True
    # generator images need order dividing the source order and matching self-pairing
    elements = list(itertools.product(*(range(o) for o in b2.orders)))
    orders2 = b2.orders

    def order_of(x):
        out = 1
        for xi, o in zip(x, orders2):
            out = math.lcm(out, o // math.gcd(xi, o))
        return out

    element_orders = [order_of(x) for x in elements]
    self_values = [b2.value(x, x) for x in elements]
    # process generators of largest order first
    perm = sorted(range(b1.n), key=lambda i: -b1.orders[i])
    candidates = []
    for i in perm:
        want = b1.gram[i][i]
        o = b1.orders[i]
        candidates.append([x for x, eo, sv in zip(elements, element_orders, self_values)
                           if eo == o and sv == want])
    images: List[Tuple[int, ...]] = []

    def search(depth: int) -> bool:
        if depth == len(perm):
            return True
        gi = perm[depth]
        for x in candidates[depth]:
            if all(b2.value(x, images[d]) == b1.gram[gi][perm[d]] for d in range(depth)):
                images.append(x)
                if search(depth + 1):
                    return True
                images.pop()
        return False

    return search(0)


def pairing_equal(p1: LinkingPairing, p2: LinkingPairing, bound: int = DEFAULT_BOUND) -> bool:
    """True iff a group isomorphism carries p1 to p2 (brute force per primary block).

    Images of generators keep their exact order; injectivity then follows
    from non-singularity of p1, so no separate basis check is needed.
    """
    for p in (p1, p2):
        if p.group.order > bound:
            raise BoundExceeded(f"|G| = {p.group.order} exceeds the bound {bound}")
    if p1.group.invariant_signature() != p2.group.invariant_signature():
        return False
    for prime in p1.group.primes():
        if not _block_isomorphic(_Block(p1.primary_part(prime)), _Block(p2.primary_part(prime))):
            return False
    return True


# -- Wall generators --------------------------------------------------------

@dataclass(frozen=True, order=True)
class Generator:
    """[b/a] (kind "lens", a a prime power) or E0^k / E1^k (kind "E0"/"E1", a = 2^k)."""

    kind: str
    a: int
    b: int = 1

    def __post_init__(self):
        if self.kind == "lens":
            p, k = _prime_power(self.a)
            b = self.b % self.a
            if p == 2:
                if k == 1:
                    b = 1
                elif b > self.a // 2:
                    b -= self.a
                allowed = {1} if k == 1 else ({1, -1} if k == 2 else {1, -1, 3, -3})
                if b not in allowed:
                    raise PairingError(f"[{self.b}/{self.a}] is not a Wall generator")
            else:
                d = smallest_nonresidue(p)
                residue = pow(b, (p - 1) // 2, p) == 1
                b = 1 if residue else d
                if b != self.b % self.a and self.b % self.a not in (1, d):
                    raise PairingError(f"[{self.b}/{self.a}] is not a Wall generator (use 1 or {d})")
            object.__setattr__(self, "b", b)
        elif self.kind in ("E0", "E1"):
            p, k = _prime_power(self.a)
            if p != 2 or (self.kind == "E1" and k < 2):
                raise PairingError(f"{self.kind}^{k} is not a Wall generator")
            object.__setattr__(self, "b", 1)
        else:
            raise PairingError(f"unknown generator kind {self.kind}")

    @property
    def k(self) -> int:
        return _prime_power(self.a)[1]

    @property
    def prime(self) -> int:
        return _prime_power(self.a)[0]

    def pairing(self) -> LinkingPairing:
        if self.kind == "lens":
            return lens_pairing(self.a, self.b)
        e = Fraction(1, self.a)
        diag = Fraction(0) if self.kind == "E0" else 2 * e
        return LinkingPairing(FiniteAbelianGroup((self.a, self.a)), ((diag, e), (e, diag)))

    def __str__(self) -> str:
        if self.kind == "lens":
            return f"[{self.b}/{self.a}]"
        return f"{self.kind}^{self.k}"


def lens_generator(a: int, b: int) -> Generator:
    return Generator("lens", a, b)


@dataclass(frozen=True)
class GeneratorSum:
    generators: Tuple[Generator, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(sorted(self.generators, key=_sort_key)))

    def pairing(self) -> LinkingPairing:
        return _sum_all([g.pairing() for g in self.generators])

    @property
    def order(self) -> int:
        return math.prod(g.a ** (1 if g.kind == "lens" else 2) for g in self.generators)

    def __add__(self, other: "GeneratorSum") -> "GeneratorSum":
        return GeneratorSum(self.generators + other.generators)

    def __str__(self) -> str:
        if not self.generators:
            return "0"
        parts = []
        for g, group in itertools.groupby(self.generators):
            n = len(list(group))
            parts.append(f"{n}{g}" if n > 1 else str(g))
        return " + ".join(parts)

    @classmethod
    def parse(cls, text: str) -> "GeneratorSum":
        text = text.strip()
        if text in ("", "0"):
            return cls(())
        gens: List[Generator] = []
        for raw in re.split(r"\s*(?:\+|,|⊕)\s*", text):
            m = re.fullmatch(r"(\d+)?\s*\*?\s*(?:\[\s*(-?\d+)\s*/\s*(\d+)\s*\]|E([01])\s*\^\s*(\d+))", raw)
            if not m:
                raise PairingError(f"cannot parse generator {raw!r}")
            mult = int(m.group(1) or 1)
            if m.group(2) is not None:
                g = Generator("lens", int(m.group(3)), int(m.group(2)))
            else:
                g = Generator(f"E{m.group(4)}", 2 ** int(m.group(5)))
            gens.extend([g] * mult)
        return cls(tuple(gens))


def _sort_key(g: Generator):
    return (g.prime, g.k, {"lens": 0, "E0": 1, "E1": 2}[g.kind], g.b)


# -- stabilization by lens pairings -----------------------------------------

@dataclass(frozen=True)
class Diagonalization:
    lens: Tuple[Tuple[int, int], ...]  # (b, a) for [b/a]
    diagonal: Tuple[int, ...]

    def lens_pairings(self) -> LinkingPairing:
        return _sum_all([lens_pairing(a, b) for b, a in self.lens])

    def __str__(self) -> str:
        lens = ", ".join(f"[{b}/{a}]" for b, a in self.lens) or "none"
        return f"lens: {lens}; diag: [{','.join(map(str, self.diagonal))}]"


def _diagonalize_one(g: Generator) -> Tuple[List[Tuple[int, int]], List[int]]:
    a = g.a
    # E0^k + [3/2^k] = 3[1/2^k] only holds for k = 1; for k >= 2 the two
    # E-relations hold with the roles of E0 and E1 exchanged.
    if g.kind == "E0" and g.k == 1:
        return [(3, a)], [a, a, a]
    if g.kind == "E0":
        return [(-1, a)], [a, -a, -a]
    if g.kind == "E1":
        return [(3, a)], [a, a, a]
    if g.prime != 2:
        if g.b == 1:
            return [], [a]
        return [(g.b, a)], [a, a]
    if g.b in (1, -1):
        return [], [g.b * a]
    sign = 1 if g.b > 0 else -1
    return [(g.b, a)], [-sign * a, -sign * a]


def diagonalize_with_lens(g: GeneratorSum) -> Diagonalization:
    """Lens pairings [b_i/a_i] and integers n with g + sum [b_i/a_i] = iota(diag(n))."""
    lens: List[Tuple[int, int]] = []
    diag: List[int] = []
    for gen in g.generators:
        l, d = _diagonalize_one(gen)
        lens.extend(l)
        diag.extend(d)
    return Diagonalization(tuple(lens), tuple(diag))


def verify_diagonalization(g: GeneratorSum, d: Diagonalization, bound: int = DEFAULT_BOUND) -> bool:
    if any(g.order % a for _, a in d.lens):
        return False
    return pairing_equal(g.pairing() + d.lens_pairings(), diagonal_iota(d.diagonal), bound)


# -- decomposition ----------------------------------------------------------

def _lens_choices(p: int, k: int) -> List[int]:
    if p != 2:
        return [1, smallest_nonresidue(p)]
    return [1] if k == 1 else ([1, -1] if k == 2 else [1, -1, 3, -3])


def _candidates_for_level(p: int, k: int, r: int) -> List[List[Generator]]:
    """Generator lists filling r cyclic factors of order p^k."""
    a = p ** k
    out = []
    e_kinds = [] if p != 2 else (["E0"] if k == 1 else ["E0", "E1"])
    for n_e in range(r // 2 + 1):
        for es in itertools.combinations_with_replacement(e_kinds, n_e):
            rest = r - 2 * n_e
            for bs in itertools.combinations_with_replacement(_lens_choices(p, k), rest):
                out.append([Generator(kind, a) for kind in es] + [Generator("lens", a, b) for b in bs])
        if not e_kinds:
            break
    return out


def decompose(pairing: LinkingPairing, bound: int = DEFAULT_BOUND) -> GeneratorSum:
    """Write a pairing as a sum of Wall generators by exhaustive matching per primary block."""
    if pairing.group.order > bound:
        raise BoundExceeded(f"|G| = {pairing.group.order} exceeds the bound {bound}")
    gens: List[Generator] = []
    for p in pairing.group.primes():
        part = pairing.primary_part(p)
        levels: Dict[int, int] = {}
        for o in part.group.cyclic_orders:
            k = _prime_power(o)[1]
            levels[k] = levels.get(k, 0) + 1
        ks = sorted(levels)
        target = _Block(part)
        found = None
        for combo in itertools.product(*(_candidates_for_level(p, k, levels[k]) for k in ks)):
            flat = [g for level in combo for g in level]
            cand = _sum_all([g.pairing() for g in flat])
            if _block_isomorphic(_Block(cand), target):
                found = flat
                break
        if found is None:
            raise PairingError(f"no generator sum matches the {p}-primary part")
        gens.extend(found)
    return GeneratorSum(tuple(gens))
