"""Linking data of links and framed surgery links, and how surgery transforms it.

Component order in a presentation is: link components, companion
components, surgery components.  The surgery block's diagonal holds the
integer framings.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

Matrix = List[List[Fraction]]


class NotQHSError(ValueError):
    """The surgery block is singular, so the result is not a rational homology sphere."""


def _fr(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    raise TypeError(f"expected a rational, got {x!r}")


def mat_inverse(m: Matrix) -> Matrix:
    n = len(m)
    a = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            raise NotQHSError("not a rational homology sphere: surgery block is singular")
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def mat_det(m: Matrix) -> Fraction:
    n = len(m)
    a = [list(row) for row in m]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            if a[r][col]:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return det


def congruence_diagonal(m: Matrix) -> List[Fraction]:
    """Diagonal entries of a symmetric matrix after rational congruence."""
    a = [list(row) for row in m]
    n = len(a)
    out = []
    for i in range(n):
        if not a[i][i]:
            j = next((j for j in range(i + 1, n) if a[j][j]), None)
            if j is not None:
                a[i], a[j] = a[j], a[i]
                for row in a:
                    row[i], row[j] = row[j], row[i]
            else:
                j = next((j for j in range(i + 1, n) if a[i][j]), None)
                if j is None:
                    out.append(Fraction(0))
                    continue
                # row_i += row_j, col_i += col_j makes the pivot 2 a_ij
                a[i] = [x + y for x, y in zip(a[i], a[j])]
                for row in a:
                    row[i] += row[j]
        piv = a[i][i]
        out.append(piv)
        for r in range(i + 1, n):
            if a[r][i]:
                f = a[r][i] / piv
                a[r] = [x - f * y for x, y in zip(a[r], a[i])]
        # the trailing block is already symmetric; clear row and column i
        for r in range(i + 1, n):
            a[i][r] = Fraction(0)
            a[r][i] = Fraction(0)
    return out


def signature_of(m: Matrix) -> int:
    d = congruence_diagonal(m)
    return sum(1 for x in d if x > 0) - sum(1 for x in d if x < 0)


@dataclass(frozen=True)
class LinkPresentation:
    """A link, companion components and a framed surgery link, all in S^3."""

    L: int
    Lp: int
    Ls: int
    lk: Tuple[Tuple[Fraction, ...], ...]
    colors: Tuple[int, ...] = ()
    orientations: Tuple[int, ...] = ()
    casson_walker: Optional[Fraction] = None

    def __post_init__(self):
        n = self.L + self.Lp + self.Ls
        if min(self.L, self.Lp, self.Ls) < 0:
            raise ValueError("component counts must be nonnegative")
        lk = tuple(tuple(_fr(x) for x in row) for row in self.lk)
        if len(lk) != n or any(len(r) != n for r in lk):
            raise ValueError(f"linking matrix must be {n}x{n}")
        for i in range(n):
            for j in range(i):
                if lk[i][j] != lk[j][i]:
                    raise ValueError(f"linking matrix is not symmetric at ({i},{j})")
        for j in range(self.L + self.Lp, n):
            if lk[j][j].denominator != 1:
                raise ValueError("surgery framings must be integers")
        object.__setattr__(self, "lk", lk)
        colors = tuple(int(c) for c in self.colors) if self.colors else (1,) * self.Lp
        if len(colors) != self.Lp:
            raise ValueError("one color per companion component is required")
        object.__setattr__(self, "colors", colors)
        orient = tuple(int(o) for o in self.orientations) if self.orientations else (1,) * n
        if len(orient) != n or any(o not in (1, -1) for o in orient):
            raise ValueError("orientations must be +1 or -1, one per component")
        object.__setattr__(self, "orientations", orient)
        if self.casson_walker is not None:
            object.__setattr__(self, "casson_walker", _fr(self.casson_walker))

    # -- index helpers ---------------------------------------------------
    @property
    def n_components(self) -> int:
        return self.L + self.Lp + self.Ls

    @property
    def link_indices(self) -> range:
        return range(self.L)

    @property
    def companion_indices(self) -> range:
        return range(self.L, self.L + self.Lp)

    @property
    def surgery_indices(self) -> range:
        return range(self.L + self.Lp, self.n_components)

    def surgery_block(self) -> Matrix:
        s = self.surgery_indices
        return [[self.lk[i][j] for j in s] for i in s]

    def framings(self) -> List[int]:
        return [int(self.lk[j][j]) for j in self.surgery_indices]

    def is_algebraically_split(self) -> bool:
        s = list(self.surgery_indices)
        return all(not self.lk[i][j] for i in s for j in s if i != j)

    # -- transformations -------------------------------------------------
    def reversed(self, component: int) -> "LinkPresentation":
        """Reverse the orientation of one component (flips its linking row)."""
        n = self.n_components
        lk = [list(r) for r in self.lk]
        for k in range(n):
            if k != component:
                lk[component][k] = -lk[component][k]
                lk[k][component] = -lk[k][component]
        orient = list(self.orientations)
        orient[component] = -orient[component]
        return LinkPresentation(self.L, self.Lp, self.Ls, lk, self.colors, orient, self.casson_walker)

    def without_companion(self, index: int) -> "LinkPresentation":
        """Drop companion component number `index` (0-based among companions)."""
        drop = self.L + index
        keep = [i for i in range(self.n_components) if i != drop]
        lk = [[self.lk[i][j] for j in keep] for i in keep]
        colors = [c for k, c in enumerate(self.colors) if k != index]
        orient = [self.orientations[i] for i in keep]
        return LinkPresentation(self.L, self.Lp - 1, self.Ls, lk, colors, orient, self.casson_walker)

    def with_colors(self, colors: Sequence[int]) -> "LinkPresentation":
        return LinkPresentation(self.L, self.Lp, self.Ls, self.lk, colors, self.orientations, self.casson_walker)

    # -- serialization ---------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "LinkPresentation":
        try:
            cw = d.get("casson_walker")
            return cls(int(d["L"]), int(d.get("Lp", 0)), int(d["Ls"]),
                       tuple(tuple(Fraction(str(x)) for x in row) for row in d["lk"]),
                       tuple(d.get("colors", ())), tuple(d.get("orientations", ())),
                       None if cw is None else Fraction(str(cw)))
        except KeyError as exc:
            raise ValueError(f"link descriptor is missing field {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        d = {"L": self.L, "Lp": self.Lp, "Ls": self.Ls,
             "lk": [[str(x) for x in row] for row in self.lk],
             "colors": list(self.colors), "orientations": list(self.orientations)}
        if self.casson_walker is not None:
            d["casson_walker"] = str(self.casson_walker)
        return d

    @classmethod
    def from_json(cls, text: str) -> "LinkPresentation":
        return cls.from_dict(json.loads(text))


def block_sum(a: LinkPresentation, b: LinkPresentation) -> LinkPresentation:
    """Disjoint union of two presentations (the connected sum of the manifolds)."""
    def order(p: LinkPresentation, off_l: int, off_p: int, off_s: int, total: int):
        idx = ([off_l + i for i in range(p.L)] + [off_p + i for i in range(p.Lp)]
               + [off_s + i for i in range(p.Ls)])
        return idx
    L, Lp, Ls = a.L + b.L, a.Lp + b.Lp, a.Ls + b.Ls
    n = L + Lp + Ls
    ia = order(a, 0, L, L + Lp, n)
    ib = order(b, a.L, L + a.Lp, L + Lp + a.Ls, n)
    lk = [[Fraction(0)] * n for _ in range(n)]
    orient = [1] * n
    for p, idx in ((a, ia), (b, ib)):
        for i, gi in enumerate(idx):
            orient[gi] = p.orientations[i]
            for j, gj in enumerate(idx):
                lk[gi][gj] = p.lk[i][j]
    cw = None
    if a.casson_walker is not None and b.casson_walker is not None:
        cw = a.casson_walker + b.casson_walker
    return LinkPresentation(L, Lp, Ls, lk, a.colors + b.colors, orient, cw)


def unknot_surgery(framings: Sequence[int], casson_walker=None) -> LinkPresentation:
    """Disjoint framed unknots with no link components."""
    n = len(framings)
    lk = [[Fraction(framings[i]) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    return LinkPresentation(0, 0, n, lk, casson_walker=casson_walker)


# -- surgery formulas -------------------------------------------------------

def surgery_linking(pres: LinkPresentation) -> Matrix:
    """Linking matrix of the non-surgery components in the surgered manifold.

    The diagonal is the self-linking of the framing induced by the zero
    framing in S^3; input diagonal entries for link and companion
    components are taken as their S^3 self-linkings (normally zero).
    """
    rest = list(pres.link_indices) + list(pres.companion_indices)
    s = list(pres.surgery_indices)
    if not s:
        return [[pres.lk[i][j] for j in rest] for i in rest]
    inv = mat_inverse(pres.surgery_block())
    out = []
    for i in rest:
        row = []
        for j in rest:
            corr = sum((pres.lk[i][s[k]] * pres.lk[j][s[kk]] * inv[k][kk]
                        for k in range(len(s)) for kk in range(len(s))), Fraction(0))
            row.append(pres.lk[i][j] - corr)
        out.append(row)
    return out


def induced_self_linking(pres: LinkPresentation) -> List[Fraction]:
    """Self-linking in M of each link component with the induced framing."""
    lkm = surgery_linking(pres)
    zero_framed = [pres.lk[i][i] for i in range(pres.L + pres.Lp)]
    return [lkm[i][i] - zero_framed[i] for i in range(pres.L + pres.Lp)]


@dataclass(frozen=True)
class SurgeryCoefficients:
    c: Tuple[Tuple[Fraction, ...], ...]
    orders: Tuple[int, ...]


def surgery_coefficients(pres: LinkPresentation) -> SurgeryCoefficients:
    """c_ij = sum_k lk(i, s_k) (lk^s)^{-1}_{kj}; orders are lcms of row denominators."""
    rest = list(pres.link_indices) + list(pres.companion_indices)
    s = list(pres.surgery_indices)
    if not s:
        return SurgeryCoefficients(tuple(() for _ in rest), tuple(1 for _ in rest))
    inv = mat_inverse(pres.surgery_block())
    c = []
    for i in rest:
        c.append(tuple(sum((pres.lk[i][s[k]] * inv[k][j] for k in range(len(s))), Fraction(0))
                       for j in range(len(s))))
    orders = tuple(math.lcm(1, *(x.denominator for x in row)) for row in c)
    return SurgeryCoefficients(tuple(c), orders)


def surgery_determinant(pres: LinkPresentation) -> Fraction:
    if not pres.Ls:
        return Fraction(1)
    return mat_det(pres.surgery_block())


def h1_order(pres: LinkPresentation) -> Fraction:
    """|H_1| of the surgered manifold (the base is S^3)."""
    d = surgery_determinant(pres)
    if not d:
        raise NotQHSError("not a rational homology sphere: surgery block is singular")
    return abs(d)


def signature(pres: LinkPresentation) -> int:
    if not pres.Ls:
        return 0
    if not surgery_determinant(pres):
        raise NotQHSError("not a rational homology sphere: surgery block is singular")
    return signature_of(pres.surgery_block())


def quadratic_form(lk: Matrix, x: Sequence[Fraction], framed: bool = False) -> Fraction:
    """sum_{i != j} lk_ij x_i x_j, plus the diagonal when `framed`."""
    n = len(x)
    total = Fraction(0)
    for i in range(n):
        for j in range(n):
            if i != j or framed:
                total += lk[i][j] * x[i] * x[j]
    return total


@dataclass(frozen=True)
class FramingPhase:
    """phi = k_coefficient*K + constant + sum_j alpha_coefficients[j]*(alpha_j^2 - 1).

    alpha_coefficients covers the link components followed by the companions.
    """

    k_coefficient: Fraction
    constant: Fraction
    alpha_coefficients: Tuple[Fraction, ...] = ()

    def at_colors(self, colors: Sequence[Fraction]) -> Tuple[Fraction, Fraction]:
        """(coefficient of K, constant) after substituting numeric colors."""
        extra = sum((c * (Fraction(a) ** 2 - 1) for c, a in zip(self.alpha_coefficients, colors)), Fraction(0))
        return self.k_coefficient, self.constant + extra

    def value(self, K: int, colors: Sequence[Fraction] = ()) -> Fraction:
        k, c = self.at_colors(colors)
        return k * K + c


def framing_phase(pres: LinkPresentation) -> FramingPhase:
    """Exponent of q removing the framing dependence of a surgery presentation."""
    sigma = signature(pres)
    framing_sum = sum((pres.lk[j][j] for j in pres.surgery_indices), Fraction(0))
    self_lk = induced_self_linking(pres)
    k_coef = Fraction(-3, 8) * sigma
    const = Fraction(3, 4) * sigma - framing_sum / 4
    alphas = tuple(-x / 4 for x in self_lk)
    return FramingPhase(k_coef, const, alphas)
