"""Type-level natural number arithmetic.

Array sizes are polynomials over nat-kinded variables with non-negative
integer coefficients.  Equality of sizes is decided by comparing canonical
polynomial normal forms (sum of monomials, each monomial a sorted multiset
of variables with a positive coefficient).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union


@dataclass(frozen=True)
class NatExpr:
    def __add__(self, other: "NatLike") -> "NatExpr":
        return NatAdd(self, nat(other))

    def __mul__(self, other: "NatLike") -> "NatExpr":
        return NatMul(self, nat(other))

    def __str__(self) -> str:
        return nat_str(self)


@dataclass(frozen=True)
class NatConst(NatExpr):
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("nat constants must be non-negative")


@dataclass(frozen=True)
class NatVar(NatExpr):
    name: str


@dataclass(frozen=True)
class NatAdd(NatExpr):
    left: NatExpr
    right: NatExpr


@dataclass(frozen=True)
class NatMul(NatExpr):
    left: NatExpr
    right: NatExpr


NatLike = Union[NatExpr, int, str]

# monomial: sorted tuple of variable names (with multiplicity) -> coefficient
Poly = Dict[Tuple[str, ...], int]


def nat(x: NatLike) -> NatExpr:
    if isinstance(x, NatExpr):
        return x
    if isinstance(x, int):
        return NatConst(x)
    if isinstance(x, str):
        return NatVar(x)
    raise TypeError(f"cannot coerce {x!r} to a nat expression")


def poly_of(e: NatExpr) -> Poly:
    if isinstance(e, NatConst):
        return {(): e.value} if e.value != 0 else {}
    if isinstance(e, NatVar):
        return {(e.name,): 1}
    if isinstance(e, NatAdd):
        p = dict(poly_of(e.left))
        for mono, c in poly_of(e.right).items():
            p[mono] = p.get(mono, 0) + c
        return {m: c for m, c in p.items() if c != 0}
    if isinstance(e, NatMul):
        pl, pr = poly_of(e.left), poly_of(e.right)
        p: Poly = {}
        for m1, c1 in pl.items():
            for m2, c2 in pr.items():
                mono = tuple(sorted(m1 + m2))
                p[mono] = p.get(mono, 0) + c1 * c2
        return {m: c for m, c in p.items() if c != 0}
    raise TypeError(f"not a nat expression: {e!r}")


def _monomial_expr(mono: Tuple[str, ...], coeff: int) -> NatExpr:
    e: Optional[NatExpr] = NatConst(coeff) if (coeff != 1 or not mono) else None
    for v in mono:
        e = NatVar(v) if e is None else NatMul(e, NatVar(v))
    assert e is not None
    return e


def of_poly(p: Poly) -> NatExpr:
    if not p:
        return NatConst(0)
    # deterministic order: higher-degree monomials first, then lexicographic
    keys = sorted(p.keys(), key=lambda m: (-len(m), m))
    e = _monomial_expr(keys[0], p[keys[0]])
    for mono in keys[1:]:
        e = NatAdd(e, _monomial_expr(mono, p[mono]))
    return e


def nat_normalize(e: NatExpr) -> NatExpr:
    return of_poly(poly_of(e))


def nat_equal(a: NatLike, b: NatLike) -> bool:
    return poly_of(nat(a)) == poly_of(nat(b))


def nat_eval(e: NatExpr, sigma: Dict[str, int]) -> int:
    if isinstance(e, NatConst):
        return e.value
    if isinstance(e, NatVar):
        return sigma[e.name]
    if isinstance(e, NatAdd):
        return nat_eval(e.left, sigma) + nat_eval(e.right, sigma)
    if isinstance(e, NatMul):
        return nat_eval(e.left, sigma) * nat_eval(e.right, sigma)
    raise TypeError(f"not a nat expression: {e!r}")


def nat_free_vars(e: NatExpr) -> set:
    return {v for mono in poly_of(e) for v in mono}


def nat_const_value(e: NatExpr) -> Optional[int]:
    """The integer value of e, or None if e mentions variables."""
    p = poly_of(e)
    if not p:
        return 0
    if set(p) == {()}:
        return p[()]
    return None


def nat_divide(e: NatLike, d: NatLike) -> Optional[NatExpr]:
    """Exact division e / d when d is a single monomial dividing every
    monomial of e; None otherwise."""
    pe, pd = poly_of(nat(e)), poly_of(nat(d))
    if len(pd) != 1:
        return None
    (dmono, dcoeff), = pd.items()
    q: Poly = {}
    for mono, c in pe.items():
        if c % dcoeff != 0:
            return None
        rest = list(mono)
        for v in dmono:
            if v not in rest:
                return None
            rest.remove(v)
        q[tuple(rest)] = c // dcoeff
    return of_poly(q)


def nat_str(e: NatExpr) -> str:
    if isinstance(e, NatConst):
        return str(e.value)
    if isinstance(e, NatVar):
        return e.name
    if isinstance(e, NatAdd):
        return f"(+ {nat_str(e.left)} {nat_str(e.right)})"
    if isinstance(e, NatMul):
        return f"(* {nat_str(e.left)} {nat_str(e.right)})"
    raise TypeError(f"not a nat expression: {e!r}")
