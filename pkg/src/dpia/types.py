"""Data types and phrase types.

Data types classify values (numbers, index values, arrays, pairs, vectors);
phrase types classify program parts (expressions, acceptors, commands,
products of phrases, plain / passive / size-and-type-polymorphic functions).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .nat import NatExpr, NatLike, nat, nat_equal

VECTOR_WIDTHS = (2, 3, 4, 8, 16)


# ---------------------------------------------------------------- data types

@dataclass(frozen=True)
class DataType:
    pass


@dataclass(frozen=True)
class Num(DataType):
    def __str__(self):
        return "num"


@dataclass(frozen=True)
class Idx(DataType):
    bound: NatExpr

    def __str__(self):
        return f"(idx {self.bound})"


@dataclass(frozen=True)
class Array(DataType):
    size: NatExpr
    elem: DataType

    def __str__(self):
        return f"(array {self.size} {self.elem})"


@dataclass(frozen=True)
class Pair(DataType):
    fst: DataType
    snd: DataType

    def __str__(self):
        return f"(pair {self.fst} {self.snd})"


@dataclass(frozen=True)
class Vector(DataType):
    width: int

    def __post_init__(self):
        if self.width not in VECTOR_WIDTHS:
            raise ValueError(f"illegal vector width {self.width}")

    def __str__(self):
        return f"(vec {self.width})"


@dataclass(frozen=True)
class DataVar(DataType):
    name: str

    def __str__(self):
        return self.name


NUM = Num()


def array(size: NatLike, elem: DataType) -> Array:
    return Array(nat(size), elem)


# -------------------------------------------------------------- phrase types

@dataclass(frozen=True)
class PhraseType:
    pass


@dataclass(frozen=True)
class ExpT(PhraseType):
    data: DataType

    def __str__(self):
        return f"(exp {self.data})"


@dataclass(frozen=True)
class AccT(PhraseType):
    data: DataType

    def __str__(self):
        return f"(acc {self.data})"


@dataclass(frozen=True)
class CommT(PhraseType):
    def __str__(self):
        return "comm"


@dataclass(frozen=True)
class ProdT(PhraseType):
    fst: PhraseType
    snd: PhraseType

    def __str__(self):
        return f"(prod {self.fst} {self.snd})"


@dataclass(frozen=True)
class FnT(PhraseType):
    arg: PhraseType
    ret: PhraseType
    passive: bool = False

    def __str__(self):
        arrow = "->p" if self.passive else "->"
        return f"({arrow} {self.arg} {self.ret})"


@dataclass(frozen=True)
class DepFnT(PhraseType):
    binder: str
    kind: str  # "nat" or "data"
    body: PhraseType

    def __str__(self):
        return f"(forall ({self.binder} {self.kind}) {self.body})"


COMM = CommT()


def var_t(d: DataType) -> ProdT:
    """A mutable variable: acceptor part (projection 1) paired with
    expression part (projection 2)."""
    return ProdT(AccT(d), ExpT(d))


TypeArg = Union[NatExpr, DataType]


# -------------------------------------------------------------- substitution

def subst_data(d: DataType, name: str, val: TypeArg) -> DataType:
    if isinstance(d, (Num, Vector)):
        return d
    if isinstance(d, DataVar):
        if d.name == name:
            assert isinstance(val, DataType)
            return val
        return d
    if isinstance(d, Idx):
        return Idx(subst_nat(d.bound, name, val))
    if isinstance(d, Array):
        return Array(subst_nat(d.size, name, val), subst_data(d.elem, name, val))
    if isinstance(d, Pair):
        return Pair(subst_data(d.fst, name, val), subst_data(d.snd, name, val))
    raise TypeError(f"not a data type: {d!r}")


def subst_nat(e: NatExpr, name: str, val: TypeArg) -> NatExpr:
    from .nat import NatAdd, NatConst, NatMul, NatVar
    if isinstance(e, NatConst):
        return e
    if isinstance(e, NatVar):
        if e.name == name:
            assert isinstance(val, NatExpr)
            return val
        return e
    if isinstance(e, NatAdd):
        return NatAdd(subst_nat(e.left, name, val), subst_nat(e.right, name, val))
    if isinstance(e, NatMul):
        return NatMul(subst_nat(e.left, name, val), subst_nat(e.right, name, val))
    raise TypeError(f"not a nat expression: {e!r}")


def subst_phrase_type(t: PhraseType, name: str, val: TypeArg) -> PhraseType:
    if isinstance(t, ExpT):
        return ExpT(subst_data(t.data, name, val))
    if isinstance(t, AccT):
        return AccT(subst_data(t.data, name, val))
    if isinstance(t, CommT):
        return t
    if isinstance(t, ProdT):
        return ProdT(subst_phrase_type(t.fst, name, val),
                     subst_phrase_type(t.snd, name, val))
    if isinstance(t, FnT):
        return FnT(subst_phrase_type(t.arg, name, val),
                   subst_phrase_type(t.ret, name, val), t.passive)
    if isinstance(t, DepFnT):
        if t.binder == name:
            return t
        return DepFnT(t.binder, t.kind, subst_phrase_type(t.body, name, val))
    raise TypeError(f"not a phrase type: {t!r}")


# ------------------------------------------------------------------ equality

def data_equal(a: DataType, b: DataType) -> bool:
    if isinstance(a, Num) and isinstance(b, Num):
        return True
    if isinstance(a, Vector) and isinstance(b, Vector):
        return a.width == b.width
    if isinstance(a, DataVar) and isinstance(b, DataVar):
        return a.name == b.name
    if isinstance(a, Idx) and isinstance(b, Idx):
        return nat_equal(a.bound, b.bound)
    if isinstance(a, Array) and isinstance(b, Array):
        return nat_equal(a.size, b.size) and data_equal(a.elem, b.elem)
    if isinstance(a, Pair) and isinstance(b, Pair):
        return data_equal(a.fst, b.fst) and data_equal(a.snd, b.snd)
    return False


def phrase_type_equal(a: PhraseType, b: PhraseType) -> bool:
    """Structural congruence with polynomial equality at nat leaves.
    Passivity annotations on arrows must agree (promotion and dereliction
    are handled separately by the checker)."""
    if isinstance(a, ExpT) and isinstance(b, ExpT):
        return data_equal(a.data, b.data)
    if isinstance(a, AccT) and isinstance(b, AccT):
        return data_equal(a.data, b.data)
    if isinstance(a, CommT) and isinstance(b, CommT):
        return True
    if isinstance(a, ProdT) and isinstance(b, ProdT):
        return phrase_type_equal(a.fst, b.fst) and phrase_type_equal(a.snd, b.snd)
    if isinstance(a, FnT) and isinstance(b, FnT):
        return (a.passive == b.passive
                and phrase_type_equal(a.arg, b.arg)
                and phrase_type_equal(a.ret, b.ret))
    if isinstance(a, DepFnT) and isinstance(b, DepFnT):
        if a.kind != b.kind:
            return False
        if a.binder == b.binder:
            return phrase_type_equal(a.body, b.body)
        fresh = DataVar(a.binder + "'") if a.kind == "data" else nat(a.binder + "'")
        return phrase_type_equal(subst_phrase_type(a.body, a.binder, fresh),
                                 subst_phrase_type(b.body, b.binder, fresh))
    return False


# ----------------------------------------------------------------- passivity

def is_passive(t: PhraseType) -> bool:
    if isinstance(t, ExpT):
        return True
    if isinstance(t, (AccT, CommT)):
        return False
    if isinstance(t, ProdT):
        return is_passive(t.fst) and is_passive(t.snd)
    if isinstance(t, FnT):
        return t.passive or is_passive(t.ret)
    if isinstance(t, DepFnT):
        return is_passive(t.body)
    raise TypeError(f"not a phrase type: {t!r}")
