"""Kinding, passivity, and algorithmic type checking.

The declarative zone-shuffling rules (activate / passify / promote /
derelict) are replaced by bottom-up usage inference: every identifier use
starts out active; whenever a subphrase's type is passive all of its active
uses are downgraded to passive; applications require the active identifier
sets of function and argument to be disjoint; a function may be promoted to
a passive function only when it has no active free identifiers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Set, Tuple

from .nat import NatAdd, NatConst, NatExpr, NatMul, NatVar
from .phrases import (App, Lam, Lit, PairP, Phrase, Prim, Proj, TApp, TLam,
                      Var)
from .primitives import PRIMITIVES
from .types import (AccT, Array, CommT, DataType, DataVar, DepFnT, ExpT, FnT,
                    Idx, Num, Pair, PhraseType, ProdT, Vector,
                    data_equal, is_passive, phrase_type_equal,
                    subst_phrase_type)


class DpiaTypeError(Exception):
    def __init__(self, message: str, span=None):
        if span is not None:
            message = f"{span[0]}:{span[1]}: {message}"
        super().__init__(message)
        self.span = span


# ------------------------------------------------------------------- kinding

def check_kind(delta: Dict[str, str], t) -> str:
    """Kind of a nat expression, data type, or phrase type under delta."""
    if isinstance(t, NatExpr):
        _kind_nat(delta, t)
        return "nat"
    if isinstance(t, DataType):
        _kind_data(delta, t)
        return "data"
    if isinstance(t, PhraseType):
        _kind_phrase(delta, t)
        return "phrase"
    raise DpiaTypeError(f"not a type: {t!r}")


def _kind_nat(delta, e: NatExpr):
    if isinstance(e, NatConst):
        return
    if isinstance(e, NatVar):
        if delta.get(e.name) != "nat":
            raise DpiaTypeError(f"unbound nat variable: {e.name}")
        return
    if isinstance(e, (NatAdd, NatMul)):
        _kind_nat(delta, e.left)
        _kind_nat(delta, e.right)
        return
    raise DpiaTypeError(f"ill-formed nat expression: {e!r}")


def _kind_data(delta, d: DataType):
    if isinstance(d, (Num, Vector)):
        return
    if isinstance(d, DataVar):
        if delta.get(d.name) != "data":
            raise DpiaTypeError(f"unbound data type variable: {d.name}")
        return
    if isinstance(d, Idx):
        _kind_nat(delta, d.bound)
        return
    if isinstance(d, Array):
        _kind_nat(delta, d.size)
        _kind_data(delta, d.elem)
        return
    if isinstance(d, Pair):
        _kind_data(delta, d.fst)
        _kind_data(delta, d.snd)
        return
    raise DpiaTypeError(f"ill-formed data type: {d!r}")


def _kind_phrase(delta, t: PhraseType):
    if isinstance(t, (ExpT, AccT)):
        _kind_data(delta, t.data)
        return
    if isinstance(t, CommT):
        return
    if isinstance(t, (ProdT,)):
        _kind_phrase(delta, t.fst)
        _kind_phrase(delta, t.snd)
        return
    if isinstance(t, FnT):
        _kind_phrase(delta, t.arg)
        _kind_phrase(delta, t.ret)
        return
    if isinstance(t, DepFnT):
        inner = dict(delta)
        inner[t.binder] = t.kind
        _kind_phrase(inner, t.body)
        return
    raise DpiaTypeError(f"ill-formed phrase type: {t!r}")


def types_equal(delta: Dict[str, str], t1, t2) -> bool:
    if isinstance(t1, PhraseType) and isinstance(t2, PhraseType):
        return phrase_type_equal(t1, t2)
    if isinstance(t1, DataType) and isinstance(t2, DataType):
        return data_equal(t1, t2)
    raise DpiaTypeError("kind mismatch in type comparison")


# ------------------------------------------------------------- usage report

@dataclass
class UsageReport:
    active: Set[str] = field(default_factory=set)
    passive: Set[str] = field(default_factory=set)

    def mode(self, name: str) -> str:
        if name in self.active:
            return "active"
        if name in self.passive:
            return "passive"
        return "unused"


# ------------------------------------------------------------- type checking

class Checker:
    def __init__(self, delta: Dict[str, str], pi: Dict[str, PhraseType],
                 gamma: Dict[str, PhraseType]):
        overlap = set(pi) & set(gamma)
        if overlap:
            raise DpiaTypeError(f"identifiers in both context zones: {overlap}")
        self.delta = delta
        self.pi = pi
        self.gamma = gamma

    def check(self, p: Phrase) -> Tuple[PhraseType, UsageReport]:
        env = dict(self.pi)
        env.update(self.gamma)
        t, active, passive = self._infer(p, env)
        bad = active & set(self.pi)
        if bad:
            raise DpiaTypeError(
                f"passive identifier(s) used actively: {sorted(bad)}")
        return t, UsageReport(active=active, passive=passive)

    # returns (type, active identifier set, passively used identifier set)
    def _infer(self, p: Phrase, env) -> Tuple[PhraseType, Set[str], Set[str]]:
        t, act, pas = self._infer_raw(p, env)
        if act and is_passive(t):
            pas = pas | act
            act = set()
        return t, act, pas

    def _infer_raw(self, p, env):
        if isinstance(p, Var):
            if p.name not in env:
                raise DpiaTypeError(f"unbound identifier: {p.name}", p.span)
            return env[p.name], {p.name}, set()
        if isinstance(p, Lit):
            return ExpT(p.dtype), set(), set()
        if isinstance(p, Prim):
            if p.name not in PRIMITIVES:
                raise DpiaTypeError(f"unknown primitive: {p.name}", p.span)
            return PRIMITIVES[p.name], set(), set()
        if isinstance(p, Lam):
            if p.arg_type is None:
                raise DpiaTypeError(
                    f"unannotated lambda binder {p.binder!r} in inference "
                    "position", p.span)
            check_kind(self.delta, p.arg_type)
            inner = dict(env)
            inner[p.binder] = p.arg_type
            bt, act, pas = self._infer(p.body, inner)
            return FnT(p.arg_type, bt), act - {p.binder}, pas - {p.binder}
        if isinstance(p, App):
            ft, fact, fpas = self._infer(p.fn, env)
            if not isinstance(ft, FnT):  # dereliction is implicit
                raise DpiaTypeError(
                    f"applying a non-function of type {ft}", p.span)
            aact, apas = self._check_arg(p.arg, ft.arg, env)
            clash = fact & aact
            if clash:
                raise DpiaTypeError(
                    "interference: active identifier(s) shared between "
                    f"function and argument: {sorted(clash)}", p.span)
            return ft.ret, fact | aact, fpas | apas
        if isinstance(p, TApp):
            ft, act, pas = self._infer(p.fn, env)
            if not isinstance(ft, DepFnT):
                raise DpiaTypeError(
                    f"type application of non-polymorphic phrase: {ft}")
            got = check_kind(self.delta, p.arg)
            if got != ft.kind:
                raise DpiaTypeError(
                    f"type argument kind mismatch: expected {ft.kind}, "
                    f"got {got}")
            return subst_phrase_type(ft.body, ft.binder, p.arg), act, pas
        if isinstance(p, TLam):
            sub = Checker({**self.delta, p.binder: p.kind}, self.pi, self.gamma)
            bt, act, pas = sub._infer(p.body, env)
            return DepFnT(p.binder, p.kind, bt), act, pas
        if isinstance(p, PairP):
            # both components talk to the same resource: no disjointness
            t1, a1, p1 = self._infer(p.fst, env)
            t2, a2, p2 = self._infer(p.snd, env)
            return ProdT(t1, t2), a1 | a2, p1 | p2
        if isinstance(p, Proj):
            t, act, pas = self._infer(p.target, env)
            if not isinstance(t, ProdT):
                raise DpiaTypeError(f"projection from non-product type {t}")
            return (t.fst if p.index == 1 else t.snd), act, pas
        raise DpiaTypeError(f"not a phrase: {p!r}")

    def _check_arg(self, p, expected: PhraseType, env):
        """Check p against an expected type, promoting lambda literals to
        passive function types where the expected type demands it."""
        if isinstance(p, Lam) and isinstance(expected, FnT):
            if p.arg_type is not None and not phrase_type_equal(p.arg_type,
                                                                expected.arg):
                raise DpiaTypeError(
                    f"lambda annotation {p.arg_type} does not match expected "
                    f"argument type {expected.arg}", p.span)
            inner = dict(env)
            inner[p.binder] = expected.arg
            sub_act, sub_pas = self._check_arg(p.body, expected.ret, inner)
            act = sub_act - {p.binder}
            if expected.passive and act:
                raise DpiaTypeError(
                    "cannot promote to a passive function: body captures "
                    f"active identifier(s) {sorted(act)} (interference with "
                    "parallel execution)", p.span)
            return act, sub_pas - {p.binder}
        if isinstance(p, PairP) and isinstance(expected, ProdT):
            a1, p1 = self._check_arg(p.fst, expected.fst, env)
            a2, p2 = self._check_arg(p.snd, expected.snd, env)
            return a1 | a2, p1 | p2
        if isinstance(p, Lit) and isinstance(expected, ExpT) and \
                isinstance(expected.data, Vector) and isinstance(p.dtype, Num):
            return set(), set()  # scalar literal splatted to a vector
        t, act, pas = self._infer(p, env)
        if not self._convertible(t, act, expected):
            raise DpiaTypeError(
                f"type mismatch: expected {expected}, got {t}")
        return act, pas

    def _convertible(self, actual, act: Set[str], expected) -> bool:
        if isinstance(actual, FnT) and isinstance(expected, FnT):
            if expected.passive and not actual.passive and act:
                return False  # promotion needs an empty active set
            return (phrase_type_equal(actual.arg, expected.arg)
                    and self._convertible(actual.ret, act, expected.ret))
        return phrase_type_equal(actual, expected)


def type_check(p: Phrase,
               delta: Optional[Dict[str, str]] = None,
               pi: Optional[Dict[str, PhraseType]] = None,
               gamma: Optional[Dict[str, PhraseType]] = None
               ) -> Tuple[PhraseType, UsageReport]:
    return Checker(delta or {}, pi or {}, gamma or {}).check(p)
