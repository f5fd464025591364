"""The unified phrase AST: functional, intermediate, and imperative terms.

All nodes are immutable.  Capture-avoiding substitution, alpha-equivalence
via de-Bruijn comparison, and whole-program beta-normalisation live here.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

from .nat import NatExpr
from .types import (DataType, NUM, PhraseType, TypeArg, subst_phrase_type)


@dataclass(frozen=True)
class Phrase:
    pass


@dataclass(frozen=True)
class Var(Phrase):
    name: str
    span: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lam(Phrase):
    binder: str
    body: Phrase
    arg_type: Optional[PhraseType] = None
    span: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class App(Phrase):
    fn: Phrase
    arg: Phrase
    span: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TLam(Phrase):
    binder: str
    kind: str  # "nat" or "data"
    body: Phrase


@dataclass(frozen=True)
class TApp(Phrase):
    fn: Phrase
    arg: TypeArg


@dataclass(frozen=True)
class PairP(Phrase):
    fst: Phrase
    snd: Phrase


@dataclass(frozen=True)
class Proj(Phrase):
    target: Phrase
    index: int  # 1 = acceptor side of a variable, 2 = expression side


@dataclass(frozen=True)
class Prim(Phrase):
    name: str
    span: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lit(Phrase):
    value: Union[int, float]
    dtype: DataType = NUM  # num, or a vector type (splat literal)


_fresh_counter = itertools.count()


def fresh_name(base: str = "x") -> str:
    return f"{base}_{next(_fresh_counter)}"


# ------------------------------------------------------------- plumbing

def children(p: Phrase) -> List[Phrase]:
    if isinstance(p, Lam):
        return [p.body]
    if isinstance(p, App):
        return [p.fn, p.arg]
    if isinstance(p, TLam):
        return [p.body]
    if isinstance(p, TApp):
        return [p.fn]
    if isinstance(p, PairP):
        return [p.fst, p.snd]
    if isinstance(p, Proj):
        return [p.target]
    return []


def free_vars(p: Phrase) -> set:
    if isinstance(p, Var):
        return {p.name}
    if isinstance(p, Lam):
        return free_vars(p.body) - {p.binder}
    out: set = set()
    for c in children(p):
        out |= free_vars(c)
    return out


def subtree_iter(p: Phrase) -> Iterator[Phrase]:
    yield p
    for c in children(p):
        yield from subtree_iter(c)


# --------------------------------------------------------------- substitution

def substitute(body: Phrase, binder: str, replacement: Union[Phrase, TypeArg]) -> Phrase:
    """Replace occurrences of binder in body.  Phrase replacements target
    term variables; nat/data replacements target type variables."""
    if isinstance(replacement, Phrase):
        return _subst_term(body, binder, replacement)
    return _subst_type_in_phrase(body, binder, replacement)


def _subst_term(p: Phrase, name: str, r: Phrase) -> Phrase:
    if isinstance(p, Var):
        return r if p.name == name else p
    if isinstance(p, Lam):
        if p.binder == name:
            return p
        if p.binder in free_vars(r):
            new = fresh_name(p.binder.split("_")[0])
            body = _subst_term(p.body, p.binder, Var(new))
            return Lam(new, _subst_term(body, name, r), p.arg_type)
        return Lam(p.binder, _subst_term(p.body, name, r), p.arg_type)
    if isinstance(p, App):
        return App(_subst_term(p.fn, name, r), _subst_term(p.arg, name, r))
    if isinstance(p, TLam):
        return TLam(p.binder, p.kind, _subst_term(p.body, name, r))
    if isinstance(p, TApp):
        return TApp(_subst_term(p.fn, name, r), p.arg)
    if isinstance(p, PairP):
        return PairP(_subst_term(p.fst, name, r), _subst_term(p.snd, name, r))
    if isinstance(p, Proj):
        return Proj(_subst_term(p.target, name, r), p.index)
    return p


def _subst_type_in_phrase(p: Phrase, name: str, r: TypeArg) -> Phrase:
    if isinstance(p, Lam):
        at = subst_phrase_type(p.arg_type, name, r) if p.arg_type else None
        return Lam(p.binder, _subst_type_in_phrase(p.body, name, r), at)
    if isinstance(p, App):
        return App(_subst_type_in_phrase(p.fn, name, r),
                   _subst_type_in_phrase(p.arg, name, r))
    if isinstance(p, TLam):
        if p.binder == name:
            return p
        return TLam(p.binder, p.kind, _subst_type_in_phrase(p.body, name, r))
    if isinstance(p, TApp):
        from .types import subst_data, subst_nat, DataType as DT
        arg = p.arg
        if isinstance(arg, NatExpr):
            arg = subst_nat(arg, name, r)
        elif isinstance(arg, DT):
            arg = subst_data(arg, name, r)
        return TApp(_subst_type_in_phrase(p.fn, name, r), arg)
    if isinstance(p, PairP):
        return PairP(_subst_type_in_phrase(p.fst, name, r),
                     _subst_type_in_phrase(p.snd, name, r))
    if isinstance(p, Proj):
        return Proj(_subst_type_in_phrase(p.target, name, r), p.index)
    if isinstance(p, Lit):
        from .types import subst_data
        return Lit(p.value, subst_data(p.dtype, name, r))
    return p


# ----------------------------------------------------------- alpha-equality

def _debruijn(p: Phrase, env: Dict[str, int], depth: int):
    """Canonical comparison key; surface names appear only for free vars."""
    if isinstance(p, Var):
        if p.name in env:
            return ("bound", depth - env[p.name])
        return ("free", p.name)
    if isinstance(p, Lam):
        inner = dict(env)
        inner[p.binder] = depth
        return ("lam", _debruijn(p.body, inner, depth + 1))
    if isinstance(p, App):
        return ("app", _debruijn(p.fn, env, depth), _debruijn(p.arg, env, depth))
    if isinstance(p, TLam):
        return ("tlam", p.kind, _debruijn(p.body, env, depth))
    if isinstance(p, TApp):
        from .nat import nat_normalize
        arg = p.arg
        key = nat_normalize(arg) if isinstance(arg, NatExpr) else arg
        return ("tapp", _debruijn(p.fn, env, depth), key)
    if isinstance(p, PairP):
        return ("pair", _debruijn(p.fst, env, depth), _debruijn(p.snd, env, depth))
    if isinstance(p, Proj):
        return ("proj", p.index, _debruijn(p.target, env, depth))
    if isinstance(p, Prim):
        return ("prim", p.name)
    if isinstance(p, Lit):
        return ("lit", p.value, p.dtype)
    raise TypeError(f"not a phrase: {p!r}")


def alpha_equal(a: Phrase, b: Phrase) -> bool:
    return _debruijn(a, {}, 0) == _debruijn(b, {}, 0)


# ------------------------------------------------------------- normalisation

def beta_normalize(p: Phrase) -> Phrase:
    """Reduce all applied (type-)lambdas and projections of literal pairs.
    Terminates because the language has no recursion."""
    if isinstance(p, App):
        fn = beta_normalize(p.fn)
        arg = beta_normalize(p.arg)
        if isinstance(fn, Lam):
            return beta_normalize(_subst_term(fn.body, fn.binder, arg))
        return App(fn, arg)
    if isinstance(p, TApp):
        fn = beta_normalize(p.fn)
        if isinstance(fn, TLam):
            return beta_normalize(_subst_type_in_phrase(fn.body, fn.binder, p.arg))
        return TApp(fn, p.arg)
    if isinstance(p, Proj):
        t = beta_normalize(p.target)
        if isinstance(t, PairP):
            return t.fst if p.index == 1 else t.snd
        return Proj(t, p.index)
    if isinstance(p, Lam):
        return Lam(p.binder, beta_normalize(p.body), p.arg_type)
    if isinstance(p, TLam):
        return TLam(p.binder, p.kind, beta_normalize(p.body))
    if isinstance(p, PairP):
        return PairP(beta_normalize(p.fst), beta_normalize(p.snd))
    return p


# ------------------------------------------------------ applied-prim helpers

def apply_prim(name: str, type_args: List[TypeArg], args: List[Phrase]) -> Phrase:
    p: Phrase = Prim(name)
    for t in type_args:
        p = TApp(p, t)
    for a in args:
        p = App(p, a)
    return p


def unapply(p: Phrase) -> Optional[Tuple[str, List[TypeArg], List[Phrase]]]:
    """If p is a (possibly partially) applied primitive, return its name,
    type arguments and term arguments in application order."""
    args: List[Phrase] = []
    targs: List[TypeArg] = []
    while True:
        if isinstance(p, App):
            args.append(p.arg)
            p = p.fn
        elif isinstance(p, TApp):
            targs.append(p.arg)
            p = p.fn
        elif isinstance(p, Prim):
            return p.name, list(reversed(targs)), list(reversed(args))
        else:
            return None
