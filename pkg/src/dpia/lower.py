"""Translation Stage II: expand mapI/reduceI (and hierarchy variants) into
parfor / new+for by substituting their definitions, then beta-normalize to a
purely imperative phrase.

Projection convention: acc.1 is the acceptor side, acc.2 the expression
side of an allocated variable.
"""
from __future__ import annotations

from typing import Set

from .phrases import (App, Lam, PairP, Phrase, Prim, Proj, Var, apply_prim,
                      beta_normalize, subtree_iter, unapply)
from .primitives import (ARITH_OPS, MAPI_FAMILY, MAPI_TO_PARFOR, NEW_SPACE,
                         PARFOR_FAMILY)
from .translate import Translator, seq
from .types import AccT, Array, ExpT, Idx


class Lower:
    def __init__(self, accum_space: str = None):
        # address space for the reduceI accumulator variable (None = plain
        # new; "private" for the OpenCL pipeline)
        self._accum_new = {None: "new", "global": "newGlobal",
                           "local": "newLocal",
                           "private": "newPrivate"}[accum_space]
        self._counter = 0
        self._assign = Translator()

    def fresh(self, base: str) -> str:
        self._counter += 1
        return f"{base}_{self._counter}"

    def expand(self, p: Phrase) -> Phrase:
        """Repeatedly rewrite intermediate combinators and beta-reduce until
        none remain (generalized assignment at array type reintroduces mapI,
        so a single pass is not enough)."""
        while True:
            p = beta_normalize(self._rewrite(p))
            if not _has_intermediate(p):
                return p

    def _rewrite(self, p: Phrase) -> Phrase:
        u = unapply(p)
        if u is not None:
            name, targs, args = u
            if name in MAPI_FAMILY and len(args) == 3:
                return self._expand_mapi(name, targs, args)
            if name == "reduceI" and len(args) == 4:
                return self._expand_reducei(targs, args)
        if isinstance(p, Lam):
            return Lam(p.binder, self._rewrite(p.body), p.arg_type)
        if isinstance(p, App):
            return App(self._rewrite(p.fn), self._rewrite(p.arg))
        if isinstance(p, PairP):
            return PairP(self._rewrite(p.fst), self._rewrite(p.snd))
        if isinstance(p, Proj):
            return Proj(self._rewrite(p.target), p.index)
        return p

    def _expand_mapi(self, name, targs, args):
        n, d1, d2 = targs
        f, e, a = (self._rewrite(x) for x in args)
        i = self.fresh("i")
        elem = apply_prim("idx", [n, d1], [e, Var(i)])
        if name == "mapISeq":
            cell = apply_prim("idxAcc", [n, d2], [a, Var(i)])
            body = App(App(f, elem), cell)
            loop_fn = Lam(i, body, arg_type=ExpT(Idx(n)))
            return apply_prim("for", [n], [loop_fn])
        o = self.fresh("o")
        body = App(App(f, elem), Var(o))
        loop_fn = Lam(i, Lam(o, body, arg_type=AccT(d2)),
                      arg_type=ExpT(Idx(n)))
        return apply_prim(MAPI_TO_PARFOR[name], [n, d2], [a, loop_fn])

    def _expand_reducei(self, targs, args):
        n, d1, d2 = targs
        f, init, e, c = (self._rewrite(x) for x in args)
        acc = self.fresh("acc")
        i = self.fresh("i")
        acc_a = Proj(Var(acc), 1)
        acc_e = Proj(Var(acc), 2)
        init_cmd = self._assign.gen_assign(acc_a, d2, init)
        elem = apply_prim("idx", [n, d1], [e, Var(i)])
        step = App(App(App(f, elem), acc_e), acc_a)
        loop = apply_prim("for", [n],
                          [Lam(i, step, arg_type=ExpT(Idx(n)))])
        body = seq(init_cmd, seq(loop, App(c, acc_e)))
        return apply_prim(self._accum_new, [d2], [Lam(acc, body)])


_INTERMEDIATE = set(MAPI_FAMILY) | {"reduceI"}

# every primitive allowed in a purely imperative (post-Stage-II) phrase
IMPERATIVE_PRIMS: Set[str] = (
    {"skip", "barrier", ";", ":=", "for", "idx", "idxAcc", "negate",
     "split", "join", "zip", "pair", "fst", "snd",
     "splitAcc", "joinAcc", "pairAcc1", "pairAcc2", "zipAcc1", "zipAcc2"}
    | set(PARFOR_FAMILY) | set(NEW_SPACE) | set(ARITH_OPS)
)
for _w in (2, 3, 4, 8, 16):
    IMPERATIVE_PRIMS |= {f"asVector{_w}", f"asScalar{_w}",
                         f"asVectorAcc{_w}", f"asScalarAcc{_w}"}


def _has_intermediate(p: Phrase) -> bool:
    return any(isinstance(s, Prim) and s.name in _INTERMEDIATE
               for s in subtree_iter(p))


def is_purely_imperative(p: Phrase) -> bool:
    return all(s.name in IMPERATIVE_PRIMS for s in subtree_iter(p)
               if isinstance(s, Prim))


def normalize(p: Phrase) -> Phrase:
    return beta_normalize(p)


def expand_intermediate(p: Phrase, accum_space: str = None) -> Phrase:
    out = Lower(accum_space).expand(p)
    assert not _has_intermediate(out)
    return out


def stage2(p: Phrase, accum_space: str = None) -> Phrase:
    """Full Stage II: expansion plus normalization."""
    out = normalize(expand_intermediate(p, accum_space))
    assert is_purely_imperative(out), "residual functional combinator"
    return out
