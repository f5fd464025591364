"""Translation Stage I: functional expressions to higher-order imperative
phrases via the mutually recursive acceptor-passing and continuation-passing
translations, plus generalized assignment at compound data types.

Projection convention throughout: proj1 of a variable pair is the acceptor,
proj2 the expression.

One mapI*-family node is produced per map*-family node of the input and one
reduceI per reduce — translation never fuses or duplicates parallelism.
"""
from __future__ import annotations

from typing import Callable, Optional

from .phrases import (App, Lam, PairP, Phrase, Prim, Proj, Var, apply_prim,
                      beta_normalize, subtree_iter, unapply)
from .primitives import (ARITH_OPS, MAP_FAMILY, MAP_TO_MAPI, TO_SPACE)
from .types import (AccT, Array, COMM, DataType, ExpT, FnT, Idx, Num, Pair,
                    Vector)

Continuation = Callable[[Phrase], Phrase]

_NEW_FOR_SPACE = {None: "new", "global": "newGlobal", "local": "newLocal",
                  "private": "newPrivate"}


def seq(c1: Phrase, c2: Phrase) -> Phrase:
    return App(Prim(";"), PairP(c1, c2))


class Translator:
    def __init__(self, default_space: Optional[str] = None):
        # default address space for map's continuation-translation
        # temporaries (None = plain new; "global" for the OpenCL pipeline)
        self.default_space = default_space
        self._counter = 0

    def fresh(self, base: str) -> str:
        self._counter += 1
        return f"{base}{self._counter}"

    # -- generalized assignment -------------------------------------------

    def gen_assign(self, a: Phrase, delta: DataType, e: Phrase) -> Phrase:
        if isinstance(delta, (Num, Idx, Vector)):
            return apply_prim(":=", [delta], [PairP(a, e)])
        if isinstance(delta, Array):
            x, o = self.fresh("x"), self.fresh("a")
            body = self.gen_assign(Var(o), delta.elem, Var(x))
            f = Lam(x, Lam(o, body, arg_type=AccT(delta.elem)),
                    arg_type=ExpT(delta.elem))
            return apply_prim("mapI", [delta.size, delta.elem, delta.elem],
                              [f, e, a])
        if isinstance(delta, Pair):
            c1 = self.gen_assign(apply_prim("pairAcc1",
                                            [delta.fst, delta.snd], [a]),
                                 delta.fst,
                                 apply_prim("fst", [delta.fst, delta.snd],
                                            [e]))
            c2 = self.gen_assign(apply_prim("pairAcc2",
                                            [delta.fst, delta.snd], [a]),
                                 delta.snd,
                                 apply_prim("snd", [delta.fst, delta.snd],
                                            [e]))
            return seq(c1, c2)
        raise ValueError(f"no assignment at type {delta}")

    # -- acceptor-passing translation -------------------------------------

    def acceptor(self, e: Phrase, delta: DataType, a: Phrase) -> Phrase:
        u = unapply(e)
        name = u[0] if u else None

        if name in MAP_FAMILY:
            (n, d1, d2), (f, src) = u[1], u[2]
            fi = self._imperative_map_fn(f, d1, d2)
            return self.continuation(
                src, Array(n, d1),
                lambda x: apply_prim(MAP_TO_MAPI[name], [n, d1, d2],
                                     [fi, x, a]))

        if name == "reduce":
            (n, d1, d2), (f, init, src) = u[1], u[2]
            fi = self._imperative_reduce_fn(f, d1, d2)
            return self.continuation(
                src, Array(n, d1),
                lambda x: self.continuation(
                    init, d2,
                    lambda y: apply_prim(
                        "reduceI", [n, d1, d2],
                        [fi, y, x, self._reify(
                            d2, lambda r: self.gen_assign(a, d2, r))])))

        if name in ARITH_OPS:
            (d,), (operands,) = u[1], u[2]
            e1, e2 = operands.fst, operands.snd
            return self.continuation(
                e1, d, lambda x: self.continuation(
                    e2, d,
                    lambda y: apply_prim(
                        ":=", [d], [PairP(a, apply_prim(name, [d],
                                                        [PairP(x, y)]))])))

        if name == "negate":
            (d,), (src,) = u[1], u[2]
            return self.continuation(
                src, d,
                lambda x: apply_prim(
                    ":=", [d], [PairP(a, apply_prim("negate", [d], [x]))]))

        if name == "zip":
            (n, d1, d2), (e1, e2) = u[1], u[2]
            c1 = self.acceptor(e1, Array(n, d1),
                               apply_prim("zipAcc1", [n, d1, d2], [a]))
            c2 = self.acceptor(e2, Array(n, d2),
                               apply_prim("zipAcc2", [n, d1, d2], [a]))
            return seq(c1, c2)

        if name == "split":
            (n, m, d), (src,) = u[1], u[2]
            return self.acceptor(src, Array(n * m, d),
                                 apply_prim("splitAcc", [n, m, d], [a]))

        if name == "join":
            (n, m, d), (src,) = u[1], u[2]
            return self.acceptor(src, Array(n, Array(m, d)),
                                 apply_prim("joinAcc", [n, m, d], [a]))

        if name == "pair":
            (d1, d2), (e1, e2) = u[1], u[2]
            c1 = self.acceptor(e1, d1, apply_prim("pairAcc1", [d1, d2], [a]))
            c2 = self.acceptor(e2, d2, apply_prim("pairAcc2", [d1, d2], [a]))
            return seq(c1, c2)

        if name in ("fst", "snd"):
            (d1, d2), (src,) = u[1], u[2]
            out = d1 if name == "fst" else d2
            return self.continuation(
                src, Pair(d1, d2),
                lambda x: self.gen_assign(
                    a, out, apply_prim(name, [d1, d2], [x])))

        if name is not None and name.startswith("asVector") \
                and "Acc" not in name and u[2]:
            w = int(name[len("asVector"):])
            (m,), (src,) = u[1], u[2]
            return self.acceptor(src, Array(m * w, Num()),
                                 apply_prim(f"asVectorAcc{w}", [m], [a]))

        if name is not None and name.startswith("asScalar") \
                and "Acc" not in name and u[2]:
            w = int(name[len("asScalar"):])
            (m,), (src,) = u[1], u[2]
            return self.acceptor(src, Array(m, Vector(w)),
                                 apply_prim(f"asScalarAcc{w}", [m], [a]))

        if name in TO_SPACE:
            _targs, (f, src) = u[1], u[2]
            return self.acceptor(beta_normalize(App(f, src)), delta, a)

        if name == "idx" and len(u[2]) == 2 and not _is_trivial(e):
            (n, d), (src, i) = u[1], u[2]
            return self.continuation(
                src, Array(n, d),
                lambda x: self.gen_assign(a, d,
                                          apply_prim("idx", [n, d], [x, i])))

        if _is_trivial(e):
            return self.gen_assign(a, delta, e)
        raise ValueError(f"no acceptor-translation clause for {e!r}")

    # -- continuation-passing translation ---------------------------------

    def continuation(self, e: Phrase, delta: DataType, c: Continuation,
                     space: Optional[str] = None) -> Phrase:
        u = unapply(e)
        name = u[0] if u else None

        if name in MAP_FAMILY:
            n, d2 = u[1][0], u[1][2]
            out_t = Array(n, d2)
            tmp = self.fresh("tmp")
            alloc = _NEW_FOR_SPACE[space or self.default_space]
            body = seq(self.acceptor(e, out_t, Proj(Var(tmp), 1)),
                       c(Proj(Var(tmp), 2)))
            return apply_prim(alloc, [out_t], [Lam(tmp, body)])

        if name == "reduce":
            (n, d1, d2), (f, init, src) = u[1], u[2]
            fi = self._imperative_reduce_fn(f, d1, d2)
            return self.continuation(
                src, Array(n, d1),
                lambda x: self.continuation(
                    init, d2,
                    lambda y: apply_prim("reduceI", [n, d1, d2],
                                         [fi, y, x, self._reify(d2, c)])))

        if name in ARITH_OPS:
            (d,), (operands,) = u[1], u[2]
            e1, e2 = operands.fst, operands.snd
            return self.continuation(
                e1, d, lambda x: self.continuation(
                    e2, d,
                    lambda y: c(apply_prim(name, [d], [PairP(x, y)]))))

        if name == "negate":
            (d,), (src,) = u[1], u[2]
            return self.continuation(
                src, d, lambda x: c(apply_prim("negate", [d], [x])))

        if name == "zip":
            (n, d1, d2), (e1, e2) = u[1], u[2]
            return self.continuation(
                e1, Array(n, d1),
                lambda x: self.continuation(
                    e2, Array(n, d2),
                    lambda y: c(apply_prim("zip", [n, d1, d2], [x, y]))))

        if name == "split":
            (n, m, d), (src,) = u[1], u[2]
            return self.continuation(
                src, Array(n * m, d),
                lambda x: c(apply_prim("split", [n, m, d], [x])))

        if name == "join":
            (n, m, d), (src,) = u[1], u[2]
            return self.continuation(
                src, Array(n, Array(m, d)),
                lambda x: c(apply_prim("join", [n, m, d], [x])))

        if name == "pair":
            (d1, d2), (e1, e2) = u[1], u[2]
            return self.continuation(
                e1, d1, lambda x: self.continuation(
                    e2, d2,
                    lambda y: c(apply_prim("pair", [d1, d2], [x, y]))))

        if name in ("fst", "snd"):
            (d1, d2), (src,) = u[1], u[2]
            return self.continuation(
                src, Pair(d1, d2),
                lambda x: c(apply_prim(name, [d1, d2], [x])))

        if name is not None and name.startswith(("asVector", "asScalar")) \
                and "Acc" not in name and u[2]:
            (m,), (src,) = u[1], u[2]
            w = int(name[8:])
            if name.startswith("asVector"):
                src_t = Array(m * w, Num())
            else:
                src_t = Array(m, Vector(w))
            return self.continuation(
                src, src_t, lambda x: c(apply_prim(name, [m], [x])))

        if name in TO_SPACE:
            _targs, (f, src) = u[1], u[2]
            return self.continuation(beta_normalize(App(f, src)), delta, c,
                                     space=TO_SPACE[name])

        if name == "idx" and len(u[2]) == 2 and not _is_trivial(e):
            (n, d), (src, i) = u[1], u[2]
            return self.continuation(
                src, Array(n, d),
                lambda x: c(apply_prim("idx", [n, d], [x, i])))

        if _is_trivial(e):
            return c(e)
        raise ValueError(f"no continuation-translation clause for {e!r}")

    # -- helpers -----------------------------------------------------------

    def _imperative_map_fn(self, f: Phrase, d1, d2) -> Phrase:
        x, o = self.fresh("x"), self.fresh("o")
        body = self.acceptor(beta_normalize(App(f, Var(x))), d2, Var(o))
        return Lam(x, Lam(o, body, arg_type=AccT(d2)), arg_type=ExpT(d1))

    def _imperative_reduce_fn(self, f: Phrase, d1, d2) -> Phrase:
        x, y, o = self.fresh("x"), self.fresh("y"), self.fresh("o")
        applied = beta_normalize(App(App(f, Var(x)), Var(y)))
        body = self.acceptor(applied, d2, Var(o))
        return Lam(x, Lam(y, Lam(o, body, arg_type=AccT(d2)),
                          arg_type=ExpT(d2)), arg_type=ExpT(d1))

    def _reify(self, delta: DataType, c: Continuation) -> Phrase:
        r = self.fresh("r")
        return Lam(r, c(Var(r)), arg_type=ExpT(delta))


_HEADS_NONTRIVIAL = set(MAP_FAMILY) | {"reduce"} | set(TO_SPACE)


def _is_trivial(e: Phrase) -> bool:
    """An expression with no map/reduce-family combinator anywhere in it is
    passed straight through (data-layout and first-order expressions)."""
    for sub in subtree_iter(e):
        if isinstance(sub, Prim) and sub.name in _HEADS_NONTRIVIAL:
            return False
    return True


def acceptor_translate(e: Phrase, delta: DataType, a: Phrase,
                       default_space: Optional[str] = None) -> Phrase:
    return Translator(default_space).acceptor(e, delta, a)


def continuation_translate(e: Phrase, delta: DataType, c: Continuation,
                           default_space: Optional[str] = None) -> Phrase:
    return Translator(default_space).continuation(e, delta, c)


def translate_program(body: Phrase, delta: DataType, out: str = "out",
                      default_space: Optional[str] = None) -> Phrase:
    """Stage I entry point: command equivalent to `out :=_delta body`."""
    return Translator(default_space).acceptor(body, delta, Var(out))
