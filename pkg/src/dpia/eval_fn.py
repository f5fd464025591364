"""Reference evaluator for the purely functional sublanguage.

Values: numbers are Python ints (exact mode, the default) or floats;
index values are ints; arrays are lists; pairs are 2-tuples; vectors are
VectorVal.  All compiled pipelines are differentially tested against this
evaluator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

from .nat import NatExpr, nat_eval
from .phrases import (App, Lam, Lit, PairP, Phrase, Prim, Proj, TApp, TLam,
                      Var, unapply)
from .primitives import ARITH_OPS, MAP_FAMILY, TO_SPACE
from .types import Array, DataType, Idx, Num, Pair, Vector

Number = Union[int, float]


@dataclass(frozen=True)
class VectorVal:
    items: Tuple[Number, ...]

    def __post_init__(self):
        assert len(self.items) in (2, 3, 4, 8, 16)


Value = Union[Number, List, Tuple, VectorVal]


class EvalError(Exception):
    pass


def divide(a: Number, b: Number) -> Number:
    """Division matching C semantics: truncating for ints."""
    if isinstance(a, int) and isinstance(b, int):
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    return a / b


_SCALAR_OPS: Dict[str, Callable[[Number, Number], Number]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": divide,
}


def apply_op(op: str, a: Value, b: Value) -> Value:
    f = _SCALAR_OPS[op]
    if isinstance(a, VectorVal) or isinstance(b, VectorVal):
        if not isinstance(a, VectorVal):
            a = VectorVal((a,) * len(b.items))  # type: ignore[union-attr]
        if not isinstance(b, VectorVal):
            b = VectorVal((b,) * len(a.items))
        if len(a.items) != len(b.items):
            raise EvalError("vector width mismatch")
        return VectorVal(tuple(f(x, y) for x, y in zip(a.items, b.items)))
    return f(a, b)


def zero_value(d: DataType, sigma: Dict[str, int],
               float_mode: bool = False) -> Value:
    zero: Number = 0.0 if float_mode else 0
    if isinstance(d, (Num, Idx)):
        return 0 if isinstance(d, Idx) else zero
    if isinstance(d, Vector):
        return VectorVal((zero,) * d.width)
    if isinstance(d, Array):
        n = nat_eval(d.size, sigma)
        return [zero_value(d.elem, sigma, float_mode) for _ in range(n)]
    if isinstance(d, Pair):
        return (zero_value(d.fst, sigma, float_mode),
                zero_value(d.snd, sigma, float_mode))
    raise EvalError(f"cannot zero-initialise type {d}")


def flatten_value(v: Value) -> List[Number]:
    """All scalar leaves in layout order (used for store interop)."""
    if isinstance(v, VectorVal):
        return list(v.items)
    if isinstance(v, list):
        return [x for item in v for x in flatten_value(item)]
    if isinstance(v, tuple):
        return flatten_value(v[0]) + flatten_value(v[1])
    return [v]


def unflatten_value(d: DataType, flat: List[Number], sigma: Dict[str, int]
                    ) -> Value:
    it = iter(flat)

    def build(dt: DataType) -> Value:
        if isinstance(dt, (Num, Idx)):
            return next(it)
        if isinstance(dt, Vector):
            return VectorVal(tuple(next(it) for _ in range(dt.width)))
        if isinstance(dt, Array):
            n = nat_eval(dt.size, sigma)
            return [build(dt.elem) for _ in range(n)]
        if isinstance(dt, Pair):
            a = build(dt.fst)
            return (a, build(dt.snd))
        raise EvalError(f"cannot build value of type {dt}")

    out = build(d)
    try:
        next(it)
    except StopIteration:
        return out
    raise EvalError("too many scalars for type")


# ----------------------------------------------------------------- evaluator

def eval_phrase(p: Phrase, env: Dict[str, Value],
                sigma: Optional[Dict[str, int]] = None) -> Value:
    sigma = sigma or {}
    return _eval(p, env, sigma)


def _eval(p: Phrase, env: Dict[str, Value], sigma: Dict[str, int]):
    u = unapply(p)
    if u is not None:
        name, targs, args = u
        result = _eval_prim(name, targs, args, env, sigma)
        if result is not NotImplemented:
            return result
    if isinstance(p, Var):
        if p.name not in env:
            raise EvalError(f"unbound identifier: {p.name}")
        return env[p.name]
    if isinstance(p, Lit):
        if isinstance(p.dtype, Vector):
            return VectorVal((p.value,) * p.dtype.width)
        return p.value
    if isinstance(p, Lam):
        return lambda v: _eval(p.body, {**env, p.binder: v}, sigma)
    if isinstance(p, App):
        f = _eval(p.fn, env, sigma)
        return f(_eval(p.arg, env, sigma))
    if isinstance(p, (TLam, TApp)):
        body = p.body if isinstance(p, TLam) else p.fn
        return _eval(body, env, sigma)  # types are evaluation-irrelevant here
    if isinstance(p, PairP):
        return (_eval(p.fst, env, sigma), _eval(p.snd, env, sigma))
    if isinstance(p, Proj):
        v = _eval(p.target, env, sigma)
        return v[p.index - 1]
    raise EvalError(f"cannot evaluate {p!r}")


def _eval_prim(name, targs, args, env, sigma):
    ev = lambda q: _eval(q, env, sigma)  # noqa: E731

    if name in ARITH_OPS and len(args) == 1:
        a, b = ev(args[0])
        return apply_op(name, a, b)
    if name == "negate" and len(args) == 1:
        v = ev(args[0])
        if isinstance(v, VectorVal):
            return VectorVal(tuple(-x for x in v.items))
        return -v
    if name in MAP_FAMILY and len(args) == 2:
        f = ev(args[0])
        return [f(x) for x in ev(args[1])]
    if name in MAP_FAMILY and len(args) == 1:
        # partially applied map (as under a toGlobal/toLocal wrapper)
        f = ev(args[0])
        return lambda xs: [f(x) for x in xs]
    if name == "reduce" and len(args) == 3:
        f = ev(args[0])
        acc = ev(args[1])
        for x in ev(args[2]):  # left-to-right from the initial value
            acc = f(x)(acc)
        return acc
    if name == "zip" and len(args) == 2:
        xs, ys = ev(args[0]), ev(args[1])
        if len(xs) != len(ys):
            raise EvalError("zip of arrays of different lengths")
        return [(x, y) for x, y in zip(xs, ys)]
    if name == "split" and len(args) == 1:
        n = nat_eval(targs[0], sigma)
        flat = ev(args[0])
        assert len(flat) % n == 0
        return [flat[i * n:(i + 1) * n] for i in range(len(flat) // n)]
    if name == "join" and len(args) == 1:
        return [x for row in ev(args[0]) for x in row]
    if name == "pair" and len(args) == 2:
        return (ev(args[0]), ev(args[1]))
    if name == "fst" and len(args) == 1:
        return ev(args[0])[0]
    if name == "snd" and len(args) == 1:
        return ev(args[0])[1]
    if name in TO_SPACE and len(args) == 2:
        return ev(args[0])(ev(args[1]))  # semantically the identity wrapper
    if name == "idx" and len(args) == 2:
        xs = ev(args[0])
        i = ev(args[1])
        if not 0 <= i < len(xs):
            raise EvalError(f"index {i} out of bounds {len(xs)}")
        return xs[i]
    if name.startswith("asVector") and "Acc" not in name and len(args) == 1:
        w = int(name[len("asVector"):])
        flat = ev(args[0])
        assert len(flat) % w == 0
        return [VectorVal(tuple(flat[i * w:(i + 1) * w]))
                for i in range(len(flat) // w)]
    if name.startswith("asScalar") and "Acc" not in name and len(args) == 1:
        return [x for v in ev(args[0]) for x in v.items]
    return NotImplemented
