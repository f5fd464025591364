"""Differential-testing engine: seed-deterministic generation of random
well-typed functional programs and a composite oracle running them through
every stage of the pipeline.

All fuzzing uses exact integer values; the only division generated is by a
nonzero literal, so every backend computes bit-identical results.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .c_ast import CVar
from .checker import DpiaTypeError, type_check
from .codegen_c import CodeGen
from .eval_fn import Value, VectorVal, eval_phrase
from .eval_imp import run_c, run_program, value_leaves
from .lower import stage2
from .nat import nat
from .opencl import (OpenCLError, hoist_allocations, opencl_legal,
                     simulate_kernel)
from .parser import SourceProgram
from .phrases import (Lam, Lit, Phrase, Prim, Var, apply_prim, subtree_iter)
from .primitives import MAP_FAMILY, MAPI_FAMILY, TO_SPACE
from .translate import translate_program
from .types import (AccT, Array, COMM, DataType, ExpT, Idx, Num, Pair,
                    PhraseType, Vector)

_SIZES = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64)
_WIDTHS = (2, 4, 8)


# -------------------------------------------------------------- generation

class _Gen:
    def __init__(self, rng: random.Random, depth: int, max_size: int):
        self.rng = rng
        self.depth = depth
        self.max_size = max_size
        self.params: List[Tuple[str, DataType]] = []

    def size(self, at_most: Optional[int] = None) -> int:
        cap = min(self.max_size, at_most or self.max_size)
        choices = [s for s in _SIZES if s <= cap] or [1]
        return self.rng.choice(choices)

    def param(self, d: DataType) -> Phrase:
        name = f"p{len(self.params)}"
        self.params.append((name, d))
        return Var(name)

    def dtype(self, depth: int) -> DataType:
        r = self.rng.random()
        if depth <= 0 or r < 0.6:
            return Num()
        if r < 0.85:
            return Pair(self.dtype(0), self.dtype(0))
        return Array(nat(self.size(8)), self.dtype(0))

    # environment: lambda-bound names in scope, name -> data type
    def exp(self, d: DataType, depth: int, env: Dict[str, DataType]
            ) -> Phrase:
        if isinstance(d, Array):
            return self._array(d, depth, env)
        if isinstance(d, Pair):
            return self._pair(d, depth, env)
        if isinstance(d, Vector):
            return self._vector(d, depth, env)
        return self._scalar(d, depth, env)

    def _from_env(self, d: DataType, env) -> Optional[Phrase]:
        hits = [n for n, t in env.items() if t == d]
        if hits and self.rng.random() < 0.7:
            return Var(self.rng.choice(hits))
        return None

    def _leaf(self, d: DataType, env) -> Phrase:
        hit = self._from_env(d, env)
        if hit is not None:
            return hit
        if isinstance(d, Num):
            if self.rng.random() < 0.5:
                return Lit(self.rng.randint(-9, 9))
            return self.param(d)
        if isinstance(d, Vector):
            return Lit(self.rng.randint(-9, 9), d)
        return self.param(d)

    def _scalar(self, d: Num, depth: int, env) -> Phrase:
        if depth <= 0:
            return self._leaf(d, env)
        pick = self.rng.choice(
            ["leaf", "arith", "arith", "negate", "reduce", "fstsnd", "idx"])
        if pick == "arith":
            op = self.rng.choice(["+", "-", "*", "/"])
            e1 = self.exp(d, depth - 1, env)
            if op == "/":
                e2: Phrase = Lit(self.rng.choice([1, 2, 3, 5, 7]))
            else:
                e2 = self.exp(d, depth - 1, env)
            return apply_prim(op, [d], [self._pairp(e1, e2)])
        if pick == "negate":
            return apply_prim("negate", [d],
                              [self.exp(d, depth - 1, env)])
        if pick == "reduce":
            return self._reduce(d, depth, env)
        if pick == "fstsnd":
            other = self.dtype(0)
            which = self.rng.choice(["fst", "snd"])
            pd = Pair(d, other) if which == "fst" else Pair(other, d)
            src = self.exp(pd, depth - 1, env)
            return apply_prim(which, [pd.fst, pd.snd], [src])
        if pick == "idx":
            n = self.size(8)
            src = self.exp(Array(nat(n), d), depth - 1, env)
            i = Lit(self.rng.randrange(n), Idx(nat(n)))
            return apply_prim("idx", [nat(n), d], [src, i])
        return self._leaf(d, env)

    def _reduce(self, d2: DataType, depth: int, env) -> Phrase:
        n = self.size(16)
        d1 = self.dtype(depth - 1)
        x, a = f"x{self.rng.randrange(10**6)}", f"a{self.rng.randrange(10**6)}"
        inner = dict(env)
        inner[x] = d1
        inner[a] = d2
        body = self.exp(d2, depth - 1, inner)
        f = Lam(x, Lam(a, body, arg_type=ExpT(d2)), arg_type=ExpT(d1))
        init = self.exp(d2, 0, env)
        src = self.exp(Array(nat(n), d1), depth - 1, env)
        return apply_prim("reduce", [nat(n), d1, d2], [f, init, src])

    def _pair(self, d: Pair, depth: int, env) -> Phrase:
        if depth <= 0:
            return self._leaf(d, env)
        hit = self._from_env(d, env)
        if hit is not None:
            return hit
        e1 = self.exp(d.fst, depth - 1, env)
        e2 = self.exp(d.snd, depth - 1, env)
        return apply_prim("pair", [d.fst, d.snd], [e1, e2])

    def _vector(self, d: Vector, depth: int, env) -> Phrase:
        hit = self._from_env(d, env)
        if hit is not None or depth <= 0:
            return hit if hit is not None else self._leaf(d, env)
        if self.rng.random() < 0.5:
            op = self.rng.choice(["+", "-", "*"])
            return apply_prim(op, [d],
                              [self._pairp(self.exp(d, depth - 1, env),
                                           self.exp(d, depth - 1, env))])
        return self._leaf(d, env)

    def _array(self, d: Array, depth: int, env) -> Phrase:
        n = _const(d.size)
        elem = d.elem
        if depth <= 0:
            return self._leaf(d, env)
        options = ["leaf", "map", "map"]
        if isinstance(elem, Pair):
            options.append("zip")
        if isinstance(elem, Array):
            options.append("split")
        factors = [a for a in range(2, n + 1)
                   if n % a == 0 and not isinstance(elem, (Array, Vector))]
        if factors:
            options.append("join")
        if isinstance(elem, Num):
            widths = [w for w in _WIDTHS if n % w == 0 and n // w >= 1]
            if widths:
                options.append("asScalar")
        if isinstance(elem, Vector):
            options.append("asVector")
        pick = self.rng.choice(options)

        if pick == "map":
            d1 = self.dtype(depth - 1)
            x = f"x{self.rng.randrange(10**6)}"
            inner = dict(env)
            inner[x] = d1
            body = self.exp(elem, depth - 1, inner)
            f = Lam(x, body, arg_type=ExpT(d1))
            src = self.exp(Array(d.size, d1), depth - 1, env)
            variant = self.rng.choice(MAP_FAMILY)
            if self.rng.random() < 0.25:
                wrapper = self.rng.choice(list(TO_SPACE))
                partial = apply_prim(variant, [d.size, d1, elem], [f])
                return apply_prim(wrapper,
                                  [Array(d.size, d1), d],
                                  [partial, src])
            return apply_prim(variant, [d.size, d1, elem], [f, src])
        if pick == "zip":
            e1 = self.exp(Array(d.size, elem.fst), depth - 1, env)
            e2 = self.exp(Array(d.size, elem.snd), depth - 1, env)
            return apply_prim("zip", [d.size, elem.fst, elem.snd], [e1, e2])
        if pick == "split":
            m = _const(elem.size)
            src = self.exp(Array(nat(n * m), elem.elem), depth - 1, env)
            return apply_prim("split", [nat(m), nat(n), elem.elem], [src])
        if pick == "join":
            a = self.rng.choice(factors)
            b = n // a
            src = self.exp(Array(nat(a), Array(nat(b), elem)),
                           depth - 1, env)
            return apply_prim("join", [nat(a), nat(b), elem], [src])
        if pick == "asScalar":
            widths = [w for w in _WIDTHS if n % w == 0]
            w = self.rng.choice(widths)
            src = self.exp(Array(nat(n // w), Vector(w)), depth - 1, env)
            return apply_prim(f"asScalar{w}", [nat(n // w)], [src])
        if pick == "asVector":
            w = elem.width
            src = self.exp(Array(nat(n * w), Num()), depth - 1, env)
            return apply_prim(f"asVector{w}", [nat(n)], [src])
        return self._leaf(d, env)

    @staticmethod
    def _pairp(a: Phrase, b: Phrase):
        from .phrases import PairP
        return PairP(a, b)


def _const(e) -> int:
    from .nat import nat_const_value
    v = nat_const_value(e)
    assert v is not None
    return v


def generate_program(seed: int, depth: int = 4, sizes: int = 64
                     ) -> SourceProgram:
    """Seed-deterministic random well-typed closed functional program."""
    rng = random.Random(seed)
    g = _Gen(rng, depth, sizes)
    out_shape = rng.random()
    if out_shape < 0.65:
        d: DataType = Array(nat(g.size()), g.dtype(1))
    elif out_shape < 0.85:
        d = Num()
    else:
        d = Pair(g.dtype(0), g.dtype(0))
    body = g.exp(d, depth, {})
    return SourceProgram(nat_params=[],
                         params=[(nm, ExpT(t)) for nm, t in g.params],
                         body=body, body_type=ExpT(d))


def random_value(rng: random.Random, d: DataType) -> Value:
    if isinstance(d, Num):
        return rng.randint(-9, 9)
    if isinstance(d, Idx):
        return rng.randrange(_const(d.bound))
    if isinstance(d, Vector):
        return VectorVal(tuple(rng.randint(-9, 9)
                               for _ in range(d.width)))
    if isinstance(d, Array):
        return [random_value(rng, d.elem) for _ in range(_const(d.size))]
    if isinstance(d, Pair):
        return (random_value(rng, d.fst), random_value(rng, d.snd))
    raise ValueError(f"no values at type {d}")


def random_inputs(sp: SourceProgram, seed: int) -> Dict[str, Value]:
    rng = random.Random(seed ^ 0x5EED)
    return {name: random_value(rng, t.data) for name, t in sp.params}


# -------------------------------------------------------- value conversion

def zero_c_value(d: DataType):
    if isinstance(d, (Num, Idx)):
        return 0
    if isinstance(d, Vector):
        return [0] * d.width
    if isinstance(d, Array):
        return [zero_c_value(d.elem) for _ in range(_const(d.size))]
    if isinstance(d, Pair):
        return {"x1": zero_c_value(d.fst), "x2": zero_c_value(d.snd)}
    raise ValueError(f"no C values at type {d}")


def to_c_value(v: Value, d: DataType):
    if isinstance(d, (Num, Idx)):
        return v
    if isinstance(d, Vector):
        return list(v.items)
    if isinstance(d, Array):
        return [to_c_value(x, d.elem) for x in v]
    if isinstance(d, Pair):
        return {"x1": to_c_value(v[0], d.fst), "x2": to_c_value(v[1], d.snd)}
    raise ValueError(f"no C values at type {d}")


def from_c_value(v, d: DataType) -> Value:
    if isinstance(d, (Num, Idx)):
        return v
    if isinstance(d, Vector):
        return VectorVal(tuple(v))
    if isinstance(d, Array):
        return [from_c_value(x, d.elem) for x in v]
    if isinstance(d, Pair):
        return (from_c_value(v["x1"], d.fst), from_c_value(v["x2"], d.snd))
    raise ValueError(f"no C values at type {d}")


# ------------------------------------------------------------------ oracle

@dataclass
class CheckReport:
    ok: bool
    failures: List[str] = field(default_factory=list)
    opencl_checked: bool = False

    def fail(self, msg: str):
        self.ok = False
        self.failures.append(msg)


def _count_prims(p: Phrase, names) -> int:
    return sum(1 for s in subtree_iter(p)
               if isinstance(s, Prim) and s.name in names)


def differential_check(sp: SourceProgram,
                       inputs: Optional[Dict[str, Value]] = None,
                       seed: int = 0) -> CheckReport:
    """Run one program through every stage and compare all results."""
    rep = CheckReport(ok=True)
    if inputs is None:
        inputs = random_inputs(sp, seed)
    delta = sp.body_type.data

    # reference semantics
    ref = eval_phrase(sp.body, dict(inputs), {})

    # type check + Stage I type preservation
    try:
        type_check(sp.body, delta=sp.delta, pi=sp.pi, gamma=sp.gamma)
    except DpiaTypeError as e:
        rep.fail(f"source does not type-check: {e}")
        return rep
    stage1 = translate_program(sp.body, delta, out="out")
    try:
        t1, _ = type_check(stage1, delta=sp.delta, pi=sp.pi,
                           gamma={**sp.gamma, "out": AccT(delta)})
        if t1 != COMM:
            rep.fail(f"Stage I output has type {t1}, not comm")
    except DpiaTypeError as e:
        rep.fail(f"Stage I output does not re-check: {e}")
        return rep

    # strategy preservation: one intermediate per source combinator.
    # Hierarchy-annotated variants must match exactly; plain map may gain
    # extra mapI nodes from generalized assignment at array types.
    for src_name, tgt_name in (("mapGlobal", "mapIGlobal"),
                               ("mapWorkgroup", "mapIWorkgroup"),
                               ("mapLocal", "mapILocal"),
                               ("mapSeq", "mapISeq")):
        if _count_prims(sp.body, {src_name}) != \
                _count_prims(stage1, {tgt_name}):
            rep.fail(f"{src_name}/{tgt_name} count mismatch "
                     "(strategy not preserved)")
    if _count_prims(stage1, {"mapI"}) < _count_prims(sp.body, {"map"}):
        rep.fail("map/mapI count mismatch (strategy not preserved)")
    if _count_prims(stage1, {"reduceI"}) != \
            _count_prims(sp.body, {"reduce"}):
        rep.fail("reduce/reduceI count mismatch (strategy not preserved)")

    # Stage II coincidence, forward and reverse parfor order
    imp = stage2(stage1)
    params = [("out", delta, "out")] + \
        [(n, t.data, "in") for n, t in sp.params]
    try:
        fwd, _ = run_program(imp, params, inputs, {})
        rev, _ = run_program(imp, params, inputs, {}, reverse_parfor=True)
    except Exception as e:  # noqa: BLE001 - report any executor failure
        rep.fail(f"imperative execution failed: {e}")
        return rep
    if fwd["out"] != ref:
        rep.fail("Stage II execution disagrees with functional semantics")
    if rev["out"] != ref:
        rep.fail("reverse-order parfor execution disagrees")

    # Stage III on the C tree
    cg = CodeGen(float_mode=False, dialect="pseudo")
    env = {"out": CVar("out")}
    env.update({n: CVar(n) for n, _ in sp.params})
    stmts = cg.comm(imp, env)
    frame = {"out": zero_c_value(delta)}
    frame.update({n: to_c_value(inputs[n], t.data) for n, t in sp.params})
    frame = run_c(stmts, frame, list(cg.structs.values()))
    if from_c_value(frame["out"], delta) != ref:
        rep.fail("emitted C tree disagrees with functional semantics")

    # OpenCL pipeline, when the hierarchy is legal
    try:
        s1 = translate_program(sp.body, delta, out="out",
                               default_space="global")
        imp_cl = stage2(s1, accum_space="private")
        if opencl_legal(imp_cl):
            hoisted, _bufs = hoist_allocations(imp_cl)
            sim = simulate_kernel(hoisted, params, inputs, (2, 2), {})
            if sim["out"] != ref:
                rep.fail("kernel simulation disagrees")
            rep.opencl_checked = True
    except OpenCLError:
        pass  # program not expressible as a single kernel; skip

    return rep


# ------------------------------------------------------------------- fuzz

@dataclass
class FuzzResult:
    seeds: int
    passed: int
    failed: List[Tuple[int, List[str]]]
    opencl_checked: int
    coverage: Counter


def shrink(seed: int, depth: int, sizes: int) -> SourceProgram:
    """Return a failing program for this seed no larger than the original,
    by re-generating at halved size caps while the failure persists."""
    best = generate_program(seed, depth, sizes)
    s = sizes // 2
    while s >= 1:
        cand = generate_program(seed, depth, s)
        if not differential_check(cand, seed=seed).ok:
            best = cand
        s //= 2
    return best


def fuzz(seeds: int = 1000, depth: int = 4, sizes: int = 64,
         start: int = 0) -> FuzzResult:
    failed: List[Tuple[int, List[str]]] = []
    cover: Counter = Counter()
    opencl_n = 0
    for seed in range(start, start + seeds):
        sp = generate_program(seed, depth, sizes)
        for s in subtree_iter(sp.body):
            if isinstance(s, Prim):
                cover[s.name] += 1
        rep = differential_check(sp, seed=seed)
        if rep.opencl_checked:
            opencl_n += 1
        if not rep.ok:
            failed.append((seed, rep.failures))
    return FuzzResult(seeds=seeds, passed=seeds - len(failed),
                      failed=failed, opencl_checked=opencl_n,
                      coverage=cover)
