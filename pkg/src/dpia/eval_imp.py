"""Interpreter for purely imperative phrases (post Stage II).

Cells hold scalar leaves keyed by concrete paths (integer indices into
arrays, pair fields 0/1, vector lanes).  Uninitialized leaves read as zero.
parfor iterations run sequentially while recording per-iteration write
footprints; overlapping footprints raise RaceError, and reverse-order
re-execution provides an order-independence witness.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

from .eval_fn import Value, VectorVal, eval_phrase
from .nat import nat_eval
from .phrases import (App, Lam, PairP, Phrase, Prim, Proj, Var, unapply)
from .primitives import NEW_SPACE, PARFOR_FAMILY
from .types import Array, DataType, Idx, Num, Pair, Vector

Path = Tuple[int, ...]
LeafAddress = Tuple[str, Path]


class ExecError(Exception):
    pass


class RaceError(ExecError):
    def __init__(self, iter_a: int, iter_b: int, address: LeafAddress):
        super().__init__(
            f"data race: iterations {iter_a} and {iter_b} both write "
            f"{address[0]}{list(address[1])}")
        self.iterations = (iter_a, iter_b)
        self.address = address


def value_leaves(v: Value, d: DataType):
    """Yield (path, scalar) pairs for every leaf of v at type d."""
    if isinstance(d, (Num, Idx)):
        yield (), v
    elif isinstance(d, Vector):
        assert isinstance(v, VectorVal)
        for lane, x in enumerate(v.items):
            yield (lane,), x
    elif isinstance(d, Array):
        for i, item in enumerate(v):
            for p, x in value_leaves(item, d.elem):
                yield (i,) + p, x
    elif isinstance(d, Pair):
        for p, x in value_leaves(v[0], d.fst):
            yield (0,) + p, x
        for p, x in value_leaves(v[1], d.snd):
            yield (1,) + p, x
    else:
        raise ExecError(f"no leaves at type {d}")


@dataclass
class Cell:
    name: str
    dtype: DataType
    data: Dict[Path, Value] = field(default_factory=dict)

    def read(self, sigma: Dict[str, int], float_mode: bool = False) -> Value:
        zero = 0.0 if float_mode else 0

        def build(d: DataType, prefix: Path) -> Value:
            if isinstance(d, (Num, Idx)):
                return self.data.get(prefix, 0 if isinstance(d, Idx)
                                     else zero)
            if isinstance(d, Vector):
                return VectorVal(tuple(
                    self.data.get(prefix + (lane,), zero)
                    for lane in range(d.width)))
            if isinstance(d, Array):
                n = nat_eval(d.size, sigma)
                return [build(d.elem, prefix + (i,)) for i in range(n)]
            if isinstance(d, Pair):
                return (build(d.fst, prefix + (0,)),
                        build(d.snd, prefix + (1,)))
            raise ExecError(f"cannot read type {d}")

        return build(self.dtype, ())

    def snapshot(self) -> Dict[Path, Value]:
        return dict(self.data)


@dataclass
class AccRef:
    cell: Cell
    trans: Callable[[Path], Path]

    def index(self, i: int) -> "AccRef":
        return AccRef(self.cell, lambda p, i=i: self.trans((i,) + p))


@dataclass
class Store:
    cells: Dict[str, Cell] = field(default_factory=dict)
    parfor_reports: List[List[Set[LeafAddress]]] = field(default_factory=list)
    _fp_stack: List[Set[LeafAddress]] = field(default_factory=list)
    _fresh: "itertools.count" = field(default_factory=itertools.count)

    def allocate(self, base: str, dtype: DataType) -> Cell:
        name = f"{base}@{next(self._fresh)}"
        cell = Cell(name, dtype)
        self.cells[name] = cell
        return cell

    def free(self, cell: Cell):
        del self.cells[cell.name]

    def write_leaf(self, cell: Cell, path: Path, value):
        cell.data[path] = value
        for fp in self._fp_stack:
            fp.add((cell.name, path))

    def write(self, ref: AccRef, value: Value, d: DataType):
        for rel, scalar in value_leaves(value, d):
            self.write_leaf(ref.cell, ref.trans(rel), scalar)

    def flat_state(self) -> Dict[LeafAddress, Value]:
        return {(name, path): v for name, cell in self.cells.items()
                for path, v in cell.data.items()}


# environment bindings: input values, loop indices (plain Values),
# allocated variables (Cell), parfor iteration acceptors (AccRef)
Env = Dict[str, object]


def _value_env(env: Env, sigma, float_mode) -> Dict[str, Value]:
    out: Dict[str, Value] = {}
    for name, b in env.items():
        if isinstance(b, Cell):
            # variable pair: projection 2 (the expression side) reads it
            out[name] = (None, b.read(sigma, float_mode))
        elif isinstance(b, AccRef):
            continue
        else:
            out[name] = b  # plain value
    return out


def eval_exp(e: Phrase, env: Env, sigma, float_mode=False) -> Value:
    return eval_phrase(e, _value_env(env, sigma, float_mode), sigma)


def eval_acc(a: Phrase, env: Env, store: Store, sigma,
             float_mode=False) -> AccRef:
    if isinstance(a, Var):
        b = env.get(a.name)
        if isinstance(b, AccRef):
            return b
        if isinstance(b, Cell):
            return AccRef(b, lambda p: p)
        raise ExecError(f"not an acceptor: {a.name}")
    if isinstance(a, Proj) and a.index == 1:
        inner = a.target
        if isinstance(inner, Var) and isinstance(env.get(inner.name), Cell):
            cell = env[inner.name]
            return AccRef(cell, lambda p: p)
        raise ExecError(f"cannot take the acceptor side of {inner!r}")
    u = unapply(a)
    if u is None:
        raise ExecError(f"not an acceptor phrase: {a!r}")
    name, targs, args = u
    if name == "idxAcc" and len(args) == 2:
        ref = eval_acc(args[0], env, store, sigma, float_mode)
        i = eval_exp(args[1], env, sigma, float_mode)
        n = nat_eval(targs[0], sigma)
        if not 0 <= i < n:
            raise ExecError(f"acceptor index {i} out of bounds {n}")
        return ref.index(i)
    if name == "splitAcc" and len(args) == 1:
        n = nat_eval(targs[0], sigma)
        ref = eval_acc(args[0], env, store, sigma, float_mode)
        return AccRef(ref.cell,
                      lambda p: ref.trans((p[0] // n, p[0] % n) + p[1:]))
    if name == "joinAcc" and len(args) == 1:
        m = nat_eval(targs[1], sigma)
        ref = eval_acc(args[0], env, store, sigma, float_mode)
        return AccRef(ref.cell,
                      lambda p: ref.trans((p[0] * m + p[1],) + p[2:]))
    if name in ("pairAcc1", "pairAcc2") and len(args) == 1:
        fld = 0 if name == "pairAcc1" else 1
        ref = eval_acc(args[0], env, store, sigma, float_mode)
        return AccRef(ref.cell, lambda p: ref.trans((fld,) + p))
    if name in ("zipAcc1", "zipAcc2") and len(args) == 1:
        fld = 0 if name == "zipAcc1" else 1
        ref = eval_acc(args[0], env, store, sigma, float_mode)
        return AccRef(ref.cell, lambda p: ref.trans((p[0], fld) + p[1:]))
    if name.startswith("asVectorAcc") and len(args) == 1:
        w = int(name[len("asVectorAcc"):])
        ref = eval_acc(args[0], env, store, sigma, float_mode)
        return AccRef(ref.cell,
                      lambda p: ref.trans((p[0] // w, p[0] % w) + p[1:]))
    if name.startswith("asScalarAcc") and len(args) == 1:
        w = int(name[len("asScalarAcc"):])
        ref = eval_acc(args[0], env, store, sigma, float_mode)
        return AccRef(ref.cell,
                      lambda p: ref.trans((p[0] * w + p[1],) + p[2:]))
    raise ExecError(f"not an acceptor phrase: {a!r}")


def exec_comm(p: Phrase, env: Env, store: Store, sigma,
              float_mode: bool = False, reverse_parfor: bool = False):
    u = unapply(p)
    if u is None:
        raise ExecError(f"not a command: {p!r}")
    name, targs, args = u

    if name in ("skip", "barrier"):
        return
    if name == ";" and len(args) == 1 and isinstance(args[0], PairP):
        exec_comm(args[0].fst, env, store, sigma, float_mode, reverse_parfor)
        exec_comm(args[0].snd, env, store, sigma, float_mode, reverse_parfor)
        return
    if name == ":=" and len(args) == 1 and isinstance(args[0], PairP):
        a, e = args[0].fst, args[0].snd
        ref = eval_acc(a, env, store, sigma, float_mode)
        val = eval_exp(e, env, sigma, float_mode)
        store.write(ref, val, targs[0])
        return
    if name in NEW_SPACE and len(args) == 1:
        f = args[0]
        if not isinstance(f, Lam):
            raise ExecError(f"{name} body must be a lambda")
        cell = store.allocate(f.binder, targs[0])
        exec_comm(f.body, {**env, f.binder: cell}, store, sigma,
                  float_mode, reverse_parfor)
        store.free(cell)
        return
    if name == "for" and len(args) == 1:
        n = nat_eval(targs[0], sigma)
        f = args[0]
        if not isinstance(f, Lam):
            raise ExecError("for body must be a lambda")
        for i in range(n):
            exec_comm(f.body, {**env, f.binder: i}, store, sigma,
                      float_mode, reverse_parfor)
        return
    if name in PARFOR_FAMILY and len(args) == 2:
        n = nat_eval(targs[0], sigma)
        a, f = args
        ref = eval_acc(a, env, store, sigma, float_mode)
        if not (isinstance(f, Lam) and isinstance(f.body, Lam)):
            raise ExecError("parfor body must be a two-argument lambda")
        ivar, ovar, body = f.binder, f.body.binder, f.body.body
        footprints: List[Set[LeafAddress]] = [set() for _ in range(n)]
        order = range(n - 1, -1, -1) if reverse_parfor else range(n)
        for i in order:
            store._fp_stack.append(footprints[i])
            try:
                exec_comm(body, {**env, ivar: i, ovar: ref.index(i)},
                          store, sigma, float_mode, reverse_parfor)
            finally:
                store._fp_stack.pop()
        _check_disjoint(footprints)
        store.parfor_reports.append(footprints)
        return
    raise ExecError(f"no execution clause for command head {name!r}")


def _check_disjoint(footprints: List[Set[LeafAddress]]):
    seen: Dict[LeafAddress, int] = {}
    for i, fp in enumerate(footprints):
        for addr in fp:
            if addr in seen:
                raise RaceError(seen[addr], i, addr)
            seen[addr] = i


def check_race(footprints: List[Set[LeafAddress]]):
    """ok -> None; overlap -> RaceError raised with the clashing address."""
    _check_disjoint(footprints)


def run_program(p: Phrase, params: List[Tuple[str, DataType, str]],
                inputs: Dict[str, Value], sigma: Dict[str, int],
                float_mode: bool = False, reverse_parfor: bool = False
                ) -> Tuple[Dict[str, Value], Store]:
    """Execute a closed command.  params lists (name, data type, mode) with
    mode 'in' (read-only value), 'out' (acceptor cell) or 'var' (cell,
    initialized from inputs when present).  Returns final values of all
    cell-backed params and the store."""
    store = Store()
    env: Env = {}
    for name, dtype, mode in params:
        if mode == "in":
            env[name] = inputs[name]
        else:
            cell = Cell(name, dtype)  # stable address for state comparison
            store.cells[name] = cell
            if name in inputs:
                for path, scalar in value_leaves(inputs[name], dtype):
                    cell.data[path] = scalar
            if mode == "out":
                env[name] = AccRef(cell, lambda q: q)
            else:
                env[name] = cell
    exec_comm(p, env, store, sigma, float_mode, reverse_parfor)
    outs = {name: store.cells[name].read(sigma, float_mode)
            for name, dtype, mode in params if mode in ("out", "var")}
    return outs, store


# ----------------------------------------------------- C-tree interpretation
#
# The same module also runs the emitted C syntax tree directly, for
# differential testing of Stage III.  Variables live in a frame mapping
# names to Python values: scalars, nested lists for arrays (and for vectors
# in the scalar dialects), dicts keyed by field name for structs.  All loop
# kinds iterate their full range; stride-launch semantics are exercised
# separately at the phrase level.

from .c_ast import (CAssign, CBarrier, CBin, CBlock, CCall, CComment, CDecl,
                    CExpr, CExprStmt, CField, CFloat, CFor, CIndex, CInt,
                    CStmt, CStructDef, CUn, CVar, expr_str)
from .eval_fn import divide


def _c_zero(ctype: str, dims, structs: Dict[str, "CStructDef"],
            frame: Dict[str, object], float_mode: bool):
    if dims:
        n = _c_eval(dims[0], frame, structs, float_mode)
        return [_c_zero(ctype, dims[1:], structs, frame, float_mode)
                for _ in range(n)]
    if ctype.startswith("struct "):
        sd = structs[ctype[len("struct "):]]
        return {fname: _c_zero(ft, fdims, structs, frame, float_mode)
                for ft, fname, fdims in sd.fields}
    for scalar in ("float", "long", "int"):
        if ctype.startswith(scalar) and len(ctype) > len(scalar):
            width = int(ctype[len(scalar):])  # vector type, e.g. float4
            return [0.0 if float_mode else 0] * width
    return 0.0 if ctype == "float" and float_mode else 0


def _c_binop(op: str, a, b, float_mode: bool):
    if isinstance(a, list) or isinstance(b, list):
        if not isinstance(a, list):
            a = [a] * len(b)
        if not isinstance(b, list):
            b = [b] * len(a)
        return [_c_binop(op, x, y, float_mode) for x, y in zip(a, b)]
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return divide(a, b)
    if op == "%":
        return int(a) % int(b)
    raise ExecError(f"unknown C operator {op!r}")


def _c_eval(e: CExpr, frame, structs, float_mode: bool):
    if isinstance(e, CInt):
        return e.value
    if isinstance(e, CFloat):
        return e.value
    if isinstance(e, CVar):
        return frame[e.name]
    if isinstance(e, CBin):
        return _c_binop(e.op, _c_eval(e.left, frame, structs, float_mode),
                        _c_eval(e.right, frame, structs, float_mode),
                        float_mode)
    if isinstance(e, CUn):
        v = _c_eval(e.operand, frame, structs, float_mode)
        return [-x for x in v] if isinstance(v, list) else -v
    if isinstance(e, CIndex):
        base = _c_eval(e.base, frame, structs, float_mode)
        return base[_c_eval(e.index, frame, structs, float_mode)]
    if isinstance(e, CField):
        return _c_eval(e.base, frame, structs, float_mode)[e.fld]
    if isinstance(e, CCall):
        return _c_call(e, frame, structs, float_mode)
    raise ExecError(f"cannot evaluate C expression {expr_str(e)}")


def _c_call(e: CCall, frame, structs, float_mode: bool):
    if e.fn.startswith("vload"):
        w = int(e.fn[len("vload"):])
        i = _c_eval(e.args[0], frame, structs, float_mode)
        base = _c_eval(e.args[1], frame, structs, float_mode)
        return base[i * w:(i + 1) * w]
    if e.fn.startswith("(") and e.fn.endswith(")"):  # vector cast/splat
        for scalar in ("float", "long", "int"):
            inner = e.fn[1:-1]
            if inner.startswith(scalar) and len(inner) > len(scalar):
                w = int(inner[len(scalar):])
                return [_c_eval(e.args[0], frame, structs, float_mode)] * w
    raise ExecError(f"unknown C function {e.fn!r}")


def _c_store(lhs: CExpr, value, frame, structs, float_mode: bool):
    if isinstance(lhs, CVar):
        frame[lhs.name] = value
        return
    if isinstance(lhs, CIndex):
        container = _c_eval(lhs.base, frame, structs, float_mode)
        container[_c_eval(lhs.index, frame, structs, float_mode)] = value
        return
    if isinstance(lhs, CField):
        _c_eval(lhs.base, frame, structs, float_mode)[lhs.fld] = value
        return
    raise ExecError(f"not an l-value: {expr_str(lhs)}")


def exec_c(s: CStmt, frame: Dict[str, object],
           structs: Dict[str, CStructDef], float_mode: bool = False):
    if isinstance(s, (CComment, CBarrier)):
        return
    if isinstance(s, CBlock):
        inner = dict(frame)
        for st in s.stmts:
            exec_c(st, inner, structs, float_mode)
        # propagate writes to outer names (blocks only add declarations)
        for k in frame:
            frame[k] = inner[k]
        return
    if isinstance(s, CDecl):
        frame[s.name] = _c_zero(s.ctype, s.array_sizes, structs, frame,
                                float_mode)
        if s.init is not None:
            frame[s.name] = _c_eval(s.init, frame, structs, float_mode)
        return
    if isinstance(s, CAssign):
        _c_store(s.lhs, _c_eval(s.rhs, frame, structs, float_mode),
                 frame, structs, float_mode)
        return
    if isinstance(s, CExprStmt):
        e = s.expr
        if isinstance(e, CCall) and e.fn.startswith("vstore"):
            w = int(e.fn[len("vstore"):])
            val = _c_eval(e.args[0], frame, structs, float_mode)
            i = _c_eval(e.args[1], frame, structs, float_mode)
            base = _c_eval(e.args[2], frame, structs, float_mode)
            base[i * w:(i + 1) * w] = list(val)
            return
        _c_eval(e, frame, structs, float_mode)
        return
    if isinstance(s, CFor):
        n = _c_eval(s.bound, frame, structs, float_mode)
        inner = dict(frame)
        for i in range(n):
            inner[s.var] = i
            exec_c(s.body, inner, structs, float_mode)
        for k in frame:
            frame[k] = inner[k]
        return
    raise ExecError(f"cannot execute C statement {s!r}")


def run_c(stmts: List[CStmt], variables: Dict[str, object],
          structs: Optional[List[CStructDef]] = None,
          float_mode: bool = False) -> Dict[str, object]:
    """Execute a list of C statements.  variables maps every free C name
    to its initial value (mutated in place for arrays); the final frame is
    returned so scalar outputs can be read back."""
    frame = dict(variables)
    sdict = {sd.name: sd for sd in structs or []}
    for s in stmts:
        exec_c(s, frame, sdict, float_mode)
    return frame
