"""OpenCL backend: allocation hoisting, kernel emission and a sequential
work-item simulator.

Hoisting lifts every newGlobal/newLocal to the top of the program; a buffer
nested under parallel loops grows by one array layer per enclosing loop so
that every iteration owns a distinct slice.  Emission peels the hoisted
allocations into kernel arguments and renders the parallel loops as
get_*_id stride loops.  The simulator runs every (group, work-item) pair in
sequence under the stride semantics and checks that write footprints of
distinct work-items never overlap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .c_ast import CVar, program_text, CFunction, CBlock, CProgram
from .codegen_c import CodeGen
from .eval_imp import (AccRef, Cell, ExecError, LeafAddress, Store,
                       eval_acc, eval_exp, value_leaves)
from .eval_fn import Value
from .nat import NatExpr, nat_eval, nat_free_vars, nat_str
from .phrases import (App, Lam, PairP, Phrase, Prim, Proj, Var, apply_prim,
                      beta_normalize, children, substitute, subtree_iter,
                      unapply)
from .primitives import NEW_SPACE, PARFOR_FAMILY
from .types import Array, DataType, Num


class OpenCLError(Exception):
    pass


# loop level per parfor variant; plain parfor counts as global
_LOOP_LEVEL = {"parfor": "global", "parforGlobal": "global",
               "parforWorkgroup": "workgroup", "parforLocal": "local"}


# --------------------------------------------------------------- hoisting

@dataclass(frozen=True)
class HoistedBuffer:
    name: str
    dtype: DataType
    space: str  # "global" or "local"


class _Hoister:
    def __init__(self):
        self.buffers: List[HoistedBuffer] = []
        self._counter = 0

    def fresh(self, base: str) -> str:
        self._counter += 1
        return f"{base}_h{self._counter}"

    def hoist(self, p: Phrase, loops: List[Tuple[str, str, NatExpr]]
              ) -> Phrase:
        """loops: (level, loop variable, trip count), outermost first."""
        u = unapply(p)
        if u is not None:
            name, targs, args = u
            if name in ("newGlobal", "newLocal") and len(args) == 1:
                return self._lift(name, targs[0], args[0], loops)
            if name in PARFOR_FAMILY and len(args) == 2:
                a, f = args
                if isinstance(f, Lam) and isinstance(f.body, Lam):
                    level = _LOOP_LEVEL[name]
                    inner = loops + [(level, f.binder, targs[0])]
                    body = self.hoist(f.body.body, inner)
                    f2 = Lam(f.binder, Lam(f.body.binder, body,
                                           f.body.arg_type), f.arg_type)
                    return apply_prim(name, targs, [a, f2])
            if name == "for" and len(args) == 1 and isinstance(args[0], Lam):
                f = args[0]
                # conservative: a buffer inside a sequential loop also gets
                # one slice per iteration
                inner = loops + [("seq", f.binder, targs[0])]
                body = self.hoist(f.body, inner)
                return apply_prim("for", targs,
                                  [Lam(f.binder, body, f.arg_type)])
        if isinstance(p, Lam):
            return Lam(p.binder, self.hoist(p.body, loops), p.arg_type)
        if isinstance(p, App):
            return App(self.hoist(p.fn, loops), self.hoist(p.arg, loops))
        if isinstance(p, PairP):
            return PairP(self.hoist(p.fst, loops), self.hoist(p.snd, loops))
        if isinstance(p, Proj):
            return Proj(self.hoist(p.target, loops), p.index)
        return p

    def _lift(self, prim_name, d, f, loops) -> Phrase:
        if not isinstance(f, Lam):
            raise OpenCLError(f"{prim_name} body must be a lambda")
        space = NEW_SPACE[prim_name]
        if space == "local":
            if any(level == "global" for level, _, _ in loops):
                raise OpenCLError(
                    "newLocal under a global-level loop would share one "
                    "local buffer across work-groups")
            # local memory is per work-group: the work-group dimension does
            # not contribute a slice layer
            chain = [lp for lp in loops if lp[0] != "workgroup"]
        else:
            chain = list(loops)

        dtype = d
        for _, _, n in reversed(chain):
            dtype = Array(n, dtype)
        buf = self.fresh(f.binder)
        self.buffers.append(HoistedBuffer(buf, dtype, space))

        a: Phrase = Proj(Var(buf), 1)
        e: Phrase = Proj(Var(buf), 2)
        layer = dtype
        for _, var, n in chain:
            layer = layer.elem
            a = apply_prim("idxAcc", [n, layer], [a, Var(var)])
            e = apply_prim("idx", [n, layer], [e, Var(var)])
        body = substitute(f.body, f.binder, PairP(a, e))
        return self.hoist(body, loops)


def hoist_allocations(p: Phrase) -> Tuple[Phrase, List[HoistedBuffer]]:
    """Lift every newGlobal/newLocal to the top of the program.  The result
    still carries the allocations, now as outermost new wrappers, so it
    remains a closed executable command."""
    h = _Hoister()
    body = beta_normalize(h.hoist(p, []))
    prim = {"global": "newGlobal", "local": "newLocal"}
    for buf in reversed(h.buffers):
        body = apply_prim(prim[buf.space], [buf.dtype],
                          [Lam(buf.name, body)])
    return body, h.buffers


# ------------------------------------------------------------------- lint

def lint_hierarchy(p: Phrase) -> List[str]:
    """Structural legality warnings for the OpenCL thread hierarchy."""
    warnings: List[str] = []

    def walk(q: Phrase, enclosing: List[str]):
        u = unapply(q)
        if u is not None and u[0] in PARFOR_FAMILY and len(u[2]) == 2:
            level = _LOOP_LEVEL[u[0]]
            if level == "workgroup" and "local" in enclosing:
                warnings.append("work-group-level loop nested inside a "
                                "work-item-level loop")
            if level == "workgroup" and "workgroup" in enclosing:
                warnings.append("nested work-group-level loops")
            if level == "workgroup" and "global" in enclosing:
                warnings.append("work-group-level loop nested inside a "
                                "global-level loop")
            if level == "local" and "local" in enclosing:
                warnings.append("nested work-item-level loops")
            if level == "global" and \
                    ("workgroup" in enclosing or "local" in enclosing):
                warnings.append("global-level loop nested inside the "
                                "work-group hierarchy")
            if level == "global" and "global" in enclosing:
                warnings.append("nested global-level loops")
            if level == "local" and "workgroup" not in enclosing:
                warnings.append("work-item-level loop with no enclosing "
                                "work-group-level loop")
            a, f = u[2]
            walk(a, enclosing)
            walk(f, enclosing + [level])
            return
        for child in children(q):
            walk(child, enclosing)

    walk(p, [])
    return warnings


def fully_parallel(p: Phrase) -> bool:
    """True when every assignment is distributed across work-items, i.e.
    lies inside a global- or local-level loop.  A write outside those (even
    one inside only a work-group-level loop) would be executed redundantly
    by every work-item under the stride semantics."""

    def walk(q: Phrase, inside: bool) -> bool:
        u = unapply(q)
        if u is not None:
            if u[0] == ":=" and not inside:
                return False
            if u[0] in PARFOR_FAMILY and len(u[2]) == 2:
                a, f = u[2]
                per_item = _LOOP_LEVEL[u[0]] in ("global", "local")
                return walk(a, inside) and walk(f, inside or per_item)
        return all(walk(c, inside) for c in children(q))

    return walk(p, False)


def opencl_legal(p: Phrase) -> bool:
    return not lint_hierarchy(p) and fully_parallel(p)


# ---------------------------------------------------------------- barriers

def _mentions(p: Phrase, name: str, proj: int) -> bool:
    return any(isinstance(s, Proj) and s.index == proj
               and isinstance(s.target, Var) and s.target.name == name
               for s in subtree_iter(p))


def insert_barriers(p: Phrase, local_bufs: List[str]) -> Phrase:
    """Conservatively place a work-group barrier between a command writing
    a local buffer and a following command reading it."""
    u = unapply(p)
    if u is not None:
        name, targs, args = u
        if name == ";" and len(args) == 1:
            c1 = insert_barriers(args[0].fst, local_bufs)
            c2 = insert_barriers(args[0].snd, local_bufs)
            needs = any(_mentions(c1, b, 1) and _mentions(c2, b, 2)
                        for b in local_bufs)
            if needs:
                c2 = apply_prim(";", [], [PairP(Prim("barrier"), c2)])
            return apply_prim(";", [], [PairP(c1, c2)])
        if name in NEW_SPACE and len(args) == 1 and isinstance(args[0], Lam):
            f = args[0]
            bufs = local_bufs + ([f.binder] if name == "newLocal" else [])
            return apply_prim(name, targs,
                              [Lam(f.binder,
                                   insert_barriers(f.body, bufs),
                                   f.arg_type)])
        if name == "for" and len(args) == 1 and isinstance(args[0], Lam):
            f = args[0]
            return apply_prim(name, targs,
                              [Lam(f.binder,
                                   insert_barriers(f.body, local_bufs),
                                   f.arg_type)])
        if name in PARFOR_FAMILY and len(args) == 2 \
                and isinstance(args[1], Lam) \
                and isinstance(args[1].body, Lam):
            a, f = args
            inner = insert_barriers(f.body.body, local_bufs)
            f2 = Lam(f.binder, Lam(f.body.binder, inner, f.body.arg_type),
                     f.arg_type)
            return apply_prim(name, targs, [a, f2])
    return p


# ---------------------------------------------------------------- emission

@dataclass
class KernelSignature:
    outputs: List[Tuple[str, DataType]]
    inputs: List[Tuple[str, DataType]]
    buffers: List[HoistedBuffer]
    sizes: List[str]

    def params(self, scalar: str) -> List[str]:
        out = [f"global {scalar} *{n}" for n, _ in self.outputs]
        out += [f"const global {scalar} *restrict {n}"
                for n, _ in self.inputs]
        out += [f"{b.space} {scalar} *{b.name}" for b in self.buffers]
        out += [f"int {n}" for n in self.sizes]
        return out


def emit_kernel(p: Phrase,
                outputs: List[Tuple[str, DataType]],
                inputs: List[Tuple[str, DataType]],
                float_mode: bool = True,
                name: str = "KERNEL",
                init_new: bool = False,
                simplify: bool = True) -> Tuple[str, KernelSignature]:
    """Render a hoisted purely imperative command as an OpenCL kernel.
    p may still carry the hoisted allocations as outermost new wrappers;
    they are peeled off into kernel arguments here."""
    body = p
    buffers: List[HoistedBuffer] = []
    while True:
        u = unapply(body)
        if u is None or u[0] not in ("newGlobal", "newLocal") \
                or not isinstance(u[2][0], Lam):
            break
        f = u[2][0]
        buffers.append(HoistedBuffer(f.binder, u[1][0], NEW_SPACE[u[0]]))
        body = f.body
    for s in subtree_iter(body):
        if isinstance(s, Prim) and s.name in ("newGlobal", "newLocal"):
            raise OpenCLError(f"un-hoisted {s.name} in kernel body")

    body = insert_barriers(
        body, [b.name for b in buffers if b.space == "local"])

    sizes = sorted({v for _, d in outputs + inputs
                    for v in _size_vars(d)}
                   | {v for b in buffers for v in _size_vars(b.dtype)})
    sig = KernelSignature(outputs, inputs, buffers, sizes)

    cg = CodeGen(float_mode=float_mode, dialect="opencl",
                 simplify=simplify, init_new=init_new)
    env = {n: CVar(n) for n, _ in outputs + inputs}
    env.update({b.name: CVar(b.name) for b in buffers})
    # every kernel argument is a flat pointer
    for n, d in outputs + inputs + [(b.name, b.dtype) for b in buffers]:
        dims = cg.ctype_of(d)[1]
        if dims:
            cg.flat_dims[n] = list(dims)
    stmts = cg.comm(body, env)

    scalar = "float" if float_mode else "long"
    fn = CFunction(name, tuple(sig.params(scalar)),
                   CBlock(tuple(stmts)), kernel=True)
    prog = CProgram(structs=sorted(cg.structs.values(),
                                   key=lambda s: s.name),
                    functions=[fn])
    return program_text(prog, "opencl"), sig


def _size_vars(d: DataType) -> Set[str]:
    out: Set[str] = set()
    if isinstance(d, Array):
        out |= set(nat_free_vars(d.size))
        out |= _size_vars(d.elem)
    return out


# -------------------------------------------------------------- simulation

@dataclass
class WorkItemRace(ExecError):
    item_a: Tuple[int, int]
    item_b: Tuple[int, int]
    address: LeafAddress

    def __str__(self):
        return (f"cross-work-item write overlap: items {self.item_a} and "
                f"{self.item_b} both write "
                f"{self.address[0]}{list(self.address[1])}")


class _KernelRun:
    def __init__(self, store: Store, num_groups: int, local_size: int,
                 sigma, float_mode: bool):
        self.store = store
        self.G = num_groups
        self.L = local_size
        self.sigma = sigma
        self.float_mode = float_mode
        self.g = 0
        self.l = 0

    def _stride_range(self, level: str, n: int):
        if level == "workgroup":
            return range(self.g, n, self.G)
        if level == "local":
            return range(self.l, n, self.L)
        gid = self.g * self.L + self.l
        return range(gid, n, self.G * self.L)

    def exec(self, p: Phrase, env: Dict[str, object]):
        u = unapply(p)
        if u is None:
            raise ExecError(f"not a command: {p!r}")
        name, targs, args = u
        if name in ("skip", "barrier"):
            return
        if name == ";" and len(args) == 1:
            self.exec(args[0].fst, env)
            self.exec(args[0].snd, env)
            return
        if name == ":=" and len(args) == 1:
            ref = eval_acc(args[0].fst, env, self.store, self.sigma,
                           self.float_mode)
            val = eval_exp(args[0].snd, env, self.sigma, self.float_mode)
            self.store.write(ref, val, targs[0])
            return
        if name in NEW_SPACE and len(args) == 1:
            f = args[0]
            cell = self.store.allocate(f.binder, targs[0])
            self.exec(f.body, {**env, f.binder: cell})
            self.store.free(cell)
            return
        if name == "for" and len(args) == 1:
            f = args[0]
            for i in range(nat_eval(targs[0], self.sigma)):
                self.exec(f.body, {**env, f.binder: i})
            return
        if name in PARFOR_FAMILY and len(args) == 2:
            a, f = args
            n = nat_eval(targs[0], self.sigma)
            ref = eval_acc(a, env, self.store, self.sigma, self.float_mode)
            ivar, ovar, body = f.binder, f.body.binder, f.body.body
            for i in self._stride_range(_LOOP_LEVEL[name], n):
                self.exec(body, {**env, ivar: i, ovar: ref.index(i)})
            return
        raise ExecError(f"no kernel clause for command head {name!r}")


def simulate_kernel(p: Phrase,
                    params: List[Tuple[str, DataType, str]],
                    inputs: Dict[str, Value],
                    launch: Tuple[int, int],
                    sigma: Optional[Dict[str, int]] = None,
                    float_mode: bool = False) -> Dict[str, Value]:
    """Run a kernel-form command for every (group, local) id pair under the
    stride-loop semantics and check cross-work-item footprint disjointness.
    Accepts both the pre-hoist form (nested allocations) and the hoisted
    form (top-level allocations, peeled here and shared appropriately)."""
    G, L = launch
    if G < 1 or L < 1:
        raise ValueError("launch parameters must be positive")
    sigma = sigma or {}
    store = Store()
    env: Dict[str, object] = {}
    outs: List[str] = []
    for name, dtype, mode in params:
        if mode == "in":
            env[name] = inputs[name]
        else:
            cell = Cell(name, dtype)
            store.cells[name] = cell
            if name in inputs:
                for path, scalar in value_leaves(inputs[name], dtype):
                    cell.data[path] = scalar
            env[name] = AccRef(cell, lambda q: q) if mode == "out" else cell
            outs.append(name)

    # peel top-level (hoisted) allocations: global buffers shared by the
    # whole launch, local buffers one per work-group
    body = p
    per_group: List[Tuple[str, DataType]] = []
    while True:
        u = unapply(body)
        if u is None or u[0] not in ("newGlobal", "newLocal") \
                or not isinstance(u[2][0], Lam):
            break
        f = u[2][0]
        if u[0] == "newGlobal":
            cell = Cell(f.binder, u[1][0])
            store.cells[cell.name] = cell
            env[f.binder] = cell
        else:
            per_group.append((f.binder, u[1][0]))
        body = f.body

    local_cells = {(n, g): Cell(f"{n}@wg{g}", d)
                   for n, d in per_group for g in range(G)}
    for cell in local_cells.values():
        store.cells[cell.name] = cell

    run = _KernelRun(store, G, L, sigma, float_mode)
    footprints: Dict[Tuple[int, int], Set[LeafAddress]] = {}
    for g in range(G):
        for l in range(L):
            run.g, run.l = g, l
            item_env = dict(env)
            for n, _ in per_group:
                item_env[n] = local_cells[(n, g)]
            fp: Set[LeafAddress] = set()
            store._fp_stack.append(fp)
            try:
                run.exec(body, item_env)
            finally:
                store._fp_stack.pop()
            footprints[(g, l)] = fp

    seen: Dict[LeafAddress, Tuple[int, int]] = {}
    for item, fp in sorted(footprints.items()):
        for addr in fp:
            if addr in seen:
                raise WorkItemRace(seen[addr], item, addr)
            seen[addr] = item

    return {n: store.cells[n].read(sigma, float_mode) for n in outs}
