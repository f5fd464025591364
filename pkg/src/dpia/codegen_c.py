"""Translation Stage III: purely imperative phrases to the C tree.

Commands become statements, acceptors l-values, expressions r-values.  The
layout combinators are resolved by threading an access path: a list of
index steps ("i", CExpr) and pair-field steps ("f", 1|2) agreeing with the
type being translated.

Vector handling is dialect-dependent: the scalar dialects treat a vector
like an array of its lanes; the opencl dialect keeps vectors opaque and
turns whole-vector reads/writes through asVector/asScalarAcc into
vload/vstore calls.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

from .c_ast import (CAssign, CBarrier, CBin, CBlock, CComment, CDecl, CExpr,
                    CExprStmt, CField, CFloat, CFor, CInt, CStmt, CStructDef,
                    CUn, CVar, CCall, expr_str)
from .nat import NatAdd, NatConst, NatExpr, NatMul, NatVar, nat_const_value
from .phrases import (App, Lam, Lit, PairP, Phrase, Prim, Proj, Var,
                      apply_prim, substitute, unapply)
from .primitives import ARITH_OPS, NEW_SPACE, PARFOR_FAMILY
from .types import (Array, DataType, Idx, Num, Pair, Vector)

Step = Tuple[str, object]  # ("i", CExpr) or ("f", 1|2)


@dataclass(frozen=True)
class VStore:
    """Marker for an OpenCL vector store target."""
    base: CExpr
    index: CExpr
    width: int


class CodegenError(Exception):
    pass


def nat_to_c(e: NatExpr) -> CExpr:
    v = nat_const_value(e)
    if v is not None:
        return CInt(v)
    if isinstance(e, NatVar):
        return CVar(e.name)
    if isinstance(e, NatAdd):
        return CBin("+", nat_to_c(e.left), nat_to_c(e.right))
    if isinstance(e, NatMul):
        return CBin("*", nat_to_c(e.left), nat_to_c(e.right))
    raise CodegenError(f"cannot render size {e}")


# --------------------------------------------------------- index simplifier

# polynomial over opaque atoms (variables, unresolved div/mod, calls),
# keyed by sorted tuples of atom render-strings
_Poly = Dict[Tuple[str, ...], int]


def _poly_add(a: _Poly, b: _Poly, sign: int = 1) -> _Poly:
    out = dict(a)
    for k, c in b.items():
        out[k] = out.get(k, 0) + sign * c
    return {k: c for k, c in out.items() if c != 0}


def _poly_mul(a: _Poly, b: _Poly) -> _Poly:
    out: _Poly = {}
    for k1, c1 in a.items():
        for k2, c2 in b.items():
            k = tuple(sorted(k1 + k2))
            out[k] = out.get(k, 0) + c1 * c2
    return {k: c for k, c in out.items() if c != 0}


class _IndexSimplifier:
    def __init__(self, ranges: Optional[Dict[str, int]] = None):
        # exclusive upper bounds of loop variables (all assumed >= 0)
        self.ranges = ranges or {}
        self.atoms: Dict[str, CExpr] = {}

    def simplify(self, e: CExpr) -> CExpr:
        return self._rebuild(self._build(e))

    def _atom(self, e: CExpr) -> _Poly:
        key = expr_str(e)
        self.atoms[key] = e
        return {(key,): 1}

    def _build(self, e: CExpr) -> _Poly:
        if isinstance(e, CInt):
            return {(): e.value} if e.value else {}
        if isinstance(e, CVar):
            return self._atom(e)
        if isinstance(e, CUn) and e.op == "-":
            return _poly_add({}, self._build(e.operand), -1)
        if isinstance(e, CBin):
            if e.op == "+":
                return _poly_add(self._build(e.left), self._build(e.right))
            if e.op == "-":
                return _poly_add(self._build(e.left), self._build(e.right),
                                 -1)
            if e.op == "*":
                return _poly_mul(self._build(e.left), self._build(e.right))
            if e.op in ("/", "%"):
                return self._divmod(e)
        return self._atom(e)

    def _divmod(self, e: CBin) -> _Poly:
        num = self._build(e.left)
        den = self._build(e.right)
        if set(den) != {()}:  # non-constant divisor: keep opaque
            return self._atom(CBin(e.op, self._rebuild(num),
                                   self._rebuild(den)))
        n = den[()]
        # num = quot*n + rest with every quot-term an exact multiple of n;
        # all values are non-negative, so floor distributes over that split
        quot = {k: c // n for k, c in num.items() if c % n == 0}
        rest = {k: c for k, c in num.items() if c % n != 0}
        if e.op == "/":
            if not rest:
                return quot
            if self._bounded_below(rest, n):
                return quot
            return _poly_add(quot, self._atom(
                CBin("/", self._rebuild(rest), CInt(n))))
        # modulo: the exact multiples vanish
        if not rest or self._bounded_below(rest, n):
            return rest
        return self._atom(CBin("%", self._rebuild(rest), CInt(n)))

    def _bounded_below(self, p: _Poly, n: int) -> bool:
        """True when the value of p provably lies in [0, n)."""
        total = 0
        for mono, coeff in p.items():
            if coeff < 0:
                return False
            term = coeff
            for key in mono:
                b = self._atom_bound(key)
                if b is None:
                    return False
                term *= b
            total += term
        return total < n

    def _atom_bound(self, key: str) -> Optional[int]:
        """Inclusive maximum of an atom, if known."""
        if key in self.ranges:
            return self.ranges[key] - 1
        e = self.atoms.get(key)
        if isinstance(e, CBin) and e.op == "%" and isinstance(e.right, CInt):
            return e.right.value - 1
        if isinstance(e, CBin) and e.op == "/" and isinstance(e.right, CInt):
            inner = self._build(e.left)
            hi = 0
            for mono, coeff in inner.items():
                if coeff < 0:
                    return None
                term = coeff
                for k in mono:
                    b = self._atom_bound(k)
                    if b is None:
                        return None
                    term *= b
                hi += term
            return hi // e.right.value
        return None

    def _rebuild(self, p: _Poly) -> CExpr:
        if not p:
            return CInt(0)
        terms: List[CExpr] = []
        for mono in sorted(p.keys(), key=lambda m: (-len(m), m)):
            coeff = p[mono]
            factors: List[CExpr] = [self.atoms[k] for k in mono]
            if coeff != 1 or not factors:
                factors.insert(0, CInt(coeff))
            term = factors[0]
            for f in factors[1:]:
                term = CBin("*", term, f)
            terms.append(term)
        out = terms[0]
        for t in terms[1:]:
            out = CBin("+", out, t)
        return out


def simplify_index(e: CExpr, ranges: Optional[Dict[str, int]] = None
                   ) -> CExpr:
    return _IndexSimplifier(ranges).simplify(e)


# ----------------------------------------------------------------- code gen

class CodeGen:
    def __init__(self, float_mode: bool = False, dialect: str = "pseudo",
                 simplify: bool = True, init_new: bool = False):
        self.float_mode = float_mode
        self.dialect = dialect
        self.simplify = simplify
        self.init_new = init_new
        self.scalar = "float" if float_mode else "long"
        self.structs: Dict[str, CStructDef] = {}
        self.ranges: Dict[str, int] = {}
        self._name_counts: Dict[str, int] = {}
        # buffers passed as flat pointers: name -> per-layer array sizes;
        # index steps onto them collapse into one flat subscript
        self.flat_dims: Dict[str, List[CExpr]] = {}

    # -- naming and declarations ------------------------------------------

    def c_name(self, base: str) -> str:
        base = "".join(ch if ch.isalnum() or ch == "_" else "_"
                       for ch in base) or "v"
        k = self._name_counts.get(base, 0)
        self._name_counts[base] = k + 1
        return base if k == 0 else f"{base}_{k}"

    def ctype_of(self, d: DataType) -> Tuple[str, Tuple[CExpr, ...]]:
        if isinstance(d, Num):
            return self.scalar, ()
        if isinstance(d, Idx):
            return "int", ()
        if isinstance(d, Vector):
            if self.dialect == "opencl":
                return f"{self.scalar}{d.width}", ()
            return self.scalar, (CInt(d.width),)
        if isinstance(d, Array):
            ct, dims = self.ctype_of(d.elem)
            return ct, (nat_to_c(d.size),) + dims
        if isinstance(d, Pair):
            return f"struct {self._struct_for(d)}", ()
        raise CodegenError(f"no C type for {d}")

    def _struct_for(self, d: Pair) -> str:
        name = "pair_" + _mangle(d.fst) + "_" + _mangle(d.snd)
        if name not in self.structs:
            fields = []
            for fld, sub in (("x1", d.fst), ("x2", d.snd)):
                ct, dims = self.ctype_of(sub)
                fields.append((ct, fld, dims))
            self.structs[name] = CStructDef(name, tuple(fields))
        return name

    def declare(self, d: DataType, name: str, qualifier: str = "") -> CDecl:
        ct, dims = self.ctype_of(d)
        return CDecl(ct, name, dims, qualifier=qualifier)

    # -- commands ----------------------------------------------------------

    def comm(self, p: Phrase, env: Dict[str, CExpr]) -> List[CStmt]:
        u = unapply(p)
        if u is None:
            raise CodegenError(f"not a command: {p!r}")
        name, targs, args = u
        if name == "skip":
            return [CComment("skip")]
        if name == "barrier":
            return [CBarrier()]
        if name == ";" and len(args) == 1:
            pair = args[0]
            return (self.comm(pair.fst, env) + self.comm(pair.snd, env))
        if name == ":=" and len(args) == 1:
            return self._assign(targs[0], args[0].fst, args[0].snd, env)
        if name in NEW_SPACE and len(args) == 1:
            return self._new(name, targs[0], args[0], env)
        if name == "for" and len(args) == 1:
            return [self._loop("seq", targs[0], args[0], env)]
        if name in PARFOR_FAMILY and len(args) == 2:
            return [self._parfor(name, targs, args, env)]
        raise CodegenError(f"no command clause for {name!r}")

    def _assign(self, d: DataType, a: Phrase, e: Phrase, env) -> List[CStmt]:
        if isinstance(d, Vector) and self.dialect != "opencl":
            out: List[CStmt] = []
            for lane in range(d.width):
                step = ("i", CInt(lane))
                out.append(CAssign(self.acc(a, env, [step]),
                                   self.exp(e, env, [step])))
            return out
        lhs = self.acc(a, env, [])
        rhs = self.exp(e, env, [])
        if isinstance(lhs, VStore):
            call = CCall(f"vstore{lhs.width}", (rhs, lhs.index, lhs.base))
            return [CExprStmt(call)]
        return [CAssign(lhs, rhs)]

    def _new(self, prim_name, d, f, env) -> List[CStmt]:
        if not isinstance(f, Lam):
            raise CodegenError("new body must be a lambda")
        cname = self.c_name(f.binder)
        qualifier = {"newGlobal": "global", "newLocal": "local",
                     "newPrivate": "private"}.get(prim_name, "")
        stmts: List[CStmt] = [self.declare(d, cname, qualifier)]
        if self.init_new:
            stmts += self._zero_init(d, CVar(cname))
        inner = dict(env)
        inner[f.binder] = CVar(cname)
        stmts += self.comm(f.body, inner)
        return [CBlock(tuple(stmts))]

    def _zero_init(self, d: DataType, target: CExpr) -> List[CStmt]:
        zero: CExpr = CFloat(0.0) if self.float_mode else CInt(0)
        if isinstance(d, (Num, Idx)):
            return [CAssign(target, zero)]
        if isinstance(d, Vector):
            if self.dialect == "opencl":
                return [CAssign(target,
                                CCall(f"({self.scalar}{d.width})", (zero,)))]
            return [CAssign(CIndex(target, CInt(i)), zero)
                    for i in range(d.width)]
        if isinstance(d, Array):
            v = self.c_name("z")
            inner = self._zero_init(d.elem, CIndex(target, CVar(v)))
            return [CFor(v, nat_to_c(d.size), CBlock(tuple(inner)), "seq")]
        if isinstance(d, Pair):
            return (self._zero_init(d.fst, CField(target, "x1"))
                    + self._zero_init(d.snd, CField(target, "x2")))
        raise CodegenError(f"cannot zero-initialise {d}")

    def _loop(self, kind, n, f, env) -> CFor:
        if not isinstance(f, Lam):
            raise CodegenError("loop body must be a lambda")
        v = self.c_name(f.binder)
        bound = nat_to_c(n)
        cv = nat_const_value(n)
        if cv is not None:
            self.ranges[v] = cv
        inner = dict(env)
        inner[f.binder] = CVar(v)
        body = self.comm(f.body, inner)
        return CFor(v, bound, CBlock(tuple(body)), kind)

    def _parfor(self, name, targs, args, env) -> CFor:
        n, d = targs
        a, f = args
        if not (isinstance(f, Lam) and isinstance(f.body, Lam)):
            raise CodegenError("parfor body must be a two-argument lambda")
        ivar, ovar, body = f.binder, f.body.binder, f.body.body
        # per-iteration acceptor becomes an indexing acceptor in the body
        sub = apply_prim("idxAcc", [n, d], [a, Var(ivar)])
        body = substitute(body, ovar, sub)
        kind = {"parfor": "parfor", "parforGlobal": "global",
                "parforWorkgroup": "workgroup", "parforLocal": "local"}[name]
        return self._loop(kind, n, Lam(ivar, body), env)

    # -- acceptors ---------------------------------------------------------

    def acc(self, p: Phrase, env, ps: List[Step]) -> Union[CExpr, VStore]:
        if isinstance(p, Var):
            return self._fold(env[p.name], ps)
        if isinstance(p, Proj) and p.index == 1 and \
                isinstance(p.target, Var):
            return self._fold(env[p.target.name], ps)
        u = unapply(p)
        if u is None:
            raise CodegenError(f"not an acceptor: {p!r}")
        name, targs, args = u
        if name == "idxAcc":
            i = self.exp(args[1], env, [])
            return self.acc(args[0], env, [("i", i)] + ps)
        if name == "splitAcc":
            n = nat_to_c(targs[0])
            (tag, i), rest = ps[0], ps[1:]
            assert tag == "i"
            return self.acc(args[0], env,
                            [("i", CBin("/", i, n)),
                             ("i", CBin("%", i, n))] + rest)
        if name == "joinAcc":
            m = nat_to_c(targs[1])
            (t1, i), (t2, j), rest = ps[0], ps[1], ps[2:]
            assert t1 == "i" and t2 == "i"
            return self.acc(args[0], env,
                            [("i", CBin("+", CBin("*", i, m), j))] + rest)
        if name in ("pairAcc1", "pairAcc2"):
            fld = 1 if name == "pairAcc1" else 2
            return self.acc(args[0], env, [("f", fld)] + ps)
        if name in ("zipAcc1", "zipAcc2"):
            fld = 1 if name == "zipAcc1" else 2
            (tag, i), rest = ps[0], ps[1:]
            assert tag == "i"
            return self.acc(args[0], env, [("i", i), ("f", fld)] + rest)
        if name.startswith("asVectorAcc"):
            w = CInt(int(name[len("asVectorAcc"):]))
            (tag, k), rest = ps[0], ps[1:]
            assert tag == "i"
            if self.dialect == "opencl":
                raise CodegenError(
                    "scalar writes into a vector buffer are not supported "
                    "in the opencl dialect")
            return self.acc(args[0], env,
                            [("i", CBin("/", k, w)),
                             ("i", CBin("%", k, w))] + rest)
        if name.startswith("asScalarAcc"):
            w = int(name[len("asScalarAcc"):])
            if self.dialect == "opencl":
                (tag, i), rest = ps[0], ps[1:]
                assert tag == "i" and not rest
                tgt = args[0]
                if isinstance(tgt, Proj) and tgt.index == 1 and \
                        isinstance(tgt.target, Var):
                    tgt = tgt.target
                if not isinstance(tgt, Var):
                    raise CodegenError(
                        "vector store target must be a plain buffer")
                # vstore indexes the raw scalar pointer in vector units
                return VStore(env[tgt.name], self._maybe_simplify(i), w)
            (t1, i), (t2, lane), rest = ps[0], ps[1], ps[2:]
            return self.acc(args[0], env,
                            [("i", CBin("+", CBin("*", i, CInt(w)),
                                        lane))] + rest)
        raise CodegenError(f"no acceptor clause for {name!r}")

    # -- expressions -------------------------------------------------------

    def exp(self, p: Phrase, env, ps: List[Step]) -> CExpr:
        if isinstance(p, Var):
            return self._fold(env[p.name], ps)
        if isinstance(p, Proj) and p.index == 2 and \
                isinstance(p.target, Var):
            return self._fold(env[p.target.name], ps)
        if isinstance(p, Lit):
            return self._literal(p, ps)
        u = unapply(p)
        if u is None:
            raise CodegenError(f"not an expression: {p!r}")
        name, targs, args = u
        if name in ARITH_OPS and len(args) == 1:
            e1, e2 = args[0].fst, args[0].snd
            return CBin(name, self.exp(e1, env, ps), self.exp(e2, env, ps))
        if name == "negate":
            return CUn("-", self.exp(args[0], env, ps))
        if name == "zip":
            (t1, i), (t2, fld), rest = ps[0], ps[1], ps[2:]
            assert t1 == "i" and t2 == "f"
            return self.exp(args[fld - 1], env, [("i", i)] + rest)
        if name == "split":
            n = nat_to_c(targs[0])
            (t1, i), (t2, j), rest = ps[0], ps[1], ps[2:]
            assert t1 == "i" and t2 == "i"
            return self.exp(args[0], env,
                            [("i", CBin("+", CBin("*", i, n), j))] + rest)
        if name == "join":
            m = nat_to_c(targs[1])
            (tag, i), rest = ps[0], ps[1:]
            assert tag == "i"
            return self.exp(args[0], env,
                            [("i", CBin("/", i, m)),
                             ("i", CBin("%", i, m))] + rest)
        if name == "pair":
            (tag, fld), rest = ps[0], ps[1:]
            assert tag == "f"
            return self.exp(args[fld - 1], env, rest)
        if name in ("fst", "snd"):
            fld = 1 if name == "fst" else 2
            return self.exp(args[0], env, [("f", fld)] + ps)
        if name == "idx":
            i = self.exp(args[1], env, [])
            return self.exp(args[0], env, [("i", i)] + ps)
        if name.startswith("asVector") and "Acc" not in name:
            w = int(name[len("asVector"):])
            if self.dialect == "opencl":
                (tag, i), rest = ps[0], ps[1:]
                assert tag == "i" and not rest
                return self._vload(args[0], env, i, w)
            (t1, i), (t2, lane), rest = ps[0], ps[1], ps[2:]
            return self.exp(args[0], env,
                            [("i", CBin("+", CBin("*", i, CInt(w)),
                                        lane))] + rest)
        if name.startswith("asScalar") and "Acc" not in name:
            w = CInt(int(name[len("asScalar"):]))
            (tag, k), rest = ps[0], ps[1:]
            assert tag == "i"
            return self.exp(args[0], env,
                            [("i", CBin("/", k, w)),
                             ("i", CBin("%", k, w))] + rest)
        raise CodegenError(f"no expression clause for {name!r}")

    def _vload(self, src: Phrase, env, vec_index: CExpr, w: int) -> CExpr:
        """Whole-vector read from a scalar array: vloadW(index, base).
        The vector index is resolved by reading the source at scalar offset
        vec_index*w and dividing the resulting flat index back by w (exact
        by construction)."""
        probe = self.exp(src, env, [("i", CBin("*", vec_index, CInt(w)))])
        if not isinstance(probe, CIndex):
            raise CodegenError(
                f"vector load source does not resolve to an array access: "
                f"{expr_str(probe)}")
        flat = simplify_index(CBin("/", probe.index, CInt(w)), self.ranges)
        return CCall(f"vload{w}", (flat, probe.base))

    def _literal(self, p: Lit, ps: List[Step]) -> CExpr:
        scalar: CExpr = (CFloat(float(p.value)) if self.float_mode
                         else CInt(int(p.value)))
        if isinstance(p.dtype, Vector):
            if self.dialect == "opencl" and not ps:
                return CCall(f"({self.scalar}{p.dtype.width})", (scalar,))
            if ps:  # lane of a splat literal
                return scalar
        if ps:
            raise CodegenError("literal with a non-empty access path")
        return scalar

    def _fold(self, base: CExpr, ps: List[Step]) -> CExpr:
        out = base
        if isinstance(base, CVar) and base.name in self.flat_dims:
            dims = self.flat_dims[base.name]
            assert len(ps) >= len(dims) and \
                all(tag == "i" for tag, _ in ps[:len(dims)])
            flat = ps[0][1]
            for dim, (_, step) in zip(dims[1:], ps[1:len(dims)]):
                flat = CBin("+", CBin("*", flat, dim), step)
            out = CIndex(base, self._maybe_simplify(flat))
            ps = ps[len(dims):]
        for tag, step in ps:
            if tag == "i":
                out = CIndex(out, self._maybe_simplify(step))
            else:
                out = CField(out, f"x{step}")
        return out

    def _maybe_simplify(self, e: CExpr) -> CExpr:
        return simplify_index(e, self.ranges) if self.simplify else e


from .c_ast import CIndex  # noqa: E402  (cycle-free; used above at runtime)


def _mangle(d: DataType) -> str:
    if isinstance(d, Num):
        return "num"
    if isinstance(d, Idx):
        return "idx"
    if isinstance(d, Vector):
        return f"vec{d.width}"
    if isinstance(d, Array):
        v = nat_const_value(d.size)
        size = str(v) if v is not None else "n"
        return f"arr{size}_{_mangle(d.elem)}"
    if isinstance(d, Pair):
        return f"p_{_mangle(d.fst)}_{_mangle(d.snd)}"
    raise CodegenError(f"cannot mangle {d}")


def codegen_comm(p: Phrase, env: Dict[str, CExpr], **kw) -> List[CStmt]:
    return CodeGen(**kw).comm(p, env)
