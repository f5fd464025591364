"""C-like syntax tree and text emission.

One tree serves three dialects: "pseudo" (didactic listing with a literal `parfor`
keyword), "openmp" (compilable C with parallel-for pragmas) and "opencl"
(kernel with work-item id stride loops).  Emission is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union


# ------------------------------------------------------------------ r-values

@dataclass(frozen=True)
class CExpr:
    pass


@dataclass(frozen=True)
class CInt(CExpr):
    value: int


@dataclass(frozen=True)
class CFloat(CExpr):
    value: float


@dataclass(frozen=True)
class CVar(CExpr):
    name: str


@dataclass(frozen=True)
class CBin(CExpr):
    op: str  # + - * / %
    left: CExpr
    right: CExpr


@dataclass(frozen=True)
class CUn(CExpr):
    op: str  # -
    operand: CExpr


@dataclass(frozen=True)
class CIndex(CExpr):
    base: CExpr
    index: CExpr


@dataclass(frozen=True)
class CField(CExpr):
    base: CExpr
    fld: str  # "x1" or "x2"


@dataclass(frozen=True)
class CCall(CExpr):
    fn: str
    args: Tuple[CExpr, ...]


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "%": 2}


def expr_str(e: CExpr, parent_prec: int = 0) -> str:
    if isinstance(e, CInt):
        return str(e.value)
    if isinstance(e, CFloat):
        s = repr(e.value)
        return s + ("f" if "." in s or "e" in s else ".0f")
    if isinstance(e, CVar):
        return e.name
    if isinstance(e, CBin):
        prec = _PREC[e.op]
        s = (f"{expr_str(e.left, prec)} {e.op} "
             f"{expr_str(e.right, prec + 1)}")
        return f"({s})" if prec < parent_prec else s
    if isinstance(e, CUn):
        return f"({e.op}{expr_str(e.operand, 3)})"
    if isinstance(e, CIndex):
        return f"{expr_str(e.base, 3)}[{expr_str(e.index)}]"
    if isinstance(e, CField):
        return f"{expr_str(e.base, 3)}.{e.fld}"
    if isinstance(e, CCall):
        return f"{e.fn}({', '.join(expr_str(a) for a in e.args)})"
    raise TypeError(f"not a C expression: {e!r}")


# ---------------------------------------------------------------- statements

@dataclass(frozen=True)
class CStmt:
    pass


@dataclass(frozen=True)
class CComment(CStmt):
    text: str


@dataclass(frozen=True)
class CAssign(CStmt):
    lhs: CExpr
    rhs: CExpr


@dataclass(frozen=True)
class CExprStmt(CStmt):
    expr: CExpr  # e.g. a vstore call


@dataclass(frozen=True)
class CDecl(CStmt):
    ctype: str
    name: str
    array_sizes: Tuple[CExpr, ...] = ()
    init: Optional[CExpr] = None
    qualifier: str = ""  # "private", "local", ...


@dataclass(frozen=True)
class CBlock(CStmt):
    stmts: Tuple[CStmt, ...]


# loop kinds: "seq", "parfor" (plain parallel), and the OpenCL hierarchy
# levels "global", "workgroup", "local"
@dataclass(frozen=True)
class CFor(CStmt):
    var: str
    bound: CExpr
    body: CBlock
    kind: str = "seq"


@dataclass(frozen=True)
class CBarrier(CStmt):
    pass


@dataclass(frozen=True)
class CStructDef:
    name: str
    fields: Tuple[Tuple[str, str, Tuple[CExpr, ...]], ...]
    # (ctype, field name, array sizes)


@dataclass(frozen=True)
class CFunction:
    name: str
    params: Tuple[str, ...]  # fully rendered parameter declarations
    body: CBlock
    kernel: bool = False


@dataclass
class CProgram:
    structs: List[CStructDef] = field(default_factory=list)
    functions: List[CFunction] = field(default_factory=list)


# ------------------------------------------------------------------ emission

_OPENCL_IDS = {
    "global": ("get_global_id(0)", "get_global_size(0)"),
    "workgroup": ("get_group_id(0)", "get_num_groups(0)"),
    "local": ("get_local_id(0)", "get_local_size(0)"),
}


def _stmt_lines(s: CStmt, dialect: str, indent: int) -> List[str]:
    pad = "  " * indent
    if isinstance(s, CComment):
        return [f"{pad}/* {s.text} */"]
    if isinstance(s, CAssign):
        return [f"{pad}{expr_str(s.lhs)} = {expr_str(s.rhs)};"]
    if isinstance(s, CExprStmt):
        return [f"{pad}{expr_str(s.expr)};"]
    if isinstance(s, CDecl):
        dims = "".join(f"[{expr_str(d)}]" for d in s.array_sizes)
        qual = f"{s.qualifier} " if s.qualifier and dialect == "opencl" else ""
        init = f" = {expr_str(s.init)}" if s.init is not None else ""
        return [f"{pad}{qual}{s.ctype} {s.name}{dims}{init};"]
    if isinstance(s, CBlock):
        inner = [ln for st in s.stmts
                 for ln in _stmt_lines(st, dialect, indent + 1)]
        return [f"{pad}{{"] + inner + [f"{pad}}}"]
    if isinstance(s, CBarrier):
        return [f"{pad}barrier(CLK_LOCAL_MEM_FENCE | CLK_GLOBAL_MEM_FENCE);"]
    if isinstance(s, CFor):
        v, bound = s.var, expr_str(s.bound)
        body = _stmt_lines(s.body, dialect, indent)
        if s.kind == "seq":
            head = f"for (int {v} = 0; {v} < {bound}; {v} += 1)"
            return [f"{pad}{head} {body[0].lstrip()}"] + body[1:]
        if dialect == "pseudo":
            head = f"parfor (int {v} = 0; {v} < {bound}; {v} += 1)"
            return [f"{pad}{head} {body[0].lstrip()}"] + body[1:]
        if dialect == "openmp":
            head = f"for (int {v} = 0; {v} < {bound}; {v} += 1)"
            return [f"{pad}#pragma omp parallel for",
                    f"{pad}{head} {body[0].lstrip()}"] + body[1:]
        if dialect == "opencl":
            level = s.kind if s.kind in _OPENCL_IDS else "global"
            start, step = _OPENCL_IDS[level]
            head = (f"for (int {v} = {start}; {v} < {bound}; "
                    f"{v} += {step})")
            return [f"{pad}{head} {body[0].lstrip()}"] + body[1:]
        raise ValueError(f"unknown dialect {dialect!r}")
    raise TypeError(f"not a C statement: {s!r}")


def stmts_text(stmts: List[CStmt], dialect: str = "pseudo",
               indent: int = 0) -> str:
    return "\n".join(ln for s in stmts
                     for ln in _stmt_lines(s, dialect, indent))


def struct_text(sd: CStructDef) -> str:
    lines = [f"struct {sd.name} {{"]
    for ctype, name, dims in sd.fields:
        suffix = "".join(f"[{expr_str(d)}]" for d in dims)
        lines.append(f"  {ctype} {name}{suffix};")
    lines.append("};")
    return "\n".join(lines)


def function_text(fn: CFunction, dialect: str) -> str:
    head = "kernel void" if fn.kernel else "void"
    sig = f"{head} {fn.name}({', '.join(fn.params)})"
    body = "\n".join(_stmt_lines(fn.body, dialect, 0))
    return f"{sig}\n{body}"


def program_text(prog: CProgram, dialect: str) -> str:
    parts = [struct_text(sd) for sd in prog.structs]
    parts += [function_text(fn, dialect) for fn in prog.functions]
    return "\n\n".join(parts) + "\n"
