"""Surface-syntax pretty printing and a stable machine-readable AST dump.

pretty_print emits the same s-expression surface language the parser reads,
eliding size/data-type arguments wherever the parser can re-infer them
locally, so that parse(pretty_print(p)) is alpha-equivalent to p.
"""
from __future__ import annotations

from typing import List, Union

from .nat import NatExpr, nat_str
from .phrases import (App, Lam, Lit, PairP, Phrase, Prim, Proj, TApp, TLam,
                      Var, unapply)
from .primitives import (ARITH_OPS, MAP_FAMILY, MAPI_FAMILY, NEW_SPACE,
                         PARFOR_FAMILY, TO_SPACE)
from .types import DataType, PhraseType

# primitives printed with all type arguments elided (re-inferable from the
# types of the printed term arguments)
_ELIDE_ALL = (MAP_FAMILY + MAPI_FAMILY + PARFOR_FAMILY
              + tuple(TO_SPACE) + ARITH_OPS
              + ("negate", "reduce", "reduceI", "zip", "join", "pair", "fst",
                 "snd", ":=", ";", "idx", "idxAcc", "splitAcc", "pairAcc1",
                 "pairAcc2", "zipAcc1", "zipAcc2"))


def type_str(t: Union[PhraseType, DataType, NatExpr]) -> str:
    if isinstance(t, NatExpr):
        return nat_str(t)
    return str(t)


def _is_op_section(p: Phrase):
    """Recognise the expansion of an operator section like (+):
    lam x (lam y (op y x)) with the accumulator applied second."""
    if not (isinstance(p, Lam) and isinstance(p.body, Lam)):
        return None
    inner = p.body
    u = unapply(inner.body)
    if u is None:
        return None
    name, _targs, args = u
    if name not in ARITH_OPS or len(args) != 1:
        return None
    arg = args[0]
    if (isinstance(arg, PairP) and isinstance(arg.fst, Var)
            and isinstance(arg.snd, Var)
            and arg.fst.name == inner.binder and arg.snd.name == p.binder):
        return name
    return None


def pretty_print(p: Phrase) -> str:
    op = _is_op_section(p)
    if op is not None:
        return f"({op})"
    u = unapply(p)
    if u is not None:
        name, targs, args = u
        if not targs and not args:
            return name
        if name in _ELIDE_ALL:
            out: List[str] = []
            for a in args:
                # product-typed operands print as two juxtaposed arguments
                if name in ARITH_OPS + (":=", ";") and isinstance(a, PairP):
                    out.append(pretty_print(a.fst))
                    out.append(pretty_print(a.snd))
                else:
                    out.append(pretty_print(a))
            head = "seq" if name == ";" else name
            return f"({head} {' '.join(out)})"
        if name == "split" and len(targs) == 3 and len(args) == 1:
            return f"(split {nat_str(targs[0])} {pretty_print(args[0])})"
        if name == "joinAcc" and len(targs) == 3 and len(args) == 1:
            return f"(joinAcc {nat_str(targs[1])} {pretty_print(args[0])})"
        if name in NEW_SPACE and len(targs) == 1 and len(args) == 1:
            return f"({name} {type_str(targs[0])} {pretty_print(args[0])})"
        if name == "for" and len(targs) == 1 and len(args) == 1:
            return f"(for {nat_str(targs[0])} {pretty_print(args[0])})"
        if name.startswith(("asVector", "asScalar")) and len(args) == 1:
            return f"({name} {pretty_print(args[0])})"
        # generic fallback: explicit type application then application
        head = name
        if targs:
            head = f"(tapp {name} {' '.join(type_str(t) for t in targs)})"
        if not args:
            return head
        return f"({head} {' '.join(pretty_print(a) for a in args)})"
    if isinstance(p, Var):
        return p.name
    if isinstance(p, Lit):
        return repr(p.value)
    if isinstance(p, Lam):
        if p.arg_type is not None:
            return f"(lam ({p.binder} {p.arg_type}) {pretty_print(p.body)})"
        return f"(lam {p.binder} {pretty_print(p.body)})"
    if isinstance(p, TLam):
        return f"(tlam ({p.binder} {p.kind}) {pretty_print(p.body)})"
    if isinstance(p, Proj):
        return f"(proj{p.index} {pretty_print(p.target)})"
    if isinstance(p, PairP):
        return f"(tuple {pretty_print(p.fst)} {pretty_print(p.snd)})"
    if isinstance(p, App):
        return f"({pretty_print(p.fn)} {pretty_print(p.arg)})"
    if isinstance(p, TApp):
        return f"(tapp {pretty_print(p.fn)} {type_str(p.arg)})"
    raise TypeError(f"not a phrase: {p!r}")


# ------------------------------------------------------------------ AST dump

def ast_dump(p: Phrase) -> str:
    """Full-fidelity serialization: one node per line, `tag attrs`,
    children indented two spaces.  Stable across runs."""
    lines: List[str] = []

    def walk(q: Phrase, depth: int):
        pad = "  " * depth
        if isinstance(q, Var):
            lines.append(f"{pad}var {q.name}")
        elif isinstance(q, Lit):
            lines.append(f"{pad}lit {q.value!r} {q.dtype}")
        elif isinstance(q, Prim):
            lines.append(f"{pad}prim {q.name}")
        elif isinstance(q, Lam):
            ann = f" {q.arg_type}" if q.arg_type is not None else ""
            lines.append(f"{pad}lam {q.binder}{ann}")
            walk(q.body, depth + 1)
        elif isinstance(q, TLam):
            lines.append(f"{pad}tlam {q.binder} {q.kind}")
            walk(q.body, depth + 1)
        elif isinstance(q, App):
            lines.append(f"{pad}app")
            walk(q.fn, depth + 1)
            walk(q.arg, depth + 1)
        elif isinstance(q, TApp):
            lines.append(f"{pad}tapp {type_str(q.arg)}")
            walk(q.fn, depth + 1)
        elif isinstance(q, PairP):
            lines.append(f"{pad}pair")
            walk(q.fst, depth + 1)
            walk(q.snd, depth + 1)
        elif isinstance(q, Proj):
            lines.append(f"{pad}proj {q.index}")
            walk(q.target, depth + 1)
        else:
            raise TypeError(f"not a phrase: {q!r}")

    walk(p, 0)
    return "\n".join(lines) + "\n"
