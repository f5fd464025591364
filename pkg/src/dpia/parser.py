"""S-expression surface syntax: lexing, reading, and type-directed
elaboration into fully explicit core phrases.

Grammar sketch (see README for the full table):

    program   := decl* phrase
    decl      := (nat NAME) | (param NAME ptype)
    phrase    := NAME | NUMBER | (lam BINDER+ phrase) | (tlam (NAME KIND) phrase)
               | (tapp phrase type+) | (proj1 phrase) | (proj2 phrase)
               | (tuple phrase phrase) | (OP) | (HEAD phrase*)
    binder    := NAME | (NAME ptype)

Size and data-type arguments of primitives are inferred locally from the
types of already-elaborated operands; anything non-local must be written
with an explicit (tapp ...).  Comments run from ';;' to end of line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .nat import (NatExpr, nat, nat_const_value, nat_divide, nat_equal)
from .phrases import (App, Lam, Lit, PairP, Phrase, Prim, Proj, TApp, TLam,
                      Var, apply_prim, fresh_name)
from .primitives import (ARITH_OPS, MAP_FAMILY, MAPI_FAMILY, MAP_TO_MAPI,
                         NEW_SPACE, PARFOR_FAMILY, PRIMITIVES, TO_SPACE)
from .types import (AccT, Array, COMM, CommT, DataType, DepFnT, ExpT, FnT,
                    Idx, NUM, Num, Pair, PhraseType, ProdT, VECTOR_WIDTHS,
                    Vector, data_equal, phrase_type_equal, var_t)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class ElabError(ParseError):
    """Error detected while elaborating the body phrase.  Reported as a
    type error: the surface form was readable, but does not type-check."""


# ------------------------------------------------------------------- reading

@dataclass(frozen=True)
class Token:
    text: str
    line: int
    col: int


SExp = Union[Token, list]


def tokenize(text: str) -> List[Token]:
    toks: List[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            col += 1
            i += 1
        elif text.startswith(";;", i):
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            toks.append(Token(c, line, col))
            col += 1
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();":
                j += 1
            if j == i:
                raise ParseError(f"stray character {c!r}", line, col)
            toks.append(Token(text[i:j], line, col))
            col += j - i
            i = j
    return toks


def read_all(text: str) -> List[SExp]:
    toks = tokenize(text)
    out: List[SExp] = []
    stack: List[list] = []
    for t in toks:
        if t.text == "(":
            stack.append([])
        elif t.text == ")":
            if not stack:
                raise ParseError("unbalanced ')'", t.line, t.col)
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(t)
    if stack:
        raise ParseError("unbalanced '(' at end of input")
    return out


def _span(sx: SExp) -> Tuple[int, int]:
    while isinstance(sx, list):
        if not sx:
            return (0, 0)
        sx = sx[0]
    return (sx.line, sx.col)


def _err(sx: SExp, msg: str) -> ParseError:
    line, col = _span(sx)
    return ParseError(msg, line, col)


def _head(sx: SExp) -> Optional[str]:
    if isinstance(sx, list) and sx and isinstance(sx[0], Token):
        return sx[0].text
    return None


def _number(tok: Token):
    try:
        return int(tok.text)
    except ValueError:
        pass
    try:
        return float(tok.text)
    except ValueError:
        return None


# -------------------------------------------------------------- type parsing

def parse_nat(sx: SExp) -> NatExpr:
    if isinstance(sx, Token):
        v = _number(sx)
        if isinstance(v, int) and v >= 0:
            return nat(v)
        if v is None:
            return nat(sx.text)
        raise _err(sx, f"not a size expression: {sx.text}")
    h = _head(sx)
    if h in ("+", "*") and len(sx) == 3:
        a, b = parse_nat(sx[1]), parse_nat(sx[2])
        return a + b if h == "+" else a * b
    raise _err(sx, "malformed size expression")


def parse_data(sx: SExp) -> DataType:
    if isinstance(sx, Token):
        if sx.text == "num":
            return NUM
        raise _err(sx, f"unknown data type: {sx.text}")
    h = _head(sx)
    if h == "idx" and len(sx) == 2:
        return Idx(parse_nat(sx[1]))
    if h == "array" and len(sx) == 3:
        return Array(parse_nat(sx[1]), parse_data(sx[2]))
    if h == "pair" and len(sx) == 3:
        return Pair(parse_data(sx[1]), parse_data(sx[2]))
    if h == "vec" and len(sx) == 2:
        v = _number(sx[1])
        if v not in VECTOR_WIDTHS:
            raise _err(sx, f"illegal vector width: {sx[1].text}")
        return Vector(v)
    raise _err(sx, "malformed data type")


def parse_phrase_type(sx: SExp) -> PhraseType:
    if isinstance(sx, Token):
        if sx.text == "comm":
            return COMM
        raise _err(sx, f"unknown phrase type: {sx.text}")
    h = _head(sx)
    if h == "exp" and len(sx) == 2:
        return ExpT(parse_data(sx[1]))
    if h == "acc" and len(sx) == 2:
        return AccT(parse_data(sx[1]))
    if h == "var" and len(sx) == 2:
        return var_t(parse_data(sx[1]))
    if h == "prod" and len(sx) == 3:
        return ProdT(parse_phrase_type(sx[1]), parse_phrase_type(sx[2]))
    if h in ("->", "->p") and len(sx) >= 3:
        out = parse_phrase_type(sx[-1])
        for arg in reversed(sx[1:-1]):
            out = FnT(parse_phrase_type(arg), out, passive=(h == "->p"))
        return out
    if h == "forall" and len(sx) == 3 and isinstance(sx[1], list) \
            and len(sx[1]) == 2:
        name, kind = sx[1][0].text, sx[1][1].text
        if kind not in ("nat", "data"):
            raise _err(sx, f"unknown kind: {kind}")
        return DepFnT(name, kind, parse_phrase_type(sx[2]))
    raise _err(sx, "malformed phrase type")


# ------------------------------------------------------------------- program

@dataclass
class SourceProgram:
    nat_params: List[str] = field(default_factory=list)
    params: List[Tuple[str, PhraseType]] = field(default_factory=list)
    body: Phrase = None  # type: ignore[assignment]
    body_type: PhraseType = None  # type: ignore[assignment]

    @property
    def pi(self) -> Dict[str, PhraseType]:
        from .types import is_passive
        return {n: t for n, t in self.params if is_passive(t)}

    @property
    def gamma(self) -> Dict[str, PhraseType]:
        from .types import is_passive
        return {n: t for n, t in self.params if not is_passive(t)}

    @property
    def delta(self) -> Dict[str, str]:
        return {n: "nat" for n in self.nat_params}


def parse(text: str) -> SourceProgram:
    forms = read_all(text)
    prog = SourceProgram()
    body_form: Optional[SExp] = None
    for f in forms:
        h = _head(f)
        if h == "nat":
            if len(f) != 2 or not isinstance(f[1], Token):
                raise _err(f, "expected (nat NAME)")
            prog.nat_params.append(f[1].text)
        elif h == "param":
            if len(f) != 3 or not isinstance(f[1], Token):
                raise _err(f, "expected (param NAME TYPE)")
            name = f[1].text
            if any(n == name for n, _ in prog.params):
                raise _err(f, f"duplicate parameter: {name}")
            prog.params.append((name, parse_phrase_type(f[2])))
        else:
            if body_form is not None:
                raise _err(f, "more than one body phrase")
            body_form = f
    if body_form is None:
        raise ParseError("program has no body phrase")
    env = dict(prog.params)
    elab = Elaborator(env)
    try:
        prog.body, prog.body_type = elab.infer(body_form)
    except ElabError:
        raise
    except ParseError as e:
        raise ElabError(e.message, e.line, e.col) from None
    return prog


def parse_phrase(text: str,
                 env: Optional[Dict[str, PhraseType]] = None
                 ) -> Tuple[Phrase, PhraseType]:
    forms = read_all(text)
    if len(forms) != 1:
        raise ParseError(f"expected exactly one phrase, got {len(forms)}")
    return Elaborator(dict(env or {})).infer(forms[0])


# ---------------------------------------------------------------- elaborator

def _exp_array(sx: SExp, t: PhraseType) -> Tuple[NatExpr, DataType]:
    if isinstance(t, ExpT) and isinstance(t.data, Array):
        return t.data.size, t.data.elem
    raise _err(sx, f"expected an array expression, got {t}")


def _acc_array(sx: SExp, t: PhraseType) -> Tuple[NatExpr, DataType]:
    if isinstance(t, AccT) and isinstance(t.data, Array):
        return t.data.size, t.data.elem
    raise _err(sx, f"expected an array acceptor, got {t}")


def _exp_data(sx: SExp, t: PhraseType) -> DataType:
    if isinstance(t, ExpT):
        return t.data
    raise _err(sx, f"expected an expression, got {t}")


_ARITH_DOMAINS = (Num, Vector)


class Elaborator:
    def __init__(self, env: Dict[str, PhraseType]):
        self.env = env

    # -- entry points ------------------------------------------------------

    def infer(self, sx: SExp) -> Tuple[Phrase, PhraseType]:
        if isinstance(sx, Token):
            return self._atom(sx)
        if not sx:
            raise _err(sx, "empty form")
        h = _head(sx)
        if h is not None:
            handler = getattr(self, "_form_" + _mangle(h), None)
            if handler is not None:
                return handler(sx)
            if h in MAP_FAMILY:
                return self._form_map(sx)
            if h in MAPI_FAMILY:
                return self._form_mapi(sx)
            if h in PARFOR_FAMILY:
                return self._form_parfor(sx)
            if h in TO_SPACE:
                return self._form_to_space(sx)
            if h in NEW_SPACE:
                return self._form_new(sx)
            if h in ARITH_OPS:
                return self._form_arith(sx)
            if h.startswith("asVector") or h.startswith("asScalar"):
                return self._form_as_vector(sx)
        return self._generic_apply(sx)

    def check(self, sx: SExp, expected: PhraseType) -> Phrase:
        if isinstance(expected, FnT):
            args, ret = _uncurry(expected)
            p, got = self.check_fn(sx, args, ret_hint=ret)
            if not phrase_type_equal(got, ret):
                raise _err(sx, f"expected result type {ret}, got {got}")
            return p
        if isinstance(sx, Token):
            v = _number(sx)
            if v is not None and isinstance(expected, ExpT):
                d = expected.data
                if isinstance(d, (Num, Vector)):
                    return Lit(v, d)
                if isinstance(d, Idx):
                    bound = nat_const_value(d.bound)
                    if isinstance(v, int) and (bound is None or v < bound):
                        return Lit(v, d)
                    raise _err(sx, f"index literal {v} out of bounds {d}")
        p, t = self.infer(sx)
        if not phrase_type_equal(t, expected):
            raise _err(sx, f"expected type {expected}, got {t}")
        return p

    def check_fn(self, sx: SExp, arg_types: List[PhraseType],
                 ret_hint: Optional[PhraseType] = None
                 ) -> Tuple[Phrase, PhraseType]:
        """Elaborate sx as a function taking arg_types (in order); returns
        the phrase and its final result type."""
        h = _head(sx)
        if h in ARITH_OPS and len(sx) == 1:  # operator section, e.g. (+)
            if len(arg_types) != 2:
                raise _err(sx, f"section ({h}) used at wrong arity")
            t_acc = arg_types[1]
            d = _exp_data(sx, t_acc)
            if not phrase_type_equal(arg_types[0], t_acc):
                raise _err(sx, f"section ({h}) needs equal operand types")
            x, y = fresh_name("x"), fresh_name("y")
            body = apply_prim(h, [d], [PairP(Var(y), Var(x))])
            p = Lam(x, Lam(y, body, arg_type=t_acc), arg_type=arg_types[0])
            return p, t_acc
        if h in MAP_FAMILY and len(sx) == 2 and len(arg_types) == 1:
            # partially applied map, e.g. (toGlobal (map F) E)
            at = arg_types[0]
            d1t = _exp_data(sx, at)
            if not isinstance(d1t, Array):
                raise _err(sx, f"({h} F) expects an array argument, "
                               f"got {at}")
            n, d1 = d1t.size, d1t.elem
            f, ft = self.check_fn(sx[1], [ExpT(d1)])
            d2 = _exp_data(sx, ft)
            return (apply_prim(h, [n, d1, d2], [f]),
                    ExpT(Array(n, d2)))
        if h == "lam":
            binders, body_sx = sx[1:-1], sx[-1]
            if len(binders) > len(arg_types):
                raise _err(sx, "lambda has more binders than expected "
                                "arguments")
            inner = Elaborator(dict(self.env))
            names = []
            for b, at in zip(binders, arg_types):
                if isinstance(b, Token):
                    name = b.text
                elif isinstance(b, list) and len(b) == 2:
                    name = b[0].text
                    ann = parse_phrase_type(b[1])
                    if not phrase_type_equal(ann, at):
                        raise _err(b, f"annotation {ann} does not match "
                                       f"expected {at}")
                else:
                    raise _err(b, "malformed binder")
                inner.env[name] = at
                names.append(name)
            rest = arg_types[len(binders):]
            if rest:
                body, ret = inner.check_fn(body_sx, rest, ret_hint=ret_hint)
            elif ret_hint is not None:
                body = inner.check(body_sx, ret_hint)
                ret = ret_hint
            else:
                body, ret = inner.infer(body_sx)
            for name, at in zip(reversed(names),
                                reversed(arg_types[:len(binders)])):
                body = Lam(name, body, arg_type=at)
            return body, ret
        p, t = self.infer(sx)
        for at in arg_types:
            if not isinstance(t, FnT) or not phrase_type_equal(t.arg, at):
                raise _err(sx, f"expected a function from {at}, got {t}")
            t = t.ret
        return p, t

    # -- leaves ------------------------------------------------------------

    def _atom(self, tok: Token) -> Tuple[Phrase, PhraseType]:
        v = _number(tok)
        if v is not None:
            return Lit(v), ExpT(NUM)
        if tok.text in self.env:
            return Var(tok.text, span=(tok.line, tok.col)), self.env[tok.text]
        if tok.text in PRIMITIVES:
            return Prim(tok.text, span=(tok.line, tok.col)), \
                PRIMITIVES[tok.text]
        raise ParseError(f"unbound identifier: {tok.text}", tok.line, tok.col)

    # -- structural forms --------------------------------------------------

    def _form_lam(self, sx):
        if len(sx) < 3:
            raise _err(sx, "malformed lam")
        binders, body_sx = sx[1:-1], sx[-1]
        inner = Elaborator(dict(self.env))
        anns = []
        for b in binders:
            if isinstance(b, list) and len(b) == 2 and isinstance(b[0], Token):
                name, ann = b[0].text, parse_phrase_type(b[1])
            elif isinstance(b, Token):
                raise _err(b, f"binder {b.text!r} needs a type annotation "
                              "here (write (lam (x TYPE) ...))")
            else:
                raise _err(b, "malformed binder")
            inner.env[name] = ann
            anns.append((name, ann))
        body, bt = inner.infer(body_sx)
        for name, ann in reversed(anns):
            body = Lam(name, body, arg_type=ann)
            bt = FnT(ann, bt)
        return body, bt

    def _form_tlam(self, sx):
        if len(sx) != 3 or not isinstance(sx[1], list) or len(sx[1]) != 2:
            raise _err(sx, "expected (tlam (NAME KIND) BODY)")
        name, kind = sx[1][0].text, sx[1][1].text
        if kind not in ("nat", "data"):
            raise _err(sx, f"unknown kind: {kind}")
        body, bt = self.infer(sx[2])
        return TLam(name, kind, body), DepFnT(name, kind, bt)

    def _form_tapp(self, sx):
        if len(sx) < 3:
            raise _err(sx, "malformed tapp")
        p, t = self.infer(sx[1])
        for arg_sx in sx[2:]:
            if not isinstance(t, DepFnT):
                raise _err(sx, f"type application of non-polymorphic "
                               f"phrase: {t}")
            if t.kind == "nat":
                arg = parse_nat(arg_sx)
            else:
                arg = parse_data(arg_sx)
            from .types import subst_phrase_type
            p, t = TApp(p, arg), subst_phrase_type(t.body, t.binder, arg)
        return p, t

    def _form_proj1(self, sx):
        return self._proj(sx, 1)

    def _form_proj2(self, sx):
        return self._proj(sx, 2)

    def _proj(self, sx, i):
        if len(sx) != 2:
            raise _err(sx, "malformed projection")
        p, t = self.infer(sx[1])
        if not isinstance(t, ProdT):
            raise _err(sx, f"projection from non-product type {t}")
        return Proj(p, i), (t.fst if i == 1 else t.snd)

    def _form_tuple(self, sx):
        if len(sx) != 3:
            raise _err(sx, "malformed tuple")
        p1, t1 = self.infer(sx[1])
        p2, t2 = self.infer(sx[2])
        return PairP(p1, p2), ProdT(t1, t2)

    # -- functional primitives --------------------------------------------

    def _form_map(self, sx):
        name = sx[0].text
        if len(sx) != 3:
            raise _err(sx, f"expected ({name} F E)")
        e, et = self.infer(sx[2])
        n, d1 = _exp_array(sx, et)
        f, ft = self.check_fn(sx[1], [ExpT(d1)])
        d2 = _exp_data(sx, ft)
        return apply_prim(name, [n, d1, d2], [f, e]), ExpT(Array(n, d2))

    def _form_reduce(self, sx):
        if len(sx) != 4:
            raise _err(sx, "expected (reduce F I E)")
        e, et = self.infer(sx[3])
        n, d1 = _exp_array(sx, et)
        f, d2, init = self._reduce_operands(sx, sx[1], sx[2], d1, passive=None)
        return apply_prim("reduce", [n, d1, d2], [f, init, e]), ExpT(d2)

    def _reduce_operands(self, sx, f_sx, i_sx, d1, passive):
        """Find the accumulator type d2: from the init expression if it is
        not a bare literal, otherwise by trying d1 and its components."""
        if not (isinstance(i_sx, Token) and _number(i_sx) is not None):
            init, it = self.infer(i_sx)
            d2 = _exp_data(i_sx, it)
            f = self._check_reduce_fn(f_sx, d1, d2, passive)
            return f, d2, init
        candidates = [d1]
        if isinstance(d1, Pair):
            candidates += [d1.fst, d1.snd]
        candidates.append(NUM)
        seen = []
        for d2 in candidates:
            if any(data_equal(d2, s) for s in seen):
                continue
            seen.append(d2)
            try:
                f = self._check_reduce_fn(f_sx, d1, d2, passive)
            except ParseError:
                continue
            init = self.check(i_sx, ExpT(d2))
            return f, d2, init
        raise _err(sx, "cannot infer the accumulator type; annotate the "
                       "initial value or the reduction function")

    def _check_reduce_fn(self, f_sx, d1, d2, passive):
        if passive is None:  # functional reduce: exp d1 -> exp d2 -> exp d2
            f, ft = self.check_fn(f_sx, [ExpT(d1), ExpT(d2)],
                                  ret_hint=ExpT(d2))
            if not phrase_type_equal(ft, ExpT(d2)):
                raise _err(f_sx, f"reduction function returns {ft}, "
                                 f"expected (exp {d2})")
            return f
        # reduceI: exp d1 -> exp d2 -> acc d2 -> comm
        f, ft = self.check_fn(f_sx, [ExpT(d1), ExpT(d2), AccT(d2)],
                              ret_hint=COMM)
        if not isinstance(ft, CommT):
            raise _err(f_sx, f"expected a command body, got {ft}")
        return f

    def _form_zip(self, sx):
        if len(sx) != 3:
            raise _err(sx, "expected (zip E1 E2)")
        e1, t1 = self.infer(sx[1])
        e2, t2 = self.infer(sx[2])
        n1, d1 = _exp_array(sx, t1)
        n2, d2 = _exp_array(sx, t2)
        if not nat_equal(n1, n2):
            raise _err(sx, f"zip of arrays of different sizes: {n1} vs {n2}")
        return apply_prim("zip", [n1, d1, d2], [e1, e2]), \
            ExpT(Array(n1, Pair(d1, d2)))

    def _form_split(self, sx):
        if len(sx) == 4:
            n, m = parse_nat(sx[1]), parse_nat(sx[2])
            e_sx = sx[3]
        elif len(sx) == 3:
            n, m = parse_nat(sx[1]), None
            e_sx = sx[2]
        else:
            raise _err(sx, "expected (split N E) or (split N M E)")
        e, et = self.infer(e_sx)
        size, d = _exp_array(sx, et)
        if m is None:
            m = nat_divide(size, n)
            if m is None:
                raise _err(sx, f"cannot divide array size {size} into chunks "
                               f"of {n}; write (split N M E)")
        elif not nat_equal(n * m, size):
            raise _err(sx, f"split sizes {n}*{m} do not cover {size}")
        return apply_prim("split", [n, m, d], [e]), \
            ExpT(Array(m, Array(n, d)))

    def _form_join(self, sx):
        if len(sx) != 2:
            raise _err(sx, "expected (join E)")
        e, et = self.infer(sx[1])
        n, row = _exp_array(sx, et)
        if not isinstance(row, Array):
            raise _err(sx, f"join of a non-nested array: {et}")
        return apply_prim("join", [n, row.size, row.elem], [e]), \
            ExpT(Array(n * row.size, row.elem))

    def _form_pair(self, sx):
        if len(sx) != 3:
            raise _err(sx, "expected (pair E1 E2)")
        e1, t1 = self.infer(sx[1])
        e2, t2 = self.infer(sx[2])
        d1, d2 = _exp_data(sx, t1), _exp_data(sx, t2)
        return apply_prim("pair", [d1, d2], [e1, e2]), ExpT(Pair(d1, d2))

    def _form_fst(self, sx):
        return self._pair_elim(sx, "fst")

    def _form_snd(self, sx):
        return self._pair_elim(sx, "snd")

    def _pair_elim(self, sx, which):
        if len(sx) != 2:
            raise _err(sx, f"expected ({which} E)")
        e, et = self.infer(sx[1])
        d = _exp_data(sx, et)
        if not isinstance(d, Pair):
            raise _err(sx, f"{which} of a non-pair expression: {et}")
        out = d.fst if which == "fst" else d.snd
        return apply_prim(which, [d.fst, d.snd], [e]), ExpT(out)

    def _form_negate(self, sx):
        if len(sx) != 2:
            raise _err(sx, "expected (negate E)")
        e, et = self.infer(sx[1])
        d = _exp_data(sx, et)
        if not isinstance(d, _ARITH_DOMAINS):
            raise _err(sx, f"negate of non-numeric type {et}")
        return apply_prim("negate", [d], [e]), et

    def _form_arith(self, sx):
        op = sx[0].text
        if len(sx) != 3:
            raise _err(sx, f"expected ({op} E1 E2)")
        d, e1, e2 = self._numeric_operands(sx, sx[1], sx[2])
        return apply_prim(op, [d], [PairP(e1, e2)]), ExpT(d)

    def _numeric_operands(self, sx, a_sx, b_sx):
        """Elaborate two operands at a common numeric (num or vector) type;
        bare literals adopt the other operand's type."""
        a_lit = isinstance(a_sx, Token) and _number(a_sx) is not None
        b_lit = isinstance(b_sx, Token) and _number(b_sx) is not None
        if a_lit and not b_lit:
            e2, t2 = self.infer(b_sx)
            d = _exp_data(sx, t2)
            e1 = self.check(a_sx, ExpT(d))
        elif b_lit and not a_lit:
            e1, t1 = self.infer(a_sx)
            d = _exp_data(sx, t1)
            e2 = self.check(b_sx, ExpT(d))
        else:
            e1, t1 = self.infer(a_sx)
            e2, t2 = self.infer(b_sx)
            d = _exp_data(sx, t1)
            d2 = _exp_data(sx, t2)
            if not data_equal(d, d2):
                raise _err(sx, f"operand type mismatch: {d} vs {d2}")
        if not isinstance(d, _ARITH_DOMAINS):
            raise _err(sx, f"arithmetic at non-numeric type {d}")
        return d, e1, e2

    def _form_idx(self, sx):
        if len(sx) != 3:
            raise _err(sx, "expected (idx E I)")
        e, et = self.infer(sx[1])
        n, d = _exp_array(sx, et)
        i = self.check(sx[2], ExpT(Idx(n)))
        return apply_prim("idx", [n, d], [e, i]), ExpT(d)

    def _form_as_vector(self, sx):
        name = sx[0].text
        for prefix in ("asVectorAcc", "asScalarAcc", "asVector", "asScalar"):
            if name.startswith(prefix) and name[len(prefix):].isdigit():
                w = int(name[len(prefix):])
                break
        else:
            raise _err(sx, f"unknown primitive: {name}")
        if w not in VECTOR_WIDTHS or name not in PRIMITIVES:
            raise _err(sx, f"illegal vector width in {name}")
        if len(sx) != 2:
            raise _err(sx, f"expected ({name} E)")
        e, et = self.infer(sx[1])
        if prefix == "asVector":
            size, d = _exp_array(sx, et)
            m = self._vector_chunks(sx, size, w, d)
            return apply_prim(name, [m], [e]), ExpT(Array(m, Vector(w)))
        if prefix == "asScalar":
            m, d = _exp_array(sx, et)
            if not data_equal(d, Vector(w)):
                raise _err(sx, f"{name} expects (vec {w}) elements, got {d}")
            return apply_prim(name, [m], [e]), ExpT(Array(m * w, NUM))
        if prefix == "asVectorAcc":
            m, d = _acc_array(sx, et)
            if not data_equal(d, Vector(w)):
                raise _err(sx, f"{name} expects (vec {w}) elements, got {d}")
            return apply_prim(name, [m], [e]), AccT(Array(m * w, NUM))
        size, d = _acc_array(sx, et)
        m = self._vector_chunks(sx, size, w, d)
        return apply_prim(name, [m], [e]), AccT(Array(m, Vector(w)))

    def _vector_chunks(self, sx, size, w, d):
        if not isinstance(d, Num):
            raise _err(sx, f"vector reshape needs num elements, got {d}")
        m = nat_divide(size, w)
        if m is None:
            raise _err(sx, f"array size {size} is not divisible by {w}")
        return m

    def _form_to_space(self, sx):
        name = sx[0].text
        if len(sx) != 3:
            raise _err(sx, f"expected ({name} F E)")
        e, et = self.infer(sx[2])
        d1 = _exp_data(sx, et)
        f, ft = self.check_fn(sx[1], [ExpT(d1)])
        d2 = _exp_data(sx, ft)
        wrapped = apply_prim(name, [d1, d2], [f])
        return App(wrapped, e), ExpT(d2)

    # -- imperative primitives --------------------------------------------

    def _form_skip(self, sx):  # pragma: no cover - 'skip' is a bare token
        return Prim("skip"), COMM

    def _form_seq(self, sx):
        if len(sx) < 3:
            raise _err(sx, "expected (seq C1 C2 ...)")
        cs = [self.check(c, COMM) for c in sx[1:]]
        out = cs[-1]
        for c in reversed(cs[:-1]):
            out = App(Prim(";"), PairP(c, out))
        return out, COMM

    def _form_assign(self, sx):
        if len(sx) != 3:
            raise _err(sx, "expected (:= A E)")
        a, at = self.infer(sx[1])
        if not isinstance(at, AccT):
            raise _err(sx, f"assignment target is not an acceptor: {at}")
        e = self.check(sx[2], ExpT(at.data))
        return apply_prim(":=", [at.data], [PairP(a, e)]), COMM

    def _form_new(self, sx):
        name = sx[0].text
        if len(sx) != 3:
            raise _err(sx, f"expected ({name} DTYPE F)")
        d = parse_data(sx[1])
        f, ft = self.check_fn(sx[2], [var_t(d)], ret_hint=COMM)
        if not isinstance(ft, CommT):
            raise _err(sx, f"{name} body must be a command, got {ft}")
        return apply_prim(name, [d], [f]), COMM

    def _form_for(self, sx):
        if len(sx) != 3:
            raise _err(sx, "expected (for N F)")
        n = parse_nat(sx[1])
        f, ft = self.check_fn(sx[2], [ExpT(Idx(n))], ret_hint=COMM)
        if not isinstance(ft, CommT):
            raise _err(sx, f"for body must be a command, got {ft}")
        return apply_prim("for", [n], [f]), COMM

    def _form_parfor(self, sx):
        name = sx[0].text
        if len(sx) != 3:
            raise _err(sx, f"expected ({name} A F)")
        a, at = self.infer(sx[1])
        n, d = _acc_array(sx, at)
        f, ft = self.check_fn(sx[2], [ExpT(Idx(n)), AccT(d)], ret_hint=COMM)
        if not isinstance(ft, CommT):
            raise _err(sx, f"{name} body must be a command, got {ft}")
        return apply_prim(name, [n, d], [a, f]), COMM

    def _form_mapi(self, sx):
        name = sx[0].text
        if len(sx) != 4:
            raise _err(sx, f"expected ({name} F E A)")
        e, et = self.infer(sx[2])
        n, d1 = _exp_array(sx, et)
        a, at = self.infer(sx[3])
        n2, d2 = _acc_array(sx, at)
        if not nat_equal(n, n2):
            raise _err(sx, f"{name} source and target sizes differ: "
                           f"{n} vs {n2}")
        f, ft = self.check_fn(sx[1], [ExpT(d1), AccT(d2)], ret_hint=COMM)
        if not isinstance(ft, CommT):
            raise _err(sx, f"{name} body must be a command, got {ft}")
        return apply_prim(name, [n, d1, d2], [f, e, a]), COMM

    def _form_reduceI(self, sx):
        if len(sx) != 5:
            raise _err(sx, "expected (reduceI F I E C)")
        e, et = self.infer(sx[3])
        n, d1 = _exp_array(sx, et)
        f, d2, init = self._reduce_operands(sx, sx[1], sx[2], d1,
                                            passive=True)
        c, ct = self.check_fn(sx[4], [ExpT(d2)], ret_hint=COMM)
        if not isinstance(ct, CommT):
            raise _err(sx, f"reduceI consumer must yield a command, got {ct}")
        return apply_prim("reduceI", [n, d1, d2], [f, init, e, c]), COMM

    def _form_idxAcc(self, sx):
        if len(sx) != 3:
            raise _err(sx, "expected (idxAcc A I)")
        a, at = self.infer(sx[1])
        n, d = _acc_array(sx, at)
        i = self.check(sx[2], ExpT(Idx(n)))
        return apply_prim("idxAcc", [n, d], [a, i]), AccT(d)

    def _form_splitAcc(self, sx):
        if len(sx) != 2:
            raise _err(sx, "expected (splitAcc A)")
        a, at = self.infer(sx[1])
        m, row = _acc_array(sx, at)
        if not isinstance(row, Array):
            raise _err(sx, f"splitAcc of a non-nested acceptor: {at}")
        return apply_prim("splitAcc", [row.size, m, row.elem], [a]), \
            AccT(Array(row.size * m, row.elem))

    def _form_joinAcc(self, sx):
        if len(sx) != 3:
            raise _err(sx, "expected (joinAcc M A)")
        m = parse_nat(sx[1])
        a, at = self.infer(sx[2])
        size, d = _acc_array(sx, at)
        n = nat_divide(size, m)
        if n is None:
            raise _err(sx, f"cannot divide acceptor size {size} into rows "
                           f"of {m}")
        return apply_prim("joinAcc", [n, m, d], [a]), \
            AccT(Array(n, Array(m, d)))

    def _form_pairAcc1(self, sx):
        return self._pair_acc(sx, 1)

    def _form_pairAcc2(self, sx):
        return self._pair_acc(sx, 2)

    def _pair_acc(self, sx, i):
        name = f"pairAcc{i}"
        if len(sx) != 2:
            raise _err(sx, f"expected ({name} A)")
        a, at = self.infer(sx[1])
        if not (isinstance(at, AccT) and isinstance(at.data, Pair)):
            raise _err(sx, f"{name} of a non-pair acceptor: {at}")
        d = at.data
        out = d.fst if i == 1 else d.snd
        return apply_prim(name, [d.fst, d.snd], [a]), AccT(out)

    def _form_zipAcc1(self, sx):
        return self._zip_acc(sx, 1)

    def _form_zipAcc2(self, sx):
        return self._zip_acc(sx, 2)

    def _zip_acc(self, sx, i):
        name = f"zipAcc{i}"
        if len(sx) != 2:
            raise _err(sx, f"expected ({name} A)")
        a, at = self.infer(sx[1])
        n, d = _acc_array(sx, at)
        if not isinstance(d, Pair):
            raise _err(sx, f"{name} of a non-pair-array acceptor: {at}")
        out = d.fst if i == 1 else d.snd
        return apply_prim(name, [n, d.fst, d.snd], [a]), AccT(Array(n, out))

    # -- fallback ----------------------------------------------------------

    def _generic_apply(self, sx):
        p, t = self.infer(sx[0])
        for arg_sx in sx[1:]:
            if not isinstance(t, FnT):
                raise _err(sx, f"applying a non-function of type {t}")
            arg = self.check(arg_sx, t.arg)
            p, t = App(p, arg), t.ret
        return p, t


def _uncurry(t: FnT) -> Tuple[List[PhraseType], PhraseType]:
    args: List[PhraseType] = []
    while isinstance(t, FnT):
        args.append(t.arg)
        t = t.ret
    return args, t


_MANGLE = {":=": "assign"}


def _mangle(name: str) -> str:
    return _MANGLE.get(name, name)
