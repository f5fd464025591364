"""Command-line driver: compile .dpia files to pseudo-C, OpenMP C or
OpenCL, run programs on concrete inputs, and fuzz the pipeline.

Exit codes: 0 success, 2 parse error, 3 type error, 70 internal error.
"""
from __future__ import annotations

import argparse
import ast
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .c_ast import (CBlock, CFunction, CIndex, CInt, CProgram, CVar,
                    program_text)
from .checker import DpiaTypeError, type_check
from .codegen_c import CodeGen
from .eval_imp import run_program
from .lower import stage2
from .opencl import emit_kernel, hoist_allocations, lint_hierarchy
from .parser import ElabError, ParseError, SourceProgram, parse
from .pretty import pretty_print
from .translate import translate_program
from .types import Array, ExpT

EXIT_PARSE = 2
EXIT_TYPE = 3
EXIT_INTERNAL = 70


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load(path: str) -> SourceProgram:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}", EXIT_PARSE)
    try:
        sp = parse(text)
    except ElabError as e:
        raise CliError(f"{path}: type error: {e}", EXIT_TYPE)
    except ParseError as e:
        raise CliError(f"{path}: parse error: {e}", EXIT_PARSE)
    try:
        type_check(sp.body, delta=sp.delta, pi=sp.pi, gamma=sp.gamma)
    except DpiaTypeError as e:
        raise CliError(f"{path}: type error: {e}", EXIT_TYPE)
    if not isinstance(sp.body_type, ExpT):
        raise CliError(f"{path}: type error: program body must be an "
                       f"expression, got {sp.body_type}", EXIT_TYPE)
    return sp


def _emit_c(sp: SourceProgram, dialect: str, float_mode: bool,
            init_new: bool, simplify: bool, fn_name: str) -> str:
    delta = sp.body_type.data
    stage1 = translate_program(sp.body, delta, out="out")
    imp = stage2(stage1)
    cg = CodeGen(float_mode=float_mode, dialect=dialect,
                 simplify=simplify, init_new=init_new)
    scalar = cg.scalar
    env: Dict[str, object] = {}
    params: List[str] = []
    for name, d, is_out in [("out", delta, True)] + \
            [(n, t.data, False) for n, t in sp.params]:
        qual = "" if is_out else "const "
        if isinstance(d, Array):
            dims = cg.ctype_of(d)[1]
            cg.flat_dims[name] = list(dims)
            env[name] = CVar(name)
            params.append(f"{qual}{scalar} *{name}")
        else:
            # scalar and pair outputs/inputs pass by pointer for outputs
            if is_out:
                env[name] = CIndex(CVar(name), CInt(0))
                params.append(f"{cg.ctype_of(d)[0]} *{name}")
            else:
                env[name] = CVar(name)
                params.append(f"const {cg.ctype_of(d)[0]} {name}")
    params += [f"int {n}" for n in sorted(sp.nat_params)]
    stmts = cg.comm(imp, env)
    fn = CFunction(fn_name, tuple(params), CBlock(tuple(stmts)))
    prog = CProgram(structs=sorted(cg.structs.values(),
                                   key=lambda s: s.name),
                    functions=[fn])
    return program_text(prog, dialect)


def _compile(args) -> int:
    sp = _load(args.file)
    if args.check_only:
        print(f"{args.file}: OK ({sp.body_type})")
        return 0
    delta = sp.body_type.data
    base = Path(args.file).with_suffix("")
    float_mode = not args.int_mode
    simplify = args.simplify_indices != "off"

    if args.dump_stages:
        space = "global" if args.target == "opencl" else None
        s1 = translate_program(sp.body, delta, out="out",
                               default_space=space)
        accum = "private" if args.target == "opencl" else None
        s2 = stage2(s1, accum_space=accum)
        Path(f"{base}.stage1.dpia").write_text(pretty_print(s1) + "\n")
        Path(f"{base}.stage2.dpia").write_text(pretty_print(s2) + "\n")
        print(f"wrote {base}.stage1.dpia, {base}.stage2.dpia")

    name = Path(args.file).stem.replace("-", "_")
    if args.target == "pseudo-c":
        out = args.output or f"{base}.pseudo.c"
        text = _emit_c(sp, "pseudo", float_mode, args.init_new, simplify,
                       name)
    elif args.target == "c-openmp":
        out = args.output or f"{base}.c"
        text = _emit_c(sp, "openmp", float_mode, args.init_new, simplify,
                       name)
    else:  # opencl
        out = args.output or f"{base}.cl"
        s1 = translate_program(sp.body, delta, out="out",
                               default_space="global")
        imp = stage2(s1, accum_space="private")
        for w in lint_hierarchy(imp):
            print(f"warning: {w}", file=sys.stderr)
        hoisted, _bufs = hoist_allocations(imp)
        text, _sig = emit_kernel(
            hoisted, [("out", delta)],
            [(n, t.data) for n, t in sp.params],
            float_mode=float_mode, name=name, init_new=args.init_new,
            simplify=simplify)
    Path(out).write_text(text)
    print(f"wrote {out}")
    return 0


def _parse_inputs(path: str) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{ln}: expected key=value", EXIT_PARSE)
        key, _, value = line.partition("=")
        try:
            out[key.strip()] = ast.literal_eval(value.strip())
        except (ValueError, SyntaxError) as e:
            raise CliError(f"{path}:{ln}: bad value: {e}", EXIT_PARSE)
    return out


def _run(args) -> int:
    sp = _load(args.file)
    delta = sp.body_type.data
    data = _parse_inputs(args.inputs) if args.inputs else {}
    sigma = {}
    for n in sp.nat_params:
        if n not in data:
            raise CliError(f"missing size parameter {n}=...", EXIT_PARSE)
        sigma[n] = int(data[n])
    inputs = {}
    for n, t in sp.params:
        if n not in data:
            raise CliError(f"missing input {n}=...", EXIT_PARSE)
        inputs[n] = data[n]
    space = "global" if args.launch else None
    stage1 = translate_program(sp.body, delta, out="out",
                               default_space=space)
    accum = "private" if args.launch else None
    imp = stage2(stage1, accum_space=accum)
    params = [("out", delta, "out")] + \
        [(n, t.data, "in") for n, t in sp.params]
    float_mode = not args.int_mode
    if args.launch:
        from .opencl import simulate_kernel
        g, l = args.launch
        hoisted, _ = hoist_allocations(imp)
        outs = simulate_kernel(hoisted, params, inputs, (g, l), sigma,
                               float_mode)
    else:
        outs, _store = run_program(imp, params, inputs, sigma, float_mode,
                                   reverse_parfor=args.reverse)
    for k in sorted(outs):
        print(f"{k} = {outs[k]}")
    return 0


def _fuzz(args) -> int:
    from .harness import fuzz as run_fuzz
    res = run_fuzz(seeds=args.seeds, depth=args.depth, sizes=args.sizes)
    print(f"{res.passed}/{res.seeds} passed "
          f"({res.opencl_checked} also simulated as kernels)")
    for seed, failures in res.failed:
        print(f"seed {seed}: {'; '.join(failures)}")
    if args.junit:
        _write_junit(args.junit, res)
    return 0 if not res.failed else 1


def _write_junit(path: str, res) -> None:
    from xml.sax.saxutils import escape
    lines = [f'<testsuite name="dpia-fuzz" tests="{res.seeds}" '
             f'failures="{len(res.failed)}">']
    bad = dict(res.failed)
    for seed in range(res.seeds):
        lines.append(f'  <testcase name="seed-{seed}">')
        if seed in bad:
            msg = escape("; ".join(bad[seed]))
            lines.append(f'    <failure message="{msg}"/>')
        lines.append("  </testcase>")
    lines.append("</testsuite>")
    Path(path).write_text("\n".join(lines) + "\n")


def _launch_pair(text: str) -> Tuple[int, int]:
    try:
        g, l = (int(x) for x in text.split(","))
        if g < 1 or l < 1:
            raise ValueError
        return g, l
    except ValueError:
        raise argparse.ArgumentTypeError(
            "launch must be G,L with positive integers")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpia")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a .dpia file")
    c.add_argument("file")
    c.add_argument("--target", choices=["pseudo-c", "c-openmp", "opencl"],
                   default="pseudo-c")
    c.add_argument("-o", "--output")
    c.add_argument("--dump-stages", action="store_true")
    c.add_argument("--init-new", action="store_true",
                   help="zero-initialize allocations explicitly")
    c.add_argument("--check-only", action="store_true")
    c.add_argument("--simplify-indices", choices=["on", "off"],
                   default="on")
    _mode_flags(c)
    c.set_defaults(fn=_compile)

    r = sub.add_parser("run", help="execute a .dpia file on inputs")
    r.add_argument("file")
    r.add_argument("--inputs", help="key=value file; arrays in brackets")
    r.add_argument("--launch", type=_launch_pair,
                   help="G,L: simulate as an OpenCL kernel")
    r.add_argument("--reverse", action="store_true",
                   help="run parfor iterations in reverse order")
    _mode_flags(r)
    r.set_defaults(fn=_run)

    f = sub.add_parser("fuzz", help="differential fuzzing")
    f.add_argument("--seeds", type=int, default=1000)
    f.add_argument("--depth", type=int, default=4)
    f.add_argument("--sizes", type=int, default=64)
    f.add_argument("--junit", help="write a JUnit-style XML report")
    f.set_defaults(fn=_fuzz)
    return ap


def _mode_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--float", dest="int_mode", action="store_false",
                   help="float values (default)")
    g.add_argument("--int", dest="int_mode", action="store_true",
                   help="exact integer values")
    p.set_defaults(int_mode=False)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(str(e), file=sys.stderr)
        return e.code
    except (ParseError, DpiaTypeError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_PARSE if isinstance(e, ParseError) else EXIT_TYPE
    except Exception as e:  # noqa: BLE001 - anything else is internal
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
