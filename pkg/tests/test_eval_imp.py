import pytest

from dpia.c_ast import (CAssign, CBin, CBlock, CDecl, CFor, CIndex, CInt,
                        CVar)
from dpia.eval_imp import (RaceError, check_race, run_c, run_program)
from dpia.lower import stage2
from dpia.parser import parse, parse_phrase
from dpia.translate import translate_program
from dpia.types import AccT, ExpT, Num, array

N = Num()


def compile_source(src):
    sp = parse(src)
    s1 = translate_program(sp.body, sp.body_type.data, out="out")
    return sp, stage2(s1)


def test_parfor_write_footprints_disjoint():
    sp, s2 = compile_source("(param xs (exp (array 8 num)))\n"
                            "(map (lam x (* x 2)) xs)")
    params = [("out", array(8, N), "out"), ("xs", array(8, N), "in")]
    outs, _ = run_program(s2, params, {"xs": list(range(8))}, {})
    assert outs["out"] == [0, 2, 4, 6, 8, 10, 12, 14]


def test_seeded_racy_parfor_is_reported():
    # hand-built race: every iteration writes out[0], bypassing the type
    # checker entirely
    p, _ = parse_phrase(
        "(parfor out (lam (i (exp (idx 4)))"
        " (lam (o (acc num)) (:= (idxAcc out 0) 1))))",
        {"out": AccT(array(4, N))})
    params = [("out", array(4, N), "out")]
    with pytest.raises(RaceError):
        run_program(p, params, {}, {})


def test_overlapping_footprints_raise():
    fp = [{("a", (0,))}, {("a", (0,))}]
    with pytest.raises(RaceError):
        check_race(fp)
    check_race([{("a", (0,))}, {("a", (1,))}])  # disjoint: fine


def test_sequential_for_may_overwrite():
    # a plain for loop writing one cell repeatedly is not a race
    p, _ = parse_phrase(
        "(for 4 (lam (i (exp (idx 4))) (:= out 7)))", {"out": AccT(N)})
    outs, _ = run_program(p, [("out", N, "out")], {}, {})
    assert outs["out"] == 7


def test_reverse_parfor_identical_store():
    sp, s2 = compile_source(
        "(param xs (exp (array 12 num)))\n"
        "(reduce (+) 0 (map (lam x (* x x)) xs))")
    params = [("out", N, "out"), ("xs", array(12, N), "in")]
    inputs = {"xs": list(range(12))}
    fwd, _ = run_program(s2, params, dict(inputs), {})
    rev, _ = run_program(s2, params, dict(inputs), {},
                         reverse_parfor=True)
    assert fwd == rev


def test_var_mode_initialises_cell():
    p, _ = parse_phrase("(:= out 1)", {"out": AccT(N)})
    outs, _ = run_program(p, [("out", N, "out"), ("w", N, "var")],
                          {"w": 41}, {})
    assert outs == {"out": 1, "w": 41}


# ------------------------------------------------------- C-tree interpreter

def test_run_c_scalar_loop():
    stmts = [
        CDecl("long", "acc"),
        CAssign(CVar("acc"), CInt(0)),
        CFor("i", CInt(5), CBlock((
            CAssign(CVar("acc"),
                    CBin("+", CVar("acc"), CVar("i"))),)), kind="seq"),
    ]
    frame = run_c(stmts, {})
    assert frame["acc"] == 10


def test_run_c_array_write():
    stmts = [
        CFor("i", CInt(4), CBlock((
            CAssign(CIndex(CVar("out"), CVar("i")),
                    CBin("*", CIndex(CVar("xs"), CVar("i")), CInt(3))),)),
             kind="map"),
    ]
    frame = run_c(stmts, {"out": [0] * 4, "xs": [1, 2, 3, 4]})
    assert frame["out"] == [3, 6, 9, 12]


def test_run_c_int_division_truncates():
    stmts = [CAssign(CVar("q"), CBin("/", CInt(-7), CInt(2)))]
    assert run_c(stmts, {"q": 0})["q"] == -3
