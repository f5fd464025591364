import pytest

from dpia.eval_fn import eval_phrase
from dpia.lower import stage2
from dpia.nat import NatMul, NatVar, nat_equal
from dpia.opencl import (HoistedBuffer, OpenCLError, WorkItemRace,
                         emit_kernel, fully_parallel, hoist_allocations,
                         insert_barriers, lint_hierarchy, opencl_legal,
                         simulate_kernel)
from dpia.parser import parse, parse_phrase
from dpia.phrases import Prim, subtree_iter
from dpia.pretty import pretty_print
from dpia.translate import translate_program
from dpia.types import AccT, Array, Num, array

N = Num()


def kernel_pipeline(src):
    sp = parse(src)
    s1 = translate_program(sp.body, sp.body_type.data, out="out",
                           default_space="global")
    return sp, stage2(s1, accum_space="private")


# ------------------------------------------------------------------ linting

def test_legal_hierarchy_passes_lint():
    sp, s2 = kernel_pipeline(
        "(param xs (exp (array 8 num)))\n"
        "(mapWorkgroup (lam (c (exp (array 4 num)))"
        " (mapLocal (lam x (+ x 1)) c)) (split 4 xs))")
    assert lint_hierarchy(s2) == []
    assert fully_parallel(s2)
    assert opencl_legal(s2)


def test_nested_global_loops_flagged():
    sp, s2 = kernel_pipeline(
        "(param xss (exp (array 4 (array 4 num))))\n"
        "(mapGlobal (lam (r (exp (array 4 num)))"
        " (mapGlobal (lam x (+ x 1)) r)) xss)")
    assert any("nested" in w for w in lint_hierarchy(s2))
    assert not opencl_legal(s2)


def test_local_without_workgroup_flagged():
    sp, s2 = kernel_pipeline(
        "(param xs (exp (array 8 num)))\n"
        "(mapLocal (lam x (+ x 1)) xs)")
    assert any("work-group" in w for w in lint_hierarchy(s2))


def test_workgroup_only_is_not_fully_parallel():
    # without a local/global loop every work item would redo the same
    # writes, racing on the output
    sp, s2 = kernel_pipeline(
        "(param xs (exp (array 8 num)))\n"
        "(mapWorkgroup (lam (c (exp (array 4 num)))"
        " (mapSeq (lam x (+ x 1)) c)) (split 4 xs))")
    assert lint_hierarchy(s2) == []
    assert not fully_parallel(s2)
    assert not opencl_legal(s2)


# ------------------------------------------------------------------ hoisting

HOIST_SRC = ("(nat n)\n"
             "(param xss (exp (array n (array 1024 num))))\n"
             "(mapGlobal (lam (row (exp (array 1024 num)))"
             " (reduce (+) 0 (toGlobal (mapSeq (lam x (* x x))) row)))"
             " xss)")


def test_hoist_lifts_allocation_to_top():
    sp, s2 = kernel_pipeline(HOIST_SRC)
    hoisted, buffers = hoist_allocations(s2)
    assert len(buffers) == 1
    buf = buffers[0]
    assert buf.space == "global"
    # per-iteration 1024.num buffer grows to an n x 1024 array
    assert isinstance(buf.dtype, Array)
    assert nat_equal(buf.dtype.size, NatVar("n"))
    assert nat_equal(buf.dtype.elem.size, 1024)
    # no allocation remains under the loop
    body = pretty_print(hoisted)
    assert body.count("newGlobal") == 1
    assert f"(idxAcc (proj1 {buf.name}" in body
    assert f"(idx (proj2 {buf.name}" in body


def test_hoist_preserves_semantics():
    src = HOIST_SRC.replace("1024", "8")
    sp, s2 = kernel_pipeline(src)
    assert opencl_legal(s2)
    hoisted, _ = hoist_allocations(s2)
    xss = [[i * 8 + j for j in range(8)] for i in range(3)]
    ref = eval_phrase(sp.body, {"xss": xss}, {"n": 3})
    params = [("out", array(NatVar("n"), N), "out"),
              ("xss", array(NatVar("n"), array(8, N)), "in")]
    for phrase in (s2, hoisted):
        outs = simulate_kernel(phrase, params, {"xss": xss}, (2, 2),
                               {"n": 3})
        assert outs["out"] == ref


# ------------------------------------------------------------------ kernels

VEC_SRC = (
    "(param xs (exp (array 64 num)))\n"
    "(param ys (exp (array 64 num)))\n"
    "(asScalar4 (join (mapWorkgroup"
    " (lam (zs1 (exp (array 8 (pair (vec 4) (vec 4)))))"
    "  (mapLocal (lam (zs2 (exp (array 4 (pair (vec 4) (vec 4)))))"
    "   (reduce (lam (x (exp (pair (vec 4) (vec 4))))"
    "            (lam (a (exp (vec 4))) (+ (* (fst x) (snd x)) a)))"
    "           0 zs2))"
    "   (split 4 zs1)))"
    " (split 8 (zip (asVector4 xs) (asVector4 ys))))))")


def test_emit_kernel_text():
    sp, s2 = kernel_pipeline(VEC_SRC)
    assert opencl_legal(s2)
    hoisted, _ = hoist_allocations(s2)
    text, sig = emit_kernel(hoisted, [("out", sp.body_type.data)],
                            [(n, t.data) for n, t in sp.params],
                            name="dotvec")
    assert "kernel void dotvec" in text
    assert "get_group_id(0)" in text and "get_local_id(0)" in text
    assert "vload4" in text and "vstore4" in text
    assert "float4" in text
    assert "global float *out" in text
    assert "const global float *restrict xs" in text


def test_emit_kernel_rejects_unhoisted_allocations():
    sp, s2 = kernel_pipeline(HOIST_SRC.replace("1024", "8"))
    with pytest.raises(OpenCLError):
        emit_kernel(s2, [("out", sp.body_type.data)],
                    [(n, t.data) for n, t in sp.params])


def test_barriers_between_local_phases():
    # write-then-read of a local buffer across a seq needs a barrier
    from dpia.types import var_t
    env = {"out": AccT(array(2, N)), "buf": var_t(array(2, N))}
    src = ("(seq (:= (idxAcc (proj1 buf) 0) 1)"
           " (:= (idxAcc out 0) (idx (proj2 buf) 0)))")
    p, _ = parse_phrase(src, env)
    with_barrier = insert_barriers(p, ["buf"])
    names = [s.name for s in subtree_iter(with_barrier)
             if isinstance(s, Prim)]
    assert "barrier" in names
    # no local buffer involved: the phrase is left alone
    assert insert_barriers(p, []) == p


def test_simulation_matches_reference_across_launches():
    sp, s2 = kernel_pipeline(VEC_SRC)
    xs = [(3 * i) % 17 for i in range(64)]
    ys = [(5 * i) % 13 for i in range(64)]
    ref = eval_phrase(sp.body, {"xs": xs, "ys": ys})
    params = [("out", sp.body_type.data, "out"),
              ("xs", array(64, N), "in"), ("ys", array(64, N), "in")]
    for launch in ((1, 1), (2, 2), (2, 4), (4, 8)):
        outs = simulate_kernel(s2, params, {"xs": xs, "ys": ys}, launch)
        assert outs["out"] == ref, launch


def test_simulation_reports_cross_item_races():
    p, _ = parse_phrase(
        "(parforGlobal out (lam (i (exp (idx 4)))"
        " (lam (o (acc num)) (:= (idxAcc out 0) 1))))",
        {"out": AccT(array(4, N))})
    with pytest.raises(WorkItemRace):
        simulate_kernel(p, [("out", array(4, N), "out")], {}, (2, 2))


def test_bad_launch_rejected():
    sp, s2 = kernel_pipeline(VEC_SRC)
    params = [("out", sp.body_type.data, "out"),
              ("xs", array(64, N), "in"), ("ys", array(64, N), "in")]
    with pytest.raises(ValueError):
        simulate_kernel(s2, params, {"xs": [0] * 64, "ys": [0] * 64},
                        (0, 4))
