import random

from hypothesis import given, strategies as st

from dpia.eval_fn import (VectorVal, apply_op, divide, eval_phrase,
                          flatten_value, unflatten_value, zero_value)
from dpia.parser import parse
from dpia.types import Num, Pair, Vector, array

NUM = Num()


def run(src, **inputs):
    sp = parse(src)
    return eval_phrase(sp.body, inputs)


def test_dot_product():
    src = ("(param xs (exp (array 4 num)))\n"
           "(param ys (exp (array 4 num)))\n"
           "(reduce (+) 0 (map (lam x (* (fst x) (snd x))) (zip xs ys)))")
    assert run(src, xs=[1, 2, 3, 4], ys=[5, 6, 7, 8]) == 70


@given(st.lists(st.integers(-99, 99), min_size=12, max_size=12))
def test_join_split_identity(xs):
    src = "(param xs (exp (array 12 num)))\n(join (split 4 xs))"
    assert run(src, xs=xs) == xs


@given(st.lists(st.integers(-99, 99), min_size=8, max_size=8))
def test_asscalar_asvector_identity(xs):
    src = "(param xs (exp (array 8 num)))\n(asScalar4 (asVector4 xs))"
    assert run(src, xs=xs) == xs


@given(st.lists(st.integers(-99, 99), min_size=8, max_size=8))
def test_vectorized_map_agrees_with_scalar(xs):
    vec = ("(param xs (exp (array 8 num)))\n"
           "(asScalar2 (map (lam v (+ v v)) (asVector2 xs)))")
    plain = "(param xs (exp (array 8 num)))\n(map (lam x (+ x x)) xs)"
    assert run(vec, xs=xs) == run(plain, xs=xs)


@given(st.lists(st.integers(-99, 99), min_size=6, max_size=6))
def test_reduce_split_invariance(xs):
    # reducing chunk-wise partial sums equals the flat reduction
    flat = "(param xs (exp (array 6 num)))\n(reduce (+) 0 xs)"
    nested = ("(param xs (exp (array 6 num)))\n"
              "(reduce (+) 0 (map (lam (c (exp (array 2 num)))"
              " (reduce (+) 0 c)) (split 2 xs)))")
    assert run(flat, xs=xs) == run(nested, xs=xs)


def test_map_hierarchy_variants_agree():
    xs = [3, 1, 4, 1, 5, 9]
    outs = set()
    for m in ("map", "mapGlobal", "mapWorkgroup", "mapLocal", "mapSeq"):
        src = (f"(param xs (exp (array 6 num)))\n"
               f"({m} (lam x (* x x)) xs)")
        outs.add(tuple(run(src, xs=xs)))
    assert outs == {(9, 1, 16, 1, 25, 81)}


def test_to_space_wrappers_are_identity():
    xs = [1, 2, 3, 4]
    for w in ("toGlobal", "toLocal", "toPrivate"):
        src = (f"(param xs (exp (array 4 num)))\n"
               f"({w} (map (lam x (+ x 1))) xs)")
        assert run(src, xs=xs) == [2, 3, 4, 5]


def test_zip_of_pairs():
    src = ("(param xs (exp (array 3 num)))\n"
           "(param ys (exp (array 3 num)))\n"
           "(map (lam p (- (fst p) (snd p))) (zip xs ys))")
    assert run(src, xs=[5, 5, 5], ys=[1, 2, 3]) == [4, 3, 2]


def test_divide_truncates_like_c():
    assert divide(7, 2) == 3
    assert divide(-7, 2) == -3
    assert divide(7, -2) == -3
    assert divide(7.0, 2.0) == 3.5


def test_apply_op_broadcasts_vectors():
    v = VectorVal((1, 2, 3, 4))
    assert apply_op("+", v, 10) == VectorVal((11, 12, 13, 14))
    assert apply_op("*", 2, v) == VectorVal((2, 4, 6, 8))


def test_flatten_unflatten_roundtrip():
    d = array(2, Pair(NUM, Vector(2)))
    rng = random.Random(7)
    v = [(rng.randint(0, 9), VectorVal((1, 2))),
         (rng.randint(0, 9), VectorVal((3, 4)))]
    assert unflatten_value(d, flatten_value(v), {}) == v


def test_zero_value_shapes():
    d = array(3, Pair(NUM, NUM))
    assert zero_value(d, {}) == [(0, 0)] * 3
    assert zero_value(Vector(4), {}, float_mode=True) == \
        VectorVal((0.0,) * 4)
