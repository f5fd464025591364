"""Store-equality checks for the algebraic laws relating the intermediate
imperative primitives to their functional counterparts.  Each law is
exercised on 100+ randomized small instances (sizes <= 16)."""
import random

import pytest

from dpia.eval_imp import run_program
from dpia.lower import expand_intermediate, normalize
from dpia.parser import parse_phrase
from dpia.types import AccT, ExpT, Num, Pair, array

N = Num()
OPS = ("+", "-", "*")


def run_comm(src, env_types, params, inputs):
    p, t = parse_phrase(src, dict(env_types))
    assert str(t) == "comm"
    # expand intermediates on the imperative side; assignment right-hand
    # sides may stay functional (the interpreter evaluates them directly)
    outs, _ = run_program(normalize(expand_intermediate(p)), params,
                          dict(inputs), {})
    return outs


def equivalent(lhs, rhs, env_types, params, inputs):
    assert run_comm(lhs, env_types, params, inputs) == \
        run_comm(rhs, env_types, params, inputs)


def rand_array(rng, n):
    return [rng.randint(-20, 20) for _ in range(n)]


def cases(count=100, seed=0):
    rng = random.Random(seed)
    for _ in range(count):
        yield rng


@pytest.mark.parametrize("seed", range(4))
def test_mapi_is_assignment_of_map(seed):
    for rng in cases(25, seed):
        n = rng.randint(1, 16)
        op = rng.choice(OPS)
        c = rng.randint(1, 9)
        env = {"out": AccT(array(n, N)), "xs": ExpT(array(n, N))}
        params = [("out", array(n, N), "out"), ("xs", array(n, N), "in")]
        inputs = {"xs": rand_array(rng, n)}
        equivalent(
            f"(mapI (lam x (lam o (:= o ({op} x {c})))) xs out)",
            f"(:= out (map (lam x ({op} x {c})) xs))",
            env, params, inputs)


@pytest.mark.parametrize("seed", range(4))
def test_temporary_storage_is_unobservable(seed):
    # new d (\\tmp. tmp.1 := E; C(tmp.2))  ==  C(E)
    for rng in cases(25, seed):
        n = rng.randint(1, 16)
        i = rng.randint(0, n - 1)
        op = rng.choice(OPS)
        env = {"out": AccT(N), "xs": ExpT(array(n, N))}
        params = [("out", N, "out"), ("xs", array(n, N), "in")]
        inputs = {"xs": rand_array(rng, n)}
        e = f"(idx xs {i})"
        equivalent(
            f"(new num (lam tmp (seq (:= (proj1 tmp) {e})"
            f" (:= out ({op} (proj2 tmp) (proj2 tmp))))))",
            f"(:= out ({op} {e} {e}))",
            env, params, inputs)


@pytest.mark.parametrize("seed", range(4))
def test_reducei_is_continuation_of_reduce(seed):
    for rng in cases(25, seed):
        n = rng.randint(1, 16)
        init = rng.randint(-5, 5)
        op = rng.choice(OPS)
        env = {"out": AccT(N), "xs": ExpT(array(n, N))}
        params = [("out", N, "out"), ("xs", array(n, N), "in")]
        inputs = {"xs": rand_array(rng, n)}
        f_imp = f"(lam x (lam a (lam o (:= o ({op} x a)))))"
        f_fun = f"(lam x (lam a ({op} x a)))"
        equivalent(
            f"(reduceI {f_imp} {init} xs (lam v (:= out v)))",
            f"(:= out (reduce {f_fun} {init} xs))",
            env, params, inputs)


@pytest.mark.parametrize("seed", range(4))
def test_join_acceptor_agrees_with_split(seed):
    # writing a split view through joinAcc is writing the flat array
    for rng in cases(25, seed):
        m = rng.choice((1, 2, 4))
        k = rng.randint(1, 16 // m)
        n = m * k
        env = {"out": AccT(array(n, N)), "xs": ExpT(array(n, N))}
        params = [("out", array(n, N), "out"), ("xs", array(n, N), "in")]
        inputs = {"xs": rand_array(rng, n)}
        equivalent(
            f"(:= (joinAcc {m} out) (split {m} xs))",
            "(:= out xs)",
            env, params, inputs)


@pytest.mark.parametrize("seed", range(4))
def test_split_acceptor_agrees_with_join(seed):
    for rng in cases(25, seed):
        m = rng.choice((1, 2, 4))
        k = rng.randint(1, 16 // m)
        d = array(k, array(m, N))
        env = {"out": AccT(d), "xss": ExpT(d)}
        params = [("out", d, "out"), ("xss", d, "in")]
        inputs = {"xss": [rand_array(rng, m) for _ in range(k)]}
        equivalent(
            "(:= (splitAcc out) (join xss))",
            "(:= out xss)",
            env, params, inputs)


@pytest.mark.parametrize("seed", range(4))
def test_zip_acceptors_agree_with_zip(seed):
    for rng in cases(25, seed):
        n = rng.randint(1, 16)
        d = array(n, Pair(N, N))
        env = {"out": AccT(d), "as_": ExpT(array(n, N)),
               "bs": ExpT(array(n, N))}
        params = [("out", d, "out"), ("as_", array(n, N), "in"),
                  ("bs", array(n, N), "in")]
        inputs = {"as_": rand_array(rng, n), "bs": rand_array(rng, n)}
        equivalent(
            "(seq (:= (zipAcc1 out) as_) (:= (zipAcc2 out) bs))",
            "(:= out (zip as_ bs))",
            env, params, inputs)


@pytest.mark.parametrize("seed", range(4))
def test_pair_acceptors_agree_with_pair(seed):
    for rng in cases(25, seed):
        d = Pair(N, N)
        env = {"out": AccT(d), "x": ExpT(N), "y": ExpT(N)}
        params = [("out", d, "out"), ("x", N, "in"), ("y", N, "in")]
        inputs = {"x": rng.randint(-20, 20), "y": rng.randint(-20, 20)}
        equivalent(
            "(seq (:= (pairAcc1 out) x) (:= (pairAcc2 out) y))",
            "(:= out (pair x y))",
            env, params, inputs)


@pytest.mark.parametrize("seed", range(2))
def test_vector_acceptor_agrees_with_reshape(seed):
    for rng in cases(25, seed):
        w = rng.choice((2, 4))
        k = rng.randint(1, 16 // w)
        n = w * k
        env = {"out": AccT(array(n, N)), "xs": ExpT(array(n, N))}
        params = [("out", array(n, N), "out"), ("xs", array(n, N), "in")]
        inputs = {"xs": rand_array(rng, n)}
        equivalent(
            f"(:= (asScalarAcc{w} out) (asVector{w} xs))",
            "(:= out xs)",
            env, params, inputs)
