import random

import pytest
from hypothesis import given, strategies as st

from dpia.nat import (NatAdd, NatConst, NatMul, NatVar, nat, nat_divide,
                      nat_equal, nat_eval, nat_free_vars, nat_normalize,
                      nat_str)

VARS = ("n", "m", "k")


def nat_terms(depth=3):
    leaf = st.one_of(st.integers(0, 9).map(NatConst),
                     st.sampled_from(VARS).map(NatVar))
    return st.recursive(
        leaf,
        lambda sub: st.tuples(sub, sub).flatmap(
            lambda ab: st.sampled_from([NatAdd(*ab), NatMul(*ab)])),
        max_leaves=8)


@given(nat_terms(), st.lists(st.integers(0, 50), min_size=3, max_size=3))
def test_normalize_preserves_value(e, vals):
    # oracle: evaluate under random assignments before and after
    sigma = dict(zip(VARS, vals))
    assert nat_eval(nat_normalize(e), sigma) == nat_eval(e, sigma)


@given(nat_terms())
def test_normalize_idempotent(e):
    once = nat_normalize(e)
    assert nat_normalize(once) == once


def test_equal_is_semantic():
    a = NatMul(NatAdd(NatVar("n"), NatConst(1)), NatVar("m"))
    b = NatAdd(NatMul(NatVar("n"), NatVar("m")), NatVar("m"))
    assert nat_equal(a, b)
    assert not nat_equal(a, NatVar("n"))


def test_nat_coercion():
    assert nat(3) == NatConst(3)
    assert nat("n") == NatVar("n")
    e = NatAdd(NatVar("n"), NatConst(0))
    assert nat(e) is e


def test_free_vars():
    e = NatMul(NatAdd(NatVar("n"), NatConst(2)), NatVar("m"))
    assert nat_free_vars(e) == {"n", "m"}


def test_divide_exact():
    e = NatMul(NatConst(4), NatVar("n"))
    q = nat_divide(e, 4)
    assert q is not None and nat_equal(q, NatVar("n"))
    assert nat_divide(NatVar("n"), 4) is None
    assert nat_divide(NatConst(12), NatConst(3)) == NatConst(4)


def test_divide_symbolic_factor():
    e = NatMul(NatVar("n"), NatVar("m"))
    q = nat_divide(e, NatVar("m"))
    assert q is not None and nat_equal(q, NatVar("n"))


@given(nat_terms(), st.lists(st.integers(1, 20), min_size=3, max_size=3))
def test_str_parses_back_consistently(e, vals):
    # nat_str is only for display, but it must at least be deterministic
    assert nat_str(e) == nat_str(e)
    sigma = dict(zip(VARS, vals))
    assert nat_eval(e, sigma) >= 0


def test_eval_unbound_var():
    with pytest.raises(KeyError):
        nat_eval(NatVar("q"), {})
