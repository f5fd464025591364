import pytest

from dpia.checker import DpiaTypeError, type_check
from dpia.parser import parse, parse_phrase
from dpia.types import (AccT, Array, CommT, ExpT, Num, ProdT, is_passive,
                        var_t)

NUM = Num()


def check_source(text):
    sp = parse(text)
    return type_check(sp.body, delta=sp.delta, pi=sp.pi, gamma=sp.gamma)


def test_dot_product_checks():
    t, usage = check_source(
        "(param xs (exp (array 8 num)))\n"
        "(param ys (exp (array 8 num)))\n"
        "(reduce (+) 0 (map (lam x (* (fst x) (snd x))) (zip xs ys)))")
    assert t == ExpT(NUM)
    # expression parameters are passive: reading cannot interfere
    assert usage.active == set()
    assert usage.passive == {"xs", "ys"}


def test_assignment_checks():
    t, usage = check_source(
        "(param out (acc num))\n(param x (exp num))\n(:= out (+ x 1))")
    assert isinstance(t, CommT)
    assert usage.active == {"out"}


def test_parfor_distributes_acceptor():
    t, usage = check_source(
        "(param out (acc (array 4 num)))\n"
        "(parfor out (lam (i (exp (idx 4))) (lam (o (acc num)) (:= o 1))))")
    assert isinstance(t, CommT)
    assert usage.active == {"out"}


def test_parfor_rejects_captured_acceptor():
    # the canonical race: every parallel iteration writes the same cell
    with pytest.raises(DpiaTypeError) as ei:
        check_source(
            "(param out (acc (array 4 num)))\n"
            "(param b (acc num))\n"
            "(parfor out (lam (i (exp (idx 4)))"
            " (lam (o (acc num)) (:= b 1))))")
    msg = str(ei.value)
    assert "passive" in msg
    assert "'b'" in msg


def test_parfor_body_may_read_shared_state():
    # reads are passive uses and do not block promotion
    t, _ = check_source(
        "(param out (acc (array 4 num)))\n"
        "(param x (exp num))\n"
        "(parfor out (lam (i (exp (idx 4)))"
        " (lam (o (acc num)) (:= o (* x x)))))")
    assert isinstance(t, CommT)


def test_seq_allows_sharing():
    # sequencing the same acceptor is fine; only parallelism interferes
    t, usage = check_source(
        "(param b (acc num))\n(seq (:= b 1) (:= b 2))")
    assert isinstance(t, CommT)
    assert usage.active == {"b"}


def test_new_scopes_variable():
    t, usage = check_source(
        "(param out (acc num))\n"
        "(new num (lam tmp (seq (:= (proj1 tmp) 1)"
        " (:= out (proj2 tmp)))))")
    assert isinstance(t, CommT)
    assert usage.active == {"out"}


def test_zone_overlap_rejected():
    sp = parse("(param x (exp num))\nx")
    with pytest.raises(DpiaTypeError):
        type_check(sp.body, pi={"x": ExpT(NUM)},
                   gamma={"x": ExpT(NUM)})


def test_unbound_identifier():
    body, _ = parse_phrase("(:= out 1)", {"out": AccT(NUM)})
    with pytest.raises(DpiaTypeError):
        type_check(body)  # no context at all


def test_passivity_of_types():
    assert is_passive(ExpT(NUM))
    assert not is_passive(AccT(NUM))
    assert not is_passive(CommT())
    assert not is_passive(var_t(NUM))
    assert is_passive(ProdT(ExpT(NUM), ExpT(NUM)))


def test_passive_context_cannot_be_written():
    body, _ = parse_phrase("(:= out 1)", {"out": AccT(NUM)})
    with pytest.raises(DpiaTypeError) as ei:
        type_check(body, pi={"out": AccT(NUM)})
    assert "passive" in str(ei.value)
