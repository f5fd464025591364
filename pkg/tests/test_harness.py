import pytest

from dpia.checker import type_check
from dpia.harness import (differential_check, fuzz, generate_program,
                          random_inputs, shrink)
from dpia.phrases import alpha_equal
from dpia.types import ExpT


def test_generation_is_deterministic():
    a = generate_program(42)
    b = generate_program(42)
    assert alpha_equal(a.body, b.body)
    assert random_inputs(a, 42) == random_inputs(b, 42)


def test_generated_programs_are_well_typed():
    for seed in range(30):
        sp = generate_program(seed, depth=3, sizes=32)
        t, _ = type_check(sp.body, delta=sp.delta, pi=sp.pi,
                          gamma=sp.gamma)
        assert isinstance(t, ExpT)


def test_differential_check_passes():
    for seed in range(20):
        report = differential_check(generate_program(seed), seed=seed)
        assert report.ok, (seed, report.failures)


def test_fuzz_smoke():
    res = fuzz(seeds=60, depth=4, sizes=64)
    assert res.passed == 60
    assert res.failed == []
    # a healthy corpus exercises the core combinators
    for prim in ("map", "reduce", "zip", "split", "join"):
        assert res.coverage[prim] > 0, prim
    # and some programs survive the OpenCL legality gate
    assert res.opencl_checked > 0


def test_shrink_reduces_sizes():
    sp = shrink(7, depth=4, sizes=64)
    t, _ = type_check(sp.body, delta=sp.delta, pi=sp.pi, gamma=sp.gamma)
    assert isinstance(t, ExpT)
