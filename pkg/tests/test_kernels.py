import numpy as np
import pytest
from hypothesis import given, strategies as st

from kinex.kernels import (
    DomainError,
    LambdaLaw,
    ModelSpec,
    Variant,
    _bidirectional,
    _distributed_saving,
    _no_saving,
    _uniform_saving,
    exchange_bidirectional,
    exchange_distributed_saving,
    exchange_no_saving,
    exchange_uniform_saving,
)

EPS = np.finfo(float).eps


@pytest.mark.parametrize("args, expected", [
    ((1.0, 3.0, 0.5), (2.0, 2.0)),
    ((0.0, 0.0, 0.7), (0.0, 0.0)),
    ((2.0, 2.0, 0.25), (1.0, 3.0)),
])
def test_no_saving_examples(args, expected):
    assert exchange_no_saving(*args) == expected


@pytest.mark.parametrize("args, expected", [
    ((1.0, 3.0, 0.5, 0.5), (1.5, 2.5)),
    ((1.0, 3.0, 1.0, 0.9), (1.0, 3.0)),
    ((1.0, 3.0, 0.0, 0.5), (2.0, 2.0)),
])
def test_uniform_saving_examples(args, expected):
    assert exchange_uniform_saving(*args) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("args, expected", [
    ((1.0, 1.0, 0.2, 0.6, 0.5), (0.8, 1.2)),
    ((1.0, 3.0, 0.5, 0.5, 0.5), (1.5, 2.5)),
    ((5.0, 0.0, 0.9, 0.1, 0.0), (4.5, 0.5)),
])
def test_distributed_saving_examples(args, expected):
    assert exchange_distributed_saving(*args) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("args, expected", [
    ((1.0, 3.0, 1.0, 0.0), (1.0, 3.0)),
    ((1.0, 3.0, 0.0, 1.0), (3.0, 1.0)),
    ((2.0, 4.0, 0.5, 0.5), (3.0, 3.0)),
])
def test_bidirectional_examples(args, expected):
    assert exchange_bidirectional(*args) == expected


def test_outcome_fields():
    out = exchange_no_saving(1.0, 3.0, 0.25)
    assert (out.wi_new, out.wj_new) == (1.0, 3.0)


@pytest.mark.parametrize("call", [
    lambda: exchange_no_saving(-1.0, 1.0, 0.5),
    lambda: exchange_no_saving(1.0, 1.0, 1.5),
    lambda: exchange_no_saving(1.0, 1.0, float("nan")),
    lambda: exchange_uniform_saving(1.0, 1.0, 1.2, 0.5),
    lambda: exchange_uniform_saving(1.0, 1.0, 0.5, -0.1),
    lambda: exchange_distributed_saving(1.0, 1.0, 1.0, 0.5, 0.5),
    lambda: exchange_distributed_saving(1.0, -2.0, 0.1, 0.5, 0.5),
    lambda: exchange_bidirectional(1.0, 1.0, 0.5, 2.0),
])
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()


def test_model_spec_invariants():
    assert ModelSpec.uniform_saving(1.0).lam == 1.0
    with pytest.raises(DomainError):
        ModelSpec.uniform_saving(1.2)
    with pytest.raises(DomainError):
        ModelSpec(Variant.NO_SAVING, lam=0.3)
    with pytest.raises(DomainError):
        ModelSpec(Variant.DISTRIBUTED_SAVING)
    with pytest.raises(DomainError):
        LambdaLaw.uniform(0.0, 1.0)
    with pytest.raises(DomainError):
        LambdaLaw.uniform(0.6, 0.5)
    assert ModelSpec.distributed_saving(LambdaLaw.delta(0.3)).lambda_law.hi == 0.3


def test_lambda_law_range():
    law = LambdaLaw.uniform(0.0, 0.5)
    lam = law.from_unit(np.array([0.0, 0.5, np.nextafter(1.0, 0.0)]))
    assert lam[0] == 0.0 and lam[1] == 0.25
    assert np.all(lam < 0.5)


# --- invariants over a million random inputs ----------------------------------

N_PROP = 1_000_000


@pytest.fixture(scope="module")
def inputs():
    rng = np.random.default_rng(20240601)
    wi = 10.0 ** rng.uniform(-6, 6, N_PROP)
    wj = 10.0 ** rng.uniform(-6, 6, N_PROP)
    wi[::97] = 0.0
    wj[::89] = 0.0
    r = rng.random(N_PROP)
    q = rng.random(N_PROP)
    r[::101], r[::103] = 0.0, 1.0
    q[::107], q[::109] = 0.0, 1.0
    li = rng.random(N_PROP)
    lj = rng.random(N_PROP)
    return wi, wj, r, q, li, lj


def _check_conserved(wi, wj, a, b):
    s = wi + wj
    assert np.all(a >= 0.0) and np.all(b >= 0.0)
    assert np.all(np.abs((a + b) - s) <= 4 * EPS * s)


def test_conservation_no_saving(inputs):
    wi, wj, r, *_ = inputs
    _check_conserved(wi, wj, *_no_saving(wi, wj, r))


def test_conservation_uniform_saving(inputs):
    wi, wj, r, _, li, _ = inputs
    _check_conserved(wi, wj, *_uniform_saving(wi, wj, li, r))


def test_conservation_distributed_saving(inputs):
    wi, wj, r, _, li, lj = inputs
    _check_conserved(wi, wj, *_distributed_saving(wi, wj, li, lj, r))


def test_conservation_bidirectional(inputs):
    wi, wj, r, q, *_ = inputs
    _check_conserved(wi, wj, *_bidirectional(wi, wj, r, q))


def test_reduction_chain_exact(inputs):
    wi, wj, r, _, li, _ = inputs
    uni = _uniform_saving(wi, wj, li, r)
    dist = _distributed_saving(wi, wj, li, li, r)
    assert np.array_equal(uni[0], dist[0]) and np.array_equal(uni[1], dist[1])
    zero = np.zeros_like(li)
    ns = _no_saving(wi, wj, r)
    u0 = _uniform_saving(wi, wj, zero, r)
    assert np.array_equal(ns[0], u0[0]) and np.array_equal(ns[1], u0[1])


def test_frozen_limit_exact(inputs):
    wi, wj, r, *_ = inputs
    a, b = _uniform_saving(wi, wj, np.ones_like(r), r)
    assert np.array_equal(a, wi) and np.array_equal(b, wj)


def test_no_saving_symmetry(inputs):
    wi, wj, r, *_ = inputs
    assert np.array_equal(_no_saving(wi, wj, r)[0], _no_saving(wj, wi, r)[0])


# --- the checked scalar path agrees with the compiled one ---------------------

wealth = st.floats(0.0, 1e9, allow_nan=False)
unit = st.floats(0.0, 1.0)
unit_open = st.floats(0.0, 1.0, exclude_max=True)


@given(wealth, wealth, unit_open, unit_open, unit)
def test_scalar_distributed(wi, wj, li, lj, r):
    a, b = exchange_distributed_saving(wi, wj, li, lj, r)
    assert a >= 0 and b >= 0
    assert abs(a + b - (wi + wj)) <= 4 * EPS * (wi + wj)


@given(wealth, wealth, unit, unit)
def test_scalar_reductions(wi, wj, lam, r):
    assert exchange_uniform_saving(wi, wj, 0.0, r) == exchange_no_saving(wi, wj, r)
    assert exchange_uniform_saving(wi, wj, 1.0, r) == (wi, wj)
    if lam < 1.0:
        assert exchange_distributed_saving(wi, wj, lam, lam, r) == exchange_uniform_saving(wi, wj, lam, r)


@given(wealth, wealth, unit, unit)
def test_scalar_bidirectional(wi, wj, r, q):
    a, b = exchange_bidirectional(wi, wj, r, q)
    assert a >= 0 and b >= 0
    assert abs(a + b - (wi + wj)) <= 4 * EPS * (wi + wj)
