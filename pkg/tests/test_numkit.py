import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expressivity.numkit import (
    derive_rng,
    elu,
    elu_and_grad,
    elu_grad,
    log_mean_exp,
    make_rng,
    permutation,
)

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


def test_log_mean_exp_zeros():
    assert log_mean_exp([0.0, 0.0, 0.0, 0.0]) == 0.0


@pytest.mark.parametrize("c", [-3.0, 0.0, 1.5, 500.0, -500.0])
def test_log_mean_exp_constant(c):
    assert log_mean_exp([c] * 7) == pytest.approx(c, abs=1e-12)


def test_log_mean_exp_against_extended_precision():
    vals = [math.log(1), math.log(2), math.log(3)]
    mpmath.mp.dps = 40
    ref = mpmath.log(sum(mpmath.exp(mpmath.mpf(v)) for v in vals) / 3)
    assert log_mean_exp(vals) == pytest.approx(float(ref), abs=1e-15)
    assert log_mean_exp(vals) == pytest.approx(math.log(2), abs=1e-15)


def test_log_mean_exp_empty():
    with pytest.raises(ValueError, match="empty batch"):
        log_mean_exp([])


def test_log_mean_exp_rejects_nan():
    with pytest.raises(ValueError):
        log_mean_exp([0.0, float("nan")])


@given(st.lists(finite, min_size=1, max_size=40), st.floats(min_value=-500, max_value=500))
def test_log_mean_exp_shift(values, c):
    shifted = [v + c for v in values]
    assert log_mean_exp(shifted) == pytest.approx(log_mean_exp(values) + c, abs=1e-12)


def test_elu_values():
    assert elu(0.0) == 0.0
    assert elu(2.0) == 2.0
    assert elu(-1.0) == pytest.approx(math.exp(-1.0) - 1.0, abs=1e-15)
    assert elu(-1.0) == pytest.approx(-0.632121, abs=1e-6)


def test_elu_grad_values():
    assert elu_grad(0.0) == 1.0
    assert elu_grad(3.0) == 1.0
    assert elu_grad(-2.0) == pytest.approx(math.exp(-2.0), abs=1e-15)


@given(st.lists(finite, min_size=1, max_size=30))
def test_fused_elu_matches_separate(values):
    z = np.array(values)
    act, grad = elu_and_grad(z)
    np.testing.assert_allclose(act, elu(z), rtol=0, atol=1e-14)
    np.testing.assert_allclose(grad, elu_grad(z), rtol=0, atol=0)
    np.testing.assert_array_equal(z, np.array(values))


def test_fused_elu_overwrite_writes_in_place():
    z = np.array([-1.0, 0.5])
    act, _ = elu_and_grad(z, overwrite=True)
    assert act is z


def test_matmul_associative():
    rng = make_rng(3)
    for _ in range(20):
        A, B, C = (rng.standard_normal((5, 5)) for _ in range(3))
        np.testing.assert_allclose((A @ B) @ C, A @ (B @ C), atol=1e-10)


def test_permutation_singleton():
    assert permutation(1, make_rng(0)).tolist() == [0]


def test_permutation_zero_rejected():
    with pytest.raises(ValueError):
        permutation(0, make_rng(0))


def test_permutation_is_bijection_exhaustive():
    for seed in range(1000):
        rng = make_rng(seed)
        for n in range(1, 9):
            assert sorted(permutation(n, rng).tolist()) == list(range(n))


def test_permutation_deterministic():
    a = permutation(3, make_rng(11))
    b = permutation(3, make_rng(11))
    assert a.tolist() == b.tolist()
    assert sorted(permutation(5, make_rng(7)).tolist()) == [0, 1, 2, 3, 4]


def test_rng_streams():
    x = make_rng(5).standard_normal(4)
    y = make_rng(5).standard_normal(4)
    np.testing.assert_array_equal(x, y)
    a = derive_rng(5, 0).standard_normal(4)
    b = derive_rng(5, 1).standard_normal(4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, x)
    np.testing.assert_array_equal(a, derive_rng(5, 0).standard_normal(4))


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        make_rng(-1)
