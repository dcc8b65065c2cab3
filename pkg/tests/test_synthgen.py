import math

import numpy as np
import pytest
from scipy import integrate

from expressivity.synthgen import SynthSpec, discrete_embed_mi, generate, true_mi


def _binary_embed_mi_quadrature(sigma):
    """Two-class MI by 1-D quadrature: the posterior only depends on f0 - f1 ~ N(5, 2 sigma^2)."""
    s = math.sqrt(2) * sigma

    def integrand(d):
        dens = math.exp(-0.5 * ((d - 5.0) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        return dens * np.logaddexp(0.0, -5.0 * d / sigma**2)

    val, _ = integrate.quad(integrand, 5 - 12 * s, 5 + 12 * s, limit=200)
    return math.log(2) - val


def test_gaussian_pair_zero():
    assert generate(SynthSpec("gaussian_pair", n=100, parameter=0.0))[2] == 0.0


def test_gaussian_pair_closed_form():
    assert generate(SynthSpec("gaussian_pair", n=100, parameter=0.9))[2] == pytest.approx(0.830366, abs=1e-6)
    assert true_mi(SynthSpec("gaussian_pair", parameter=0.5)).value == pytest.approx(0.1438410362, abs=1e-9)


def test_discrete_noiseless():
    F, A, mi = generate(SynthSpec("discrete_embed", n=200, classes=4, parameter=0.0))
    assert mi == pytest.approx(math.log(4), abs=1e-12)
    assert F.shape == (200, 4) and A.kind == "discrete-label"
    np.testing.assert_array_equal(F.argmax(axis=1), A.values)
    assert set(np.unique(F)) == {0.0, 5.0}


def test_gaussian_pair_moments():
    F, A, _ = generate(SynthSpec("gaussian_pair", n=50_000, parameter=0.7, seed=3))
    assert abs(np.corrcoef(F[:, 0], A.values)[0, 1] - 0.7) < 0.02


def test_linear_gaussian_signal_fraction():
    F, A, mi = generate(SynthSpec("linear_gaussian", n=50_000, dim=6, parameter=0.5, seed=1))
    coef, *_ = np.linalg.lstsq(np.column_stack([F, np.ones(len(F))]), A.values, rcond=None)
    resid = A.values - np.column_stack([F, np.ones(len(F))]) @ coef
    assert 1 - resid.var() / A.values.var() == pytest.approx(0.5, abs=0.02)
    assert mi == pytest.approx(-0.5 * math.log(0.5), abs=1e-12)


def test_independent():
    F, A, mi = generate(SynthSpec("independent", n=1000, dim=3))
    assert mi == 0.0 and F.shape == (1000, 3)


def test_deterministic():
    s = SynthSpec("linear_gaussian", n=50, dim=2, parameter=0.3, seed=8)
    a, b = generate(s), generate(s)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1].values, b[1].values)


@pytest.mark.parametrize("sigma", [1.0, 2.0, 3.0])
def test_noisy_discrete_monte_carlo_vs_quadrature(sigma):
    mc = discrete_embed_mi(2, sigma, samples=200_000, seed=4)
    ref = _binary_embed_mi_quadrature(sigma)
    assert mc.stderr > 0
    assert abs(mc.value - ref) < 5 * mc.stderr + 1e-6


def test_noisy_discrete_bounds():
    mc = discrete_embed_mi(4, 1.0, samples=100_000)
    assert 0 < mc.value < math.log(4)


@pytest.mark.parametrize("kw", [
    {"family": "gaussian_pair", "parameter": 1.0},
    {"family": "discrete_embed", "classes": 1},
    {"family": "linear_gaussian", "parameter": 1.2},
    {"family": "gaussian_pair", "n": 3},
    {"family": "nope"},
])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        SynthSpec(**kw)
