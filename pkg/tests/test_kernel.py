import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy.stats import levy_stable

from fracspde.errors import ValidationError
from fracspde.kernel import (
    FrequencyGrid,
    StableIndex,
    green_1d,
    green_nd,
    grid_symbol,
    hermitian_part,
    semigroup_apply,
    symbol,
)
from fracspde.kernel_checks import mass_outside, minimum_value, scaling_residual, tail_profile


@st.composite
def stable_pairs(draw):
    alpha = draw(st.floats(0.05, 2.0).filter(lambda a: abs(a - 1.0) > 1e-3))
    b = min(alpha, 2.0 - alpha)
    delta = draw(st.floats(-1.0, 1.0)) * b
    return alpha, delta


def levy_oracle(alpha, delta, t, x):
    """scipy's S1 stable density for the symbol -t |xi|^alpha exp(-i delta pi/2 sgn xi)."""
    theta = delta * np.pi / 2
    beta = np.tan(theta) / np.tan(alpha * np.pi / 2)
    scale = (t * np.cos(theta)) ** (1 / alpha)
    dist = levy_stable(alpha, beta, loc=0.0, scale=scale)
    dist.dist.parameterization = "S1"
    return dist.pdf(x)


# ---------------------------------------------------------------------------
# index and symbol


def test_symbol_examples():
    assert symbol(StableIndex((2.0,), (0.0,)), [0.0]) == 0
    assert symbol(StableIndex((2.0,), (0.0,)), [3.0]) == pytest.approx(-9.0, abs=1e-14)
    val = symbol(StableIndex((0.5,), (0.5,)), [1.0])
    assert val == pytest.approx(-np.exp(-1j * np.pi / 4), abs=1e-15)
    assert val.real == pytest.approx(-0.7071067, abs=1e-7) and val.imag == pytest.approx(0.7071067, abs=1e-7)


def test_symbol_sums_axes():
    idx = StableIndex((2.0, 0.5), (0.0, 0.5))
    assert symbol(idx, [3.0, 1.0]) == pytest.approx(-9.0 - np.exp(-1j * np.pi / 4), abs=1e-14)


@given(stable_pairs(), st.floats(-50, 50))
def test_symbol_real_part_nonpositive(pair, xi):
    assert symbol(StableIndex((pair[0],), (pair[1],)), [xi]).real <= 1e-12


@pytest.mark.parametrize("alpha, delta", [(1.0, 0.0), (0.0, 0.0), (2.5, 0.0), (-0.5, 0.0), (1.5, 0.8),
                                          (0.5, 0.6)])
def test_invalid_index_rejected(alpha, delta):
    with pytest.raises(ValidationError):
        StableIndex((alpha,), (delta,))


def test_alpha_one_message_cites_value():
    with pytest.raises(ValidationError, match="alpha=1"):
        StableIndex((1.0,), (0.0,))


def test_index_shape_checks():
    with pytest.raises(ValidationError):
        StableIndex((), ())
    with pytest.raises(ValidationError):
        StableIndex((1.5, 0.5), (0.0,))
    with pytest.raises(ValidationError):
        symbol(StableIndex((1.5,), (0.0,)), [1.0, 2.0])
    assert StableIndex((1.5, 0.7), (0.1, 0.0)).alpha0 == 0.7


# ---------------------------------------------------------------------------
# green functions


def test_gaussian_peak():
    assert green_1d(2.0, 0.0, 1.0, 0.0) == pytest.approx(0.2820948, abs=1e-7)
    assert green_1d(2.0, 0.0, 1.0, 0.0) == pytest.approx(1 / np.sqrt(4 * np.pi), rel=1e-10)


def test_gaussian_profile():
    x = np.linspace(-8, 8, 81)
    for t in (0.1, 0.5, 3.0):
        exact = np.exp(-x**2 / (4 * t)) / np.sqrt(4 * np.pi * t)
        g = green_1d(2.0, 0.0, t, x)
        # relative accuracy in the bulk, absolute accuracy in the far tail
        bulk = exact > 1e-8
        np.testing.assert_allclose(g[bulk], exact[bulk], rtol=1e-6)
        np.testing.assert_allclose(g, exact, rtol=0, atol=1e-15)


@pytest.mark.parametrize("alpha, delta", [(0.5, 0.0), (0.5, 0.5), (0.9, -0.45), (1.5, 0.25), (1.5, -0.5),
                                          (1.8, 0.1)])
def test_against_scipy_stable(alpha, delta):
    x = np.linspace(-6, 6, 25)
    np.testing.assert_allclose(green_1d(alpha, delta, 1.0, x), levy_oracle(alpha, delta, 1.0, x),
                               atol=1e-9)


def test_scaling_example():
    alpha, delta = 1.5, 0.3
    x = np.linspace(-5, 5, 21)
    c = 2 ** (-1 / alpha)
    np.testing.assert_allclose(green_1d(alpha, delta, 2.0, x), c * green_1d(alpha, delta, 1.0, c * x),
                               rtol=1e-9)
    assert scaling_residual(0.7, -0.2, 3.0, x) < 1e-8


def test_green_nd_product_and_peak():
    idx = StableIndex((2.0, 2.0), (0.0, 0.0))
    assert green_nd(idx, 1.0, [0.0, 0.0]) == pytest.approx(0.0795775, abs=1e-7)
    idx = StableIndex((1.5, 0.6), (0.3, -0.2))
    pts = np.array([[0.2, -1.0], [1.5, 0.4]])
    want = green_1d(1.5, 0.3, 1.0, pts[:, 0]) * green_1d(0.6, -0.2, 1.0, pts[:, 1])
    np.testing.assert_allclose(green_nd(idx, 1.0, pts), want, rtol=1e-14)
    with pytest.raises(ValidationError):
        green_nd(idx, 1.0, [0.0])


def test_green_nd_mass():
    # per-axis masses multiply; check the 2-d Gaussian on a fine square grid
    idx = StableIndex((2.0, 2.0), (0.0, 0.0))
    x = np.linspace(-10, 10, 81)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    g = green_nd(idx, 1.0, np.stack([xx, yy], axis=-1))
    assert np.trapezoid(np.trapezoid(g, x), x) == pytest.approx(1.0, abs=1e-8)


def test_nonpositive_time_rejected():
    with pytest.raises(ValidationError):
        green_1d(1.5, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("alpha, delta", [(0.5, 0.5), (0.9, 0.9), (1.5, -0.5), (2.0, 0.0)])
def test_nonnegative_up_to_ripple(alpha, delta):
    assert minimum_value(alpha, delta, np.linspace(-60, 60, 601)) >= -1e-6


def test_tail_profile_flat():
    prof = tail_profile(0.8, 0.2, [10.0, 100.0, 1000.0])
    assert np.all(np.isfinite(prof))
    assert prof[-1] <= prof[0] * 1.5


def test_mass_outside_gaussian():
    idx = StableIndex((2.0,), (0.0,))
    # G(1, .) is N(0, 2); mass beyond |x| > pi is erfc(pi / 2)
    assert mass_outside(idx, 1.0, np.pi) == pytest.approx(special.erfc(np.pi / 2), rel=1e-8)


def test_mass_outside_heavy_tail_decays():
    idx = StableIndex((1.5,), (0.0,))
    a, b = mass_outside(idx, 1.0, 50.0), mass_outside(idx, 1.0, 100.0)
    assert 0 < b < a
    assert a / b == pytest.approx(2**1.5, rel=0.05)   # ~ L^(-alpha)


# ---------------------------------------------------------------------------
# grid and semigroup


@pytest.mark.parametrize("points", [3, 6, 12, 2])
def test_grid_rejects_bad_sizes(points):
    with pytest.raises(ValidationError):
        FrequencyGrid(1.0, points)


def test_grid_frequencies():
    g = FrequencyGrid(2.0, 8)
    np.testing.assert_allclose(np.sort(g.axis_freqs), np.pi * np.arange(-4, 4) / 2.0)
    assert g.dx == 0.5 and g.axis_coords[0] == -2.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_nyquist_real_and_round_trip(seed):
    g = FrequencyGrid(1.3, 8, 2)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    c = g.to_coeffs(v)
    assert abs(c[4, 0].imag) < 1e-15 and abs(c[0, 4].imag) < 1e-15
    np.testing.assert_allclose(g.to_values(c), v, atol=1e-13)
    np.testing.assert_allclose(hermitian_part(c, g), c, atol=1e-15)


def test_semigroup_examples():
    g = FrequencyGrid(np.pi, 8)
    idx = StableIndex((2.0,), (0.0,))
    c = np.zeros(8, dtype=complex)
    c[0] = 1.0
    np.testing.assert_array_equal(semigroup_apply(idx, g, c, 0.7), c)
    c = np.zeros(8, dtype=complex)
    c[1] = 1.0
    assert semigroup_apply(idx, g, c, 0.5)[1] == pytest.approx(0.6065307, abs=1e-7)


@given(stable_pairs(), st.floats(0.01, 2.0), st.floats(0.01, 2.0), st.integers(0, 1000))
@settings(max_examples=40)
def test_semigroup_composition(pair, t1, t2, seed):
    g = FrequencyGrid(2.0, 16)
    idx = StableIndex((pair[0],), (pair[1],))
    c = g.to_coeffs(np.random.default_rng(seed).standard_normal(16))
    two = semigroup_apply(idx, g, semigroup_apply(idx, g, c, t1), t2)
    one = semigroup_apply(idx, g, c, t1 + t2)
    np.testing.assert_allclose(two, one, rtol=1e-13, atol=1e-16)
    # the result is still a real field
    assert np.max(np.abs(np.fft.ifft(two * 16).imag)) < 1e-12


def test_grid_symbol_nyquist_is_real():
    g = FrequencyGrid(1.0, 8)
    psi = grid_symbol(StableIndex((1.5,), (0.5,)), g)
    assert psi[4].imag == 0.0
    # the other modes carry psi(-xi_k) under numpy's exp(-i k x) convention
    k = 1
    assert psi[k] == pytest.approx(symbol(StableIndex((1.5,), (0.5,)), [-g.axis_freqs[k]]))
