import numpy as np
import pytest

from fracspde import coefficients as co
from fracspde.errors import NumericalError, ValidationError
from fracspde.kernel import FrequencyGrid, grid_symbol
from fracspde.noise import SpectralMeasure, sample_increment
from fracspde.skeleton import ControlPath, solve_skeleton
from fracspde.solver import (
    Field,
    frozen_noise,
    moment_estimate,
    picard_solve,
    simulate_path,
    step_mild,
)

from _helpers import linear_family, make_cfg, smooth_control


def _field(grid, seed=0):
    x = grid.axis_coords
    rng = np.random.default_rng(seed)
    return Field.from_values(np.cos(x) + rng.uniform(-0.5, 0.5) * np.sin(3 * x) + 0.2, grid)


# ---------------------------------------------------------------------------
# fields


def test_field_round_trip_and_finiteness():
    g = FrequencyGrid(np.pi, 32)
    f = _field(g)
    np.testing.assert_allclose(g.to_values(f.coeffs), f.values, rtol=1e-10, atol=1e-14)
    with pytest.raises(NumericalError):
        Field.from_values(np.full(32, np.nan), g)


# ---------------------------------------------------------------------------
# step map


def test_zero_fixed_point():
    cfg = make_cfg(b=co.tanh(0.7), sigma=co.linear(1.3), epsilon=0.5)
    state = Field.zeros(cfg.grid)
    dw = sample_increment(cfg.weights, cfg.grid, cfg.dt, (0, 0, 0))
    out = step_mild(state, cfg, dw)
    assert np.all(out.values == 0)
    assert np.all(simulate_path(cfg, n_replicas=4).values == 0)


def test_two_steps_equal_one_double_step():
    cfg = make_cfg(alpha=1.5, delta=0.5, epsilon=0.0, n_steps=2)
    f0 = _field(cfg.grid)
    two = step_mild(step_mild(f0, cfg), cfg)
    one = step_mild(f0, cfg.with_(n_steps=1, save_every=1))
    np.testing.assert_allclose(two.coeffs, one.coeffs, rtol=1e-14, atol=1e-16)


def test_constant_state_follows_euler():
    a, c = -0.8, 0.3
    cfg = make_cfg(b=co.linear(a, c), sigma=co.constant(0.0), epsilon=0.0, T=1.0, n_steps=50)
    u0 = 1.7
    f = Field.from_values(np.full(cfg.grid.shape, u0), cfg.grid)
    euler = u0
    for n in range(cfg.n_steps):
        f = step_mild(f, cfg, step=n)
        euler = euler + cfg.dt * (a * euler + c)
        assert np.ptp(f.values) < 1e-13
    assert f.values[0] == pytest.approx(euler, rel=1e-13)
    exact = (u0 + c / a) * np.exp(a * cfg.T) - c / a
    assert abs(f.values[0] - exact) < 2 * cfg.dt   # one-step Euler accuracy


def test_mode_zero_conserved_without_forcing():
    cfg = make_cfg(alpha=0.9, delta=0.3, b=co.constant(0.0), sigma=co.constant(0.0), n_steps=20)
    f = _field(cfg.grid, seed=3)
    mean0 = f.values.mean()
    for n in range(cfg.n_steps):
        f = step_mild(f, cfg, step=n)
        assert f.values.mean() == pytest.approx(mean0, abs=1e-12)


def test_step_dt_mismatch():
    cfg = make_cfg()
    dw = sample_increment(cfg.weights, cfg.grid, cfg.dt * 2, (0, 0, 0))
    with pytest.raises(ValidationError):
        step_mild(Field.zeros(cfg.grid), cfg, dw)


def test_blow_up_reports_step():
    cfg = make_cfg(b=co.linear(1e200, 1.0), sigma=co.constant(0.0), epsilon=0.0, n_steps=8)
    with pytest.raises(NumericalError) as info, np.errstate(over="ignore", invalid="ignore"):
        simulate_path(cfg)
    assert info.value.step is not None and 0 < info.value.step < 8


# ---------------------------------------------------------------------------
# paths


def test_determinism_and_stream_layout():
    cfg = make_cfg(b=co.tanh(0.5), sigma=co.linear(0.5, 1.0), seed=9, save_every=4)
    a = simulate_path(cfg)
    b = simulate_path(cfg)
    np.testing.assert_array_equal(a.values, b.values)
    batch = simulate_path(cfg, n_replicas=3, first_stream=5)
    np.testing.assert_array_equal(batch.values[2], simulate_path(cfg, first_stream=7).values)
    assert batch.streams == (5, 6, 7) and a.steps == (0, 4, 8, 12, 16)
    np.testing.assert_array_equal(simulate_path(cfg, noise=frozen_noise(cfg, 0)).values, a.values)


def test_epsilon_scaling_linear():
    cfg = linear_family(alpha=1.5, delta=0.25, seed=2)
    base = simulate_path(cfg).values
    for eps in (0.5, 0.01):
        scaled = simulate_path(cfg.with_(epsilon=eps)).values
        np.testing.assert_allclose(scaled, np.sqrt(eps) * base, rtol=1e-12, atol=1e-14)


def test_eps_zero_matches_skeleton():
    cfg = make_cfg(alpha=1.5, b=co.linear(-0.5, 0.1), sigma=co.tanh(0.5, 1.0, 1.0), T=1.0, n_steps=32)
    h = smooth_control(cfg)
    z = solve_skeleton(h, cfg).values
    np.testing.assert_array_equal(simulate_path(cfg.with_(epsilon=0.0), control=h).values, z)


def test_dt_refinement_order():
    base = make_cfg(alpha=1.5, delta=0.25, b=co.linear(-1.0, 0.5), sigma=co.constant(1.0),
                    epsilon=0.0, T=1.0, n_steps=16)
    x = base.grid.axis_coords

    def final(n):
        cfg = base.with_(n_steps=n, save_every=n)
        t = (np.arange(n) + 0.5) * cfg.dt
        r = np.sin(np.pi * t)[:, None] * np.cos(x)[None, :]
        return simulate_path(cfg, control=ControlPath.from_physical(r, cfg.grid, cfg.dt)).final

    ref = final(1024)
    errs = [np.max(np.abs(final(n) - ref)) for n in (16, 32, 64)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9), orders


def test_ou_mode_variance():
    cfg = make_cfg(T=0.5, n_steps=32, seed=4)
    tr = simulate_path(cfg, n_replicas=1000)
    psi = grid_symbol(cfg.idx, cfg.grid)
    for k in (0, 2):
        sq = np.abs(tr.coeffs[:, -1, k]) ** 2
        rate = -2 * psi[k].real
        oracle = cfg.weights[k] * (cfg.T if rate == 0 else (1 - np.exp(-rate * cfg.T)) / rate)
        assert abs(sq.mean() - oracle) < 3 * sq.std(ddof=1) / np.sqrt(sq.size)


def test_measure_refused_without_override():
    cfg = make_cfg(alpha=0.5)
    with pytest.raises(ValidationError):
        simulate_path(cfg)
    assert simulate_path(cfg.with_(measure_override=True)).values.shape == (2, 16)


# ---------------------------------------------------------------------------
# Picard oracle


def test_picard_trivial():
    cfg = make_cfg(b=co.constant(0.0), sigma=co.constant(0.0))
    res = picard_solve(cfg)
    assert res.converged and len(res.distances) == 1 and np.all(res.trajectory == 0)


def test_picard_contraction_and_agreement():
    cfg = make_cfg(T=0.25, n_steps=16, b=co.tanh(0.5), sigma=co.linear(0.5, 1.0), seed=3)
    res = picard_solve(cfg, tol=1e-13)
    assert res.converged
    ratios = res.ratios
    assert np.all(ratios[:-2] < 1.0)
    assert max(ratios[2:-2]) < 0.6
    tr = simulate_path(cfg.with_(save_every=1))
    assert np.max(np.abs(res.trajectory - tr.values)) < max(1e-6, 5 * cfg.dt)


def test_picard_with_control_matches_skeleton():
    cfg = make_cfg(alpha=1.5, b=co.linear(-0.5, 0.2), sigma=co.tanh(0.4, 1.0, 1.0), epsilon=0.0,
                   T=0.5, n_steps=16, save_every=1)
    h = smooth_control(cfg)
    res = picard_solve(cfg, control=h, tol=1e-14)
    np.testing.assert_allclose(res.trajectory, solve_skeleton(h, cfg).values, atol=1e-12)


def test_picard_guard():
    with pytest.raises(ValidationError):
        picard_solve(make_cfg(points=128))
    with pytest.raises(ValidationError):
        picard_solve(make_cfg(n_steps=65))


# ---------------------------------------------------------------------------
# moments


def test_moment_sigma_zero():
    est = moment_estimate(make_cfg(sigma=co.constant(0.0)), 2, 32)
    assert est.value == 0.0


def test_moment_grows_with_horizon():
    short = linear_family(T=0.25, n_steps=8)
    long = linear_family(T=1.0, n_steps=32)
    a = moment_estimate(short, 2, 400)
    b = moment_estimate(long, 2, 400)
    assert b.value > a.value
    assert b.ci[0] > a.ci[1]


def test_moment_ci_shrinks():
    cfg = make_cfg(b=co.tanh(-0.5), sigma=co.linear(0.3, 1.0), save_every=4)
    a = moment_estimate(cfg, 2, 400)
    b = moment_estimate(cfg, 2, 1600)
    wa, wb = a.ci[1] - a.ci[0], b.ci[1] - b.ci[0]
    assert np.isfinite(b.value) and wb / wa == pytest.approx(0.5, rel=0.35)
    with pytest.raises(ValidationError):
        moment_estimate(cfg, 1, 10)


def test_white_noise_with_nonconstant_sigma_uses_pointwise_product():
    # sigma(u) dW is formed in physical space; with u = 0 it reduces to sigma(0) dW
    cfg = make_cfg(sigma=co.linear(2.0, 0.5), b=co.constant(0.0), n_steps=1, save_every=1)
    one = simulate_path(cfg).final
    ref = simulate_path(cfg.with_(sigma=co.constant(0.5))).final
    np.testing.assert_allclose(one, ref, atol=1e-15)


def test_flat_measure_path_is_band_limited():
    cfg = make_cfg(measure=SpectralMeasure("flat", 1.0, cutoff=3.0), points=32)
    c = simulate_path(cfg).coeffs[-1]
    assert np.all(c[cfg.grid.wavenumber_norm > 3.0] == 0)
