import numpy as np
import pytest

from fracspde import coefficients as co
from fracspde.errors import ValidationError
from fracspde.harness import (
    HoelderParams,
    controlled_convergence_test,
    estimate_tail,
    hoelder_norm,
    increment_regularity_test,
    tail_plot_svg,
    window_slices,
)
from fracspde.skeleton import ControlPath

from _helpers import linear_family, make_cfg, smooth_control


# ---------------------------------------------------------------------------
# Hoelder norms


@pytest.mark.parametrize("b1, b2, eta", [(0.6, 0.2, 0.5), (0.2, 0.6, 0.5), (0.0, 0.2, 0.0), (0.2, 0.2, 1.0),
                                         (0.2, 0.2, -0.1)])
def test_params_validation(b1, b2, eta):
    with pytest.raises(ValidationError):
        HoelderParams(b1, b2, eta, 2.0)


def test_params_for_config():
    cfg = make_cfg(alpha=1.5)
    p = HoelderParams.for_config(cfg, 0.1, 0.2, eta=0.5)
    assert p.alpha0 == 1.5 and p.eta == 0.5


def test_constant_field():
    cfg = make_cfg(save_every=4)
    vals = np.full((len(cfg.save_steps),) + cfg.grid.shape, -2.5)
    assert hoelder_norm(vals, cfg, (0.3, 0.4)) == 2.5


def test_linear_in_time():
    cfg = make_cfg(T=0.5, save_every=4)
    t = np.asarray(cfg.save_steps) * cfg.dt
    vals = np.broadcast_to(t[:, None], (t.size,) + cfg.grid.shape)
    b1 = 0.3
    assert hoelder_norm(vals, cfg, (b1, 0.5)) == pytest.approx(cfg.T + cfg.T ** (1 - b1), rel=1e-12)


def test_linear_in_space_full_window():
    cfg = make_cfg(save_every=8)
    x = cfg.grid.axis_coords
    L, dx, b2 = cfg.grid.half_length, cfg.grid.dx, 0.4
    vals = np.broadcast_to(x, (len(cfg.save_steps),) + cfg.grid.shape)
    # the grid stops one cell short of +L
    assert hoelder_norm(vals, cfg, (0.3, b2), window="full") == pytest.approx(L + (2 * L - dx) ** (1 - b2),
                                                                                rel=1e-12)
    central = hoelder_norm(vals, cfg, (0.3, b2))
    sl = window_slices(cfg.grid)[0]
    span = x[sl.stop - 1] - x[sl.start]
    assert central == pytest.approx(np.max(np.abs(x[sl])) + span ** (1 - b2), rel=1e-12)


def test_subsample_deterministic_and_below_full():
    cfg = make_cfg(points=32, save_every=2)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((len(cfg.save_steps),) + cfg.grid.shape)
    full = hoelder_norm(vals, cfg, (0.2, 0.3))
    a = hoelder_norm(vals, cfg, (0.2, 0.3), max_pairs=500, seed=4)
    b = hoelder_norm(vals, cfg, (0.2, 0.3), max_pairs=500, seed=4)
    assert a == b and a <= full


def test_hoelder_shape_check():
    cfg = make_cfg()
    with pytest.raises(ValidationError):
        hoelder_norm(np.zeros((3, 16)), cfg, (0.2, 0.2))


# ---------------------------------------------------------------------------
# convergence and regularity


def test_convergence_sigma_zero():
    cfg = make_cfg(b=co.tanh(0.5), sigma=co.constant(0.0), save_every=4)
    res = controlled_convergence_test(smooth_control(cfg), cfg, [0.5, 0.25, 0.125, 0.0625], n_replicas=4)
    assert np.all(res.moments == 0) and np.isnan(res.slope)


def test_convergence_validation():
    cfg = make_cfg()
    h = ControlPath.zeros(cfg)
    with pytest.raises(ValidationError):
        controlled_convergence_test(h, cfg, [0.5, 0.25, 0.125])
    with pytest.raises(ValidationError):
        controlled_convergence_test(h, cfg, [0.5, 0.25, 0.1, 0.01])
    with pytest.raises(ValidationError):
        controlled_convergence_test(h, cfg, [0.5, 0.25, 0.125, 0.0625], q=3)


def test_convergence_linear_slope():
    # additive noise: the gap is sqrt(eps) times a fixed Gaussian field, so E|gap|^2 ~ eps exactly
    cfg = linear_family(save_every=4)
    res = controlled_convergence_test(smooth_control(cfg), cfg, [0.4, 0.2, 0.1, 0.05], n_replicas=50)
    assert res.slope == pytest.approx(1.0, abs=1e-9)


def test_regularity_sigma_zero_and_checks():
    cfg = make_cfg(sigma=co.constant(0.0), save_every=1)
    res = increment_regularity_test(cfg, (0.2, 0.4), n_replicas=4)
    assert np.all(res.max_ratios == 0) and res.growth == 0.0
    with pytest.raises(ValidationError, match="save_every"):
        increment_regularity_test(cfg.with_(save_every=2), (0.2, 0.4))
    with pytest.raises(ValidationError, match="lags"):
        increment_regularity_test(cfg, (0.2, 0.4), lags=(1, 2, 4))


def test_regularity_heat_exponents():
    # the free heat equation with white noise is 1/4-Hoelder in time and 1/2-Hoelder in space.
    # The step map averages the noise over a step, so the field is smooth below sqrt(dt) and
    # the exponents only show at lags well above one step.
    cfg = linear_family(T=0.5, n_steps=256, points=128, save_every=1, seed=1)
    res = increment_regularity_test(cfg, (0.2, 0.4), n_replicas=200, lags=(32, 16, 8))
    assert res.time_exponent == pytest.approx(0.25, abs=0.05)
    cfg = linear_family(T=0.25, n_steps=256, points=256, save_every=1, seed=1)
    res = increment_regularity_test(cfg, (0.2, 0.4), n_replicas=200, lags=(8, 4, 2))
    assert res.space_exponent == pytest.approx(0.5, abs=0.1)


# ---------------------------------------------------------------------------
# tails


def test_tail_deterministic_cases():
    cfg = make_cfg(sigma=co.constant(0.0), save_every=4)
    res = estimate_tail(cfg, 0.5, [0.1, 0.01])
    assert res.oracle == np.inf and all(r.p_hat == 0.0 for r in res.rows)
    res = estimate_tail(cfg, 0.0, [0.1])
    assert res.oracle == 0.0 and res.rows[0].p_hat == 1.0
    # a drift that carries the path over the level makes the event certain
    push = cfg.with_(b=co.constant(4.0))
    assert estimate_tail(push, 0.5, [0.1]).rows[0].p_hat == 1.0


def test_tail_monotone_in_level():
    cfg = linear_family(save_every=4, seed=2)
    p = [estimate_tail(cfg, a, [0.05], n_replicas=400).rows[0].p_hat for a in (0.3, 0.5, 0.7)]
    assert p[0] > p[1] > p[2] > 0


def test_tail_without_importance_runs_dry():
    cfg = linear_family(save_every=4)
    res = estimate_tail(cfg, 2.0, [0.01], n_replicas=200, importance=False)
    row = res.rows[0]
    assert row.hits == 0 and row.verdict == "insufficient samples" and row.rate_hat == np.inf
    assert res.smallest_feasible() is None


def test_tail_reproducible_and_rate_nonnegative():
    cfg = linear_family(alpha=1.5, save_every=4)
    a = estimate_tail(cfg, 1.0, [0.05, 0.02], n_replicas=300)
    b = estimate_tail(cfg, 1.0, [0.05, 0.02], n_replicas=300)
    assert [r.p_hat for r in a.rows] == [r.p_hat for r in b.rows]
    assert all(r.rate_hat >= 0 and r.ci[0] <= r.rate_hat <= r.ci[1] for r in a.rows)
    assert a.smallest_feasible(min_hits=10).eps == 0.02


def test_tail_requires_linear_family():
    cfg = make_cfg(b=co.tanh(0.5), sigma=co.constant(1.0), save_every=4)
    with pytest.raises(ValidationError):
        estimate_tail(cfg, 1.0, [0.1], n_replicas=10)


def test_svg_deterministic(tmp_path):
    cfg = linear_family(save_every=4)
    res = estimate_tail(cfg, 0.8, [0.1, 0.05], n_replicas=200)
    tail_plot_svg(res, tmp_path / "a.svg")
    tail_plot_svg(res, tmp_path / "b.svg")
    data = (tmp_path / "a.svg").read_bytes()
    assert data == (tmp_path / "b.svg").read_bytes() and b"<svg" in data
