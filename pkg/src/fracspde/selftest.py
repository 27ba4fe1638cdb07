"""Fast exact checks run by ``fracspde selftest``.

Each check has an answer known in closed form (sign conventions, fixed
points, bookkeeping identities).  Together they take a few seconds.
"""

from __future__ import annotations

import numpy as np

from . import coefficients as co
from .config import SimConfig
from .errors import ValidationError
from .kernel import FrequencyGrid, StableIndex, green_1d, green_nd, semigroup_apply, symbol
from .noise import SpectralMeasure, check_integrability, mode_weights

__all__ = ["run_selftest", "CHECKS"]


def _cfg(**kw):
    base = dict(
        idx=StableIndex((2.0,), (0.0,)),
        grid=FrequencyGrid(np.pi, 16),
        mu=SpectralMeasure("white", 1.0),
        T=0.25,
        n_steps=8,
        allow_wrap=True,
    )
    base.update(kw)
    return SimConfig(**base)


def _symbol():
    idx = StableIndex((2.0,), (0.0,))
    got = [symbol(idx, [0.0]), symbol(idx, [3.0]), symbol(StableIndex((0.5,), (0.5,)), [1.0])]
    want = [0.0, -9.0, -np.exp(-1j * np.pi / 4)]
    err = max(abs(g - w) for g, w in zip(got, want))
    return err < 1e-14, f"max error {err:.1e}"


def _gaussian_peak():
    g1 = green_1d(2.0, 0.0, 1.0, 0.0)
    g2 = green_nd(StableIndex((2.0, 2.0), (0.0, 0.0)), 1.0, [0.0, 0.0])
    err = max(abs(g1 - 1 / np.sqrt(4 * np.pi)), abs(g2 - 1 / (4 * np.pi)))
    return err < 1e-9, f"max error {err:.1e}"


def _product():
    idx = StableIndex((1.5, 0.8), (0.2, -0.3))
    got = green_nd(idx, 1.0, [0.4, -0.7])
    want = green_1d(1.5, 0.2, 1.0, 0.4) * green_1d(0.8, -0.3, 1.0, -0.7)
    return abs(got - want) <= 1e-15 * abs(want), f"{got:.12g} vs {want:.12g}"


def _semigroup():
    grid = FrequencyGrid(np.pi, 8)
    idx = StableIndex((2.0,), (0.0,))
    c = np.zeros(8, dtype=complex)
    c[0], c[1] = 0.7, 1.0
    out = semigroup_apply(idx, grid, c, 0.5)
    err = max(abs(out[0] - 0.7), abs(out[1] - np.exp(-0.5)))
    return err < 1e-15, f"max error {err:.1e}"


def _weights():
    grid = FrequencyGrid(2.0, 16, 2)
    w = mode_weights(SpectralMeasure("white", 0.3), grid)
    ok = np.allclose(w, 0.3 * (np.pi / 2.0) ** 2, rtol=1e-15, atol=0)
    wf = mode_weights(SpectralMeasure("flat", 1.0, cutoff=4.0), grid)
    ok &= bool(np.all(wf[grid.wavenumber_norm > 4.0] == 0))
    wr = mode_weights(SpectralMeasure("riesz", 1.0, riesz_exponent=1.5), grid)
    ratio = wr[1, 0] / wr[2, 0]
    ok &= abs(ratio - 2 ** (2 - 1.5)) < 1e-13
    return bool(ok), f"riesz axis ratio {ratio:.15g}"


def _flat_satisfied():
    rep = check_integrability(SpectralMeasure("flat", 2.0, cutoff=5.0), StableIndex((0.7,), (0.1,)), 1.0)
    return rep.verdict == "satisfied", rep.verdict


def _zero_fixed_point():
    from .solver import simulate_path

    cfg = _cfg(sigma=co.linear(1.0), b=co.tanh(1.0))
    tr = simulate_path(cfg)
    return bool(np.all(tr.values == 0)), f"max |u| {np.max(np.abs(tr.values)):.1e}"


def _two_steps():
    from .solver import Field, step_mild

    grid = FrequencyGrid(np.pi, 16)
    x = grid.coords[..., 0]
    cfg = _cfg(grid=grid, epsilon=0.0, sigma=co.constant(0.0), n_steps=2)
    f0 = Field.from_values(np.cos(x) + 0.3 * np.sin(3 * x), grid)
    two = step_mild(step_mild(f0, cfg), cfg)
    one = step_mild(f0, cfg.with_(n_steps=1, save_every=1))
    err = float(np.max(np.abs(two.coeffs - one.coeffs)))
    return err < 1e-15, f"max coefficient gap {err:.1e}"


def _sigma_zero_moment():
    from .solver import moment_estimate

    est = moment_estimate(_cfg(sigma=co.constant(0.0)), 2, 16)
    return est.value == 0.0, f"estimate {est.value}"


def _zero_control():
    from .skeleton import ControlPath, pairing_drift, solve_skeleton
    from .solver import Field, simulate_path

    cfg = _cfg()
    h0 = ControlPath.zeros(cfg)
    z = solve_skeleton(h0, cfg)
    drift = pairing_drift(Field.zeros(cfg.grid), h0.h_coeffs[0], cfg.weights, cfg.grid, cfg.sigma)
    rng = np.random.default_rng(1)
    h = ControlPath.from_physical(rng.standard_normal((cfg.n_steps,) + cfg.grid.shape), cfg.grid, cfg.dt)
    same = np.array_equal(solve_skeleton(h, cfg).values,
                          simulate_path(cfg.with_(epsilon=0.0), control=h).values)
    ok = bool(np.all(z.values == 0) and np.all(drift.values == 0) and same)
    return ok, "Z^0 = 0, drift(0) = 0, eps=0 path equals skeleton"


def _cost():
    from .ratefn import control_cost
    from .skeleton import ControlPath

    cfg = _cfg()
    h = np.zeros((cfg.n_steps,) + cfg.grid.shape, dtype=complex)
    c = 1.3
    h[:, 2] = h[:, -2] = c / np.sqrt(2)     # |h|^2 summed over the pair is c^2
    hp = ControlPath(h, cfg.dt)
    got = control_cost(hp)
    ok = abs(got - 0.5 * c**2 * cfg.T) < 1e-14 and abs(control_cost(3.0 * hp) - 9 * got) < 1e-13
    ok &= control_cost(ControlPath.zeros(cfg)) == 0.0
    return bool(ok), f"cost {got:.15g}"


def _oracle_zero():
    from .ratefn import rate_linear_oracle

    cfg = _cfg()
    res = rate_linear_oracle(np.zeros((cfg.n_steps + 1,) + cfg.grid.shape), cfg)
    return res.feasible and res.value == 0.0, f"I(0) = {res.value}"


def _hoelder():
    from .harness import hoelder_norm

    cfg = _cfg(save_every=1)
    beta = (0.3, 0.4)
    t = np.asarray(cfg.save_steps) * cfg.dt
    const = hoelder_norm(np.full((t.size,) + cfg.grid.shape, -2.5), cfg, beta)
    lin = hoelder_norm(np.broadcast_to(t[:, None], (t.size, cfg.grid.points)), cfg, beta, window="full")
    want = cfg.T + cfg.T ** (1 - beta[0])
    ok = abs(const - 2.5) < 1e-15 and abs(lin - want) < 1e-13
    return ok, f"constant {const}, f=t {lin:.15g} vs {want:.15g}"


def _degenerate_ldp():
    from .harness import controlled_convergence_test, estimate_tail, increment_regularity_test
    from .skeleton import ControlPath

    cfg = _cfg(sigma=co.constant(0.0), save_every=2)
    tail = estimate_tail(cfg, 0.5, [0.5, 0.25], n_replicas=8)
    certain = estimate_tail(cfg, 0.0, [0.5], n_replicas=8)
    conv = controlled_convergence_test(ControlPath.zeros(cfg), cfg, [1, 0.5, 0.25, 0.125], n_replicas=8)
    reg = increment_regularity_test(
        _cfg(sigma=co.constant(0.0), mu=SpectralMeasure("flat", 1.0, cutoff=4.0), save_every=1),
        (0.2, 0.5), n_replicas=4)
    ok = all(r.p_hat == 0.0 for r in tail.rows) and certain.rows[0].p_hat == 1.0
    ok &= bool(np.all(conv.moments == 0)) and bool(np.all(reg.max_ratios == 0))
    return ok, "P = 0 for a > 0, P = 1 for a = 0, zero gaps and ratios"


def _validation():
    msgs = []
    for alpha, delta in ((1.0, 0.0), (1.5, 0.8)):
        try:
            StableIndex((alpha,), (delta,))
        except ValidationError as exc:
            msgs.append(str(exc))
    ok = len(msgs) == 2 and "1" in msgs[0]
    return ok, " | ".join(msgs)


CHECKS = [
    ("symbol values", _symbol),
    ("gaussian peak 1-d and 2-d", _gaussian_peak),
    ("product kernel", _product),
    ("semigroup modes", _semigroup),
    ("mode weights", _weights),
    ("flat measure integrable", _flat_satisfied),
    ("zero is a fixed point", _zero_fixed_point),
    ("semigroup two steps = one", _two_steps),
    ("sigma = 0 moment", _sigma_zero_moment),
    ("zero control and eps = 0 path", _zero_control),
    ("control cost bookkeeping", _cost),
    ("rate of the zero target", _oracle_zero),
    ("hoelder norm examples", _hoelder),
    ("degenerate ldp probes", _degenerate_ldp),
    ("invalid index rejected", _validation),
]


def run_selftest(checks=None):
    """Run the checks and return ``[(name, passed, detail), ...]``.

    A check that raises is recorded as failed with the exception text.
    """
    out = []
    for name, fn in checks or CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not abort the rest
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), str(detail)))
    return out
