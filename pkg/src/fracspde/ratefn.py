"""Rate function of the small-noise family: cost of controls, an exact oracle
for the linear family and a penalized minimizer for the general case.

``I(f) = inf { cost(h) : Z^h = f }`` with ``cost(h) = 1/2 ||h||^2``.  On the
grid ``Z^h`` is the skeleton trajectory of `fracspde.skeleton.solve_skeleton`
and ``||h||^2 = sum_n sum_k |h_k(t_n)|^2 dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, OptimizationError, ValidationError
from .skeleton import ControlPath
from .solver import _propagator

__all__ = [
    "control_cost",
    "RateResult",
    "rate_linear_oracle",
    "point_rate",
    "MinimizeResult",
    "rate_minimize",
    "gradient_check",
]


def control_cost(h):
    """``1/2 sum_n sum_k |h_k(t_n)|^2 dt``."""
    return 0.5 * h.norm_sq


@dataclass
class RateResult:
    """Outcome of an exact rate evaluation; ``value`` is ``inf`` when infeasible."""

    value: float
    h_star: ControlPath | None
    feasible: bool
    infeasible_modes: list = field(default_factory=list)
    residual: float = 0.0


def _linear_gain(cfg):
    """Per-mode gain ``P s0 sqrt(w)`` of the linear family; validates the family."""
    if not (cfg.b.is_constant and cfg.b.at_zero() == 0.0):
        raise ValidationError("linear oracle needs b = 0")
    if not cfg.sigma.is_constant:
        raise ValidationError("linear oracle needs a constant sigma")
    prop = _propagator(cfg)
    return prop.E, prop.P * cfg.sigma.at_zero() * prop.sqrt_w


def _response(cfg):
    """Lower-triangular response ``A[k, n, j]`` of ``Z_{n+1}`` to ``h_j`` for every mode."""
    E, gain = _linear_gain(cfg)
    n = cfg.n_steps
    lag = np.arange(n)[:, None] - np.arange(n)[None, :]
    Ek = E.reshape(-1)
    with np.errstate(invalid="ignore", over="ignore"):
        powers = Ek[:, None, None] ** np.maximum(lag, 0)[None]
    A = np.where(lag[None] >= 0, powers, 0.0) * gain.reshape(-1)[:, None, None]
    return A


def rate_linear_oracle(f, cfg, mode="trajectory", rtol=1e-9):
    """Exact ``I(f)`` for ``b = 0`` and constant ``sigma``.

    The skeleton map is linear and acts mode by mode, so ``I(f)`` is a batch of
    least-norm problems ``min |h_k| s.t. A_k h_k = f_k``, solved through the
    normal equations ``A A^H y = f``, ``h = A^H y``.

    Parameters
    ----------
    f : ndarray
        Physical target; shape ``(n_steps + 1, *grid)`` (the values at every
        step, starting with the zero initial datum) for ``mode="trajectory"``,
        or ``grid.shape`` for ``mode="final"``.
    cfg : SimConfig
    mode : {"trajectory", "final"}
    rtol : float
        Relative residual above which a mode is declared unreachable.

    Returns
    -------
    RateResult
    """
    grid = cfg.grid
    f = np.asarray(f, dtype=float)
    n = cfg.n_steps
    if mode == "trajectory":
        if f.shape != (n + 1,) + grid.shape:
            raise ValidationError(f"trajectory target must have shape {(n + 1,) + grid.shape}")
        if np.any(f[0] != 0.0):
            return RateResult(np.inf, None, False, ["initial datum"])
        F = grid.to_coeffs(f[1:]).reshape(n, -1).T  # (modes, n)
    elif mode == "final":
        if f.shape != grid.shape:
            raise ValidationError(f"final target must have shape {grid.shape}")
        F = grid.to_coeffs(f).reshape(-1, 1)
    else:
        raise ValidationError(f"mode must be 'trajectory' or 'final', got {mode!r}")
    A = _response(cfg)
    if mode == "final":
        A = A[:, -1:, :]
    scale = max(float(np.max(np.abs(F))), 1e-300)
    h = np.zeros((A.shape[0], n), dtype=complex)
    bad = []
    live = np.nonzero(np.max(np.abs(A), axis=(1, 2)) > 0)[0]
    dead = np.setdiff1d(np.arange(A.shape[0]), live)
    for k in dead:
        if np.max(np.abs(F[k])) > rtol * scale:
            bad.append(np.unravel_index(k, grid.shape))
    if live.size:
        Al = A[live]
        AH = np.conj(np.swapaxes(Al, 1, 2))
        M = Al @ AH
        y = np.linalg.solve(M, F[live][..., None])
        h[live] = (AH @ y)[..., 0]
        res = np.max(np.abs((Al @ h[live][..., None])[..., 0] - F[live]), axis=1)
        for k, r in zip(live, res):
            if r > rtol * scale:
                bad.append(np.unravel_index(k, grid.shape))
    if bad:
        return RateResult(np.inf, None, False, [tuple(int(i) for i in b) for b in bad])
    hc = h.T.reshape((n,) + grid.shape)
    hp = ControlPath(hc, cfg.dt)
    res = 0.0 if not live.size else float(np.max(res)) / scale
    return RateResult(control_cost(hp), hp, True, [], res)


def point_rate(cfg, level, steps=None):
    """Cheapest control cost of reaching ``|u(t_m, x)| = level`` at a single point.

    The constraint is one real linear functional ``l(h) = level``, so the
    minimum is ``level^2 dt / (2 |g_m|^2)``, where ``g_m`` collects the
    responses of ``u(t_m, x)`` to every control coordinate.  ``|g_m|`` does not
    depend on ``x`` (translation invariance), so the result is the minimum over
    the requested steps.

    Returns
    -------
    rate : float
    step : int
        Step attaining it.
    h_star : ControlPath
        Minimizing control for the point ``x = 0`` (the grid index ``N/2``).
    """
    A = _response(cfg)  # (modes, n, n): row n -> step n + 1
    n = cfg.n_steps
    steps = list(range(1, n + 1)) if steps is None else [int(s) for s in steps if s > 0]
    if not steps:
        return np.inf, None, None
    energy = np.array([np.sum(np.abs(A[:, s - 1, :]) ** 2) for s in steps])
    best = int(np.argmax(energy))
    if energy[best] == 0.0:
        return (0.0 if level == 0 else np.inf), steps[best], None
    m = steps[best]
    grid = cfg.grid
    centre = (grid.points // 2,) * grid.dim
    x0 = grid.coords[centre]
    phase = np.exp(1j * np.tensordot(grid.wavevectors, x0 + grid.half_length, 1)).reshape(-1)
    g = phase[:, None] * A[:, m - 1, :]  # u(t_m, x0) = sum g h
    h = level * np.conj(g) / energy[best]
    hc = h.T.reshape((n,) + grid.shape)
    return float(level**2 * cfg.dt / (2.0 * energy[best])), m, ControlPath(hc, cfg.dt)


# ---------------------------------------------------------------------------
# penalized minimization


class _Problem:
    """``J(r) = 1/2 dt sum r^2 / N^d + lam * dt dx^d sum_n |Z_n - f_n|^2``.

    ``r`` is the physical control, shape ``(n_steps, *grid)``; its forward
    coefficients are ``h``.  In final mode only ``n = n_steps`` is penalized
    and the ``dt`` factor of the penalty is dropped.
    """

    def __init__(self, f, cfg, mode):
        grid = cfg.grid
        n = cfg.n_steps
        self.cfg, self.grid, self.mode = cfg, grid, mode
        f = np.asarray(f, dtype=float)
        if mode == "trajectory":
            if f.shape != (n + 1,) + grid.shape:
                raise ValidationError(f"trajectory target must have shape {(n + 1,) + grid.shape}")
            self.mask = np.ones(n + 1)
            self.mask[0] = 0.0
            self.pen_w = cfg.dt * grid.cell_volume
            self.f = f
        elif mode == "final":
            if f.shape != grid.shape:
                raise ValidationError(f"final target must have shape {grid.shape}")
            self.mask = np.zeros(n + 1)
            self.mask[-1] = 1.0
            self.pen_w = grid.cell_volume
            self.f = np.zeros((n + 1,) + grid.shape)
            self.f[-1] = f
        else:
            raise ValidationError(f"mode must be 'trajectory' or 'final', got {mode!r}")
        prop = _propagator(cfg)
        self.E, self.P, self.sw = prop.E, prop.P, prop.sqrt_w
        self.cost_w = cfg.dt / grid.size
        self.lam = 1.0

    def _op(self, mult, x):
        return self.grid.to_values(mult * self.grid.to_coeffs(x))

    def forward(self, r):
        cfg, grid, n = self.cfg, self.grid, self.cfg.n_steps
        v = self._op(self.sw, r)
        u = np.zeros((n + 1,) + grid.shape)
        c = np.zeros(grid.shape, dtype=complex)
        for k in range(n):
            forcing = cfg.b(u[k]) + cfg.sigma(u[k]) * v[k]
            c = self.E * c + self.P * grid.to_coeffs(forcing)
            u[k + 1] = grid.to_values(c)
        return u, v

    def pieces(self, r, u=None):
        if u is None:
            u, _ = self.forward(r)
        gap = (u - self.f) * self.mask.reshape((-1,) + (1,) * self.grid.dim)
        cost = 0.5 * self.cost_w * float(np.sum(r * r))
        resid = self.pen_w * float(np.sum(gap * gap))
        return cost, resid, u

    def value(self, r):
        cost, resid, _ = self.pieces(r)
        return cost + self.lam * resid

    def value_grad(self, r):
        """Objective and gradient by the discrete adjoint.

        With ``p_n = dJ/du_n`` (``p`` kept in spectral form),

            p_n = 2 lam w (u_n - f_n) + E^T p_{n+1} + [b'(u_n) + sigma'(u_n) v_n] P^T p_{n+1},
            dJ/dr_n = cost_w r_n + W^T [sigma(u_n) P^T p_{n+1}],

        where transposes of the real Fourier multipliers conjugate the symbol
        and ``W`` (multiplication by ``sqrt(weight)``) is symmetric.
        """
        cfg, grid, n = self.cfg, self.grid, self.cfg.n_steps
        u, v = self.forward(r)
        cost, resid, _ = self.pieces(r, u)
        gap = (u - self.f) * self.mask.reshape((-1,) + (1,) * grid.dim)
        src = grid.to_coeffs(2.0 * self.lam * self.pen_w * gap)
        lin = cfg.b.derivative(u[:-1]) + cfg.sigma.derivative(u[:-1]) * v
        Ec, Pc = np.conj(self.E), np.conj(self.P)
        sp = np.empty((n,) + grid.shape)
        p = src[n]
        for k in range(n - 1, -1, -1):
            sp[k] = grid.to_values(Pc * p)
            p = src[k] + Ec * p + grid.to_coeffs(lin[k] * sp[k])
        grad = self.cost_w * r + self._op(self.sw, cfg.sigma(u[:-1]) * sp)
        return cost + self.lam * resid, grad, cost, resid


def gradient_check(problem, r, n_probe=5, rng=None, step=1e-5):
    """Relative errors of adjoint vs central-difference partial derivatives.

    Probes ``n_probe`` random coordinates.  The error of each probe is scaled
    by ``max(|g_i|, 1e-6 |g|_inf)`` so that coordinates where the gradient is
    essentially zero are judged on the scale of the whole gradient.
    """
    rng = np.random.default_rng(rng)
    _, g, _, _ = problem.value_grad(r)
    flat = r.reshape(-1)
    picks = rng.choice(flat.size, size=min(n_probe, flat.size), replace=False)
    gmax = float(np.max(np.abs(g)))
    errs = []
    for i in picks:
        h = step * max(1.0, abs(flat[i]))
        rp = flat.copy()
        rp[i] += h
        rm = flat.copy()
        rm[i] -= h
        fd = (problem.value(rp.reshape(r.shape)) - problem.value(rm.reshape(r.shape))) / (2 * h)
        gi = g.reshape(-1)[i]
        errs.append(abs(fd - gi) / max(abs(gi), 1e-6 * gmax, 1e-300))
    return np.asarray(errs)


@dataclass
class MinimizeResult:
    lambdas: np.ndarray
    estimates: np.ndarray     # cost(h_lambda)
    objectives: np.ndarray    # J_lambda(h_lambda)
    residuals: np.ndarray     # ||Z^h - f||_grid
    h_best: ControlPath
    iterations: list
    grad_check: np.ndarray

    @property
    def estimate(self):
        return float(self.estimates[-1])


def _accelerated_descent(problem, r0, max_iter, gtol, stall, trace):
    """Nesterov-accelerated gradient descent with backtracking and restart.

    The step is found by Armijo backtracking from the extrapolated point; the
    momentum is reset whenever the objective would go up, so the accepted
    iterates are monotone.
    """
    x = r0.copy()
    fx = problem.value(x)
    y, t_k = x.copy(), 1.0
    step = 1.0
    best, since = fx, 0
    for it in range(max_iter):
        fy, gy, _, _ = problem.value_grad(y)
        gnorm = float(np.sqrt(np.sum(gy * gy)))
        if gnorm <= gtol * max(1.0, abs(fy)) and fy <= fx:
            return y, fy, it
        while True:
            cand = y - step * gy
            fc = problem.value(cand)
            if fc <= fy - 0.5 * step * gnorm**2:
                break
            step *= 0.5
            if step < 1e-300:
                raise OptimizationError("line search failed", trace=trace)
        if fc > fx:
            # restart momentum from the last accepted point
            y, t_k = x.copy(), 1.0
            if abs(fc - fx) <= 1e-15 * max(1.0, abs(fx)):
                return x, fx, it
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k**2))
        y = cand + ((t_k - 1.0) / t_next) * (cand - x)
        rel = (fx - fc) / max(1.0, abs(fx))
        x, fx, t_k = cand, fc, t_next
        trace.append(fx)
        step *= 2.0
        if fx < best * (1.0 - 1e-14) - 1e-300:
            best, since = fx, 0
        else:
            since += 1
            if since >= stall:
                if rel < 1e-13:
                    return x, fx, it
                raise OptimizationError(f"objective did not decrease over {stall} iterations",
                                        trace=trace)
        if rel < 1e-15 and it > 10:
            return x, fx, it
    return x, fx, max_iter


def rate_minimize(f, cfg, lambdas=(1e0, 1e1, 1e2, 1e3, 1e4, 1e5), mode="trajectory", max_iter=2000,
                  gtol=1e-10, stall=50, init=None, seed=0, check_tol=1e-4):
    """Penalized upper estimate of ``I(f)`` for any registered coefficient family.

    For each ``lam`` (warm-started from the previous stage) the objective

        J(h) = cost(h) + lam * ||Z^h - f||^2_grid

    is minimized over controls by accelerated gradient descent; gradients come
    from the discrete adjoint of the step map.  ``cost(h_lam)`` is the
    estimate; it increases towards ``I(f)`` as ``lam`` grows.

    Before the first stage the adjoint gradient is compared with central
    differences on 5 random coordinates at a random point; a relative error
    above ``check_tol`` aborts the run.

    Parameters
    ----------
    f : ndarray
        Target, as in `rate_linear_oracle`.
    cfg : SimConfig
    lambdas : sequence of float
        Increasing penalty weights.
    mode : {"trajectory", "final"}
    init : ControlPath, optional
        Starting control (default zero).

    Returns
    -------
    MinimizeResult

    Raises
    ------
    OptimizationError
        On gradient-check failure or a stalled objective.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size < 1 or np.any(np.diff(lambdas) <= 0) or lambdas[0] <= 0:
        raise ValidationError("lambdas must be a positive increasing sequence")
    problem = _Problem(f, cfg, mode)
    grid = cfg.grid
    shape = (cfg.n_steps,) + grid.shape
    rng = np.random.default_rng(seed)
    r = np.zeros(shape) if init is None else grid.to_values(init.h_coeffs)
    problem.lam = float(lambdas[0])
    probe = r + 0.1 * rng.standard_normal(shape)
    errs = gradient_check(problem, probe, rng=rng)
    if np.max(errs) > check_tol:
        raise OptimizationError(f"adjoint gradient check failed: relative errors {errs}", trace=list(errs))
    est, obj, res, iters = [], [], [], []
    for lam in lambdas:
        problem.lam = float(lam)
        trace = []
        r, _, it = _accelerated_descent(problem, r, max_iter, gtol, stall, trace)
        cost, resid, _ = problem.pieces(r)
        est.append(cost)
        obj.append(cost + lam * resid)
        res.append(np.sqrt(resid))
        iters.append(it)
    if not np.all(np.isfinite(est)):
        raise NumericalError("rate minimization produced non-finite values")
    h = ControlPath(grid.to_coeffs(r), cfg.dt)
    return MinimizeResult(lambdas, np.asarray(est), np.asarray(obj), np.asarray(res), h, iters, errs)
