"""Exponential-Euler integration of the mild equation on a periodic grid.

One step of size ``dt`` maps spectral coefficients ``c`` of ``u(t_n)`` to

    c' = E c + P F[b(u) + sigma(u) v_n + sqrt(eps) sigma(u) dW_n / dt],

with ``E = exp(dt psi)`` and ``P = (E - 1) / psi`` (``P = dt`` where
``psi = 0``).  ``v_n`` is the control field of step ``n`` (see
`fracspde.skeleton`); ``b`` and ``sigma`` are frozen at the left point.

``P`` integrates the semigroup exactly against a forcing held constant over
the step.  Drift, control and noise all go through the same factor, so the
noise increment acts exactly like a piecewise constant control
``dW_n / (sqrt(eps) dt)``; this is what makes the controlled equation a pure
shift of the noise (the basis of the importance sampler) and makes the
skeleton exact for piecewise constant controls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import ensure_runnable
from .errors import NumericalError, ValidationError
from .kernel import grid_symbol
from .noise import sample_increment

__all__ = [
    "Field",
    "Trajectory",
    "MomentEstimate",
    "PicardResult",
    "step_mild",
    "simulate_path",
    "frozen_noise",
    "picard_solve",
    "moment_estimate",
]


@dataclass(frozen=True)
class Field:
    """Real field on the grid at one time, with its forward-normalized coefficients."""

    values: np.ndarray
    coeffs: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("field has non-finite values")

    @classmethod
    def from_values(cls, values, grid, t=0.0):
        values = np.asarray(values, dtype=float)
        return cls(values, grid.to_coeffs(values), float(t))

    @classmethod
    def from_coeffs(cls, coeffs, grid, t=0.0):
        coeffs = np.asarray(coeffs)
        return cls(grid.to_values(coeffs), coeffs, float(t))

    @classmethod
    def zeros(cls, grid, t=0.0):
        return cls(np.zeros(grid.shape), np.zeros(grid.shape, dtype=complex), float(t))


@dataclass
class Trajectory:
    """Saved snapshots.

    ``values``/``coeffs`` have shape ``(n_save, *grid)`` for a single path and
    ``(n_replicas, n_save, *grid)`` for a replica batch.
    """

    times: np.ndarray
    steps: tuple
    values: np.ndarray
    coeffs: np.ndarray
    seed: int
    streams: tuple
    dim: int = 1

    @property
    def time_axis(self):
        return self.values.ndim - 1 - self.dim

    @property
    def batched(self):
        return self.time_axis == 1

    @property
    def final(self):
        return np.take(self.values, -1, axis=self.time_axis)

    def fields(self):
        if self.batched:
            raise ValidationError("fields() is only defined for a single path")
        return [Field(v, c, t) for v, c, t in zip(self.values, self.coeffs, self.times)]


class _Propagator:
    """Per-config constants of the step map; built once and shared read-only."""

    def __init__(self, cfg):
        grid = cfg.grid
        dt = cfg.dt
        psi = grid_symbol(cfg.idx, grid)
        z = dt * psi
        self.E = np.exp(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.P = np.where(psi == 0, dt, np.expm1(z) / np.where(psi == 0, 1.0, psi))
        self.Q = self.P / dt
        self.sqrt_w = np.sqrt(cfg.weights)
        self.root_eps = np.sqrt(cfg.epsilon)
        for arr in (self.E, self.P, self.Q, self.sqrt_w):
            arr.setflags(write=False)


@lru_cache(maxsize=32)
def _propagator(cfg):
    return _Propagator(cfg)


def _advance(cfg, prop, c, u, noise_coeffs, control_field, step):
    """One step on (possibly batched) coefficients; returns ``(c', u')``."""
    grid = cfg.grid
    forcing = None
    if not (cfg.b.family == "constant" and cfg.b.c == 0.0):
        forcing = cfg.b(u)
    if control_field is not None:
        extra = cfg.sigma(u) * control_field
        forcing = extra if forcing is None else forcing + extra
    new = prop.E * c
    if forcing is not None:
        new = new + prop.P * grid.to_coeffs(forcing)
    if noise_coeffs is not None and prop.root_eps > 0.0:
        if cfg.sigma.is_constant:
            stoch = cfg.sigma.at_zero() * noise_coeffs
        else:
            stoch = grid.to_coeffs(cfg.sigma(u) * grid.to_values(noise_coeffs))
        new = new + prop.root_eps * prop.Q * stoch
    values = grid.to_values(new)
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite values at step {step}", step=step)
    return new, values


def step_mild(state, cfg, dW=None, control_term=None, step=0):
    """Advance one `Field` by one exponential-Euler step.

    Parameters
    ----------
    state : Field
    cfg : SimConfig
    dW : NoiseIncrement, optional
        Must have ``dt == cfg.dt``.  Ignored when ``cfg.epsilon == 0``.
    control_term : Field or ndarray, optional
        The control field ``v_n`` (not yet multiplied by ``sigma(u)``).
    step : int
        Index reported if the step blows up.
    """
    prop = _propagator(cfg)
    noise = None
    if dW is not None:
        if not np.isclose(dW.dt, cfg.dt, rtol=1e-12, atol=0.0):
            raise ValidationError(f"noise increment dt={dW.dt} does not match cfg.dt={cfg.dt}")
        noise = dW.coeffs
    ctrl = control_term.values if isinstance(control_term, Field) else control_term
    c, u = _advance(cfg, prop, state.coeffs, state.values, noise, ctrl, step)
    return Field(u, c, state.time_stamp + cfg.dt)


def _noise_at(cfg, streams, step, batched):
    inc = sample_increment(cfg.weights, cfg.grid, cfg.dt,
                           (cfg.seed, streams if batched else streams[0], step))
    return inc.coeffs


def _control_fields(cfg, control):
    if control is None:
        return None
    from .skeleton import control_fields

    return control_fields(control, cfg)


def simulate_path(cfg, control=None, n_replicas=None, first_stream=0, noise=None,
                  check=True, noise_hook=None):
    """Integrate from zero initial data and keep the snapshots at ``cfg.save_steps``.

    Parameters
    ----------
    cfg : SimConfig
    control : ControlPath, optional
        Adds the drift ``sigma(u) v`` of the controlled equation.
    n_replicas : int, optional
        Number of independent paths; replica ``r`` uses stream
        ``first_stream + r``.  ``None`` returns a single unbatched path on
        stream ``first_stream``.
    noise : ndarray, optional
        Frozen noise coefficients of shape ``(n_steps, *grid)`` (single path
        only); replaces the RNG.
    check : bool
        Run `ensure_runnable` first.
    noise_hook : callable, optional
        Called as ``noise_hook(step, coeffs)`` with every noise increment
        drawn (coefficients, replica axis first when batched).

    Notes
    -----
    With ``cfg.epsilon == 0`` no random numbers are drawn at all.
    """
    if check:
        ensure_runnable(cfg)
    grid = cfg.grid
    batched = n_replicas is not None
    count = int(n_replicas) if batched else 1
    if count < 1:
        raise ValidationError("n_replicas must be >= 1")
    streams = tuple(range(int(first_stream), int(first_stream) + count))
    lead = (count,) if batched else ()
    if noise is not None:
        if batched:
            raise ValidationError("frozen noise is only supported for a single path")
        noise = np.asarray(noise)
        if noise.shape != (cfg.n_steps,) + grid.shape:
            raise ValidationError(f"frozen noise must have shape {(cfg.n_steps,) + grid.shape}")
    prop = _propagator(cfg)
    ctrl = _control_fields(cfg, control)
    c = np.zeros(lead + grid.shape, dtype=complex)
    u = np.zeros(lead + grid.shape)
    save = cfg.save_steps
    vals, coefs = [], []
    slot = 0
    if save[0] == 0:
        vals.append(u)
        coefs.append(c)
        slot = 1
    noisy = cfg.epsilon > 0.0
    for n in range(cfg.n_steps):
        if not noisy:
            dw = None
        elif noise is not None:
            dw = noise[n]
        else:
            dw = _noise_at(cfg, streams, n, batched)
        if dw is not None and noise_hook is not None:
            noise_hook(n, dw)
        c, u = _advance(cfg, prop, c, u, dw, None if ctrl is None else ctrl[n], n)
        if slot < len(save) and save[slot] == n + 1:
            vals.append(u)
            coefs.append(c)
            slot += 1
    axis = 1 if batched else 0
    times = np.asarray(save, dtype=float) * cfg.dt
    return Trajectory(times, save, np.stack(vals, axis=axis), np.stack(coefs, axis=axis),
                      cfg.seed, streams, grid.dim)


def frozen_noise(cfg, stream=0):
    """The noise coefficients `simulate_path` draws for one stream, shape ``(n_steps, *grid)``."""
    return np.stack([
        sample_increment(cfg.weights, cfg.grid, cfg.dt, (cfg.seed, stream, n)).coeffs
        for n in range(cfg.n_steps)
    ])


@dataclass
class PicardResult:
    trajectory: np.ndarray  # (n_steps + 1, *grid) physical values
    distances: list
    converged: bool

    @property
    def ratios(self):
        d = np.asarray(self.distances)
        return d[1:] / np.where(d[:-1] > 0, d[:-1], np.inf)


def picard_solve(cfg, n_iter=100, tol=1e-12, noise=None, control=None, stream=0):
    """Fixed point of the discrete Duhamel map by Picard iteration.

    The map sends a space-time field ``u`` to

        Phi(u)_m = sum_{j < m} exp((m-1-j) dt psi) P F[b(u_j) + sigma(u_j) v_j
                                                  + sqrt(eps) sigma(u_j) dW_j / dt],

    evaluated as a direct O(n_steps^2) sum, independently of the step loop in
    `simulate_path`.  Iteration starts from ``u = 0``; ``M_n`` is the sup
    distance between consecutive iterates.

    Raises
    ------
    ValidationError
        Outside the guard ``N <= 64``, ``n_steps <= 64``.
    NumericalError
        If ``M_n`` increases three times in a row.
    """
    grid = cfg.grid
    if grid.points > 64 or cfg.n_steps > 64:
        raise ValidationError("picard_solve is limited to N <= 64 and n_steps <= 64")
    if noise is None:
        noise = frozen_noise(cfg, stream) if cfg.epsilon > 0 else np.zeros((cfg.n_steps,) + grid.shape, complex)
    noise = np.asarray(noise)
    prop = _propagator(cfg)
    psi = grid_symbol(cfg.idx, grid)
    lags = np.exp(np.arange(cfg.n_steps)[:, None] * cfg.dt * psi.ravel()[None, :])
    lags = lags.reshape((cfg.n_steps,) + grid.shape)
    ctrl = _control_fields(cfg, control)
    u = np.zeros((cfg.n_steps + 1,) + grid.shape)
    distances = []
    rises = 0
    for _ in range(int(n_iter)):
        src = prop.P * grid.to_coeffs(cfg.b(u[:-1]) + (0.0 if ctrl is None else cfg.sigma(u[:-1]) * ctrl))
        if cfg.epsilon > 0:
            src = src + prop.root_eps * prop.Q * grid.to_coeffs(cfg.sigma(u[:-1]) * grid.to_values(noise))
        new_c = np.zeros((cfg.n_steps + 1,) + grid.shape, dtype=complex)
        for m in range(1, cfg.n_steps + 1):
            new_c[m] = np.sum(lags[:m][::-1] * src[:m], axis=0)
        new = grid.to_values(new_c)
        if not np.all(np.isfinite(new)):
            raise NumericalError("Picard iterate became non-finite")
        dist = float(np.max(np.abs(new - u)))
        if distances and dist > distances[-1]:
            rises += 1
            if rises >= 3:
                raise NumericalError("Picard distances increased 3 times in a row", residual=dist)
        else:
            rises = 0
        distances.append(dist)
        u = new
        if dist < tol:
            return PicardResult(u, distances, True)
    return PicardResult(u, distances, False)


@dataclass
class MomentEstimate:
    value: float
    ci: tuple
    at: tuple  # (time, grid index)
    n_replicas: int


def moment_estimate(cfg, q, n_replicas, control=None, first_stream=0, batch=256):
    """``sup_{saved (t, x)}`` of the empirical ``E|u(t, x)|^q`` with a 95% CI.

    The CI is the normal interval of the sample mean at the maximizing point.
    """
    q = float(q)
    if not 2.0 <= q <= 8.0:
        raise ValidationError(f"q must lie in [2, 8], got {q}")
    total = None
    total_sq = None
    done = 0
    while done < n_replicas:
        k = min(batch, n_replicas - done)
        tr = simulate_path(cfg, control, n_replicas=k, first_stream=first_stream + done)
        m = np.abs(tr.values) ** q
        s, s2 = m.sum(axis=0), (m**2).sum(axis=0)
        total = s if total is None else total + s
        total_sq = s2 if total_sq is None else total_sq + s2
        done += k
    mean = total / n_replicas
    var = np.maximum(total_sq / n_replicas - mean**2, 0.0)
    flat = int(np.argmax(mean))
    pos = np.unravel_index(flat, mean.shape)
    se = np.sqrt(var[pos] / max(n_replicas - 1, 1))
    value = float(mean[pos])
    return MomentEstimate(value, (value - 1.96 * se, value + 1.96 * se),
                          (float(tr.times[pos[0]]), tuple(int(i) for i in pos[1:])), n_replicas)
