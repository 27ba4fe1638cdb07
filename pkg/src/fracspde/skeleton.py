"""Controls in the Cameron-Martin space and the skeleton equation.

The orthonormal system of the reproducing space is taken to be the grid
Fourier modes scaled by ``1/sqrt(weight(k))``.  In these coordinates a control
slice ``h(t) = sum_k h_k(t) e_k`` pairs with a field ``g`` through

    <g, h(t)>_H  <->  g * v_t,     v_t = sum_k sqrt(weight(k)) h_k(t) exp(i xi_k (x + L)),

so the control acts as the real forcing field ``sigma(u) v_t`` under the
semigroup, and ``||h(t)||_H^2 = sum_k |h_k(t)|^2``.  Modes of zero weight do
not move the solution; they still count in the norm, so minimizers leave
them at zero.

Each control slice is held constant over its step and is read as the value at
the step midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kernel import hermitian_part

__all__ = [
    "ControlPath",
    "control_fields",
    "pairing_drift",
    "solve_skeleton",
    "weak_continuity_probe",
    "ProbeResult",
]


@dataclass(frozen=True)
class ControlPath:
    """Discrete control ``h_k(t_n + dt/2)`` on every stored grid mode.

    Parameters
    ----------
    h_coeffs : ndarray, complex, shape ``(n_steps, *grid)``
        Hermitian in the mode axes, so that each slice is a real field.
    dt : float
    norm_bound : float, optional
        If given, ``||h||_{H_T} <= norm_bound`` is enforced.
    """

    h_coeffs: np.ndarray
    dt: float
    norm_bound: float | None = None

    def __post_init__(self):
        h = np.asarray(self.h_coeffs, dtype=complex)
        if h.ndim < 2:
            raise ValidationError("h_coeffs must have shape (n_steps, *grid)")
        if not np.all(np.isfinite(h)):
            raise ValidationError("control has non-finite coefficients")
        if not float(self.dt) > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "h_coeffs", h)
        object.__setattr__(self, "dt", float(self.dt))
        if self.norm_bound is not None and self.norm > float(self.norm_bound) * (1 + 1e-12):
            raise ValidationError(f"control norm {self.norm} exceeds bound {self.norm_bound}")

    @property
    def n_steps(self):
        return self.h_coeffs.shape[0]

    @property
    def norm_sq(self):
        return float(np.sum(np.abs(self.h_coeffs) ** 2) * self.dt)

    @property
    def norm(self):
        return float(np.sqrt(self.norm_sq))

    @classmethod
    def zeros(cls, cfg):
        return cls(np.zeros((cfg.n_steps,) + cfg.grid.shape, dtype=complex), cfg.dt)

    @classmethod
    def from_physical(cls, fields, grid, dt, norm_bound=None):
        """Control whose slices have the given real physical profiles ``(n_steps, *grid)``."""
        fields = np.asarray(fields, dtype=float)
        return cls(grid.to_coeffs(fields), dt, norm_bound)

    def check_hermitian(self, grid, tol=1e-12):
        gap = np.max(np.abs(self.h_coeffs - hermitian_part(self.h_coeffs, grid)), initial=0.0)
        scale = np.max(np.abs(self.h_coeffs), initial=0.0)
        if gap > tol * max(scale, 1.0):
            raise ValidationError(f"control is not Hermitian (gap {gap:.2e}); slices would be complex")

    def __add__(self, other):
        return ControlPath(self.h_coeffs + other.h_coeffs, self.dt)

    def __sub__(self, other):
        return ControlPath(self.h_coeffs - other.h_coeffs, self.dt)

    def __mul__(self, a):
        return ControlPath(self.h_coeffs * float(a), self.dt)

    __rmul__ = __mul__


def _check_layout(h, cfg):
    if h.h_coeffs.shape != (cfg.n_steps,) + cfg.grid.shape:
        raise ValidationError(
            f"control shape {h.h_coeffs.shape} does not match {(cfg.n_steps,) + cfg.grid.shape}"
        )
    if not np.isclose(h.dt, cfg.dt, rtol=1e-12, atol=0.0):
        raise ValidationError(f"control dt={h.dt} does not match cfg.dt={cfg.dt}")
    h.check_hermitian(cfg.grid)


def control_fields(h, cfg):
    """Physical control fields ``v_n``, shape ``(n_steps, *grid)``."""
    _check_layout(h, cfg)
    return cfg.grid.to_values(np.sqrt(cfg.weights) * h.h_coeffs)


def pairing_drift(state, h_t, weights, grid, sigma):
    """Forcing ``sigma(Z) v_t`` produced by one control slice.

    The Green-function factor of the pairing is applied afterwards by the
    step map, so only the pointwise product is formed here.

    Parameters
    ----------
    state : Field or ndarray
        Current solution (physical values).
    h_t : ndarray
        Control coefficients of one step, shape ``grid.shape``.
    weights : ndarray
    grid : FrequencyGrid
    sigma : Coefficient
    """
    from .solver import Field

    values = state.values if hasattr(state, "values") else np.asarray(state)
    v = grid.to_values(np.sqrt(weights) * np.asarray(h_t))
    drift = sigma(values) * v
    return Field.from_values(drift, grid, getattr(state, "time_stamp", 0.0))


def solve_skeleton(h, cfg):
    """Trajectory of ``Z^h``: the controlled equation with the noise switched off.

    It runs the same step map as `simulate_path` with ``epsilon = 0``, so the
    two agree exactly; no random numbers are drawn.
    """
    from .solver import simulate_path

    return simulate_path(cfg.with_(epsilon=0.0), control=h, check=False)


@dataclass
class ProbeResult:
    sup: np.ndarray
    hoelder: np.ndarray


def weak_continuity_probe(h_sequence, h_limit, cfg, beta=(0.25, 0.25)):
    """Distances between ``Z^{h_n}`` and ``Z^h`` along a control sequence.

    Returns the sup-norm distances over all saved snapshots and, for
    information, the discrete Hoelder norms of the differences on the central
    window with exponents ``beta``.
    """
    from .harness import hoelder_norm

    base = solve_skeleton(h_limit, cfg).values
    sup, hol = [], []
    for h in h_sequence:
        diff = solve_skeleton(h, cfg).values - base
        sup.append(float(np.max(np.abs(diff))))
        hol.append(hoelder_norm(diff, cfg, beta))
    return ProbeResult(np.asarray(sup), np.asarray(hol))
