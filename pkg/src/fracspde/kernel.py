"""Fourier symbol of the skewed fractional operator, its Green function and
the exact spectral semigroup on a periodic grid.

Fourier convention: ``F phi(xi) = int exp(+i xi x) phi(x) dx``, so that the
Green function reads

    G(t, x) = (1/2pi) int exp(-i z x + t psi(z)) dz,
    psi(z)  = -sum_i |z_i|^alpha_i exp(-i delta_i (pi/2) sgn z_i).

numpy's FFT expands a field in ``exp(+i xi x)`` modes, and the operator acts
on such a mode with the multiplier ``psi(-xi)``.  `grid_symbol` applies that
flip once so callers never have to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "StableIndex",
    "FrequencyGrid",
    "Quadrature",
    "symbol",
    "green_1d",
    "green_nd",
    "grid_symbol",
    "semigroup_apply",
    "hermitian_part",
]


def check_pair(alpha, delta):
    """Raise `ValidationError` unless ``(alpha, delta)`` is admissible."""
    alpha = float(alpha)
    delta = float(delta)
    if not math.isfinite(alpha) or not math.isfinite(delta):
        raise ValidationError(f"non-finite stability pair ({alpha}, {delta})")
    if not 0.0 < alpha <= 2.0:
        raise ValidationError(f"alpha={alpha} outside (0, 2]")
    if alpha == 1.0:
        raise ValidationError("alpha=1 is excluded (Cauchy-type case is not supported)")
    bound = min(alpha, 2.0 - alpha)
    if abs(delta) > bound + 1e-14:
        raise ValidationError(
            f"|delta|={abs(delta)} exceeds min(alpha, 2-alpha)={bound} for alpha={alpha}"
        )


@dataclass(frozen=True)
class StableIndex:
    """Multi-index ``(alpha, delta)``, one pair per space axis."""

    alpha: tuple
    delta: tuple

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        delta = tuple(float(d) for d in np.atleast_1d(self.delta))
        if len(alpha) == 0:
            raise ValidationError("StableIndex needs at least one axis")
        if len(alpha) != len(delta):
            raise ValidationError(
                f"alpha has {len(alpha)} entries but delta has {len(delta)}"
            )
        for a, d in zip(alpha, delta):
            check_pair(a, d)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def isotropic(cls, alpha, delta=0.0, dim=1):
        return cls((alpha,) * dim, (delta,) * dim)

    @property
    def dim(self):
        return len(self.alpha)

    @property
    def alpha0(self):
        return min(self.alpha)


def symbol(idx, xi):
    """Evaluate ``psi(xi)`` for one wavevector or an array of shape ``(..., d)``."""
    xi = np.asarray(xi, dtype=float)
    scalar = xi.ndim <= 1
    if xi.ndim == 0:
        xi = xi[None]
    if xi.shape[-1] != idx.dim:
        raise ValidationError(
            f"wavevector has {xi.shape[-1]} components, index has dimension {idx.dim}"
        )
    alpha = np.asarray(idx.alpha)
    delta = np.asarray(idx.delta)
    terms = -np.abs(xi) ** alpha * np.exp(-1j * delta * (np.pi / 2) * np.sign(xi))
    psi = terms.sum(axis=-1)
    # |delta| <= 2 - alpha keeps cos(delta pi/2) >= 0
    if np.any(psi.real > 1e-12 * (1.0 + np.abs(psi))):
        raise NumericalError("symbol has positive real part; index constraints violated")
    return complex(psi) if scalar else psi


@dataclass(frozen=True)
class Quadrature:
    """Resolution of the Fourier-inversion quadrature.

    The half-line integral is truncated at a radius (in units of the decay
    scale of the integrand) that doubles until the last doubling changes every
    value by less than ``tol``.
    """

    tol: float = 1e-9
    start: float = 16.0
    max_doublings: int = 24
    order: int = 16
    batch: int = 256


_DEFAULT_QUAD = Quadrature()


def _ray_parameters(alpha, theta, t, x):
    """Rotation angle and decay scale of the integration ray for each ``x >= 0``.

    The integrand ``exp(-i z x - t z^alpha e^{-i theta})`` is analytic in the
    lower-right quadrant, so the half line ``z > 0`` may be swung to
    ``z = r exp(-i phi)``.  The x-term then decays like ``exp(-r x sin phi)``,
    and the power term keeps decaying while ``alpha phi + theta < pi/2``.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        phi_hi = np.minimum(np.pi / 2, 0.8 * (np.pi / 2 - theta) / alpha)
        phi_lo = np.clip(-theta / alpha, 0.0, phi_hi)
        ratio = x * (t * np.cos(theta)) ** (1.0 / alpha)
        weight = ratio / (1.0 + ratio)
        phi = phi_lo + weight * (phi_hi - phi_lo)
        if alpha < 1.0:
            # for alpha < 1 the linear term dominates at infinity, so the ray may
            # reach the imaginary axis as long as the transient growth is mild
            c_full = np.cos(alpha * np.pi / 2 + theta)
            grow = np.maximum(0.0, -c_full)
            r_star = (alpha * grow * t / x) ** (1.0 / (1.0 - alpha))
            g_star = (1.0 - alpha) * grow * t * r_star**alpha
            g_star = np.where(grow == 0.0, 0.0, g_star)
            # tau: size of the power term on the scale 1/x set by the linear term
            tau = t * x ** (-alpha)
            laplace = (c_full >= 0.2) | ((x > 0) & (g_star < 2.0) & (tau <= 4.0))
            phi = np.where(laplace, np.pi / 2, phi)
        c1 = np.cos(alpha * phi + theta)
        damp_x = x * np.sin(phi)
        damp_a = (t * np.maximum(c1, 0.0)) ** (1.0 / alpha)
        scale = 1.0 / np.maximum(damp_x, damp_a)
    return phi, scale


def _panels(lo, hi, rate, order, decay=None):
    """Gauss-Legendre nodes/weights on [lo, hi] with panel widths adapted to ``rate``.

    Panels stop early once ``decay`` (a lower bound on ``-log|integrand|``)
    exceeds 45; the remainder is below double-precision resolution.
    """
    edges = [lo]
    b = lo
    while b < hi:
        if decay is not None and decay(b) > 45.0:
            break
        width = min(0.5 * max(b, 1.0), 6.0 / max(rate(min(1.5 * b + 1.0, hi)), 1e-300))
        b = min(b + width, hi)
        edges.append(b)
    edges = np.asarray(edges)
    gx, gw = np.polynomial.legendre.leggauss(order)
    a, c = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (c - a) * gx + 0.5 * (c + a)
    weights = 0.5 * (c - a) * gw
    return nodes.ravel(), weights.ravel()


def _near_zero_rule(order):
    # geometric panels [2^-k-1, 2^-k] resolve the r^alpha cusp at the origin
    gx, gw = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate(([0.0], 2.0 ** np.arange(-40, 1)))
    a, c = edges[:-1, None], edges[1:, None]
    return (0.5 * (c - a) * gx + 0.5 * (c + a)).ravel(), (0.5 * (c - a) * gw).ravel()


def _ray_integral(alpha, theta, t, x, quad):
    phi, scale = _ray_parameters(alpha, theta, t, x)
    rot = np.exp(-1j * phi)[:, None]
    lin = (-1j * x * scale)[:, None] * rot
    pw = (-t * scale**alpha)[:, None] * np.exp(-1j * (alpha * phi + theta))[:, None]
    pref = scale[:, None] * rot
    speed_lin = float(np.max(x * scale))
    speed_pow = float(np.max(alpha * t * scale**alpha))

    def rate(r):
        return speed_lin + speed_pow * r ** (alpha - 1.0)

    c1 = np.cos(alpha * phi + theta)
    d_lin = x * scale * np.sin(phi)
    d_pow = t * scale**alpha * c1

    def decay(r):
        return float(np.min(d_lin * r + d_pow * r**alpha))

    def integrate(nodes, weights):
        vals = pref * np.exp(lin * nodes + pw * nodes**alpha)
        return vals @ weights

    total = integrate(*_near_zero_rule(quad.order))
    lo, hi = 1.0, quad.start
    total = total + integrate(*_panels(lo, hi, rate, quad.order, decay))
    for _ in range(quad.max_doublings):
        if decay(hi) > 45.0:
            return total.real / np.pi
        inc = integrate(*_panels(hi, 2.0 * hi, rate, quad.order, decay))
        total = total + inc
        hi *= 2.0
        if np.max(np.abs(inc)) < quad.tol:
            return total.real / np.pi
    raise NumericalError(
        f"Fourier inversion did not converge (alpha={alpha}, theta={theta}, t={t})",
        residual=float(np.max(np.abs(inc))),
    )


def green_1d(alpha, delta, t, x, quadrature=None):
    """Green function ``G_{alpha,delta}(t, x)`` by numerical Fourier inversion.

    The two half lines of the inversion integral are complex conjugates, so the
    value is ``Re`` of one half-line integral over pi; that half line is
    rotated into the sector where the integrand decays (Cauchy's theorem), and
    its truncation radius doubles until the increment is below the tolerance.

    Parameters
    ----------
    alpha, delta : float
        Admissible stability/skewness pair.
    t : float
        Time, strictly positive.
    x : float or array_like
        Evaluation points.
    quadrature : Quadrature, optional

    Returns
    -------
    float or ndarray
        Same shape as ``x``.

    Raises
    ------
    NumericalError
        If the truncation never settles below ``quadrature.tol``.
    """
    check_pair(alpha, delta)
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    quad = quadrature or _DEFAULT_QUAD
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    theta = delta * np.pi / 2
    # G_{alpha,delta}(t, -x) = G_{alpha,-delta}(t, x)
    sgn = np.where(flat < 0, -1.0, 1.0)
    xa = np.abs(flat)
    th = theta * sgn
    out = np.empty_like(flat)
    for s in (-1.0, 1.0):
        sel = np.nonzero(sgn == s)[0]
        for start in range(0, sel.size, quad.batch):
            chunk = sel[start : start + quad.batch]
            out[chunk] = _ray_integral(alpha, th[chunk][0], t, xa[chunk], quad)
    if x.ndim == 0:
        return float(out[0])
    return out.reshape(x.shape)


def green_nd(idx, t, x, quadrature=None):
    """Product Green function; ``x`` has shape ``(..., d)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != idx.dim:
        raise ValidationError(f"points must have trailing dimension {idx.dim}")
    val = np.ones(x.shape[:-1])
    for i, (a, d) in enumerate(zip(idx.alpha, idx.delta)):
        val = val * green_1d(a, d, t, x[..., i], quadrature)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class FrequencyGrid:
    """Periodic grid on ``[-L, L)^d`` with ``N`` points per axis.

    Spectral coefficients use the forward-normalized DFT, so the mode-0
    coefficient is the spatial mean and ``values = sum_k c_k exp(i xi_k (x + L))``.
    """

    half_length: float
    points: int
    dim: int = 1

    def __post_init__(self):
        n = int(self.points)
        if n < 4 or n & (n - 1):
            raise ValidationError(f"points per axis must be a power of two >= 4, got {self.points}")
        if not self.half_length > 0:
            raise ValidationError(f"half_length must be positive, got {self.half_length}")
        if int(self.dim) < 1:
            raise ValidationError("grid dimension must be >= 1")
        object.__setattr__(self, "points", n)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "half_length", float(self.half_length))

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def size(self):
        return self.points**self.dim

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    @property
    def dx(self):
        return 2.0 * self.half_length / self.points

    @property
    def cell_volume(self):
        return self.dx**self.dim

    @property
    def spectral_cell(self):
        """Volume ``(pi/L)^d`` of one cell of the dual lattice."""
        return (np.pi / self.half_length) ** self.dim

    @cached_property
    def axis_coords(self):
        return -self.half_length + self.dx * np.arange(self.points)

    @cached_property
    def axis_freqs(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.dx)

    @cached_property
    def coords(self):
        """Physical coordinates, shape ``(*shape, d)``."""
        mesh = np.meshgrid(*([self.axis_coords] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def wavevectors(self):
        """Mode frequencies ``xi_k = pi k / L``, shape ``(*shape, d)``."""
        mesh = np.meshgrid(*([self.axis_freqs] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def wavenumber_norm(self):
        return np.linalg.norm(self.wavevectors, axis=-1)

    def to_coeffs(self, values):
        return np.fft.fftn(values, axes=self.axes, norm="forward")

    def to_values(self, coeffs):
        return np.fft.ifftn(coeffs, axes=self.axes, norm="forward").real

    def l2_norm_sq(self, values):
        """Riemann sum ``sum |u|^2 dx^d`` over the trailing grid axes."""
        return np.sum(np.abs(values) ** 2, axis=self.axes) * self.cell_volume


def hermitian_part(coeffs, grid):
    """Project coefficients onto the Hermitian-symmetric (real-field) subspace."""
    flipped = np.flip(coeffs, axis=grid.axes)
    partner = np.roll(flipped, 1, axis=grid.axes)
    return 0.5 * (coeffs + np.conj(partner))


def grid_symbol(idx, grid):
    """Multiplier of the operator on each stored mode of ``grid``.

    Mode ``xi`` carries ``psi(-xi)``.  On the unmatched Nyquist frequency of an
    axis only the real part of that axis' term is kept; it is the average over
    ``+-xi``, which keeps the multiplier Hermitian and the semigroup exact.
    """
    if idx.dim != grid.dim:
        raise ValidationError(f"index dimension {idx.dim} != grid dimension {grid.dim}")
    total = np.zeros(grid.shape, dtype=complex)
    xi = grid.axis_freqs
    nyq = grid.points // 2
    for axis, (a, d) in enumerate(zip(idx.alpha, idx.delta)):
        term = -np.abs(xi) ** a * np.exp(1j * d * (np.pi / 2) * np.sign(xi))
        term[nyq] = term[nyq].real
        shape = [1] * grid.dim
        shape[axis] = grid.points
        total = total + term.reshape(shape)
    return total


def semigroup_apply(idx, grid, coeffs, dt):
    """Multiply every mode by ``exp(dt psi)``; leading batch axes are allowed."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-grid.dim :] != grid.shape:
        raise ValidationError(f"coefficients shape {coeffs.shape} does not end with {grid.shape}")
    return coeffs * np.exp(dt * grid_symbol(idx, grid))
