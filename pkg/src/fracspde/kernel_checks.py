"""Checkable predicates for the Green-function properties.

Each function returns the measured residual or profile; the thresholds live
with the callers (tests, acceptance suite, CLI selftest).
"""

from __future__ import annotations

import numpy as np

from .kernel import Quadrature, check_pair, green_1d

_FINE = Quadrature(tol=1e-13)


def total_mass(alpha, delta, t=1.0, tol=1e-9, max_levels=8, quadrature=_FINE):
    """Integral of ``G(t, .)`` over the real line.

    The line is mapped onto ``(-1, 1)`` by ``x = s (u / (1 - u))^p`` with an
    integer ``p >= 2/alpha``, which turns the ``|x|^(-1-alpha)`` tails into an
    integrand that vanishes at ``u = 1``; composite Gauss-Legendre panels are
    doubled until two levels agree within ``tol``.

    Returns
    -------
    mass : float
    levels : list of (panels, value)
    """
    check_pair(alpha, delta)
    p = max(1, int(np.ceil(2.0 / alpha)))
    s = t ** (1.0 / alpha)
    gx, gw = np.polynomial.legendre.leggauss(16)
    history = []
    panels = 8
    prev = None
    for _ in range(max_levels):
        edges = np.linspace(0.0, 1.0, panels + 1)
        a, b = edges[:-1, None], edges[1:, None]
        u = (0.5 * (b - a) * gx + 0.5 * (b + a)).ravel()
        w = (0.5 * (b - a) * gw).ravel()
        x = s * (u / (1.0 - u)) ** p
        jac = s * p * u ** (p - 1) / (1.0 - u) ** (p + 1)
        g = green_1d(alpha, delta, t, np.concatenate((x, -x)), quadrature)
        g = g[: x.size] + g[x.size :]
        value = float(np.sum(g * jac * w))
        history.append((panels, value))
        if prev is not None and abs(value - prev) < tol:
            return value, history
        prev = value
        panels *= 2
    return value, history


def normalization_error(alpha, delta, t=1.0):
    mass, _ = total_mass(alpha, delta, t)
    return abs(mass - 1.0)


def _legs(peaks, scale, n_leg, reach):
    """Nodes/weights on the line, graded geometrically away from each peak.

    Every peak emits a left and a right leg ``y = p +- scale (e^v - 1)``;
    legs that face another peak stop at the midpoint, outer legs run to
    ``scale * e^reach``.  Gauss-Legendre in ``v`` handles both the narrow
    peak and the algebraic tail.
    """
    peaks = sorted(set(float(p) for p in peaks))
    gx, gw = np.polynomial.legendre.leggauss(n_leg)
    nodes, weights = [], []
    for i, p in enumerate(peaks):
        for side in (-1.0, 1.0):
            j = i + int(side)
            if 0 <= j < len(peaks):
                dist = 0.5 * abs(peaks[j] - p)
                v_max = np.log1p(dist / scale)
            else:
                v_max = reach
            v = 0.5 * v_max * (gx + 1.0)
            w = 0.5 * v_max * gw
            nodes.append(p + side * scale * np.expm1(v))
            weights.append(w * scale * np.exp(v))
    return np.concatenate(nodes), np.concatenate(weights)


def chapman_kolmogorov_residual(alpha, delta, t, s, n=4096, probes=None, reach=None,
                                quadrature=_FINE):
    """Sup over probe points of ``|G(t+s, x) - int G(t, y) G(s, x - y) dy|``.

    The convolution integral uses ``n`` Gauss-Legendre nodes in total, split
    over exponentially graded legs leaving the two peaks ``y = 0`` and
    ``y = x`` (see `_legs`).  Probes default to 9 points across the bulk of
    ``G(t+s, .)``.
    """
    check_pair(alpha, delta)
    scale = 0.05 * min(t, s) ** (1.0 / alpha)
    if reach is None:
        # integrand decays like |y|^(-2-2 alpha); go far enough for 1e-13
        reach = np.log(1e13 ** (1.0 / (1.0 + 2.0 * alpha)) / scale)
    if probes is None:
        probes = (t + s) ** (1.0 / alpha) * np.linspace(-4.0, 4.0, 9)
    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    conv = np.empty(probes.size)
    for i, x in enumerate(probes):
        n_legs = 2 if x == 0.0 else 4
        y, w = _legs((0.0, x), scale, n // n_legs, reach)
        conv[i] = np.dot(w, green_1d(alpha, delta, t, y, quadrature)
                         * green_1d(alpha, delta, s, x - y, quadrature))
    direct = green_1d(alpha, delta, t + s, probes, quadrature)
    return float(np.max(np.abs(direct - conv)))


def scaling_residual(alpha, delta, t, x, quadrature=_FINE, floor=1e-3):
    """Max relative defect of ``G(t, x) = t^(-1/alpha) G(1, t^(-1/alpha) x)``.

    Points where the density is below ``floor`` times its largest probed
    value are skipped: there the absolute quadrature tolerance, not the
    identity, sets the relative error.
    """
    x = np.asarray(x, dtype=float)
    lhs = green_1d(alpha, delta, t, x, quadrature)
    c = t ** (-1.0 / alpha)
    rhs = c * green_1d(alpha, delta, 1.0, c * x, quadrature)
    keep = np.abs(rhs) >= floor * np.max(np.abs(rhs))
    return float(np.max(np.abs(lhs - rhs)[keep] / np.abs(rhs[keep])))


def tail_profile(alpha, delta, x_max_list, n=2001, quadrature=_FINE):
    """``sup_{|x| <= X} G(1, x) (1 + |x|^(1+alpha))`` for each ``X``.

    The sup over each window is taken on a grid that is uniform near the origin
    and geometric further out.
    """
    out = []
    for x_max in x_max_list:
        core = np.linspace(-min(x_max, 10.0), min(x_max, 10.0), n)
        if x_max > 10.0:
            far = np.geomspace(10.0, x_max, n // 2)
            pts = np.concatenate((core, far, -far))
        else:
            pts = core
        g = green_1d(alpha, delta, 1.0, pts, quadrature)
        out.append(float(np.max(g * (1.0 + np.abs(pts) ** (1.0 + alpha)))))
    return np.asarray(out)


def asymmetry(alpha, delta, x, quadrature=_FINE):
    """``max |G(1, x) - G(1, -x)|`` over the given points."""
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(green_1d(alpha, delta, 1.0, x, quadrature)
                               - green_1d(alpha, delta, 1.0, -x, quadrature))))


def minimum_value(alpha, delta, x, quadrature=_FINE):
    """Smallest computed value; negative entries are quadrature ripple."""
    return float(np.min(green_1d(alpha, delta, 1.0, x, quadrature)))


def mass_outside(idx, t, half_length, quadrature=None):
    """Mass of the product Green function outside ``[-L, L]^d``.

    Each axis tail is integrated directly through ``x = L u^(-p)``, which
    maps the algebraic tail onto a smooth integrand on ``(0, 1]``.
    """
    gx, gw = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(0.0, 1.0, 65)
    a, b = edges[:-1, None], edges[1:, None]
    u = (0.5 * (b - a) * gx + 0.5 * (b + a)).ravel()
    w = (0.5 * (b - a) * gw).ravel()
    inside = 1.0
    for alpha, delta in zip(idx.alpha, idx.delta):
        p = max(1, int(np.ceil(2.0 / alpha)))
        x = half_length * u ** (-p)
        jac = half_length * p * u ** (-p - 1)
        g = green_1d(alpha, delta, t, np.concatenate((x, -x)), quadrature)
        tail = float(np.sum((g[: x.size] + g[x.size :]) * jac * w))
        inside *= 1.0 - min(max(tail, 0.0), 1.0)
    return 1.0 - inside
