"""Small configs shared by the test modules."""

import numpy as np

from fracspde import coefficients as co
from fracspde.config import SimConfig
from fracspde.kernel import FrequencyGrid, StableIndex
from fracspde.noise import SpectralMeasure


def make_cfg(alpha=2.0, delta=0.0, points=16, T=0.25, n_steps=16, measure=None, **kw):
    kw.setdefault("allow_wrap", True)
    return SimConfig(
        idx=StableIndex((alpha,), (delta,)),
        grid=FrequencyGrid(np.pi, points),
        mu=measure or SpectralMeasure("white", 1.0),
        T=T,
        n_steps=n_steps,
        **kw,
    )


def linear_family(**kw):
    return make_cfg(sigma=co.constant(1.0), b=co.constant(0.0), **kw)


def smooth_control(cfg, scale=1.0):
    """Physical control sin(pi t) (cos x + 0.5 sin 2x) at step midpoints."""
    from fracspde.skeleton import ControlPath

    x = cfg.grid.axis_coords
    t = (np.arange(cfg.n_steps) + 0.5) * cfg.dt
    r = scale * np.sin(np.pi * t)[:, None] * (np.cos(x) + 0.5 * np.sin(2 * x))[None, :]
    return ControlPath.from_physical(r, cfg.grid, cfg.dt)


def random_control(cfg, rng, scale=1.0):
    from fracspde.skeleton import ControlPath

    r = scale * rng.standard_normal((cfg.n_steps,) + cfg.grid.shape)
    return ControlPath.from_physical(r, cfg.grid, cfg.dt)
