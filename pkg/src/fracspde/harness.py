"""Desk-scale probes of the small-noise behaviour.

* `hoelder_norm`: discrete space-time Hoelder norm on the probe window.
* `controlled_convergence_test`: moments of ``u^{eps,v} - Z^v`` against eps.
* `increment_regularity_test`: scale stability of increment moments.
* `estimate_tail`: ``-eps log P(sup |u| >= a)`` against the exact rate.

The probe window ``K`` is the central half of the torus in every axis.
Tail events look at the saved snapshot times only, which under-approximates
the continuous-time supremum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .ratefn import point_rate
from .skeleton import solve_skeleton
from .solver import simulate_path

__all__ = [
    "HoelderParams",
    "window_slices",
    "hoelder_norm",
    "ConvergenceResult",
    "controlled_convergence_test",
    "RegularityResult",
    "increment_regularity_test",
    "TailRow",
    "TailResult",
    "estimate_tail",
    "tail_plot_svg",
]


@dataclass(frozen=True)
class HoelderParams:
    """Hoelder exponents ``(beta1, beta2)`` in time and space.

    Admissible when ``0 < beta1 < alpha0 (1 - eta) / 2`` and
    ``0 < beta2 < 1 - eta``.  ``eta = 1`` leaves no room for positive
    exponents; ``eta = 0`` stands for a finite spectral measure.
    """

    beta1: float
    beta2: float
    eta: float
    alpha0: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"eta must lie in [0, 1], got {self.eta}")
        if self.eta >= 1.0:
            raise ValidationError("eta = 1 admits no positive Hoelder exponents")
        top1 = self.alpha0 * (1.0 - self.eta) / 2.0
        if not 0.0 < self.beta1 < top1:
            raise ValidationError(f"beta1 must lie in (0, {top1}), got {self.beta1}")
        if not 0.0 < self.beta2 < 1.0 - self.eta:
            raise ValidationError(f"beta2 must lie in (0, {1.0 - self.eta}), got {self.beta2}")

    @classmethod
    def for_config(cls, cfg, beta1, beta2, eta=None):
        return cls(beta1, beta2, cfg.eta if eta is None else eta, cfg.idx.alpha0)


def window_slices(grid):
    """Index slices of the central half ``[-L/2, L/2)`` in each axis."""
    q = grid.points // 4
    return (slice(q, grid.points - q),) * grid.dim


def _betas(params):
    if isinstance(params, HoelderParams):
        return params.beta1, params.beta2
    b1, b2 = params
    return float(b1), float(b2)


def hoelder_norm(values, cfg, params, window="central", times=None, max_pairs=10**6, seed=0):
    """``sup |f| + sup |f(t,x) - f(s,y)| / (|t - s|^beta1 + |x - y|^beta2)``.

    Parameters
    ----------
    values : ndarray, shape ``(n_times, *grid)``
        Snapshots, by default at ``cfg.save_steps``.
    cfg : SimConfig
    params : HoelderParams or (beta1, beta2)
    window : {"central", "full"}
    times : ndarray, optional
        Snapshot times if they differ from the saved steps.
    max_pairs : int
        Above this many point pairs a fixed-seed random subsample of pairs is
        used instead of all of them.
    """
    b1, b2 = _betas(params)
    grid = cfg.grid
    values = np.asarray(values, dtype=float)
    if times is None:
        times = np.asarray(cfg.save_steps, dtype=float) * cfg.dt
    times = np.asarray(times, dtype=float)
    if values.shape != (times.size,) + grid.shape:
        raise ValidationError(f"values must have shape {(times.size,) + grid.shape}")
    sl = window_slices(grid) if window == "central" else (slice(None),) * grid.dim
    coords = grid.coords[sl].reshape(-1, grid.dim)
    f = values[(slice(None),) + sl].reshape(times.size, -1)
    tt = np.repeat(times, coords.shape[0])
    xx = np.tile(coords, (times.size, 1))
    ff = f.reshape(-1)
    sup = float(np.max(np.abs(ff)))
    n = ff.size
    total = n * (n - 1) // 2
    best = 0.0
    if total <= max_pairs:
        for i in range(n - 1):
            j = slice(i + 1, n)
            den = np.abs(tt[j] - tt[i]) ** b1 + np.linalg.norm(xx[j] - xx[i], axis=1) ** b2
            best = max(best, float(np.max(np.abs(ff[j] - ff[i]) / den)))
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n, size=max_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
        den = np.abs(tt[j] - tt[i]) ** b1 + np.linalg.norm(xx[j] - xx[i], axis=1) ** b2
        best = float(np.max(np.abs(ff[j] - ff[i]) / den))
    return sup + best


# ---------------------------------------------------------------------------
# controlled convergence


@dataclass
class ConvergenceResult:
    eps: np.ndarray
    moments: np.ndarray      # mean over probe points of E|gap|^q
    sup_moments: np.ndarray  # max over probe points
    stderr: np.ndarray
    slope: float
    q: float


def _probe_points(cfg, n_space=4):
    grid = cfg.grid
    sl = window_slices(grid)
    width = sl[0].stop - sl[0].start
    picks = sl[0].start + (np.arange(n_space) * width) // n_space
    return picks


def controlled_convergence_test(v, cfg, eps_list, q=2, n_replicas=500, first_stream=0,
                                n_space=4, batch=250):
    """Moments of ``u^{eps,v} - Z^v`` at probe points and their log-log slope.

    Every eps reuses the same replica streams, so the comparison across eps
    is not blurred by independent sampling noise.  Probe points are all
    saved times after 0 and ``n_space`` equally spaced window points per axis.

    Returns
    -------
    ConvergenceResult
        ``slope`` is the least-squares slope of ``log moments`` against
        ``log eps``.
    """
    eps_list = np.asarray(eps_list, dtype=float)
    if eps_list.size < 4 or np.any(eps_list <= 0):
        raise ValidationError("need at least 4 positive eps values")
    ratios = eps_list[1:] / eps_list[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValidationError("eps_list must be geometric")
    if q not in (2, 4):
        raise ValidationError("q must be 2 or 4")
    grid = cfg.grid
    picks = _probe_points(cfg, n_space)
    sel = np.ix_(*([picks] * grid.dim))
    z = solve_skeleton(v, cfg).values[1:]
    z = z[(slice(None),) + sel]
    means, sups, ses = [], [], []
    for eps in eps_list:
        run = cfg.with_(epsilon=float(eps))
        acc, acc2, done = None, None, 0
        while done < n_replicas:
            k = min(batch, n_replicas - done)
            tr = simulate_path(run, v, n_replicas=k, first_stream=first_stream + done)
            u = tr.values[:, 1:][(slice(None), slice(None)) + sel]
            m = np.abs(u - z) ** q
            acc = m.sum(axis=0) if acc is None else acc + m.sum(axis=0)
            pm = m.reshape(k, -1).mean(axis=1)
            acc2 = np.concatenate((acc2, pm)) if acc2 is not None else pm
            done += k
        per_point = acc / n_replicas
        means.append(float(per_point.mean()))
        sups.append(float(per_point.max()))
        ses.append(float(acc2.std(ddof=1) / np.sqrt(n_replicas)))
    means = np.asarray(means)
    if np.all(means > 0):
        slope = float(np.polyfit(np.log(eps_list), np.log(means), 1)[0])
    else:
        slope = float("nan")
    return ConvergenceResult(eps_list, means, np.asarray(sups), np.asarray(ses), slope, float(q))


# ---------------------------------------------------------------------------
# increment regularity


@dataclass
class RegularityResult:
    lags: np.ndarray            # lag multiples, coarse to fine
    time_ratios: np.ndarray     # max over probes of E|dt u|^q / |dt|^(q beta1)
    space_ratios: np.ndarray    # max over probes of E|dx u|^q / |dx|^(q beta2)
    ratio_ci: np.ndarray        # (scale, 2) normal CI of the max ratio (time & space combined)
    growth: float               # largest relative increase of the max ratio, coarse -> fine
    variation: float            # largest |relative change| of the max ratio between scales
    time_exponent: float        # fitted from E|dt u|^2 ~ lag^(2 H)
    space_exponent: float
    q: float

    @property
    def max_ratios(self):
        return np.maximum(self.time_ratios, self.space_ratios)


def increment_regularity_test(cfg, params, n_replicas=200, q=2, lags=(4, 2, 1),
                              first_stream=0, batch=250):
    """Increment moments normalized by the Hoelder gauge across dyadic scales.

    For each lag multiple ``l`` the probe pairs are
    ``(t, t + l dt)`` at fixed ``x`` and ``(x, x + l dx)`` at fixed ``t``, for
    all saved times in the second half of the horizon and all window points.
    The reported ratio of a scale is the largest empirical
    ``E|du|^q / (|dt|^beta1 + |dx|^beta2)^q`` over its pairs.

    ``cfg.save_every`` must be 1.
    """
    b1, b2 = _betas(params)
    if cfg.save_every != 1:
        raise ValidationError("increment_regularity_test needs save_every = 1")
    lags = tuple(int(v) for v in lags)
    if len(lags) < 3 or any(a <= b for a, b in zip(lags[:-1], lags[1:])):
        raise ValidationError("lags must be >= 3 strictly decreasing multiples")
    grid = cfg.grid
    sl = window_slices(grid)
    t0 = cfg.n_steps // 2
    tsum = [0.0] * len(lags)
    ssum = [0.0] * len(lags)
    t2 = [0.0] * len(lags)
    s2 = [0.0] * len(lags)
    done = 0
    while done < n_replicas:
        k = min(batch, n_replicas - done)
        u = simulate_path(cfg, n_replicas=k, first_stream=first_stream + done).values
        for i, lag in enumerate(lags):
            a = u[:, t0 : cfg.n_steps + 1 - lag][(slice(None), slice(None)) + sl]
            b = u[:, t0 + lag :][(slice(None), slice(None)) + sl]
            dtm = np.abs(b - a)
            shifted = np.roll(u[:, t0:], -lag, axis=2)[(slice(None), slice(None)) + sl]
            dsp = np.abs(shifted - u[:, t0:][(slice(None), slice(None)) + sl])
            tsum[i] = tsum[i] + (dtm**q).sum(axis=0)
            ssum[i] = ssum[i] + (dsp**q).sum(axis=0)
            t2[i] = t2[i] + (dtm ** (2 * q)).sum(axis=0)
            s2[i] = s2[i] + (dsp ** (2 * q)).sum(axis=0)
        done += k
    tr, sr, ci, tvar, svar = [], [], [], [], []
    for i, lag in enumerate(lags):
        gt = (lag * cfg.dt) ** (q * b1)
        gs = (lag * grid.dx) ** (q * b2)
        mt = tsum[i] / n_replicas
        ms = ssum[i] / n_replicas
        vt = np.maximum(t2[i] / n_replicas - mt**2, 0.0)
        vs = np.maximum(s2[i] / n_replicas - ms**2, 0.0)
        jt, js = np.unravel_index(np.argmax(mt), mt.shape), np.unravel_index(np.argmax(ms), ms.shape)
        rt, rs = mt[jt] / gt, ms[js] / gs
        tr.append(rt)
        sr.append(rs)
        se = np.sqrt(vt[jt] / n_replicas) / gt if rt >= rs else np.sqrt(vs[js] / n_replicas) / gs
        top = max(rt, rs)
        ci.append((top - 1.96 * se, top + 1.96 * se))
        tvar.append(float(mt.mean()))
        svar.append(float(ms.mean()))
    tr, sr = np.asarray(tr), np.asarray(sr)
    top = np.maximum(tr, sr)
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = float(np.max(top[1:] / top[:-1] - 1.0))
        variation = float(np.max(np.abs(top[1:] / top[:-1] - 1.0)))
    lag_arr = np.asarray(lags, dtype=float)
    with np.errstate(divide="ignore"):
        te = float(np.polyfit(np.log(lag_arr * cfg.dt), np.log(tvar), 1)[0] / q) if min(tvar) > 0 else float("nan")
        xe = float(np.polyfit(np.log(lag_arr * grid.dx), np.log(svar), 1)[0] / q) if min(svar) > 0 else float("nan")
    if not np.all(np.isfinite(top)) or top.max() == 0.0:
        growth, variation = 0.0, 0.0
    return RegularityResult(lag_arr, tr, sr, np.asarray(ci), growth, variation, te, xe, float(q))


# ---------------------------------------------------------------------------
# tail estimates


@dataclass
class TailRow:
    eps: float
    p_hat: float
    rate_hat: float        # -eps log p_hat
    ci: tuple              # CI of rate_hat
    hits: int
    stderr: float
    verdict: str           # "ok" or "insufficient samples"


@dataclass
class TailResult:
    threshold: float
    oracle: float
    rows: list = field(default_factory=list)
    importance: bool = True

    def smallest_feasible(self, min_hits=100):
        ok = [r for r in self.rows if r.verdict == "ok" and r.hits >= min_hits]
        return min(ok, key=lambda r: r.eps) if ok else None


def _event(values, grid, a):
    """Per-path indicator of ``sup |u| >= a`` over saved times and the window."""
    sl = window_slices(grid)
    win = values[(slice(None), slice(None)) + sl]
    return np.max(np.abs(win).reshape(win.shape[0], -1), axis=1) >= a


class _WeightHook:
    """Accumulates ``log dP/dQ`` of replicas run with the controlled equation.

    Running the controlled equation with control ``h`` on white fields ``z``
    is the same as running the free equation on ``z + theta`` with
    ``theta_n = r_n sqrt(dt / (eps N^d))`` (``r`` the physical control).  Hence
    ``log w = -sum theta . z - |theta|^2 / 2`` with ``|theta|^2 / 2 = cost(h) / eps``.
    The pairing ``theta . z`` is read off the noise coefficients
    ``c = fft(z) sqrt(N^d dt weight)``; modes of zero weight carry no control.
    """

    def __init__(self, cfg, h, count):
        grid = cfg.grid
        w = cfg.weights
        live = w > 0
        theta_hat = grid.to_coeffs(grid.to_values(h.h_coeffs)) * np.sqrt(cfg.dt / (cfg.epsilon * grid.size))
        scale = np.zeros(grid.shape)
        scale[live] = grid.size / np.sqrt(grid.size * cfg.dt * w[live])
        self.kernel = np.conj(theta_hat) * scale
        self.log_w = np.full(count, -h.norm_sq / (2.0 * cfg.epsilon))
        self.axes = tuple(range(1, grid.dim + 1))

    def __call__(self, step, coeffs):
        self.log_w -= np.sum(self.kernel[step] * coeffs, axis=self.axes).real


def estimate_tail(cfg, threshold, eps_list, n_replicas=1000, importance=True, first_stream=0,
                  batch=500):
    """Estimate ``P(sup_{saved t, x in K} |u^eps| >= a)`` for each eps.

    The reference rate is ``inf { I(f) : sup |f| >= a }``, which in the linear
    family is attained by reaching ``a`` at a single point of the last saved
    time (`fracspde.ratefn.point_rate`).  With ``importance=True`` replicas
    are drawn from the controlled equation steered by the minimizing control
    and reweighted by the exact likelihood ratio.

    Deterministic cases (``sigma = 0`` or ``eps = 0``) are decided from the
    single deterministic path and give ``P`` exactly 0 or 1.

    Returns
    -------
    TailResult
    """
    a = float(threshold)
    grid = cfg.grid
    deterministic = cfg.sigma.is_constant and cfg.sigma.at_zero() == 0.0
    if deterministic:
        oracle = 0.0 if a <= 0 else np.inf
        h_star = None
    else:
        oracle, _, h_star = point_rate(cfg, a, steps=[s for s in cfg.save_steps if s > 0])
    result = TailResult(a, float(oracle), [], importance)
    for eps in eps_list:
        eps = float(eps)
        run = cfg.with_(epsilon=eps)
        if deterministic or eps == 0.0:
            path = simulate_path(run, check=False).values[None]
            p = float(_event(path, grid, a)[0]) if a > 0 else 1.0
            rate = 0.0 if p == 1.0 else np.inf
            result.rows.append(TailRow(eps, p, rate, (rate, rate), int(p), 0.0, "ok"))
            continue
        use_is = importance and a > 0
        ctrl = h_star if use_is else None
        ind, lw = [], []
        done = 0
        while done < n_replicas:
            k = min(batch, n_replicas - done)
            streams = tuple(range(first_stream + done, first_stream + done + k))
            hook = _WeightHook(run, ctrl, k) if use_is else None
            vals = simulate_path(run, ctrl, n_replicas=k, first_stream=streams[0],
                                 noise_hook=hook).values
            ind.append(_event(vals, grid, a) if a > 0 else np.ones(k, bool))
            lw.append(hook.log_w if use_is else np.zeros(k))
            done += k
        ind = np.concatenate(ind)
        w = np.exp(np.concatenate(lw)) * ind
        hits = int(ind.sum())
        if hits == 0:
            result.rows.append(TailRow(eps, 0.0, np.inf, (np.inf, np.inf), 0, 0.0,
                                       "insufficient samples"))
            continue
        p = float(w.mean())
        se = float(w.std(ddof=1) / np.sqrt(w.size)) if w.size > 1 else 0.0
        rate = -eps * np.log(p)
        lo_p, hi_p = p + 1.96 * se, max(p - 1.96 * se, 0.0)
        ci = (-eps * np.log(lo_p), -eps * np.log(hi_p) if hi_p > 0 else np.inf)
        result.rows.append(TailRow(eps, p, float(rate), ci, hits, se, "ok"))
    return result


def tail_plot_svg(result, path):
    """Write ``-eps log P`` against eps with the oracle rate as a reference line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "fracspde"
    rows = [r for r in result.rows if np.isfinite(r.rate_hat)]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if rows:
        e = np.array([r.eps for r in rows])
        y = np.array([r.rate_hat for r in rows])
        lo = np.array([r.ci[0] for r in rows])
        hi = np.array([min(r.ci[1], 1e300) for r in rows])
        ax.errorbar(e, y, yerr=[y - lo, np.clip(hi - y, 0, None)], marker="o", ls="-", capsize=3,
                    label=r"$-\varepsilon\log\hat P$")
    if np.isfinite(result.oracle):
        ax.axhline(result.oracle, color="k", ls="--", lw=1, label="rate oracle")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$-\varepsilon\log P$")
    ax.set_title(f"threshold a = {result.threshold:g}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
