"""Simulation configuration, its JSON form and its validation.

A config file is one JSON object with the sections

    index         {"alpha": [...], "delta": [...]}
    grid          {"half_length": L, "points": N, "allow_wrap": false}
    measure       {"kind": ..., "amplitude": 1, "riesz_exponent": ..., "cutoff": ...,
                   "eta": 1, "override": false}
    coefficients  {"b": {"family": ...}, "sigma": {"family": ...}}
    time          {"T": ..., "n_steps": ..., "epsilon": 1, "seed": 0,
                   "save_every": n_steps, "initial": 0}
    ldp, rate     free-form parameter blocks read by the matching subcommands

Unknown keys anywhere are an error, so a config either means exactly what it
says or is rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import lru_cache

from . import coefficients
from .errors import ValidationError
from .kernel import FrequencyGrid, StableIndex
from .noise import SpectralMeasure, check_integrability, mode_weights

__all__ = [
    "SimConfig",
    "config_from_dict",
    "config_to_dict",
    "ensure_runnable",
    "config_hash",
    "WRAP_TOLERANCE",
]

WRAP_TOLERANCE = 1e-8


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one run.

    ``save_every`` selects the stored steps ``0, save_every, 2 save_every, ...``
    and always the last one.  ``allow_wrap`` disables the torus tail check;
    ``measure_override`` lets a measure that fails the integrability check
    through (white noise with small alpha, typically).
    """

    idx: StableIndex
    grid: FrequencyGrid
    mu: SpectralMeasure
    T: float
    n_steps: int
    b: coefficients.Coefficient = field(default_factory=lambda: coefficients.constant(0.0))
    sigma: coefficients.Coefficient = field(default_factory=lambda: coefficients.constant(1.0))
    epsilon: float = 1.0
    eta: float = 1.0
    seed: int = 0
    save_every: int | None = None
    allow_wrap: bool = False
    measure_override: bool = False

    def __post_init__(self):
        if self.idx.dim != self.grid.dim:
            raise ValidationError(f"index dimension {self.idx.dim} != grid dimension {self.grid.dim}")
        self.mu.validate_dim(self.grid.dim)
        if not float(self.T) > 0:
            raise ValidationError(f"T must be positive, got {self.T}")
        if int(self.n_steps) < 1:
            raise ValidationError(f"n_steps must be >= 1, got {self.n_steps}")
        eps = float(self.epsilon)
        if not 0.0 <= eps <= 1.0:
            raise ValidationError(f"epsilon must lie in [0, 1], got {eps}")
        if not 0.0 < float(self.eta) <= 1.0:
            raise ValidationError(f"eta must lie in (0, 1], got {self.eta}")
        if int(self.seed) < 0:
            raise ValidationError("seed must be nonnegative")
        object.__setattr__(self, "b", coefficients.from_spec(self.b, "b"))
        object.__setattr__(self, "sigma", coefficients.from_spec(self.sigma, "sigma"))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "seed", int(self.seed))
        every = self.n_steps if self.save_every is None else int(self.save_every)
        if not 1 <= every <= self.n_steps:
            raise ValidationError(f"save_every must lie in [1, n_steps], got {self.save_every}")
        object.__setattr__(self, "save_every", every)

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def save_steps(self):
        steps = list(range(0, self.n_steps + 1, self.save_every))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return tuple(steps)

    @property
    def weights(self):
        return _weights(self.mu, self.grid)

    def with_(self, **changes):
        return replace(self, **changes)


@lru_cache(maxsize=64)
def _weights(mu, grid):
    w = mode_weights(mu, grid)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def _verdict(mu, idx, eta):
    return check_integrability(mu, idx, eta).verdict


@lru_cache(maxsize=64)
def _wrap_mass(idx, T, half_length):
    from .kernel_checks import mass_outside

    return mass_outside(idx, T, half_length)


def ensure_runnable(cfg):
    """Checks that are too costly for construction; raise `ValidationError`.

    * the measure must satisfy the integrability condition unless overridden;
    * the Green function mass that leaves ``[-L, L]^d`` by time ``T`` must be
      below `WRAP_TOLERANCE` unless wrap-around is explicitly allowed.
    """
    verdict = _verdict(cfg.mu, cfg.idx, cfg.eta)
    if verdict != "satisfied" and not cfg.measure_override:
        raise ValidationError(
            f"spectral measure integrability check is {verdict!r} for eta={cfg.eta}; "
            "set measure.override to run anyway"
        )
    if not cfg.allow_wrap:
        mass = _wrap_mass(cfg.idx, cfg.T, cfg.grid.half_length)
        if mass >= WRAP_TOLERANCE:
            raise ValidationError(
                f"Green function mass {mass:.3e} leaves [-L, L]^d by time T; enlarge "
                "grid.half_length or set grid.allow_wrap"
            )
    return verdict


_SECTIONS = {
    "index": ({"alpha"}, {"delta"}),
    "grid": ({"half_length", "points"}, {"allow_wrap"}),
    "measure": ({"kind"}, {"amplitude", "riesz_exponent", "cutoff", "eta", "override"}),
    "coefficients": ({"b", "sigma"}, set()),
    "time": ({"T", "n_steps"}, {"epsilon", "seed", "save_every", "initial"}),
    "ldp": (set(), None),
    "rate": (set(), None),
}


def _check_keys(doc, where, required, optional):
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    if optional is not None:
        unknown = sorted(set(doc) - required - optional)
        if unknown:
            raise ValidationError(f"{where}: unknown key(s) {unknown}")
    missing = sorted(required - set(doc))
    if missing:
        raise ValidationError(f"{where}: missing required field(s) {missing}")


def config_from_dict(doc):
    """Parse a config document into ``(SimConfig, extras)``.

    ``extras`` holds the ``ldp`` and ``rate`` blocks (empty dicts if absent).
    """
    _check_keys(doc, "config", {"index", "grid", "measure", "coefficients", "time"}, set(_SECTIONS))
    for name, (req, opt) in _SECTIONS.items():
        if name in doc:
            _check_keys(doc[name], name, req, opt)
    ix, gr, me, co, tm = (doc[k] for k in ("index", "grid", "measure", "coefficients", "time"))
    alpha = ix["alpha"]
    alpha = list(alpha) if isinstance(alpha, (list, tuple)) else [alpha]
    delta = ix.get("delta", [0.0] * len(alpha))
    delta = list(delta) if isinstance(delta, (list, tuple)) else [delta]
    idx = StableIndex(tuple(alpha), tuple(delta))
    grid = FrequencyGrid(gr["half_length"], gr["points"], idx.dim)
    mu = SpectralMeasure(
        me["kind"],
        amplitude=me.get("amplitude", 1.0),
        riesz_exponent=me.get("riesz_exponent"),
        cutoff=me.get("cutoff"),
    )
    if float(tm.get("initial", 0.0)) != 0.0:
        raise ValidationError("time.initial: only zero initial data is supported")
    cfg = SimConfig(
        idx=idx,
        grid=grid,
        mu=mu,
        T=tm["T"],
        n_steps=tm["n_steps"],
        b=coefficients.from_spec(co["b"], "coefficients.b"),
        sigma=coefficients.from_spec(co["sigma"], "coefficients.sigma"),
        epsilon=tm.get("epsilon", 1.0),
        eta=me.get("eta", 1.0),
        seed=tm.get("seed", 0),
        save_every=tm.get("save_every"),
        allow_wrap=bool(gr.get("allow_wrap", False)),
        measure_override=bool(me.get("override", False)),
    )
    extras = {"ldp": dict(doc.get("ldp", {})), "rate": dict(doc.get("rate", {}))}
    return cfg, extras


def config_to_dict(cfg, extras=None):
    """Inverse of `config_from_dict`; the result is a valid config document."""
    measure = {"kind": cfg.mu.kind, "amplitude": cfg.mu.amplitude, "eta": cfg.eta,
               "override": cfg.measure_override}
    if cfg.mu.riesz_exponent is not None:
        measure["riesz_exponent"] = cfg.mu.riesz_exponent
    if cfg.mu.cutoff is not None:
        measure["cutoff"] = cfg.mu.cutoff
    doc = {
        "index": {"alpha": list(cfg.idx.alpha), "delta": list(cfg.idx.delta)},
        "grid": {"half_length": cfg.grid.half_length, "points": cfg.grid.points,
                 "allow_wrap": cfg.allow_wrap},
        "measure": measure,
        "coefficients": {"b": cfg.b.to_spec(), "sigma": cfg.sigma.to_spec()},
        "time": {"T": cfg.T, "n_steps": cfg.n_steps, "epsilon": cfg.epsilon, "seed": cfg.seed,
                 "save_every": cfg.save_every, "initial": 0.0},
    }
    for key, block in (extras or {}).items():
        if block:
            doc[key] = block
    return doc


def config_hash(doc):
    """SHA-256 of the canonical JSON form of a config document."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
