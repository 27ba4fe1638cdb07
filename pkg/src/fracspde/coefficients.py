"""Registered drift/diffusion families with known Lipschitz constants.

Only these families are accepted so that the Lipschitz condition on ``b`` and
``sigma`` can be checked from the parameters alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["Coefficient", "linear", "tanh", "constant", "from_spec", "FAMILIES"]


@dataclass(frozen=True)
class Coefficient:
    """Pointwise map ``u -> f(u)`` from a registered family.

    Parameters are kept as plain floats so the family description round-trips through JSON.
    """

    family: str
    a: float = 0.0
    c: float = 0.0
    k: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown coefficient family {self.family!r}; known: {sorted(FAMILIES)}")
        for name in ("a", "c", "k"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise ValidationError(f"coefficient parameter {name}={val} is not finite")
            object.__setattr__(self, name, val)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "linear":
            return self.a * u + self.c
        if self.family == "tanh":
            return self.c + self.a * np.tanh(self.k * u)
        return np.full(u.shape, self.c)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "linear":
            return np.full(u.shape, self.a)
        if self.family == "tanh":
            return self.a * self.k / np.cosh(self.k * u) ** 2
        return np.zeros(u.shape)

    @property
    def lipschitz(self):
        if self.family == "linear":
            return abs(self.a)
        if self.family == "tanh":
            return abs(self.a * self.k)
        return 0.0

    @property
    def is_constant(self):
        return self.family == "constant" or self.a == 0.0

    def at_zero(self):
        return float(self(0.0))

    def to_spec(self):
        if self.family == "linear":
            return {"family": "linear", "a": self.a, "c": self.c}
        if self.family == "tanh":
            return {"family": "tanh", "a": self.a, "c": self.c, "k": self.k}
        return {"family": "constant", "c": self.c}


FAMILIES = {
    "linear": ("a", "c"),
    "tanh": ("a", "c", "k"),
    "constant": ("c",),
}


def linear(a, c=0.0):
    return Coefficient("linear", a=a, c=c)


def tanh(a, k=1.0, c=0.0):
    return Coefficient("tanh", a=a, c=c, k=k)


def constant(c):
    return Coefficient("constant", c=c)


def from_spec(spec, where="coefficient"):
    """Build a `Coefficient` from ``{"family": ..., <params>}``.

    Arbitrary callables are refused; unknown or missing keys are reported.
    """
    if isinstance(spec, Coefficient):
        return spec
    if callable(spec):
        raise ValidationError(f"{where}: arbitrary callables are not accepted; use a registered family")
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValidationError(f"{where}: expected an object with a 'family' key")
    family = spec["family"]
    if family not in FAMILIES:
        raise ValidationError(f"{where}: unknown family {family!r}; known: {sorted(FAMILIES)}")
    allowed = set(FAMILIES[family])
    extra = sorted(set(spec) - allowed - {"family"})
    if extra:
        raise ValidationError(f"{where}: unknown key(s) {extra} for family {family!r}")
    missing = sorted(allowed - set(spec) - ({"k"} if family == "tanh" else set()))
    if missing:
        raise ValidationError(f"{where}: missing field(s) {missing} for family {family!r}")
    return Coefficient(family, **{key: spec[key] for key in allowed if key in spec})
