"""Potential profiles V(x) and monotone effective trajectory potentials.

All energies are in hartree, lengths in bohr. Every model is immutable and
evaluates vectorised over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidModelError, TurningPointError
from .spline import NaturalSpline
from .units import HBAR

_SECH_CLAMP = 350.0


def sech2(u):
    """sech(u)**2 without overflow; exactly 0 beyond |u| = 350."""
    u = np.asarray(u, dtype=float)
    uc = np.clip(u, -_SECH_CLAMP, _SECH_CLAMP)
    out = (2.0 / (np.exp(uc) + np.exp(-uc))) ** 2
    return np.where(np.abs(u) > _SECH_CLAMP, 0.0, out)


def _finite(**params):
    for name, value in params.items():
        if not math.isfinite(value):
            raise InvalidModelError(f"parameter {name} must be finite, got {value!r}")


class PotentialModel:
    """Base class: subclasses implement ``__call__``, ``asymptotes`` and ``scale``."""

    kind = "abstract"

    def __call__(self, x):
        raise NotImplementedError

    def asymptotes(self) -> tuple[float, float]:
        raise NotImplementedError

    def scale(self) -> float:
        """Shortest length over which the profile changes appreciably."""
        raise NotImplementedError

    def center(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Eckart(PotentialModel):
    """Symmetric Eckart barrier ``V0 sech^2(alpha (x - center))``."""

    v0: float
    alpha: float
    center_x: float = 0.0
    kind = "eckart"

    def __post_init__(self):
        _finite(v0=self.v0, alpha=self.alpha, center=self.center_x)
        if self.v0 <= 0.0 or self.alpha <= 0.0:
            raise InvalidModelError("eckart barrier needs V0 > 0 and alpha > 0")

    def __call__(self, x):
        return self.v0 * sech2(self.alpha * (np.asarray(x, dtype=float) - self.center_x))

    def asymptotes(self):
        return 0.0, 0.0

    def scale(self):
        return 1.0 / self.alpha

    def center(self):
        return self.center_x

    def to_dict(self):
        return {"type": "eckart", "v0": self.v0, "alpha": self.alpha, "center": self.center_x}


@dataclass(frozen=True)
class TanhRamp(PotentialModel):
    """Smooth step ``((VR - VL)/2) [tanh(beta (x - x0)) + 1] + VL``."""

    v_left: float
    v_right: float
    x0: float = 0.0
    beta: float = 1.0
    kind = "tanh_ramp"

    def __post_init__(self):
        _finite(v_left=self.v_left, v_right=self.v_right, x0=self.x0, beta=self.beta)
        if self.beta <= 0.0:
            raise InvalidModelError("tanh ramp needs beta > 0")

    def __call__(self, x):
        u = self.beta * (np.asarray(x, dtype=float) - self.x0)
        return 0.5 * (self.v_right - self.v_left) * (np.tanh(u) + 1.0) + self.v_left

    def asymptotes(self):
        return float(self.v_left), float(self.v_right)

    def scale(self):
        return 1.0 / self.beta

    def center(self):
        return self.x0

    def to_dict(self):
        return {"type": "tanh_ramp", "v_left": self.v_left, "v_right": self.v_right,
                "x0": self.x0, "beta": self.beta}


@dataclass(frozen=True)
class SumPotential(PotentialModel):
    terms: tuple = ()
    kind = "sum"

    def __post_init__(self):
        if not self.terms:
            raise InvalidModelError("sum potential needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for term in self.terms:
            total = total + term(x)
        return total

    def asymptotes(self):
        left = sum(t.asymptotes()[0] for t in self.terms)
        right = sum(t.asymptotes()[1] for t in self.terms)
        return float(left), float(right)

    def scale(self):
        return min(t.scale() for t in self.terms)

    def center(self):
        return float(np.mean([t.center() for t in self.terms]))

    def to_dict(self):
        return {"type": "sum", "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class TabulatedPotential(PotentialModel):
    """Natural-spline interpolant of sampled ``(x, V)``; flat beyond the table."""

    x: np.ndarray
    v: np.ndarray
    source: str | None = None
    _spline: NaturalSpline = field(init=False, repr=False)
    kind = "tabulated"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.shape[0] < 4:
            raise InvalidModelError("tabulated potential needs >= 4 matching (x, V) samples")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise InvalidModelError("tabulated potential samples must be finite")
        if not np.all(np.diff(x) > 0):
            raise InvalidModelError("tabulated x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "_spline", NaturalSpline(x, v))

    @classmethod
    def from_file(cls, path) -> "TabulatedPotential":
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] < 2:
            raise InvalidModelError(f"{path}: expected two whitespace-delimited columns")
        return cls(data[:, 0], data[:, 1], source=str(Path(path)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = self._spline(np.clip(x, self.x[0], self.x[-1]))
        return np.where(x < self.x[0], self.v[0], np.where(x > self.x[-1], self.v[-1], inside))

    def asymptotes(self):
        return float(self.v[0]), float(self.v[-1])

    def scale(self):
        return float(np.min(np.diff(self.x)))

    def center(self):
        return 0.5 * float(self.x[0] + self.x[-1])

    def to_dict(self):
        if self.source is not None:
            return {"type": "tabulated", "file": self.source}
        return {"type": "tabulated", "x": self.x.tolist(), "v": self.v.tolist()}


@dataclass(frozen=True)
class Zero(PotentialModel):
    kind = "zero"

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def asymptotes(self):
        return 0.0, 0.0

    def scale(self):
        return 1.0

    def to_dict(self):
        return {"type": "zero"}


def double_barrier(v0, x0, alpha, beta, v_delta) -> SumPotential:
    """Two Eckart barriers at +-x0 joined by a raised plateau of height v_delta."""
    return SumPotential((
        Eckart(v0, alpha, -x0),
        Eckart(v0, alpha, x0),
        TanhRamp(0.0, v_delta, -x0, beta),
        TanhRamp(0.0, -v_delta, x0, beta),
    ))


def evaluate(model: PotentialModel, x):
    return model(x)


def asymptotes(model: PotentialModel) -> tuple[float, float]:
    return model.asymptotes()


@dataclass(frozen=True)
class EffectivePotential:
    """Monotone tanh ramp guiding the trajectories, or identically zero.

    ``beta = 0`` is never valid; the zero variant is built with :meth:`zero`.
    """

    v_left: float = 0.0
    v_right: float = 0.0
    x0: float = 0.0
    beta: float = 1.0
    is_zero: bool = False

    def __post_init__(self):
        _finite(v_left=self.v_left, v_right=self.v_right, x0=self.x0, beta=self.beta)
        if not self.is_zero and self.beta <= 0.0:
            raise InvalidModelError("effective ramp needs beta > 0")

    @classmethod
    def zero(cls) -> "EffectivePotential":
        return cls(is_zero=True)

    @classmethod
    def ramp(cls, v_left, v_right, x0=0.0, beta=1.0) -> "EffectivePotential":
        return cls(v_left, v_right, x0, beta)

    def __call__(self, x):
        return evaluate_veff(self, x)[0]

    def asymptotes(self):
        return (0.0, 0.0) if self.is_zero else (self.v_left, self.v_right)

    def to_dict(self):
        if self.is_zero:
            return {"type": "zero"}
        return {"type": "tanh_ramp", "v_left": self.v_left, "v_right": self.v_right,
                "x0": self.x0, "beta": self.beta}


def evaluate_veff(veff: EffectivePotential, x):
    """Return ``(V_eff, V_eff', V_eff'')`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if veff.is_zero:
        z = np.zeros_like(x)
        return z, z.copy(), z.copy()
    u = veff.beta * (x - veff.x0)
    th = np.tanh(u)
    s2 = sech2(u)
    dv = veff.v_right - veff.v_left
    value = 0.5 * dv * (th + 1.0) + veff.v_left
    first = 0.5 * dv * veff.beta * s2
    second = -dv * veff.beta**2 * th * s2
    return value, first, second


def coupling_correction(energy, veff, dveff, d2veff, mass, hbar=HBAR):
    """hbar^2/(2m) [ (5/16) (V'/(E-V))^2 + (1/4) V''/(E-V) ] for the effective potential."""
    gap = energy - np.asarray(veff, dtype=float)
    if np.any(gap <= 0.0):
        raise TurningPointError("energy must exceed the effective potential everywhere")
    g1 = dveff / gap
    g2 = d2veff / gap
    return hbar**2 / (2.0 * mass) * (5.0 / 16.0 * g1 * g1 + 0.25 * g2)
