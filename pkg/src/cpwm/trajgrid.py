"""Counterpropagating moving grids, the shift cycle, and ramp trajectories.

Grid positions are a pure function of the shift-cycle phase ``j`` (the number
of steps since the last shift), so after ``n_sub`` steps the layout is restored
exactly and no neighbour search is ever needed.

Layouts at ``j = 0`` (``k = 0 .. N-1``):

* constant velocity: both grids at ``x_L + k dx``.
* ramp: ``x+_k(t) = X(t + k t_shift)`` and ``x-_k(t) = X(k t_shift - t)`` where
  ``X`` is the single tabulated trajectory leaving ``x_L`` at ``t = 0``.
* discontinuous: the + array is ``[L+ (N_L - 1 points, x_L .. x0 - dx_L), R+ (N_R
  points, x0 .. x_R)]`` and the - array is ``[L- (N_L points, x_L .. x0), R- (N_R - 1
  points, x0 + dx_R .. x_R)]``; both concatenations stay sorted in x.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .errors import (
    ClosedChannelError,
    InvalidInputError,
    SequencingError,
    TurningPointError,
)
from .potentials import EffectivePotential, PotentialModel, coupling_correction, evaluate_veff
from .units import HBAR


class SchemeKind(str, Enum):
    CONSTANT_VELOCITY = "constant_velocity"
    DISCONTINUOUS = "discontinuous"
    RAMP = "ramp"

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "cv": cls.CONSTANT_VELOCITY, "constant": cls.CONSTANT_VELOCITY,
            "constant_velocity": cls.CONSTANT_VELOCITY, "constant-velocity": cls.CONSTANT_VELOCITY,
            "discontinuous": cls.DISCONTINUOUS, "disc": cls.DISCONTINUOUS,
            "discontinuous_constant_velocity": cls.DISCONTINUOUS,
            "ramp": cls.RAMP, "ramp_trajectory": cls.RAMP, "ramp-trajectory": cls.RAMP,
        }
        try:
            return aliases[str(value).strip().lower()]
        except KeyError:
            raise InvalidInputError(f"unknown scheme {value!r}") from None


@dataclass(frozen=True, eq=False)
class TrajectoryTable:
    """Samples of the single ramp trajectory at ``t = j dt``.

    Index ``i`` of every array corresponds to ``j = i - offset``; negative ``j``
    continues the trajectory to the left of ``x_L`` (needed by the - grid).
    """

    dt: float
    offset: int
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    veff: np.ndarray
    dveff: np.ndarray
    d2veff: np.ndarray
    c: np.ndarray
    s0: np.ndarray
    substeps: int = 100

    def __len__(self):
        return self.x.shape[0]

    def at(self, j):
        """Array index for time sample(s) ``j``."""
        return np.asarray(j) + self.offset

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "v", "Veff", "dVeff", "d2Veff", "C", "s0"])
            for row in zip(self.t, self.x, self.v, self.veff, self.dveff, self.d2veff, self.c, self.s0):
                w.writerow([repr(float(val)) for val in row])


def _rk4_trajectory(veff, energy, mass, x_start, dt, n_steps, substeps, direction):
    """Fixed-step RK4 for dx/dt = v(x), ds/dt = m v^2, sampled every ``dt``."""
    if veff.is_zero:
        # free motion is exact; no integration rounding to accumulate
        if energy <= 0.0:
            raise TurningPointError("energy must be positive on a flat effective potential")
        v = math.sqrt(2.0 * energy / mass)
        steps = np.arange(n_steps + 1) * (direction * dt)
        return x_start + v * steps, mass * v * v * steps

    h = direction * dt / substeps
    half, base, b, c0 = 0.5 * (veff.v_right - veff.v_left), veff.v_left, veff.beta, veff.x0

    def veff_at(x):
        return half * (math.tanh(b * (x - c0)) + 1.0) + base

    def rhs(x):
        gap = energy - veff_at(x)
        if gap <= 0.0:
            raise TurningPointError(f"trajectory reached a turning point near x = {x:.6g}")
        v = math.sqrt(2.0 * gap / mass)
        return v, mass * v * v

    xs = np.empty(n_steps + 1)
    ss = np.empty(n_steps + 1)
    x, s = float(x_start), 0.0
    xs[0], ss[0] = x, s
    for i in range(1, n_steps + 1):
        for _ in range(substeps):
            k1x, k1s = rhs(x)
            k2x, k2s = rhs(x + 0.5 * h * k1x)
            k3x, k3s = rhs(x + 0.5 * h * k2x)
            k4x, k4s = rhs(x + h * k3x)
            x += h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            s += h * (k1s + 2.0 * k2s + 2.0 * k3s + k4s) / 6.0
        xs[i], ss[i] = x, s
    return xs, ss


def precompute_trajectory(veff: EffectivePotential, energy, mass, x_left, x_right, dt,
                          steps_before=0, min_steps=0, steps_past_right=1,
                          substeps=100) -> TrajectoryTable:
    """Tabulate the classical trajectory on ``veff`` that leaves ``x_left`` at t = 0.

    Forward integration runs until the trajectory has passed ``x_right`` and
    then ``steps_past_right`` more samples (and at least ``min_steps`` samples
    in total); ``steps_before`` samples are also generated at negative times.
    The inner RK4 step is ``dt / substeps``.
    """
    if dt <= 0.0:
        raise InvalidInputError("time step must be positive")
    if x_left >= x_right:
        raise InvalidInputError("x_left must be below x_right")
    probe = np.linspace(x_left, x_right, 2001)
    if np.any(energy - evaluate_veff(veff, probe)[0] <= 0.0):
        raise TurningPointError("effective potential reaches the energy inside the grid")

    # forward: grow in chunks until past x_right
    v_min = math.sqrt(2.0 * float(np.min(energy - evaluate_veff(veff, probe)[0])) / mass)
    est = int(math.ceil((x_right - x_left) / (v_min * dt))) + steps_past_right + 1
    n_fwd = max(est, min_steps)
    xf, sf = _rk4_trajectory(veff, energy, mass, x_left, dt, n_fwd, substeps, +1)
    while True:
        past = np.nonzero(xf > x_right)[0]
        if past.size and past[0] + steps_past_right <= xf.shape[0] - 1:
            break
        more_x, more_s = _rk4_trajectory(veff, energy, mass, xf[-1], dt, n_fwd, substeps, +1)
        xf = np.concatenate([xf, more_x[1:]])
        sf = np.concatenate([sf, sf[-1] + more_s[1:]])
    keep = max(int(past[0]) + steps_past_right, min_steps) + 1
    xf, sf = xf[:keep], sf[:keep]

    if steps_before > 0:
        xb, sb = _rk4_trajectory(veff, energy, mass, x_left, dt, steps_before, substeps, -1)
        x = np.concatenate([xb[:0:-1], xf])
        s0 = np.concatenate([sb[:0:-1], sf])
    else:
        x, s0 = xf, sf
    offset = int(steps_before)
    t = (np.arange(x.shape[0]) - offset) * dt
    ve, d1, d2 = evaluate_veff(veff, x)
    v = np.sqrt(2.0 * (energy - ve) / mass)
    c = coupling_correction(energy, ve, d1, d2, mass)
    return TrajectoryTable(dt, offset, t, x, v, ve, d1, d2, c, s0, substeps)


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Everything needed to place grid points at any phase of the shift cycle."""

    scheme: SchemeKind
    n_points: int
    x_left: float
    x_right: float
    dt: float
    n_sub: int
    t_shift: float
    energy: float
    mass: float
    v_left: float
    v_right: float
    v_asym: tuple = (0.0, 0.0)
    dx: float = 0.0
    x0: float | None = None
    dx_left: float = 0.0
    dx_right: float = 0.0
    n_left: int = 0
    n_right: int = 0
    table: TrajectoryTable | None = None
    veff: EffectivePotential | None = None
    adjustments: dict = field(default_factory=dict)

    @property
    def split(self):
        """Number of left-region points in the (+, -) arrays (discontinuous only)."""
        if self.scheme is SchemeKind.DISCONTINUOUS:
            return self.n_left - 1, self.n_left
        return None

    def positions(self, j: int):
        """(x_plus, x_minus) at cycle phase ``j`` (0 <= j <= n_sub)."""
        if self.scheme is SchemeKind.CONSTANT_VELOCITY:
            base = self.x_left + self.dx * np.arange(self.n_points)
            d = self.v_left * self.dt * j
            return base + d, base - d
        if self.scheme is SchemeKind.RAMP:
            k = np.arange(self.n_points) * self.n_sub
            return self.table.x[self.table.at(k + j)], self.table.x[self.table.at(k - j)]
        dl = self.v_left * self.dt * j
        dr = self.v_right * self.dt * j
        left = self.x_left + self.dx_left * np.arange(self.n_left)
        right = self.x0 + self.dx_right * np.arange(self.n_right)
        xp = np.concatenate([left[:-1] + dl, right + dr])
        xm = np.concatenate([left - dl, right[1:] - dr])
        return xp, xm

    def describe(self) -> dict:
        d = {
            "scheme": self.scheme.value, "N": self.n_points, "x_left": self.x_left,
            "x_right": self.x_right, "dt": self.dt, "steps_per_shift": self.n_sub,
            "t_shift": self.t_shift, "v_left": self.v_left, "v_right": self.v_right,
        }
        if self.scheme is SchemeKind.CONSTANT_VELOCITY:
            d["dx"] = self.dx
        elif self.scheme is SchemeKind.DISCONTINUOUS:
            d.update(x0=self.x0, dx_left=self.dx_left, dx_right=self.dx_right,
                     n_left=self.n_left, n_right=self.n_right)
        else:
            xp, _ = self.positions(0)
            d["dx_left"] = float(xp[1] - xp[0])
            d["dx_right"] = float(xp[-1] - xp[-2])
        if self.adjustments:
            d["adjustments"] = dict(self.adjustments)
        return d


def _fit_dt(t_shift, dt_requested):
    n_sub = max(1, int(math.ceil(t_shift / dt_requested * (1.0 - 1e-12))))
    return t_shift / n_sub, n_sub


def build_grid_spec(scheme, n_points, x_left, x_right, dt_requested, energy, mass,
                    potential: PotentialModel, veff: EffectivePotential | None = None,
                    x0: float | None = None, t_shift: float | None = None,
                    substeps: int = 100) -> GridSpec:
    """Construct a consistent grid: ``t_shift`` from the scheme, then ``dt`` dividing it.

    ``dt`` is never larger than ``dt_requested``. For the discontinuous scheme
    either ``t_shift`` is given or it is chosen so the total point count is
    about ``n_points``; ``x_L``/``x_R`` are pushed outward (by less than one
    spacing) so that both edges and ``x0`` are grid points.
    """
    scheme = SchemeKind.parse(scheme)
    n_points = int(n_points)
    if n_points < 5:
        raise InvalidInputError("need at least 5 trajectories per component")
    if not x_left < x_right:
        raise InvalidInputError("x_left must be below x_right")
    if dt_requested <= 0.0:
        raise InvalidInputError("time step must be positive")
    if mass <= 0.0:
        raise InvalidInputError("mass must be positive")
    va, vb = (float(a) for a in potential.asymptotes())
    if energy <= max(va, vb):
        raise ClosedChannelError(
            f"energy {energy:.6g} not above both asymptotes ({va:.6g}, {vb:.6g})")
    v_left = math.sqrt(2.0 * (energy - va) / mass)
    v_right = math.sqrt(2.0 * (energy - vb) / mass)
    common = dict(energy=float(energy), mass=float(mass), v_asym=(va, vb))

    if scheme is SchemeKind.CONSTANT_VELOCITY:
        if not math.isclose(va, vb, rel_tol=0.0, abs_tol=1e-14):
            raise InvalidInputError(
                "constant-velocity scheme needs equal asymptotes; use discontinuous or ramp")
        dx = (x_right - x_left) / (n_points - 1)
        ts = dx / v_left
        dt, n_sub = _fit_dt(ts, dt_requested)
        return GridSpec(scheme, n_points, float(x_left), float(x_right), dt, n_sub, ts,
                        v_left=v_left, v_right=v_left, dx=dx, **common)

    if scheme is SchemeKind.DISCONTINUOUS:
        if math.isclose(va, vb, rel_tol=0.0, abs_tol=1e-14):
            raise InvalidInputError("discontinuous scheme needs different asymptotes")
        x0 = float(potential.center() if x0 is None else x0)
        if not x_left < x0 < x_right:
            raise InvalidInputError("dividing point must lie inside the grid")
        if t_shift is None:
            t_shift = ((x0 - x_left) / v_left + (x_right - x0) / v_right) / (n_points - 1)
        dxl, dxr = t_shift * v_left, t_shift * v_right
        nl = int(math.ceil((x0 - x_left) / dxl - 1e-9)) + 1
        nr = int(math.ceil((x_right - x0) / dxr - 1e-9)) + 1
        if nl < 4 or nr < 4:
            raise InvalidInputError("each region needs at least 4 grid points")
        new_left, new_right = x0 - (nl - 1) * dxl, x0 + (nr - 1) * dxr
        adj = {}
        if abs(new_left - x_left) > 1e-12 or abs(new_right - x_right) > 1e-12:
            adj = {"x_left_requested": x_left, "x_right_requested": x_right}
        dt, n_sub = _fit_dt(t_shift, dt_requested)
        return GridSpec(scheme, nl + nr - 1, new_left, new_right, dt, n_sub, t_shift,
                        v_left=v_left, v_right=v_right, x0=x0, dx_left=dxl, dx_right=dxr,
                        n_left=nl, n_right=nr, adjustments=adj, **common)

    veff = veff if veff is not None else EffectivePotential.ramp(
        va, vb, potential.center(), 1.0 / potential.scale())
    wa, wb = veff.asymptotes()
    if not (math.isclose(wa, va, abs_tol=1e-14) and math.isclose(wb, vb, abs_tol=1e-14)):
        raise InvalidInputError("effective potential must share the potential's asymptotes")
    gap_min = energy - max(wa, wb)
    if gap_min <= 0.0:
        raise TurningPointError("effective potential not below the energy")

    def inv_speed(x):
        return 1.0 / math.sqrt(2.0 * (energy - float(evaluate_veff(veff, x)[0])) / mass)

    traversal, _ = quad(inv_speed, x_left, x_right, epsabs=0.0, epsrel=1e-13, limit=200)
    ts = traversal / (n_points - 1)
    dt, n_sub = _fit_dt(ts, dt_requested)
    table = precompute_trajectory(veff, energy, mass, x_left, x_right, dt,
                                  steps_before=n_sub, min_steps=n_points * n_sub,
                                  steps_past_right=n_sub, substeps=substeps)
    xr = float(table.x[table.at((n_points - 1) * n_sub)])
    adj = {}
    if abs(xr - x_right) > 1e-9 * max(1.0, abs(x_right)):
        adj = {"x_right_requested": x_right}
    return GridSpec(scheme, n_points, float(x_left), xr, dt, n_sub, ts,
                    v_left=float(table.v[table.offset]), v_right=float(table.v[table.at((n_points - 1) * n_sub)]),
                    table=table, veff=veff, adjustments=adj, **common)


@dataclass(eq=False)
class BipolarState:
    """Mutable propagation state: both grids, both fields, and the clock."""

    spec: GridSpec
    t: float
    j: int
    x_plus: np.ndarray
    x_minus: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    n_steps: int = 0

    def copy(self) -> "BipolarState":
        return replace(self, x_plus=self.x_plus.copy(), x_minus=self.x_minus.copy(),
                       psi_plus=self.psi_plus.copy(), psi_minus=self.psi_minus.copy())

    @property
    def coincident(self) -> bool:
        return self.j == 0


def advance_positions(state: BipolarState) -> BipolarState:
    """Move both grids forward by one time step (fields untouched)."""
    if state.j >= state.spec.n_sub:
        raise SequencingError("shift is due before positions can advance")
    state.j += 1
    state.t += state.spec.dt
    state.x_plus, state.x_minus = state.spec.positions(state.j)
    return state


def injected_value(spec: GridSpec, t: float) -> complex:
    """Incident boundary value at ``x_L``: exp(-i E t / hbar)."""
    return complex(np.exp(-1j * spec.energy * t / HBAR))


def shift_cycle(state: BipolarState) -> BipolarState:
    """Recycle the outermost points once the grids coincide again.

    The + grid loses its rightmost point and gains ``exp(-iEt)`` at ``x_L``;
    the - grid loses its leftmost point and gains 0 at ``x_R``. The
    discontinuous scheme also hands off across ``x0``.
    """
    spec = state.spec
    if state.j != spec.n_sub:
        raise SequencingError(f"shift requested at cycle phase {state.j} of {spec.n_sub}")
    inj = injected_value(spec, state.t)
    pp, pm = state.psi_plus, state.psi_minus
    if spec.scheme is SchemeKind.DISCONTINUOUS:
        from .propagators import matching_at_dividing_point

        npl, nml = spec.split
        l_plus, r_plus = pp[:npl], pp[npl:]
        l_minus, r_minus = pm[:nml], pm[nml:]
        new_lm, new_rp = matching_at_dividing_point(l_plus[-1], r_minus[0], spec.v_left, spec.v_right)
        pp = np.concatenate([[inj], l_plus[:-1], [new_rp], r_plus[:-1]])
        pm = np.concatenate([l_minus[1:], [new_lm], r_minus[1:], [0.0]])
    else:
        pp = np.concatenate([[inj], pp[:-1]])
        pm = np.concatenate([pm[1:], [0.0]])
    state.psi_plus = pp.astype(complex)
    state.psi_minus = pm.astype(complex)
    state.j = 0
    state.x_plus, state.x_minus = spec.positions(0)
    return state


def exterior_mask(x_query: np.ndarray, x_grid: np.ndarray) -> np.ndarray:
    """True where ``x_query`` lies outside ``[min(x_grid), max(x_grid)]``."""
    tol = 1e-12 * max(1.0, float(np.max(np.abs(x_grid))))
    return (x_query < x_grid[0] - tol) | (x_query > x_grid[-1] + tol)
