"""Time stepping for the three trajectory schemes.

Every scheme uses the same first-order split: the plane-wave (or WKB) part is
applied as an exact exponential factor, and the coupling to the counter-
propagating component is added with a forward Euler term,

    psi(t + dt) = psi(t) * F(x) - i dt/hbar * G(x) * [psi(t) + psi_opp(x, t)]

where ``psi_opp`` comes from natural-spline interpolation of the opposite
component's amplitude and action. All right-hand-side quantities are taken at
time ``t`` (start-of-step positions and fields).

For the constant-velocity and discontinuous schemes ``F = exp(i dt (E - 2 V_a))``
and ``G = V - V_a`` with ``V_a`` the asymptote of the point's region. For the
ramp scheme ``F = exp(i dt (E - 2 V_eff) / hbar) * exp(+- dt v V_eff' / (4 (E - V_eff)))``
and ``G = V - V_eff - C``. Points outside the opposite grid get ``F`` only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import DivergenceError, InvalidInputError
from .fields import ZERO_THRESHOLD, initial_condition, unwrap_action
from .potentials import PotentialModel
from .trajgrid import BipolarState, GridSpec, SchemeKind, advance_positions, shift_cycle
from .units import HBAR

DIVERGENCE_LIMIT = 1e6


def matching_at_dividing_point(psi_left_plus, psi_right_minus, v_left, v_right):
    """Outgoing components at the dividing point from the incoming ones.

    Continuity of ``psi`` and of ``psi'`` (with constant speed on each side)
    gives ``l+ + l- = r+ + r-`` and ``v_L (l+ - l-) = v_R (r+ - r-)``.
    Returns ``(psi_left_minus, psi_right_plus)``.
    """
    if v_left <= 0.0 or v_right <= 0.0:
        raise InvalidInputError("speeds must be positive")
    total = v_left + v_right
    right_plus = (2.0 * v_left * psi_left_plus + (v_right - v_left) * psi_right_minus) / total
    left_minus = ((v_left - v_right) * psi_left_plus + 2.0 * v_right * psi_right_minus) / total
    return left_minus, right_plus


def new_state(spec: GridSpec) -> BipolarState:
    """Initial state (t = 0, grids coincident) for ``spec``."""
    pp, pm = initial_condition(spec)
    xp, xm = spec.positions(0)
    return BipolarState(spec, 0.0, 0, xp, xm, pp, pm)


@dataclass
class _Block:
    """Interpolation geometry for one (query set, opposite grid) pair at one phase."""

    q: np.ndarray        # query indices into this component's array
    g0: int              # opposite-grid slice start
    g1: int              # opposite-grid slice end
    h: np.ndarray        # knot spacings
    diag: np.ndarray
    off: np.ndarray
    i: np.ndarray        # containing interval per query
    a: np.ndarray
    b: np.ndarray
    ca: np.ndarray
    cb: np.ndarray


@dataclass
class _Phase:
    factor: tuple        # (F_plus, F_minus)
    coupling: tuple      # (G_plus * dt, G_minus * dt) on interior points
    blocks: tuple        # (blocks for +, blocks for -)


def _make_block(xq_all, q, xg):
    xq = xq_all[q]
    h = np.diff(xg)
    i = np.searchsorted(xg, xq, side="right") - 1
    np.clip(i, 0, xg.shape[0] - 2, out=i)
    hi = h[i]
    b = (xq - xg[i]) / hi
    a = 1.0 - b
    c = hi * hi / 6.0
    return dict(q=q, h=h, diag=2.0 * (h[:-1] + h[1:]), off=h[1:-1].copy(), i=i,
                a=a, b=b, ca=(a**3 - a) * c, cb=(b**3 - b) * c)


@dataclass
class Stepper:
    """Precomputes per-phase coefficients and advances a state in place.

    Coefficients depend only on the shift-cycle phase, so each phase is built
    once and reused for the rest of the propagation (unless the cache would be
    too large, in which case they are rebuilt on the fly).
    """

    spec: GridSpec
    potential: PotentialModel
    hbar: float = HBAR
    cache_limit: int = 4_000_000
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._use_cache = self.spec.n_sub * self.spec.n_points <= self.cache_limit

    # -- coefficient construction ---------------------------------------------------
    def _coefficients(self, j, xp, xm):
        spec, dt, hb, e = self.spec, self.spec.dt, self.hbar, self.spec.energy
        if spec.scheme is SchemeKind.RAMP:
            tab = spec.table
            k = np.arange(spec.n_points) * spec.n_sub
            out_f, out_g = [], []
            for idx, sign, x in ((tab.at(k + j), 1.0, xp), (tab.at(k - j), -1.0, xm)):
                gap = e - tab.veff[idx]
                amp = sign * dt * tab.v[idx] * tab.dveff[idx] / (4.0 * gap)
                out_f.append(np.exp(1j * dt * (e - 2.0 * tab.veff[idx]) / hb + amp))
                out_g.append((self.potential(x) - tab.veff[idx] - tab.c[idx]) * dt)
            return tuple(out_f), tuple(out_g)
        va, vb = spec.v_asym
        res_f, res_g = [], []
        for x, n_left in ((xp, spec.split[0] if spec.split else None),
                          (xm, spec.split[1] if spec.split else None)):
            vasym = np.full(x.shape[0], va, dtype=float)
            if n_left is not None:
                vasym[n_left:] = vb
            res_f.append(np.exp(1j * dt * (e - 2.0 * vasym) / hb))
            res_g.append((self.potential(x) - vasym) * dt)
        return tuple(res_f), tuple(res_g)

    def _blocks(self, xq, xg, which):
        spec = self.spec
        tol = 1e-12 * max(1.0, float(np.max(np.abs(xg))))
        if spec.scheme is not SchemeKind.DISCONTINUOUS:
            q = np.nonzero((xq >= xg[0] - tol) & (xq <= xg[-1] + tol))[0]
            return [dict(_make_block(xq, q, xg), g0=0, g1=xg.shape[0])]
        npl, nml = spec.split
        nq, ng = (npl, nml) if which == "+" else (nml, npl)
        left_q = np.arange(nq)
        left_q = left_q[xq[:nq] >= xg[0] - tol]
        right_q = np.arange(nq, xq.shape[0])
        right_q = right_q[xq[nq:] <= xg[-1] + tol]
        return [dict(_make_block(xq, left_q, xg[:ng]), g0=0, g1=ng),
                dict(_make_block(xq, right_q, xg[ng:]), g0=ng, g1=xg.shape[0])]

    def phase(self, j) -> _Phase:
        if self._use_cache and j in self._cache:
            return self._cache[j]
        xp, xm = self.spec.positions(j)
        f, g = self._coefficients(j, xp, xm)
        blocks = (tuple(_Block(**b) for b in self._blocks(xp, xm, "+")),
                  tuple(_Block(**b) for b in self._blocks(xm, xp, "-")))
        ph = _Phase(f, g, blocks)
        if self._use_cache:
            self._cache[j] = ph
        return ph

    # -- stepping -------------------------------------------------------------------
    def _interp(self, psi_grid, blk: _Block):
        psi = psi_grid[blk.g0:blk.g1]
        r = np.abs(psi)
        if r.max() < ZERO_THRESHOLD:
            return np.zeros(blk.q.shape[0], dtype=complex)
        y = np.empty((psi.shape[0], 2))
        y[:, 0] = r
        y[:, 1] = unwrap_action(psi, r, self.hbar)
        slope = np.diff(y, axis=0) / blk.h[:, None]
        m = np.zeros_like(y)
        if psi.shape[0] == 3:
            m[1] = (slope[1] - slope[0]) * 3.0 / (blk.h[0] + blk.h[1])
        else:
            _, _, _, sol, info = lapack.dgtsv(blk.off, blk.diag, blk.off, 6.0 * (slope[1:] - slope[:-1]),
                                              overwrite_b=1)
            if info != 0:
                raise DivergenceError(f"spline solve failed (info={info})")
            m[1:-1] = sol
        i = blk.i
        rs = (blk.a[:, None] * y[i] + blk.b[:, None] * y[i + 1]
              + blk.ca[:, None] * m[i] + blk.cb[:, None] * m[i + 1])
        return rs[:, 0] * np.exp(1j * rs[:, 1] / self.hbar)

    def update_fields(self, state: BipolarState):
        """Replace both fields by their values one step later (positions untouched)."""
        ph = self.phase(state.j)
        old = (state.psi_plus, state.psi_minus)
        new = []
        for c in (0, 1):
            psi, opp = old[c], old[1 - c]
            out = psi * ph.factor[c]
            g = ph.coupling[c]
            for blk in ph.blocks[c]:
                if blk.q.shape[0] == 0:
                    continue
                q = blk.q
                out[q] -= 1j / self.hbar * g[q] * (psi[q] + self._interp(opp, blk))
            new.append(out)
        state.psi_plus, state.psi_minus = new

    def step(self, state: BipolarState) -> BipolarState:
        """One full time step: field update, position advance, shift when due."""
        self.update_fields(state)
        advance_positions(state)
        state.n_steps += 1
        if state.j == self.spec.n_sub:
            shift_cycle(state)
        return state


def _check_step_args(state, energy, dt, scheme):
    spec = state.spec
    if spec.scheme is not scheme:
        raise InvalidInputError(f"state was built for the {spec.scheme.value} scheme")
    if energy is not None and not math.isclose(energy, spec.energy, rel_tol=1e-12):
        raise InvalidInputError("energy differs from the one the grid was built for")
    if dt is not None and not math.isclose(dt, spec.dt, rel_tol=1e-12):
        raise InvalidInputError("time step differs from the grid's (adjusted) step")


def step_constant_velocity(state, potential, energy=None, dt=None):
    _check_step_args(state, energy, dt, SchemeKind.CONSTANT_VELOCITY)
    return Stepper(state.spec, potential).step(state)


def step_discontinuous(state, potential, energy=None, dt=None):
    _check_step_args(state, energy, dt, SchemeKind.DISCONTINUOUS)
    return Stepper(state.spec, potential).step(state)


def step_ramp(state, potential, energy=None, dt=None, table=None):
    _check_step_args(state, energy, dt, SchemeKind.RAMP)
    if table is not None and table is not state.spec.table:
        raise InvalidInputError("trajectory table does not belong to this grid")
    return Stepper(state.spec, potential).step(state)


@dataclass
class PropagationInfo:
    n_steps: int
    n_cycles: int
    t_final: float
    t_max_requested: float
    wall_time_s: float
    stopped_early: bool = False
    notes: dict = field(default_factory=dict)


def _edge_means(state, m):
    pr = float(np.mean(np.abs(state.psi_minus[:m]) ** 2))
    spec = state.spec
    if spec.scheme is SchemeKind.RAMP:
        tab = spec.table
        idx = tab.at(np.arange(spec.n_points) * spec.n_sub)[-m:]
        ratio = tab.v[idx] / tab.v[tab.offset]
    else:
        ratio = spec.v_right / spec.v_left
    pt = float(np.mean(ratio * np.abs(state.psi_plus[-m:]) ** 2))
    return pr, pt


def propagate(state: BipolarState, potential: PotentialModel, t_max: float,
              stationarity_tol: float | None = None, edge_samples: int = 5,
              callback=None, stepper: Stepper | None = None):
    """Relax ``state`` until ``t >= t_max`` (rounded up to whole shift cycles).

    ``callback(state, cycle)`` is called at every shift-coincident time. With
    ``stationarity_tol`` the loop stops once both edge probabilities change by
    less than the tolerance over one full cycle.

    Returns ``(state, PropagationInfo)``.
    """
    spec = state.spec
    if state.j != 0:
        raise InvalidInputError("propagation must start at a shift-coincident time")
    if t_max < 0.0:
        raise InvalidInputError("t_max must be non-negative")
    stepper = stepper or Stepper(spec, potential)
    remaining = max(0.0, t_max - state.t)
    n_cycles = int(math.ceil(remaining / spec.t_shift - 1e-9)) if remaining > 0 else 0
    m = min(edge_samples, max(2, spec.n_points // 3))
    t0 = time.perf_counter()
    last = _edge_means(state, m) if stationarity_tol else None
    stopped = False
    done = 0
    for cycle in range(n_cycles):
        for _ in range(spec.n_sub):
            stepper.step(state)
        done += 1
        peak = max(np.max(np.abs(state.psi_plus)), np.max(np.abs(state.psi_minus)))
        if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"field amplitude {peak:.3g} at t = {state.t:.6g}; reduce the time step")
        if callback is not None:
            callback(state, cycle + 1)
        if stationarity_tol:
            cur = _edge_means(state, m)
            if max(abs(cur[0] - last[0]), abs(cur[1] - last[1])) < stationarity_tol:
                stopped = True
                break
            last = cur
    info = PropagationInfo(state.n_steps, done, state.t, t_max, time.perf_counter() - t0, stopped)
    info.notes["coefficients_at"] = "start-of-step positions"
    if spec.adjustments:
        info.notes["grid_adjustments"] = dict(spec.adjustments)
    return state, info
