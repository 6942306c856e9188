"""Reflection/transmission extraction and the cyclic convergence procedure."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import InvalidInputError
from .propagators import PropagationInfo, Stepper, new_state, propagate
from .trajgrid import BipolarState, GridSpec, SchemeKind, build_grid_spec

__all__ = [
    "ScatteringResult", "ConvergenceReport", "TrialRecord", "edge_probabilities",
    "continuity_residual", "run_config", "run_convergence_cycle", "CYCLE_ORDER",
]

#: order in which the convergence parameters are refined
CYCLE_ORDER = ("t_max", "n_points", "dt", "x_range")


@dataclass
class ScatteringResult:
    """Edge-averaged probabilities with half peak-to-peak uncertainties."""

    p_refl: float
    u_refl: float
    p_trans: float
    u_trans: float
    m: int
    t_final: float
    scheme: str
    grid: dict = field(default_factory=dict)

    @property
    def unitarity_defect(self) -> float:
        return abs(self.p_refl + self.p_trans - 1.0)

    def to_dict(self) -> dict:
        return {"p_refl": self.p_refl, "u_refl": self.u_refl, "p_trans": self.p_trans,
                "u_trans": self.u_trans, "edge_samples": self.m, "t_final": self.t_final,
                "scheme": self.scheme, "grid": self.grid}


def _mean_spread(samples):
    samples = np.asarray(samples, dtype=float)
    return float(np.mean(samples)), 0.5 * float(np.max(samples) - np.min(samples))


def edge_probabilities(state: BipolarState, v_L=None, v_R=None, M=5) -> ScatteringResult:
    """P_refl from the ``M`` leftmost - samples, P_trans from the ``M`` rightmost + samples.

    Transmitted densities are weighted by ``v_R / v_L``. When the speeds are
    not given they come from the grid: the asymptotic speeds for the
    constant-velocity and discontinuous schemes, and for the ramp scheme the
    trajectory speed at each sample relative to the speed at ``x_L``.
    """
    spec = state.spec
    M = int(M)
    if M < 2 or M > spec.n_points // 3:
        raise InvalidInputError(f"edge sample count must lie in [2, {spec.n_points // 3}], got {M}")
    if not state.coincident:
        raise InvalidInputError("edge probabilities need a shift-coincident state")
    rho_minus = np.abs(state.psi_minus[:M]) ** 2
    rho_plus = np.abs(state.psi_plus[-M:]) ** 2
    if v_L is not None or v_R is not None:
        if v_L is None or v_R is None or v_L <= 0.0 or v_R <= 0.0:
            raise InvalidInputError("give both speeds, and both positive")
        ratio = v_R / v_L
    elif spec.scheme is SchemeKind.RAMP:
        tab = spec.table
        idx = tab.at(np.arange(spec.n_points) * spec.n_sub)[-M:]
        ratio = tab.v[idx] / tab.v[tab.offset]
    else:
        ratio = spec.v_right / spec.v_left
    pr, ur = _mean_spread(rho_minus)
    pt, ut = _mean_spread(ratio * rho_plus)
    return ScatteringResult(pr, ur, pt, ut, M, state.t, spec.scheme.value, spec.describe())


def _local_speed(spec: GridSpec, x):
    if spec.scheme is SchemeKind.RAMP:
        tab = spec.table
        return tab.v[tab.at(np.arange(spec.n_points) * spec.n_sub)]
    if spec.scheme is SchemeKind.DISCONTINUOUS:
        return np.where(x < spec.x0, spec.v_left, spec.v_right)
    return np.full(x.shape[0], spec.v_left)


def continuity_residual(state_a: BipolarState, state_b: BipolarState) -> float:
    """Max-norm of the discrete summed-continuity residual between two snapshots.

    ``(rho_b - rho_a) / t_shift + d/dx [v (rho+ - rho-)]_b`` with centred
    differences on interior points, ``rho = |psi+|^2 + |psi-|^2``. In the
    discontinuous scheme the dividing point and its neighbours are skipped,
    since the two components there belong to different regions.
    """
    if state_a.spec is not state_b.spec:
        raise InvalidInputError("snapshots come from different grids")
    for s in (state_a, state_b):
        if not s.coincident:
            raise InvalidInputError("snapshots must be at shift-coincident times")
    dt = state_b.t - state_a.t
    if dt <= 0.0:
        raise InvalidInputError("state_b must be later than state_a")
    spec = state_a.spec
    x = state_b.x_plus
    if not (np.array_equal(x, state_a.x_plus) and np.array_equal(state_b.x_minus, x)):
        raise InvalidInputError("snapshots are not on the same grid positions")

    def densities(s):
        rp, rm = np.abs(s.psi_plus) ** 2, np.abs(s.psi_minus) ** 2
        return rp + rm, rp - rm

    rho_a, _ = densities(state_a)
    rho_b, diff_b = densities(state_b)
    flux = _local_speed(spec, x) * diff_b
    dflux = (flux[2:] - flux[:-2]) / (x[2:] - x[:-2])
    res = (rho_b[1:-1] - rho_a[1:-1]) / dt + dflux
    if spec.scheme is SchemeKind.DISCONTINUOUS:
        k0 = spec.split[0]
        keep = np.abs(np.arange(1, x.shape[0] - 1) - k0) > 1
        res = res[keep]
    return float(np.max(np.abs(res))) if res.size else 0.0


def run_config(config: RunConfig, callback=None, stepper=None):
    """Build and propagate ``config``; returns ``(result, state, info)``."""
    pot = config.build_potential()
    spec = build_grid_spec(config.scheme, config.n_points, config.x_left, config.x_right,
                           config.dt, config.energy, config.mass, pot,
                           veff=config.build_veff(pot), x0=config.x0)
    state = new_state(spec)
    state, info = propagate(state, pot, config.t_max, stationarity_tol=config.stationarity_tol,
                            edge_samples=config.edge_samples, callback=callback,
                            stepper=stepper or Stepper(spec, pot))
    return edge_probabilities(state, M=config.edge_samples), state, info


# -- convergence cycle -------------------------------------------------------------


@dataclass
class TrialRecord:
    param: str
    value: object
    p_refl: float
    u_refl: float
    p_trans: float
    u_trans: float
    wall_time_s: float
    cycle: int = 0
    old_value: object = None
    accepted: bool = True

    def to_dict(self):
        return {"param": self.param, "value": self.value, "p_refl": self.p_refl,
                "u_refl": self.u_refl, "p_trans": self.p_trans, "u_trans": self.u_trans,
                "wall_time_s": self.wall_time_s, "cycle": self.cycle,
                "old_value": self.old_value, "accepted": self.accepted}


@dataclass
class ConvergenceReport:
    trials: list
    final_config: RunConfig
    final_result: ScatteringResult
    tol_refl: float | None
    tol_trans: float | None
    converged: bool
    cycles: int
    reason: str = ""

    def to_dict(self):
        return {"converged": self.converged, "cycles": self.cycles, "reason": self.reason,
                "targets": {"tol_refl": self.tol_refl, "tol_trans": self.tol_trans},
                "final_params": self.final_config.to_dict(),
                "final": self.final_result.to_dict(),
                "trials": [t.to_dict() for t in self.trials]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)


def _grid_spacing(config: RunConfig) -> float:
    return (config.x_right - config.x_left) / (config.n_points - 1)


def _refine(config: RunConfig, param: str) -> tuple[RunConfig, object, object]:
    """Refined copy of ``config`` plus the old and new parameter values."""
    if param == "t_max":
        return config.replace(t_max=2.0 * config.t_max), config.t_max, 2.0 * config.t_max
    if param == "n_points":
        n = int(math.ceil(1.25 * config.n_points))
        return config.replace(n_points=n), config.n_points, n
    if param == "dt":
        return config.replace(dt=0.5 * config.dt), config.dt, 0.5 * config.dt
    if param == "x_range":
        # widen both edges at (about) fixed spacing
        dx = _grid_spacing(config)
        n = config.n_points + int(round(1.0 / dx))
        old = [config.x_left, config.x_right]
        new = [config.x_left - 0.5, config.x_right + 0.5]
        return config.replace(x_left=new[0], x_right=new[1], n_points=n), old, new
    raise InvalidInputError(f"unknown convergence parameter {param!r}")


def _value_of(config: RunConfig, param: str):
    if param == "x_range":
        return [config.x_left, config.x_right]
    return getattr(config, param)


def run_convergence_cycle(config: RunConfig, tol_refl=None, tol_trans=None, max_trials=40,
                          max_cycles=10, runner=None, log=None) -> ConvergenceReport:
    """Cyclic one-parameter-at-a-time refinement.

    For each parameter in :data:`CYCLE_ORDER` a refined run is compared with
    the current one. The current value is kept when every targeted mean moves
    by less than its tolerance and the current oscillatory uncertainty is also
    below it; otherwise the refined value is adopted. The procedure stops
    after a full cycle in which every parameter was kept, or reports
    non-convergence once ``max_trials`` propagations have been spent.
    """
    if tol_refl is None and tol_trans is None:
        raise InvalidInputError("give at least one target tolerance")
    for tol in (tol_refl, tol_trans):
        if tol is not None and not tol > 0.0:
            raise InvalidInputError("target tolerances must be positive")
    run = runner or (lambda cfg: run_config(cfg)[0])
    targets = [(name, tol) for name, tol in (("refl", tol_refl), ("trans", tol_trans))
               if tol is not None]

    def timed(cfg):
        t0 = time.perf_counter()
        res = run(cfg)
        return res, time.perf_counter() - t0

    def record(param, value, res, wall, cycle, old=None, accepted=True):
        rec = TrialRecord(param, value, res.p_refl, res.u_refl, res.p_trans, res.u_trans,
                          wall, cycle, old, accepted)
        trials.append(rec)
        if log:
            log(rec)

    trials: list = []
    current = config
    result, wall = timed(current)
    record("base", None, result, wall, 0)
    n_trials = 1
    for cycle in range(1, max_cycles + 1):
        changed = False
        for param in CYCLE_ORDER:
            if n_trials >= max_trials:
                return ConvergenceReport(trials, current, result, tol_refl, tol_trans, False,
                                         cycle, "trial cap reached before a full unchanged cycle; "
                                         "convergence in dt may be in its slow regime")
            candidate, old, new = _refine(current, param)
            cand_res, wall = timed(candidate)
            n_trials += 1
            settled = all(
                abs(getattr(cand_res, "p_" + n) - getattr(result, "p_" + n)) < tol
                and getattr(result, "u_" + n) < tol
                for n, tol in targets)
            # 'accepted' marks a refinement that was adopted
            record(param, new, cand_res, wall, cycle, old, accepted=not settled)
            if not settled:
                current, result, changed = candidate, cand_res, True
        if not changed:
            return ConvergenceReport(trials, current, result, tol_refl, tol_trans, True, cycle)
    return ConvergenceReport(trials, current, result, tol_refl, tol_trans, False, max_cycles,
                             "cycle cap reached")


def trial_records_json(report: ConvergenceReport) -> str:
    return json.dumps([t.to_dict() for t in report.trials], indent=2)


__all__ += ["trial_records_json"]
