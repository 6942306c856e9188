"""Amplitude/action representation of the bipolar fields.

The solver stores complex ``psi`` values but interpolates the smooth real
fields ``r = |psi|`` and ``s`` (with ``psi = r exp(i s / hbar)``), rebuilding
the unwrapped action from neighbouring phase ratios.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .spline import NaturalSpline, build_spline
from .trajgrid import BipolarState, GridSpec, SchemeKind, exterior_mask
from .units import HBAR

__all__ = [
    "FieldDecomposition", "NaturalSpline", "build_spline", "decompose", "unwrap_action",
    "interpolate_opposite", "initial_condition", "ZERO_THRESHOLD", "SNAPSHOT_COLUMNS",
    "snapshot_rows", "write_snapshot",
]

#: amplitudes below this are treated as exact zeros by the unwrapping recursion
ZERO_THRESHOLD = 1e-30


@dataclass(frozen=True, eq=False)
class FieldDecomposition:
    r: np.ndarray
    s: np.ndarray

    def reconstruct(self, hbar=HBAR) -> np.ndarray:
        return self.r * np.exp(1j * self.s / hbar)


def unwrap_action(psi: np.ndarray, r: np.ndarray | None = None, hbar=HBAR) -> np.ndarray:
    """Continuous action along the grid from principal-value phase ratios.

    A zero sample carries the previous action forward; the sample after a zero
    restarts from its own principal phase. A virtual zero precedes element 0
    with action 0.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.size == 0:
        raise InvalidInputError("cannot decompose an empty field")
    if r is None:
        r = np.abs(psi)
    nonzero = r >= ZERO_THRESHOLD
    phase = np.angle(psi)
    if nonzero.all():
        inc = np.angle(psi[1:] * np.conj(psi[:-1]))
        s = np.empty(psi.shape[0])
        s[0] = phase[0]
        np.cumsum(inc, out=s[1:])
        s[1:] += phase[0]
        return hbar * s

    # restart where a nonzero follows a zero (element 0 follows the virtual zero)
    prev_nonzero = np.concatenate([[False], nonzero[:-1]])
    restart = nonzero & ~prev_nonzero
    inc = np.zeros(psi.shape[0])
    both = nonzero[1:] & nonzero[:-1]
    inc[1:][both] = np.angle(psi[1:][both] * np.conj(psi[:-1][both]))
    inc[restart] = 0.0
    c = np.cumsum(inc)
    idx = np.arange(psi.shape[0])
    start = np.maximum.accumulate(np.where(restart, idx, -1))
    s = np.where(start >= 0, c - c[np.maximum(start, 0)] + phase[np.maximum(start, 0)], 0.0)
    return hbar * s


def decompose(psi, hbar=HBAR) -> FieldDecomposition:
    psi = np.asarray(psi, dtype=complex)
    r = np.abs(psi)
    return FieldDecomposition(r, unwrap_action(psi, r, hbar))


def _interp_field(x_grid, psi_grid, x_query, hbar=HBAR):
    d = decompose(psi_grid, hbar)
    spl = NaturalSpline(x_grid, np.column_stack([d.r, d.s]))
    rs = spl(x_query)
    return rs[:, 0] * np.exp(1j * rs[:, 1] / hbar)


def interpolate_opposite(state: BipolarState, which: str = "+", hbar=HBAR):
    """Opposite-component field at this component's grid points.

    Returns ``(values, interior)``. For the constant-velocity and ramp schemes,
    points outside the opposite grid are exterior and get ``nan``. In the
    discontinuous scheme each region is handled separately and points beyond
    the opposite grid on the dividing-point side are extrapolated with the
    terminal spline segment; only points beyond the outer edges are exterior.
    """
    if which not in ("+", "-"):
        raise InvalidInputError("which must be '+' or '-'")
    if which == "+":
        xq, xg, pg = state.x_plus, state.x_minus, state.psi_minus
    else:
        xq, xg, pg = state.x_minus, state.x_plus, state.psi_plus
    spec = state.spec
    out = np.full(xq.shape[0], np.nan + 0j)

    if spec.scheme is SchemeKind.DISCONTINUOUS:
        npl, nml = spec.split
        nq, ng = (npl, nml) if which == "+" else (nml, npl)
        interior = np.zeros(xq.shape[0], dtype=bool)
        for q_sl, g_sl, outer in ((slice(0, nq), slice(0, ng), "left"),
                                  (slice(nq, None), slice(ng, None), "right")):
            xr, gx = xq[q_sl], xg[g_sl]
            tol = 1e-12 * max(1.0, float(np.max(np.abs(gx))))
            if outer == "left":
                ok = xr >= gx[0] - tol
            else:
                ok = xr <= gx[-1] + tol
            vals = np.full(xr.shape[0], np.nan + 0j)
            vals[ok] = _interp_field(gx, pg[g_sl], xr[ok], hbar)
            out[q_sl] = vals
            interior[q_sl] = ok
        return out, interior

    interior = ~exterior_mask(xq, xg)
    out[interior] = _interp_field(xg, pg, xq[interior], hbar)
    return out, interior


def initial_condition(spec: GridSpec, hbar=HBAR):
    """Incident wave on the + grid, zero reflected wave.

    Constant velocity: ``exp(i k (x - x_L))`` (phase-referenced to the
    injected boundary value). Ramp: the basic WKB wave ``sqrt(v_L / v)
    exp(i s0 / hbar)`` from the trajectory table. Discontinuous: plane waves
    on each side with the step WKB amplitude; the dividing-point values are
    then fixed by matching.
    """
    xp, xm = spec.positions(0)
    psi_minus = np.zeros(xm.shape[0], dtype=complex)
    if spec.scheme is SchemeKind.CONSTANT_VELOCITY:
        k = spec.mass * spec.v_left / hbar
        return np.exp(1j * k * (xp - spec.x_left)), psi_minus
    if spec.scheme is SchemeKind.RAMP:
        tab = spec.table
        idx = tab.at(np.arange(spec.n_points) * spec.n_sub)
        amp = np.sqrt(tab.v[tab.offset] / tab.v[idx])
        return amp * np.exp(1j * tab.s0[idx] / hbar), psi_minus

    from .propagators import matching_at_dividing_point

    npl, nml = spec.split
    kl = spec.mass * spec.v_left / hbar
    kr = spec.mass * spec.v_right / hbar
    s_x0 = kl * (spec.x0 - spec.x_left)
    left = np.exp(1j * kl * (xp[:npl] - spec.x_left))
    right = np.sqrt(spec.v_left / spec.v_right) * np.exp(1j * (s_x0 + kr * (xp[npl:] - spec.x0)))
    psi_plus = np.concatenate([left, right])
    new_lm, new_rp = matching_at_dividing_point(np.exp(1j * s_x0), 0.0, spec.v_left, spec.v_right)
    psi_plus[npl] = new_rp
    psi_minus[nml - 1] = new_lm
    return psi_plus, psi_minus


SNAPSHOT_COLUMNS = ("t", "component", "k", "x", "re_psi", "im_psi", "r", "s")


def snapshot_rows(state: BipolarState, hbar=HBAR):
    """Rows of the field snapshot table, + component first."""
    for label, x, psi in (("+", state.x_plus, state.psi_plus), ("-", state.x_minus, state.psi_minus)):
        d = decompose(psi, hbar)
        for k in range(psi.shape[0]):
            yield (repr(state.t), label, k, repr(float(x[k])), repr(float(psi[k].real)),
                   repr(float(psi[k].imag)), repr(float(d.r[k])), repr(float(d.s[k])))


def write_snapshot(state: BipolarState, fh, header=True, hbar=HBAR):
    """Append a snapshot of ``state`` to the open text file ``fh`` as CSV."""
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(SNAPSHOT_COLUMNS)
    writer.writerows(snapshot_rows(state, hbar))
