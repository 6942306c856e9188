"""Reference transmission/reflection values independent of the trajectory solver.

Two routes:

* :func:`integrate_scattering` solves the time-independent equation with a
  fixed-step Numerov recursion, starting from a pure transmitted wave on the
  right and integrating leftward (stable under deep barriers), then projects
  onto incident and reflected waves on the left.
* closed forms for the Eckart barrier and the tanh step.

The Numerov recursion is run on the discrete plane waves it supports exactly
(wavenumber ``kt`` with ``cos(kt h) = (1 - 5 h^2 k^2 / 12) / (1 + h^2 k^2 / 12)``),
and fluxes use the conserved discrete Wronskian, so ``P_refl + P_trans = 1`` to
rounding and the only discretisation error comes from where V varies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ClosedChannelError, InvalidInputError
from .potentials import PotentialModel
from .units import DEFAULT_MASS, HBAR


@dataclass
class OracleResult:
    p_refl: float
    p_trans: float
    step: float
    error_estimate: float
    x_left: float
    x_right: float
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {"p_refl": self.p_refl, "p_trans": self.p_trans, "step": self.step,
                "error_estimate": self.error_estimate, "x_left": self.x_left,
                "x_right": self.x_right, **({"notes": self.notes} if self.notes else {})}


def _discrete_k(k, h):
    c = (1.0 - 5.0 * h * h * k * k / 12.0) / (1.0 + h * h * k * k / 12.0)
    if not -1.0 < c < 1.0:
        raise InvalidInputError("Numerov step too large for the asymptotic wavelength")
    return math.acos(c) / h


def _numerov_once(potential, energy, mass, x_left, x_right, h, hbar):
    va, vb = potential.asymptotes()
    n = int(math.ceil((x_right - x_left) / h))
    x = x_right - h * np.arange(n + 1)          # descending from x_right
    g = 2.0 * mass / hbar**2 * (potential(x) - energy)
    # flat asymptotic coefficients at both ends so the plane waves are exact there
    g[0] = g[1] = 2.0 * mass / hbar**2 * (vb - energy)
    g[-1] = g[-2] = 2.0 * mass / hbar**2 * (va - energy)
    w = 1.0 - h * h * g / 12.0
    kl = math.sqrt(2.0 * mass * (energy - va)) / hbar
    kr = math.sqrt(2.0 * mass * (energy - vb)) / hbar
    ktl, ktr = _discrete_k(kl, h), _discrete_k(kr, h)

    # phi = w * psi obeys phi[n+1] + phi[n-1] = T[n] phi[n]
    t = (2.0 + 10.0 * (1.0 - w)) / w           # 2 (1 + 5 h^2 g / 12) / (1 - h^2 g / 12)
    phi_prev = complex(w[0] * np.exp(1j * ktr * (x[0] - x_right)))
    phi = complex(w[1] * np.exp(1j * ktr * (x[1] - x_right)))
    tl = t.tolist()
    for i in range(1, n):
        phi_prev, phi = phi, tl[i] * phi - phi_prev
    phi_a, phi_b = phi_prev, phi               # at x[n-1], x[n]
    xa, xb = x[n - 1], x[n]
    wa = w[-1]
    # phi = wa (A e^{i kt x} + B e^{-i kt x}) at the two leftmost points
    ea, eb = np.exp(1j * ktl * (xa - xb)), 1.0 + 0j
    det = ea / eb - eb / ea
    amp_a = (phi_a / eb - phi_b / ea) / det / wa      # coefficient of e^{i kt (x - xb)}
    amp_b = (phi_b * ea - phi_a * eb) / det / wa      # coefficient of e^{-i kt (x - xb)}
    # discrete current of a plane wave c e^{i kt x}: |c|^2 w^2 sin(kt h)
    flux_in = abs(amp_a) ** 2 * wa * wa * math.sin(ktl * h)
    flux_out = w[0] * w[0] * math.sin(ktr * h)
    p_trans = flux_out / flux_in
    p_refl = abs(amp_b / amp_a) ** 2
    return p_refl, p_trans


def _flat_range(potential, energy, mass, x_left, x_right, hbar, max_grow=200):
    va, vb = potential.asymptotes()
    kmin = min(math.sqrt(2.0 * mass * (energy - va)), math.sqrt(2.0 * mass * (energy - vb))) / hbar
    grow = 1.0 / kmin
    tol_l = min(1e-10, 1e-10 * (energy - va))
    tol_r = min(1e-10, 1e-10 * (energy - vb))
    lo, hi = float(x_left), float(x_right)
    for _ in range(max_grow):
        if abs(float(potential(lo)) - va) < tol_l:
            break
        lo -= grow
    for _ in range(max_grow):
        if abs(float(potential(hi)) - vb) < tol_r:
            break
        hi += grow
    return lo, hi


def integrate_scattering(potential: PotentialModel, energy, mass=DEFAULT_MASS,
                         x_left=-5.0, x_right=5.0, h=None, rtol=1e-6, atol=1e-12,
                         max_halvings=8, hbar=HBAR) -> OracleResult:
    """Reflection and transmission probabilities by Numerov integration.

    The range is extended outward in steps of ``1/min(k_L, k_R)`` until the
    potential is flat to ``min(1e-10, 1e-10 (E - V_asym))``. The step starts at
    1/50 of the shortest local wavelength and is halved until successive
    results agree within ``max(atol, rtol * P)`` for both probabilities; the
    returned values are Richardson-extrapolated (Numerov is fourth order).
    """
    va, vb = potential.asymptotes()
    if energy <= max(va, vb):
        raise ClosedChannelError("energy must exceed both asymptotes")
    if h is not None and h <= 0.0:
        raise InvalidInputError("step must be positive")
    lo, hi = _flat_range(potential, energy, mass, x_left, x_right, hbar)
    notes = {}
    if lo < x_left or hi > x_right:
        notes["range_extended"] = [lo, hi]
    if h is None:
        probe = np.linspace(lo, hi, 4001)
        kmax = math.sqrt(2.0 * mass * float(np.max(np.abs(potential(probe) - energy)))) / hbar
        h = 2.0 * math.pi / kmax / 50.0
    prev = _numerov_once(potential, energy, mass, lo, hi, h, hbar)
    err = float("inf")
    for _ in range(max_halvings):
        h *= 0.5
        cur = _numerov_once(potential, energy, mass, lo, hi, h, hbar)
        diffs = [abs(c - p) / 15.0 for c, p in zip(cur, prev)]
        extrap = [c + (c - p) / 15.0 for c, p in zip(cur, prev)]
        err = float(max(diffs))
        if all(d <= max(atol, rtol * abs(c)) for d, c in zip(diffs, cur)):
            prev = tuple(extrap)
            break
        prev = cur
    else:
        notes["step_halving_exhausted"] = True
    return OracleResult(float(prev[0]), float(prev[1]), h, err, lo, hi, notes)


def _log_sinh(a):
    return a + math.log1p(-math.exp(-2.0 * a)) - math.log(2.0)


def _log_cosh(a):
    a = abs(a)
    return a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)


def eckart_exact_transmission(v0, alpha, mass, energy, hbar=HBAR) -> float:
    """Closed-form transmission through ``v0 sech^2(alpha x)``."""
    if min(v0, alpha, mass, energy) <= 0.0:
        raise InvalidInputError("v0, alpha, mass and energy must be positive")
    k = math.sqrt(2.0 * mass * energy) / hbar
    a = math.pi * k / alpha
    disc = 8.0 * mass * v0 / (hbar * alpha) ** 2 - 1.0
    if disc > 0.0:
        log_b = 2.0 * _log_cosh(0.5 * math.pi * math.sqrt(disc))
        ratio = math.exp(log_b - 2.0 * _log_sinh(a))
    else:
        ratio = math.cos(0.5 * math.pi * math.sqrt(-disc)) ** 2 / math.sinh(a) ** 2
    return 1.0 / (1.0 + ratio)


def smooth_step_exact_reflection(v_right, beta, mass, energy, v_left=0.0, hbar=HBAR) -> float:
    """Closed-form reflection from ``(v_right/2) (tanh(beta x) + 1)`` (plus ``v_left``)."""
    if energy <= max(v_left, v_right):
        raise ClosedChannelError("energy must exceed both asymptotes")
    kl = math.sqrt(2.0 * mass * (energy - v_left)) / hbar
    kr = math.sqrt(2.0 * mass * (energy - v_right)) / hbar
    # (v_right - v_left)/2 (tanh + 1) + v_left is 1/(1 + exp(-2 beta x)) scaled
    num = math.pi * abs(kl - kr) / (2.0 * beta)
    den = math.pi * (kl + kr) / (2.0 * beta)
    if num == 0.0:
        return 0.0
    return math.exp(2.0 * (_log_sinh(num) - _log_sinh(den)))
