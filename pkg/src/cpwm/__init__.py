"""Bipolar counterpropagating-wave solver for 1D stationary quantum scattering.

The stationary scattering state is split into left- and right-moving
components carried on two moving grids; relaxing them in time yields the
reflection and transmission probabilities at a single energy.
"""

from .config import RunConfig, load_config, parse_config_text
from .errors import CpwmError, DivergenceError, InvalidInputError, InvalidModelError
from .fields import decompose, initial_condition, interpolate_opposite, unwrap_action
from .observables import (
    ConvergenceReport,
    ScatteringResult,
    continuity_residual,
    edge_probabilities,
    run_config,
    run_convergence_cycle,
)
from .oracle import eckart_exact_transmission, integrate_scattering, smooth_step_exact_reflection
from .potentials import (
    Eckart,
    EffectivePotential,
    SumPotential,
    TabulatedPotential,
    TanhRamp,
    Zero,
    double_barrier,
)
from .propagators import (
    Stepper,
    matching_at_dividing_point,
    new_state,
    propagate,
    step_constant_velocity,
    step_discontinuous,
    step_ramp,
)
from .trajgrid import BipolarState, GridSpec, SchemeKind, build_grid_spec, precompute_trajectory

__version__ = "0.1.0"
