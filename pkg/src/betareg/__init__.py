"""Regularized tracking and disturbance rejection for semilinear plants.

Typical use::

    from betareg import (SignalPair, build_heat_plant, build_regularized, harmonic,
                         run_beta_iteration)
    plant = build_heat_plant(50, actuator=(0.1, 0.3), sensor=(0.6, 0.8))
    ops = build_regularized(plant, beta=0.9)
    stack = run_beta_iteration(plant, ops, SignalPair.tracking(harmonic(0, 1, 3.0)), n=3)
"""

from .analysis import (BoundVerdict, ErrorConstants, compute_constants, limsup_estimate,
                       linear_bound, nonlinear_bound, verdict_suite)
from .iterctl import (IterationStack, control_consistency_check, iteration0, iteration_j,
                      run_beta_iteration, setpoint_init)
from .model import (DiscreteFunctionSpace, Exosystem, SemilinearPlant, build_heat_plant,
                    build_scalar_plant, make_nonlinearity, rotation_exosystem)
from .oracle import oracle_closed_loop, solve_regulator
from .regop import RegularizedOperators, build_regularized, verify_identities
from .signals import Signal, SignalPair, constant, from_exosystem, harmonic, zero
from .simulate import IntegratorConfig, Trajectory, integrate_semilinear, simulate_true_plant

__version__ = "0.1.0"
