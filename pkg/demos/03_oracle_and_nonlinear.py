# coding: utf-8

# # Exact feedforward, set points and a nonlinear rod
#
# When the signals come from a known exosystem, the regulator equations give
# an exact feedforward. It is a useful yardstick for the iteration, which
# never sees the exosystem.

# In[1]:

import numpy as np

from betareg import (SignalPair, build_heat_plant, build_regularized, compute_constants,
                     from_exosystem, harmonic, nonlinear_bound, oracle_closed_loop,
                     rotation_exosystem, run_beta_iteration, setpoint_init, solve_regulator)
from betareg.analysis import limsup_estimate
from betareg.simulate import IntegratorConfig

windows = dict(actuator=(0.1, 0.3), sensor=(0.6, 0.8), disturbance=(0.4, 0.6))
plant = build_heat_plant(50, **windows)

# r = sin(0.5t) + 0.3 sin(t), d = cos(t)
exo = rotation_exosystem([0.5, 1.0], [1, 0, 0.3, 0], [0, 0, 0, 1], [0, 1, 1, 0])
sol = solve_regulator(plant, exo)
print("Gamma =", np.round(sol.Gamma, 5))
print("residuals", sol.residual_state, sol.residual_output)


# In[2]:

cfg = IntegratorConfig(1e-3, 20 * np.pi)
traj, err = oracle_closed_loop(plant, exo, sol, None, cfg)
ops = build_regularized(plant, 0.9)
stack = run_beta_iteration(plant, ops, SignalPair(*from_exosystem(exo)), n=3, cfg=cfg)
omega = 1.0
print("oracle tail   ", limsup_estimate(err, traj.t, omega))
for j, rec in enumerate(stack.records):
    print(f"iteration e_{j}", limsup_estimate(rec.e, stack.t, omega))


# ## Set points
#
# Starting from the steady state that already produces r(0) removes the
# start-up transient. Newton finds it for the nonlinear rod as well.

# In[3]:

rod = build_heat_plant(50, nonlinearity="tanh", epsilon=0.05, **windows)
sp = setpoint_init(rod, 1.0, 0.5)
print(f"u* = {sp.u:.6f}, C z* = {rod.c_w @ sp.z:.15f}, residual {sp.residual:.1e}")


# ## Nonlinear bounds
#
# With a small Lipschitz constant the bounds pick up correction terms, and
# the measured tails stay under them.

# In[4]:

ops = build_regularized(rod, 0.9)
C = compute_constants(ops)
sig = SignalPair(harmonic(0, 1, 3.0), harmonic(0, 0.5, 4.5))
stack = run_beta_iteration(rod, ops, sig, n=1)
print(f"eps * D_Abeta = {C.epsilon * C.D_Abeta:.4f}")
for j, level in enumerate(("e0", "e1")):
    tail = limsup_estimate(stack.records[j].e, stack.t, C.omega_beta)
    print(f"{level}: tail {tail:.4f}  bound {nonlinear_bound(level, C, sig):.4f}")
