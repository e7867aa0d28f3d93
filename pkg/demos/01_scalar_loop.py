# coding: utf-8

# # The regularized loop on a one-state plant
#
# The plant is z' = -z + u + d with output y = z. With sensor and actuator
# on the same state, every constant has a closed form, so this is where to
# build intuition before moving to the heat rod.

# In[1]:

import numpy as np

from betareg import (SignalPair, build_regularized, build_scalar_plant, compute_constants,
                     harmonic, limsup_estimate, run_beta_iteration)

plant = build_scalar_plant(-1.0, 1.0, 1.0, 1.0)


# ## The error constant equals beta
#
# Smaller beta means a stiffer regularized generator and a smaller error
# constant D.

# In[2]:

for beta in (0.2, 0.5, 0.9):
    c = compute_constants(build_regularized(plant, beta))
    print(f"beta={beta:.1f}  D={c.D:.8f}  D_d={c.D_d:.1e}")


# ## Tracking a sine
#
# For r = sin(alpha t) each iteration multiplies the steady error amplitude
# by alpha beta / sqrt(1 + alpha^2 beta^2).

# In[3]:

beta, alpha = 0.5, 1.0
ops = build_regularized(plant, beta)
stack = run_beta_iteration(plant, ops, SignalPair.tracking(harmonic(0, 1, alpha)), n=3)

gain = alpha * beta / np.sqrt(1 + (alpha * beta) ** 2)
for j, rec in enumerate(stack.records):
    tail = limsup_estimate(rec.e, stack.t, 1 / beta)
    print(f"e_{j}: tail {tail:.5f}   predicted {gain ** (j + 1):.5f}")


# The true plant driven by the accumulated control reproduces the last
# error trace:

# In[4]:

print("closed-loop gap", np.abs(stack.e_true - stack.records[-1].e).max())
