"""
Persuading a judge with one shared message
==========================================

A prosecutor (the encoder) wants a conviction. The judge (decoder 2) convicts
only when the posterior probability of guilt is at least one half. With a
prior of 0.3 the judge acquits, so an uninformative prosecutor loses every
time. Sending one message that both decoders read lets the prosecutor split
the prior into two beliefs: certain innocence, and a belief just past the
judge's threshold.
"""

import numpy as np

from stratref.game import psi_e
from stratref.instances import prosecutor
from stratref.oracle import grid_oracle_dstar
from stratref.solver import solve

g = prosecutor(prior_guilty=0.3)

# The encoder's worst-case distortion as a function of the shared belief.
# It jumps from 1 (acquit) to 0 (convict) at the judge's threshold, and the
# judge acquits when exactly indifferent.
print("belief P(guilty)   distortion")
for x in (0.0, 0.2, 0.3, 0.49, 0.5, 0.51, 0.8, 1.0):
    print(f"  {x:4.2f}              {psi_e([1 - x, x], g):.0f}")

# Best achievable value with a full bit for the shared message.
res = solve(g, (0.0, 1.0))
print(f"\nsolver value       {res.value:.6f}  (certified lower bound {res.lower_bound:.6f})")

# The realised strategy: P(message | u) and the posterior each message induces.
q = res.strategy.channel_w2
joint = g.prior[:, None] * q
used = joint.sum(axis=0) > 1e-12
print("message  weight   P(guilty | message)")
for w in np.flatnonzero(used):
    weight = joint[:, w].sum()
    print(f"  {w}      {weight:.4f}   {joint[1, w] / weight:.6f}")

# An exhaustive search over two-point belief splits agrees.
oracle = grid_oracle_dstar(g, (0.0, 1.0), resolution=0.01)
print(f"\nbelief-split oracle {oracle.value:.6f}, split {oracle.argmin_description['shared']}")
print("closed form 1 - 0.3 / 0.5 =", 1 - 0.3 / 0.5)
