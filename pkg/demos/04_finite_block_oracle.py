"""
Short blocks versus the single-letter optimum
=============================================

For one and two source symbols the best block code can be found by brute
force over a lattice of encodings. The block values sit above the
single-letter optimum, and two-symbol blocks do at least as well as one
symbol used twice.
"""

import numpy as np

from stratref.instances import aligned_hamming, threshold_instance
from stratref.oracle import brute_force_game_value, grid_oracle_dstar
from stratref.solver import solve

rng = np.random.default_rng(5)
games = [aligned_hamming(), threshold_instance(rng, name="threshold")]

for g in games:
    print(f"\n{g.name}")
    print("   r1    r2    D*      D^1     D^2    lattice D*")
    for r in [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5), (1.0, 1.0)]:
        dstar = solve(g, r).value
        d1 = brute_force_game_value(g, r, 1).value
        d2 = brute_force_game_value(g, r, 2).value
        lat = grid_oracle_dstar(g, r, 0.02).value
        print(f"  {r[0]:.2f}  {r[1]:.2f}  {dstar:.4f}  {d1:.4f}  {d2:.4f}  {lat:.4f}")

# At r = (0.5, 0.5) one symbol gets no message at all (2^floor(0.5) = 1),
# while two symbols share one bit per decoder.
