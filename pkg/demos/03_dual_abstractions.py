"""Under- and over-approximating one system with two transition systems.

A drift field (always downward, slight rightward bias for some inputs)
over four quadrants: dropping down is certain from everywhere in the top
row, hopping sideways is possible only from points near the right edge.
The pessimistic system keeps only certain moves, the optimistic one adds
the merely possible; every pessimistic edge is also optimistic.
"""

import os
from fractions import Fraction

from dualsynth import ControlSystem, EnvAlphabet, build_initial, initial_partition

sys = ControlSystem.create(
    A=[[1, 0], [0, 1]], B=[[1, 0], [0, 1]],
    input_set=[[Fraction(-1, 4), Fraction(1, 4)],
               [Fraction(-6, 5), Fraction(-4, 5)]],
    domain=[[0, 2], [0, 2]], initial_set=[[0, 2], [0, 2]],
    propositions=[("tl", [[0, 1], [1, 2]]), ("tr", [[1, 2], [1, 2]]),
                  ("bl", [[0, 1], [0, 1]]), ("br", [[1, 2], [0, 1]])])

forest = initial_partition(sys)
pair = build_initial(forest, sys, EnvAlphabet.create([]))

name = {rid: next(iter(forest.labels(rid))) for rid in forest.leaves}
pess = sorted((name[a], name[b]) for a, b in pair.pess_pairs())
opt_only = sorted((name[a], name[b]) for a, b in pair.opt_pairs()
                  if (a, b) not in set(pair.pess_pairs()))

print("pessimistic edges (certain moves):")
for a, b in pess:
    print(f"  {a} -> {b}")
print("optimistic-only edges (possible for some starting points):")
for a, b in opt_only:
    print(f"  {a} -> {b}")

pair.check_invariants()
print("\npessimistic subset-of optimistic: holds")
print(f"queries issued for the initial build: {pair.query_stats.issued}")

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)
path = os.path.join(out, "dual_abstraction.dot")
with open(path, "w", encoding="utf-8") as fh:
    fh.write(pair.to_dot())
print("wrote", path, "(solid = pessimistic, dashed = optimistic only)")
