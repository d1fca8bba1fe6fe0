"""The proposition-preserving partition and how refinement evolves it.

The initial partition is the axis grid induced by the labeled regions,
so every cell has one consistent label set.  Refinement never touches
solved cells: winning and losing leaves get a pass-through child with
the identical box, undecided leaves are split into equal sub-boxes.
"""

import os

from dualsynth import ControlSystem, Status, advance_iteration, initial_partition, locate
from dualsynth.partition import format_region_id, partition_to_svg, split_box
from dualsynth.geometry import Box

sys = ControlSystem.create(
    A=[[1, 0], [0, 1]], B=[[1, 0], [0, 1]],
    input_set=[[-1, 1], [-1, 1]],
    domain=[[0, 3], [0, 2]], initial_set=[[0, 3], [0, 2]],
    propositions=[("home", [[0, 1], [0, 1]]), ("lot", [[2, 3], [1, 2]])])

forest = initial_partition(sys)
print(f"initial partition: {len(forest.leaves)} leaves")
for rid in forest.leaves:
    labels = ",".join(sorted(forest.labels(rid))) or "-"
    print(f"  {format_region_id(rid):>6}  {forest.box(rid)}  [{labels}]")

print("\nlocate((0.5, 0.5)) ->", format_region_id(locate(forest, (0.5, 0.5))),
      "which carries", set(forest.labels(locate(forest, (0.5, 0.5)))))

# split_m produces equal sub-boxes, slicing longest sides first
print("\nsplit_3 of a 4.5 x 1 strip:",
      [str(b) for b in split_box(Box.from_bounds([[0, 4.5], [1, 2]]), 3)])

# pretend the solver classified the leaves, then refine
leaves = list(forest.leaves)
winning, losing, maybe = {leaves[0]}, {leaves[5]}, set(leaves[1:5])
advance_iteration(forest, winning, losing, maybe, m=4,
                  initial_set=sys.initial_set)
print(f"\nafter one refinement round: {len(forest.leaves)} leaves "
      f"(1 winning pass-through, 1 losing pass-through, 4x4 maybe children)")

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)
for rid in forest.leaves:
    parent = forest.nodes[rid].parent
    forest.set_status(rid, forest.nodes[parent].status
                      if forest.nodes[parent].status != Status.MAYBE
                      else Status.UNEXPLORED)
path = os.path.join(out, "partition_after_split.svg")
with open(path, "w", encoding="utf-8") as fh:
    fh.write(partition_to_svg(forest))
print("wrote", path)
