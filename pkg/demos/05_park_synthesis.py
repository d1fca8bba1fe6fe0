"""End to end on the parking problem: synthesize, then drive the system.

Identity dynamics on [0,3] x [0,2] with unit steps; the spec asks to
revisit "home" forever and to visit the "lot" whenever the environment
raises "park".  The dual abstraction decides this on the initial
six-cell partition, so a controller exists without any refinement.
"""

import os
from fractions import Fraction

from dualsynth import (
    ControlSystem,
    EnvAlphabet,
    RawSpec,
    convert_to_gr1,
    run,
    simulate,
)
from dualsynth.partition import render_svg, format_region_id

sys = ControlSystem.create(
    A=[[1, 0], [0, 1]], B=[[1, 0], [0, 1]],
    input_set=[[-1, 1], [-1, 1]],
    domain=[[0, 3], [0, 2]], initial_set=[[0, 3], [0, 2]],
    propositions=[("home", [[0, 1], [0, 1]]), ("lot", [[2, 3], [1, 2]])])
env = EnvAlphabet.create([("park", (False, True))])
spec = convert_to_gr1(RawSpec(guarantees=("home",),
                              responses=(("park", "lot"),)))

verdict = run(sys, env, spec)
print("verdict:", verdict.outcome, "after", verdict.iterations, "iteration(s)")
stats = verdict.stats[0]
print(f"leaves={stats.leaves}  winning={stats.n_winning}  "
      f"queries={stats.queries_issued}")

ctrl = verdict.controller
print("strategy memory states:", len(ctrl.strategy.memory_states))

# drive it: park raised at t=4 and t=11, otherwise quiet
script = [1 if t in (4, 11) else 0 for t in range(25)]
execution = simulate(ctrl, sys, iter(script), (0.5, 0.5), 24)
print("\n  t  park   state                region  labels")
for step in execution.steps:
    labels = ",".join(sorted(ctrl.forest.labels(step.region))) or "-"
    x, y = (float(v) for v in step.state)
    print(f" {step.t:>2}  {str(bool(step.env_valuation['park'])):>5}  "
          f"({x:4.2f}, {y:4.2f})  {format_region_id(step.region):>10}  {labels}")

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)
triple = verdict.history[0]
path = os.path.join(out, "park_partition.svg")
with open(path, "w", encoding="utf-8") as fh:
    fh.write(render_svg(sys.domain, [(format_region_id(r), b, s, l)
                                     for r, b, s, l in triple.rows]))
print("\nwrote", path, "(all cells winning, hence all green)")
