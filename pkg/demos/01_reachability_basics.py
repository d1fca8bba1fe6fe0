"""One-step reachability between boxes, decided exactly.

The two relations driving everything else:

* pessimistic  R_p(X, Y): EVERY point of X has an admissible input
  landing in Y -- certainty, used to prove controllers exist;
* optimistic   R_o(X, Y): SOME point of X does -- possibility, used to
  prove controllers cannot exist.

Arithmetic is exact rationals, so boundary cases (a step landing exactly
on a face) are decided correctly instead of by floating-point luck.
"""

from fractions import Fraction

from dualsynth import Box, ControlSystem, reach_optimistic, reach_pessimistic

sys = ControlSystem.create(
    A=[[1, 0], [0, 1]], B=[[1, 0], [0, 1]],
    input_set=[[-1, 1], [-1, 1]],
    domain=[[0, 4], [0, 4]], initial_set=[[0, 4], [0, 4]])

print("identity dynamics s' = s + u with |u|_inf <= 1 on [0,4]^2\n")

cases = [
    ("adjacent boxes, every point can shift over",
     Box.from_bounds([[0, 1], [0, 1]]), Box.from_bounds([[0.5, 1.5], [0.5, 1.5]])),
    ("far boxes, nobody can jump 2.5 in one step",
     Box.from_bounds([[3, 3.5], [3, 3.5]]), Box.from_bounds([[0, 0.5], [0, 0.5]])),
    ("corner-to-corner: reachable only from the near corner",
     Box.from_bounds([[2.5, 3], [2.5, 3]]), Box.from_bounds([[1, 1.5], [1, 1.5]])),
]

for title, X, Y in cases:
    p = reach_pessimistic(X, Y, sys)
    o = reach_optimistic(X, Y, sys)
    print(f"{title}\n  X = {X}\n  Y = {Y}\n  R_p = {p}   R_o = {o}\n")

# the boundary case that floating point would get wrong one day: from
# (2.5, 2.5) the input (-1, -1) lands EXACTLY on the corner (1.5, 1.5)
X = Box.from_bounds([[2.5, 3], [2.5, 3]])
Y = Box(lower=(Fraction(1), Fraction(1)),
        upper=(Fraction(3, 2), Fraction(3, 2)))
print("exact-boundary case: X =", X, " Y =", Y)
print("  R_o =", reach_optimistic(X, Y, sys),
      " (witness lands exactly on Y's corner)")

# weakening: certainty implies possibility, never the other way around
assert not (reach_pessimistic(X, Y, sys) and not reach_optimistic(X, Y, sys))
print("\nR_p implies R_o, as it must.")
