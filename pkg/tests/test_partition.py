from fractions import Fraction

import numpy as np
import pytest

from dualsynth.geometry import Box, ControlSystem
from dualsynth.partition import (
    PartitionError,
    Status,
    advance_iteration,
    format_region_id,
    initial_partition,
    locate,
    parse_region_id,
    partition_to_json,
    partition_to_svg,
    split,
    split_box,
)


def park_system():
    return ControlSystem.create(
        A=[[1, 0], [0, 1]], B=[[1, 0], [0, 1]],
        input_set=[[-1, 1], [-1, 1]],
        domain=[[0, 3], [0, 2]], initial_set=[[0, 3], [0, 2]],
        propositions=[("home", [[0, 1], [0, 1]]), ("lot", [[2, 3], [1, 2]])])


def goal_system():
    return ControlSystem.create(
        A=[[1.5, 0], [0, 1.5]], B=[[1, 0], [0, 1]],
        input_set=[[-1, 1], [-1, 1]],
        domain=[[0, 4], [0, 4]], initial_set=[[3, 3.5], [3, 3.5]],
        propositions=[("goal", [[0, 0.5], [0, 0.5]]),
                      ("start", [[3, 3.5], [3, 3.5]])])


class TestInitialPartition:
    def test_park_grid_has_six_labeled_leaves(self):
        forest = initial_partition(park_system())
        assert len(forest.leaves) == 6
        labeled = {tuple(sorted(forest.labels(r))) for r in forest.leaves}
        assert ("home",) in labeled and ("lot",) in labeled
        homes = [r for r in forest.leaves if "home" in forest.labels(r)]
        lots = [r for r in forest.leaves if "lot" in forest.labels(r)]
        assert len(homes) == 1 and len(lots) == 1
        assert forest.box(homes[0]).as_float_bounds() == [[0, 1], [0, 1]]

    def test_no_propositions_single_leaf(self):
        sys = ControlSystem.create(
            A=[[1]], B=[[1]], input_set=[[-1, 1]],
            domain=[[0, 5]], initial_set=[[0, 1]])
        forest = initial_partition(sys)
        assert len(forest.leaves) == 1
        assert forest.labels(forest.leaves[0]) == frozenset()

    def test_goal_start_grid(self):
        # cuts at x,y in {0.5, 3, 3.5} make a 4x4 grid
        forest = initial_partition(goal_system())
        assert len(forest.leaves) == 16
        # proposition preservation, checked directly on the coordinates
        sys = goal_system()
        for rid in forest.leaves:
            box = forest.box(rid)
            for name, region in sys.proposition_regions:
                if name in forest.labels(rid):
                    assert region.contains_box(box)
                else:
                    assert not region.overlaps_interior(box)

    def test_initial_flags_positive_measure_only(self):
        forest = initial_partition(goal_system())
        init = forest.initial_leaves()
        assert len(init) == 1
        assert forest.box(init[0]).as_float_bounds() == [[3, 3.5], [3, 3.5]]

    def test_volume_conservation(self):
        for sys in (park_system(), goal_system()):
            forest = initial_partition(sys)
            total = sum(forest.box(r).volume() for r in forest.leaves)
            assert total == sys.domain.volume()


class TestSplit:
    def test_quadrant_split(self):
        boxes = split_box(Box.from_bounds([[0, 1], [0, 1]]), 4)
        assert len(boxes) == 4
        assert sum(b.volume() for b in boxes) == 1
        assert all(b.widths() == (Fraction(1, 2), Fraction(1, 2)) for b in boxes)

    def test_split3_equal_rectangles(self):
        boxes = split_box(Box.from_bounds([[0, 4.5], [1, 2]]), 3)
        assert [b.widths() for b in boxes] == [(Fraction(3, 2), Fraction(1))] * 3

    def test_thin_box_split_along_long_axis(self):
        eps = Fraction(1, 1000)
        boxes = split_box(Box(lower=(Fraction(0), Fraction(0)),
                              upper=(eps, Fraction(1))), 4)
        assert len(boxes) == 4
        assert all(b.volume() > 0 for b in boxes)
        union = sum(b.volume() for b in boxes)
        assert union == eps
        # pairwise interior-disjoint
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                assert not a.overlaps_interior(b)

    def test_split_solved_leaf_is_error(self):
        forest = initial_partition(park_system())
        forest.set_status(forest.leaves[0], Status.WINNING)
        with pytest.raises(PartitionError):
            split(forest, forest.leaves[0], 4)


class TestAdvanceIteration:
    def test_all_winning_is_bijective_copy(self):
        forest = initial_partition(park_system())
        n = len(forest.leaves)
        advance_iteration(forest, set(forest.leaves), set(), set(), m=4)
        assert len(forest.leaves) == n
        for rid in forest.leaves:
            assert rid[-1] == 1
            assert forest.box(rid) == forest.box(rid[:-1])

    def test_fig2_shape_one_of_each(self):
        sys = ControlSystem.create(
            A=[[1, 0], [0, 1]], B=[[1, 0], [0, 1]],
            input_set=[[-1, 1], [-1, 1]],
            domain=[[0, 4.5], [0, 3]], initial_set=[[0, 4.5], [0, 3]],
            propositions=[("top", [[0, 4.5], [2, 3]]),
                          ("mid", [[0, 4.5], [1, 2]]),
                          ("bot", [[0, 4.5], [0, 1]])])
        forest = initial_partition(sys)
        assert len(forest.leaves) == 3
        by_label = {next(iter(forest.labels(r))): r for r in forest.leaves}
        advance_iteration(forest,
                          winning={by_label["top"]},
                          losing={by_label["bot"]},
                          maybe={by_label["mid"]}, m=3)
        assert len(forest.leaves) == 5
        maybe_children = [r for r in forest.leaves if r[:-1] == by_label["mid"]]
        assert len(maybe_children) == 3

    def test_leaf_count_formula(self):
        forest = initial_partition(goal_system())
        leaves = list(forest.leaves)
        k = 5
        maybe = set(leaves[:k])
        winning = set(leaves[k:])
        advance_iteration(forest, winning, set(), maybe, m=4)
        assert len(forest.leaves) == 16 + 3 * k

    def test_non_partition_rejected(self):
        forest = initial_partition(park_system())
        with pytest.raises(PartitionError):
            advance_iteration(forest, set(forest.leaves[:2]), set(), set(), m=4)

    def test_min_cell_pass_through(self):
        forest = initial_partition(park_system())
        advance_iteration(forest, set(), set(), set(forest.leaves), m=4,
                          min_cell=Fraction(10))
        # nothing was splittable: every leaf got one pass-through child
        assert all(rid[-1] == 1 for rid in forest.leaves)

    def test_solved_boxes_never_change(self):
        forest = initial_partition(goal_system())
        leaves = list(forest.leaves)
        winning = {leaves[0]}
        losing = {leaves[1]}
        maybe = set(leaves[2:])
        boxes_before = {r: forest.box(r) for r in (leaves[0], leaves[1])}
        for _ in range(3):
            advance_iteration(forest, winning, losing, maybe, m=4)
            winning = {r for r in forest.leaves if r[: len(leaves[0])] == leaves[0]}
            losing = {r for r in forest.leaves if r[: len(leaves[1])] == leaves[1]}
            maybe = set(forest.leaves) - winning - losing
            assert len(winning) == 1 and len(losing) == 1
            assert forest.box(next(iter(winning))) == boxes_before[leaves[0]]
            assert forest.box(next(iter(losing))) == boxes_before[leaves[1]]

    def test_forest_depth_bounded_by_iterations(self):
        forest = initial_partition(park_system())
        for _ in range(3):
            advance_iteration(forest, set(), set(), set(forest.leaves), m=4)
        assert all(forest.depth(r) <= forest.iteration for r in forest.leaves)

    def test_leaves_tile_domain_across_refinements(self):
        sys = goal_system()
        forest = initial_partition(sys)
        rng = np.random.default_rng(41)
        for k in range(3):
            leaves = list(forest.leaves)
            cut = max(1, len(leaves) // 3)
            advance_iteration(forest, set(leaves[:cut]), set(leaves[cut:2 * cut]),
                              set(leaves[2 * cut:]), m=int(rng.integers(2, 6)))
            # exact tiling: volumes sum exactly, interiors stay disjoint
            assert sum(forest.box(r).volume() for r in forest.leaves) == \
                sys.domain.volume()
            sample = [forest.leaves[int(i)] for i in
                      rng.integers(0, len(forest.leaves), size=12)]
            for a in sample:
                for b in sample:
                    if a != b:
                        assert not forest.box(a).overlaps_interior(forest.box(b))


class TestLocate:
    def test_home_point(self):
        forest = initial_partition(park_system())
        rid = locate(forest, (0.5, 0.5))
        assert "home" in forest.labels(rid)

    def test_corner_tie_break_lexicographic(self):
        forest = initial_partition(park_system())
        rid = locate(forest, (1, 1))  # shared corner of 4 cells
        candidates = [r for r in forest.leaves
                      if forest.box(r).contains((Fraction(1), Fraction(1)))]
        assert len(candidates) == 4
        assert rid == min(candidates)

    def test_outside_domain_is_error(self):
        forest = initial_partition(park_system())
        with pytest.raises(PartitionError):
            locate(forest, (10, 10))

    def test_random_points_unique_and_label_consistent(self):
        sys = goal_system()
        forest = initial_partition(sys)
        advance_iteration(forest, set(), set(), set(forest.leaves), m=4)
        rng = np.random.default_rng(3)
        for _ in range(1000):
            pt = (Fraction(int(rng.integers(0, 4000)), 1000),
                  Fraction(int(rng.integers(0, 4000)), 1000))
            rid = locate(forest, pt)
            assert forest.box(rid).contains(pt)
            # labels agree with direct membership up to boundary slop:
            # interior points decide exactly
            for name, region in sys.proposition_regions:
                strictly_inside = all(
                    lo < v < hi for lo, v, hi in
                    zip(region.lower, pt, region.upper))
                if strictly_inside:
                    assert name in forest.labels(rid)
                strictly_outside = any(
                    v < lo or v > hi for lo, v, hi in
                    zip(region.lower, pt, region.upper))
                if strictly_outside:
                    assert name not in forest.labels(rid)


class TestExports:
    def test_json_roundtrip_fields(self):
        forest = initial_partition(park_system())
        data = partition_to_json(forest)
        assert len(data) == 6
        assert {d["region_id"] for d in data} == \
            {format_region_id(r) for r in forest.leaves}
        assert all(set(d) == {"region_id", "box", "status", "labels"}
                   for d in data)

    def test_region_id_string_roundtrip(self):
        rid = (3, 1, 4)
        assert parse_region_id(format_region_id(rid)) == rid

    def test_svg_colors_match_statuses(self):
        forest = initial_partition(park_system())
        statuses = [Status.WINNING, Status.LOSING, Status.MAYBE,
                    Status.UNEXPLORED, Status.WINNING, Status.MAYBE]
        for rid, st in zip(forest.leaves, statuses):
            forest.set_status(rid, st)
        svg = partition_to_svg(forest)
        assert svg.count("#2ca02c") == 2
        assert svg.count("#d62728") == 1
        assert svg.count("#ffd92f") == 2
        assert svg.count("#c7c7c7") == 1
