"""The iterative synthesis loop and the lifted continuous controller.

Per iteration: solve the GR(1) game on the pessimistic FTS (regions
winning there are winning for the real system) and on the optimistic FTS
(regions losing there are losing for the real system), then apply the
three-case decision:

1. every initial region winning -> realizable, extract and lift a
   controller;
2. the initial set meets the losing region with positive measure ->
   unrealizable, report the witness boxes;
3. otherwise split the undecided regions and refine both FTSs.

Children of solved regions inherit their verdicts (their boxes are
untouched and their edges are copied or removed wholesale), so the game
solver is seeded with them instead of re-deriving them; a debug flag
re-solves from scratch and checks both routes agree.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction

from dualsynth.abstraction import (
    AbstractionPair,
    EnvAlphabet,
    build_initial,
    reachability_queries_saved,
    refine,
)
from dualsynth.geometry import Box, ControlSystem, input_witness, mat_vec
from dualsynth.gr1 import (
    GameGraph,
    Gr1Spec,
    SpecError,
    StrategyAutomaton,
    eval_formula,
    solve_game,
)
from dualsynth.partition import (
    PartitionForest,
    RegionId,
    Status,
    advance_iteration,
    format_region_id,
    initial_partition,
    locate,
)

logger = logging.getLogger(__name__)


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class EngineOptions:
    m: int | None = None          # default: 2^n children per split
    max_iters: int = 20
    min_cell: Fraction = Fraction(1, 1000)
    threads: int = 1
    rebuild_check: bool = False


@dataclass(frozen=True)
class SetTriple:
    """One iteration's three-way classification plus the leaf geometry."""
    iteration: int
    winning: frozenset
    losing: frozenset
    maybe: frozenset
    rows: tuple  # (region id, Box, Status, labels) per leaf

    def boxes(self, which: str) -> list[Box]:
        sets = {"winning": self.winning, "losing": self.losing,
                "maybe": self.maybe}[which]
        return [box for rid, box, _st, _lb in self.rows if rid in sets]


@dataclass
class IterationStats:
    iteration: int
    leaves: int
    n_winning: int
    n_losing: int
    n_maybe: int
    queries_issued: int
    queries_saved: int
    wall_time: float

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration, "leaves": self.leaves,
            "winning": self.n_winning, "losing": self.n_losing,
            "maybe": self.n_maybe, "queries_issued": self.queries_issued,
            "queries_saved": self.queries_saved,
            "wall_time_s": round(self.wall_time, 6),
        }


@dataclass
class Verdict:
    outcome: str                  # "realizable" | "unrealizable" | "unknown"
    iterations: int
    controller: "ContinuousController | None" = None
    witness: list[Box] = field(default_factory=list)
    reason: str | None = None
    stats: list[IterationStats] = field(default_factory=list)
    history: list[SetTriple] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "iterations": self.iterations,
            "witness": [b.as_float_bounds() for b in self.witness],
            "reason": self.reason,
            "stats": [s.to_json() for s in self.stats],
        }


def _region_graph(pair: AbstractionPair, forest: PartitionForest,
                  spec: Gr1Spec, which: str) -> GameGraph:
    edges = pair.pess_edges if which == "pess" else pair.opt_edges
    labels = {r: forest.labels(r) for r in pair.regions}
    return GameGraph(pair.regions, edges, labels,
                     pair.env.valuations, spec)


def classify(pair: AbstractionPair, forest: PartitionForest, spec: Gr1Spec,
             seeds_winning=frozenset(), seeds_losing=frozenset()) -> SetTriple:
    """Three-way region classification from both solved games.

    A region is winning only when its game states are winning for every
    environment valuation, and losing only when they are winning for
    none; everything else stays maybe.
    """
    pess_graph = _region_graph(pair, forest, spec, "pess")
    opt_graph = _region_graph(pair, forest, spec, "opt")
    sol_p = solve_game(pess_graph, forced_winning_regions=seeds_winning,
                       forced_losing_regions=seeds_losing,
                       extract_strategy=False)
    sol_o = solve_game(opt_graph, forced_winning_regions=seeds_winning,
                       forced_losing_regions=seeds_losing,
                       extract_strategy=False)
    winning = frozenset(sol_p.region_winning)
    n_env = len(pair.env)
    losing = frozenset(
        r for r in pair.regions
        if all((r, e) not in sol_o.winning for e in range(n_env)))
    if winning & losing:
        raise AssertionError("a region classified both winning and losing; "
                             "the dual abstractions are inconsistent")
    maybe = frozenset(pair.regions) - winning - losing
    for rid in pair.regions:
        forest.set_status(rid, Status.WINNING if rid in winning else
                          Status.LOSING if rid in losing else Status.MAYBE)
    rows = tuple((rid, forest.box(rid), forest.status(rid), forest.labels(rid))
                 for rid in pair.regions)
    return SetTriple(iteration=pair.iteration, winning=winning,
                     losing=losing, maybe=maybe, rows=rows)


def _initial_regions_under(forest: PartitionForest, spec: Gr1Spec):
    """Initial leaves, narrowed by the init assumption when present."""
    out = []
    for rid in forest.initial_leaves():
        if spec.init_assumption is not None and not eval_formula(
                spec.init_assumption, forest.labels(rid), {}, {}):
            continue
        out.append(rid)
    return out


def _losing_witness(forest: PartitionForest, losing, initial_set: Box,
                    spec: Gr1Spec) -> list[Box]:
    """Losing leaf boxes meeting the initial set with positive measure.

    Face-only contact is not a witness: under the closed-box convention a
    shared face also belongs to the (possibly winning) neighbor, so only
    full-dimensional overlap proves a genuinely losing initial point.
    """
    out = []
    for rid in sorted(losing):
        if spec.init_assumption is not None and not eval_formula(
                spec.init_assumption, forest.labels(rid), {}, {}):
            continue
        if forest.box(rid).overlaps_interior(initial_set):
            out.append(forest.box(rid))
    return out


def run(sys: ControlSystem, env: EnvAlphabet, spec: Gr1Spec,
        opts: EngineOptions = EngineOptions()) -> Verdict:
    """Decide realizability by iterative dual-abstraction refinement."""
    m = opts.m if opts.m is not None else 2 ** sys.n
    if m < 1:
        raise EngineError("split arity must be positive")
    forest = initial_partition(sys)
    pair = build_initial(forest, sys, env, threads=opts.threads)
    verdict = Verdict(outcome="unknown", iterations=0)
    seeds_w: frozenset = frozenset()
    seeds_l: frozenset = frozenset()

    for iteration in range(opts.max_iters + 1):
        t0 = time.perf_counter()
        triple = classify(pair, forest, spec, seeds_w, seeds_l)
        if opts.rebuild_check and (seeds_w or seeds_l):
            fresh = classify(pair, forest, spec)
            if (fresh.winning, fresh.losing) != (triple.winning, triple.losing):
                raise AssertionError(
                    "warm-started classification disagrees with from-scratch "
                    f"solving at iteration {iteration}")
        verdict.history.append(triple)
        stats = IterationStats(
            iteration=iteration, leaves=len(pair.regions),
            n_winning=len(triple.winning), n_losing=len(triple.losing),
            n_maybe=len(triple.maybe),
            queries_issued=pair.query_stats.issued,
            queries_saved=reachability_queries_saved(pair),
            wall_time=0.0)
        verdict.stats.append(stats)
        verdict.iterations = iteration + 1

        initial_regions = _initial_regions_under(forest, spec)
        if not initial_regions:
            raise EngineError("no initial region satisfies the init "
                              "assumption; check the problem file")
        if all(r in triple.winning for r in initial_regions):
            strategy = _extract_final_strategy(pair, forest, spec)
            controller = ContinuousController(
                sys=sys, env=env, spec=spec, forest=forest,
                strategy=strategy)
            verdict.outcome = "realizable"
            verdict.controller = controller
            stats.wall_time = time.perf_counter() - t0
            logger.info("realizable after %d iteration(s)", iteration + 1)
            return verdict
        witness = _losing_witness(forest, triple.losing, sys.initial_set, spec)
        if witness:
            verdict.outcome = "unrealizable"
            verdict.witness = witness
            stats.wall_time = time.perf_counter() - t0
            logger.info("unrealizable after %d iteration(s); %d witness boxes",
                        iteration + 1, len(witness))
            return verdict
        if iteration == opts.max_iters:
            verdict.reason = f"iteration budget exhausted (max_iters={opts.max_iters})"
            stats.wall_time = time.perf_counter() - t0
            return verdict

        advance_iteration(forest, set(triple.winning), set(triple.losing),
                          set(triple.maybe), m=m, min_cell=opts.min_cell,
                          initial_set=sys.initial_set)
        # no maybe leaf could be split: a finer partition is unreachable
        split_happened = any(
            len(forest.nodes[r].children) > 1 for r in triple.maybe)
        if not split_happened:
            verdict.reason = (f"every undecided region is already at the "
                              f"minimum cell size (min_cell={opts.min_cell})")
            stats.wall_time = time.perf_counter() - t0
            return verdict
        pair = refine(pair, forest, set(triple.winning), set(triple.losing),
                      set(triple.maybe), sys, threads=opts.threads)
        seeds_w = frozenset(forest.nodes[r].children[0]
                            for r in triple.winning)
        seeds_l = frozenset(forest.nodes[r].children[0]
                            for r in triple.losing)
        stats.wall_time = time.perf_counter() - t0
    return verdict


def _extract_final_strategy(pair, forest, spec) -> StrategyAutomaton:
    # one unseeded solve yields a uniform strategy over the whole winning
    # set; stitching per-iteration strategies across seeds is not needed
    graph = _region_graph(pair, forest, spec, "pess")
    sol = solve_game(graph, extract_strategy=True)
    return sol.strategy


# ---------------------------------------------------------------------------
# Continuous controller and simulation
# ---------------------------------------------------------------------------

@dataclass
class ContinuousController:
    """Discrete strategy plus a per-step input selector.

    The selector solves for an admissible input that lands exactly in the
    box the strategy prescribed; feasibility is guaranteed by the
    pessimistic reachability backing every strategy edge, so an
    infeasible step is a library bug and raises instead of patching over.
    """
    sys: ControlSystem
    env: EnvAlphabet
    spec: Gr1Spec
    forest: PartitionForest
    strategy: StrategyAutomaton

    def start_region(self, s0) -> RegionId:
        region = locate(self.forest, s0)
        if region not in self.strategy.initial:
            raise EngineError(
                f"refusing to control from {tuple(map(float, s0))}: region "
                f"{format_region_id(region)} is outside the winning set")
        return region

    def select_input(self, s, target: RegionId):
        u = input_witness(self.sys, s, self.forest.box(target))
        if u is None:
            raise AssertionError(
                f"no admissible input reaches {format_region_id(target)}; "
                f"pessimistic reachability promised one (library bug)")
        return u


@dataclass(frozen=True)
class SimStep:
    t: int
    state: tuple
    env_index: int
    env_valuation: dict
    inp: tuple | None
    region: RegionId
    bits: dict


@dataclass
class Execution:
    steps: list[SimStep]

    def region_trace(self):
        return [s.region for s in self.steps]

    def trace_states(self, forest: PartitionForest):
        """(labels, env, bits) triples, the shape ``check_lasso`` consumes."""
        return [(forest.labels(s.region), s.env_valuation, s.bits)
                for s in self.steps]


def simulate(controller: ContinuousController, sys: ControlSystem,
             env_trace, s0, steps: int) -> Execution:
    """Controlled execution of ``steps`` inputs (``steps`` + 1 records).

    ``env_trace`` yields an environment-valuation index per time step.
    The final record carries no input.  State arithmetic is exact, so the
    region trace is the strategy's discrete trace by construction, not by
    numerical luck.
    """
    s = tuple(Fraction(v) if not isinstance(v, Fraction) else v for v in s0)
    if not sys.initial_set.contains(s):
        raise EngineError(f"initial state {s0!r} is outside the initial set")
    region = controller.start_region(s)
    memory = controller.strategy.start(region)
    valuations = controller.env.valuations
    bits = controller.spec.initial_bits()
    records = []
    it = iter(env_trace)
    for t in range(steps + 1):
        try:
            e_idx = int(next(it))
        except StopIteration:
            raise EngineError(f"environment trace ended at t={t}, "
                              f"need {steps + 1} values")
        if not 0 <= e_idx < len(valuations):
            raise EngineError(f"environment index {e_idx} out of range")
        env_val = valuations[e_idx]
        bits = controller.spec.update_bits(bits, controller.forest.labels(region),
                                           env_val)
        if t == steps:
            records.append(SimStep(t, s, e_idx, env_val, None, region, dict(bits)))
            break
        memory, target = controller.strategy.step(memory, e_idx)
        u = controller.select_input(s, target)
        s_next = tuple(a + b for a, b in
                       zip(mat_vec(sys.A, s), mat_vec(sys.B, u)))
        records.append(SimStep(t, s, e_idx, env_val, u, region, dict(bits)))
        if not sys.domain.contains(s_next):
            raise AssertionError("controlled step left the domain (library bug)")
        region = target
        s = s_next
    return Execution(records)


def lift_controller(strategy: StrategyAutomaton, forest: PartitionForest,
                    sys: ControlSystem, env: EnvAlphabet,
                    spec: Gr1Spec) -> ContinuousController:
    """Package a discrete strategy as a continuous controller."""
    return ContinuousController(sys=sys, env=env, spec=spec, forest=forest,
                                strategy=strategy)
