"""Pessimistic / optimistic finite abstractions of one control system.

Both transition systems share the partition-leaf x environment state set.
A pessimistic edge means every point of the source region has an input
landing in the target region; an optimistic edge means some point does.
The environment component is a free adversary: an edge between regions
exists for every pair of environment valuations, because nothing in the
dynamics constrains the environment.

Refinement recomputes as little as possible: edges between winning
pass-through children are copied from the previous pessimistic relation
(in both systems), edges out of maybe-children are recomputed, and losing
children keep no edges at all, which is what makes their children losing
in turn.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

from dualsynth.geometry import ControlSystem, reach_optimistic, reach_pessimistic
from dualsynth.partition import PartitionForest, RegionId, format_region_id

logger = logging.getLogger(__name__)


class AbstractionError(ValueError):
    pass


@dataclass(frozen=True)
class EnvAlphabet:
    """Finite environment variables; at least one (possibly dummy) valuation."""

    variables: tuple[tuple[str, tuple], ...] = ()

    @staticmethod
    def create(variables) -> "EnvAlphabet":
        out = []
        seen = set()
        for name, values in variables:
            values = tuple(values)
            if not values:
                raise AbstractionError(f"environment variable {name!r} needs "
                                       f"a nonempty finite domain")
            if name in seen:
                raise AbstractionError(f"duplicate environment variable {name!r}")
            seen.add(name)
            out.append((name, values))
        return EnvAlphabet(tuple(out))

    @property
    def valuations(self) -> list[dict]:
        if not self.variables:
            return [{}]
        names = [n for n, _ in self.variables]
        domains = [vs for _, vs in self.variables]
        return [dict(zip(names, combo)) for combo in product(*domains)]

    def __len__(self) -> int:
        n = 1
        for _, vs in self.variables:
            n *= len(vs)
        return n


@dataclass
class QueryStats:
    """Reachability-query accounting for one build or refine step."""
    issued_pess: int = 0
    issued_opt: int = 0
    n_states: int = 0

    @property
    def issued(self) -> int:
        return self.issued_pess + self.issued_opt

    @property
    def naive(self) -> int:
        return 2 * self.n_states * self.n_states


@dataclass
class AbstractionPair:
    """The two FTSs of one iteration, on leaves x environment valuations.

    Edges are stored per region pair; the environment blow-up is uniform
    by construction and materialized only on export.
    """

    regions: list[RegionId]
    initial_regions: list[RegionId]
    env: EnvAlphabet
    pess_edges: dict[RegionId, list[RegionId]]
    opt_edges: dict[RegionId, list[RegionId]]
    iteration: int = 0
    query_stats: QueryStats = field(default_factory=QueryStats)

    def pess_pairs(self):
        for a, outs in sorted(self.pess_edges.items()):
            for b in outs:
                yield a, b

    def opt_pairs(self):
        for a, outs in sorted(self.opt_edges.items()):
            for b in outs:
                yield a, b

    def game_states(self):
        for r in self.regions:
            for e in range(len(self.env)):
                yield (r, e)

    def check_invariants(self) -> None:
        pess = {(a, b) for a, b in self.pess_pairs()}
        opt = {(a, b) for a, b in self.opt_pairs()}
        if not pess <= opt:
            raise AssertionError("pessimistic edges must be a subset of "
                                 "optimistic edges")

    def to_json(self) -> dict:
        n_env = len(self.env)

        def blowup(pairs):
            return [
                {"from": [format_region_id(a), ea],
                 "to": [format_region_id(b), eb]}
                for a, b in pairs
                for ea in range(n_env) for eb in range(n_env)]

        return {
            "iteration": self.iteration,
            "states": [[format_region_id(r), e] for r, e in self.game_states()],
            "initial": [[format_region_id(r), e]
                        for r in self.initial_regions
                        for e in range(n_env)],
            "pess_edges": blowup(self.pess_pairs()),
            "opt_edges": blowup(self.opt_pairs()),
        }

    def to_dot(self) -> str:
        lines = ["digraph abstraction {"]
        for r in self.regions:
            shape = "doublecircle" if r in set(self.initial_regions) else "circle"
            lines.append(f'  "{format_region_id(r)}" [shape={shape}];')
        pess = {(a, b) for a, b in self.pess_pairs()}
        for a, b in sorted(pess):
            lines.append(f'  "{format_region_id(a)}" -> '
                         f'"{format_region_id(b)}";')
        for a, b in self.opt_pairs():
            if (a, b) not in pess:
                lines.append(f'  "{format_region_id(a)}" -> '
                             f'"{format_region_id(b)}" [style=dashed];')
        lines.append("}")
        return "\n".join(lines)


def build_initial(forest: PartitionForest, sys: ControlSystem,
                  env: EnvAlphabet, threads: int = 1) -> AbstractionPair:
    """Reachability analysis over every ordered pair of initial leaves."""
    if forest.iteration != 0:
        raise AbstractionError("build_initial expects an unrefined partition")
    regions = list(forest.leaves)
    stats = QueryStats(n_states=len(regions))
    pess = {r: [] for r in regions}
    opt = {r: [] for r in regions}
    pairs = [(a, b) for a in regions for b in regions]
    for a, b, p, o in _run_queries(forest, sys, pairs, stats, threads):
        if p:
            pess[a].append(b)
        if o:
            opt[a].append(b)
    pair = AbstractionPair(regions=regions,
                           initial_regions=list(forest.initial_leaves()),
                           env=env, pess_edges=pess, opt_edges=opt,
                           iteration=0, query_stats=stats)
    pair.check_invariants()
    logger.info("initial abstraction: %d regions, %d/%d pess/opt edges",
                len(regions), sum(len(v) for v in pess.values()),
                sum(len(v) for v in opt.values()))
    return pair


def _run_queries(forest, sys, pairs, stats, threads):
    def work(ab):
        a, b = ab
        p = reach_pessimistic(forest.box(a), forest.box(b), sys)
        o = p or reach_optimistic(forest.box(a), forest.box(b), sys)
        return a, b, p, o

    stats.issued_pess += len(pairs)
    stats.issued_opt += len(pairs)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, pairs))
    return [work(ab) for ab in pairs]


def refine(pair: AbstractionPair, forest_next: PartitionForest,
           winning: set[RegionId], losing: set[RegionId],
           maybe: set[RegionId], sys: ControlSystem,
           threads: int = 1) -> AbstractionPair:
    """Next-iteration FTS pair from the three-way classification.

    Pessimistic edges: copies of the old pessimistic relation between
    winning pass-through children, recomputed universal reachability from
    maybe-children to winning pass-throughs and between maybe-children.
    Optimistic edges: the same copied pessimistic edges between winning
    children (deliberately not the old optimistic ones), recomputed
    existential reachability for the maybe rows.  Losing children get no
    edges in either system.
    """
    if forest_next.iteration != pair.iteration + 1:
        raise AbstractionError(
            f"forest at iteration {forest_next.iteration} cannot refine an "
            f"abstraction at iteration {pair.iteration}")
    old = set(pair.regions)
    if not (winning | losing | maybe) == old:
        raise AbstractionError("winning/losing/maybe must partition the "
                               "abstraction's regions")

    def children(r):
        return forest_next.nodes[r].children

    w_children = {r: children(r)[0] for r in winning}
    m_children = sorted(c for r in maybe for c in children(r))
    regions = sorted(forest_next.leaves)
    stats = QueryStats(n_states=len(regions))
    pess = {r: [] for r in regions}
    opt = {r: [] for r in regions}

    # WW: copy the old pessimistic relation, in both systems
    old_pess = {(a, b) for a, b in pair.pess_pairs()}
    for a, b in sorted(old_pess):
        if a in winning and b in winning:
            pess[w_children[a]].append(w_children[b])
            opt[w_children[a]].append(w_children[b])

    # MW and MM rows need fresh reachability queries
    w_targets = sorted(w_children.values())
    pairs = [(c, t) for c in m_children for t in w_targets]
    pairs += [(c, d) for c in m_children for d in m_children]
    for a, b, p, o in _run_queries(forest_next, sys, pairs, stats, threads):
        if p:
            pess[a].append(b)
        if o:
            opt[a].append(b)

    for r in pess:
        pess[r] = sorted(set(pess[r]))
        opt[r] = sorted(set(opt[r]))

    out = AbstractionPair(regions=regions,
                          initial_regions=list(forest_next.initial_leaves()),
                          env=pair.env, pess_edges=pess, opt_edges=opt,
                          iteration=pair.iteration + 1, query_stats=stats)
    out.check_invariants()
    losing_children = {children(r)[0] for r in losing}
    for r, outs in out.opt_edges.items():
        if r in losing_children and outs:
            raise AssertionError("losing children must stay edge-free")
    logger.info("refined abstraction: %d regions, %d queries issued "
                "(%d saved vs naive)", len(regions), stats.issued,
                reachability_queries_saved(out, stats))
    return out


def reachability_queries_saved(pair: AbstractionPair,
                               stats: QueryStats | None = None) -> int:
    """Queries a naive all-pairs rebuild would have issued but we did not."""
    stats = stats or pair.query_stats
    return stats.naive - stats.issued
