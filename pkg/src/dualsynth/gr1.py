"""GR(1) specifications, explicit-state game solving, strategy extraction.

The winning condition is
``(and_i always-eventually p_i) -> (and_j always-eventually q_j)``
over plays in which the environment reveals its valuation first and the
system replies with a successor region; the controller may also carry
finite memory bits (used to encode response obligations).

The solver runs the standard three-nested fixpoint for Streett(1)/GR(1)
games (Piterman, Pnueli, Sa'ar, "Synthesis of Reactive(1) Designs"),
explicit-state, with guarantee-index round-robin sweeps.  Strategies are
extracted from the recorded fixpoint layers: advance the goal pointer
when the current guarantee is satisfied, otherwise descend the attractor
ranks, otherwise dwell inside an assumption-violating trap.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)


class SpecError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Boolean formulas over labels, environment variables, and memory bits
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(->|&&|\|\||[()&|!=]|[A-Za-z_][A-Za-z0-9_]*|-?\d+)")
_TEMPORAL = {"[]", "<>", "□", "◇", "○", "U_op"}

TRUE = ("true",)
FALSE = ("false",)


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        for bad in ("[]", "<>", "□", "◇", "○"):
            if text.startswith(bad, pos):
                raise SpecError(
                    f"temporal operator {bad!r} is not allowed inside a "
                    f"Boolean formula: {text!r}")
        m = _TOKEN.match(text, pos)
        if not m:
            raise SpecError(f"cannot tokenize {text[pos:]!r} in formula {text!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def parse_formula(text: str):
    """Parse ``!``, ``&``, ``|``, ``->``, parentheses, atoms, ``var=value``."""
    tokens = _tokenize(text)
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def take(expected=None):
        tok = peek()
        if tok is None:
            raise SpecError(f"unexpected end of formula {text!r}")
        if expected is not None and tok != expected:
            raise SpecError(f"expected {expected!r}, found {tok!r} in {text!r}")
        pos[0] += 1
        return tok

    def primary():
        tok = take()
        if tok == "(":
            e = implication()
            take(")")
            return e
        if tok == "!":
            return ("not", primary())
        if tok in ("true", "True"):
            return TRUE
        if tok in ("false", "False"):
            return FALSE
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise SpecError(f"unexpected token {tok!r} in formula {text!r}")
        if peek() == "=":
            take("=")
            lit = take()
            if re.fullmatch(r"-?\d+", lit):
                value = int(lit)
            elif lit in ("true", "True"):
                value = True
            elif lit in ("false", "False"):
                value = False
            else:
                value = lit
            return ("eq", tok, value)
        return ("atom", tok)

    def conjunction():
        e = primary()
        while peek() in ("&", "&&"):
            take()
            e = ("and", e, primary())
        return e

    def disjunction():
        e = conjunction()
        while peek() in ("|", "||"):
            take()
            e = ("or", e, conjunction())
        return e

    def implication():
        e = disjunction()
        if peek() == "->":
            take()
            return ("imp", e, implication())
        return e

    expr = implication()
    if peek() is not None:
        raise SpecError(f"trailing token {peek()!r} in formula {text!r}")
    return expr


def eval_formula(expr, labels, env, bits) -> bool:
    op = expr[0]
    if op == "true":
        return True
    if op == "false":
        return False
    if op == "atom":
        name = expr[1]
        if name in bits:
            return bits[name]
        if name in env:
            return bool(env[name])
        return name in labels
    if op == "eq":
        name = expr[1]
        if name not in env:
            raise SpecError(f"{name!r} is not an environment variable")
        return env[name] == expr[2]
    if op == "not":
        return not eval_formula(expr[1], labels, env, bits)
    if op == "and":
        return eval_formula(expr[1], labels, env, bits) and \
            eval_formula(expr[2], labels, env, bits)
    if op == "or":
        return eval_formula(expr[1], labels, env, bits) or \
            eval_formula(expr[2], labels, env, bits)
    if op == "imp":
        return (not eval_formula(expr[1], labels, env, bits)) or \
            eval_formula(expr[2], labels, env, bits)
    raise SpecError(f"unknown operator {op!r}")


def formula_atoms(expr) -> set[str]:
    op = expr[0]
    if op in ("atom", "eq"):
        return {expr[1]}
    if op == "not":
        return formula_atoms(expr[1])
    if op in ("and", "or", "imp"):
        return formula_atoms(expr[1]) | formula_atoms(expr[2])
    return set()


def format_formula(expr) -> str:
    op = expr[0]
    if op == "true":
        return "true"
    if op == "false":
        return "false"
    if op == "atom":
        return expr[1]
    if op == "eq":
        v = expr[2]
        return f"{expr[1]}={str(v).lower() if isinstance(v, bool) else v}"
    if op == "not":
        return f"!{format_formula(expr[1])}"
    if op in ("and", "or", "imp"):
        sym = {"and": "&", "or": "|", "imp": "->"}[op]
        return f"({format_formula(expr[1])} {sym} {format_formula(expr[2])})"
    raise SpecError(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# Specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawSpec:
    """User-facing spec: recurrence goals, response obligations, init labels."""
    assumptions: tuple[str, ...] = ()
    guarantees: tuple[str, ...] = ()
    responses: tuple[tuple[str, str], ...] = ()
    init: str | None = None


@dataclass(frozen=True)
class Gr1Spec:
    """Normalized spec: every guarantee/assumption sits under always-eventually.

    ``memory_bits`` holds (name, update) pairs; an update formula reads
    the *previous* bit values plus the newly entered state and yields the
    next bit value.
    """
    assumptions: tuple = ()
    guarantees: tuple = ()
    memory_bits: tuple = ()
    init_assumption: object = None

    def __post_init__(self):
        if len(self.guarantees) < 1:
            raise SpecError("at least one recurrence guarantee is required")

    @property
    def bit_names(self) -> tuple[str, ...]:
        return tuple(name for name, _upd in self.memory_bits)

    def update_bits(self, bits: dict, labels, env) -> dict:
        out = {}
        for name, upd in self.memory_bits:
            out[name] = eval_formula(upd, labels, env, bits)
        return out

    def initial_bits(self) -> dict:
        return {name: False for name, _ in self.memory_bits}


def _bit_name(index: int, trigger_expr, taken: set[str]) -> str:
    base = "pending"
    if trigger_expr[0] == "atom":
        base = f"pending_{trigger_expr[1]}"
    name = base
    k = index
    while name in taken:
        name = f"{base}_{k}"
        k += 1
    return name


def convert_to_gr1(raw: RawSpec) -> Gr1Spec:
    """Lower response obligations to memory bits plus recurrence guarantees.

    ``always (trigger -> eventually response)`` becomes a pending bit b
    (set on trigger, cleared on response) and the guarantee
    ``always eventually (!b | response)``; plain goals and assumptions
    pass through unchanged.
    """
    assumptions = tuple(parse_formula(a) for a in raw.assumptions)
    guarantees = [parse_formula(g) for g in raw.guarantees]
    taken = {a for g in guarantees for a in formula_atoms(g)}
    taken |= {a for g in assumptions for a in formula_atoms(g)}
    bits = []
    for k, (trigger, response) in enumerate(raw.responses):
        trig = parse_formula(trigger)
        resp = parse_formula(response)
        name = _bit_name(k, trig, taken)
        taken.add(name)
        update = ("and", ("not", resp), ("or", ("atom", name), trig))
        bits.append((name, update))
        guarantees.append(("or", ("not", ("atom", name)), resp))
    init = parse_formula(raw.init) if raw.init else None
    return Gr1Spec(assumptions=assumptions, guarantees=tuple(guarantees),
                   memory_bits=tuple(bits), init_assumption=init)


# ---------------------------------------------------------------------------
# Game graph: regions x environment x memory bits
# ---------------------------------------------------------------------------

GameState = tuple  # (region id, env index)


class GameGraph:
    """Explicit product arena for one FTS and one spec.

    A composite step from node (region, env, bits): the system commits to
    a successor region (it has seen the current env valuation, not the
    next one), then the environment picks any next valuation.  A node
    whose region has no successors loses: no consistent controller exists
    there.
    """

    def __init__(self, regions, region_succ, labels, env_valuations, spec):
        self.regions = sorted(regions)
        self.region_index = {r: i for i, r in enumerate(self.regions)}
        self.succ = [sorted(region_succ.get(r, ()),
                            key=lambda x: self.region_index[x])
                     for r in self.regions]
        self.succ_idx = [[self.region_index[s] for s in row] for row in self.succ]
        self.labels = {r: frozenset(labels.get(r, ())) for r in self.regions}
        self.env_valuations = list(env_valuations) or [{}]
        self.spec = spec
        self.n_regions = len(self.regions)
        self.n_env = len(self.env_valuations)
        self.n_bits = len(spec.memory_bits)
        self.n_bitvals = 1 << self.n_bits
        self.n_nodes = self.n_regions * self.n_env * self.n_bitvals
        self._build_tables()

    # node indexing -------------------------------------------------------
    def node(self, r_idx: int, e_idx: int, b_val: int) -> int:
        return (r_idx * self.n_env + e_idx) * self.n_bitvals + b_val

    def decode(self, node: int):
        b = node % self.n_bitvals
        node //= self.n_bitvals
        return node // self.n_env, node % self.n_env, b

    def _bits_dict(self, b_val: int) -> dict:
        return {name: bool(b_val >> k & 1)
                for k, name in enumerate(self.spec.bit_names)}

    def _bits_val(self, bits: dict) -> int:
        return sum(1 << k for k, name in enumerate(self.spec.bit_names)
                   if bits[name])

    def _build_tables(self):
        spec = self.spec
        # bit update on entering (region, env), from previous bit value
        self.bit_next = [[[0] * self.n_bitvals for _ in range(self.n_env)]
                         for _ in range(self.n_regions)]
        for ri, r in enumerate(self.regions):
            for ei, env in enumerate(self.env_valuations):
                for b in range(self.n_bitvals):
                    nxt = spec.update_bits(self._bits_dict(b),
                                           self.labels[r], env)
                    self.bit_next[ri][ei][b] = self._bits_val(nxt)
        self.assumption_preds = [self._pred_array(a) for a in spec.assumptions]
        self.guarantee_preds = [self._pred_array(g) for g in spec.guarantees]

    def _pred_array(self, expr):
        out = [False] * self.n_nodes
        for ri, r in enumerate(self.regions):
            for ei, env in enumerate(self.env_valuations):
                for b in range(self.n_bitvals):
                    out[self.node(ri, ei, b)] = eval_formula(
                        expr, self.labels[r], env, self._bits_dict(b))
        return out

    def initial_node(self, r_idx: int, e_idx: int) -> int:
        """Node reached by entering (region, env) with cleared bits."""
        return self.node(r_idx, e_idx, self.bit_next[r_idx][e_idx][0])

    # controllable predecessor -------------------------------------------
    def cpre(self, S: list[bool]) -> list[bool]:
        ok = [[False] * self.n_bitvals for _ in range(self.n_regions)]
        for ri in range(self.n_regions):
            bn = self.bit_next[ri]
            for b in range(self.n_bitvals):
                ok[ri][b] = all(
                    S[self.node(ri, ei, bn[ei][b])]
                    for ei in range(self.n_env))
        out = [False] * self.n_nodes
        for ri in range(self.n_regions):
            row = self.succ_idx[ri]
            for b in range(self.n_bitvals):
                good = any(ok[si][b] for si in row)
                if good:
                    for ei in range(self.n_env):
                        out[self.node(ri, ei, b)] = True
        return out

    def next_nodes(self, s_idx: int, b_val: int) -> list[int]:
        """All nodes the adversary can pick after moving to region s_idx."""
        bn = self.bit_next[s_idx]
        return [self.node(s_idx, ei, bn[ei][b_val]) for ei in range(self.n_env)]


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

_GOAL, _DESCEND, _TRAP = 0, 1, 2


@dataclass
class GameSolution:
    graph: GameGraph
    z_nodes: list[bool]
    winning: set          # GameStates (region, env index), cleared-bit entry
    region_winning: set   # regions winning for every env valuation
    strategy: "StrategyAutomaton | None" = None
    # per-goal strategy tables, kept for extraction and diagnostics
    rank: list = field(default_factory=list)    # rank[j][node] -> int | None
    case: list = field(default_factory=list)    # case[j][node] -> (kind, trap_i)
    layers: list = field(default_factory=list)  # layers[j] -> list[set[node]]
    traps: list = field(default_factory=list)   # traps[j][k][i] -> set[node]


def _solve_nodes(graph: GameGraph, forced_q_regions=frozenset()):
    n = graph.n_nodes
    q_preds = [list(q) for q in graph.guarantee_preds]
    if forced_q_regions:
        forced_idx = {graph.region_index[r] for r in forced_q_regions}
        for q in q_preds:
            for ri in forced_idx:
                for ei in range(graph.n_env):
                    for b in range(graph.n_bitvals):
                        q[graph.node(ri, ei, b)] = True
    p_preds = graph.assumption_preds or [[True] * n]

    def mu_y(j, Z, record=None):
        pre_z = graph.cpre(Z)
        qj = q_preds[j]
        start = [qj[v] and pre_z[v] for v in range(n)]
        Y = [False] * n
        k = 0
        while True:
            pre_y = graph.cpre(Y)
            base = [start[v] or pre_y[v] for v in range(n)]
            new_y = [False] * n
            trap_sets = []
            for i, p in enumerate(p_preds):
                X = [True] * n
                while True:
                    pre_x = graph.cpre(X)
                    nx = [base[v] or ((not p[v]) and pre_x[v]) for v in range(n)]
                    if nx == X:
                        break
                    X = nx
                trap_sets.append(X)
                new_y = [a or b for a, b in zip(new_y, X)]
            if new_y == Y:
                return Y
            if record is not None:
                k += 1
                added = {v for v in range(n) if new_y[v] and not Y[v]}
                record["layers"].append(set(v for v in range(n) if new_y[v]))
                record["traps"].append([set(v for v in range(n) if t[v])
                                        for t in trap_sets])
                for v in added:
                    if start[v]:
                        kind = (_GOAL, -1)
                    elif pre_y[v]:
                        kind = (_DESCEND, -1)
                    else:
                        kind = next((_TRAP, i) for i, t in enumerate(trap_sets)
                                    if t[v])
                    record["rank"][v] = k
                    record["case"][v] = kind
            Y = new_y

    Z = [True] * n
    while True:
        prev = list(Z)
        for j in range(len(q_preds)):
            Z = mu_y(j, Z)
        if Z == prev:
            break
    # final per-goal layer structure against the converged Z
    ranks, cases, layers, traps = [], [], [], []
    for j in range(len(q_preds)):
        record = {"rank": [None] * n, "case": [None] * n,
                  "layers": [], "traps": []}
        y = mu_y(j, Z, record)
        assert y == Z, "converged Z must be a fixpoint of every goal"
        ranks.append(record["rank"])
        cases.append(record["case"])
        layers.append(record["layers"])
        traps.append(record["traps"])
    return Z, ranks, cases, layers, traps


def solve_game(graph: GameGraph, forced_winning_regions=frozenset(),
               forced_losing_regions=frozenset(), extract_strategy=True):
    """Largest winning set of the game plus a finite-memory strategy.

    ``forced_winning_regions`` short-circuit already-solved regions
    (their guarantees are treated as satisfied; their real edges keep
    them consistent).  ``forced_losing_regions`` are checked to be
    edge-free, which makes them losing without further work.
    """
    for r in forced_losing_regions:
        if graph.succ[graph.region_index[r]]:
            raise SpecError(f"forced-losing region {r!r} still has successors")
    Z, ranks, cases, layers, traps = _solve_nodes(graph, forced_winning_regions)
    if forced_winning_regions:
        missing = [r for r in forced_winning_regions
                   if not all(Z[graph.initial_node(graph.region_index[r], ei)]
                              for ei in range(graph.n_env))]
        if missing:
            raise AssertionError(
                f"seeded-winning regions fell out of the winning set: "
                f"{missing}; abstraction construction is inconsistent")
    winning = set()
    for ri, r in enumerate(graph.regions):
        for ei in range(graph.n_env):
            if Z[graph.initial_node(ri, ei)]:
                winning.add((r, ei))
    region_winning = {r for r in graph.regions
                      if all((r, ei) in winning for ei in range(graph.n_env))}
    sol = GameSolution(graph=graph, z_nodes=Z, winning=winning,
                       region_winning=region_winning, rank=ranks, case=cases,
                       layers=layers, traps=traps)
    if extract_strategy:
        sol.strategy = _extract_strategy(sol, forced_winning_regions)
    return sol


def _admissible(graph, Z, s_idx, b_val):
    return all(Z[v] for v in graph.next_nodes(s_idx, b_val))


def _extract_strategy(sol: GameSolution, forced=frozenset()):
    """Deterministic finite-memory strategy over (region, bits, goal).

    Undefined on forced (seeded) regions: the engine re-solves without
    seeds before extracting the controller it ships.
    """
    graph = sol.graph
    n_goals = len(graph.guarantee_preds)
    Z = sol.z_nodes

    def worst_rank(j, s_idx, b_val):
        worst = 0
        for v in graph.next_nodes(s_idx, b_val):
            r = sol.rank[j][v]
            if r is None:
                return None
            worst = max(worst, r)
        return worst

    def next_move(node, j):
        ri, ei, b = graph.decode(node)
        kind, trap_i = sol.case[j][node]
        options = [s for s in graph.succ_idx[ri] if _admissible(graph, Z, s, b)]
        if not options:
            raise AssertionError("winning node without admissible successor")
        if kind == _GOAL:
            j2 = (j + 1) % n_goals
            ranked = [(worst_rank(j2, s, b), s) for s in options]
            ranked = [(w, s) for w, s in ranked if w is not None]
            assert ranked, "successor escaping all goal ranks"
            return min(ranked)[1], j2
        if kind == _DESCEND:
            k = sol.rank[j][node]
            assert k >= 2, "rank-1 nodes satisfy the goal or sit in a trap"
            lower = sol.layers[j][k - 2]
            cands = [(worst_rank(j, s, b), s) for s in options
                     if all(v in lower for v in graph.next_nodes(s, b))]
            assert cands, "descend case without a descending successor"
            return min(cands)[1], j
        trap = sol.traps[j][sol.rank[j][node] - 1][trap_i]
        cands = [s for s in options
                 if all(v in trap for v in graph.next_nodes(s, b))]
        assert cands, "trap case without a trap-preserving successor"
        return cands[0], j

    bit_names = graph.spec.bit_names
    start_regions = sorted(sol.region_winning - set(forced),
                           key=lambda r: graph.region_index[r])
    memory_states: list[tuple] = []
    memory_index: dict[tuple, int] = {}
    initial: dict = {}
    transitions: dict = {}

    def intern(state):
        if state not in memory_index:
            memory_index[state] = len(memory_states)
            memory_states.append(state)
        return memory_index[state]

    frontier = []
    for r in start_regions:
        mid = intern((r, 0, 0))
        initial[r] = mid
        frontier.append(mid)
    seen = set(frontier)
    while frontier:
        mid = frontier.pop()
        r, b_prev, j = memory_states[mid]
        ri = graph.region_index[r]
        for ei in range(graph.n_env):
            b = graph.bit_next[ri][ei][b_prev]
            node = graph.node(ri, ei, b)
            assert Z[node], "strategy reached a non-winning node"
            s_idx, j2 = next_move(node, j)
            target = graph.regions[s_idx]
            mid2 = intern((target, b, j2))
            transitions[(mid, ei)] = (mid2, target)
            if mid2 not in seen:
                seen.add(mid2)
                frontier.append(mid2)
    return StrategyAutomaton(bit_names=bit_names,
                             memory_states=tuple(memory_states),
                             initial=initial, transitions=transitions,
                             n_env=graph.n_env)


# ---------------------------------------------------------------------------
# Strategy automaton
# ---------------------------------------------------------------------------

@dataclass
class StrategyAutomaton:
    """Finite-memory winning controller.

    Memory is (current region, previous bit values, goal pointer).  Feeding
    the current environment valuation index yields the successor region
    and the next memory state; every emitted move follows a pessimistic
    edge of the FTS the game was solved on.
    """
    bit_names: tuple[str, ...]
    memory_states: tuple
    initial: dict
    transitions: dict
    n_env: int

    def step(self, memory_id: int, env_index: int):
        key = (memory_id, env_index)
        if key not in self.transitions:
            raise SpecError(f"strategy has no move for memory={memory_id}, "
                            f"env={env_index}")
        return self.transitions[key]

    def start(self, region):
        if region not in self.initial:
            raise SpecError(f"strategy cannot start in region {region!r}")
        return self.initial[region]

    def to_json(self) -> dict:
        from dualsynth.partition import format_region_id
        def _rid(r):
            return format_region_id(r) if isinstance(r, tuple) else str(r)
        return {
            "bit_names": list(self.bit_names),
            "memory_states": [
                {"region": _rid(r), "bits": b, "goal": j}
                for (r, b, j) in self.memory_states],
            "initial": {_rid(r): mid for r, mid in self.initial.items()},
            "transitions": [
                {"memory": mid, "env": ei, "next_memory": mid2,
                 "next_state": _rid(target)}
                for (mid, ei), (mid2, target) in sorted(self.transitions.items())],
            "n_env": self.n_env,
        }

    @staticmethod
    def from_json(data: dict) -> "StrategyAutomaton":
        from dualsynth.partition import parse_region_id
        states = tuple((parse_region_id(s["region"]), s["bits"], s["goal"])
                       for s in data["memory_states"])
        initial = {parse_region_id(r): mid for r, mid in data["initial"].items()}
        transitions = {
            (t["memory"], t["env"]): (t["next_memory"],
                                      parse_region_id(t["next_state"]))
            for t in data["transitions"]}
        return StrategyAutomaton(bit_names=tuple(data["bit_names"]),
                                 memory_states=states, initial=initial,
                                 transitions=transitions, n_env=data["n_env"])


# ---------------------------------------------------------------------------
# Lasso acceptance and strategy invariance
# ---------------------------------------------------------------------------

def check_lasso(prefix, cycle, spec: Gr1Spec) -> bool:
    """Acceptance of an ultimately periodic run under the GR(1) condition.

    States are (labels, env valuation, bits) triples.  The run satisfies
    the condition iff some assumption never occurs in the cycle or every
    guarantee occurs in the cycle; the prefix cannot affect a pure
    recurrence condition.
    """
    if not cycle:
        raise SpecError("lasso cycle must be nonempty")

    def holds_somewhere(expr):
        return any(eval_formula(expr, labels, env, bits)
                   for labels, env, bits in cycle)

    if any(not holds_somewhere(p) for p in spec.assumptions):
        return True
    return all(holds_somewhere(q) for q in spec.guarantees)


def strategy_invariance_check(strategy: StrategyAutomaton, graph: GameGraph,
                              solution: GameSolution) -> bool:
    """Every strategy-controlled play stays inside the winning set.

    Explores the full (memory, env) product; a visited GameState outside
    the solver's winning set means the strategy (or the solver) is broken.
    """
    winning = solution.winning
    pending = list(strategy.initial.values())
    seen_mem = set(pending)
    while pending:
        mid = pending.pop()
        region = strategy.memory_states[mid][0]
        for ei in range(graph.n_env):
            if (region, ei) not in winning:
                return False
            key = (mid, ei)
            if key not in strategy.transitions:
                return False
            mid2, target = strategy.transitions[key]
            if strategy.memory_states[mid2][0] != target:
                return False
            if target not in graph.succ[graph.region_index[region]]:
                return False  # move does not follow any edge of the FTS
            if any((target, e2) not in winning for e2 in range(graph.n_env)):
                return False
            if mid2 not in seen_mem:
                seen_mem.add(mid2)
                pending.append(mid2)
    return True
