"""Path finding between mechanism states.

``bfs_oracle`` enumerates every shortest path (optionally meeting in the
middle, since each move can be undone by one move of the other kind).
``guided_search`` runs beam search or MCTS with an evaluator as the judge.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .chem.molecule import MolSet
from .evaluator.base import Evaluation, EvaluatorError, prompt_key
from .evaluator.prompts import MechContext, render_mech_prompt
from .mech import (
    DEFAULT_RULES,
    MechanismPath,
    MechState,
    Move,
    MoveRules,
    is_goal,
    successors,
)


class SearchBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class MCTSConfig:
    iterations: int = 200
    exploration_constant: float = 1.4
    rollout_depth: int = 3

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.exploration_constant <= 0:
            raise ValueError("exploration_constant must be > 0")
        if self.rollout_depth < 0:
            raise ValueError("rollout_depth must be >= 0")


@dataclass(frozen=True)
class SearchConfig:
    max_depth: int = 5
    beam_width: int = 5
    mcts: MCTSConfig = field(default_factory=MCTSConfig)
    seed: int = 0
    goal_mode: str = "superset"
    node_cap: int = 500_000
    max_paths: int = 100_000
    bidirectional: bool = False
    cumulative: bool = False
    visited_pruning: bool = False
    max_in_flight: int = 1
    rules: MoveRules = DEFAULT_RULES
    guidance: str | None = None

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.goal_mode not in ("exact", "superset"):
            raise ValueError("goal_mode must be 'exact' or 'superset'")
        if self.bidirectional and self.goal_mode != "exact":
            raise ValueError("bidirectional search needs goal_mode 'exact'")

    def to_json(self) -> dict:
        out = asdict(self)
        out["rules"] = {
            "max_atom_charge": self.rules.max_atom_charge,
            "hypervalent": self.rules.valence.hypervalent,
        }
        return out


# --- exhaustive oracle ---------------------------------------------------------


@dataclass
class OracleResult:
    """Shortest-path DAG found by :func:`bfs_search`.

    ``parents`` maps a state key to the keys one step closer to the start;
    ``goals`` are the goal keys at the shortest distance (None if none).
    """

    initial: MechState
    states: dict[str, MechState]
    parents: dict[str, list[str]]
    goals: list[str]
    depth: int | None
    nodes_expanded: int
    rules: MoveRules
    max_paths: int

    @property
    def found(self) -> bool:
        return self.depth is not None

    def count_paths(self) -> int:
        if not self.found:
            return 0
        memo: dict[str, int] = {self.initial.key: 1}

        def count(k: str) -> int:
            if k not in memo:
                memo[k] = sum(count(p) for p in self.parents[k])
            return memo[k]

        return sum(count(g) for g in self.goals)

    def contains(self, keys: Sequence[str]) -> bool:
        """Is the state sequence ``keys`` one of the shortest paths?"""
        if not self.found or len(keys) != self.depth + 1 or keys[0] != self.initial.key:
            return False
        if keys[-1] not in self.goals:
            return False
        return all(keys[i - 1] in self.parents.get(keys[i], ()) for i in range(1, len(keys)))

    def _move_between(self, a: str, b: str, cache: dict) -> Move:
        if a not in cache:
            cache[a] = {nxt.key: mv for mv, nxt in successors(self.states[a], self.rules)}
        return cache[a][b]

    def paths(self) -> list[MechanismPath]:
        if not self.found:
            return []
        total = self.count_paths()
        if total > self.max_paths:
            raise SearchBudgetError(f"{total} shortest paths exceed max_paths={self.max_paths}")
        seqs: list[tuple[str, ...]] = []

        def back(k: str, suffix: tuple[str, ...]) -> None:
            if k == self.initial.key:
                seqs.append((k,) + suffix)
                return
            for p in self.parents[k]:
                back(p, (k,) + suffix)

        for g in self.goals:
            back(g, ())
        seqs.sort()
        cache: dict = {}
        out = []
        for seq in seqs:
            steps = []
            for a, b in zip(seq, seq[1:]):
                steps.append((self._move_between(a, b, cache), self.states[b]))
            out.append(MechanismPath(self.initial, tuple(steps)))
        return out


def _expand_layer(frontier, states, dist, parents, depth, rules, budget, counter):
    nxt_layer = []
    for key in frontier:
        counter[0] += 1
        for _, child in successors(states[key], rules):
            ck = child.key
            if ck not in dist:
                dist[ck] = depth
                states[ck] = MechState(child.species)
                parents[ck] = [key]
                nxt_layer.append(ck)
                if len(states) > budget:
                    raise SearchBudgetError(f"state budget of {budget} nodes exceeded at depth {depth}")
            elif dist[ck] == depth:
                parents[ck].append(key)
    return nxt_layer


def bfs_search(initial: MechState, products: MolSet, cfg: SearchConfig = SearchConfig()) -> OracleResult:
    start = MechState(initial.species)
    if cfg.bidirectional:
        return _bfs_bidirectional(start, products, cfg)
    states = {start.key: start}
    dist = {start.key: 0}
    parents: dict[str, list[str]] = {start.key: []}
    counter = [0]
    frontier = [start.key]
    depth = 0
    while True:
        goals = sorted(k for k in frontier if is_goal(states[k], products, cfg.goal_mode))
        if goals:
            return OracleResult(start, states, parents, goals, depth, counter[0], cfg.rules, cfg.max_paths)
        if depth >= cfg.max_depth or not frontier:
            return OracleResult(start, states, parents, [], None, counter[0], cfg.rules, cfg.max_paths)
        depth += 1
        frontier = _expand_layer(frontier, states, dist, parents, depth, cfg.rules, cfg.node_cap, counter)


def _bfs_bidirectional(start: MechState, products: MolSet, cfg: SearchConfig) -> OracleResult:
    goal = MechState(products)
    if start.key == goal.key:
        return OracleResult(start, {start.key: start}, {start.key: []}, [start.key], 0, 0, cfg.rules, cfg.max_paths)
    f_states = {start.key: start}
    f_dist = {start.key: 0}
    f_par: dict[str, list[str]] = {start.key: []}
    b_states = {goal.key: goal}
    b_dist = {goal.key: 0}
    b_par: dict[str, list[str]] = {goal.key: []}
    f_front, b_front = [start.key], [goal.key]
    kf = kb = 0
    counter = [0]
    meet: list[str] = []
    while kf + kb < cfg.max_depth and f_front and b_front:
        budget = cfg.node_cap - len(b_states)
        if len(f_front) <= len(b_front):
            kf += 1
            f_front = _expand_layer(f_front, f_states, f_dist, f_par, kf, cfg.rules, budget, counter)
            meet = [k for k in f_front if b_dist.get(k) == kb]
        else:
            budget = cfg.node_cap - len(f_states)
            kb += 1
            b_front = _expand_layer(b_front, b_states, b_dist, b_par, kb, cfg.rules, budget, counter)
            meet = [k for k in b_front if f_dist.get(k) == kf]
        if meet:
            break
    if not meet:
        return OracleResult(start, f_states, f_par, [], None, counter[0], cfg.rules, cfg.max_paths)

    # graft the backward half onto the forward DAG: the parents of a node
    # nearer the goal are its backward children that lie on a shortest path
    states = dict(f_states)
    parents = {k: v for k, v in f_par.items() if f_dist[k] <= kf}
    meet_set = set(meet)
    for k in meet_set:
        parents[k] = list(f_par[k])
    # walk from the meeting layer toward the goal; b_par[x] lists nodes one
    # step nearer the goal from which x was reached, i.e. x's successors here
    layer = sorted(meet_set)
    for step in range(1, kb + 1):
        nxt: dict[str, list[str]] = {}
        for x in layer:
            for y in b_par[x]:
                nxt.setdefault(y, []).append(x)
        for y, ps in nxt.items():
            states[y] = b_states[y]
            parents[y] = sorted(set(ps))
        layer = sorted(nxt)
    goals = [goal.key]
    return OracleResult(start, states, parents, goals, kf + kb, counter[0], cfg.rules, cfg.max_paths)


def bfs_oracle(initial: MechState, products: MolSet, cfg: SearchConfig = SearchConfig()) -> list[MechanismPath]:
    """All shortest goal-reaching paths within ``cfg.max_depth``, sorted by state keys."""
    return bfs_search(initial, products, cfg).paths()


# --- guided search ---------------------------------------------------------------


@dataclass
class SearchReport:
    strategy: str
    config: SearchConfig
    path: MechanismPath | None
    nodes_expanded: int = 0
    evaluator_calls: int = 0
    products: MolSet | None = None

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "config": self.config.to_json(),
            "nodes_expanded": self.nodes_expanded,
            "evaluator_calls": self.evaluator_calls,
            "found": self.path is not None,
            "trace": self.path.to_trace(self.products) if self.path is not None else None,
        }


class _Judge:
    """Scores candidate moves in the context of the path that led to a state."""

    def __init__(self, evaluator, reactants: MolSet, products: MolSet, cfg: SearchConfig):
        self.evaluator = evaluator
        self.reactants = reactants
        self.products = products
        self.cfg = cfg
        self.calls = 0

    def _one(self, history, move: Move, depth: int) -> float:
        ctx = MechContext(self.reactants, self.products, history, move, self.cfg.guidance, self.cfg.rules)
        prompt = render_mech_prompt(ctx)
        try:
            ev: Evaluation = self.evaluator.evaluate(prompt, prompt_key(prompt), ctx)
        except EvaluatorError as exc:
            exc.context = f"search depth {depth}, move {move.to_json()}"
            raise
        return float(ev.score)

    def score(self, requests: list[tuple[tuple, Move]], depth: int) -> list[float]:
        self.calls += len(requests)
        if self.cfg.max_in_flight > 1 and len(requests) > 1:
            with ThreadPoolExecutor(self.cfg.max_in_flight) as pool:
                return list(pool.map(lambda r: self._one(r[0], r[1], depth), requests))
        return [self._one(h, m, depth) for h, m in requests]


def _history(state: MechState) -> tuple[tuple[Move, MechState], ...]:
    return state.path().steps


def _beam(initial: MechState, products: MolSet, judge: _Judge, cfg: SearchConfig, report: SearchReport):
    beam: list[tuple[float, MechState]] = [(0.0, initial)]
    visited = {initial.key}
    if is_goal(initial, products, cfg.goal_mode):
        return initial.path()
    for depth in range(1, cfg.max_depth + 1):
        cands: list[tuple[float, str, int, MechState, Move]] = []
        requests = []
        origin = []
        for total, state in beam:
            report.nodes_expanded += 1
            hist = _history(state)
            for move, child in successors(state, cfg.rules):
                if cfg.visited_pruning and child.key in visited:
                    continue
                requests.append((hist, move))
                origin.append((total, child, move))
        scores = judge.score(requests, depth)
        best: dict[str, tuple] = {}
        for idx, (s, (total, child, move)) in enumerate(zip(scores, origin)):
            value = total + s if cfg.cumulative else s
            entry = (-value, child.key, idx, child, move)
            if child.key not in best or entry < best[child.key]:
                best[child.key] = entry
        cands = sorted(best.values())
        kept = cands[: cfg.beam_width]
        if not kept:
            return None
        for _, key, _, child, _ in kept:
            if is_goal(child, products, cfg.goal_mode):
                return child.path()
        beam = [(-neg, child) for neg, _, _, child, _ in kept]
        visited.update(k for _, k, _, _, _ in kept)
    return None


@dataclass(eq=False)
class _Node:
    state: MechState
    prior: float
    parent: "_Node | None" = None
    children: list["_Node"] = field(default_factory=list)
    visits: int = 0
    value: float = 0.0
    expanded: bool = False

    def q(self) -> float:
        return self.value / self.visits if self.visits else self.prior


def _mcts(initial: MechState, products: MolSet, judge: _Judge, cfg: SearchConfig, report: SearchReport):
    if is_goal(initial, products, cfg.goal_mode):
        return initial.path()
    rng = random.Random(cfg.seed)
    c = cfg.mcts.exploration_constant
    root = _Node(initial, 1.0)
    for _ in range(cfg.mcts.iterations):
        node = root
        depth = 0
        while node.expanded and node.children:
            sqrt_n = math.sqrt(max(1, node.visits))
            best_i = max(
                range(len(node.children)),
                key=lambda i: (
                    node.children[i].q() + c * node.children[i].prior * sqrt_n / (1 + node.children[i].visits),
                    -i,
                ),
            )
            node = node.children[best_i]
            depth += 1
        if node.expanded:
            value = 0.0  # dead end
        elif depth >= cfg.max_depth:
            node.expanded = True
            value = node.prior
        else:
            node.expanded = True
            report.nodes_expanded += 1
            hist = _history(node.state)
            pairs = list(successors(node.state, cfg.rules))
            if cfg.visited_pruning:
                seen = {s.key for s in node.state.path().states}
                pairs = [(mv, ch) for mv, ch in pairs if ch.key not in seen]
            scores = judge.score([(hist, mv) for mv, _ in pairs], depth + 1)
            for (mv, child), s in zip(pairs, scores):
                node.children.append(_Node(child, s / 10.0, node))
            goals = [
                (-ch.prior, ch.state.key, i, ch)
                for i, ch in enumerate(node.children)
                if is_goal(ch.state, products, cfg.goal_mode)
            ]
            if goals:
                return min(goals)[3].state.path()
            value = max((ch.prior for ch in node.children), default=0.0)
            value = max(value, _rollout(node.state, products, cfg, rng, depth))
        while node is not None:
            node.visits += 1
            node.value += value
            node = node.parent
    return None


def _rollout(state: MechState, products: MolSet, cfg: SearchConfig, rng: random.Random, depth: int) -> float:
    """Random playout; 1.0 if it stumbles onto a goal, else 0."""
    for _ in range(min(cfg.mcts.rollout_depth, cfg.max_depth - depth)):
        options = list(successors(state, cfg.rules))
        if not options:
            return 0.0
        _, state = options[rng.randrange(len(options))]
        if is_goal(state, products, cfg.goal_mode):
            return 1.0
    return 0.0


def guided_search(
    initial: MechState,
    products: MolSet,
    evaluator,
    cfg: SearchConfig = SearchConfig(),
    strategy: str = "beam",
) -> SearchReport:
    """Evaluator-guided search; ``report.path`` is None if nothing was found."""
    start = MechState(initial.species)
    judge = _Judge(evaluator, start.species, products, cfg)
    report = SearchReport(strategy, cfg, None, products=products)
    if strategy == "beam":
        path = _beam(start, products, judge, cfg, report)
    elif strategy == "mcts":
        path = _mcts(start, products, judge, cfg, report)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    report.path = path
    report.evaluator_calls = judge.calls
    return report
