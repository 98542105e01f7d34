"""Benchmark task files: mechanism tasks with alternatives, and route-ranking tasks."""

from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

from ..chem.elements import ValenceModel
from ..chem.molecule import ChemError, MolSet
from ..chem.smiles import parse_smiles, parse_smiles_set
from ..mech import (
    AtomRef,
    IllegalMoveError,
    MechanismPath,
    MechState,
    Move,
    MoveRules,
    apply_move,
    apply_move_tracked,
    is_goal,
    legal_moves,
    successors,
)
from ..routes import Route, RouteError, load_route
from ..scoring import Rubric, RubricError, load_rubric


class TaskError(ValueError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def sub_seed(seed: int, *parts: object) -> int:
    """Stable per-component seed derived from a master seed."""
    text = ":".join([str(seed), *map(str, parts)])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def rules_to_json(rules: MoveRules) -> dict:
    return {"max_atom_charge": rules.max_atom_charge, "hypervalent": rules.valence.hypervalent}


def rules_from_json(doc: Any, path: str = "$.rules") -> MoveRules:
    if doc is None:
        return MoveRules()
    if not isinstance(doc, dict):
        raise TaskError("rules must be an object", path)
    bound = doc.get("max_atom_charge", 2)
    if bound is not None and (not isinstance(bound, int) or isinstance(bound, bool) or bound < 0):
        raise TaskError("max_atom_charge must be a non-negative integer or null", path + ".max_atom_charge")
    hyper = doc.get("hypervalent", False)
    if not isinstance(hyper, bool):
        raise TaskError("hypervalent must be a boolean", path + ".hypervalent")
    return MoveRules(bound, ValenceModel(hypervalent=hyper))


# --- alternatives ------------------------------------------------------------------


@dataclass(frozen=True)
class Alternatives:
    moves: tuple[tuple[Move, ...], ...]
    short_steps: tuple[int, ...] = ()  # 1-based steps with fewer than k options
    loop_checks: tuple[tuple[int, int], ...] = ()  # (step, earlier step whose move was reused)


def _translate(move: Move, maps: Sequence[dict[AtomRef, AtomRef]], state: MechState) -> Move | None:
    """Carry ``move`` forward through atom maps into ``state``.

    Hydrogens held as counts are interchangeable, so an implicit-H reference
    follows its heavy atom and takes any hydrogen still present there.
    """
    refs = [move.a, move.b] + ([move.sink] if move.sink is not None else [])
    out = []
    for ref in refs:
        cur = AtomRef(ref.mol, ref.atom) if ref.h >= 0 else ref
        for amap in maps:
            cur = amap.get(cur)
            if cur is None:
                return None
        if ref.h >= 0:
            if cur.h >= 0:
                return None
            count = state.atom(cur).hydrogen_count
            if count == 0:
                return None
            cur = AtomRef(cur.mol, cur.atom, min(ref.h, count - 1))
        out.append(cur)
    try:
        if move.sink is None:
            return Move.attack(out[0], out[1])
        return Move.ionization(out[0], out[1], out[2])
    except ValueError:
        return None


def generate_alternatives(
    reactants: MolSet | MechState,
    ground_truth: Sequence[Move],
    k: int = 5,
    seed: int = 0,
    rules: MoveRules = MoveRules(),
    loop_checks: bool = True,
) -> Alternatives:
    """Seeded sample of ``k`` legal non-ground-truth moves for every step.

    Candidates are legal moves whose result differs from the ground-truth
    result, one per distinct result. From the second step on, the earliest
    ground-truth move that is still legal in the current state (translated
    through the atom maps) is included first, as a loop check.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    state = reactants if isinstance(reactants, MechState) else MechState(reactants)
    state = MechState(state.species)
    maps: list[dict[AtomRef, AtomRef]] = []
    out, short, loops = [], [], []
    for step, gt in enumerate(ground_truth, 1):
        nxt, amap = apply_move_tracked(state, gt, rules)
        legal = set(legal_moves(state, rules))
        chosen: list[Move] = []
        taken = {nxt.key}
        if loop_checks:
            for j in range(step - 1):
                cand = _translate(ground_truth[j], maps[j:], state)
                if cand is None or cand not in legal:
                    continue
                res = apply_move(state, cand, rules).key
                if res in taken:
                    continue
                chosen.append(cand)
                taken.add(res)
                loops.append((step, j + 1))
                break
        pool = [mv for mv, child in successors(state, rules) if child.key not in taken]
        rng = random.Random(sub_seed(seed, "alternatives", step))
        need = k - len(chosen)
        if len(pool) < need:
            short.append(step)
            chosen.extend(pool)
        else:
            chosen.extend(rng.sample(pool, need))
        if not chosen:
            raise TaskError(f"step {step} has no legal alternative; the task cannot be benchmarked")
        out.append(tuple(sorted(chosen)))
        maps.append(amap)
        state = nxt
    return Alternatives(tuple(out), tuple(short), tuple(loops))


# --- mechanism tasks ---------------------------------------------------------------


@dataclass(frozen=True)
class MechTask:
    task_id: str
    reactants: MolSet
    products: MolSet
    ground_truth: tuple[Move, ...]
    alternatives: tuple[tuple[Move, ...], ...]
    name: str = ""
    category: str = ""
    guidance: str | None = None
    goal_mode: str = "exact"
    rules: MoveRules = field(default_factory=MoveRules)

    @property
    def initial(self) -> MechState:
        return MechState(self.reactants)

    @cached_property
    def path(self) -> MechanismPath:
        return MechanismPath.replay(self.initial, self.ground_truth, self.rules)

    def __len__(self) -> int:
        return len(self.ground_truth)

    def validate(self, k: int = 5) -> None:
        """Ground truth reaches the products; alternatives are legal and differ from it."""
        try:
            path = self.path
        except IllegalMoveError as exc:
            raise TaskError(f"ground truth does not replay: {exc}", "$.ground_truth") from None
        if not is_goal(path.final, self.products, self.goal_mode):
            raise TaskError("ground truth does not end at the products", "$.ground_truth")
        if len(self.alternatives) != len(self.ground_truth):
            raise TaskError("need one list of alternatives per ground-truth step", "$.alternatives")
        for i, (alts, (gt, after)) in enumerate(zip(self.alternatives, path.steps)):
            where = f"$.alternatives[{i}]"
            if not alts or len(alts) > k:
                raise TaskError(f"expected 1..{k} alternatives, found {len(alts)}", where)
            if len(set(alts)) != len(alts):
                raise TaskError("duplicate alternatives", where)
            state = path.states[i]
            for j, alt in enumerate(alts):
                try:
                    res = apply_move(state, alt, self.rules)
                except (IllegalMoveError, IndexError) as exc:
                    raise TaskError(f"illegal alternative: {exc}", f"{where}[{j}]") from None
                if alt == gt or res.key == after.key:
                    raise TaskError("alternative reproduces the ground-truth step", f"{where}[{j}]")

    def to_json(self) -> dict:
        return {
            "id": self.task_id,
            "name": self.name,
            "category": self.category,
            "reactants": self.reactants.canonical_key,
            "products": self.products.canonical_key,
            "goal_mode": self.goal_mode,
            "rules": rules_to_json(self.rules),
            "guidance": self.guidance,
            "ground_truth": [m.to_json() for m in self.ground_truth],
            "states": [s.key for s in self.path.states[1:]],
            "alternatives": [[m.to_json() for m in alts] for alts in self.alternatives],
        }

    @classmethod
    def from_json(cls, doc: Any, validate: bool = True) -> "MechTask":
        if not isinstance(doc, dict):
            raise TaskError("task must be an object")
        for key in ("reactants", "products", "ground_truth", "alternatives"):
            if key not in doc:
                raise TaskError(f"missing field {key!r}")
        smiles = {}
        for key in ("reactants", "products"):
            if not isinstance(doc[key], str):
                raise TaskError("must be a SMILES string", f"$.{key}")
            try:
                smiles[key] = parse_smiles_set(doc[key])
            except ChemError as exc:
                raise TaskError(f"bad SMILES: {exc}", f"$.{key}") from None
        rules = rules_from_json(doc.get("rules"))
        gt = _moves(doc["ground_truth"], "$.ground_truth")
        alts_doc = doc["alternatives"]
        if not isinstance(alts_doc, list):
            raise TaskError("must be a list", "$.alternatives")
        alts = tuple(_moves(a, f"$.alternatives[{i}]") for i, a in enumerate(alts_doc))
        guidance = doc.get("guidance")
        if guidance is not None and not isinstance(guidance, str):
            raise TaskError("must be a string or null", "$.guidance")
        goal_mode = doc.get("goal_mode", "exact")
        if goal_mode not in ("exact", "superset"):
            raise TaskError("must be 'exact' or 'superset'", "$.goal_mode")
        task = cls(
            str(doc.get("id", "")),
            smiles["reactants"],
            smiles["products"],
            gt,
            alts,
            str(doc.get("name", "")),
            str(doc.get("category", "")),
            guidance,
            goal_mode,
            rules,
        )
        if validate:
            task.validate()
            states = doc.get("states")
            if states is not None:
                want = [s.key for s in task.path.states[1:]]
                for i, (got, exp) in enumerate(zip(states, want)):
                    try:
                        ok = parse_smiles_set(got).canonical_key == exp
                    except (ChemError, TypeError):
                        ok = False
                    if not ok:
                        raise TaskError("recorded state does not match the replayed ground truth", f"$.states[{i}]")
        return task


def _moves(doc: Any, path: str) -> tuple[Move, ...]:
    if not isinstance(doc, list):
        raise TaskError("must be a list of moves", path)
    out = []
    for i, m in enumerate(doc):
        try:
            out.append(Move.from_json(m))
        except (ValueError, TypeError) as exc:
            raise TaskError(str(exc), f"{path}[{i}]") from None
    return tuple(out)


def load_mech_task(path: str | os.PathLike, validate: bool = True) -> MechTask:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TaskError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    task = MechTask.from_json(doc, validate)
    if not task.task_id:
        task = replace(task, task_id=Path(path).stem)
    return task


def resolve_states(initial: MechState, states: Sequence[str], rules: MoveRules = MoveRules()) -> tuple[Move, ...]:
    """Moves that walk ``initial`` through the given state SMILES, one move per state."""
    state = MechState(initial.species)
    moves = []
    for i, text in enumerate(states, 1):
        want = parse_smiles_set(text).canonical_key
        for move, child in successors(state, rules):
            if child.key == want:
                moves.append(move)
                state = child
                break
        else:
            raise TaskError(f"no single move leads from {state.key} to {want}", f"$.states[{i - 1}]")
    return tuple(moves)


def build_mech_task(
    task_id: str,
    reactants: str,
    states: Sequence[str],
    *,
    name: str = "",
    category: str = "",
    guidance: str | None = None,
    k: int = 5,
    seed: int = 0,
    rules: MoveRules = MoveRules(),
) -> MechTask:
    """Turn a ground-truth sequence of intermediate states into a task with alternatives.

    The last state is the product set and the goal is matched exactly.
    """
    initial = MechState(parse_smiles_set(reactants))
    gt = resolve_states(initial, states, rules)
    alts = generate_alternatives(initial, gt, k, sub_seed(seed, task_id), rules)
    if alts.short_steps:
        raise TaskError(f"steps {list(alts.short_steps)} have fewer than {k} alternatives")
    task = MechTask(
        task_id,
        initial.species,
        parse_smiles_set(states[-1]),
        gt,
        alts.moves,
        name,
        category,
        guidance,
        "exact",
        rules,
    )
    task.validate(k)
    return task


def bundled_task_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "data" / "mech_tasks"


def load_mech_tasks(directory: str | os.PathLike | None = None, validate: bool = True) -> list[MechTask]:
    d = Path(directory) if directory is not None else bundled_task_dir()
    files = sorted(d.glob("*.json")) if d.is_dir() else [d]
    if not files:
        raise TaskError(f"no task files in {d}")
    tasks = []
    for f in files:
        try:
            tasks.append(load_mech_task(f, validate))
        except TaskError as exc:
            raise TaskError(str(exc).split(": ", 1)[-1], f"{f.name}:{exc.path}") from None
    return tasks


# --- route tasks ---------------------------------------------------------------------


@dataclass
class RouteTask:
    name: str
    target: Any
    prompt: str
    rubric: Rubric
    routes: list[Route]
    expected_ranking: list[list[str]] | None = None

    def __post_init__(self) -> None:
        from ..chem.canon import canonical_form

        want = canonical_form(self.target)
        for r in self.routes:
            if canonical_form(r.target) != want:
                raise TaskError(f"route {r.name!r} does not end at the target")

    @property
    def route_names(self) -> list[str]:
        return [r.name for r in self.routes]


def load_route_task(path: str | os.PathLike) -> RouteTask:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TaskError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise TaskError("route task must be an object")
    for key in ("target", "prompt", "rubric_path", "routes"):
        if key not in doc:
            raise TaskError(f"missing field {key!r}")
    try:
        target = parse_smiles(doc["target"])
    except (ChemError, TypeError) as exc:
        raise TaskError(f"bad SMILES: {exc}", "$.target") from None
    base = path.parent
    try:
        rubric = load_rubric(base / doc["rubric_path"])
    except (OSError, RubricError) as exc:
        raise TaskError(f"cannot load rubric: {exc}", "$.rubric_path") from None
    if not isinstance(doc["routes"], list):
        raise TaskError("must be a list of route files", "$.routes")
    routes = []
    for i, rel in enumerate(doc["routes"]):
        try:
            route = load_route(base / rel)
        except (OSError, RouteError) as exc:
            raise TaskError(f"cannot load route: {exc}", f"$.routes[{i}]") from None
        route.name = Path(rel).stem
        routes.append(route)
    return RouteTask(
        str(doc.get("name", path.stem)),
        target,
        doc["prompt"],
        rubric,
        routes,
        doc.get("expected_ranking"),
    )


def bundled_route_task_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "data" / "route_tasks"


def load_route_tasks(directory: str | os.PathLike | None = None) -> list[RouteTask]:
    d = Path(directory) if directory is not None else bundled_route_task_dir()
    files = sorted(d.glob("*.json")) if d.is_dir() else [d]
    if not files:
        raise TaskError(f"no route task files in {d}")
    return [load_route_task(f) for f in files]
