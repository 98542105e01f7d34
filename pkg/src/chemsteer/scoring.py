"""Declarative ground-truth rubrics for route strategy, and the route scorer.

A rubric is a weighted list of clauses. Each clause names a detector (an event
looked for in the route) and a position weighting. Step detectors report the
steps where the event happens; route detectors report a single yes/no.

Clause scores:
  * event absent: 0
  * position ``none`` (and every route detector): 10
  * ``prefer_early``: 10 * f, with f the depth fraction of the best hit
  * ``prefer_late``: 10 * (1 + 1/D - f), clamped to (0, 10]

The rubric score is the weight-normalized mean of clause scores, rounded half
up to one decimal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any

from .chem.molecule import Molecule
from .evaluator.base import Evaluation, EvaluatorError
from .patterns import (
    Pattern,
    PatternError,
    count_matches,
    get_template,
    parse_pattern,
    ring_events,
)
from .routes import Route, ReactionStep, depth_fraction

POSITION_WEIGHTS = ("none", "prefer_early", "prefer_late")
TEN = Fraction(10)


class RubricError(ValueError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def _fraction(value: Any, path: str) -> Fraction:
    if isinstance(value, bool):
        raise RubricError("expected a number", path)
    try:
        if isinstance(value, float):
            return Fraction(str(value))
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise RubricError(f"not a rational number: {value!r}", path) from None


@lru_cache(maxsize=65536)
def _count(p: Pattern, m: Molecule) -> int:
    return count_matches(p, m)


# --- detectors ------------------------------------------------------------------


class Detector:
    kind = ""
    step_level = True

    def hits(self, route: Route) -> list[str]:
        """Step ids where the event occurs (step detectors)."""
        return [s.step_id for s in route.steps if self.at_step(route, s)]

    def at_step(self, route: Route, step: ReactionStep) -> bool:
        raise NotImplementedError

    def holds(self, route: Route) -> bool:
        """Route detectors: whether the route has the property."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class RingFormed(Detector):
    template: Pattern
    kind = "ring_formed"

    def at_step(self, route, step):
        return any(e.kind == "formed" for e in ring_events(step.reactants, step.product, [self.template]))

    def to_json(self):
        return {"kind": self.kind, "template": self.template.name}


@dataclass(frozen=True)
class RingBroken(Detector):
    template: Pattern
    kind = "ring_broken"

    def at_step(self, route, step):
        return any(e.kind == "broken" for e in ring_events(step.reactants, step.product, [self.template]))

    def to_json(self):
        return {"kind": self.kind, "template": self.template.name}


@dataclass(frozen=True)
class NoRingChange(Detector):
    """No step changes the number of rings of any size."""

    kind = "no_ring_change"
    step_level = False

    def holds(self, route):
        return not any(ring_events(s.reactants, s.product) for s in route.steps)

    def to_json(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class CommercialSource(Detector):
    """The ring is bought: an in-stock starting material has it and no step forms it."""

    template: Pattern
    kind = "commercial_source"
    step_level = False

    def holds(self, route):
        if not any(leaf.in_stock and _count(self.template, leaf.mol) for leaf in route.leaves):
            return False
        formed = RingFormed(self.template)
        return not any(formed.at_step(route, s) for s in route.steps)

    def to_json(self):
        return {"kind": self.kind, "template": self.template.name}


@dataclass(frozen=True)
class StepUses(Detector):
    """The step changes the number of matches of a pattern (either direction by default)."""

    pattern: Pattern
    direction: str = "any"
    named: bool = True
    kind = "step_uses"

    def at_step(self, route, step):
        before = sum(_count(self.pattern, r) for r in step.reactants)
        after = _count(self.pattern, step.product)
        if self.direction == "formed":
            return after > before
        if self.direction == "consumed":
            return after < before
        return after != before

    def to_json(self):
        d: dict = {"kind": self.kind}
        if self.named:
            d["template"] = self.pattern.name
        else:
            d["pattern"] = self.pattern.source
        if self.direction != "any":
            d["direction"] = self.direction
        return d


@dataclass(frozen=True)
class Ordering(Detector):
    """``before`` happens deeper in the route than ``after``."""

    before: Detector
    after: Detector
    kind = "ordering"
    step_level = False

    def holds(self, route):
        dist = route.step_distances()
        a = [dist[s] for s in self.before.hits(route)]
        b = [dist[s] for s in self.after.hits(route)]
        return bool(a and b) and max(a) > min(b)

    def to_json(self):
        return {"kind": self.kind, "before": self.before.to_json(), "after": self.after.to_json()}


@dataclass(frozen=True)
class Joins(Detector):
    """The step connects a reactant carrying all ``left`` rings to another carrying all ``right`` rings."""

    left: tuple[Pattern, ...]
    right: tuple[Pattern, ...]
    kind = "joins"

    def _has(self, m: Molecule, group: tuple[Pattern, ...]) -> bool:
        need: dict[Pattern, int] = {}
        for p in group:
            need[p] = need.get(p, 0) + 1
        return all(_count(p, m) >= n for p, n in need.items())

    def at_step(self, route, step):
        species = list(step.reactants)
        if not (self._has(step.product, self.left) and self._has(step.product, self.right)):
            return False
        for i, a in enumerate(species):
            if not self._has(a, self.left):
                continue
            for j, b in enumerate(species):
                if i != j and self._has(b, self.right):
                    return True
        return False

    def to_json(self):
        return {
            "kind": self.kind,
            "left": [p.name for p in self.left],
            "right": [p.name for p in self.right],
        }


@dataclass(frozen=True)
class BalancedSplit(Detector):
    """The two largest reactants have heavy-atom counts within ``min_ratio`` of each other."""

    min_ratio: Fraction = Fraction(1, 2)
    kind = "balanced_split"

    def at_step(self, route, step):
        sizes = sorted((m.heavy_atom_count() for m in step.reactants), reverse=True)
        return len(sizes) >= 2 and sizes[0] > 0 and Fraction(sizes[1], sizes[0]) >= self.min_ratio

    def to_json(self):
        return {"kind": self.kind, "min_ratio": str(self.min_ratio)}


@dataclass(frozen=True)
class AllOf(Detector):
    """Every sub-detector fires on the same step."""

    detectors: tuple[Detector, ...]
    kind = "all_of"

    def at_step(self, route, step):
        return all(d.at_step(route, step) for d in self.detectors)

    def to_json(self):
        return {"kind": self.kind, "detectors": [d.to_json() for d in self.detectors]}


def _template(name: Any, path: str) -> Pattern:
    if not isinstance(name, str):
        raise RubricError("template name must be a string", path)
    try:
        return get_template(name)
    except PatternError:
        raise RubricError(f"unknown template {name!r}", path) from None


def compile_detector(doc: Any, path: str = "$") -> Detector:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise RubricError("detector must be an object with a 'kind'", path)
    kind = doc["kind"]
    if kind in ("ring_formed", "ring_broken", "commercial_source"):
        tpl = _template(doc.get("template"), path + ".template")
        return {"ring_formed": RingFormed, "ring_broken": RingBroken, "commercial_source": CommercialSource}[kind](tpl)
    if kind == "no_ring_change":
        return NoRingChange()
    if kind == "step_uses":
        direction = doc.get("direction", "any")
        if direction not in ("any", "formed", "consumed"):
            raise RubricError(f"unknown direction {direction!r}", path + ".direction")
        if "template" in doc:
            return StepUses(_template(doc["template"], path + ".template"), direction, True)
        if isinstance(doc.get("pattern"), str):
            try:
                return StepUses(parse_pattern(doc["pattern"], doc["pattern"]), direction, False)
            except PatternError as exc:
                raise RubricError(str(exc), path + ".pattern") from None
        raise RubricError("step_uses needs 'template' or 'pattern'", path)
    if kind == "ordering":
        before = compile_detector(doc.get("before"), path + ".before")
        after = compile_detector(doc.get("after"), path + ".after")
        for d, p in ((before, ".before"), (after, ".after")):
            if not d.step_level:
                raise RubricError("ordering compares step detectors", path + p)
        return Ordering(before, after)
    if kind == "joins":
        sides = []
        for side in ("left", "right"):
            names = doc.get(side)
            if not isinstance(names, list) or not names:
                raise RubricError(f"'{side}' must be a non-empty list of templates", f"{path}.{side}")
            sides.append(tuple(_template(n, f"{path}.{side}[{i}]") for i, n in enumerate(names)))
        return Joins(*sides)
    if kind == "balanced_split":
        ratio = _fraction(doc.get("min_ratio", "1/2"), path + ".min_ratio")
        if not 0 < ratio <= 1:
            raise RubricError("min_ratio must be in (0, 1]", path + ".min_ratio")
        return BalancedSplit(ratio)
    if kind == "all_of":
        subs = doc.get("detectors")
        if not isinstance(subs, list) or not subs:
            raise RubricError("'detectors' must be a non-empty list", path + ".detectors")
        parts = tuple(compile_detector(d, f"{path}.detectors[{i}]") for i, d in enumerate(subs))
        if not all(p.step_level for p in parts):
            raise RubricError("all_of combines step detectors only", path)
        return AllOf(parts)
    raise RubricError(f"unknown detector kind {kind!r}", path + ".kind")


# --- rubric ---------------------------------------------------------------------


@dataclass(frozen=True)
class Clause:
    detector: Detector
    position_weight: str = "none"
    weight: Fraction = Fraction(1)

    def to_json(self) -> dict:
        return {
            "detector": self.detector.to_json(),
            "position_weight": self.position_weight,
            "weight": str(self.weight),
        }


@dataclass(frozen=True)
class Rubric:
    clauses: tuple[Clause, ...]
    name: str = ""
    prompt: str = ""

    def __post_init__(self) -> None:
        if not self.clauses:
            raise RubricError("a rubric needs at least one clause")
        for c in self.clauses:
            if c.weight <= 0:
                raise RubricError("clause weights must be positive")
            if c.position_weight not in POSITION_WEIGHTS:
                raise RubricError(f"unknown position weight {c.position_weight!r}")

    def to_json(self) -> dict:
        return {"name": self.name, "prompt": self.prompt, "clauses": [c.to_json() for c in self.clauses]}


def compile_rubric(doc: str | dict) -> Rubric:
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise RubricError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise RubricError("rubric must be an object")
    raw = doc.get("clauses")
    if not isinstance(raw, list) or not raw:
        raise RubricError("'clauses' must be a non-empty list", "$.clauses")
    clauses = []
    for i, c in enumerate(raw):
        path = f"$.clauses[{i}]"
        if not isinstance(c, dict):
            raise RubricError("clause must be an object", path)
        det = compile_detector(c.get("detector"), path + ".detector")
        pos = c.get("position_weight", "none")
        if pos not in POSITION_WEIGHTS:
            raise RubricError(f"unknown position weight {pos!r}", path + ".position_weight")
        if pos != "none" and not det.step_level:
            raise RubricError(f"{det.kind} is a whole-route detector; position weight must be 'none'", path)
        weight = _fraction(c.get("weight", 1), path + ".weight")
        if weight <= 0:
            raise RubricError("weight must be positive", path + ".weight")
        clauses.append(Clause(det, pos, weight))
    name = doc.get("name", "")
    prompt = doc.get("prompt", "")
    if not isinstance(name, str) or not isinstance(prompt, str):
        raise RubricError("'name' and 'prompt' must be strings")
    return Rubric(tuple(clauses), name, prompt)


def load_rubric(path) -> Rubric:
    with open(path, encoding="utf-8") as fh:
        return compile_rubric(fh.read())


# --- scoring --------------------------------------------------------------------


@dataclass(frozen=True)
class ClauseTrace:
    detector: dict
    position_weight: str
    weight: Fraction
    hits: tuple[tuple[str, Fraction], ...]  # (step id, depth fraction); empty for route detectors
    present: bool
    score: Fraction

    def to_json(self) -> dict:
        return {
            "detector": self.detector,
            "position_weight": self.position_weight,
            "weight": str(self.weight),
            "hits": [[s, str(f)] for s, f in self.hits],
            "present": self.present,
            "score": str(self.score),
        }


def round_half_up(x: Fraction, places: int = 1) -> Fraction:
    scale = 10**places
    return Fraction(math.floor(x * scale + Fraction(1, 2)), scale)


@dataclass(frozen=True)
class GroundTruthScore:
    value: Fraction
    trace: tuple[ClauseTrace, ...] = field(default=())

    def __float__(self) -> float:
        return float(self.value)

    @property
    def unrounded(self) -> Fraction:
        total = sum((t.weight for t in self.trace), Fraction(0))
        return sum((t.weight * t.score for t in self.trace), Fraction(0)) / total

    def recompute(self) -> Fraction:
        return round_half_up(self.unrounded)

    def to_json(self) -> dict:
        return {"value": str(self.value), "clauses": [t.to_json() for t in self.trace]}


def clause_score(position_weight: str, fractions: list[Fraction], depth: int) -> Fraction:
    if not fractions:
        return Fraction(0)
    if position_weight == "prefer_early":
        return TEN * max(fractions)
    if position_weight == "prefer_late":
        best = TEN * (1 + Fraction(1, depth) - min(fractions))
        return min(TEN, best)
    return TEN


def score_route(route: Route, rubric: Rubric) -> GroundTruthScore:
    traces = []
    for clause in rubric.clauses:
        det = clause.detector
        if det.step_level:
            hits = tuple((sid, depth_fraction(route, sid)) for sid in det.hits(route))
            present = bool(hits)
            score = clause_score(clause.position_weight, [f for _, f in hits], route.depth)
        else:
            hits = ()
            present = det.holds(route)
            score = TEN if present else Fraction(0)
        traces.append(ClauseTrace(det.to_json(), clause.position_weight, clause.weight, hits, present, score))
    result = GroundTruthScore(Fraction(0), tuple(traces))
    return GroundTruthScore(result.recompute(), result.trace)


class RubricEvaluator:
    """Use a rubric as the judge: the route's ground-truth score is the answer."""

    def __init__(self, rubric: Rubric):
        self.rubric = rubric
        self.name = f"rubric:{rubric.name or 'unnamed'}"

    def evaluate(self, prompt: str, key: str, context: Any = None):
        route = getattr(context, "route", None)
        if route is None:
            raise EvaluatorError("rubric evaluator needs a route context")
        gt = score_route(route, self.rubric)
        return Evaluation(float(gt.value), json.dumps(gt.to_json(), sort_keys=True))

