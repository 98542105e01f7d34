"""Prompt rendering for mechanism steps and synthesis routes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

from ..chem.molecule import MolSet
from ..mech import DEFAULT_RULES, MechState, Move, MoveRules, render_move

MECH_RULES = """\
Mechanisms are written as sequences of two elementary moves.
1. Ionization: the order of one bond decreases by one and both electrons of
   that bond move onto one of its two atoms. That atom gains a formal charge
   of -1 and the other atom +1. A bond whose order reaches 0 is removed.
2. Attack: an atom with a lone pair forms a bond to an atom with an empty
   orbital, or raises the order of an existing bond between them by one.
   The attacking atom gains a formal charge of +1, the attacked atom -1.
Bonds to hydrogen take part like any other bond: ionizing an X-H bond
releases a proton (pair kept by X) or a hydride (pair kept by H)."""

OUTPUT_INSTRUCTION = """\
Answer with a single JSON object and nothing else:
{"score": <integer from 0 to 10>, "rationale": "<short explanation>"}"""


@dataclass(frozen=True)
class MechContext:
    """Everything the judge sees for one candidate step.

    ``history`` holds ``(move, resulting state)`` pairs chaining from
    ``MechState(reactants)``; ``state`` is the state the candidate applies
    to (the last history state, or the reactants).
    """

    reactants: MolSet
    products: MolSet
    history: tuple[tuple[Move, MechState], ...]
    candidate: Move
    guidance: str | None = None
    rules: MoveRules = DEFAULT_RULES

    @property
    def state(self) -> MechState:
        return self.history[-1][1] if self.history else MechState(self.reactants)

    @property
    def step_number(self) -> int:
        return len(self.history) + 1


@dataclass(frozen=True)
class RouteContext:
    route_text: str
    query: str
    route: Any = field(default=None, compare=False, repr=False)

    @classmethod
    def for_route(cls, route, query: str) -> "RouteContext":
        from ..routes import route_to_text

        return cls(route_to_text(route), query, route)


@lru_cache(maxsize=65536)
def _render_cached(state: MechState, move: Move, rules: MoveRules) -> str:
    return render_move(state, move, rules)


def _indent(text: str, prefix: str = "   ") -> str:
    return "\n".join(prefix + line for line in text.splitlines())


def render_mech_prompt(ctx: MechContext) -> str:
    parts = [
        "You are judging one proposed step of a reaction mechanism.",
        "",
        "Rules:",
        MECH_RULES,
        "",
        f"Reaction: {ctx.reactants.canonical_key} >> {ctx.products.canonical_key}",
        "",
        "Mechanism so far:",
    ]
    prev = MechState(ctx.reactants)
    if not ctx.history:
        parts.append("   (no steps yet)")
    for i, (move, state) in enumerate(ctx.history, 1):
        parts.append(f"step {i}:")
        parts.append(_indent(_render_cached(prev, move, ctx.rules)))
        prev = state
    parts += [
        "",
        f"Proposed step {ctx.step_number}:",
        _indent(_render_cached(prev, ctx.candidate, ctx.rules)),
    ]
    if ctx.guidance:
        parts += ["", "Guidance:", ctx.guidance]
    parts += [
        "",
        "Score the proposed step from 0 to 10 by how well it agrees with chemical "
        "principles and leads toward the products of this reaction.",
        OUTPUT_INSTRUCTION,
    ]
    return "\n".join(parts) + "\n"


def render_route_prompt(ctx: RouteContext) -> str:
    parts = [
        "You are judging a synthesis route against a request from a chemist.",
        "Steps are listed in the forward direction, from starting materials to the target;",
        "each step reads 'reactants >> product'.",
        "",
        ctx.route_text.rstrip("\n"),
        "",
        "Request:",
        ctx.query,
        "",
        "Score from 0 to 10 how well the route satisfies the request.",
        OUTPUT_INSTRUCTION,
    ]
    return "\n".join(parts) + "\n"

