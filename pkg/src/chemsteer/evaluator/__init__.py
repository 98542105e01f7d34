"""Judges that score mechanism steps and routes on a 0-10 scale."""

from .base import (
    TEMPLATE_VERSION,
    Evaluation,
    Evaluator,
    EvaluatorError,
    NetworkForbiddenError,
    ReplayMissError,
    ScoreParseError,
    TransportError,
    parse_score,
    prompt_hash,
    prompt_key,
)
from .fixtures import FixtureFormatError, FixtureStore, atomic_write_text
from .impls import (
    CallableEvaluator,
    HeuristicEvaluator,
    RandomEvaluator,
    RecordingEvaluator,
    RemoteConfig,
    RemoteEvaluator,
    ReplayEvaluator,
)
from .prompts import MechContext, RouteContext, render_mech_prompt, render_route_prompt

__all__ = [
    "TEMPLATE_VERSION",
    "CallableEvaluator",
    "Evaluation",
    "Evaluator",
    "EvaluatorError",
    "FixtureFormatError",
    "FixtureStore",
    "HeuristicEvaluator",
    "MechContext",
    "NetworkForbiddenError",
    "RandomEvaluator",
    "RecordingEvaluator",
    "RemoteConfig",
    "RemoteEvaluator",
    "ReplayEvaluator",
    "ReplayMissError",
    "RouteContext",
    "ScoreParseError",
    "TransportError",
    "atomic_write_text",
    "parse_score",
    "prompt_hash",
    "prompt_key",
    "render_mech_prompt",
    "render_route_prompt",
]
