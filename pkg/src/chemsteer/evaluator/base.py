"""Evaluation records, errors, score parsing and cache keys."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass
from typing import Any, Protocol

# bump when either prompt template changes; fixtures bind to it via the key
TEMPLATE_VERSION = "chemsteer-prompts-v1"


@dataclass(frozen=True)
class Evaluation:
    score: float
    rationale: str = ""
    raw: str | None = None
    clamped: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.score <= 10:
            raise ValueError(f"score {self.score} outside [0, 10]")

    def to_json(self) -> dict:
        return asdict(self)


class EvaluatorError(Exception):
    """Any failure to obtain a score. ``context`` says where it happened."""

    def __init__(self, message: str, *, context: str | None = None):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self) -> str:
        return f"{self.context}: {self.message}" if self.context else self.message


class ScoreParseError(EvaluatorError):
    def __init__(self, raw: str, message: str = "no score found in response"):
        super().__init__(message)
        self.raw = raw


class ReplayMissError(EvaluatorError):
    def __init__(self, key: str):
        super().__init__(f"no fixture for key {key}")
        self.key = key


class TransportError(EvaluatorError):
    pass


class NetworkForbiddenError(TransportError):
    pass


class Evaluator(Protocol):
    name: str

    def evaluate(self, prompt: str, key: str, context: Any = None) -> Evaluation: ...


def prompt_hash(prompt: str) -> str:
    digest = hashlib.sha256(f"{TEMPLATE_VERSION}\n{prompt}".encode("utf-8")).hexdigest()
    return digest[:32]


def prompt_key(prompt: str, repetition: int = 0) -> str:
    """Cache/fixture key for one scoring request."""
    return f"{prompt_hash(prompt)}#{repetition}"


_SCORE_TEXT = re.compile(r"score\s*[:=]?\s*\**\s*(-?\d+(?:\.\d+)?)\s*(/\s*10)?", re.IGNORECASE)


def _clamp(value: float) -> tuple[float, bool]:
    if value < 0:
        return 0, True
    if value > 10:
        return 10, True
    return value, False


def parse_score(raw: str) -> Evaluation:
    """Pull a 0-10 score out of a model reply.

    The first JSON object carrying an integer ``score`` wins; otherwise a
    ``score: N`` / ``Score N/10`` phrase is accepted. Out-of-range values
    are clamped and flagged.
    """
    if not raw or not raw.strip():
        raise ScoreParseError(raw or "", "empty response")
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", raw):
        try:
            obj, _ = decoder.raw_decode(raw, m.start())
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict):
            continue
        score = obj.get("score")
        if isinstance(score, bool):
            continue
        if isinstance(score, float) and score.is_integer():
            score = int(score)
        if isinstance(score, int):
            value, clamped = _clamp(score)
            rationale = obj.get("rationale", "")
            return Evaluation(value, rationale if isinstance(rationale, str) else str(rationale), raw, clamped)
    m = _SCORE_TEXT.search(raw)
    if m:
        number = float(m.group(1))
        if number.is_integer():
            value, clamped = _clamp(int(number))
            return Evaluation(value, raw.strip(), raw, clamped)
    raise ScoreParseError(raw)
