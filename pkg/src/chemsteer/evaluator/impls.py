"""The interchangeable judges: random, heuristic, replay, remote, recording."""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable

import httpx

from ..chem.elements import DEFAULT_VALENCE
from ..mech import IllegalMoveError, apply_move
from .base import (
    Evaluation,
    EvaluatorError,
    NetworkForbiddenError,
    ReplayMissError,
    TransportError,
    parse_score,
)
from .fixtures import FixtureStore
from .prompts import MechContext, RouteContext

log = logging.getLogger(__name__)


def _unit_interval(*parts: object) -> float:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


class RandomEvaluator:
    """Scores drawn from a hash of ``(seed, key)``.

    By default the score is continuous on [0, 10]; ``integer=True`` gives
    uniform integers 0..10 instead (ties then become common).
    """

    def __init__(self, seed: int, integer: bool = False):
        self.seed = seed
        self.integer = integer
        self.name = f"random(seed={seed}{', integer' if integer else ''})"

    def evaluate(self, prompt: str, key: str, context: Any = None) -> Evaluation:
        u = _unit_interval(self.seed, key)
        score = float(int(u * 11)) if self.integer else u * 10
        return Evaluation(score, "random score")


# --- heuristic -----------------------------------------------------------------


def _fingerprint(molecules) -> Counter:
    """Multiset of atom environments: element, charge, H count, bonded neighbours."""
    fp: Counter = Counter()
    for m in molecules:
        for i, a in enumerate(m.atoms):
            env = tuple(sorted((m.atoms[j].element, o) for j, o in m.neighbors[i]))
            fp[(a.element, a.formal_charge, a.hydrogen_count, env)] += 1
    return fp


def _similarity(a: Counter, b: Counter) -> float:
    union = sum((a | b).values())
    return sum((a & b).values()) / union if union else 1.0


def _charge_load(molecules) -> int:
    return sum(abs(a.formal_charge) for m in molecules for a in m.atoms)


def _full_octets(molecules) -> int:
    cap = DEFAULT_VALENCE.capacity
    total = 0
    for m in molecules:
        for i, a in enumerate(m.atoms):
            if not a.is_spectator and m.domains(i) == cap(a.element):
                total += 1
    return total


class HeuristicEvaluator:
    """Rule-of-thumb judge used as an offline baseline.

    Mechanism steps start at 5 and move with the change in total charge
    magnitude, in the number of atoms with a full valence shell, and in the
    atom-environment overlap with the products. Routes start at 10 and lose
    points for unbalanced steps, non-commercial leaves and length.
    """

    name = "heuristic"

    def evaluate(self, prompt: str, key: str, context: Any = None) -> Evaluation:
        if isinstance(context, MechContext):
            return self._mech(context)
        if isinstance(context, RouteContext) and context.route is not None:
            return self._route(context)
        raise EvaluatorError("heuristic evaluator needs a mechanism or route context")

    def _mech(self, ctx: MechContext) -> Evaluation:
        before = ctx.state
        try:
            after = apply_move(before, ctx.candidate, ctx.rules)
        except IllegalMoveError as exc:
            return Evaluation(0, f"illegal move: {exc}")
        target = _fingerprint(ctx.products)
        d_charge = _charge_load(before.species) - _charge_load(after.species)
        d_octet = _full_octets(after.species) - _full_octets(before.species)
        d_sim = _similarity(_fingerprint(after.species), target) - _similarity(_fingerprint(before.species), target)
        raw = 5 + 1.5 * d_charge + 1.0 * d_octet + 10 * d_sim
        score = max(0, min(10, round(raw)))
        return Evaluation(
            score,
            f"charge change {d_charge:+d}, full shells {d_octet:+d}, product overlap {d_sim:+.3f}",
        )

    def _route(self, ctx: RouteContext) -> Evaluation:
        route = ctx.route
        penalty = 0.0
        notes = []
        for step in route.steps:
            have = Counter()
            for r in step.reactants:
                have.update(r.element_counts())
            want = step.product.element_counts()
            missing = sum(max(0, c - have[e]) for e, c in want.items() if e != "H")
            if missing:
                penalty += 2
                notes.append(f"{step.step_id}: product has atoms no reactant supplies")
        missing_leaves = sum(1 for leaf in route.leaves if not route.in_stock(leaf))
        penalty += 1.5 * missing_leaves
        if missing_leaves:
            notes.append(f"{missing_leaves} starting material(s) not in stock")
        penalty += 0.25 * max(0, len(route.steps) - 3)
        score = max(0, min(10, round(10 - penalty)))
        return Evaluation(score, "; ".join(notes) or "no structural problems found")


# --- replay / recording --------------------------------------------------------


class ReplayEvaluator:
    """Look scores up in a fixture store; misses raise unless ``miss_score`` is set."""

    def __init__(self, store: FixtureStore, miss_score: float | None = None, name: str = "replay"):
        self.store = store
        self.miss_score = miss_score
        self.name = name

    def evaluate(self, prompt: str, key: str, context: Any = None) -> Evaluation:
        ev = self.store.get(key)
        if ev is not None:
            return ev
        if self.miss_score is not None:
            return Evaluation(self.miss_score, "no fixture")
        raise ReplayMissError(key)


class RecordingEvaluator:
    """Wrap another evaluator and store every answer it gives."""

    def __init__(self, inner, store: FixtureStore):
        self.inner = inner
        self.store = store
        self.name = inner.name

    def evaluate(self, prompt: str, key: str, context: Any = None) -> Evaluation:
        ev = self.inner.evaluate(prompt, key, context)
        self.store.put(key, ev, self.inner.name)
        return ev


class CallableEvaluator:
    """Adapter for plain ``f(prompt, key, context) -> score`` functions."""

    def __init__(self, fn: Callable[[str, str, Any], float], name: str = "callable"):
        self.fn = fn
        self.name = name

    def evaluate(self, prompt: str, key: str, context: Any = None) -> Evaluation:
        return Evaluation(self.fn(prompt, key, context))


# --- remote --------------------------------------------------------------------


@dataclass(frozen=True)
class RemoteConfig:
    endpoint: str
    model: str
    temperature: float = 0.1
    max_retries: int = 3
    timeout: float = 60.0
    credential_env: str | None = "CHEMSTEER_API_KEY"
    max_in_flight: int = 4
    backoff: float = 1.0

    def __post_init__(self) -> None:
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def _message_text(data: Any) -> str:
    try:
        if "choices" in data:
            msg = data["choices"][0]["message"]
            return msg["content"]
        if "message" in data:
            return data["message"]["content"]
        return data["content"]
    except (KeyError, IndexError, TypeError):
        raise EvaluatorError("response has no assistant message") from None


class RemoteEvaluator:
    """Plain chat-completion client with retries and bounded concurrency."""

    def __init__(self, config: RemoteConfig, client: httpx.Client | None = None, offline: bool = False):
        self.config = config
        self.name = config.model
        self.offline = offline
        self._client = client
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self.calls = 0

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        env = self.config.credential_env
        if env:
            token = os.environ.get(env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _client_or_new(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.config.timeout)
        return self._client

    def complete(self, prompt: str) -> str:
        if self.offline:
            raise NetworkForbiddenError("network access is disabled in replay mode")
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    self.calls += 1
                    resp = self._client_or_new().post(self.config.endpoint, json=body, headers=self._headers())
            except httpx.HTTPError as exc:
                last = exc
                log.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = TransportError(f"HTTP {resp.status_code}")
                log.warning("server answered %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return _message_text(resp.json())
            except ValueError:
                raise TransportError("response is not JSON") from None
        raise TransportError(f"giving up after {self.config.max_retries + 1} attempts: {last}")

    def evaluate(self, prompt: str, key: str, context: Any = None) -> Evaluation:
        return parse_score(self.complete(prompt))

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
