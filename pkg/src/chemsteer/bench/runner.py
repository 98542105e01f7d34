"""Benchmark runners: mechanism-step discrimination and route ranking."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Sequence

from ..evaluator.base import Evaluation, EvaluatorError, ScoreParseError, prompt_key
from ..evaluator.fixtures import FixtureStore
from ..evaluator.prompts import MechContext, RouteContext, render_mech_prompt, render_route_prompt
from ..mech import MechState, successors
from ..scoring import score_route
from .metrics import (
    MetricsReport,
    RouteTrial,
    StepTrial,
    TaskMetrics,
    bootstrap_ci,
    mean,
    rank_correlation,
    separation,
    strict_top1,
)
from .tasks import MechTask, RouteTask, TaskError, sub_seed

log = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 5


def _evaluate_all(evaluator, requests: list[tuple[str, str, Any]], jobs: int) -> list[Evaluation | EvaluatorError]:
    """Score every request; excluded failures come back as the exception object."""

    def one(req):
        prompt, key, ctx = req
        try:
            return evaluator.evaluate(prompt, key, ctx)
        except ScoreParseError as exc:
            return exc

    if jobs > 1 and len(requests) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, requests))
    return [one(r) for r in requests]


def mech_requests(task: MechTask, repetitions: int) -> list[tuple[int, int, int, str, str, MechContext]]:
    """``(step, repetition, candidate index, prompt, key, context)``; candidate 0 is the ground truth."""
    out = []
    steps = task.path.steps
    for i, gt in enumerate(task.ground_truth):
        history = steps[:i]
        for c, move in enumerate((gt,) + tuple(task.alternatives[i])):
            ctx = MechContext(task.reactants, task.products, history, move, task.guidance, task.rules)
            prompt = render_mech_prompt(ctx)
            for r in range(repetitions):
                out.append((i + 1, r, c, prompt, prompt_key(prompt, r), ctx))
    return out


def run_mech_bench(
    tasks: Sequence[MechTask],
    evaluator,
    repetitions: int = DEFAULT_REPETITIONS,
    jobs: int = 1,
    seed: int = 0,
    progress: Callable[[str], None] | None = None,
) -> MetricsReport:
    """Score each ground-truth move against its alternatives, with ground-truth history.

    A step trial whose scores cannot be parsed is excluded and counted;
    other evaluator errors abort the run.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    name = getattr(evaluator, "name", type(evaluator).__name__)
    rows = []
    for task in tasks:
        reqs = mech_requests(task, repetitions)
        results = _evaluate_all(evaluator, [(p, k, ctx) for _, _, _, p, k, ctx in reqs], jobs)
        table: dict[tuple[int, int], dict[int, Evaluation | EvaluatorError]] = {}
        for (step, rep, c, *_), res in zip(reqs, results):
            table.setdefault((step, rep), {})[c] = res
        trials = []
        for (step, rep) in sorted(table):
            cell = table[(step, rep)]
            errors = [v for v in cell.values() if isinstance(v, EvaluatorError)]
            if errors:
                trials.append(StepTrial(step, rep, None, (), True, str(errors[0])))
                continue
            scores = [float(cell[c].score) for c in sorted(cell)]
            trials.append(StepTrial(step, rep, scores[0], tuple(scores[1:])))
        rows.append(_mech_row(task.task_id, name, repetitions, trials, sub_seed(seed, "ci", task.task_id)))
        if progress:
            progress(f"{task.task_id}: {len(task)} steps x {repetitions} repetitions")
    return MetricsReport("mech", name, rows, seed)


def _mech_row(task_id: str, name: str, repetitions: int, trials: list[StepTrial], ci_seed: int) -> TaskMetrics:
    kept = [t for t in trials if not t.excluded]
    row = TaskMetrics(task_id, name, repetitions, trials=len(trials), step_trials=trials)
    row.excluded_trials = len(trials) - len(kept)
    if not kept:
        return row
    per_step: dict[int, list[float]] = {}
    for t in kept:
        per_step.setdefault(t.step, []).append(separation(t.gt, t.alternatives))
    step_means = [mean(v) for _, v in sorted(per_step.items())]
    row.separation_delta = mean(step_means)
    row.top1_rate = sum(strict_top1(t.gt, t.alternatives) for t in kept) / len(kept)
    ci = bootstrap_ci(step_means, ci_seed)
    if ci is not None:
        row.ci_low, row.ci_high = ci
    return row


def route_requests(task: RouteTask, repetitions: int) -> list[tuple[int, int, str, str, RouteContext]]:
    out = []
    for j, route in enumerate(task.routes):
        ctx = RouteContext.for_route(route, task.prompt)
        prompt = render_route_prompt(ctx)
        for r in range(repetitions):
            out.append((j, r, prompt, prompt_key(prompt, r), ctx))
    return out


def run_route_bench(
    task: RouteTask,
    evaluator,
    repetitions: int = DEFAULT_REPETITIONS,
    jobs: int = 1,
    seed: int = 0,
    method: str = "spearman",
) -> MetricsReport:
    """Correlate evaluator route scores with rubric scores, once per repetition."""
    if len(task.routes) < 3:
        raise TaskError(f"route task {task.name!r} needs at least 3 routes")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    name = getattr(evaluator, "name", type(evaluator).__name__)
    row = route_row(task, evaluator, repetitions, jobs, seed, method)
    return MetricsReport("route", name, [row], seed)


def route_row(task: RouteTask, evaluator, repetitions: int, jobs: int, seed: int, method: str) -> TaskMetrics:
    name = getattr(evaluator, "name", type(evaluator).__name__)
    gt = [float(score_route(r, task.rubric).value) for r in task.routes]
    reqs = route_requests(task, repetitions)
    results = _evaluate_all(evaluator, [(p, k, ctx) for _, _, p, k, ctx in reqs], jobs)
    grid: dict[int, dict[int, Evaluation | EvaluatorError]] = {}
    for (j, r, *_), res in zip(reqs, results):
        grid.setdefault(r, {})[j] = res
    row = TaskMetrics(task.name, name, repetitions, trials=repetitions)
    row.route_names = task.route_names
    row.ground_truth = gt
    corrs = []
    for r in range(repetitions):
        cell = grid[r]
        if any(isinstance(v, EvaluatorError) for v in cell.values()):
            row.excluded_trials += 1
            row.route_trials.append(RouteTrial(r, (), None))
            continue
        scores = tuple(float(cell[j].score) for j in range(len(task.routes)))
        corr = rank_correlation(scores, gt, method) if len(set(gt)) > 1 else None
        if corr is None:
            row.excluded_trials += 1
        else:
            corrs.append(corr)
        row.route_trials.append(RouteTrial(r, scores, corr))
    if len(set(gt)) < 2:
        log.warning("ground-truth scores of %s are constant; correlation is undefined", task.name)
    if corrs:
        row.correlation = mean(corrs)
        ci = bootstrap_ci(corrs, sub_seed(seed, "ci", task.name))
        if ci is not None:
            row.ci_low, row.ci_high = ci
    return row


def run_route_benches(
    tasks: Sequence[RouteTask],
    evaluator,
    repetitions: int = DEFAULT_REPETITIONS,
    jobs: int = 1,
    seed: int = 0,
    method: str = "spearman",
) -> MetricsReport:
    name = getattr(evaluator, "name", type(evaluator).__name__)
    rows = []
    for task in tasks:
        if len(task.routes) < 3:
            raise TaskError(f"route task {task.name!r} needs at least 3 routes")
        rows.append(route_row(task, evaluator, repetitions, jobs, seed, method))
    return MetricsReport("route", name, rows, seed)


# --- fixtures for guided search ---------------------------------------------------------


def record_perfect_fixtures(task: MechTask, store: FixtureStore, guidance: str | None = None) -> int:
    """Store 10 for every ground-truth successor and 0 for the rest, along the ground truth.

    Prompts are rendered exactly as the guided searches render them, so a
    replay evaluator over ``store`` steers beam search and MCTS along the
    ground-truth states.
    """
    state = MechState(task.reactants)
    count = 0
    for want in task.path.states[1:]:
        history = state.path().steps
        nxt = None
        for move, child in successors(state, task.rules):
            ctx = MechContext(task.reactants, task.products, history, move, guidance, task.rules)
            hit = child.key == want.key
            ev = Evaluation(10 if hit else 0, "ground truth" if hit else "off path")
            store.put(prompt_key(render_mech_prompt(ctx)), ev, "perfect")
            count += 1
            if hit:
                nxt = child
        if nxt is None:
            raise TaskError(f"ground-truth state {want.key} is not a successor of {state.key}")
        state = nxt
    return count
