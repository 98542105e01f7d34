"""Benchmark metrics and the report format (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

CSV_COLUMNS = (
    "task_id",
    "model_or_evaluator",
    "repetitions",
    "separation_delta",
    "top1_rate",
    "correlation",
    "ci_low",
    "ci_high",
    "excluded_trials",
    "separation_delta_normalized",
)

BOOTSTRAP_RESAMPLES = 10_000


def mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def separation(gt: float, alternatives: Sequence[float]) -> float:
    """Ground-truth score minus the mean alternative score."""
    return gt - mean(alternatives)


def strict_top1(gt: float, alternatives: Sequence[float]) -> bool:
    return all(gt > a for a in alternatives)


def rank_correlation(x: Sequence[float], y: Sequence[float], method: str = "spearman") -> float | None:
    """Spearman (default) or Pearson correlation; None when undefined (a constant vector)."""
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need two equally long vectors with at least two entries")
    if len(set(x)) < 2 or len(set(y)) < 2:
        return None
    if method == "spearman":
        r = stats.spearmanr(x, y).statistic
    elif method == "pearson":
        r = stats.pearsonr(x, y).statistic
    else:
        raise ValueError(f"unknown correlation method {method!r}")
    return float(r)


def bootstrap_ci(values: Sequence[float], seed: int, level: float = 0.95) -> tuple[float, float] | None:
    """Percentile bootstrap interval for the mean of ``values``."""
    if not values:
        return None
    if len(set(values)) == 1:
        return (float(values[0]), float(values[0]))
    rng = np.random.default_rng(seed)
    res = stats.bootstrap(
        (np.asarray(values, dtype=float),),
        np.mean,
        n_resamples=BOOTSTRAP_RESAMPLES,
        confidence_level=level,
        method="percentile",
        random_state=rng,
    )
    return (float(res.confidence_interval.low), float(res.confidence_interval.high))


@dataclass(frozen=True)
class StepTrial:
    """Scores of one mechanism step in one repetition."""

    step: int
    repetition: int
    gt: float | None
    alternatives: tuple[float, ...] = ()
    excluded: bool = False
    error: str | None = None


@dataclass(frozen=True)
class RouteTrial:
    repetition: int
    scores: tuple[float, ...]
    correlation: float | None


@dataclass
class TaskMetrics:
    task_id: str
    evaluator: str
    repetitions: int
    separation_delta: float | None = None
    top1_rate: float | None = None
    correlation: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    excluded_trials: int = 0
    trials: int = 0
    step_trials: list[StepTrial] = field(default_factory=list)
    route_names: list[str] = field(default_factory=list)
    ground_truth: list[float] = field(default_factory=list)
    route_trials: list[RouteTrial] = field(default_factory=list)

    @property
    def separation_delta_normalized(self) -> float | None:
        return None if self.separation_delta is None else self.separation_delta / 10

    def csv_row(self) -> list[str]:
        vals = [
            self.task_id,
            self.evaluator,
            self.repetitions,
            self.separation_delta,
            self.top1_rate,
            self.correlation,
            self.ci_low,
            self.ci_high,
            self.excluded_trials,
            self.separation_delta_normalized,
        ]
        return ["" if v is None else repr(v) if isinstance(v, float) else str(v) for v in vals]

    def to_json(self) -> dict:
        d = asdict(self)
        d["step_trials"] = [asdict(t) for t in self.step_trials]
        d["route_trials"] = [asdict(t) for t in self.route_trials]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "TaskMetrics":
        d = dict(d)
        d["step_trials"] = [
            StepTrial(**{**t, "alternatives": tuple(t["alternatives"])}) for t in d.get("step_trials", [])
        ]
        d["route_trials"] = [RouteTrial(**{**t, "scores": tuple(t["scores"])}) for t in d.get("route_trials", [])]
        return cls(**d)


@dataclass
class MetricsReport:
    kind: str  # "mech" or "route"
    evaluator: str
    rows: list[TaskMetrics]
    seed: int | None = None

    def pooled_top1(self) -> tuple[float, int]:
        """Strict top-1 rate over every included mechanism trial, and the trial count."""
        flags = [
            strict_top1(t.gt, t.alternatives) for r in self.rows for t in r.step_trials if not t.excluded
        ]
        if not flags:
            return (float("nan"), 0)
        return (sum(flags) / len(flags), len(flags))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "evaluator": self.evaluator,
            "seed": self.seed,
            "rows": [r.to_json() for r in self.rows],
        }

    @classmethod
    def from_json(cls, d: dict) -> "MetricsReport":
        return cls(d["kind"], d["evaluator"], [TaskMetrics.from_json(r) for r in d["rows"]], d.get("seed"))


def emit_report(report: MetricsReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), indent=1, sort_keys=True, allow_nan=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in report.rows:
            w.writerow(row.csv_row())
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def load_report(text: str) -> MetricsReport:
    return MetricsReport.from_json(json.loads(text))
