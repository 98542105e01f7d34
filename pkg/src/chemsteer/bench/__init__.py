"""Mechanism and route benchmarks: task bundles, runners and metrics."""

from .metrics import (
    BOOTSTRAP_RESAMPLES,
    CSV_COLUMNS,
    MetricsReport,
    RouteTrial,
    StepTrial,
    TaskMetrics,
    bootstrap_ci,
    emit_report,
    load_report,
    rank_correlation,
    separation,
    strict_top1,
)
from .runner import (
    DEFAULT_REPETITIONS,
    mech_requests,
    record_perfect_fixtures,
    route_requests,
    run_mech_bench,
    run_route_bench,
    run_route_benches,
)
from .tasks import (
    Alternatives,
    MechTask,
    RouteTask,
    TaskError,
    build_mech_task,
    bundled_route_task_dir,
    bundled_task_dir,
    generate_alternatives,
    load_mech_task,
    load_mech_tasks,
    load_route_task,
    load_route_tasks,
    sub_seed,
)

__all__ = [
    "BOOTSTRAP_RESAMPLES",
    "CSV_COLUMNS",
    "DEFAULT_REPETITIONS",
    "Alternatives",
    "MechTask",
    "MetricsReport",
    "RouteTask",
    "RouteTrial",
    "StepTrial",
    "TaskError",
    "TaskMetrics",
    "bootstrap_ci",
    "build_mech_task",
    "bundled_route_task_dir",
    "bundled_task_dir",
    "emit_report",
    "generate_alternatives",
    "load_mech_task",
    "load_mech_tasks",
    "load_report",
    "load_route_task",
    "load_route_tasks",
    "mech_requests",
    "rank_correlation",
    "record_perfect_fixtures",
    "route_requests",
    "run_mech_bench",
    "run_route_bench",
    "run_route_benches",
    "separation",
    "strict_top1",
    "sub_seed",
]
