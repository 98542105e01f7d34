"""Command-line entry point.

Exit codes: 0 success, 1 data or domain failure, 2 usage error,
3 evaluator or transport failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .bench import (
    MechTask,
    MetricsReport,
    TaskError,
    bundled_route_task_dir,
    bundled_task_dir,
    emit_report,
    generate_alternatives,
    load_mech_task,
    load_mech_tasks,
    load_route_tasks,
    mech_requests,
    rank_correlation,
    record_perfect_fixtures,
    route_requests,
    run_mech_bench,
    sub_seed,
)
from .bench.runner import route_row
from .bench.tasks import build_mech_task
from .chem import ChemError, parse_smiles_set
from .evaluator import (
    EvaluatorError,
    FixtureFormatError,
    FixtureStore,
    HeuristicEvaluator,
    RandomEvaluator,
    RecordingEvaluator,
    RemoteConfig,
    RemoteEvaluator,
    ReplayEvaluator,
    RouteContext,
    atomic_write_text,
    prompt_key,
    render_route_prompt,
)
from .mech import MechState, MoveRules, render_move
from .routes import RouteError, load_route
from .scoring import RubricError, RubricEvaluator, load_rubric, score_route
from .search import MCTSConfig, SearchBudgetError, SearchConfig, bfs_search, guided_search

log = logging.getLogger("chemsteer")

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_EVALUATOR = 3

EVALUATORS = ("random", "heuristic", "replay", "remote", "rubric")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved options shared by every subcommand."""

    subcommand: str
    inputs: list[str] = field(default_factory=list)
    evaluator: str | None = None
    seed: int | None = None
    output: str | None = None
    verbosity: int = 0
    fixtures: str | None = None
    replay: bool = False
    record: bool = False
    jobs: int = 1
    miss_score: float | None = None
    integer_scores: bool = False
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "CHEMSTEER_API_KEY"
    temperature: float = 0.1
    max_retries: int = 3
    timeout: float = 60.0

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        names = {f for f in cls.__dataclass_fields__}
        values = {k: v for k, v in vars(args).items() if k in names and v is not None}
        cfg = cls(subcommand=args.command, **{k: v for k, v in values.items() if k != "subcommand"})
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if self.replay and self.record:
            raise UsageError("--replay and --record are mutually exclusive")
        if (self.replay or self.record or self.evaluator == "replay") and not self.fixtures:
            raise UsageError("--fixtures is required with --replay, --record or --evaluator replay")
        if self.evaluator == "random" and self.seed is None:
            raise UsageError("the random evaluator needs --seed")
        if self.evaluator == "remote" and not self.replay and not (self.endpoint and self.model):
            raise UsageError("the remote evaluator needs --endpoint and --model")

    @property
    def master_seed(self) -> int:
        return 0 if self.seed is None else self.seed


# --- evaluator plumbing -------------------------------------------------------------


class EvaluatorSession:
    """Builds the selected evaluator and owns its fixture store."""

    def __init__(self, cfg: RunConfig, rubric=None):
        self.cfg = cfg
        self.store = FixtureStore(cfg.fixtures) if cfg.fixtures else None
        self.remote: RemoteEvaluator | None = None
        self.evaluator = self._build(rubric)

    def _inner(self, rubric):
        cfg = self.cfg
        kind = cfg.evaluator
        if kind == "random":
            return RandomEvaluator(cfg.master_seed, integer=cfg.integer_scores)
        if kind == "heuristic":
            return HeuristicEvaluator()
        if kind == "remote":
            conf = RemoteConfig(
                endpoint=cfg.endpoint or "",
                model=cfg.model or "remote",
                temperature=cfg.temperature,
                max_retries=cfg.max_retries,
                timeout=cfg.timeout,
                credential_env=cfg.api_key_env,
                max_in_flight=cfg.jobs,
            )
            self.remote = RemoteEvaluator(conf, offline=cfg.replay)
            return self.remote
        if kind == "rubric":
            if rubric is None:
                raise UsageError("the rubric evaluator needs a rubric")
            return RubricEvaluator(rubric)
        return None

    def _build(self, rubric):
        cfg = self.cfg
        if cfg.evaluator is None:
            raise UsageError("choose an evaluator with --evaluator")
        if cfg.evaluator == "replay":
            return ReplayEvaluator(self.store, cfg.miss_score)
        inner = self._inner(rubric)
        if cfg.replay:
            return ReplayEvaluator(self.store, cfg.miss_score, name=inner.name)
        if cfg.record:
            return RecordingEvaluator(inner, self.store)
        return inner

    def close(self) -> None:
        if self.store is not None and self.cfg.record:
            self.store.flush()
        if self.remote is not None:
            self.remote.close()


def _write(path: str | Path, text: str) -> None:
    atomic_write_text(path, text)
    log.info("wrote %s", path)


def _rules(args) -> MoveRules:
    return MoveRules(
        max_atom_charge=None if args.max_charge < 0 else args.max_charge,
    )


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _guidance(args) -> str | None:
    if getattr(args, "guidance_file", None):
        return _read_text(args.guidance_file)
    return getattr(args, "guidance", None)


# --- mech-search ----------------------------------------------------------------------


def cmd_mech_search(args, cfg: RunConfig) -> int:
    if args.task:
        task = load_mech_task(args.task)
        initial, products, rules = task.initial, task.products, task.rules
        depth = args.max_depth or len(task)
        goal_mode = args.goal_mode or task.goal_mode
    else:
        if not (args.reactants and args.products):
            raise UsageError("give --task, or both --reactants and --products")
        initial = MechState(parse_smiles_set(args.reactants))
        products = parse_smiles_set(args.products)
        rules = _rules(args)
        depth = args.max_depth or 5
        goal_mode = args.goal_mode or "superset"
    search_cfg = SearchConfig(
        max_depth=depth,
        beam_width=args.beam_width,
        mcts=MCTSConfig(iterations=args.iterations),
        seed=sub_seed(cfg.master_seed, "mcts"),
        goal_mode=goal_mode,
        node_cap=args.node_cap,
        bidirectional=args.strategy == "bfs" and goal_mode == "exact",
        max_in_flight=cfg.jobs,
        rules=rules,
        guidance=_guidance(args),
    )
    if args.strategy == "bfs":
        result = bfs_search(initial, products, search_cfg)
        paths = result.paths() if result.found else []
        path = paths[0] if paths else None
        report: dict[str, Any] = {
            "strategy": "bfs",
            "config": search_cfg.to_json(),
            "nodes_expanded": result.nodes_expanded,
            "found": path is not None,
            "shortest_paths": len(paths),
            "trace": path.to_trace(products) if path is not None else None,
        }
    else:
        session = EvaluatorSession(cfg)
        try:
            rep = guided_search(initial, products, session.evaluator, search_cfg, args.strategy)
        finally:
            session.close()
        path = rep.path
        report = rep.to_json()
        report["evaluator"] = session.evaluator.name
    if cfg.output:
        _write(cfg.output, json.dumps(report, indent=1, sort_keys=True) + "\n")
    if path is None:
        print(f"no mechanism found within {depth} moves")
        return EXIT_DATA
    state = path.initial
    print(f"reactants: {state.key}")
    for i, (move, nxt) in enumerate(path.steps, 1):
        print(f"step {i}")
        print("   " + render_move(state, move, rules).rstrip("\n").replace("\n", "\n   "))
        state = nxt
    return EXIT_OK


# --- benches ---------------------------------------------------------------------------


def _write_report(report: MetricsReport, prefix: str) -> None:
    _write(f"{prefix}.json", emit_report(report, "json"))
    _write(f"{prefix}.csv", emit_report(report, "csv"))


def _fmt(v: float | None, spec: str = ".3f") -> str:
    return "-" if v is None else format(v, spec)


def _print_rows(report: MetricsReport) -> None:
    for r in report.rows:
        if report.kind == "mech":
            print(
                f"{r.task_id:>6}  delta {_fmt(r.separation_delta)}  top1 {_fmt(r.top1_rate)}"
                f"  ci [{_fmt(r.ci_low)}, {_fmt(r.ci_high)}]  excluded {r.excluded_trials}"
            )
        else:
            print(
                f"{r.task_id:>12}  corr {_fmt(r.correlation)}"
                f"  ci [{_fmt(r.ci_low)}, {_fmt(r.ci_high)}]  excluded {r.excluded_trials}"
            )


def cmd_mech_bench(args, cfg: RunConfig) -> int:
    tasks = load_mech_tasks(args.tasks)
    if args.guidance or args.guidance_file:
        tasks = [replace(t, guidance=_guidance(args)) for t in tasks]
    session = EvaluatorSession(cfg)
    try:
        report = run_mech_bench(tasks, session.evaluator, args.repetitions, cfg.jobs, cfg.master_seed, log.info)
    finally:
        session.close()
    _write_report(report, cfg.output or "mech-bench")
    _print_rows(report)
    rate, n = report.pooled_top1()
    print(f"pooled strict top-1: {_fmt(rate if n else None)} over {n} step trials")
    return EXIT_OK


def cmd_route_bench(args, cfg: RunConfig) -> int:
    tasks = load_route_tasks(args.tasks)
    rows = []
    name = None
    if cfg.evaluator == "rubric":
        # each task is judged by its own rubric
        for task in tasks:
            session = EvaluatorSession(cfg, task.rubric)
            try:
                rows.append(route_row(task, session.evaluator, args.repetitions, cfg.jobs, cfg.master_seed, args.method))
            finally:
                session.close()
        name = "rubric"
    else:
        session = EvaluatorSession(cfg)
        try:
            for task in tasks:
                if len(task.routes) < 3:
                    raise TaskError(f"route task {task.name!r} needs at least 3 routes")
                rows.append(route_row(task, session.evaluator, args.repetitions, cfg.jobs, cfg.master_seed, args.method))
        finally:
            session.close()
        name = session.evaluator.name
    report = MetricsReport("route", name, rows, cfg.master_seed)
    _write_report(report, cfg.output or "route-bench")
    _print_rows(report)
    return EXIT_OK


# --- route-rank ---------------------------------------------------------------------------


def _collect_routes(paths: Sequence[str]):
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.suffix in (".json", ".txt", ".rxn")))
        elif p.exists():
            files.append(p)
        else:
            raise RouteError(f"{p}: no such file or directory")
    routes = []
    for f in files:
        try:
            route = load_route(f)
        except (RouteError, ChemError) as exc:
            log.warning("skipping %s: %s", f, exc)
            continue
        route.name = f.stem
        routes.append(route)
    return routes


def cmd_route_rank(args, cfg: RunConfig) -> int:
    if args.prompt_file:
        prompt = _read_text(args.prompt_file)
    elif args.prompt is not None:
        prompt = args.prompt
    else:
        raise UsageError("give --prompt or --prompt-file")
    rubric = load_rubric(args.rubric) if args.rubric else None
    routes = _collect_routes(args.routes)
    if not routes:
        print("no parseable routes", file=sys.stderr)
        return EXIT_DATA
    session = EvaluatorSession(cfg, rubric)
    try:
        reqs = []
        for route in routes:
            ctx = RouteContext.for_route(route, prompt)
            text = render_route_prompt(ctx)
            reqs.append((text, ctx))
        evals = [session.evaluator.evaluate(text, prompt_key(text), ctx) for text, ctx in reqs]
    finally:
        session.close()
    gt = [float(score_route(r, rubric).value) for r in routes] if rubric is not None else None
    order = sorted(range(len(routes)), key=lambda i: (-float(evals[i].score), routes[i].name))
    rows = []
    for rank, i in enumerate(order, 1):
        row = {"rank": rank, "route": routes[i].name, "score": float(evals[i].score), "rationale": evals[i].rationale}
        if gt is not None:
            row["rubric_score"] = gt[i]
        rows.append(row)
    out: dict[str, Any] = {"evaluator": session.evaluator.name, "prompt": prompt, "ranking": rows}
    if gt is not None and len(routes) >= 2:
        out["spearman"] = rank_correlation([float(e.score) for e in evals], gt, "spearman")
    for row in rows:
        extra = f"  rubric {row['rubric_score']:.1f}" if gt is not None else ""
        first = (row["rationale"] or "").splitlines()[0] if row["rationale"] else ""
        print(f"{row['rank']:>3}. {row['route']:<20} {row['score']:5.2f}{extra}  {first[:80]}")
    if "spearman" in out:
        print(f"spearman vs rubric: {_fmt(out['spearman'])}")
    if cfg.output:
        _write(cfg.output, json.dumps(out, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


# --- gen-alternatives -----------------------------------------------------------------


def cmd_gen_alternatives(args, cfg: RunConfig) -> int:
    seed = cfg.master_seed
    if args.task:
        task = load_mech_task(args.task, validate=False)
        alts = generate_alternatives(task.reactants, task.ground_truth, args.k, sub_seed(seed, task.task_id), task.rules)
        if alts.short_steps:
            log.warning("steps %s have fewer than %d alternatives", list(alts.short_steps), args.k)
        task = replace(task, alternatives=alts.moves)
    else:
        if not (args.reactants and args.states):
            raise UsageError("give --task, or --reactants and --states")
        task = build_mech_task(
            args.id, args.reactants, args.states, name=args.name or "", k=args.k, seed=seed, rules=_rules(args)
        )
    text = json.dumps(task.to_json(), indent=1) + "\n"
    if cfg.output:
        _write(cfg.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- fixtures --------------------------------------------------------------------------------


def _mech_keys(tasks: Sequence[MechTask], repetitions: int) -> list[str]:
    return [key for t in tasks for *_, key, _ in mech_requests(t, repetitions)]


def cmd_fixtures(args, cfg: RunConfig) -> int:
    if args.action == "list":
        store = FixtureStore(args.store)
        for key in store.keys():
            rec = store.record(key)
            print(f"{key}\t{rec['score']}\t{rec.get('model', '')}")
        print(f"{len(store)} records", file=sys.stderr)
        return EXIT_OK
    if args.action == "verify":
        store = FixtureStore(args.store)
        missing: list[str] = []
        if args.mech_tasks:
            missing += [k for k in _mech_keys(load_mech_tasks(args.mech_tasks), args.repetitions) if k not in store]
        if args.route_tasks:
            for task in load_route_tasks(args.route_tasks):
                missing += [key for *_, key, _ in route_requests(task, args.repetitions) if key not in store]
        print(f"{len(store)} records, {len(missing)} missing")
        return EXIT_DATA if missing else EXIT_OK
    # record
    tasks = load_mech_tasks(args.mech_tasks)
    if args.perfect:
        store = FixtureStore(args.store)
        n = sum(record_perfect_fixtures(t, store, _guidance(args)) for t in tasks)
        store.flush()
        print(f"recorded {n} ground-truth fixtures")
        return EXIT_OK
    cfg = replace(cfg, fixtures=args.store, record=True)
    cfg.check()
    session = EvaluatorSession(cfg)
    try:
        run_mech_bench(tasks, session.evaluator, args.repetitions, cfg.jobs, cfg.master_seed)
    finally:
        session.close()
    print(f"{len(session.store)} records in {args.store}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------------------


def _add_evaluator_opts(p: argparse.ArgumentParser, choices: Sequence[str] = EVALUATORS) -> None:
    g = p.add_argument_group("evaluator")
    g.add_argument("--evaluator", choices=choices)
    g.add_argument("--fixtures", help="JSON-lines fixture store")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--replay", action="store_true", default=None, help="answer from fixtures only; no network")
    mode.add_argument("--record", action="store_true", default=None, help="store every answer in the fixtures")
    g.add_argument("--miss-score", type=float, help="score for prompts missing from the fixtures (default: error)")
    g.add_argument("--integer-scores", action="store_true", default=None, help="random evaluator draws integers 0..10")
    g.add_argument("--endpoint", help="chat-completion URL for the remote evaluator")
    g.add_argument("--model")
    g.add_argument("--api-key-env", help="environment variable holding the API credential")
    g.add_argument("--temperature", type=float)
    g.add_argument("--max-retries", type=int)
    g.add_argument("--timeout", type=float)


def _add_rule_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-charge", type=int, default=2, help="largest |formal charge| per atom; negative for none")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="concurrent evaluator requests")
    common.add_argument("-o", "--output", help="output file (or prefix for reports)")
    common.add_argument("-v", "--verbose", dest="verbosity", action="count", default=0)

    parser = argparse.ArgumentParser(prog="chemsteer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mech-search", parents=[common], help="find a mechanism for a reaction")
    p.add_argument("--task", help="mechanism task file")
    p.add_argument("--reactants")
    p.add_argument("--products")
    p.add_argument("--strategy", choices=("bfs", "beam", "mcts"), default="bfs")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--iterations", type=int, default=200, help="MCTS iterations")
    p.add_argument("--goal-mode", choices=("exact", "superset"))
    p.add_argument("--node-cap", type=int, default=500_000)
    p.add_argument("--guidance")
    p.add_argument("--guidance-file")
    _add_rule_opts(p)
    _add_evaluator_opts(p, ("random", "heuristic", "replay", "remote"))

    p = sub.add_parser("mech-bench", parents=[common], help="mechanism-step discrimination benchmark")
    p.add_argument("--tasks", help="task directory or file (default: bundled tasks)")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--guidance")
    p.add_argument("--guidance-file")
    _add_evaluator_opts(p, ("random", "heuristic", "replay", "remote"))

    p = sub.add_parser("route-rank", parents=[common], help="rank candidate routes against a request")
    p.add_argument("routes", nargs="+", help="route files or directories")
    p.add_argument("--prompt")
    p.add_argument("--prompt-file")
    p.add_argument("--rubric", help="rubric file; adds a ground-truth column and correlation")
    _add_evaluator_opts(p)

    p = sub.add_parser("route-bench", parents=[common], help="route-ranking correlation benchmark")
    p.add_argument("--tasks", help="route task directory or file (default: bundled tasks)")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--method", choices=("spearman", "pearson"), default="spearman")
    _add_evaluator_opts(p)

    p = sub.add_parser("gen-alternatives", parents=[common], help="sample alternative moves for a task")
    p.add_argument("--task", help="task file whose alternatives are regenerated")
    p.add_argument("--reactants")
    p.add_argument("--states", nargs="+", help="ground-truth intermediate states; the last is the product set")
    p.add_argument("--id", default="task")
    p.add_argument("--name")
    p.add_argument("-k", type=int, default=5)
    _add_rule_opts(p)

    p = sub.add_parser("fixtures", parents=[common], help="manage replay fixtures")
    fx = p.add_subparsers(dest="action", required=True)
    q = fx.add_parser("record", parents=[common], help="record evaluator answers for the mechanism bench")
    q.add_argument("store")
    q.add_argument("--mech-tasks", help="task directory (default: bundled tasks)")
    q.add_argument("--repetitions", type=int, default=5)
    q.add_argument("--perfect", action="store_true", help="store ground-truth-only scores for guided search")
    q.add_argument("--guidance")
    q.add_argument("--guidance-file")
    _add_evaluator_opts(q, ("random", "heuristic", "remote"))
    q = fx.add_parser("list", parents=[common], help="print key, score and model of every record")
    q.add_argument("store")
    q = fx.add_parser("verify", parents=[common], help="check the store parses and covers a bench")
    q.add_argument("store")
    q.add_argument("--mech-tasks")
    q.add_argument("--route-tasks")
    q.add_argument("--repetitions", type=int, default=5)
    return parser


COMMANDS = {
    "mech-search": cmd_mech_search,
    "mech-bench": cmd_mech_bench,
    "route-rank": cmd_route_rank,
    "route-bench": cmd_route_bench,
    "gen-alternatives": cmd_gen_alternatives,
    "fixtures": cmd_fixtures,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbosity or 0, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = RunConfig.from_args(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"chemsteer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EvaluatorError as exc:
        print(f"chemsteer: evaluator error: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except (TaskError, RubricError, RouteError, FixtureFormatError, ChemError, SearchBudgetError) as exc:
        print(f"chemsteer: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"chemsteer: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
