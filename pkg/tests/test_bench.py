import json
import math
import shutil
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsteer.bench import (
    CSV_COLUMNS,
    MechTask,
    RouteTask,
    StepTrial,
    TaskError,
    bootstrap_ci,
    bundled_task_dir,
    emit_report,
    generate_alternatives,
    load_mech_task,
    load_mech_tasks,
    load_report,
    load_route_tasks,
    mech_requests,
    rank_correlation,
    run_mech_bench,
    run_route_bench,
    run_route_benches,
    separation,
    strict_top1,
    sub_seed,
)
from chemsteer.bench.runner import _mech_row
from chemsteer.chem import parse_smiles, parse_smiles_set
from chemsteer.evaluator import (
    CallableEvaluator,
    Evaluation,
    EvaluatorError,
    FixtureStore,
    RandomEvaluator,
    ReplayEvaluator,
    ScoreParseError,
)
from chemsteer.mech import MechState, apply_move, legal_moves
from chemsteer.routes import from_reaction_list
from chemsteer.scoring import RubricEvaluator, compile_rubric, score_route

TASKS = load_mech_tasks()
SMALL = [t for t in TASKS if len(t) == 4][:3]


def fixture_store(tasks, repetitions, scorer):
    """Replay fixtures: ``scorer(step, candidate index)`` for every request."""
    store = FixtureStore()
    for task in tasks:
        for step, _, c, _, key, _ in mech_requests(task, repetitions):
            store.put(key, Evaluation(scorer(step, c)))
    return store


def imidazole_routes(depth=10):
    """``depth`` routes to one target; route ``at`` forms the imidazole at forward step ``at``."""
    routes = []
    for at in range(depth):
        lines = [f"{'C' * (k + 2)}>>{'C' * (k + 3)}" for k in range(at)]
        chain = "C" * (at + 2)
        prev = f"{chain}c1ncc[nH]1"
        lines.append(f"{chain}.NCC=O>>{prev}")
        for _ in range(depth - at - 1):
            lines.append(f"{prev}>>C{prev}")
            prev = f"C{prev}"
        routes.append(from_reaction_list(lines, f"at{at}"))
    return routes


EARLY = compile_rubric(
    {
        "name": "early",
        "clauses": [
            {"detector": {"kind": "ring_formed", "template": "imidazole"}, "position_weight": "prefer_early"}
        ],
    }
)
TEN_ROUTES = RouteTask("ten", imidazole_routes()[0].target, "imidazole early", EARLY, imidazole_routes())


class TestMetrics:
    def test_separation_golden(self):
        assert separation(9, [2, 3, 1, 4, 5]) == 6.0

    def test_strict_top1(self):
        assert strict_top1(9, [2, 3, 1, 4, 5])
        assert not strict_top1(5, [2, 3, 1, 4, 5])
        assert not strict_top1(1, [2, 3, 1, 4, 5])

    def test_rank_correlation_extremes(self):
        assert rank_correlation([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert rank_correlation([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        assert rank_correlation([1, 1, 1], [1, 2, 3]) is None
        with pytest.raises(ValueError):
            rank_correlation([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            rank_correlation([1, 2], [2, 1], "kendall")

    @given(
        st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=3, max_size=12)
    )
    def test_spearman_monotone_invariance(self, pairs):
        x = [p[0] for p in pairs]
        y = [p[1] for p in pairs]
        r = rank_correlation(x, y)
        r3 = rank_correlation(x, [v**3 for v in y])
        if r is None:
            assert r3 is None
        else:
            assert r3 == pytest.approx(r)
            assert -1 - 1e-12 <= r <= 1 + 1e-12

    def test_bootstrap(self):
        values = [0.1, 0.5, 0.9, 0.3, 0.7]
        lo, hi = bootstrap_ci(values, 3)
        assert lo <= statistics.mean(values) <= hi
        assert bootstrap_ci(values, 3) == (lo, hi)
        assert bootstrap_ci([2.0, 2.0], 1) == (2.0, 2.0)
        assert bootstrap_ci([], 1) is None

    def test_step_means_pooled(self):
        trials = [StepTrial(1, r, 9.0, (2, 3, 1, 4, 5)) for r in range(3)]
        trials += [StepTrial(2, r, 0.0, (10, 10, 10, 10, 10)) for r in range(3)]
        row = _mech_row("x", "e", 3, trials, 0)
        assert row.separation_delta == (6.0 - 10.0) / 2
        assert row.top1_rate == 0.5

    def test_sub_seed(self):
        assert sub_seed(1, "a", 2) == sub_seed(1, "a", 2)
        assert sub_seed(1, "a", 2) != sub_seed(1, "a", 3)
        assert 0 <= sub_seed(5) < 2**64


class TestMechBench:
    def test_forced_perfect(self):
        store = fixture_store(SMALL, 2, lambda step, c: 10 if c == 0 else 0)
        report = run_mech_bench(SMALL, ReplayEvaluator(store), repetitions=2)
        for row in report.rows:
            assert row.top1_rate == 1.0
            assert row.separation_delta == 10.0
            assert row.excluded_trials == 0
            assert (row.ci_low, row.ci_high) == (10.0, 10.0)

    def test_golden_six(self):
        alt = {1: 2, 2: 3, 3: 1, 4: 4, 5: 5}
        store = fixture_store(SMALL[:1], 1, lambda step, c: 9 if c == 0 else alt[c])
        report = run_mech_bench(SMALL[:1], ReplayEvaluator(store), repetitions=1)
        assert report.rows[0].separation_delta == 6.0
        assert report.rows[0].separation_delta_normalized == 0.6

    def test_random_top1_near_one_sixth(self):
        report = run_mech_bench(TASKS, RandomEvaluator(11), repetitions=25, seed=11)
        rate, n = report.pooled_top1()
        assert n >= 2000
        assert abs(rate - 1 / 6) <= 0.03

    def test_parse_failures_are_excluded(self):
        def flaky(prompt, key, ctx):
            if key.endswith("#1"):
                raise ScoreParseError("garbled")
            return 10 if ctx.candidate == SMALL[0].ground_truth[len(ctx.history)] else 0

        report = run_mech_bench(SMALL[:1], CallableEvaluator(flaky), repetitions=2)
        row = report.rows[0]
        assert row.excluded_trials == len(SMALL[0])
        assert row.trials == 2 * len(SMALL[0])
        assert row.top1_rate == 1.0

    def test_other_errors_abort(self):
        def broken(prompt, key, ctx):
            raise EvaluatorError("down")

        with pytest.raises(EvaluatorError):
            run_mech_bench(SMALL[:1], CallableEvaluator(broken), repetitions=1)

    def test_jobs_do_not_change_results(self):
        a = run_mech_bench(SMALL, RandomEvaluator(2), repetitions=3, seed=2)
        b = run_mech_bench(SMALL, RandomEvaluator(2), repetitions=3, seed=2, jobs=4)
        assert emit_report(a) == emit_report(b)

    def test_history_is_ground_truth(self):
        task = SMALL[0]
        for step, _, c, prompt, _, ctx in mech_requests(task, 1):
            assert [m for m, _ in ctx.history] == list(task.ground_truth[: step - 1])
            want = task.ground_truth[step - 1] if c == 0 else task.alternatives[step - 1][c - 1]
            assert ctx.candidate == want

    def test_bad_repetitions(self):
        with pytest.raises(ValueError):
            run_mech_bench(SMALL, RandomEvaluator(1), repetitions=0)


class TestRouteBench:
    def test_identity(self):
        report = run_route_bench(TEN_ROUTES, RubricEvaluator(EARLY), repetitions=2)
        assert report.rows[0].correlation == pytest.approx(1.0)

    def test_reversal(self):
        def reverse(prompt, key, ctx):
            return 10 - float(score_route(ctx.route, EARLY).value)

        report = run_route_bench(TEN_ROUTES, CallableEvaluator(reverse), repetitions=2)
        assert report.rows[0].correlation == pytest.approx(-1.0)

    def test_ground_truth_spread(self):
        gt = [float(score_route(r, EARLY).value) for r in TEN_ROUTES.routes]
        assert gt == [10.0 - k for k in range(10)]

    def test_random_near_zero(self):
        report = run_route_bench(TEN_ROUTES, RandomEvaluator(5), repetitions=200, seed=5)
        assert abs(report.rows[0].correlation) <= 0.1

    def test_bundled_rubric_identity(self):
        tasks = load_route_tasks()
        for task in tasks:
            row = run_route_bench(task, RubricEvaluator(task.rubric), repetitions=1).rows[0]
            assert row.correlation == pytest.approx(1.0), task.name

    def test_constant_ground_truth(self):
        flat = compile_rubric({"clauses": [{"detector": {"kind": "ring_formed", "template": "benzene"}}]})
        task = RouteTask("flat", TEN_ROUTES.target, "q", flat, TEN_ROUTES.routes)
        row = run_route_bench(task, RandomEvaluator(1), repetitions=3).rows[0]
        assert row.correlation is None
        assert row.excluded_trials == 3

    def test_needs_three_routes(self):
        task = RouteTask("two", TEN_ROUTES.target, "q", EARLY, TEN_ROUTES.routes[:2])
        with pytest.raises(TaskError):
            run_route_bench(task, RandomEvaluator(1))

    def test_routes_must_share_target(self):
        with pytest.raises(TaskError):
            RouteTask("mixed", parse_smiles("CCO"), "q", EARLY, TEN_ROUTES.routes)


class TestReports:
    def test_csv_rows(self):
        report = run_mech_bench(TASKS, RandomEvaluator(3), repetitions=1, seed=3)
        text = emit_report(report, "csv")
        lines = text.splitlines()
        assert lines[0].split(",") == list(CSV_COLUMNS)
        assert len(lines) == 1 + 12
        assert all(row.excluded_trials == 0 for row in report.rows)

    def test_json_round_trip(self):
        report = run_mech_bench(SMALL, RandomEvaluator(3), repetitions=2, seed=3)
        again = load_report(emit_report(report))
        assert again == report
        assert emit_report(again) == emit_report(report)

    def test_route_json_round_trip(self):
        report = run_route_benches(load_route_tasks()[:3], RandomEvaluator(4), repetitions=3, seed=4)
        assert load_report(emit_report(report)) == report

    def test_byte_identical_reruns(self):
        one = run_mech_bench(SMALL, RandomEvaluator(9), repetitions=3, seed=9)
        two = run_mech_bench(SMALL, RandomEvaluator(9), repetitions=3, seed=9)
        assert emit_report(one, "csv") == emit_report(two, "csv")
        assert emit_report(one) == emit_report(two)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(run_mech_bench(SMALL[:1], RandomEvaluator(1), repetitions=1), "xml")

    def test_bounds(self):
        report = run_mech_bench(TASKS, RandomEvaluator(4), repetitions=2, seed=4)
        for row in report.rows:
            assert 0 <= row.top1_rate <= 1
            assert -10 <= row.separation_delta <= 10
            assert row.ci_low <= row.separation_delta <= row.ci_high


class TestAlternatives:
    def test_twelve_legal_moves(self):
        # H+ + NH3 has 1 attack and 6 ionizations; add water for more
        state = MechState.from_smiles("[H+].N.O")
        moves = legal_moves(state)
        gt = moves[0]
        alts = generate_alternatives(state, [gt], k=5, seed=1)
        (chosen,) = alts.moves
        assert len(moves) >= 12
        assert len(chosen) == len(set(chosen)) == 5
        assert gt not in chosen
        gt_key = apply_move(state, gt).key
        results = {apply_move(state, m).key for m in chosen}
        assert gt_key not in results and len(results) == 5

    def test_deterministic(self):
        task = TASKS[5]
        a = generate_alternatives(task.reactants, task.ground_truth, seed=4)
        b = generate_alternatives(task.reactants, task.ground_truth, seed=4)
        assert a == b
        c = generate_alternatives(task.reactants, task.ground_truth, seed=5)
        assert c != a

    def test_loop_check_reuses_step_one(self):
        task = next(t for t in TASKS if t.task_id == "t10")
        alts = generate_alternatives(task.reactants, task.ground_truth, seed=0)
        assert (3, 1) in alts.loop_checks
        # independent check: some step-3 alternative redoes step 1's chemistry
        path = task.path
        first = path.states[0]
        gt1 = task.ground_truth[0]
        sig = (gt1.kind, first.atom(gt1.a).element, first.atom(gt1.b).element)
        state3 = path.states[2]
        sigs = {(m.kind, state3.atom(m.a).element, state3.atom(m.b).element) for m in alts.moves[2]}
        assert sig in sigs

    def test_bundled_alternatives_are_valid(self):
        for task in TASKS:
            assert all(len(a) == 5 for a in task.alternatives)
            task.validate()

    def test_short_steps_flagged(self):
        state = MechState.from_smiles("[H+].[OH-]")
        gt = next(m for m in legal_moves(state) if m.sink is None)
        alts = generate_alternatives(state, [gt], k=5)
        assert alts.short_steps == (1,)
        assert 1 <= len(alts.moves[0]) < 5

    def test_no_alternative(self):
        state = MechState.from_smiles("[H+].[H-]")
        gt = legal_moves(state)
        if len(gt) == 1:
            with pytest.raises(TaskError):
                generate_alternatives(state, gt, k=5)

    def test_k_positive(self):
        with pytest.raises(ValueError):
            generate_alternatives(parse_smiles_set("O"), [], k=0)


class TestTaskFiles:
    def corrupt(self, tmp_path, edit):
        src = bundled_task_dir() / "t01.json"
        doc = json.loads(src.read_text())
        edit(doc)
        dst = tmp_path / "t01.json"
        dst.write_text(json.dumps(doc))
        return dst

    @pytest.mark.parametrize(
        "edit, path",
        [
            (lambda d: d.update(reactants="C1CC"), "$.reactants"),
            (lambda d: d.update(products=7), "$.products"),
            (lambda d: d["ground_truth"][1].update(kind="teleport"), "$.ground_truth[1]"),
            (lambda d: d["alternatives"][2].append(d["ground_truth"][2]), "$.alternatives[2]"),
            (lambda d: d.update(goal_mode="approx"), "$.goal_mode"),
            (lambda d: d.update(guidance=3), "$.guidance"),
            (lambda d: d["states"].__setitem__(1, "C"), "$.states[1]"),
            (lambda d: d.update(rules={"max_atom_charge": -1}), "$.rules.max_atom_charge"),
        ],
    )
    def test_json_paths(self, tmp_path, edit, path):
        with pytest.raises(TaskError) as info:
            load_mech_task(self.corrupt(tmp_path, edit))
        assert info.value.path.startswith(path)

    def test_ground_truth_must_reach_products(self, tmp_path):
        bad = self.corrupt(tmp_path, lambda d: d.update(products="O"))
        with pytest.raises(TaskError, match="products"):
            load_mech_task(bad)

    def test_directory_errors_name_the_file(self, tmp_path):
        shutil.copy(bundled_task_dir() / "t02.json", tmp_path / "t02.json")
        self.corrupt(tmp_path, lambda d: d.update(reactants="C1CC"))
        with pytest.raises(TaskError) as info:
            load_mech_tasks(tmp_path)
        assert info.value.path == "t01.json:$.reactants"

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text("{")
        with pytest.raises(TaskError, match="invalid JSON"):
            load_mech_task(p)

    def test_empty_dir(self, tmp_path):
        with pytest.raises(TaskError):
            load_mech_tasks(tmp_path)

    @pytest.mark.parametrize("task", TASKS, ids=lambda t: t.task_id)
    def test_round_trip(self, task):
        again = MechTask.from_json(json.loads(json.dumps(task.to_json())))
        assert again == task

    def test_bundled_shape(self):
        assert len(TASKS) == 12
        assert sum(len(t) for t in TASKS) == 82
        assert len({t.category for t in TASKS}) >= 4


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.sampled_from(SMALL))
def test_random_bench_in_bounds(seed, task):
    row = run_mech_bench([task], RandomEvaluator(seed), repetitions=1, seed=seed).rows[0]
    assert 0 <= row.top1_rate <= 1 and -10 <= row.separation_delta <= 10
    assert not math.isnan(row.separation_delta)


def test_random_integer_ties_depress_top1():
    report = run_mech_bench(TASKS, RandomEvaluator(3, integer=True), repetitions=5, seed=3)
    rate, n = report.pooled_top1()
    # ties are never a strict win, so the rate sits below 1/6
    assert rate < 1 / 6
    assert n == 5 * 82
