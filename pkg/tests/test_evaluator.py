import json
import os
import threading

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsteer.chem import parse_smiles, parse_smiles_set
from chemsteer.chem.canon import canonical_form
from chemsteer.evaluator import (
    CallableEvaluator,
    Evaluation,
    EvaluatorError,
    FixtureFormatError,
    FixtureStore,
    HeuristicEvaluator,
    MechContext,
    NetworkForbiddenError,
    RandomEvaluator,
    RecordingEvaluator,
    RemoteConfig,
    RemoteEvaluator,
    ReplayEvaluator,
    ReplayMissError,
    RouteContext,
    ScoreParseError,
    TransportError,
    atomic_write_text,
    parse_score,
    prompt_key,
    render_mech_prompt,
    render_route_prompt,
)
from chemsteer.mech import ATTACK, IONIZATION, MechState, successors
from chemsteer.routes import from_reaction_list, route_to_text

FEASIBILITY = (
    "Highly feasible synthesis with high overall yields, consider potential side reactions "
    "and byproducts. Also ensure no unnecessary reactions are performed."
)

REACTANTS = parse_smiles_set("[H+].[Cl-].N")
PRODUCTS = parse_smiles_set("[NH4+].[Cl-]")


def first_moves(state=None):
    state = state or MechState(REACTANTS)
    return list(successors(state))


def context(history=(), candidate=None, guidance=None):
    state = history[-1][1] if history else MechState(REACTANTS)
    if candidate is None:
        candidate = first_moves(state)[0][0]
    return MechContext(REACTANTS, PRODUCTS, tuple(history), candidate, guidance)


class TestMechPrompt:
    def test_empty_history(self):
        text = render_mech_prompt(context())
        assert "step 1" in text.lower()
        assert "(no steps yet)" in text
        assert "\nstep 1:" not in text  # no numbered history entry

    def test_history_is_numbered(self):
        move, child = first_moves()[0]
        text = render_mech_prompt(context([(move, child)], first_moves(child)[0][0]))
        assert "\nstep 1:" in text
        assert "Proposed step 2:" in text

    def test_guidance_block(self):
        guidance = "Protonate the amine first;\nthen stop."
        text = render_mech_prompt(context(guidance=guidance))
        assert f"Guidance:\n{guidance}\n" in text
        assert "Guidance" not in render_mech_prompt(context())

    def test_contents(self):
        text = render_mech_prompt(context())
        assert REACTANTS.canonical_key in text and PRODUCTS.canonical_key in text
        assert "Ionization" in text and "Attack" in text
        assert '"score"' in text and '"rationale"' in text

    def test_deterministic(self):
        assert render_mech_prompt(context()) == render_mech_prompt(context())

    def test_injective_over_candidates(self):
        prompts = {render_mech_prompt(context(candidate=m)) for m, _ in first_moves()}
        assert len(prompts) == len(first_moves())

    def test_injective_over_fields(self):
        base = context()
        variants = [
            base,
            MechContext(REACTANTS, parse_smiles_set("[NH4+]"), (), base.candidate),
            MechContext(REACTANTS, PRODUCTS, (), base.candidate, "g"),
            MechContext(REACTANTS, PRODUCTS, (), base.candidate, "h"),
        ]
        assert len({render_mech_prompt(c) for c in variants}) == len(variants)


class TestRoutePrompt:
    def test_linear_route(self):
        route = from_reaction_list(["CC(=O)O.OCC>>CC(=O)OCC", "CC(=O)OCC.N>>CC(N)=O"])
        text = render_route_prompt(RouteContext.for_route(route, FEASIBILITY))
        numbered = [ln for ln in text.splitlines() if ln.strip()[:2] in ("1.", "2.", "3.")]
        assert len(numbered) == 2
        assert all(" >> " in ln for ln in numbered)

    def test_convergent_ordering(self):
        route = from_reaction_list(["CCO>>CC=O", "CCCO>>CCC=O", "CC=O.CCC=O>>CCC(C=O)C(C)O"])
        steps = [ln.strip() for ln in route_to_text(route).splitlines() if ln.strip()[:2] in ("1.", "2.", "3.")]
        assert [s[:2] for s in steps] == ["1.", "2.", "3."]
        branch_products = {s.split(">>")[1].strip() for s in steps[:2]}
        consumer_inputs = set(steps[2][3:].split(">>")[0].strip().split("."))
        assert branch_products == consumer_inputs == {canonical_form(parse_smiles(x)) for x in ("CC=O", "CCC=O")}

    def test_query_verbatim(self):
        route = from_reaction_list(["CCO>>CC=O"])
        text = render_route_prompt(RouteContext.for_route(route, FEASIBILITY))
        assert f"\n{FEASIBILITY}\n" in text
        assert '"score"' in text

    def test_deterministic(self):
        lines = ["CC(=O)O.OCC>>CC(=O)OCC"]
        a = render_route_prompt(RouteContext.for_route(from_reaction_list(lines), "q"))
        b = render_route_prompt(RouteContext.for_route(from_reaction_list(lines), "q"))
        assert a == b


class TestImplementations:
    def test_random_deterministic(self):
        a, b = RandomEvaluator(7), RandomEvaluator(7)
        assert a.evaluate("p", "k#0") == b.evaluate("p", "k#0")
        assert RandomEvaluator(8).evaluate("p", "k#0") != a.evaluate("p", "k#0")

    def test_random_integer_mode(self):
        scores = {RandomEvaluator(7, integer=True).evaluate("p", f"k#{i}").score for i in range(300)}
        assert scores == set(float(i) for i in range(11))

    def test_replay(self):
        store = FixtureStore()
        store.put("abc#0", Evaluation(8, "ok"))
        ev = ReplayEvaluator(store).evaluate("prompt", "abc#0")
        assert (ev.score, ev.rationale) == (8, "ok")
        with pytest.raises(ReplayMissError):
            ReplayEvaluator(store).evaluate("prompt", "missing#0")
        assert ReplayEvaluator(store, miss_score=0).evaluate("prompt", "missing#0").score == 0

    def test_heuristic_prefers_recombination(self):
        state = MechState(REACTANTS)
        moves = first_moves(state)
        recombine = [m for m, s in moves if m.kind == ATTACK and "[NH4+]" in s.key]
        n_h = [
            m
            for m, s in moves
            if m.kind == IONIZATION and state.atom(m.a).element == "N" and m.b.h >= 0
        ]
        assert recombine and n_h
        h = HeuristicEvaluator()

        def score(m):
            ctx = MechContext(REACTANTS, PRODUCTS, (), m)
            return h.evaluate(render_mech_prompt(ctx), "k", ctx).score

        assert all(score(recombine[0]) > score(m) for m in n_h)

    def test_heuristic_needs_context(self):
        with pytest.raises(EvaluatorError):
            HeuristicEvaluator().evaluate("p", "k")

    def test_heuristic_routes(self):
        good = from_reaction_list(["CC(=O)O.OCC>>CC(=O)OCC"])
        bad = from_reaction_list(["CC(=O)O>>CC(=O)OCCCl"])
        h = HeuristicEvaluator()
        sg = h.evaluate("", "k", RouteContext.for_route(good, "q")).score
        sb = h.evaluate("", "k", RouteContext.for_route(bad, "q")).score
        assert sg > sb

    def test_recording(self, tmp_path):
        store = FixtureStore(tmp_path / "f.jsonl")
        rec = RecordingEvaluator(RandomEvaluator(3), store)
        ev = rec.evaluate("p", "key#0")
        store.flush()
        again = ReplayEvaluator(FixtureStore(tmp_path / "f.jsonl")).evaluate("p", "key#0")
        assert again.score == ev.score

    def test_callable(self):
        assert CallableEvaluator(lambda p, k, c: 4).evaluate("p", "k").score == 4

    @settings(max_examples=60)
    @given(st.text(), st.text(), st.integers(0, 2**32))
    def test_scores_in_range(self, prompt, key, seed):
        for ev in (RandomEvaluator(seed), RandomEvaluator(seed, integer=True)):
            out = ev.evaluate(prompt, key)
            assert 0 <= out.score <= 10
            assert out == ev.evaluate(prompt, key)

    def test_heuristic_range_on_all_moves(self):
        h = HeuristicEvaluator()
        state = MechState.from_smiles("CC(C)=O.NN")
        for move, _ in successors(state):
            ctx = MechContext(state.species, parse_smiles_set("NN=C(C)C.O"), (), move)
            ev = h.evaluate("", "", ctx)
            assert 0 <= ev.score <= 10
            assert ev == h.evaluate("", "", ctx)


class TestParseScore:
    def test_json(self):
        ev = parse_score('{"score": 7, "rationale": "good"}')
        assert (ev.score, ev.rationale, ev.clamped) == (7, "good", False)

    def test_json_inside_text(self):
        assert parse_score('Sure. {"note": 1} then {"score": 3, "rationale": "x"}').score == 3

    def test_fallback(self):
        assert parse_score("Score: 9/10 because the step is sound").score == 9
        assert parse_score("final SCORE 4").score == 4

    @pytest.mark.parametrize("raw", ["no numbers here", "", "   ", '{"score": "high"}'])
    def test_unparseable(self, raw):
        with pytest.raises(ScoreParseError) as info:
            parse_score(raw)
        assert info.value.raw == raw

    def test_clamping(self):
        hi = parse_score('{"score": 14}')
        lo = parse_score("score: -3")
        assert (hi.score, hi.clamped) == (10, True)
        assert (lo.score, lo.clamped) == (0, True)

    def test_raw_kept(self):
        raw = '{"score": 2, "rationale": "weak"}'
        assert parse_score(raw).raw == raw

    @given(st.integers(-50, 50))
    def test_json_property(self, n):
        ev = parse_score(json.dumps({"score": n, "rationale": "r"}))
        assert ev.score == min(10, max(0, n))
        assert ev.clamped == (not 0 <= n <= 10)

    @given(st.text())
    def test_never_crashes(self, raw):
        try:
            ev = parse_score(raw)
        except ScoreParseError:
            return
        assert 0 <= ev.score <= 10

    def test_evaluation_bounds(self):
        with pytest.raises(ValueError):
            Evaluation(11)


class TestKeys:
    def test_key_shape(self):
        key = prompt_key("hello", 3)
        digest, rep = key.split("#")
        assert len(digest) == 32 and rep == "3"
        assert prompt_key("hello", 3) == key
        assert prompt_key("hello!", 3) != key


class TestFixtureStore:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "fx.jsonl"
        with FixtureStore(path) as store:
            store.put("b#0", Evaluation(3, "meh", "raw b"), "m")
            store.put("a#0", Evaluation(8, "ok"))
        lines = path.read_text().splitlines()
        assert [json.loads(ln)["key"] for ln in lines] == ["a#0", "b#0"]
        for ln in lines:
            assert {"key", "score", "rationale", "raw"} <= set(json.loads(ln))
        again = FixtureStore(path)
        assert again.get("b#0") == Evaluation(3, "meh", "raw b")
        assert again.dumps() == path.read_text()

    def test_bad_record(self, tmp_path):
        path = tmp_path / "fx.jsonl"
        path.write_text('{"key": "a#0", "score": 3}\n{"score": 4}\n')
        with pytest.raises(FixtureFormatError, match=":2:"):
            FixtureStore(path)

    def test_out_of_range_record(self, tmp_path):
        path = tmp_path / "fx.jsonl"
        path.write_text('{"key": "a#0", "score": 30}\n')
        with pytest.raises(FixtureFormatError):
            FixtureStore(path)

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        target = tmp_path / "out.txt"
        atomic_write_text(target, "one\n")
        atomic_write_text(target, "two\n")
        assert target.read_text() == "two\n"
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_concurrent_puts(self, tmp_path):
        store = FixtureStore(tmp_path / "fx.jsonl")

        def work(i):
            for j in range(50):
                store.put(f"{i}-{j}#0", Evaluation(j % 11))

        threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        store.flush()
        assert len(FixtureStore(tmp_path / "fx.jsonl")) == 400


def chat_reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


class TestRemote:
    def config(self, **kw):
        return RemoteConfig("http://judge.invalid/v1/chat", "judge-model", backoff=0, **kw)

    def test_wire_format(self, monkeypatch):
        monkeypatch.setenv("CHEMSTEER_API_KEY", "secret")
        seen = []

        def handler(request):
            seen.append(request)
            return chat_reply('{"score": 6, "rationale": "fine"}')

        ev = RemoteEvaluator(self.config(), httpx.Client(transport=httpx.MockTransport(handler)))
        out = ev.evaluate("the prompt", "k#0")
        assert out.score == 6 and out.rationale == "fine"
        body = json.loads(seen[0].content)
        assert body == {
            "model": "judge-model",
            "temperature": 0.1,
            "messages": [{"role": "user", "content": "the prompt"}],
        }
        assert seen[0].headers["authorization"] == "Bearer secret"

    def test_retries_on_429(self):
        codes = iter([429, 503])

        def handler(request):
            code = next(codes, 200)
            return chat_reply("Score: 5") if code == 200 else httpx.Response(code)

        ev = RemoteEvaluator(self.config(max_retries=2), httpx.Client(transport=httpx.MockTransport(handler)))
        assert ev.evaluate("p", "k").score == 5
        assert ev.calls == 3

    def test_gives_up(self):
        handler = lambda request: httpx.Response(429)  # noqa: E731
        ev = RemoteEvaluator(self.config(max_retries=1), httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(TransportError, match="2 attempts"):
            ev.evaluate("p", "k")

    def test_client_error_not_retried(self):
        handler = lambda request: httpx.Response(401, text="denied")  # noqa: E731
        ev = RemoteEvaluator(self.config(max_retries=3), httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(TransportError, match="401"):
            ev.evaluate("p", "k")
        assert ev.calls == 1

    def test_connection_error(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        ev = RemoteEvaluator(self.config(max_retries=1), httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(TransportError):
            ev.evaluate("p", "k")

    def test_unparseable_reply(self):
        handler = lambda request: chat_reply("I cannot judge this.")  # noqa: E731
        ev = RemoteEvaluator(self.config(), httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(ScoreParseError):
            ev.evaluate("p", "k")

    def test_offline(self):
        with pytest.raises(NetworkForbiddenError):
            RemoteEvaluator(self.config(), offline=True).evaluate("p", "k")

    @pytest.mark.parametrize("kw", [{"temperature": -0.1}, {"temperature": 2.5}, {"max_retries": -1}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            self.config(**kw)
