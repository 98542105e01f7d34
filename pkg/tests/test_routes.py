import json
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemsteer.chem import parse_smiles, parse_smiles_set
from chemsteer.chem.canon import canonical_form
from chemsteer.routes import (
    ReactionStep,
    RouteError,
    RouteSchemaError,
    depth_fraction,
    emit,
    from_reaction_list,
    load_route,
    parse_route_tree,
    route_to_text,
)

from conftest import DATA

ROUTE_FILES = sorted((DATA / "routes").glob("*/*.json"))

ESTER = {
    "smiles": "CCOC(C)=O",
    "type": "mol",
    "children": [
        {
            "type": "reaction",
            "smiles": "CCO.CC(=O)O>>CCOC(C)=O",
            "children": [
                {"smiles": "CCO", "type": "mol", "in_stock": True, "children": []},
                {"smiles": "CC(=O)O", "type": "mol", "in_stock": True, "children": []},
            ],
        }
    ],
}

LINEAR5 = ["CC>>CCC", "CCC>>CCCC", "CCCC>>CCCCC", "CCCCC>>CCCCCC", "CCCCCC>>CCCCCCC"]


def route_key(route):
    """Structure-only signature: nested (molecule, in-stock, children)."""

    def node(n):
        return (n.key, n.in_stock if n.is_leaf else None, tuple(sorted(node(c) for c in n.children)))

    return node(route.root)


class TestParseTree:
    def test_one_step(self):
        route = parse_route_tree(json.dumps(ESTER))
        assert route.depth == 1
        assert len(route.steps) == 1
        assert {leaf.key for leaf in route.leaves} == {canonical_form(parse_smiles(s)) for s in ("CCO", "CC(=O)O")}
        assert all(leaf.in_stock for leaf in route.leaves)

    def test_mismatched_product(self):
        doc = json.loads(json.dumps(ESTER))
        doc["children"][0]["smiles"] = "CCO.CC(=O)O>>CCCOC(C)=O"
        with pytest.raises(RouteSchemaError) as info:
            parse_route_tree(doc)
        assert info.value.path == "$.children[0]"

    def test_mismatched_reactants(self):
        doc = json.loads(json.dumps(ESTER))
        doc["children"][0]["smiles"] = "CCCO.CC(=O)O>>CCOC(C)=O"
        with pytest.raises(RouteSchemaError, match="reactants"):
            parse_route_tree(doc)

    def test_bad_smiles_path(self):
        doc = json.loads(json.dumps(ESTER))
        doc["children"][0]["children"][1]["smiles"] = "C1CC"
        with pytest.raises(RouteSchemaError) as info:
            parse_route_tree(doc)
        assert info.value.path == "$.children[0].children[1].smiles"

    def test_cycle(self):
        doc = {
            "smiles": "CCO",
            "children": [
                {
                    "type": "reaction",
                    "children": [
                        {
                            "smiles": "CC=O",
                            "children": [{"type": "reaction", "children": [{"smiles": "OCC", "in_stock": True}]}],
                        }
                    ],
                }
            ],
        }
        with pytest.raises(RouteSchemaError, match="cycle"):
            parse_route_tree(doc)

    def test_convergent(self):
        route = from_reaction_list(["CCO>>CC=O", "CCCO>>CCC=O", "CC=O.CCC=O>>CCC(C=O)C(C)O"])
        again = parse_route_tree(emit(route))
        assert len(again.leaves) == 2
        branches = again.root.children
        assert len(branches) == 2
        assert {b.children[0].key for b in branches} == {leaf.key for leaf in again.leaves}

    @pytest.mark.parametrize(
        "doc, path",
        [
            ("not json", "$"),
            ({"smiles": 3}, "$.smiles"),
            ({"smiles": "C", "in_stock": "yes"}, "$.in_stock"),
            ({"smiles": "C", "type": "reaction"}, "$"),
            ({"smiles": "CC", "children": [{"type": "mol"}]}, "$.children[0]"),
            ({"smiles": "CC", "children": [{"type": "reaction", "children": []}]}, "$.children[0]"),
        ],
    )
    def test_schema_errors(self, doc, path):
        with pytest.raises(RouteSchemaError) as info:
            parse_route_tree(doc if isinstance(doc, str) else json.dumps(doc))
        assert info.value.path == path

    def test_identity_step_rejected(self):
        with pytest.raises(RouteError):
            ReactionStep(parse_smiles_set("CCO.O"), parse_smiles("OCC"), "s")

    @pytest.mark.parametrize("path", ROUTE_FILES, ids=lambda p: f"{p.parent.name}/{p.stem}")
    def test_bundled_round_trip(self, path):
        route = load_route(path)
        again = parse_route_tree(json.dumps(emit(route)))
        assert route_key(again) == route_key(route)
        assert route_to_text(again) == route_to_text(route)
        assert emit(again) == emit(route)


class TestReactionList:
    def test_single(self):
        route = from_reaction_list(["CCO.CC(=O)O≫CCOC(C)=O"])
        assert route.depth == 1
        assert len(route.leaves) == 2 and all(leaf.in_stock for leaf in route.leaves)

    def test_chain(self):
        route = from_reaction_list(["CCO>>CC=O", "CC=O.N>>CC=N"])
        assert route.depth == 2 and len(route.steps) == 2
        assert [s.step_id for s in route.steps] == ["r1", "r2"]

    def test_two_producers(self):
        with pytest.raises(RouteError, match="produced twice"):
            from_reaction_list(["CCO>>CC=O", "CC(O)=O>>CC=O", "CC=O>>CC(C)=O"])

    def test_dangling(self):
        with pytest.raises(RouteError, match="never used"):
            from_reaction_list(["CCO>>CC=O", "CCC>>CCCC"])

    def test_missing_separator(self):
        with pytest.raises(RouteError, match=">>"):
            from_reaction_list(["CCO CC=O"])

    def test_comments_and_blank_lines(self):
        route = from_reaction_list(["# header", "", "CCO>>CC=O"])
        assert route.depth == 1

    def test_empty(self):
        with pytest.raises(RouteError):
            from_reaction_list(["# nothing"])


class TestDepthFraction:
    def test_linear(self):
        route = from_reaction_list(LINEAR5)
        steps = route.steps
        assert depth_fraction(route, steps[-1]) == Fraction(1, 5)
        assert depth_fraction(route, steps[0]) == 1
        assert [depth_fraction(route, s) for s in steps] == [Fraction(k, 5) for k in (5, 4, 3, 2, 1)]

    def test_single(self):
        route = from_reaction_list(["CCO>>CC=O"])
        assert depth_fraction(route, route.steps[0]) == 1

    def test_unknown_step(self):
        with pytest.raises(KeyError):
            depth_fraction(from_reaction_list(["CCO>>CC=O"]), "nope")

    def test_convergent_uses_longest_chain(self):
        route = from_reaction_list(["CCCCO>>CCCO", "CCCO>>CCC=O", "CCO>>CC=O", "CC=O.CCC=O>>CCC(C=O)C(C)O"])
        fr = {s.product_key: depth_fraction(route, s) for s in route.steps}
        assert fr[canonical_form(parse_smiles("CCCO"))] == 1
        assert fr[canonical_form(parse_smiles("CC=O"))] == Fraction(2, 3)

    @settings(max_examples=40)
    @given(st.sampled_from(ROUTE_FILES))
    def test_properties(self, path):
        route = load_route(path)
        fr = {s.step_id: depth_fraction(route, s) for s in route.steps}
        assert max(fr.values()) == 1
        assert all(0 < f <= 1 for f in fr.values())
        # decreasing toward the root
        for node, _ in route._walk():
            if node.reaction is None:
                continue
            for child in node.children:
                if child.reaction is not None:
                    assert fr[child.reaction.step_id] > fr[node.reaction.step_id]


class TestText:
    @pytest.mark.parametrize("path", ROUTE_FILES[:6], ids=lambda p: f"{p.parent.name}/{p.stem}")
    def test_deterministic_and_reparseable(self, path):
        route = load_route(path)
        text = route_to_text(route)
        assert text == route_to_text(load_route(path))
        steps = [ln.strip() for ln in text.splitlines() if ln.strip()[:1].isdigit()]
        assert len(steps) == len(route.steps)
        for ln in steps:
            body = ln.split(". ", 1)[1]
            left, right = body.split(" >> ")
            for smi in left.split(".") + [right]:
                assert canonical_form(parse_smiles(smi)) == smi

    def test_commercial_tags(self):
        text = route_to_text(parse_route_tree(ESTER))
        assert text.count("[commercial]") == 2

    def test_not_in_stock_tag(self):
        doc = json.loads(json.dumps(ESTER))
        doc["children"][0]["children"][0]["in_stock"] = False
        assert "[not in stock]" in route_to_text(parse_route_tree(doc))


def test_route_files_exist():
    assert len(ROUTE_FILES) >= 20
    assert all(isinstance(p, Path) for p in ROUTE_FILES)
