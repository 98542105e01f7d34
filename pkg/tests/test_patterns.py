import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chemsteer.chem import parse_smiles, parse_smiles_set
from chemsteer.patterns import (
    PatternError,
    count_matches,
    extract_functional_groups,
    find_rings,
    functional_group_rules,
    get_template,
    jaccard,
    match_pattern,
    parse_pattern,
    ring_events,
    template_catalog,
)
from chemsteer.patterns import _atom_ok, _context

from conftest import corpus_molecules, shuffled

CORPUS = corpus_molecules()


def brute_cycles(m, max_size):
    """Atom sets that admit a Hamiltonian cycle of their induced subgraph."""
    n = len(m.atoms)
    found = set()
    for k in range(3, min(max_size, n) + 1):
        for subset in itertools.combinations(range(n), k):
            if any(sum(1 for j in subset if m.bond_order(i, j)) < 2 for i in subset):
                continue
            first, rest = subset[0], subset[1:]
            for perm in itertools.permutations(rest):
                cyc = (first,) + perm
                if all(m.bond_order(cyc[i], cyc[(i + 1) % k]) for i in range(k)):
                    found.add(frozenset(subset))
                    break
    return found


def brute_embeddings(p, m):
    ctx = _context(m)
    cands = [[i for i in range(len(m.atoms)) if _atom_ok(a, m, i, ctx)] for a in p.atoms]
    out = set()
    for combo in itertools.product(*cands):
        if len(set(combo)) != len(combo):
            continue
        if all(m.bond_order(combo[a], combo[b]) in orders for a, b, orders in p.bonds):
            out.add(combo)
    return sorted(out)


class TestRings:
    def test_benzene(self):
        assert [len(c) for c in find_rings(parse_smiles("c1ccccc1"))] == [6]

    def test_propane(self):
        assert find_rings(parse_smiles("CCC")) == []

    def test_naphthalene(self):
        m = parse_smiles("c1ccc2ccccc2c1")
        rings = find_rings(m, 8)
        assert sorted(len(c) for c in rings) == [6, 6]
        assert {frozenset(c) for c in rings} == brute_cycles(m, 8)
        assert 10 in [len(c) for c in find_rings(m, 10)]

    def test_max_size_checked(self):
        with pytest.raises(ValueError):
            find_rings(parse_smiles("C1CC1"), 2)

    def test_cycles_are_closed_walks(self):
        m = parse_smiles("C1CC2CCC1C2")
        for c in find_rings(m):
            assert all(m.bond_order(c[i], c[(i + 1) % len(c)]) for i in range(len(c)))

    def test_against_brute_force_on_corpus(self):
        checked = 0
        for m in CORPUS:
            if len(m.atoms) <= 12:
                assert {frozenset(c) for c in find_rings(m, 7)} == brute_cycles(m, 7)
                checked += 1
        assert checked > 50


class TestMatching:
    def test_imidazole_matches_itself(self):
        assert len(match_pattern(get_template("imidazole"), parse_smiles("c1cnc[nH]1"))) >= 1

    def test_imidazole_not_in_cyclohexane(self):
        assert match_pattern(get_template("imidazole"), parse_smiles("C1CCCCC1")) == []

    def test_piperidine_needs_saturated_carbons(self):
        tpl = get_template("piperidine")
        assert count_matches(tpl, parse_smiles("C1CCNCC1")) == 1
        assert count_matches(tpl, parse_smiles("c1ccncc1")) == 0

    def test_deterministic_order(self):
        m = parse_smiles("c1ccc2[nH]ccc2c1")
        tpl = get_template("indole")
        emb = match_pattern(tpl, m)
        assert emb == sorted(emb) and emb == match_pattern(tpl, m)

    def test_embeddings_agree_with_brute_force(self):
        templates = list(template_catalog().values()) + list(functional_group_rules())
        checked = 0
        for m in CORPUS:
            if m.heavy_atom_count() > 10:
                continue
            for tpl in templates:
                if len(tpl.atoms) > 7:
                    continue
                assert match_pattern(tpl, m) == brute_embeddings(tpl, m), (tpl.name, m)
                checked += 1
        assert checked > 500

    @given(st.sampled_from(CORPUS), st.sampled_from(sorted(template_catalog())), st.randoms(use_true_random=False))
    def test_relabel_invariant(self, m, name, rng):
        tpl = get_template(name)
        assert count_matches(tpl, shuffled(m, rng)) == count_matches(tpl, m)

    def test_catalog_names(self):
        names = set(template_catalog())
        for want in [
            "piperidine", "piperidine-2,6-dione", "oxoisoindolinone", "imidazole", "pyrimidine", "piperazine",
            "indole", "diazepine", "triazole", "thiophene", "pyrrole", "pyridone",
        ]:
            assert want in names

    def test_unknown_template(self):
        with pytest.raises(PatternError):
            get_template("no-such-ring")

    @pytest.mark.parametrize("bad", ["C(", "[C;q]", ""])
    def test_bad_pattern(self, bad):
        with pytest.raises(PatternError):
            parse_pattern("bad", bad)


class TestRingEvents:
    def test_diels_alder_forms_six_ring(self):
        ev = ring_events(parse_smiles_set("C=CC=C.C=C"), parse_smiles("C1=CCCCC1"))
        assert [(e.kind, e.ring) for e in ev] == [("formed", 6)]

    def test_ester_hydrolysis_has_no_events(self):
        assert ring_events(parse_smiles_set("CC(=O)OC.O"), parse_smiles("CC(=O)O")) == []

    def test_pyrimidine_opening(self):
        tpl = get_template("pyrimidine")
        before, after = parse_smiles("c1cncnc1"), parse_smiles("C=NC=CC=N")
        assert count_matches(tpl, before) == 1 and count_matches(tpl, after) == 0
        ev = ring_events([before], after, [tpl])
        assert [(e.kind, e.ring) for e in ev] == [("broken", "pyrimidine")]

    @given(st.sampled_from(CORPUS), st.sampled_from(CORPUS))
    def test_antisymmetric(self, a, b):
        templates = list(template_catalog().values())
        for tpls in (None, templates):
            fwd = {(e.ring, e.kind, e.delta) for e in ring_events([a], b, tpls)}
            back = {(e.ring, {"formed": "broken", "broken": "formed"}[e.kind], e.delta) for e in ring_events([b], a, tpls)}
            assert fwd == back


class TestFunctionalGroups:
    def test_acid(self):
        assert extract_functional_groups(parse_smiles("CC(=O)O")).names() == {"carboxylic acid"}

    def test_primary_amine(self):
        assert extract_functional_groups(parse_smiles("CCN")).names() == {"primary amine"}

    @pytest.mark.parametrize(
        "smiles, group",
        [
            ("CC(=O)OC", "ester"),
            ("CC(=O)OCC", "ethyl ester"),
            ("CC(N)=O", "amide"),
            ("CC=O", "aldehyde"),
            ("CC(C)=O", "ketone"),
            ("CC#N", "nitrile"),
            ("C[N+](=O)[O-]", "nitro"),
            ("CCBr", "halide"),
            ("CCS", "thiol"),
            ("CSC", "sulfide"),
            ("CCO", "alcohol"),
            ("CC(C)(C)OC(=O)NC", "tert-butyl carbamate"),
            ("C[Si](C)(C)OC", "trialkylsilyl ether"),
            ("COCOC", "methoxymethyl ether"),
            ("c1ccccc1COC", "benzyl ether"),
        ],
    )
    def test_rule_table(self, smiles, group):
        assert group in extract_functional_groups(parse_smiles(smiles))

    def test_protecting_group_claims_atoms(self):
        fg = extract_functional_groups(parse_smiles("CC(C)(C)OC(=O)NC"))
        assert "carbamate" not in fg and "amide" not in fg

    def test_at_least_25_groups(self):
        assert len({r.name for r in functional_group_rules()}) >= 25

    def test_self_jaccard(self):
        for m in CORPUS:
            fg = extract_functional_groups(m)
            assert jaccard(fg, fg) == 1

    @given(st.sampled_from(CORPUS), st.randoms(use_true_random=False))
    def test_relabel_invariant(self, m, rng):
        assert extract_functional_groups(shuffled(m, rng)) == extract_functional_groups(m)

    def test_jaccard_values(self):
        assert jaccard({"acid"}, {"acid"}) == 1
        assert jaccard({"acid"}, {"ester"}) == 0
        assert jaccard({"acid", "amine"}, {"acid"}) == Fraction(1, 2)
        assert jaccard(set(), set()) == 1
