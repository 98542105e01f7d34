from __future__ import annotations

import random
import warnings
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from chemsteer.chem import Atom, Bond, Molecule, parse_smiles, perceive_electrons, read_corpus
from chemsteer.chem.smiles import StereoIgnoredWarning

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).resolve().parents[1] / "src" / "chemsteer" / "data"


def corpus_smiles() -> list[str]:
    return read_corpus(DATA / "corpus.smi")


def corpus_molecules() -> list[Molecule]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StereoIgnoredWarning)
        return [parse_smiles(s) for s in corpus_smiles()]


@pytest.fixture(scope="session")
def corpus():
    return corpus_molecules()


def shuffled(m: Molecule, rng: random.Random) -> Molecule:
    order = list(range(len(m.atoms)))
    rng.shuffle(order)
    return m.relabel(order)


def brute_isomorphic(a: Molecule, b: Molecule) -> bool:
    """Backtracking search over atom bijections; independent of canonical forms."""
    if len(a.atoms) != len(b.atoms) or len(a.bonds) != len(b.bonds):
        return False

    def label(m, i):
        at = m.atoms[i]
        return (at.element, at.formal_charge, at.hydrogen_count, at.isotope)

    n = len(a.atoms)
    order = sorted(range(n), key=lambda i: -a.degree(i))
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(k: int) -> bool:
        if k == n:
            return True
        i = order[k]
        for j in range(n):
            if j in used or label(a, i) != label(b, j) or a.degree(i) != b.degree(j):
                continue
            if any(b.bond_order(j, mapping[p]) != a.bond_order(i, p) for p in mapping):
                continue
            mapping[i] = j
            used.add(j)
            if extend(k + 1):
                return True
            del mapping[i]
            used.discard(j)
        return False

    return extend(0)


_DEFAULT_VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "Cl": 1, "F": 1}


@st.composite
def neutral_molecules(draw, max_atoms: int = 9) -> Molecule:
    """Random connected neutral molecules over C, N, O, S and halogens."""
    n = draw(st.integers(1, max_atoms))
    elements = [draw(st.sampled_from(["C", "C", "C", "N", "O", "S", "Cl", "F"])) for _ in range(n)]
    if n > 1:
        elements = [e if e not in ("Cl", "F") else "C" for e in elements[:1]] + elements[1:]
    used = [0] * n
    bonds: dict[tuple[int, int], int] = {}

    def room(i):
        return _DEFAULT_VALENCE[elements[i]] - used[i]

    for i in range(1, n):
        parents = [j for j in range(i) if room(j) >= 1]
        if not parents:
            elements[i] = "C"
            parents = [i - 1]
            if room(i - 1) < 1:
                break
        j = draw(st.sampled_from(parents))
        order = draw(st.integers(1, max(1, min(3, room(i), room(j)))))
        bonds[(j, i)] = order
        used[i] += order
        used[j] += order
    else:
        extra = draw(st.integers(0, 2))
        for _ in range(extra):
            i = draw(st.integers(0, n - 1))
            j = draw(st.integers(0, n - 1))
            if i != j and (min(i, j), max(i, j)) not in bonds and room(i) >= 1 and room(j) >= 1:
                bonds[(min(i, j), max(i, j))] = 1
                used[i] += 1
                used[j] += 1
        atoms = tuple(Atom(e, 0, max(0, _DEFAULT_VALENCE[e] - used[i])) for i, e in enumerate(elements))
        mol = perceive_electrons(Molecule(atoms, tuple(Bond(a, b, o) for (a, b), o in bonds.items())))
        mol.validate()
        return mol
    # fallback when the tree could not be completed: a plain chain of carbons
    return parse_smiles("C" * n)


def permutations_of(n: int, count: int, seed: int) -> list[list[int]]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        p = list(range(n))
        rng.shuffle(p)
        out.append(p)
    return out


PARTNERS = ["[H+]", "O", "[OH-]", "Cl", "N", "[Br-]", "CO", "C=O"]


def start_states(limit_heavy: int = 7):
    """Reactant sets built from small corpus molecules and common partners."""
    from chemsteer.bench import load_mech_tasks
    from chemsteer.mech import MechState

    out = [t.initial for t in load_mech_tasks(validate=False)]
    small = [s for s, m in zip(corpus_smiles(), corpus_molecules()) if 2 <= m.heavy_atom_count() <= limit_heavy]
    for k, smi in enumerate(small):
        if "@" in smi or "/" in smi or "\\" in smi:
            continue
        out.append(MechState.from_smiles(f"{smi}.{PARTNERS[k % len(PARTNERS)]}"))
    return out


def random_walk(state, rng: random.Random, steps: int, rules=None):
    """Yield ``(state, move, next_state)`` along a random legal walk."""
    from chemsteer.mech import DEFAULT_RULES, apply_move, legal_moves

    rules = rules or DEFAULT_RULES
    for _ in range(steps):
        moves = legal_moves(state, rules)
        if not moves:
            return
        move = moves[rng.randrange(len(moves))]
        nxt = apply_move(state, move, rules)
        yield state, move, nxt
        state = nxt
