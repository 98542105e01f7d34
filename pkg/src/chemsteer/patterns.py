"""Ring perception, template matching, ring events and functional groups.

Templates are annotated SMILES (see ``data/templates.tsv``). Atom
predicates are limited to element sets, charge, hydrogen count and a few
flags; bond predicates are order sets. Matching is an injective,
non-induced subgraph search.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

from .chem.canon import canonical_ranks
from .chem.elements import AROMATIC_SYMBOLS, VALENCE_ELECTRONS
from .chem.molecule import ChemError, Molecule, MolSet
from .chem.smiles import SmilesSyntaxError, parse_graph

ANY_ORDER = frozenset({1, 2, 3})
_BOND_SETS = {"-": frozenset({1}), "=": frozenset({2}), "#": frozenset({3}), "~": ANY_ORDER, ":": frozenset({1, 2})}


class PatternError(ChemError):
    pass


@dataclass(frozen=True)
class AtomPredicate:
    elements: frozenset[str] | None = None
    charge: int | None = None
    hydrogens: int | None = None
    unsaturated: bool | None = None
    saturated: bool = False
    in_ring: bool | None = None
    key: bool = False


@dataclass(frozen=True)
class Pattern:
    name: str
    atoms: tuple[AtomPredicate, ...]
    bonds: tuple[tuple[int, int, frozenset[int]], ...]
    source: str = ""

    @property
    def key_atoms(self) -> tuple[int, ...]:
        keys = tuple(i for i, a in enumerate(self.atoms) if a.key)
        return keys or tuple(range(len(self.atoms)))


_PRED_HCOUNT = re.compile(r"^H(\d)$")
_PRED_CHARGE = re.compile(r"^([+-])(\d?)$")


def _parse_pattern_atom(token: str, bracket: bool, where: str) -> tuple[AtomPredicate, bool]:
    """Return the predicate and whether the atom was written lowercase."""
    if not bracket:
        if token == "*":
            return AtomPredicate(), False
        if token in AROMATIC_SYMBOLS:
            return AtomPredicate(frozenset({AROMATIC_SYMBOLS[token]}), unsaturated=True), True
        return AtomPredicate(frozenset({token})), False

    body, _, cls = token.partition(":")
    if cls and not cls.isdigit():
        raise PatternError(f"bad atom class in [{token}] ({where})")
    head, *preds = body.split(";")
    lower = False
    if head == "*":
        elements = None
    else:
        elements = set()
        symbols = head.split(",")
        # a list mixing cases, like [C,c], leaves saturation open
        lower = all(sym in AROMATIC_SYMBOLS for sym in symbols)
        for sym in symbols:
            if sym in AROMATIC_SYMBOLS:
                sym = AROMATIC_SYMBOLS[sym]
            if sym not in VALENCE_ELECTRONS:
                raise PatternError(f"unknown element {sym!r} in [{token}] ({where})")
            elements.add(sym)
        elements = frozenset(elements)
    kw: dict = {"unsaturated": True if lower else None}
    for p in preds:
        if m := _PRED_HCOUNT.match(p):
            kw["hydrogens"] = int(m.group(1))
        elif m := _PRED_CHARGE.match(p):
            kw["charge"] = (1 if m.group(1) == "+" else -1) * int(m.group(2) or 1)
        elif p == "0":
            kw["charge"] = 0
        elif p == "u":
            kw["unsaturated"] = True
        elif p == "!u":
            kw["unsaturated"] = False
        elif p == "s":
            kw["saturated"] = True
        elif p == "R":
            kw["in_ring"] = True
        elif p == "!R":
            kw["in_ring"] = False
        else:
            raise PatternError(f"unknown predicate {p!r} in [{token}] ({where})")
    return AtomPredicate(elements, key=bool(cls), **kw), lower


def parse_pattern(name: str, text: str) -> Pattern:
    try:
        g = parse_graph(text)
    except SmilesSyntaxError as exc:
        raise PatternError(f"template {name!r}: {exc}") from exc
    atoms = []
    lower = []
    for pa in g.atoms:
        pred, low = _parse_pattern_atom(pa.token, pa.bracket, name)
        atoms.append(pred)
        lower.append(low)
    bonds = []
    for e in g.edges:
        if e.symbol is None:
            orders = ANY_ORDER if lower[e.a] and lower[e.b] else frozenset({1})
        elif e.symbol in "/\\":
            orders = frozenset({1})
        else:
            orders = _BOND_SETS[e.symbol]
        bonds.append((min(e.a, e.b), max(e.a, e.b), orders))
    pat = Pattern(name, tuple(atoms), tuple(bonds), text)
    if len(atoms) > 1:
        seen = {0}
        frontier = [0]
        adj: dict[int, list[int]] = {}
        for a, b, _ in bonds:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        while frontier:
            i = frontier.pop()
            for j in adj.get(i, ()):
                if j not in seen:
                    seen.add(j)
                    frontier.append(j)
        if len(seen) != len(atoms):
            raise PatternError(f"template {name!r} is not connected")
    return pat


def read_catalog(lines: Iterable[str]) -> list[Pattern]:
    """Parse ``name<TAB>annotated-SMILES`` records; blank and ``#`` lines skipped."""
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise PatternError(f"catalog line {lineno}: expected name<TAB>pattern")
        name, text = line.split("\t", 1)
        out.append(parse_pattern(name.strip(), text.strip()))
    return out


def _data_lines(filename: str) -> list[str]:
    return resources.files("chemsteer.data").joinpath(filename).read_text("utf-8").splitlines()


@lru_cache(maxsize=None)
def template_catalog() -> dict[str, Pattern]:
    return {p.name: p for p in read_catalog(_data_lines("templates.tsv"))}


@lru_cache(maxsize=None)
def functional_group_rules() -> tuple[Pattern, ...]:
    return tuple(read_catalog(_data_lines("functional_groups.tsv")))


def get_template(name: str) -> Pattern:
    try:
        return template_catalog()[name]
    except KeyError:
        raise PatternError(f"unknown template {name!r}") from None


# --- rings -------------------------------------------------------------------


def find_rings(m: Molecule, max_size: int = 8) -> list[tuple[int, ...]]:
    """All simple cycles with at most ``max_size`` atoms, one per atom set.

    Each cycle is returned starting at its smallest atom id.
    """
    if max_size < 3:
        raise ValueError("max_size must be >= 3")
    seen: set[frozenset[int]] = set()
    out: list[tuple[int, ...]] = []
    adj = [[j for j, _ in row] for row in m.neighbors]
    for s in range(len(m.atoms)):
        stack: list[tuple[int, list[int]]] = [(s, [s])]
        while stack:
            u, path = stack.pop()
            for v in adj[u]:
                if v == s and len(path) >= 3:
                    key = frozenset(path)
                    if key not in seen:
                        seen.add(key)
                        out.append(tuple(path))
                elif v > s and v not in path and len(path) < max_size:
                    stack.append((v, path + [v]))
    out.sort(key=lambda c: (len(c), sorted(c)))
    return out


@dataclass(frozen=True)
class _Context:
    multiple: tuple[bool, ...]
    conjugated: tuple[bool, ...]
    saturated: tuple[bool, ...]
    ring_atoms: frozenset[int]


@lru_cache(maxsize=8192)
def _context(m: Molecule) -> _Context:
    multiple = tuple(any(o > 1 for _, o in row) for row in m.neighbors)
    conjugated = tuple(
        multiple[i] or (m.atoms[i].lone_pairs > 0 and any(multiple[j] for j, _ in m.neighbors[i]))
        for i in range(len(m.atoms))
    )
    ring_atoms = frozenset(i for c in find_rings(m, 8) for i in c)
    return _Context(multiple, conjugated, tuple(not x for x in multiple), ring_atoms)


def _atom_ok(p: AtomPredicate, m: Molecule, i: int, ctx: _Context) -> bool:
    a = m.atoms[i]
    if p.elements is not None and a.element not in p.elements:
        return False
    if p.charge is not None and a.formal_charge != p.charge:
        return False
    if p.hydrogens is not None and a.hydrogen_count != p.hydrogens:
        return False
    if p.unsaturated is not None and ctx.conjugated[i] != p.unsaturated:
        return False
    if p.saturated and not ctx.saturated[i]:
        return False
    if p.in_ring is not None and (i in ctx.ring_atoms) != p.in_ring:
        return False
    return True


def match_pattern(p: Pattern, m: Molecule) -> list[tuple[int, ...]]:
    """All embeddings of ``p`` in ``m``; ``emb[k]`` is the target of template atom ``k``.

    Returned in lexicographic order of the embedding tuples.
    """
    n = len(p.atoms)
    if n == 0 or n > len(m.atoms):
        return []
    ctx = _context(m)
    padj: dict[int, list[tuple[int, frozenset[int]]]] = {i: [] for i in range(n)}
    for a, b, orders in p.bonds:
        padj[a].append((b, orders))
        padj[b].append((a, orders))
    # visit template atoms in BFS order so every later atom has a mapped neighbour
    order = [0]
    seen = {0}
    for i in order:
        for j, _ in sorted(padj[i]):
            if j not in seen:
                seen.add(j)
                order.append(j)
    anchor = {}
    for pos, t in enumerate(order[1:], 1):
        anchor[t] = next(j for j, _ in padj[t] if j in order[:pos])

    candidates = [
        [i for i in range(len(m.atoms)) if _atom_ok(p.atoms[t], m, i, ctx)] for t in range(n)
    ]
    cand_sets = [set(c) for c in candidates]
    results: list[tuple[int, ...]] = []
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(depth: int) -> None:
        if depth == n:
            results.append(tuple(mapping[t] for t in range(n)))
            return
        t = order[depth]
        if depth == 0:
            pool: Iterable[int] = candidates[t]
        else:
            pool = [j for j, _ in m.neighbors[mapping[anchor[t]]] if j in cand_sets[t]]
        for i in pool:
            if i in used:
                continue
            ok = True
            for j, orders in padj[t]:
                if j in mapping and m.bond_order(i, mapping[j]) not in orders:
                    ok = False
                    break
            if not ok:
                continue
            mapping[t] = i
            used.add(i)
            extend(depth + 1)
            del mapping[t]
            used.discard(i)

    extend(0)
    results.sort()
    return results


def count_matches(p: Pattern, m: Molecule) -> int:
    """Number of distinct matched atom sets."""
    return len({frozenset(e) for e in match_pattern(p, m)})


# --- ring events -------------------------------------------------------------


@dataclass(frozen=True)
class RingEvent:
    kind: str  # "formed" | "broken"
    ring: str | int
    step_id: str = ""
    delta: int = 1


def ring_size_counts(m: Molecule, max_size: int = 8) -> Counter:
    return Counter(len(c) for c in find_rings(m, max_size))


def ring_events(
    reactants: MolSet | Sequence[Molecule],
    product: Molecule,
    templates: Sequence[Pattern] | None = None,
    step_id: str = "",
    max_size: int = 8,
) -> list[RingEvent]:
    """Compare template (or raw ring-size) counts across a reaction."""
    species = list(reactants)
    events = []
    if templates:
        for t in templates:
            before = sum(count_matches(t, r) for r in species)
            after = count_matches(t, product)
            if after != before:
                events.append(RingEvent("formed" if after > before else "broken", t.name, step_id, abs(after - before)))
    else:
        before_c: Counter = Counter()
        for r in species:
            before_c.update(ring_size_counts(r, max_size))
        after_c = ring_size_counts(product, max_size)
        for size in sorted(set(before_c) | set(after_c)):
            d = after_c[size] - before_c[size]
            if d:
                events.append(RingEvent("formed" if d > 0 else "broken", size, step_id, abs(d)))
    return events


# --- functional groups -------------------------------------------------------


@dataclass(frozen=True)
class FunctionalGroupSet:
    groups: Counter = field(default_factory=Counter)

    def names(self) -> frozenset[str]:
        return frozenset(k for k, v in self.groups.items() if v > 0)

    def __contains__(self, name: str) -> bool:
        return self.groups.get(name, 0) > 0

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.groups.items())))


def extract_functional_groups(m: Molecule, include_rings: bool = True) -> FunctionalGroupSet:
    claimed: set[int] = set()
    found: Counter = Counter()
    # claim in canonical order so overlapping groups resolve the same way under relabelling
    ranks = canonical_ranks(m)
    for rule in functional_group_rules():
        keys = rule.key_atoms
        seen: set[frozenset[int]] = set()
        for emb in sorted(match_pattern(rule, m), key=lambda e: [ranks[i] for i in e]):
            key_set = frozenset(emb[k] for k in keys)
            if key_set in seen or key_set & claimed:
                continue
            seen.add(key_set)
            claimed |= key_set
            found[rule.name] += 1
    if include_rings:
        for name, tpl in template_catalog().items():
            c = count_matches(tpl, m)
            if c:
                found[name] += c
    return FunctionalGroupSet(found)


def jaccard(a: FunctionalGroupSet | Iterable[str], b: FunctionalGroupSet | Iterable[str]) -> Fraction:
    """Jaccard index over the supports; two empty sets score 1."""
    sa = a.names() if isinstance(a, FunctionalGroupSet) else frozenset(a)
    sb = b.names() if isinstance(b, FunctionalGroupSet) else frozenset(b)
    union = sa | sb
    if not union:
        return Fraction(1)
    return Fraction(len(sa & sb), len(union))
