"""SMILES reading and writing.

The grammar covers organic-subset and bracket atoms (isotope, chirality,
hydrogen count, charge, atom class), bonds ``- = # : / \\``, ring closures
(digits and ``%nn``), branches and dots. Aromatic input is kekulized at
parse time; output is always kekulé. Stereo marks are accepted and dropped.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .elements import AROMATIC_SYMBOLS, ORGANIC_SUBSET, isoelectronic_valence, is_supported
from .molecule import Atom, Bond, ChemError, Molecule, MolSet, perceive_electrons

BOND_SYMBOLS = "-=#:/\\~"
_ORDER = {"-": 1, "=": 2, "#": 3, "/": 1, "\\": 1}


class SmilesSyntaxError(ChemError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at offset {position}" + (f" in {text!r}" if text else ""))


class KekulizationError(ChemError):
    pass


class StereoIgnoredWarning(UserWarning):
    pass


@dataclass
class ParsedAtom:
    token: str
    position: int
    bracket: bool


@dataclass
class ParsedEdge:
    a: int
    b: int
    symbol: str | None
    position: int


@dataclass
class ParsedGraph:
    atoms: list[ParsedAtom] = field(default_factory=list)
    edges: list[ParsedEdge] = field(default_factory=list)
    stereo: bool = False


_TWO_LETTER = ("Cl", "Br")


def _tokens(text: str) -> Iterator[tuple[str, str, int]]:
    """Yield ``(kind, value, offset)`` triples."""
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            j = text.find("]", i + 1)
            if j < 0:
                raise SmilesSyntaxError("unterminated bracket atom", i, text)
            yield "atom_bracket", text[i + 1 : j], i
            i = j + 1
        elif text.startswith(_TWO_LETTER, i):
            yield "atom", text[i : i + 2], i
            i += 2
        elif ch in ORGANIC_SUBSET or ch in AROMATIC_SYMBOLS or ch == "*":
            yield "atom", ch, i
            i += 1
        elif ch in BOND_SYMBOLS:
            yield "bond", ch, i
            i += 1
        elif ch.isdigit():
            yield "ring", ch, i
            i += 1
        elif ch == "%":
            digits = text[i + 1 : i + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise SmilesSyntaxError("'%' must be followed by two digits", i, text)
            yield "ring", digits, i
            i += 3
        elif ch in "().":
            yield ch, ch, i
            i += 1
        else:
            raise SmilesSyntaxError(f"unexpected character {ch!r}", i, text)


def parse_graph(text: str) -> ParsedGraph:
    """Parse SMILES syntax into atoms and edges without chemical interpretation."""
    if not text:
        raise SmilesSyntaxError("empty input", 0)
    g = ParsedGraph()
    prev: int | None = None
    pending: tuple[str, int] | None = None
    branches: list[tuple[int | None, int]] = []
    rings: dict[str, tuple[int, str | None, int]] = {}
    last_kind = "start"

    for kind, value, pos in _tokens(text):
        if kind in ("atom", "atom_bracket"):
            g.atoms.append(ParsedAtom(value, pos, kind == "atom_bracket"))
            idx = len(g.atoms) - 1
            if kind == "atom_bracket" and "@" in value:
                g.stereo = True
            if prev is not None:
                sym = pending[0] if pending else None
                g.edges.append(ParsedEdge(prev, idx, sym, pending[1] if pending else pos))
            elif pending is not None:
                raise SmilesSyntaxError("bond without a preceding atom", pending[1], text)
            pending = None
            prev = idx
        elif kind == "bond":
            if prev is None or pending is not None:
                raise SmilesSyntaxError(f"misplaced bond {value!r}", pos, text)
            if value in "/\\":
                g.stereo = True
            pending = (value, pos)
        elif kind == "ring":
            if prev is None or last_kind in ("(", "."):
                raise SmilesSyntaxError("ring closure without an atom", pos, text)
            sym = pending[0] if pending else None
            if value in rings:
                other, other_sym, other_pos = rings.pop(value)
                if other == prev:
                    raise SmilesSyntaxError("ring closure onto the same atom", pos, text)
                if sym and other_sym and sym != other_sym and {sym, other_sym} - {"/", "\\"}:
                    raise SmilesSyntaxError("conflicting ring-closure bonds", pos, text)
                g.edges.append(ParsedEdge(other, prev, sym or other_sym, pos))
            else:
                rings[value] = (prev, sym, pos)
            pending = None
        elif kind == "(":
            if prev is None or pending is not None:
                raise SmilesSyntaxError("branch without an atom", pos, text)
            branches.append((prev, pos))
        elif kind == ")":
            if not branches:
                raise SmilesSyntaxError("unbalanced ')'", pos, text)
            if pending is not None or last_kind == "(":
                raise SmilesSyntaxError("empty branch or dangling bond", pos, text)
            prev, _ = branches.pop()
        elif kind == ".":
            if pending is not None or prev is None:
                raise SmilesSyntaxError("misplaced '.'", pos, text)
            prev = None
        last_kind = kind

    end = len(text)
    if pending is not None:
        raise SmilesSyntaxError("dangling bond", end, text)
    if branches:
        raise SmilesSyntaxError("unbalanced branch", end, text)
    if rings:
        raise SmilesSyntaxError(f"unclosed ring {sorted(rings)[0]}", end, text)
    if not g.atoms:
        raise SmilesSyntaxError("no atoms", 0, text)
    seen: set[tuple[int, int]] = set()
    for e in g.edges:
        key = (min(e.a, e.b), max(e.a, e.b))
        if key in seen:
            raise SmilesSyntaxError("duplicate bond", e.position, text)
        seen.add(key)
    return g


_BRACKET = re.compile(
    r"^(?P<isotope>\d+)?"
    r"(?P<symbol>[A-Z][a-z]?|[bcnops]|\*)"
    r"(?P<chiral>@(?:@|TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?)?"
    r"(?P<hcount>H\d?)?"
    r"(?P<charge>[+-](?:\d+|[+-]*))?"
    r"(?::(?P<cls>\d+))?$"
)


@dataclass
class BracketSpec:
    symbol: str
    aromatic: bool
    isotope: int
    hcount: int
    charge: int
    atom_class: int | None


def parse_bracket(content: str, position: int = 0, text: str = "") -> BracketSpec:
    m = _BRACKET.match(content)
    if not m:
        raise SmilesSyntaxError(f"malformed bracket atom [{content}]", position, text)
    symbol = m.group("symbol")
    aromatic = symbol in AROMATIC_SYMBOLS
    if aromatic:
        symbol = AROMATIC_SYMBOLS[symbol]
    hc = m.group("hcount")
    hcount = 0 if not hc else (int(hc[1:]) if len(hc) > 1 else 1)
    ch = m.group("charge")
    charge = 0
    if ch:
        sign = 1 if ch[0] == "+" else -1
        rest = ch[1:]
        if rest.isdigit():
            charge = sign * int(rest)
        elif rest and set(rest) != {ch[0]}:
            raise SmilesSyntaxError(f"malformed charge in [{content}]", position, text)
        else:
            charge = sign * (1 + len(rest))
    cls = m.group("cls")
    return BracketSpec(
        symbol=symbol,
        aromatic=aromatic,
        isotope=int(m.group("isotope") or 0),
        hcount=hcount,
        charge=charge,
        atom_class=int(cls) if cls else None,
    )


def _implicit_h(element: str, bond_sum: int) -> int:
    for v in ORGANIC_SUBSET[element]:
        if v >= bond_sum:
            return v - bond_sum
    return 0


def _perfect_matching(nodes: list[int], adj: dict[int, list[int]]) -> dict[int, int] | None:
    """Backtracking perfect matching; nodes with fewest options go first."""
    match: dict[int, int] = {}

    def solve() -> bool:
        free = [n for n in nodes if n not in match]
        if not free:
            return True
        best = None
        best_opts: list[int] = []
        for n in free:
            opts = [m for m in adj[n] if m not in match]
            if best is None or len(opts) < len(best_opts):
                best, best_opts = n, opts
                if not opts:
                    return False
        for partner in best_opts:
            match[best] = partner
            match[partner] = best
            if solve():
                return True
            del match[best]
            del match[partner]
        return False

    return match if solve() else None


def _build_molecules(g: ParsedGraph, text: str, *, allow_disconnected: bool) -> list[Molecule]:
    n = len(g.atoms)
    elements: list[str] = []
    aromatic = [False] * n
    charges = [0] * n
    hcounts: list[int | None] = [None] * n
    isotopes = [0] * n

    for i, pa in enumerate(g.atoms):
        if pa.bracket:
            spec = parse_bracket(pa.token, pa.position, text)
            if spec.symbol == "*" or not is_supported(spec.symbol):
                raise ChemError(f"unsupported element {spec.symbol!r} at offset {pa.position}")
            elements.append(spec.symbol)
            aromatic[i] = spec.aromatic
            charges[i] = spec.charge
            hcounts[i] = spec.hcount
            isotopes[i] = spec.isotope
        else:
            if pa.token == "*":
                raise ChemError(f"wildcard atom not allowed in a molecule (offset {pa.position})")
            if pa.token in AROMATIC_SYMBOLS:
                elements.append(AROMATIC_SYMBOLS[pa.token])
                aromatic[i] = True
            else:
                elements.append(pa.token)

    orders: dict[tuple[int, int], int] = {}
    aromatic_edges: list[tuple[int, int]] = []
    for e in g.edges:
        key = (min(e.a, e.b), max(e.a, e.b))
        if e.symbol == "~":
            raise SmilesSyntaxError("'~' is only valid in patterns", e.position, text)
        if e.symbol == ":" or (e.symbol is None and aromatic[e.a] and aromatic[e.b]):
            aromatic_edges.append(key)
            orders[key] = 1
        else:
            orders[key] = _ORDER.get(e.symbol or "-", 1)

    # kekulization: find the aromatic atoms that still need one double bond
    if any(aromatic):
        explicit = [0] * n
        for (a, b), order in orders.items():
            explicit[a] += order
            explicit[b] += order
        needs = []
        for i in range(n):
            if not aromatic[i]:
                continue
            if hcounts[i] is not None:
                free = isoelectronic_valence(elements[i], charges[i]) - explicit[i] - hcounts[i]
            else:
                free = next((v for v in ORGANIC_SUBSET[elements[i]] if v >= explicit[i]), 0) - explicit[i]
            if free >= 1:
                needs.append(i)
        # rank the aromatic-annotated graph so the kekulé form chosen does
        # not depend on how the SMILES string happened to order its atoms
        from .canon import rank_graph

        invariants = [
            (elements[i], charges[i], isotopes[i], -1 if hcounts[i] is None else hcounts[i], aromatic[i])
            for i in range(n)
        ]
        arom_set = set(aromatic_edges)
        ranks = rank_graph(invariants, [(a, b, 4 if (a, b) in arom_set else o) for (a, b), o in orders.items()])
        needs.sort(key=lambda i: ranks[i])
        need_set = set(needs)
        adj: dict[int, list[int]] = {i: [] for i in needs}
        for a, b in aromatic_edges:
            if a in need_set and b in need_set:
                adj[a].append(b)
                adj[b].append(a)
        for i in needs:
            adj[i].sort(key=lambda j: ranks[j])
        matching = _perfect_matching(needs, adj)
        if matching is None:
            raise KekulizationError(f"cannot kekulize aromatic system in {text!r}")
        for a, b in matching.items():
            if a < b:
                orders[(a, b)] = 2

    bond_sum = [0] * n
    for (a, b), order in orders.items():
        bond_sum[a] += order
        bond_sum[b] += order
    for i in range(n):
        if hcounts[i] is None:
            hcounts[i] = _implicit_h(elements[i], bond_sum[i])

    # fold neutral explicit [H] atoms into their neighbour's hydrogen count
    removed: set[int] = set()
    nbrs: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in orders:
        nbrs[a].append(b)
        nbrs[b].append(a)
    for i in range(n):
        if elements[i] != "H" or charges[i] or isotopes[i] or hcounts[i] or i in removed:
            continue
        live = [j for j in nbrs[i] if j not in removed]
        if len(live) != 1:
            continue
        j = live[0]
        key = (min(i, j), max(i, j))
        if orders[key] != 1:
            continue
        if elements[j] == "H" and j < i and hcounts[j]:
            continue
        hcounts[j] += 1
        removed.add(i)
        del orders[key]

    keep = [i for i in range(n) if i not in removed]
    index = {old: new for new, old in enumerate(keep)}
    atoms = tuple(
        Atom(elements[i], charges[i], hcounts[i] or 0, 0, isotopes[i]) for i in keep
    )
    bonds = tuple(
        Bond(index[a], index[b], order) for (a, b), order in sorted(orders.items())
    )
    mol = perceive_electrons(Molecule(atoms, bonds))
    comps = mol.components()
    if len(comps) > 1 and not allow_disconnected:
        raise ChemError(f"{text!r} is disconnected; use parse_smiles_set")
    return [mol.subgraph(c) for c in comps] if len(comps) > 1 else [mol]


def parse_smiles(text: str, *, hypervalent: bool = False) -> Molecule:
    """Parse one connected molecule."""
    from .elements import ValenceModel

    g = parse_graph(text)
    if g.stereo:
        warnings.warn(f"stereochemistry in {text!r} ignored", StereoIgnoredWarning, stacklevel=2)
    (mol,) = _build_molecules(g, text, allow_disconnected=False)
    mol.validate(ValenceModel(hypervalent))
    return mol


def split_top_level(text: str) -> list[str]:
    parts = []
    depth = 0
    in_bracket = False
    start = 0
    for i, ch in enumerate(text):
        if ch == "[":
            in_bracket = True
        elif ch == "]":
            in_bracket = False
        elif not in_bracket and ch == "(":
            depth += 1
        elif not in_bracket and ch == ")":
            depth -= 1
        elif ch == "." and depth == 0 and not in_bracket:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


class ComponentError(ChemError):
    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"component {index}: {cause}")


def parse_smiles_set(text: str, *, hypervalent: bool = False) -> MolSet:
    if not text or not text.strip():
        raise SmilesSyntaxError("empty input", 0)
    mols = []
    for idx, part in enumerate(split_top_level(text.strip())):
        try:
            mols.append(parse_smiles(part, hypervalent=hypervalent))
        except ChemError as exc:
            raise ComponentError(idx, exc) from exc
    return MolSet.of(mols)


# --- writing -----------------------------------------------------------------


def _atom_text(m: Molecule, i: int, map_number: int | None = None) -> str:
    atom = m.atoms[i]
    el = atom.element
    if (
        map_number is None
        and el in ORGANIC_SUBSET
        and atom.formal_charge == 0
        and atom.isotope == 0
        and _implicit_h(el, m.bond_sum(i)) == atom.hydrogen_count
        and (m.bond_sum(i) + atom.hydrogen_count) in ORGANIC_SUBSET[el]
    ):
        return el
    out = "["
    if atom.isotope:
        out += str(atom.isotope)
    out += el
    if atom.hydrogen_count:
        out += "H" + (str(atom.hydrogen_count) if atom.hydrogen_count > 1 else "")
    q = atom.formal_charge
    if q:
        out += ("+" if q > 0 else "-") + (str(abs(q)) if abs(q) > 1 else "")
    if map_number is not None:
        out += f":{map_number}"
    return out + "]"


_BOND_TEXT = {1: "", 2: "=", 3: "#"}


def _ring_label(k: int) -> str:
    return str(k) if k < 10 else f"%{k:02d}"


def write_smiles(m: Molecule, ranks: Sequence[int] | None = None, *, atom_maps: bool = False) -> str:
    """Kekulé SMILES; atoms are visited in ``ranks`` order (canonical by default).

    With ``atom_maps`` every atom is written as a bracket atom carrying its
    atom id + 1 as the map number.
    """
    if not atom_maps and len(m.atoms) == 1 and m.atoms[0].element == "H" and m.atoms[0].hydrogen_count == 1:
        a = m.atoms[0]
        if a.formal_charge == 0 and not a.isotope:
            return "[H][H]"
    if ranks is None:
        from .canon import canonical_ranks

        ranks = canonical_ranks(m)
    nbrs = [sorted(row, key=lambda p: ranks[p[0]]) for row in m.neighbors]
    parent: dict[int, int] = {}
    children: dict[int, list[int]] = {}
    closures: dict[int, list[int]] = {}
    handled: set[tuple[int, int]] = set()

    def walk(u: int) -> None:
        children[u] = []
        for v, _ in nbrs[u]:
            if v == parent[u]:
                continue
            key = (min(u, v), max(u, v))
            if v in parent:
                if key not in handled:
                    handled.add(key)
                    closures.setdefault(u, []).append(v)
                    closures.setdefault(v, []).append(u)
                continue
            handled.add(key)
            parent[v] = u
            children[u].append(v)
            walk(v)

    out: list[str] = []
    labels: dict[tuple[int, int], int] = {}
    in_use: set[int] = set()

    def emit(u: int) -> None:
        out.append(_atom_text(m, u, u + 1 if atom_maps else None))
        for v in sorted(closures.get(u, ()), key=lambda j: ranks[j]):
            key = (min(u, v), max(u, v))
            bo = _BOND_TEXT[m.bond_order(u, v)]
            if key in labels:
                k = labels.pop(key)
                in_use.discard(k)
                out.append(bo + _ring_label(k))
            else:
                k = 1
                while k in in_use:
                    k += 1
                in_use.add(k)
                labels[key] = k
                out.append(bo + _ring_label(k))
        kids = children[u]
        for idx, v in enumerate(kids):
            bo = _BOND_TEXT[m.bond_order(u, v)]
            if idx < len(kids) - 1:
                out.append("(" + bo)
                emit(v)
                out.append(")")
            else:
                out.append(bo)
                emit(v)

    for start in sorted(range(len(m.atoms)), key=lambda i: ranks[i]):
        if start in parent:
            continue
        if out:
            out.append(".")
        parent[start] = -1
        walk(start)
        emit(start)
    return "".join(out)


def write_smiles_set(ms: MolSet) -> str:
    return ms.canonical_key


def read_corpus(path) -> list[str]:
    """Read a one-SMILES-per-line file, skipping blanks and ``#`` comments."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                out.append(line.split()[0])
    return out
