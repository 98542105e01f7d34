"""Mechanism states and the two elementary electron-pair moves.

An *ionization* lowers a bond order by one and puts the freed pair on one
end (the sink): sink charge -1, other end +1. An *attack* spends a lone
pair to raise the bond order between a nucleophile and an atom with an
empty orbital: nucleophile +1, electrophile -1.

Atoms are addressed by :class:`AtomRef` ``(mol, atom, h)``: species index
in the state's canonical MolSet, atom id in that (canonically ordered)
molecule, and ``h`` = index of an implicit hydrogen on the atom, or -1 for
the atom itself. Implicit hydrogens only take part in ionizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence

from .chem.canon import canonical_ranks, canonicalize
from .chem.elements import DEFAULT_VALENCE, ValenceModel
from .chem.molecule import Atom, Bond, ChemError, Molecule, MolSet
from .chem.smiles import parse_smiles_set, write_smiles

IONIZATION = "ionization"
ATTACK = "attack"


class IllegalMoveError(ChemError):
    pass


class AtomRef(NamedTuple):
    mol: int
    atom: int
    h: int = -1

    @property
    def is_implicit_h(self) -> bool:
        return self.h >= 0

    def to_json(self) -> list[int]:
        return [self.mol, self.atom] if self.h < 0 else [self.mol, self.atom, self.h]

    @classmethod
    def from_json(cls, data: Sequence[int]) -> "AtomRef":
        if len(data) not in (2, 3) or not all(isinstance(x, int) for x in data):
            raise ValueError(f"atom reference must be [mol, atom] or [mol, atom, h], got {data!r}")
        return cls(*data)


@dataclass(frozen=True, order=True)
class Move:
    """``kind`` is IONIZATION or ATTACK.

    Ionization: ``a`` and ``b`` are the bond ends (``a < b``) and ``sink``
    receives the pair. Attack: ``a`` is the nucleophile, ``b`` the
    electrophile and ``sink`` is unused (None).
    """

    kind: str
    a: AtomRef
    b: AtomRef
    sink: AtomRef | None = None

    def __post_init__(self) -> None:
        if self.kind == IONIZATION:
            if self.sink not in (self.a, self.b):
                raise ValueError("ionization sink must be one of the bond ends")
            if self.a > self.b:
                a, b = self.b, self.a
                object.__setattr__(self, "a", a)
                object.__setattr__(self, "b", b)
        elif self.kind == ATTACK:
            if self.sink is not None:
                raise ValueError("attack moves have no sink")
            if self.a[:2] == self.b[:2]:
                raise ValueError("attack needs two distinct atoms")
            if self.a.h >= 0 or self.b.h >= 0:
                raise ValueError("implicit hydrogens cannot attack or be attacked")
        else:
            raise ValueError(f"unknown move kind {self.kind!r}")

    @classmethod
    def ionization(cls, a: AtomRef, b: AtomRef, sink: AtomRef) -> "Move":
        return cls(IONIZATION, AtomRef(*a), AtomRef(*b), AtomRef(*sink))

    @classmethod
    def attack(cls, nucleophile: AtomRef, electrophile: AtomRef) -> "Move":
        return cls(ATTACK, AtomRef(*nucleophile), AtomRef(*electrophile))

    @property
    def nucleophile(self) -> AtomRef:
        return self.a

    @property
    def electrophile(self) -> AtomRef:
        return self.b

    def to_json(self) -> dict:
        out = {"kind": self.kind, "atoms": [self.a.to_json(), self.b.to_json()]}
        if self.kind == IONIZATION:
            out["sink"] = 0 if self.sink == self.a else 1
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Move":
        try:
            kind = data["kind"]
            a, b = (AtomRef.from_json(x) for x in data["atoms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed move {data!r}: {exc}") from None
        if kind == IONIZATION:
            sink = data.get("sink")
            if sink not in (0, 1):
                raise ValueError(f"ionization sink must be 0 or 1, got {sink!r}")
            return cls.ionization(a, b, (a, b)[sink])
        if kind == ATTACK:
            return cls.attack(a, b)
        raise ValueError(f"unknown move kind {kind!r}")


@dataclass(frozen=True)
class MoveRules:
    """Legality knobs on top of the valence model.

    ``max_atom_charge`` drops moves whose result puts a formal charge of
    larger magnitude on any atom; None disables the bound.
    """

    max_atom_charge: int | None = 2
    valence: ValenceModel = DEFAULT_VALENCE

    def charge_ok(self, q: int) -> bool:
        return self.max_atom_charge is None or abs(q) <= self.max_atom_charge


DEFAULT_RULES = MoveRules()
UNBOUNDED_RULES = MoveRules(max_atom_charge=None)


@dataclass(frozen=True, eq=False)
class MechState:
    """A set of species; equality and hashing go by canonical key only."""

    species: MolSet
    parent: "MechState | None" = field(default=None, repr=False)
    move: Move | None = field(default=None, repr=False)

    @classmethod
    def from_smiles(cls, text: str, *, hypervalent: bool = False) -> "MechState":
        return cls(parse_smiles_set(text, hypervalent=hypervalent))

    @property
    def key(self) -> str:
        return self.species.canonical_key

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MechState):
            return NotImplemented
        return self.species == other.species

    def __hash__(self) -> int:
        return hash(self.species)

    def __repr__(self) -> str:
        return f"MechState({self.key!r})"

    def molecule(self, ref: AtomRef) -> Molecule:
        return self.species[ref.mol]

    def atom(self, ref: AtomRef) -> Atom:
        return self.species[ref.mol].atoms[ref.atom]

    def check_ref(self, ref: AtomRef) -> None:
        if not 0 <= ref.mol < len(self.species):
            raise IndexError(f"no species {ref.mol} in state with {len(self.species)} species")
        m = self.species[ref.mol]
        if not 0 <= ref.atom < len(m.atoms):
            raise IndexError(f"no atom {ref.atom} in species {ref.mol}")
        if ref.h >= m.atoms[ref.atom].hydrogen_count:
            raise IndexError(f"atom {ref.atom} of species {ref.mol} has no hydrogen #{ref.h}")

    def path(self) -> "MechanismPath":
        """Walk provenance links back to the root and return the path."""
        chain = []
        s: MechState | None = self
        while s is not None and s.parent is not None:
            chain.append((s.move, s))
            s = s.parent
        assert s is not None
        return MechanismPath(s, tuple(reversed(chain)))


def has_empty_orbital(state: MechState, ref: AtomRef, valence: ValenceModel = DEFAULT_VALENCE) -> bool:
    state.check_ref(ref)
    if ref.h >= 0:
        return False
    m = state.species[ref.mol]
    atom = m.atoms[ref.atom]
    if atom.is_spectator:
        return False
    return m.domains(ref.atom) < valence.capacity(atom.element)


def legal_moves(state: MechState, rules: MoveRules = DEFAULT_RULES) -> list[Move]:
    """Every legal move, in a fixed order for a given canonical state.

    Ionizations come first (bonds in bond-list order, then X-H bonds per
    atom and hydrogen index; sink = first end before second end), then
    attacks ordered by (nucleophile, electrophile).
    """
    moves: list[Move] = []
    ok = rules.charge_ok
    cap = rules.valence.capacity
    for mi, m in enumerate(state.species):
        for bond in m.bonds:
            a, b = AtomRef(mi, bond.a), AtomRef(mi, bond.b)
            qa, qb = m.atoms[bond.a].formal_charge, m.atoms[bond.b].formal_charge
            if ok(qa - 1) and ok(qb + 1):
                moves.append(Move(IONIZATION, a, b, a))
            if ok(qb - 1) and ok(qa + 1):
                moves.append(Move(IONIZATION, a, b, b))
        for ai, atom in enumerate(m.atoms):
            if atom.is_spectator:
                continue
            q = atom.formal_charge
            x = AtomRef(mi, ai)
            for k in range(atom.hydrogen_count):
                hk = AtomRef(mi, ai, k)
                if ok(q - 1):
                    moves.append(Move(IONIZATION, x, hk, x))
                if ok(q + 1):
                    moves.append(Move(IONIZATION, x, hk, hk))

    nucleophiles = []
    electrophiles = []
    for mi, m in enumerate(state.species):
        for ai, atom in enumerate(m.atoms):
            if atom.is_spectator:
                continue
            if atom.lone_pairs > 0 and ok(atom.formal_charge + 1):
                nucleophiles.append(AtomRef(mi, ai))
            if m.domains(ai) < cap(atom.element) and ok(atom.formal_charge - 1):
                electrophiles.append(AtomRef(mi, ai))
    for n in nucleophiles:
        mn = state.species[n.mol]
        for e in electrophiles:
            if e == n:
                continue
            if e.mol == n.mol and mn.bond_order(n.atom, e.atom) >= 3:
                continue
            moves.append(Move(ATTACK, n, e))
    return moves


# --- application -------------------------------------------------------------


def _normalize_hydrogens(atoms: list[Atom], bonds: dict[tuple[int, int], int], origin: list) -> None:
    """Fold neutral H nodes with a single bond into their neighbour's H count.

    Isotope-labelled hydrogens stay explicit so the label survives.

    ``origin`` tracks, per atom slot, the reference it came from; folded H
    nodes are redirected to ``("fold", neighbour_slot)``.
    """
    def foldable(a: Atom | None) -> bool:
        return a is not None and a.element == "H" and a.formal_charge == 0 and not a.hydrogen_count and not a.isotope

    if not any(foldable(a) for a in atoms):
        return
    changed = True
    while changed:
        changed = False
        for i, atom in enumerate(atoms):
            if not foldable(atom):
                continue
            nbrs = [(k, o) for k, o in bonds.items() if i in k]
            if len(nbrs) != 1 or nbrs[0][1] != 1:
                continue
            (p, q), _ = nbrs[0]
            j = q if p == i else p
            if atoms[j].element == "H" and j > i:
                continue
            del bonds[(p, q)]
            atoms[j] = replace(atoms[j], hydrogen_count=atoms[j].hydrogen_count + 1)
            atoms[i] = None
            origin[i] = ("fold", j, origin[i])
            changed = True


class _Result(NamedTuple):
    state: MechState
    atom_map: dict[AtomRef, AtomRef]


def _apply(state: MechState, move: Move, rules: MoveRules, track: bool) -> _Result:
    species = state.species
    for ref in (move.a, move.b):
        state.check_ref(ref)
    touched = sorted({move.a.mol, move.b.mol})
    # pool the touched species into one slot list
    atoms: list[Atom | None] = []
    bonds: dict[tuple[int, int], int] = {}
    origin: list = []
    offset: dict[int, int] = {}
    for mi in touched:
        m = species[mi]
        offset[mi] = len(atoms)
        atoms.extend(m.atoms)
        origin.extend(AtomRef(mi, i) for i in range(len(m.atoms)))
        for b in m.bonds:
            bonds[(b.a + offset[mi], b.b + offset[mi])] = b.order

    def slot(ref: AtomRef) -> int:
        return offset[ref.mol] + ref.atom

    released: AtomRef | None = None
    if move.kind == IONIZATION:
        a, b, sink = move.a, move.b, move.sink
        if b.h >= 0:
            x = slot(a)
            ax = atoms[x]
            if ax.is_spectator:
                raise IllegalMoveError("spectator ions take no part in moves")
            if sink == a:
                atoms[x] = replace(ax, hydrogen_count=ax.hydrogen_count - 1, lone_pairs=ax.lone_pairs + 1,
                                   formal_charge=ax.formal_charge - 1)
                atoms.append(Atom("H", 1, 0, 0))
            else:
                atoms[x] = replace(ax, hydrogen_count=ax.hydrogen_count - 1, formal_charge=ax.formal_charge + 1)
                atoms.append(Atom("H", -1, 0, 1))
            origin.append(b)
            released = b
            changed = [x, len(atoms) - 1]
        else:
            i, j = slot(a), slot(b)
            key = (min(i, j), max(i, j))
            order = bonds.get(key, 0)
            if order < 1:
                raise IllegalMoveError(f"no bond between {a} and {b}")
            if order == 1:
                del bonds[key]
            else:
                bonds[key] = order - 1
            s, o = (i, j) if sink == a else (j, i)
            atoms[s] = replace(atoms[s], lone_pairs=atoms[s].lone_pairs + 1, formal_charge=atoms[s].formal_charge - 1)
            atoms[o] = replace(atoms[o], formal_charge=atoms[o].formal_charge + 1)
            changed = [i, j]
    else:
        n, e = slot(move.a), slot(move.b)
        an, ae = atoms[n], atoms[e]
        if an.is_spectator or ae.is_spectator:
            raise IllegalMoveError("spectator ions take no part in moves")
        if an.lone_pairs < 1:
            raise IllegalMoveError(f"nucleophile {move.a} has no lone pair")
        if not has_empty_orbital(state, move.b, rules.valence):
            raise IllegalMoveError(f"electrophile {move.b} has no empty orbital")
        key = (min(n, e), max(n, e))
        if bonds.get(key, 0) >= 3:
            raise IllegalMoveError("bond order cannot exceed 3")
        bonds[key] = bonds.get(key, 0) + 1
        atoms[n] = replace(an, lone_pairs=an.lone_pairs - 1, formal_charge=an.formal_charge + 1)
        atoms[e] = replace(ae, formal_charge=ae.formal_charge - 1)
        changed = [n, e]

    for i in changed:
        if not rules.charge_ok(atoms[i].formal_charge):
            raise IllegalMoveError(f"move puts charge {atoms[i].formal_charge:+d} on an atom")
    # the other atoms are untouched, so checking the two move ends suffices
    e = changed[1] if move.kind == ATTACK else None
    if e is not None:
        domains = sum(o for k, o in bonds.items() if e in k) + atoms[e].hydrogen_count + atoms[e].lone_pairs
        if domains > rules.valence.capacity(atoms[e].element):
            raise IllegalMoveError("electrophile would exceed its valence shell")

    _normalize_hydrogens(atoms, bonds, origin)

    # split into connected components over the surviving slots
    live = [i for i, a in enumerate(atoms) if a is not None]
    adj: dict[int, list[int]] = {i: [] for i in live}
    for p, q in bonds:
        adj[p].append(q)
        adj[q].append(p)
    seen: set[int] = set()
    fragments: list[list[int]] = []
    for start in live:
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        fragments.append(sorted(comp))

    new_mols: list[tuple[Molecule, list[int]]] = []
    for comp in fragments:
        index = {old: k for k, old in enumerate(comp)}
        mol = Molecule(
            tuple(atoms[i] for i in comp),
            tuple(sorted(Bond(index[p], index[q], o) for (p, q), o in bonds.items() if p in index)),
        )
        new_mols.append((mol, comp))

    entries = []  # (key, canonical molecule, slot list in canonical order | None, old species index)
    for mi, m in enumerate(species):
        if mi in touched:
            continue
        entries.append((species.keys[mi], m, None, mi))
    for mol, comp in new_mols:
        canon, key = canonicalize(mol)
        ranks = canonical_ranks(mol) if track else None
        if track:
            order = sorted(range(len(comp)), key=lambda k: ranks[k])
            entries.append((key, canon, [comp[k] for k in order], -1))
        else:
            entries.append((key, canon, None, -1))
    entries.sort(key=lambda t: t[0])
    new_set = MolSet(tuple(e[1] for e in entries), tuple(e[0] for e in entries))
    new_state = MechState(new_set, state, move)

    atom_map: dict[AtomRef, AtomRef] = {}
    if track:
        slot_to_new: dict[int, AtomRef] = {}
        for new_mi, (_, canon, slots, old_mi) in enumerate(entries):
            if slots is None:
                for i, atom in enumerate(canon.atoms):
                    atom_map[AtomRef(old_mi, i)] = AtomRef(new_mi, i)
                    for k in range(atom.hydrogen_count):
                        atom_map[AtomRef(old_mi, i, k)] = AtomRef(new_mi, i, k)
            else:
                for new_ai, s in enumerate(slots):
                    slot_to_new[s] = AtomRef(new_mi, new_ai)
        for s, src in enumerate(origin):
            if isinstance(src, tuple) and src and src[0] == "fold":
                _, host, inner = src
                target = slot_to_new[host]
                atom_map[inner] = AtomRef(target.mol, target.atom, 0)
            elif s in slot_to_new and src != released:
                atom_map[src] = slot_to_new[s]
        if released is not None and len(atoms) - 1 in slot_to_new:
            atom_map[released] = slot_to_new[len(atoms) - 1]
        # remaining implicit hydrogens of touched atoms follow their host
        for mi in touched:
            m = species[mi]
            for i, atom in enumerate(m.atoms):
                host = atom_map.get(AtomRef(mi, i))
                if host is None:
                    continue
                left = new_set[host.mol].atoms[host.atom].hydrogen_count
                k_new = 0
                for k in range(atom.hydrogen_count):
                    ref = AtomRef(mi, i, k)
                    if ref == released:
                        continue
                    if k_new < left:
                        atom_map.setdefault(ref, AtomRef(host.mol, host.atom, k_new))
                    k_new += 1
    return _Result(new_state, atom_map)


def apply_move(state: MechState, move: Move, rules: MoveRules = DEFAULT_RULES) -> MechState:
    """Apply ``move``; raise :class:`IllegalMoveError` if it is not legal."""
    return _apply(state, move, rules, False).state


def apply_move_tracked(
    state: MechState, move: Move, rules: MoveRules = DEFAULT_RULES
) -> tuple[MechState, dict[AtomRef, AtomRef]]:
    """Like :func:`apply_move`, also returning where every atom ended up."""
    res = _apply(state, move, rules, True)
    return res.state, res.atom_map


def successors(state: MechState, rules: MoveRules = DEFAULT_RULES) -> Iterator[tuple[Move, MechState]]:
    """Distinct successor states, each with the first legal move reaching it."""
    seen: set[str] = set()
    cache: dict[tuple, MechState] = {}
    for move in legal_moves(state, rules):
        # implicit hydrogens on one atom are interchangeable
        sig = (move.kind, move.a[:2], move.b[:2], move.b.h >= 0, move.sink == move.a)
        nxt = cache.get(sig)
        if nxt is None:
            nxt = apply_move(state, move, rules)
            cache[sig] = nxt
        else:
            continue
        if nxt.key in seen:
            continue
        seen.add(nxt.key)
        yield move, nxt


def is_goal(state: MechState | MolSet, products: MolSet, mode: str = "superset") -> bool:
    species = state.species if isinstance(state, MechState) else state
    if mode == "exact":
        return species.keys == products.keys
    if mode != "superset":
        raise ValueError(f"goal mode must be 'exact' or 'superset', not {mode!r}")
    have = species.key_counter()
    return all(have[k] >= c for k, c in products.key_counter().items())


# --- paths and rendering -----------------------------------------------------


@dataclass(frozen=True)
class MechanismPath:
    initial: MechState
    steps: tuple[tuple[Move, MechState], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def moves(self) -> tuple[Move, ...]:
        return tuple(m for m, _ in self.steps)

    @property
    def states(self) -> tuple[MechState, ...]:
        return (self.initial,) + tuple(s for _, s in self.steps)

    @property
    def final(self) -> MechState:
        return self.steps[-1][1] if self.steps else self.initial

    def state_keys(self) -> tuple[str, ...]:
        return tuple(s.key for s in self.states)

    @classmethod
    def replay(cls, initial: MechState, moves: Sequence[Move], rules: MoveRules = DEFAULT_RULES) -> "MechanismPath":
        steps = []
        state = initial
        for i, move in enumerate(moves):
            try:
                state = apply_move(state, move, rules)
            except (IllegalMoveError, IndexError) as exc:
                raise IllegalMoveError(f"step {i + 1}: {exc}") from None
            steps.append((move, state))
        return cls(initial, tuple(steps))

    def verify(self, rules: MoveRules = DEFAULT_RULES) -> bool:
        state = self.initial
        for move, nxt in self.steps:
            if apply_move(state, move, rules).key != nxt.key:
                return False
            state = nxt
        return True

    def to_trace(self, products: MolSet | None = None) -> dict:
        return {
            "reactants": self.initial.key,
            "products": (products.canonical_key if products is not None else self.final.key),
            "steps": [
                {**move.to_json(), "resulting_state_smiles": state.key} for move, state in self.steps
            ],
        }

    @classmethod
    def from_trace(cls, doc: dict, rules: MoveRules = DEFAULT_RULES) -> "MechanismPath":
        initial = MechState.from_smiles(doc["reactants"])
        moves = [Move.from_json(s) for s in doc["steps"]]
        path = cls.replay(initial, moves, rules)
        for i, (step, (_, state)) in enumerate(zip(doc["steps"], path.steps), 1):
            want = step.get("resulting_state_smiles")
            if want is not None and MolSet.of(parse_smiles_set(want)).canonical_key != state.key:
                raise IllegalMoveError(f"step {i}: recorded state {want!r} does not match replay")
        return path


def _label(state: MechState, ref: AtomRef) -> str:
    atom = state.atom(ref)
    base = f"{atom.element}{ref.atom + 1}"
    if ref.h >= 0:
        return f"{base}(H{ref.h + 1})"
    return base


def mapped_smiles(m: Molecule) -> str:
    """SMILES with atom map number = atom id + 1."""
    return write_smiles(m, list(range(len(m.atoms))), atom_maps=True)


def render_move(state: MechState, move: Move, rules: MoveRules = DEFAULT_RULES) -> str:
    """A readable, unambiguous description of ``move`` and its outcome."""
    result = apply_move(state, move, rules)
    mols = sorted({move.a.mol, move.b.mol})
    lines = []
    for mi in mols:
        lines.append(f"species {mi + 1}: {mapped_smiles(state.species[mi])}")
    a = f"species {move.a.mol + 1} {_label(state, move.a)}"
    b = f"species {move.b.mol + 1} {_label(state, move.b)}"
    if move.kind == IONIZATION:
        sink = a if move.sink == move.a else b
        lines.append(f"move: ionization of the bond {a} - {b}; the electron pair moves onto {sink}")
    else:
        lines.append(f"move: attack of the lone pair on {a} onto the empty orbital of {b}")
    lines.append(f"result: {result.key}")
    return "\n".join(lines)
