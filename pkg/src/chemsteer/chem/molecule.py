"""Molecular graph types.

Hydrogens are stored as per-atom counts. The only hydrogen that becomes a
graph node is one that is not attached to a heavy atom (H+, H-, and H2,
the latter as a single H node carrying one implicit hydrogen).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .elements import DEFAULT_VALENCE, SPECTATORS, VALENCE_ELECTRONS, ValenceModel


class ChemError(ValueError):
    """Base class for chemistry validation errors."""


class ValenceError(ChemError):
    pass


class RadicalError(ValenceError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    hydrogen_count: int = 0
    lone_pairs: int = 0
    isotope: int = 0

    @property
    def is_spectator(self) -> bool:
        return self.element in SPECTATORS


@dataclass(frozen=True, order=True)
class Bond:
    a: int
    b: int
    order: int = 1

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ChemError(f"self-bond on atom {self.a}")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        if self.order not in (1, 2, 3):
            raise ChemError(f"bond order {self.order} outside 1..3")

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a


@dataclass(frozen=True)
class Molecule:
    """A single connected, kekulized molecular graph.

    The atom id of an atom is its index in ``atoms``.
    """

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.atoms, tuple):
            object.__setattr__(self, "atoms", tuple(self.atoms))
        if not isinstance(self.bonds, tuple):
            object.__setattr__(self, "bonds", tuple(self.bonds))

    def __len__(self) -> int:
        return len(self.atoms)

    @cached_property
    def bond_map(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for bond in self.bonds:
            key = (bond.a, bond.b)
            if key in out:
                raise ChemError(f"duplicate bond between atoms {bond.a} and {bond.b}")
            out[key] = bond.order
        return out

    @cached_property
    def neighbors(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom, a tuple of ``(neighbor, order)`` pairs sorted by neighbor."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond.order))
            adj[bond.b].append((bond.a, bond.order))
        return tuple(tuple(sorted(row)) for row in adj)

    def bond_order(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return self.bond_map.get((i, j), 0)

    def bond_sum(self, i: int) -> int:
        return sum(order for _, order in self.neighbors[i])

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def domains(self, i: int) -> int:
        """Occupied electron pairs around atom ``i``."""
        atom = self.atoms[i]
        return self.bond_sum(i) + atom.hydrogen_count + atom.lone_pairs

    @property
    def charge(self) -> int:
        return sum(a.formal_charge for a in self.atoms)

    def element_counts(self) -> Counter:
        counts: Counter = Counter()
        for atom in self.atoms:
            counts[atom.element] += 1
            if atom.hydrogen_count:
                counts["H"] += atom.hydrogen_count
        return counts

    def electron_count(self) -> int:
        """Valence electrons held in lone pairs, bonds and X-H bonds."""
        lone = sum(2 * a.lone_pairs + 2 * a.hydrogen_count for a in self.atoms)
        return lone + sum(2 * b.order for b in self.bonds)

    def heavy_atom_count(self) -> int:
        return sum(1 for a in self.atoms if a.element != "H")

    def components(self) -> list[list[int]]:
        seen = [False] * len(self.atoms)
        comps = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            stack = [start]
            seen[start] = True
            comp = []
            while stack:
                i = stack.pop()
                comp.append(i)
                for j, _ in self.neighbors[i]:
                    if not seen[j]:
                        seen[j] = True
                        stack.append(j)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def subgraph(self, atom_ids: Sequence[int]) -> "Molecule":
        index = {old: new for new, old in enumerate(atom_ids)}
        atoms = tuple(self.atoms[i] for i in atom_ids)
        bonds = tuple(
            Bond(index[b.a], index[b.b], b.order)
            for b in self.bonds
            if b.a in index and b.b in index
        )
        return Molecule(atoms, bonds)

    def relabel(self, order: Sequence[int]) -> "Molecule":
        """Return a copy whose atom ``k`` is ``self.atoms[order[k]]``."""
        if sorted(order) != list(range(len(self.atoms))):
            raise ValueError("order must be a permutation of atom ids")
        return self.subgraph(order)

    def validate(self, valence: ValenceModel = DEFAULT_VALENCE) -> None:
        """Raise if any atom breaks the electron bookkeeping or capacity."""
        _ = self.bond_map
        for i, atom in enumerate(self.atoms):
            if atom.element not in VALENCE_ELECTRONS:
                raise ChemError(f"unsupported element {atom.element!r}")
            nonbonding = (
                VALENCE_ELECTRONS[atom.element]
                - atom.formal_charge
                - self.bond_sum(i)
                - atom.hydrogen_count
            )
            if nonbonding != 2 * atom.lone_pairs:
                raise ValenceError(
                    f"atom {i} ({atom.element}): lone pairs {atom.lone_pairs} "
                    f"inconsistent with {nonbonding} nonbonding electrons"
                )
            if atom.is_spectator:
                if self.bonds or atom.hydrogen_count or len(self.atoms) > 1:
                    raise ValenceError(f"{atom.element} is only supported as a free ion")
                continue
            if self.domains(i) > valence.capacity(atom.element):
                raise ValenceError(
                    f"atom {i} ({atom.element}) holds {self.domains(i)} electron "
                    f"pairs, capacity {valence.capacity(atom.element)}"
                )

    def __repr__(self) -> str:
        from .smiles import write_smiles

        try:
            return f"Molecule({write_smiles(self)!r})"
        except Exception:  # pragma: no cover - repr must never fail
            return f"Molecule(<{len(self.atoms)} atoms>)"


def nonbonding_electrons(m: Molecule, i: int) -> int:
    atom = m.atoms[i]
    return VALENCE_ELECTRONS[atom.element] - atom.formal_charge - m.bond_sum(i) - atom.hydrogen_count


def perceive_electrons(m: Molecule) -> Molecule:
    """Fill ``lone_pairs`` from element, charge, bonds and hydrogens."""
    atoms = []
    for i, atom in enumerate(m.atoms):
        if atom.element not in VALENCE_ELECTRONS:
            raise ChemError(f"unsupported element {atom.element!r}")
        n = nonbonding_electrons(m, i)
        if n < 0:
            raise ValenceError(
                f"atom {i} ({atom.element}, charge {atom.formal_charge:+d}) has "
                f"more bonds than valence electrons"
            )
        if n % 2:
            raise RadicalError(f"atom {i} ({atom.element}) has an unpaired electron")
        atoms.append(atom if atom.lone_pairs == n // 2 else replace(atom, lone_pairs=n // 2))
    return Molecule(tuple(atoms), m.bonds)


@dataclass(frozen=True)
class MolSet:
    """A multiset of molecules in canonical order.

    Build with :meth:`of`; species are sorted by canonical SMILES, so the
    index of a species is stable for equal sets.
    """

    species: tuple[Molecule, ...]
    keys: tuple[str, ...] = field(repr=False, default=())

    @classmethod
    def of(cls, molecules: Iterable[Molecule]) -> "MolSet":
        from .canon import canonicalize

        pairs = [canonicalize(m) for m in molecules]
        pairs.sort(key=lambda p: p[1])
        return cls(tuple(m for m, _ in pairs), tuple(k for _, k in pairs))

    @property
    def canonical_key(self) -> str:
        return ".".join(self.keys)

    def __len__(self) -> int:
        return len(self.species)

    def __iter__(self) -> Iterator[Molecule]:
        return iter(self.species)

    def __getitem__(self, i: int) -> Molecule:
        return self.species[i]

    @property
    def charge(self) -> int:
        return sum(m.charge for m in self.species)

    def element_counts(self) -> Counter:
        total: Counter = Counter()
        for m in self.species:
            total.update(m.element_counts())
        return total

    def electron_count(self) -> int:
        return sum(m.electron_count() for m in self.species)

    def key_counter(self) -> Counter:
        return Counter(self.keys)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MolSet):
            return NotImplemented
        return self.keys == other.keys

    def __hash__(self) -> int:
        return hash(self.keys)

    def __repr__(self) -> str:
        return f"MolSet({self.canonical_key!r})"
