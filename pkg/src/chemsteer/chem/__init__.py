"""Molecular graphs, SMILES I/O and canonicalization."""

from .canon import BACKEND, canonical_form, canonical_ranks, canonicalize, isomorphic
from .elements import DEFAULT_VALENCE, ValenceModel
from .molecule import (
    Atom,
    Bond,
    ChemError,
    Molecule,
    MolSet,
    RadicalError,
    ValenceError,
    perceive_electrons,
)
from .smiles import (
    ComponentError,
    KekulizationError,
    SmilesSyntaxError,
    parse_smiles,
    parse_smiles_set,
    read_corpus,
    write_smiles,
)

__all__ = [
    "Atom",
    "BACKEND",
    "Bond",
    "ChemError",
    "ComponentError",
    "DEFAULT_VALENCE",
    "KekulizationError",
    "MolSet",
    "Molecule",
    "RadicalError",
    "SmilesSyntaxError",
    "ValenceError",
    "ValenceModel",
    "canonical_form",
    "canonical_ranks",
    "canonicalize",
    "isomorphic",
    "parse_smiles",
    "parse_smiles_set",
    "perceive_electrons",
    "read_corpus",
    "write_smiles",
]
