"""Element capability table.

Valence electrons, octet capacity (in electron pairs) and the SMILES
organic-subset default valences for every element the toolkit accepts.
"""

from __future__ import annotations

from dataclasses import dataclass

VALENCE_ELECTRONS = {
    "H": 1,
    "B": 3,
    "C": 4,
    "N": 5,
    "O": 6,
    "F": 7,
    "Si": 4,
    "P": 5,
    "S": 6,
    "Cl": 7,
    "Br": 7,
    "I": 7,
    "Li": 1,
    "Na": 1,
    "K": 1,
    "Mg": 2,
    "Ca": 2,
}

# monatomic counterions; they carry charge but never take part in moves
SPECTATORS = frozenset({"Li", "Na", "K", "Mg", "Ca"})

ORGANIC_SUBSET = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

AROMATIC_SYMBOLS = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}

PERIOD = {
    "H": 1,
    "Li": 2, "B": 2, "C": 2, "N": 2, "O": 2, "F": 2,
    "Na": 3, "Mg": 3, "Si": 3, "P": 3, "S": 3, "Cl": 3,
    "K": 4, "Ca": 4, "Br": 4,
    "I": 5,
}

HYPERVALENT_CAPACITY = {"P": 5, "S": 6}


@dataclass(frozen=True)
class ValenceModel:
    """Electron-pair capacity per element.

    ``hypervalent`` lifts P to 5 and S to 6 pairs; everything else keeps
    its octet (duet for hydrogen).
    """

    hypervalent: bool = False

    def capacity(self, element: str) -> int:
        if element == "H":
            return 1
        if element in SPECTATORS:
            return 0
        if self.hypervalent and element in HYPERVALENT_CAPACITY:
            return HYPERVALENT_CAPACITY[element]
        return 4


DEFAULT_VALENCE = ValenceModel()


def is_supported(element: str) -> bool:
    return element in VALENCE_ELECTRONS


def isoelectronic_valence(element: str, charge: int) -> int:
    """Typical bond count for a charged main-group atom.

    N+ behaves like C (4), O+ like N (3), C- like N (3) and so on.
    """
    electrons = VALENCE_ELECTRONS[element] - charge
    if element == "H":
        return 1 if electrons == 1 else 0
    if electrons >= 4:
        return max(0, 8 - electrons)
    return max(0, electrons)
