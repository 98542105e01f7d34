"""Regenerate the bundled route-ranking data: routes, rubrics and route tasks.

Run from the repository root:  python3 scripts/build_route_data.py
"""

from __future__ import annotations

import json
from pathlib import Path

from chemsteer.chem.canon import canonical_form
from chemsteer.chem.smiles import parse_smiles
from chemsteer.routes import emit, from_reaction_list

DATA = Path(__file__).resolve().parents[1] / "src" / "chemsteer" / "data"

T1 = "O=C1CCC(N2Cc3cc(C4CCNCC4)ccc3C2=O)C(=O)N1"
T2 = "Cc1nc(-c2ccc(C(=O)NCC)cc2)c[nH]1"
T3 = "Cc1ccnc(Nc2ccc(N3CCCCC3)cc2)n1"
T4 = (
    "O=C(NC1CCN(CC1)C1CCN(CC1)C(=O)CN1CCN(CC1)C(=O)N1CCCN(CC1)Cc1cn(-c2ccc(Cl)cc2)nn1)"
    "c1cc2ccccc2[nH]1"
)

PYRIDYL_IMIDE = "O=C1CCC(N2Cc3cc(-c4ccncc4)ccc3C2=O)C(=O)N1"
PYRIDYL_OPEN = "NC(=O)CCC(N1Cc2cc(-c3ccncc3)ccc2C1=O)C(=O)O"
BROMO_PYRIDYL = "COC(=O)c1ccc(-c2ccncc2)cc1CBr"
BROMO_PIPERIDYL = "COC(=O)c1ccc(C2CCNCC2)cc1CBr"
AMINO_IMIDE = "NC1CCC(=O)NC1=O"
GLUTAMINE = "NC(=O)CCC(N)C(=O)O"

# name -> (reaction lines, starting materials that are not in stock)
ROUTES: dict[str, dict[str, tuple[list[str], list[str]]]] = {
    "target1": {
        "r1": ([f"{BROMO_PYRIDYL}.{AMINO_IMIDE}>>{PYRIDYL_IMIDE}", f"{PYRIDYL_IMIDE}.[H][H]>>{T1}"], []),
        "r2": ([f"{BROMO_PIPERIDYL}.{AMINO_IMIDE}>>{T1}"], []),
        "r3": (
            [
                f"{BROMO_PYRIDYL}.{GLUTAMINE}>>{PYRIDYL_OPEN}",
                f"{PYRIDYL_OPEN}>>{PYRIDYL_IMIDE}",
                f"{PYRIDYL_IMIDE}.[H][H]>>{T1}",
            ],
            [],
        ),
        "r4": (
            [
                f"{BROMO_PIPERIDYL}.{GLUTAMINE}>>NC(=O)CCC(N1Cc2cc(C3CCNCC3)ccc2C1=O)C(=O)O",
                f"NC(=O)CCC(N1Cc2cc(C3CCNCC3)ccc2C1=O)C(=O)O>>{T1}",
            ],
            [],
        ),
        "r5": ([f"O=C1NCc2cc(C3CCNCC3)ccc21.O=C1CCC(Br)C(=O)N1>>{T1}"], ["O=C1CCC(Br)C(=O)N1"]),
    },
    "target2": {
        "r1": (
            [
                "BrCC(=O)c1ccc(C(=O)OC)cc1.O>>BrCC(=O)c1ccc(C(=O)O)cc1",
                "BrCC(=O)c1ccc(C(=O)O)cc1.CCN>>BrCC(=O)c1ccc(C(=O)NCC)cc1",
                f"BrCC(=O)c1ccc(C(=O)NCC)cc1.CC(=N)N>>{T2}",
            ],
            [],
        ),
        "r2": (
            [
                "BrCC(=O)c1ccc(C(=O)OC)cc1.CC(=N)N>>Cc1nc(-c2ccc(C(=O)OC)cc2)c[nH]1",
                "Cc1nc(-c2ccc(C(=O)OC)cc2)c[nH]1.O>>Cc1nc(-c2ccc(C(=O)O)cc2)c[nH]1",
                f"Cc1nc(-c2ccc(C(=O)O)cc2)c[nH]1.CCN>>{T2}",
            ],
            [],
        ),
        "r3": (
            [
                "BrCC(=O)c1ccc(C(=O)OC)cc1.O>>BrCC(=O)c1ccc(C(=O)O)cc1",
                "BrCC(=O)c1ccc(C(=O)O)cc1.CC(=N)N>>Cc1nc(-c2ccc(C(=O)O)cc2)c[nH]1",
                f"Cc1nc(-c2ccc(C(=O)O)cc2)c[nH]1.CCN>>{T2}",
            ],
            [],
        ),
        "r4": ([f"Cc1nc(-c2ccc(C(=O)O)cc2)c[nH]1.CCN>>{T2}"], []),
        "r5": (
            [
                "CC(=O)c1ccc(C(=O)OC)cc1.BrBr>>BrCC(=O)c1ccc(C(=O)OC)cc1",
                "BrCC(=O)c1ccc(C(=O)OC)cc1.CC(=N)N>>Cc1nc(-c2ccc(C(=O)OC)cc2)c[nH]1",
                "Cc1nc(-c2ccc(C(=O)OC)cc2)c[nH]1.O>>Cc1nc(-c2ccc(C(=O)O)cc2)c[nH]1",
                f"Cc1nc(-c2ccc(C(=O)O)cc2)c[nH]1.CCN>>{T2}",
            ],
            [],
        ),
    },
    "target3": {
        "r1": ([f"Cc1ccnc(Cl)n1.Nc1ccc(N2CCCCC2)cc1>>{T3}"], []),
        "r2": (
            [
                "Nc1ccc(N2CCCCC2)cc1.NC#N>>NC(=N)Nc1ccc(N2CCCCC2)cc1",
                f"NC(=N)Nc1ccc(N2CCCCC2)cc1.CC(=O)C=CN(C)C>>{T3}",
            ],
            [],
        ),
        "r3": (
            [
                "NC(N)=N.CC(=O)C=CN(C)C>>Cc1ccnc(N)n1",
                f"Cc1ccnc(N)n1.Brc1ccc(N2CCCCC2)cc1>>{T3}",
            ],
            [],
        ),
        "r4": (
            [
                "Cc1ccnc(Cl)n1.Nc1ccc(N)cc1>>Cc1ccnc(Nc2ccc(N)cc2)n1",
                f"Cc1ccnc(Nc2ccc(N)cc2)n1.BrCCCCCBr>>{T3}",
            ],
            [],
        ),
        "r5": (
            [
                "NC(N)=N.CC(=O)C=CN(C)C>>Cc1ccnc(N)n1",
                "Cc1ccnc(N)n1.Nc1ccc(Br)cc1>>Cc1ccnc(Nc2ccc(N)cc2)n1",
                f"Cc1ccnc(Nc2ccc(N)cc2)n1.BrCCCCCBr>>{T3}",
            ],
            [],
        ),
    },
    "target4": {
        # one convergent step each; the disconnection differs
        "r1": (
            [
                "O=C(NC1CCNCC1)c1cc2ccccc2[nH]1"
                ".BrC1CCN(CC1)C(=O)CN1CCN(CC1)C(=O)N1CCCN(CC1)Cc1cn(-c2ccc(Cl)cc2)nn1"
                f">>{T4}"
            ],
            [],
        ),
        "r2": (
            [
                "OC(=O)c1cc2ccccc2[nH]1"
                ".NC1CCN(CC1)C1CCN(CC1)C(=O)CN1CCN(CC1)C(=O)N1CCCN(CC1)Cc1cn(-c2ccc(Cl)cc2)nn1"
                f">>{T4}"
            ],
            [],
        ),
        "r3": (
            [
                "O=C(NC1CCN(CC1)C1CCN(CC1)C(=O)CCl)c1cc2ccccc2[nH]1"
                ".N1CCN(CC1)C(=O)N1CCCN(CC1)Cc1cn(-c2ccc(Cl)cc2)nn1"
                f">>{T4}"
            ],
            [],
        ),
        "r4": (
            [
                "O=C(NC1CCN(CC1)C1CCN(CC1)C(=O)CN1CCNCC1)c1cc2ccccc2[nH]1"
                ".O=C(Cl)N1CCCN(CC1)Cc1cn(-c2ccc(Cl)cc2)nn1"
                f">>{T4}"
            ],
            [],
        ),
        "r5": (
            [
                "O=C(NC1CCN(CC1)C1CCN(CC1)C(=O)CN1CCN(CC1)C(=O)N1CCCN(CC1)CC#C)c1cc2ccccc2[nH]1"
                ".[N-]=[N+]=Nc1ccc(Cl)cc1"
                f">>{T4}"
            ],
            [],
        ),
    },
}


def ring(kind: str, template: str) -> dict:
    return {"kind": kind, "template": template}


def clause(detector: dict, position: str = "none", weight: int = 1) -> dict:
    return {"detector": detector, "position_weight": position, "weight": weight}


BALANCED = {"kind": "balanced_split", "min_ratio": "2/5"}

# name -> (target, prompt, clauses, expected ranking as tie groups, best first)
RUBRICS = {
    "A": (
        "target1",
        "Build the piperidine and the isoindolinone rings during the synthesis; "
        "the glutarimide ring should come from a purchased starting material.",
        [
            clause(ring("ring_formed", "piperidine")),
            clause(ring("ring_formed", "oxoisoindolinone")),
            clause(ring("commercial_source", "piperidine-2,6-dione")),
        ],
        [["r1"], ["r2", "r3"], ["r4"], ["r5"]],
    ),
    "B": (
        "target1",
        "Build the glutarimide and the isoindolinone rings during the synthesis; "
        "the piperidine ring should come from a purchased starting material.",
        [
            clause(ring("ring_formed", "piperidine-2,6-dione")),
            clause(ring("ring_formed", "oxoisoindolinone")),
            clause(ring("commercial_source", "piperidine")),
        ],
        [["r4"], ["r2", "r3"], ["r1", "r5"]],
    ),
    "C": (
        "target1",
        "Only the isoindolinone ring is built; buy both the glutarimide and the piperidine rings.",
        [
            clause(ring("ring_formed", "oxoisoindolinone")),
            clause(ring("commercial_source", "piperidine-2,6-dione")),
            clause(ring("commercial_source", "piperidine")),
        ],
        [["r2"], ["r1", "r4"], ["r3", "r5"]],
    ),
    "D": (
        "target2",
        "Avoid any ring-forming reaction.",
        [clause({"kind": "no_ring_change"})],
        [["r4"], ["r1", "r2", "r3", "r5"]],
    ),
    "E": (
        "target2",
        "Form the imidazole ring as late as possible.",
        [clause(ring("ring_formed", "imidazole"), "prefer_late")],
        [["r1"], ["r3"], ["r5"], ["r2"], ["r4"]],
    ),
    "F": (
        "target2",
        "Form the imidazole ring as early as possible.",
        [clause(ring("ring_formed", "imidazole"), "prefer_early")],
        [["r2"], ["r5"], ["r3"], ["r1"], ["r4"]],
    ),
    "G": (
        "target3",
        "Keep every ring intact and buy all of them.",
        [
            clause({"kind": "no_ring_change"}),
            clause(ring("commercial_source", "pyrimidine")),
            clause(ring("commercial_source", "benzene")),
            clause(ring("commercial_source", "piperidine")),
        ],
        [["r1"], ["r2", "r3", "r4"], ["r5"]],
    ),
    "H": (
        "target3",
        "Build the pyrimidine ring early; every other ring should be purchased.",
        [
            clause(ring("ring_formed", "pyrimidine"), "prefer_early"),
            clause(ring("commercial_source", "benzene")),
            clause(ring("commercial_source", "piperidine")),
        ],
        [["r3"], ["r2"], ["r1", "r5"], ["r4"]],
    ),
    "I": (
        "target4",
        "Split the molecule into two fragments of similar size by disconnecting between the two piperidine rings.",
        [
            clause({"kind": "joins", "left": ["piperidine"], "right": ["piperidine"]}, weight=2),
            clause(BALANCED),
        ],
        [["r1"], ["r3", "r4"], ["r2", "r5"]],
    ),
    "J": (
        "target4",
        "The key disconnection separates the indole from the aminopiperidine part.",
        [clause({"kind": "joins", "left": ["indole"], "right": ["piperidine", "piperidine"]})],
        [["r2"], ["r1", "r3", "r4", "r5"]],
    ),
    "K": (
        "target4",
        "Split the molecule into two fragments of similar size by disconnecting between the piperazine and a piperidine.",
        [
            clause({"kind": "joins", "left": ["piperazine"], "right": ["piperidine", "piperidine"]}, weight=2),
            clause(BALANCED),
        ],
        [["r3"], ["r1", "r4"], ["r2", "r5"]],
    ),
    "L": (
        "target4",
        "Split into two similar fragments: one carries a piperidine and the indole, the other carries the "
        "second piperidine, the piperazine, the diazepane, the triazole and the chlorophenyl ring.",
        [
            clause(
                {
                    "kind": "joins",
                    "left": ["piperidine", "indole"],
                    "right": ["piperidine", "piperazine", "diazepine", "triazole", "benzene"],
                },
                weight=2,
            ),
            clause(BALANCED),
        ],
        [["r1"], ["r3", "r4"], ["r2", "r5"]],
    ),
    "M": (
        "target4",
        "Disconnect between the diazepane and the piperazine rings.",
        [clause({"kind": "joins", "left": ["diazepine"], "right": ["piperazine"]})],
        [["r4"], ["r1", "r2", "r3", "r5"]],
    ),
}

TARGETS = {"target1": T1, "target2": T2, "target3": T3, "target4": T4}


def dump(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def main() -> None:
    for target, routes in ROUTES.items():
        tkey = canonical_form(parse_smiles(TARGETS[target]))
        for name, (lines, not_stocked) in routes.items():
            route = from_reaction_list(lines, name)
            if route.root.key != tkey:
                raise SystemExit(f"{target}/{name} does not end at the target")
            missing = {canonical_form(parse_smiles(s)) for s in not_stocked}
            for leaf in route.leaves:
                leaf.in_stock = leaf.key not in missing
            dump(DATA / "routes" / target / f"{name}.json", emit(route))
    for name, (target, prompt, clauses, expected) in RUBRICS.items():
        dump(DATA / "rubrics" / f"{name}.json", {"name": name, "prompt": prompt, "clauses": clauses})
        dump(
            DATA / "route_tasks" / f"{name}.json",
            {
                "name": name,
                "target": TARGETS[target],
                "prompt": prompt,
                "rubric_path": f"../rubrics/{name}.json",
                "routes": [f"../routes/{target}/{r}.json" for r in sorted(ROUTES[target])],
                "expected_ranking": expected,
            },
        )


if __name__ == "__main__":
    main()
