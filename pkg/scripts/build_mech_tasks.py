"""Regenerate the bundled mechanism tasks from ground-truth state sequences.

Every sequence changes each bond order in one direction only, so its length
equals the total bond-order change and it is a shortest mechanism.

Run from the repository root:  python3 scripts/build_mech_tasks.py
"""

from __future__ import annotations

import json
from pathlib import Path

from chemsteer.bench.tasks import build_mech_task

OUT = Path(__file__).resolve().parents[1] / "src" / "chemsteer" / "data" / "mech_tasks"
SEED = 20240601

TASKS = [
    (
        "t01",
        "methanol to bromomethane",
        "simple nucleophilic",
        "CO.Br",
        ["CO.[Br-].[H+]", "C[OH2+].[Br-]", "[CH3+].O.[Br-]", "CBr.O"],
    ),
    (
        "t02",
        "tert-butanol to tert-butyl chloride",
        "simple nucleophilic",
        "CC(C)(C)O.Cl",
        ["CC(C)(C)O.[Cl-].[H+]", "CC(C)(C)[OH2+].[Cl-]", "C[C+](C)C.O.[Cl-]", "CC(C)(C)Cl.O"],
    ),
    (
        "t03",
        "methylamine from iodomethane and ammonia",
        "simple nucleophilic",
        "CI.N",
        ["[CH3+].[I-].N", "C[NH3+].[I-]", "CN.[H+].[I-]", "CN.I"],
    ),
    (
        "t04",
        "hydrobromination of propene",
        "addition/elimination",
        "C=CC.Br",
        ["C=CC.[Br-].[H+]", "[CH2-][CH+]C.[Br-].[H+]", "C[CH+]C.[Br-]", "CC(C)Br"],
    ),
    (
        "t05",
        "acid-catalysed dehydration of tert-butanol",
        "addition/elimination",
        "CC(C)(C)O.[H+]",
        ["CC(C)(C)[OH2+]", "C[C+](C)C.O", "[CH2-][C+](C)C.O.[H+]", "C=C(C)C.O.[H+]"],
    ),
    (
        "t06",
        "aldol condensation of acetaldehyde",
        "miscellaneous",
        "CC=O.CC=O",
        [
            "[CH2-]C=O.CC=O.[H+]",
            "[CH2-]C=O.C[CH+][O-].[H+]",
            "C[CH]([O-])CC=O.[H+]",
            "CC(O)CC=O",
            "CC(O)[CH-]C=O.[H+]",
            "C[CH+][CH-]C=O.[OH-].[H+]",
            "CC=CC=O.[OH-].[H+]",
            "CC=CC=O.O",
        ],
    ),
    (
        "t07",
        "hydrolysis of phosphorus dichloride bromide",
        "multi-step substitution",
        "ClP(Cl)Br.O.O.O",
        [
            "Cl[P+]Cl.[Br-].O.O.O",
            "ClP(Cl)[OH2+].[Br-].O.O",
            "OP(Cl)Cl.[H+].[Br-].O.O",
            "OP(Cl)Cl.Br.O.O",
            "O[P+]Cl.[Cl-].Br.O.O",
            "OP(Cl)[OH2+].[Cl-].Br.O",
            "OP(O)Cl.[H+].[Cl-].Br.O",
            "OP(O)Cl.Cl.Br.O",
            "O[P+]O.[Cl-].Cl.Br.O",
            "OP(O)[OH2+].[Cl-].Cl.Br",
            "OP(O)O.[H+].[Cl-].Cl.Br",
            "OP(O)O.Cl.Cl.Br",
        ],
    ),
    (
        "t08",
        "dimethyl carbonate from phosgene",
        "multi-step substitution",
        "ClC(Cl)=O.CO.CO",
        [
            "Cl[C+]=O.[Cl-].CO.CO",
            "C[OH+]C(Cl)=O.[Cl-].CO",
            "COC(Cl)=O.[H+].[Cl-].CO",
            "COC(Cl)=O.Cl.CO",
            "CO[C+]=O.[Cl-].Cl.CO",
            "C[OH+]C(=O)OC.[Cl-].Cl",
            "COC(=O)OC.[H+].[Cl-].Cl",
            "COC(=O)OC.Cl.Cl",
        ],
    ),
    (
        "t09",
        "cyanohydrin formation",
        "addition/elimination",
        "CC=O.C#N",
        ["[C-]#N.[H+].CC=O", "[C-]#N.[H+].C[CH+][O-]", "CC([O-])C#N.[H+]", "CC(O)C#N"],
    ),
    (
        "t10",
        "hydrolysis of acetonitrile to ammonium acetate",
        "miscellaneous",
        "CC#N.O.O",
        [
            "C[C+]=[N-].O.O",
            "CC(=[N-])[OH2+].O",
            "CC(=[N-])O.[H+].O",
            "CC(=N)O.O",
            "C[C+]([NH-])O.O",
            "CC(=[OH+])[NH-].O",
            "CC(=O)[NH-].[H+].O",
            "CC(N)=O.O",
            "C[C+]=O.[NH2-].O",
            "CC(=O)[OH2+].[NH2-]",
            "CC(=O)O.[H+].[NH2-]",
            "CC(=O)O.N",
            "CC(=O)[O-].[H+].N",
            "CC(=O)[O-].[NH4+]",
        ],
    ),
    (
        "t11",
        "imine formation from acetone and methylamine",
        "miscellaneous",
        "CC(C)=O.CN",
        [
            "C[C+](C)[O-].CN",
            "CC(C)([O-])[NH2+]C",
            "CNC(C)(C)[O-].[H+]",
            "CNC(C)(C)O",
            "CN[C+](C)C.[OH-]",
            "C[NH+]=C(C)C.[OH-]",
            "CN=C(C)C.[H+].[OH-]",
            "CN=C(C)C.O",
        ],
    ),
    (
        "t12",
        "hydrazone formation from acetone",
        "miscellaneous",
        "CC(C)=O.NN",
        [
            "C[C+](C)[O-].NN",
            "CC(C)([O-])[NH2+]N",
            "NNC(C)(C)[O-].[H+]",
            "NNC(C)(C)O",
            "NN[C+](C)C.[OH-]",
            "N[NH+]=C(C)C.[OH-]",
            "NN=C(C)C.[H+].[OH-]",
            "NN=C(C)C.O",
        ],
    ),
]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for task_id, name, category, reactants, states in TASKS:
        task = build_mech_task(task_id, reactants, states, name=name, category=category, seed=SEED)
        path = OUT / f"{task_id}.json"
        path.write_text(json.dumps(task.to_json(), indent=1) + "\n", encoding="utf-8")
        print(f"{task_id}: {len(task)} moves")


if __name__ == "__main__":
    main()
