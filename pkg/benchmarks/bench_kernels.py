"""Time canonical ranking with the compiled and the pure-Python refinement kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both kernels must give identical ranks; the script checks that first.
"""

from __future__ import annotations

import argparse
import time
import warnings
from importlib import resources

from chemsteer.chem import BACKEND, parse_smiles, read_corpus
from chemsteer.chem.canon import atom_invariant, rank_graph, refine_python


def load_graphs():
    corpus = resources.files("chemsteer").joinpath("data/corpus.smi")
    graphs = []
    for smi in read_corpus(corpus):
        mol = parse_smiles(smi)
        inv = [atom_invariant(mol, i) for i in range(len(mol.atoms))]
        graphs.append((inv, [(b.a, b.b, b.order) for b in mol.bonds]))
    return graphs


def timed(kernel, graphs, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for inv, edges in graphs:
            rank_graph(inv, edges, kernel)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    warnings.simplefilter("ignore")
    graphs = load_graphs()
    print(f"{len(graphs)} corpus molecules")
    if BACKEND != "compiled":
        print("compiled kernel not available; timing the Python kernel only")
        print(f"python    {timed(refine_python, graphs, args.repeat) * 1e3:8.1f} ms")
        return
    from chemsteer.chem._refine import refine as refine_compiled

    for inv, edges in graphs:
        assert rank_graph(inv, edges, refine_compiled) == rank_graph(inv, edges, refine_python)
    t_c = timed(refine_compiled, graphs, args.repeat)
    t_p = timed(refine_python, graphs, args.repeat)
    print(f"compiled  {t_c * 1e3:8.1f} ms")
    print(f"python    {t_p * 1e3:8.1f} ms")
    print(f"speedup   {t_p / t_c:8.2f}x")


if __name__ == "__main__":
    main()
