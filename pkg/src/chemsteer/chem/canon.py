"""Canonical atom ranking, canonical SMILES and isomorphism.

Ranking is colour refinement on atom invariants and bond orders, followed
by individualisation of the first ambiguous class. Every branch is
explored (twins excepted, since swapping twins is an automorphism) and the
branch with the smallest certificate wins.
"""

from __future__ import annotations

import os
from functools import lru_cache
from typing import Sequence

from .molecule import Molecule

try:
    if os.environ.get("CHEMSTEER_PURE_PYTHON"):
        raise ImportError("pure-python kernels forced")
    from ._refine import refine as _refine_kernel

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build
    from ._refine_py import refine as _refine_kernel

    BACKEND = "python"

from ._refine_py import refine as refine_python  # noqa: E402

_ELEMENT_ORDER = {
    el: i
    for i, el in enumerate(
        ["C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "Si", "H", "Li", "Na", "K", "Mg", "Ca"]
    )
}


def atom_invariant(m: Molecule, i: int) -> tuple:
    a = m.atoms[i]
    return (
        _ELEMENT_ORDER.get(a.element, 99),
        a.element,
        a.isotope,
        a.formal_charge,
        a.hydrogen_count,
        a.lone_pairs,
        m.degree(i),
    )


def _csr(n: int, edges: Sequence[tuple[int, int, int]]):
    rows: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for a, b, w in edges:
        rows[a].append((b, w))
        rows[b].append((a, w))
    indptr = [0]
    indices: list[int] = []
    weights: list[int] = []
    for row in rows:
        row.sort()
        for j, w in row:
            indices.append(j)
            weights.append(w)
        indptr.append(len(indices))
    return rows, indptr, indices, weights


def _dense(keys: Sequence) -> list[int]:
    order = sorted(set(keys))
    rank = {k: r for r, k in enumerate(order)}
    return [rank[k] for k in keys]


def _twin_representatives(rows, members: list[int]) -> list[int]:
    reps: list[int] = []
    for i in members:
        for j in reps:
            ni = {p for p in rows[i] if p[0] != j}
            nj = {p for p in rows[j] if p[0] != i}
            if ni == nj:
                break
        else:
            reps.append(i)
    return reps


def rank_graph(
    invariants: Sequence[tuple],
    edges: Sequence[tuple[int, int, int]],
    kernel=None,
) -> list[int]:
    """Canonical ranks of a vertex-labelled, edge-weighted graph."""
    kernel = kernel or _refine_kernel
    n = len(invariants)
    if n == 0:
        return []
    rows, indptr, indices, weights = _csr(n, edges)
    start = kernel(indptr, indices, weights, _dense(invariants))

    best: tuple | None = None
    best_ranks: list[int] | None = None
    stack = [start]
    while stack:
        colors = stack.pop()
        n_classes = max(colors) + 1
        if n_classes == n:
            by_rank = [0] * n
            for i, r in enumerate(colors):
                by_rank[r] = i
            cert = (
                tuple(invariants[by_rank[r]] for r in range(n)),
                tuple(sorted((min(colors[a], colors[b]), max(colors[a], colors[b]), w) for a, b, w in edges)),
            )
            if best is None or cert < best:
                best, best_ranks = cert, colors
            continue
        sizes = [0] * n_classes
        for c in colors:
            sizes[c] += 1
        target = next(c for c in range(n_classes) if sizes[c] > 1)
        members = [i for i, c in enumerate(colors) if c == target]
        for v in reversed(_twin_representatives(rows, members)):
            split = [2 * c + (1 if c == target and i != v else 0) for i, c in enumerate(colors)]
            stack.append(kernel(indptr, indices, weights, _dense(split)))
    assert best_ranks is not None
    return list(best_ranks)


def canonical_ranks(m: Molecule, *, kernel=None) -> list[int]:
    """Canonical rank of every atom (0 = first in canonical order)."""
    return list(_canonical_ranks_cached(m, kernel or _refine_kernel))


@lru_cache(maxsize=65536)
def _canonical_ranks_cached(m: Molecule, kernel) -> tuple[int, ...]:
    invariants = [atom_invariant(m, i) for i in range(len(m.atoms))]
    edges = [(b.a, b.b, b.order) for b in m.bonds]
    return tuple(rank_graph(invariants, edges, kernel))


@lru_cache(maxsize=65536)
def canonicalize(m: Molecule) -> tuple[Molecule, str]:
    """Return ``(m relabelled into canonical atom order, canonical SMILES)``."""
    from .smiles import write_smiles

    ranks = canonical_ranks(m)
    order = sorted(range(len(ranks)), key=lambda i: ranks[i])
    relabelled = m.relabel(order)
    text = write_smiles(relabelled, list(range(len(order))))
    return relabelled, text


def canonical_form(m: Molecule) -> str:
    return canonicalize(m)[1]


def isomorphic(a: Molecule, b: Molecule) -> bool:
    if len(a.atoms) != len(b.atoms) or len(a.bonds) != len(b.bonds):
        return False
    return canonical_form(a) == canonical_form(b)
