"""Pure-Python colour refinement (fallback for the compiled ``_refine`` kernel).

Both implementations must return identical colourings; the hash mixing
below is mirrored operation for operation in ``_refine.pyx``.
"""

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
BOND_STRIDE = 1 << 20


def _mix(h, v):
    h ^= (v + GOLDEN + ((h << 6) & MASK) + (h >> 2)) & MASK
    return h & MASK


def _finalize(h):
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & MASK
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & MASK
    h ^= h >> 31
    return h


def refine(indptr, indices, weights, colors):
    """Refine ``colors`` until stable.

    ``indptr``/``indices``/``weights`` hold the adjacency in CSR form,
    with bond orders as weights. Colours are dense ranks; the output is a
    refinement of the input that preserves its class order.
    """
    n = len(colors)
    colors = list(colors)
    n_classes = len(set(colors))
    while True:
        keyed = []
        for i in range(n):
            vals = sorted(
                weights[e] * BOND_STRIDE + colors[indices[e]]
                for e in range(indptr[i], indptr[i + 1])
            )
            h = colors[i] & MASK
            for v in vals:
                h = _mix(h, v)
            keyed.append((colors[i], _finalize(h), i))
        keyed.sort()
        new = [0] * n
        rank = -1
        prev = None
        for c, h, i in keyed:
            if (c, h) != prev:
                rank += 1
                prev = (c, h)
            new[i] = rank
        colors = new
        if rank + 1 == n_classes:
            return colors
        n_classes = rank + 1
