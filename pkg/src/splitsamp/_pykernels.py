"""Pure numpy versions of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``;
``splitsamp.kernels`` picks one at import time.
"""
import numpy as np


def locate(values, edges):
    """Index of the working cell holding each value.

    Cells are half-open ``[edges[b], edges[b+1])`` except the last one,
    which is closed.  Values below the grid get ``-1`` and values above
    get ``B`` (the number of cells).
    """
    values = np.asarray(values, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    n_cells = edges.shape[0] - 1
    idx = np.searchsorted(edges, values, side="right") - 1
    idx = idx.astype(np.int64)
    idx[values == edges[-1]] = n_cells - 1
    idx[values > edges[-1]] = n_cells
    idx[values < edges[0]] = -1
    idx[np.isnan(values)] = -1
    return idx


def reassign(lo, hi, cum, u):
    """Draw a working cell inside ``[lo, hi)`` with length-proportional weights.

    ``cum`` holds cumulative working-cell lengths (the grid edges in any
    affine unit), ``u`` uniform draws on ``[0, 1)``.
    """
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    cum = np.asarray(cum, dtype=np.float64)
    target = cum[lo] + np.asarray(u, dtype=np.float64) * (cum[hi] - cum[lo])
    b = np.searchsorted(cum, target, side="right").astype(np.int64) - 1
    return np.clip(b, lo, hi - 1)


def group_sums(groups, vals, n_groups):
    """Per-group column sums and counts."""
    groups = np.asarray(groups, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    counts = np.bincount(groups, minlength=n_groups).astype(np.int64)
    sums = np.empty((n_groups, vals.shape[1]))
    for j in range(vals.shape[1]):
        sums[:, j] = np.bincount(groups, weights=vals[:, j], minlength=n_groups)
    return sums, counts


def scheme_sums(cells, groups, vals, key, n_keys, n_groups):
    """Sums of ``vals`` by (split, split-cell key, group).

    ``cells`` gives each record's working cell (an index into the columns
    of ``key``); ``key[s, c]`` is the split-``s`` cell holding working cell
    ``c``.  Returns ``sums`` with shape ``(S, n_keys, n_groups, P)`` and
    ``counts`` with shape ``(S, n_keys, n_groups)``.
    """
    cells = np.asarray(cells, dtype=np.int64)
    groups = np.asarray(groups, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    key = np.asarray(key, dtype=np.int64)
    n_split = key.shape[0]
    size = n_keys * n_groups
    sums = np.empty((n_split, n_keys, n_groups, vals.shape[1]))
    counts = np.empty((n_split, n_keys, n_groups), dtype=np.int64)
    for s in range(n_split):
        flat = key[s, cells] * n_groups + groups
        counts[s] = np.bincount(flat, minlength=size).reshape(n_keys, n_groups)
        for j in range(vals.shape[1]):
            sums[s, :, :, j] = np.bincount(
                flat, weights=vals[:, j], minlength=size
            ).reshape(n_keys, n_groups)
    return sums, counts
