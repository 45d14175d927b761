"""Realised privacy of the split-sample mechanism, and a Laplace baseline.

A record with value ``z`` is released as a working cell ``b`` with
probability ``p_b(z) = (1/S) sum_s w_s(z, b)``: the split is uniform and
``w_s`` spreads the interval of scheme ``s`` holding ``z`` over its covered
working cells.  Neighbouring datasets differ in one record, so the
per-record ratios ``p_b(z) / p_b(z')`` determine epsilon; cells reachable
from some values but not from others contribute to delta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._rng import as_seed_sequence, generator
from .errors import OutOfSupport
from .scheme import SplitDesign, SupportBox

__all__ = ["PrivacyReport", "assignment_distribution", "epsilon_delta", "laplace_mechanism"]

_LAPLACE = 7


def assignment_distribution(plan: SplitDesign, z, dim: int = 0) -> np.ndarray:
    """Release probabilities over working cells.

    ``z`` scalar gives shape ``(B,)``; an array of values gives ``(n, B)``.
    """
    ax = plan.axes[dim]
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    b = kernels.locate(zz, ax.edges)
    bad = (b < 0) | (b >= ax.n_cells)
    if bad.any():
        raise OutOfSupport(dim, float(zz[np.flatnonzero(bad)[0]]))
    width = np.diff(ax.cum)
    lo_all, hi_all = ax.cover
    out = np.zeros((zz.shape[0], ax.n_cells))
    cols = np.arange(ax.n_cells)
    for s in range(plan.n_split):
        m = ax.cell_of[s, b]
        lo, hi = lo_all[s, m], hi_all[s, m]
        inside = (cols[None, :] >= lo[:, None]) & (cols[None, :] < hi[:, None])
        w = np.where(inside, width[None, :], 0.0)
        out += w / w.sum(axis=1, keepdims=True)
    out /= plan.n_split
    return out[0] if np.ndim(z) == 0 else out


@dataclass(frozen=True)
class PrivacyReport:
    epsilon: float
    delta: float
    grid: str
    pair: tuple | None
    cell: int | None
    delta_value: float | None
    delta_cell: int | None

    def summary(self) -> str:
        lines = [f"epsilon: {self.epsilon:.6g}", f"delta: {self.delta:.6g}", f"evaluation set: {self.grid}"]
        if self.pair is not None:
            lines.append(f"epsilon attained by z={self.pair[0]!r}, z'={self.pair[1]!r} at working cell {self.cell}")
        if self.delta_cell is not None:
            lines.append(f"delta attained by z={self.delta_value!r} at working cell {self.delta_cell}")
        return "\n".join(lines)


def epsilon_delta(plan: SplitDesign, values=None, *, grid: int = 1000, dim: int = 0) -> PrivacyReport:
    """Realised epsilon and delta over an evaluation set.

    Parameters
    ----------
    values : array, optional
        Evaluation values (for example the observed sample).  By default a
        ``grid``-point equispaced grid over the support.
    """
    ax = plan.axes[dim]
    if values is None:
        if grid < 2:
            raise ValueError("grid needs at least two points")
        values = np.linspace(ax.edges[0], ax.edges[-1], int(grid))
        desc = f"{int(grid)}-point grid on [{float(ax.edges[0])!r}, {float(ax.edges[-1])!r}]"
    else:
        values = np.unique(np.asarray(values, dtype=float).ravel())
        if values.size == 0:
            raise ValueError("evaluation set is empty")
        desc = f"{values.size} supplied values"
    P = assignment_distribution(plan, values, dim)
    pos = P > 0
    eps, pair, cell = 0.0, None, None
    delta, d_val, d_cell = 0.0, None, None
    for b in range(P.shape[1]):
        col = P[:, b]
        if not pos[:, b].any():
            continue
        hi_i = int(np.argmax(col))
        lo_i = int(np.argmin(np.where(pos[:, b], col, np.inf)))
        e = float(np.log(col[hi_i] / col[lo_i]))
        if e > eps:
            eps, pair, cell = e, (float(values[hi_i]), float(values[lo_i])), b
        if not pos[:, b].all() and col[hi_i] > delta:
            delta, d_val, d_cell = float(col[hi_i]), float(values[hi_i]), b
    return PrivacyReport(eps, delta, desc, pair, cell, d_val, d_cell)


def laplace_mechanism(z, epsilon: float, support, rng) -> np.ndarray:
    """Add Laplace noise with scale ``(a_u - a_l) / epsilon`` to every value."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    box = support if isinstance(support, SupportBox) else SupportBox.from_pairs(support)
    z = np.asarray(z, dtype=float)
    zz = z[:, None] if z.ndim == 1 else z
    if zz.shape[1] != box.dim:
        raise ValueError(f"values have {zz.shape[1]} columns, support has {box.dim} dimensions")
    scale = np.array([box.width(p) for p in range(box.dim)]) / float(epsilon)
    noise = generator(as_seed_sequence(rng), _LAPLACE).laplace(0.0, 1.0, zz.shape) * scale
    return (zz + noise).reshape(z.shape)
