"""Analyst side: the synthetic variable on the working grid.

Each discretized record is moved to one working cell inside its reported
interval, drawn with probability proportional to cell length.  Under the
shifting design all working cells have equal length, so the draw is uniform
over the covered cells.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels
from ._rng import as_seed_sequence, block_uniform
from .errors import SchemaError
from .mechanism import DiscretizedDataset
from .scheme import SplitDesign

__all__ = [
    "SyntheticSample",
    "Ecdf",
    "synthesize",
    "working_cell_probability",
    "split_cell_probability",
    "ecdf",
    "write_synthetic_csv",
    "write_ecdf_csv",
]

_REASSIGN = 1


@dataclass(frozen=True, eq=False)
class SyntheticSample:
    """Reconstructed values: working cell ``b`` (0-based) and its representative."""

    record_id: np.ndarray
    b: np.ndarray
    z: np.ndarray
    s: np.ndarray
    m: np.ndarray
    plan: SplitDesign

    def __len__(self):
        return int(self.b.shape[0])


def synthesize(dataset: DiscretizedDataset, rng, *, threads: int = 1) -> SyntheticSample:
    """Draw a working cell for every record; dimensions are drawn independently."""
    plan = dataset.plan
    n, P = len(dataset), dataset.dim
    u = block_uniform(as_seed_sequence(rng), n, P, stream=_REASSIGN, threads=threads)
    b = np.empty((n, P), dtype=np.int64)
    z = np.empty((n, P))
    for p, ax in enumerate(plan.axes):
        lo, hi = dataset.cover(p)
        empty = hi <= lo
        if empty.any():
            i = int(np.flatnonzero(empty)[0])
            raise SchemaError(
                f"record {int(dataset.record_id[i])} reports an empty interval "
                f"(s={int(dataset.s[i])}, m={int(dataset.m[i, p])})"
            )
        b[:, p] = kernels.reassign(lo, hi, ax.cum, u[:, p])
        z[:, p] = ax.values[b[:, p]]
    return SyntheticSample(dataset.record_id.copy(), b, z, dataset.s.copy(), dataset.m.copy(), plan)


def _checked(density):
    def f(x):
        val = float(density(x))
        if not np.isfinite(val):
            raise ValueError(f"density is not finite at {x}")
        if val < 0:
            raise ValueError(f"density is negative at {x}: {val}")
        return val

    return f


def _cell_masses(edges, density):
    f = _checked(density)
    out = np.empty(edges.shape[0] - 1)
    for k in range(out.shape[0]):
        out[k], _ = integrate.quad(f, edges[k], edges[k + 1], epsabs=1e-10, epsrel=1e-10, limit=200)
    return out


def split_cell_probability(plan: SplitDesign, density, dim: int = 0) -> list[np.ndarray]:
    """Probability of each interval of each scheme, ``out[s-1][m]`` (index 0 unused)."""
    ax = plan.axes[dim]
    mass = _cell_masses(ax.edges, density)
    total = mass.sum()
    if not total > 0:
        raise ValueError("density has no mass on the support")
    cum = np.concatenate([[0.0], np.cumsum(mass / total)])
    return [np.concatenate([[np.nan], np.diff(cum[ix])]) for ix in ax.split_index]


def working_cell_probability(
    plan: SplitDesign, density, *, method: str = "reassignment", dim: int = 0
) -> np.ndarray:
    """Probability of each working cell implied by ``density``.

    Parameters
    ----------
    method : {"reassignment", "identified"}
        ``"reassignment"`` gives the distribution of the synthetic variable:
        each scheme is drawn with probability ``1/S``, and the mass of each
        of its intervals is spread over the covered working cells in
        proportion to length.  ``"identified"`` recovers the working-cell
        probabilities of the sensitive variable itself by differencing the
        cumulative interval probabilities of the schemes at each working
        boundary (every working boundary is a boundary of some scheme).

    Notes
    -----
    Interval masses come from adaptive quadrature over each working cell
    (absolute tolerance 1e-10).  Unnormalised densities are allowed.
    """
    ax = plan.axes[dim]
    q = split_cell_probability(plan, density, dim)
    if method == "identified":
        cdf = np.full(ax.n_cells + 1, np.nan)
        for ix, qs in zip(ax.split_index, q):
            cdf[ix] = np.concatenate([[0.0], np.cumsum(qs[1:])])
        return np.diff(cdf)
    if method != "reassignment":
        raise ValueError(f"unknown method {method!r}")
    width = np.diff(ax.cum)
    lo_all, hi_all = ax.cover
    out = np.zeros(ax.n_cells)
    for s, qs in enumerate(q):
        for m in range(1, qs.shape[0]):
            lo, hi = lo_all[s, m], hi_all[s, m]
            if hi > lo:
                out[lo:hi] += qs[m] * width[lo:hi] / width[lo:hi].sum()
    return out / plan.n_split


@dataclass(frozen=True, eq=False)
class Ecdf:
    """Right-continuous step function: ``F(t) = #{x <= t} / n``."""

    x: np.ndarray
    F: np.ndarray
    n: int

    def __call__(self, t):
        k = np.searchsorted(self.x, np.asarray(t, dtype=float), side="right")
        return np.where(k > 0, self.F[np.maximum(k - 1, 0)], 0.0)

    def sup_distance(self, cdf, points) -> float:
        """``max |F_n(t) - cdf(t)|`` over ``points``."""
        points = np.asarray(points, dtype=float)
        return float(np.max(np.abs(self(points) - cdf(points))))


def ecdf(sample, dim: int = 0) -> Ecdf:
    """Empirical CDF of a :class:`SyntheticSample` (one dimension) or an array."""
    vals = sample.z[:, dim] if isinstance(sample, SyntheticSample) else np.asarray(sample, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("cannot build an ECDF from an empty sample")
    x, counts = np.unique(vals, return_counts=True)
    return Ecdf(x, np.cumsum(counts) / vals.size, int(vals.size))


def write_synthetic_csv(sample: SyntheticSample, path) -> None:
    """Columns ``record_id, b_1..b_P, zdagger_1..zdagger_P``; ``b`` is 1-based."""
    P = sample.b.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_id"] + [f"b_{p + 1}" for p in range(P)] + [f"zdagger_{p + 1}" for p in range(P)])
        for i in range(len(sample)):
            w.writerow(
                [int(sample.record_id[i])]
                + [int(k) + 1 for k in sample.b[i]]
                + [repr(float(x)) for x in sample.z[i]]
            )


def write_ecdf_csv(e: Ecdf, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "F"])
        for x, F in zip(e.x, e.F):
            w.writerow([repr(float(x)), repr(float(F))])
