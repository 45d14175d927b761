"""Data-provider side: split assignment and discretization.

The provider draws a split index ``s`` for each record, reports the
interval ``m`` of scheme ``s`` that holds the sensitive value, and the
interval representative ``v``.  Nothing else about the sensitive value
leaves this module (the raw values are kept only when ``keep_truth`` is
set, for simulations, and are never written out).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from ._rng import as_seed_sequence, block_uniform, generator
from .errors import OutOfSupport, SchemaError
from .scheme import SplitDesign

__all__ = [
    "DiscretizedRecord",
    "DiscretizedDataset",
    "assign_splits",
    "discretize_value",
    "discretize_dataset",
    "truncate_unbounded",
    "write_dataset_csv",
    "read_dataset_csv",
]

# stream keys for the seed tree; other modules use higher numbers
_ASSIGN = 0
_BALANCED = 2


@dataclass(frozen=True)
class DiscretizedRecord:
    record_id: int
    s: int
    m: tuple[int, ...]
    v: tuple[float, ...]


@dataclass(eq=False)
class DiscretizedDataset:
    """Column store of discretized records.

    Attributes
    ----------
    s : int array, shape (N,)
        Split index, 1-based.
    m : int array, shape (N, P)
        Interval index within split ``s``, 1-based.
    v : float array, shape (N, P)
        Representative value of the reported interval.
    covariates : dict
        Non-sensitive columns passed through unchanged.
    truth : float array or None
        Raw sensitive values, retained only in simulation mode.
    """

    plan: SplitDesign
    record_id: np.ndarray
    s: np.ndarray
    m: np.ndarray
    v: np.ndarray
    covariates: dict = field(default_factory=dict)
    truncated: np.ndarray | None = None
    n_truncated: int = 0
    truth: np.ndarray | None = field(default=None, repr=False)
    sensitive: frozenset = frozenset()

    def __post_init__(self):
        n = self.s.shape[0]
        if self.truncated is None:
            self.truncated = np.zeros(n, dtype=bool)

    def __len__(self):
        return int(self.s.shape[0])

    @property
    def dim(self) -> int:
        return int(self.m.shape[1])

    def __getitem__(self, i) -> DiscretizedRecord:
        return DiscretizedRecord(
            int(self.record_id[i]),
            int(self.s[i]),
            tuple(int(k) for k in self.m[i]),
            tuple(float(x) for x in self.v[i]),
        )

    def records(self):
        for i in range(len(self)):
            yield self[i]

    def subset(self, mask) -> "DiscretizedDataset":
        mask = np.asarray(mask)
        return replace(
            self,
            record_id=self.record_id[mask],
            s=self.s[mask],
            m=self.m[mask],
            v=self.v[mask],
            covariates={k: np.asarray(c)[mask] for k, c in self.covariates.items()},
            truncated=self.truncated[mask],
            truth=None if self.truth is None else self.truth[mask],
        )

    def cover(self, dim: int = 0):
        """Working-cell range ``[lo, hi)`` covered by each record's interval."""
        lo, hi = self.plan.axes[dim].cover
        return lo[self.s - 1, self.m[:, dim]], hi[self.s - 1, self.m[:, dim]]

    def split_shares(self) -> np.ndarray:
        n = max(len(self), 1)
        return np.bincount(self.s - 1, minlength=self.plan.n_split) / n


def assign_splits(n: int, S: int, rng, *, balanced: bool = False, threads: int = 1) -> np.ndarray:
    """Split index in ``1..S`` for each of ``n`` records.

    By default each index is drawn independently and uniformly.  With
    ``balanced=True`` the split sizes differ by at most one.
    """
    n, S = int(n), int(S)
    if n < 0:
        raise ValueError("n must be non-negative")
    if S < 1:
        raise ValueError("S must be at least 1")
    seq = as_seed_sequence(rng)
    if balanced:
        return generator(seq, _BALANCED).permutation(np.arange(n) % S + 1)
    if S == 1:
        return np.ones(n, dtype=np.int64)
    u = block_uniform(seq, n, stream=_ASSIGN, threads=threads)[:, 0]
    return np.minimum((u * S).astype(np.int64), S - 1) + 1


def _cells(plan, z, s, truncate, row_ids=None):
    """Interval index and representative for each row of ``z`` (N, P)."""
    n, P = z.shape
    m = np.empty((n, P), dtype=np.int64)
    v = np.empty((n, P))
    for p, ax in enumerate(plan.axes):
        b = kernels.locate(z[:, p], ax.edges)
        low, high = b < 0, b >= ax.n_cells
        bad = low | high
        if bad.any():
            if not truncate or np.isnan(z[bad, p]).any():
                i = int(np.flatnonzero(bad)[0])
                row = None if row_ids is None else int(row_ids[i])
                raise OutOfSupport(p, float(z[i, p]), row)
        mp = ax.cell_of[s - 1, np.clip(b, 0, ax.n_cells - 1)]
        # outside the box the first and last intervals extend to infinity
        mp[low] = 1
        mp[high] = ax.n_intervals[s[high] - 1]
        m[:, p] = mp
        table = np.full((plan.n_split, ax.max_intervals + 1), np.nan)
        for k, sv in enumerate(ax.split_values):
            table[k, : sv.shape[0]] = sv
        v[:, p] = table[s - 1, mp]
    return m, v


def discretize_value(z, plan: SplitDesign, s: int, record_id: int = 0) -> DiscretizedRecord:
    """Discretize one (possibly multivariate) value under scheme ``s``."""
    plan.check_split(s)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (plan.dim,):
        raise SchemaError(f"expected {plan.dim} sensitive values, got {z.shape[0]}")
    m, v = _cells(plan, z[None, :], np.array([int(s)]), truncate=False)
    return DiscretizedRecord(
        int(record_id), int(s), tuple(int(k) for k in m[0]), tuple(float(x) for x in v[0])
    )


def discretize_dataset(
    values,
    plan: SplitDesign,
    rng,
    *,
    covariates: dict | None = None,
    record_ids=None,
    truncate: bool = False,
    keep_truth: bool = False,
    balanced: bool = False,
    threads: int = 1,
    sensitive_names=(),
) -> DiscretizedDataset:
    """Assign splits and discretize every row of ``values`` (N x P).

    With ``truncate=True`` values outside the support are reported in the
    first or last interval and every record in a boundary interval is then
    removed (see :func:`truncate_unbounded`).  Otherwise an out-of-support
    value raises :class:`OutOfSupport`.
    """
    z = np.asarray(values, dtype=float)
    if z.ndim == 1:
        z = z[:, None] if plan.dim == 1 else z[None, :]
    if z.ndim != 2 or z.shape[1] != plan.dim:
        raise SchemaError(f"expected an N x {plan.dim} array of sensitive values")
    n = z.shape[0]
    ids = np.arange(n, dtype=np.int64) if record_ids is None else np.asarray(record_ids, dtype=np.int64)
    if ids.shape != (n,):
        raise SchemaError("record_ids must have one entry per row")
    covs = {}
    for name, col in (covariates or {}).items():
        col = np.asarray(col)
        if col.shape[0] != n:
            raise SchemaError(f"covariate {name!r} has {col.shape[0]} rows, expected {n}")
        covs[name] = col
    s = assign_splits(n, plan.n_split, rng, balanced=balanced, threads=threads)
    m, v = _cells(plan, z, s, truncate, ids)
    ds = DiscretizedDataset(
        plan,
        ids,
        s,
        m,
        v,
        covs,
        truth=z.copy() if keep_truth else None,
        sensitive=frozenset(sensitive_names),
    )
    return truncate_unbounded(ds) if truncate else ds


def truncate_unbounded(dataset: DiscretizedDataset, *, drop: bool = True) -> DiscretizedDataset:
    """Flag, and by default remove, records in the first or last interval of any dimension."""
    n_int = np.column_stack(
        [ax.n_intervals[dataset.s - 1] for ax in dataset.plan.axes]
    ) if len(dataset) else np.empty((0, dataset.dim), dtype=np.int64)
    edge = ((dataset.m == 1) | (dataset.m == n_int)).any(axis=1)
    if not drop:
        out = replace(dataset, truncated=dataset.truncated | edge)
        out.n_truncated = dataset.n_truncated + int(edge.sum())
        return out
    out = dataset.subset(~edge)
    out.n_truncated = dataset.n_truncated + int(edge.sum())
    return out


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_dataset_csv(dataset: DiscretizedDataset, path) -> None:
    """Provider output: ``record_id, s, m_1..m_P, v_1..v_P`` plus covariates.

    Columns named as sensitive are refused, so raw values cannot be
    released through the covariate pass-through.
    """
    leaked = dataset.sensitive & set(dataset.covariates)
    if leaked:
        raise SchemaError(f"refusing to write sensitive columns: {sorted(leaked)}")
    P = dataset.dim
    names = list(dataset.covariates)
    header = ["record_id", "s"] + [f"m_{p + 1}" for p in range(P)] + [f"v_{p + 1}" for p in range(P)] + names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        cols = [dataset.covariates[k] for k in names]
        for i in range(len(dataset)):
            row = [int(dataset.record_id[i]), int(dataset.s[i])]
            row += [int(k) for k in dataset.m[i]]
            row += [_fmt(x) for x in dataset.v[i]]
            row += [_fmt(c[i]) for c in cols]
            w.writerow(row)


def read_dataset_csv(path, plan: SplitDesign) -> DiscretizedDataset:
    """Read provider output back, validating it against ``plan``."""
    P = plan.dim
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file, header row required") from None
        need = ["record_id", "s"] + [f"m_{p + 1}" for p in range(P)] + [f"v_{p + 1}" for p in range(P)]
        missing = [c for c in need if c not in header]
        if missing:
            raise SchemaError(f"missing columns {missing}")
        pos = {c: header.index(c) for c in header}
        extra = [c for c in header if c not in need]
        rows = list(reader)
    n = len(rows)
    ids = np.empty(n, dtype=np.int64)
    s = np.empty(n, dtype=np.int64)
    m = np.empty((n, P), dtype=np.int64)
    v = np.empty((n, P))
    covs = {c: [] for c in extra}
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError("wrong number of fields", row=i)
        try:
            ids[i - 2] = int(row[pos["record_id"]])
            s[i - 2] = int(row[pos["s"]])
            for p in range(P):
                m[i - 2, p] = int(row[pos[f"m_{p + 1}"]])
                v[i - 2, p] = float(row[pos[f"v_{p + 1}"]])
        except ValueError:
            raise SchemaError("non-numeric split, cell or value field", row=i) from None
        if not 1 <= s[i - 2] <= plan.n_split:
            raise SchemaError(f"split index {s[i - 2]} outside 1..{plan.n_split}", row=i)
        for p, ax in enumerate(plan.axes):
            mi = m[i - 2, p]
            if not 1 <= mi <= ax.n_intervals[s[i - 2] - 1]:
                raise SchemaError(f"cell index {mi} invalid for split {s[i - 2]}", row=i)
            lo, hi = ax.cover[0][s[i - 2] - 1, mi], ax.cover[1][s[i - 2] - 1, mi]
            if hi <= lo:
                raise SchemaError(f"record reports the empty interval (s={s[i - 2]}, m={mi})", row=i)
        for c in extra:
            covs[c].append(row[pos[c]])
    out = {}
    for c, vals in covs.items():
        try:
            out[c] = np.array([float(x) for x in vals])
        except ValueError:
            out[c] = np.array(vals, dtype=object)
    return DiscretizedDataset(plan, ids, s, m, v, out)
