"""Split-sample discretization designs.

A design is a set of ``S`` interval schemes over the same support.  The
*working grid* is the partition formed by every boundary used by any scheme;
each scheme interval is a contiguous run of working cells.  The shifting
design is the special case where all schemes share one interval width and
scheme ``s`` is offset by ``(s - 1) * h``.

All objects here are immutable once built.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
import numpy as np

__all__ = [
    "PlanError",
    "SupportBox",
    "Axis",
    "SplitDesign",
    "ShiftingPlan",
    "WorkingGrid",
    "build_shifting_plan",
    "equal_width_design",
    "split_boundaries",
    "working_grid",
    "covered_working_cells",
    "plan_to_json",
    "plan_from_json",
    "load_plan",
    "save_plan",
]


class PlanError(ValueError):
    """Invalid design parameters."""


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SupportBox:
    """Axis-aligned box ``[lower_p, upper_p]`` for each dimension ``p``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise PlanError("support needs matching, non-empty lower and upper bounds")
        for p, (a, b) in enumerate(zip(lo, hi)):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise PlanError(f"support bounds must be finite (dimension {p})")
            if not a < b:
                raise PlanError(f"degenerate support in dimension {p}: [{a}, {b}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_pairs(cls, pairs) -> "SupportBox":
        """``[[a_l, a_u], ...]`` or a single ``(a_l, a_u)`` pair."""
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise PlanError("support must be a list of [lower, upper] pairs")
        return cls(tuple(arr[:, 0]), tuple(arr[:, 1]))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def pairs(self) -> list[list[float]]:
        return [[a, b] for a, b in zip(self.lower, self.upper)]

    def width(self, p: int = 0) -> float:
        return self.upper[p] - self.lower[p]


@dataclass(frozen=True, eq=False)
class Axis:
    """One dimension of a split design.

    Parameters
    ----------
    edges : array, shape (B + 1,)
        Working-grid boundaries, strictly increasing.
    split_index : sequence of int arrays
        For each split, indices into ``edges`` of its interval boundaries
        (non-decreasing, first 0 and last ``B``).
    cum : array, shape (B + 1,)
        Cumulative working-cell lengths in any affine unit; used to draw
        length-proportional reassignments.
    """

    edges: np.ndarray
    split_index: tuple[np.ndarray, ...]
    cum: np.ndarray
    values: np.ndarray
    split_values: tuple[np.ndarray, ...]

    @property
    def n_split(self) -> int:
        return len(self.split_index)

    @property
    def n_cells(self) -> int:
        return self.edges.shape[0] - 1

    @cached_property
    def n_intervals(self) -> np.ndarray:
        return _frozen([len(ix) - 1 for ix in self.split_index], dtype=np.int64)

    @property
    def max_intervals(self) -> int:
        return int(self.n_intervals.max())

    @cached_property
    def cell_of(self) -> np.ndarray:
        """``cell_of[s - 1, b]``: interval of split ``s`` (1-based) holding working cell ``b``."""
        b = np.arange(self.n_cells)
        rows = []
        for ix, m_count in zip(self.split_index, self.n_intervals):
            rows.append(np.minimum(np.searchsorted(ix, b, side="right"), m_count))
        return _frozen(np.vstack(rows), dtype=np.int64)

    @cached_property
    def cover(self) -> tuple[np.ndarray, np.ndarray]:
        """``(lo, hi)``, each ``(S, M_max + 1)``: interval ``m`` covers cells ``lo..hi-1``."""
        lo = np.zeros((self.n_split, self.max_intervals + 1), dtype=np.int64)
        hi = np.zeros_like(lo)
        for s, ix in enumerate(self.split_index):
            lo[s, 1 : len(ix)] = ix[:-1]
            hi[s, 1 : len(ix)] = ix[1:]
        return _frozen(lo), _frozen(hi)

    def boundaries(self, s: int) -> np.ndarray:
        return self.edges[self.split_index[s - 1]]


def _representatives(edges, spec, p):
    if isinstance(spec, str):
        if spec == "midpoint":
            return 0.5 * (edges[:-1] + edges[1:])
        if spec == "left":
            return edges[:-1].copy()
        raise PlanError(f"unknown representative rule {spec!r}")
    vals = np.asarray(spec, dtype=float)
    if vals.ndim == 2:
        vals = vals[p]
    if vals.shape != (edges.shape[0] - 1,):
        raise PlanError(f"need {edges.shape[0] - 1} representative values in dimension {p}")
    inside = (vals >= edges[:-1]) & ((vals < edges[1:]) | (vals == edges[-1]))
    if not inside.all():
        raise PlanError(f"representative values must lie in their working cells (dimension {p})")
    return vals


def _split_values(edges, split_index, spec, values):
    """Representative of each scheme interval (index 0 unused).

    Named rules apply to the interval itself; with explicit working-cell
    values the interval gets their length-weighted mean.
    """
    width = np.diff(edges)
    out = []
    for ix in split_index:
        lo, hi = ix[:-1], ix[1:]
        if isinstance(spec, str) and spec == "left":
            v = edges[lo]
        elif isinstance(spec, str):
            v = 0.5 * (edges[lo] + edges[hi])
        else:
            v = np.array(
                [
                    np.average(values[a:b], weights=width[a:b]) if b > a else edges[a]
                    for a, b in zip(lo, hi)
                ]
            )
        out.append(_frozen(np.concatenate([[np.nan], v])))
    return tuple(out)


def _make_axis(edges, split_index, cum, reps, p):
    edges = _frozen(edges, dtype=float)
    split_index = tuple(_frozen(ix, dtype=np.int64) for ix in split_index)
    values = _frozen(_representatives(edges, reps, p))
    return Axis(
        edges=edges,
        split_index=split_index,
        cum=_frozen(cum, dtype=float),
        values=values,
        split_values=_split_values(edges, split_index, reps, values),
    )


@dataclass(frozen=True, eq=False)
class SplitDesign:
    """A general split-sampling design: one :class:`Axis` per sensitive dimension.

    Every axis must have the same number of splits; record ``i`` uses the
    same split ``s`` in every dimension.
    """

    axes: tuple[Axis, ...]
    representatives: object = "midpoint"
    schemes: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not self.axes:
            raise PlanError("a design needs at least one axis")
        if len({ax.n_split for ax in self.axes}) != 1:
            raise PlanError("all dimensions must use the same number of splits")

    @classmethod
    def from_schemes(cls, schemes, representatives="midpoint") -> "SplitDesign":
        """Build a design from explicit boundary lists.

        ``schemes`` is a list over splits of boundary sequences (one
        dimension), or a list over dimensions of such lists.
        """
        first = schemes[0]
        per_dim = [schemes] if np.ndim(first[0]) == 0 else list(schemes)
        axes = []
        for p, dim_schemes in enumerate(per_dim):
            bounds = [np.asarray(b, dtype=float) for b in dim_schemes]
            for b in bounds:
                if b.ndim != 1 or b.shape[0] < 2 or np.any(np.diff(b) < 0):
                    raise PlanError("each scheme needs at least two non-decreasing boundaries")
                if not np.all(np.isfinite(b)):
                    raise PlanError("scheme boundaries must be finite")
            a_l, a_u = bounds[0][0], bounds[0][-1]
            if a_l >= a_u or any(b[0] != a_l or b[-1] != a_u for b in bounds):
                raise PlanError("all schemes must start and end at the same support bounds")
            scale = a_u - a_l
            union = np.sort(np.concatenate(bounds))
            keep = np.concatenate([[True], np.diff(union) > 1e-12 * scale])
            edges = union[keep]
            edges[-1] = a_u
            split_index = [np.searchsorted(edges, b - 1e-12 * scale, side="left") for b in bounds]
            axes.append(_make_axis(edges, split_index, edges, representatives, p))
        stored = tuple(tuple(tuple(float(v) for v in b) for b in d) for d in per_dim)
        return cls(tuple(axes), representatives, stored)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def n_split(self) -> int:
        return self.axes[0].n_split

    @property
    def support(self) -> SupportBox:
        return SupportBox(
            tuple(ax.edges[0] for ax in self.axes), tuple(ax.edges[-1] for ax in self.axes)
        )

    def check_split(self, s: int) -> None:
        if not 1 <= int(s) <= self.n_split:
            raise PlanError(f"split index {s} outside 1..{self.n_split}")


@dataclass(frozen=True, eq=False)
class ShiftingPlan(SplitDesign):
    """Shifting-method design with ``S`` splits of ``M`` intervals per dimension."""

    S: int = 1
    M: int = 2
    box: SupportBox | None = None

    @property
    def h(self) -> tuple[float, ...]:
        """Shift size per dimension, ``(a_u - a_l) / (S (M - 1))``."""
        return tuple(self.box.width(p) / (self.S * (self.M - 1)) for p in range(self.box.dim))

    @property
    def B(self) -> int:
        """Working cells per dimension."""
        return self.S * (self.M - 1)

    @property
    def support(self) -> SupportBox:
        return self.box


def build_shifting_plan(S: int, M: int, support, representatives="midpoint") -> ShiftingPlan:
    """Shifting design over ``support`` (a :class:`SupportBox` or ``[[a_l, a_u], ...]``).

    Scheme ``s`` has boundaries ``a_l``, ``a_l + (s-1) h + (m-1) w`` for
    ``0 < m < M`` and ``a_u``, with ``w = (a_u - a_l) / (M - 1)``.  The first
    interval of scheme 1 is empty.
    """
    if isinstance(S, bool) or int(S) != S or S < 1:
        raise PlanError(f"S must be a positive integer, got {S!r}")
    if isinstance(M, bool) or int(M) != M or M < 2:
        raise PlanError(f"M must be an integer >= 2, got {M!r}")
    if isinstance(M, (list, tuple, np.ndarray)):
        raise PlanError("per-dimension M is not supported; all dimensions share M")
    S, M = int(S), int(M)
    box = support if isinstance(support, SupportBox) else SupportBox.from_pairs(support)
    B = S * (M - 1)
    k = np.arange(B + 1)
    split_index = []
    for s in range(1, S + 1):
        ix = np.empty(M + 1, dtype=np.int64)
        ix[0] = 0
        ix[1:M] = (s - 1) + np.arange(M - 1) * S
        ix[M] = B
        split_index.append(ix)
    axes = []
    for p in range(box.dim):
        a_l, a_u = box.lower[p], box.upper[p]
        edges = a_l + (a_u - a_l) * k / B
        edges[-1] = a_u
        axes.append(_make_axis(edges, split_index, k.astype(float), representatives, p))
    return ShiftingPlan(tuple(axes), representatives, (), S, M, box)


def equal_width_design(support, M: int, representatives="midpoint") -> SplitDesign:
    """Single scheme of ``M`` equal intervals: the classic midpoint discretization."""
    if int(M) != M or M < 1:
        raise PlanError(f"M must be a positive integer, got {M!r}")
    box = support if isinstance(support, SupportBox) else SupportBox.from_pairs(support)
    schemes = [[list(np.linspace(a, b, int(M) + 1))] for a, b in zip(box.lower, box.upper)]
    return SplitDesign.from_schemes(schemes, representatives)


def split_boundaries(plan: SplitDesign, s: int, dim: int | None = None) -> np.ndarray:
    """Boundaries of split ``s`` (1-based).

    Returns a 1-D array for one-dimensional designs (or when ``dim`` is
    given) and a ``(P, M + 1)`` array otherwise.
    """
    plan.check_split(s)
    if dim is not None:
        return plan.axes[dim].boundaries(s).copy()
    if plan.dim == 1:
        return plan.axes[0].boundaries(s).copy()
    return np.vstack([ax.boundaries(s) for ax in plan.axes])


@dataclass(frozen=True, eq=False)
class WorkingGrid:
    """Union of all split boundaries, with one representative value per cell."""

    edges: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]

    @property
    def n_cells(self) -> tuple[int, ...]:
        return tuple(e.shape[0] - 1 for e in self.edges)

    def locate(self, z, dim: int = 0) -> np.ndarray:
        from .kernels import locate

        return locate(np.asarray(z, dtype=float), self.edges[dim])


def working_grid(plan: SplitDesign) -> WorkingGrid:
    return WorkingGrid(
        tuple(ax.edges for ax in plan.axes), tuple(ax.values for ax in plan.axes)
    )


def _covered_1d(ax: Axis, s: int, m: int) -> np.ndarray:
    bounds = ax.boundaries(s)
    if not 1 <= m <= len(bounds) - 1:
        raise PlanError(f"interval index {m} outside 1..{len(bounds) - 1}")
    lo, hi = bounds[m - 1], bounds[m]
    if hi <= lo:
        return np.empty(0, dtype=np.int64)
    left, right = ax.edges[:-1], ax.edges[1:]
    # working cell lies inside [lo, hi) up to rounding of the shared edges
    tol = 1e-9 * (ax.edges[-1] - ax.edges[0])
    inside = (left >= lo - tol) & (right <= hi + tol) & (right - left > 0)
    return np.flatnonzero(inside)


def covered_working_cells(plan: SplitDesign, s: int, m) -> np.ndarray:
    """Working cells contained in interval ``m`` of split ``s``.

    Found by interval geometry rather than index formulas.  For a
    one-dimensional design ``m`` is an int and the result a sorted index
    array; for ``P`` dimensions ``m`` is a length-``P`` sequence and the
    result a ``(K, P)`` array of index tuples (the Cartesian product of the
    per-dimension sets).
    """
    plan.check_split(s)
    if plan.dim == 1 and np.ndim(m) == 0:
        return _covered_1d(plan.axes[0], s, int(m))
    m = list(np.atleast_1d(m))
    if len(m) != plan.dim:
        raise PlanError(f"need {plan.dim} interval indices, got {len(m)}")
    sets = [_covered_1d(ax, s, int(mi)) for ax, mi in zip(plan.axes, m)]
    if any(len(c) == 0 for c in sets):
        return np.empty((0, plan.dim), dtype=np.int64)
    grids = np.meshgrid(*sets, indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def plan_to_json(plan: SplitDesign) -> dict:
    reps = plan.representatives
    if not isinstance(reps, str):
        reps = np.asarray(reps, dtype=float).tolist()
    if isinstance(plan, ShiftingPlan):
        return {"S": plan.S, "M": plan.M, "support": plan.box.pairs(), "representatives": reps}
    return {"schemes": [[list(b) for b in d] for d in plan.schemes], "representatives": reps}


def plan_from_json(doc: dict) -> SplitDesign:
    reps = doc.get("representatives", "midpoint")
    if "schemes" in doc:
        return SplitDesign.from_schemes(doc["schemes"], reps)
    try:
        if doc["M"] == 1:
            # one interval per scheme: nothing is revealed about the value
            box = SupportBox.from_pairs(doc["support"])
            schemes = [[[a, b]] * int(doc["S"]) for a, b in box.pairs()]
            return SplitDesign.from_schemes(schemes, reps)
        return build_shifting_plan(doc["S"], doc["M"], doc["support"], reps)
    except KeyError as exc:
        raise PlanError(f"plan document lacks field {exc.args[0]!r}") from None


def save_plan(plan: SplitDesign, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_json(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path) -> SplitDesign:
    with open(path, encoding="utf-8") as fh:
        return plan_from_json(json.load(fh))

