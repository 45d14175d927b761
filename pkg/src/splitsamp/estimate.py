"""Three-step OLS when a regressor, the outcome, or both were discretized.

1. Reconstruct the synthetic variable on the working grid.
2. Estimate conditional means of the synthetic variable per scheme
   interval (``kappa`` for a regressor, ``pi`` for the outcome, the latter
   also conditioned on a partition of the observed regressors).
3. Replace the discretized variable by those conditional means and run OLS.

Conditional means use *pooled* membership: for scheme ``s`` and interval
``m`` every record whose synthetic value falls in ``C^(s)_m`` contributes,
whichever scheme the record itself was discretized with.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import kernels
from .errors import EmptyCellError, SchemaError, SingularMatrixError
from .mechanism import DiscretizedDataset
from .reconstruct import SyntheticSample, synthesize

__all__ = [
    "PartitionPlan",
    "CondExpTable",
    "RegressionResult",
    "ols_core",
    "estimate_kappa",
    "estimate_pi",
    "estimate_rhs",
    "estimate_lhs",
    "estimate_both",
    "midpoint_ols",
]


# ---------------------------------------------------------------------------
# partitions


def _as_2d(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise SchemaError(f"{name} must be a vector or a matrix")
    if not np.all(np.isfinite(a)):
        raise SchemaError(f"{name} contains non-finite values")
    return a


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """Mutually exclusive regions ``D_l`` of the observed-regressor domain.

    Either per-column boundary sequences (the regions are their product
    cells) or ``categorical`` (each distinct row is a region).  Regions
    without observations are skipped; their number is reported.
    """

    edges: tuple[np.ndarray, ...] | None = None
    categorical: bool = False

    @classmethod
    def equal_width(cls, X, L: int = 50) -> "PartitionPlan":
        """``L`` equal-width bins per column spanning the observed range."""
        X = _as_2d(X, "X")
        if int(L) != L or L < 1:
            raise ValueError("L must be a positive integer")
        edges = []
        for col in X.T:
            lo, hi = float(col.min()), float(col.max())
            if hi <= lo:
                hi = lo + 1.0
            edges.append(np.linspace(lo, hi, int(L) + 1))
        return cls(tuple(edges))

    @classmethod
    def from_edges(cls, edges) -> "PartitionPlan":
        if np.ndim(edges[0]) == 0:
            edges = [edges]
        out = []
        for e in edges:
            e = np.asarray(e, dtype=float)
            if e.ndim != 1 or e.shape[0] < 2 or np.any(np.diff(e) <= 0):
                raise ValueError("partition edges must be strictly increasing with at least two points")
            out.append(e)
        return cls(tuple(out))

    @classmethod
    def by_category(cls) -> "PartitionPlan":
        return cls(None, categorical=True)

    def assign(self, X):
        """Return ``(labels, n_groups, n_empty)`` with labels ``0..n_groups-1``."""
        X = _as_2d(X, "X")
        if self.categorical:
            _, lab = np.unique(X, axis=0, return_inverse=True)
            lab = lab.ravel()
            return lab.astype(np.int64), int(lab.max()) + 1 if lab.size else 0, 0
        if X.shape[1] != len(self.edges):
            raise SchemaError(f"partition has {len(self.edges)} columns, X has {X.shape[1]}")
        flat = np.zeros(X.shape[0], dtype=np.int64)
        nominal = 1
        for p, e in enumerate(self.edges):
            idx = kernels.locate(X[:, p], e)
            bad = (idx < 0) | (idx >= e.shape[0] - 1)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise SchemaError(f"value {X[i, p]!r} in column {p} outside the partition range", row=i)
            flat = flat * (e.shape[0] - 1) + idx
            nominal *= e.shape[0] - 1
        used, lab = np.unique(flat, return_inverse=True)
        return lab.astype(np.int64), int(used.shape[0]), int(nominal - used.shape[0])


# ---------------------------------------------------------------------------
# conditional-mean tables


@dataclass(frozen=True, eq=False)
class CondExpTable:
    """Conditional means keyed by (split, interval, group).

    ``values`` has shape ``(S, K, G, P)`` and ``counts`` ``(S, K, G)``.  The
    interval key ``k`` flattens the per-dimension interval indices
    ``m_1..m_D`` in base ``M_max + 1``.  Cells without observations hold NaN.
    """

    kind: str
    values: np.ndarray
    counts: np.ndarray
    base: int
    dims: int

    def key(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.int64)
        if m.ndim == 1:
            m = m[:, None]
        k = np.zeros(m.shape[0], dtype=np.int64)
        for p in range(m.shape[1]):
            k = k * self.base + m[:, p]
        return k

    def lookup(self, s, m, g=None) -> np.ndarray:
        """Values for each record's ``(s, m, g)``; raises if any cell is empty."""
        s = np.asarray(s, dtype=np.int64)
        k = self.key(m)
        g = np.zeros_like(s) if g is None else np.asarray(g, dtype=np.int64)
        out = self.values[s - 1, k, g]
        empty = self.counts[s - 1, k, g] == 0
        if empty.any():
            cells = sorted({(int(a), int(b), int(c)) for a, b, c in zip(s[empty], k[empty], g[empty])})
            raise EmptyCellError(
                f"{len(cells)} {self.kind} cell(s) have no observations: {cells[:10]}", cells
            )
        return out

    def as_dict(self) -> dict:
        """``{(s, m..., [g]): (value, count)}`` for populated cells."""
        out = {}
        for s, k, g in zip(*np.nonzero(self.counts)):
            m, rest = [], int(k)
            for _ in range(self.dims):
                m.append(rest % self.base)
                rest //= self.base
            key = (int(s) + 1, *reversed(m))
            if self.values.shape[2] > 1:
                key = key + (int(g),)
            val = self.values[s, k, g]
            out[key] = (float(val[0]) if val.shape[0] == 1 else val.copy(), int(self.counts[s, k, g]))
        return out

    @property
    def n_populated(self) -> int:
        return int(np.count_nonzero(self.counts))


def _joint_keys(plan, b):
    """Flat working index and per-split flat interval key tables."""
    base = max(ax.max_intervals for ax in plan.axes) + 1
    flat_b = np.zeros(b.shape[0], dtype=np.int64)
    key = np.zeros((plan.n_split, 1), dtype=np.int64)
    for p, ax in enumerate(plan.axes):
        flat_b = flat_b * ax.n_cells + b[:, p]
        key = (key[:, :, None] * base + ax.cell_of[:, None, :]).reshape(plan.n_split, -1)
    return flat_b, key, base


def _table(kind, synthetic: SyntheticSample, vals, groups, n_groups):
    plan = synthetic.plan
    flat_b, key, base = _joint_keys(plan, synthetic.b)
    n_keys = base ** plan.dim
    sums, counts = kernels.scheme_sums(flat_b, groups, vals, key, n_keys, n_groups)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = sums / counts[..., None]
    return CondExpTable(kind, values, counts, base, plan.dim)


def estimate_kappa(synthetic: SyntheticSample, dataset: DiscretizedDataset | None = None) -> CondExpTable:
    """``kappa(s, m)``: mean synthetic value over records whose synthetic value lies in ``C^(s)_m``."""
    if dataset is not None and len(dataset) != len(synthetic):
        raise SchemaError("synthetic sample and dataset differ in length")
    n = len(synthetic)
    return _table("kappa", synthetic, synthetic.z, np.zeros(n, dtype=np.int64), 1)


def estimate_pi(
    synthetic_y: SyntheticSample,
    dataset_y: DiscretizedDataset | None = None,
    X=None,
    partition: PartitionPlan | None = None,
    *,
    groups=None,
) -> CondExpTable:
    """``pi(s, m, l)``: mean of ``y`` synthetic values with ``y`` in ``C^(s)_m`` and ``X`` in ``D_l``.

    Pass either ``X`` with a ``partition`` or precomputed ``groups`` labels.
    """
    n = len(synthetic_y)
    if dataset_y is not None and len(dataset_y) != n:
        raise SchemaError("synthetic sample and dataset differ in length")
    if groups is None:
        if X is None:
            groups, n_groups = np.zeros(n, dtype=np.int64), 1
        else:
            partition = partition or PartitionPlan.equal_width(X)
            groups, n_groups, _ = partition.assign(X)
    else:
        groups = np.asarray(groups, dtype=np.int64)
        n_groups = int(groups.max()) + 1 if n else 1
    if synthetic_y.plan.dim != 1:
        raise SchemaError("the outcome must be one-dimensional")
    return _table("pi", synthetic_y, synthetic_y.z, groups, n_groups)


# ---------------------------------------------------------------------------
# OLS


@dataclass
class RegressionResult:
    """Coefficients on ``X`` (``beta``) and on the controls ``W`` (``gamma``)."""

    beta: np.ndarray
    se: np.ndarray
    cov: np.ndarray
    sigma2: float
    n: int
    case: str
    names: list = field(default_factory=list)
    gamma: np.ndarray | None = None
    gamma_se: np.ndarray | None = None
    w_names: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.beta / self.se

    def rows(self):
        """``(name, coef, se, t)`` for every coefficient, ``X`` first."""
        out = [(n, b, s, b / s if s > 0 else np.nan) for n, b, s in zip(self.names, self.beta, self.se)]
        if self.gamma is not None:
            out += [
                (n, g, s, g / s if s > 0 else np.nan)
                for n, g, s in zip(self.w_names, self.gamma, self.gamma_se)
            ]
        return out

    def summary(self) -> str:
        lines = [f"case: {self.case}   N: {self.n}   sigma2: {self.sigma2:.6g}"]
        lines.append(f"{'term':<12}{'coef':>14}{'se':>14}{'t':>10}")
        for n, b, s, t in self.rows():
            lines.append(f"{n:<12}{b:>14.6f}{s:>14.6f}{t:>10.3f}")
        for k, v in sorted(self.diagnostics.items()):
            lines.append(f"{k}: {v}")
        return "\n".join(lines)


def _rank_check(A, names, what):
    """QR with column pivoting; raises naming the columns beyond the numerical rank."""
    if A.shape[1] == 0:
        return
    _, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(float).eps * (d[0] if d.size else 0.0) * 1e3
    rank = int(np.sum(d > tol))
    if rank < A.shape[1] or d[0] == 0:
        bad = [names[i] for i in piv[rank:]] or list(names)
        raise SingularMatrixError(f"{what} is rank deficient; collinear columns: {bad}", bad)


def _lstsq(A, b):
    q, r = linalg.qr(A, mode="economic")
    return linalg.solve_triangular(r, q.T @ b)


def ols_core(y, X, W=None, *, names=None, w_names=None, case="ols") -> RegressionResult:
    """OLS of ``y`` on ``X`` after partialling out ``W``.

    ``beta = (X' M_W X)^{-1} X' M_W y`` computed through a QR
    decomposition, with covariance ``sigma2 (X' M_W X)^{-1}`` and
    ``sigma2 = SSR / (N - k)``.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = _as_2d(X, "X")
    n = y.shape[0]
    if X.shape[0] != n:
        raise SchemaError(f"X has {X.shape[0]} rows, y has {n}")
    if not np.all(np.isfinite(y)):
        raise SchemaError("y contains non-finite values")
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(X.shape[1])]
    Wm = None if W is None else _as_2d(W, "W")
    if Wm is not None and Wm.shape[1] == 0:
        Wm = None
    kw = 0 if Wm is None else Wm.shape[1]
    w_names = list(w_names) if w_names is not None else [f"w{j + 1}" for j in range(kw)]
    k = X.shape[1] + kw
    if n <= k:
        raise SchemaError(f"need more observations ({n}) than regressors ({k})")
    if Wm is not None:
        if Wm.shape[0] != n:
            raise SchemaError(f"W has {Wm.shape[0]} rows, y has {n}")
        _rank_check(np.column_stack([X, Wm]), names + w_names, "design matrix")
        Xr = X - Wm @ _lstsq(Wm, X)
        yr = y - Wm @ _lstsq(Wm, y)
    else:
        _rank_check(X, names, "design matrix")
        Xr, yr = X, y
    q, r = linalg.qr(Xr, mode="economic")
    beta = linalg.solve_triangular(r, q.T @ yr)
    resid = yr - Xr @ beta
    sigma2 = float(resid @ resid) / (n - k)
    rinv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    cov = sigma2 * (rinv @ rinv.T)
    cov = 0.5 * (cov + cov.T)
    res = RegressionResult(
        beta=beta,
        se=np.sqrt(np.clip(np.diag(cov), 0, None)),
        cov=cov,
        sigma2=sigma2,
        n=n,
        case=case,
        names=names,
        w_names=w_names,
    )
    if Wm is not None:
        gamma = _lstsq(Wm, y - X @ beta)
        full = np.column_stack([X, Wm])
        _, rf = linalg.qr(full, mode="economic")
        rfi = linalg.solve_triangular(rf, np.eye(rf.shape[0]))
        gcov = sigma2 * (rfi @ rfi.T)[X.shape[1] :, X.shape[1] :]
        res.gamma = gamma
        res.gamma_se = np.sqrt(np.clip(np.diag(gcov), 0, None))
    res.diagnostics["condition"] = float(np.linalg.cond(r)) if r.size else 0.0
    return res


# ---------------------------------------------------------------------------
# pipelines


def _controls(W, n, intercept):
    cols, names = [], []
    if W is not None:
        Wm = _as_2d(W, "W")
        if Wm.shape[0] != n:
            raise SchemaError(f"W has {Wm.shape[0]} rows, expected {n}")
        cols.append(Wm)
        names += [f"w{j + 1}" for j in range(Wm.shape[1])]
    if intercept:
        cols.append(np.ones((n, 1)))
        names.append("const")
    if not cols:
        return None, []
    return np.column_stack(cols), names


def _group_means(vals, groups, n_groups):
    sums, counts = kernels.group_sums(groups, vals, n_groups)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts[:, None]
    return means[groups]


def _own_cell_labels(dataset: DiscretizedDataset):
    """Compact label for each record's own (s, m) reported cell."""
    base = max(ax.max_intervals for ax in dataset.plan.axes) + 1
    flat = dataset.s.astype(np.int64) - 1
    for p in range(dataset.dim):
        flat = flat * base + dataset.m[:, p]
    _, lab = np.unique(flat, return_inverse=True)
    return lab.ravel().astype(np.int64), int(lab.max()) + 1 if lab.size else 0


def _x_names(k, prefix="x"):
    return [f"{prefix}{j + 1}" for j in range(k)]


def estimate_rhs(
    y,
    dataset: DiscretizedDataset,
    W=None,
    *,
    rng=None,
    synthetic: SyntheticSample | None = None,
    intercept: bool = True,
    threads: int = 1,
) -> RegressionResult:
    """Discretized regressor(s): ``X*`` replaced by ``kappa``.

    ``y`` and ``W`` are replaced by their means within each record's
    reported cell, and the coefficients come from the observation-level
    regression of those means.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = len(dataset)
    if y.shape[0] != n:
        raise SchemaError(f"y has {y.shape[0]} rows, dataset has {n}")
    if synthetic is None:
        if rng is None:
            raise ValueError("pass rng (a seed) or a precomputed synthetic sample")
        synthetic = synthesize(dataset, rng, threads=threads)
    kappa = estimate_kappa(synthetic, dataset)
    Xdd = kappa.lookup(dataset.s, dataset.m)
    lab, n_lab = _own_cell_labels(dataset)
    ydd = _group_means(y, lab, n_lab)[:, 0]
    Wc, w_names = _controls(W, n, intercept)
    Wdd = None if Wc is None else _group_means(Wc, lab, n_lab)
    res = ols_core(ydd, Xdd, Wdd, names=_x_names(dataset.dim), w_names=w_names, case="rhs")
    res.diagnostics.update(kappa_cells=kappa.n_populated, reported_cells=n_lab)
    return res


def _pi_expected(pi: CondExpTable, dataset_y: DiscretizedDataset, groups, n_groups, class_probs):
    """Per-record replacement ``sum_m pi(s, m, l) Pr(m | l, s)``."""
    S = dataset_y.plan.n_split
    K = pi.values.shape[1]
    s0 = dataset_y.s - 1
    if class_probs == "observed":
        # reported classes of the records in split s
        flat = (s0 * n_groups + groups) * K + dataset_y.m[:, 0]
        freq = np.bincount(flat, minlength=S * n_groups * K).reshape(S, n_groups, K).astype(float)
    elif class_probs == "synthetic":
        # every record classified by its synthetic value under scheme s
        freq = np.moveaxis(pi.counts, 1, 2).astype(float)
    else:
        raise ValueError(f"class_probs must be 'observed' or 'synthetic', got {class_probs!r}")
    freq /= np.maximum(freq.sum(axis=2, keepdims=True), 1)
    # pi values indexed (s, k, g); move to (s, g, k)
    vals = np.moveaxis(pi.values[..., 0], 1, 2)
    used = freq > 0
    empty = used & (np.moveaxis(pi.counts, 1, 2) == 0)
    if empty.any():
        cells = [(int(a) + 1, int(c), int(b)) for a, b, c in zip(*np.nonzero(empty))]
        raise EmptyCellError(f"{len(cells)} pi cell(s) needed but empty: {cells[:10]}", cells)
    ytilde = np.where(used, vals, 0.0) * freq
    return ytilde.sum(axis=2)[s0, groups]


def estimate_lhs(
    dataset: DiscretizedDataset,
    X,
    *,
    rng=None,
    partition: PartitionPlan | None = None,
    L: int = 50,
    synthetic: SyntheticSample | None = None,
    class_probs: str = "observed",
    intercept: bool = True,
    threads: int = 1,
) -> RegressionResult:
    """Discretized outcome: ``y*`` replaced by ``sum_m pi(s, m, l) Pr(m | l)``.

    Parameters
    ----------
    class_probs : {"observed", "synthetic"}
        Source of ``Pr(y* in C^(s)_m | X in D_l)``.  ``"observed"`` uses the
        reported cells of records in split ``s``; ``"synthetic"`` classifies
        the synthetic values instead, in which case the replacement
        collapses to the mean synthetic outcome within ``D_l``.
    """
    X = _as_2d(X, "X")
    n = len(dataset)
    if X.shape[0] != n:
        raise SchemaError(f"X has {X.shape[0]} rows, dataset has {n}")
    if synthetic is None:
        if rng is None:
            raise ValueError("pass rng (a seed) or a precomputed synthetic sample")
        synthetic = synthesize(dataset, rng, threads=threads)
    partition = partition or PartitionPlan.equal_width(X, L)
    groups, n_groups, n_empty = partition.assign(X)
    pi = estimate_pi(synthetic, dataset, groups=groups)
    ytilde = _pi_expected(pi, dataset, groups, n_groups, class_probs)
    Xt = _group_means(X, groups, n_groups)
    Wc, w_names = _controls(None, n, intercept)
    res = ols_core(ytilde, Xt, Wc, names=_x_names(X.shape[1]), w_names=w_names, case="lhs")
    res.diagnostics.update(partitions=n_groups, empty_partitions=n_empty, pi_cells=pi.n_populated)
    return res


def estimate_both(
    dataset_y: DiscretizedDataset,
    dataset_x: DiscretizedDataset,
    W=None,
    *,
    rng=None,
    partition_w: PartitionPlan | None = None,
    synthetic_y: SyntheticSample | None = None,
    synthetic_x: SyntheticSample | None = None,
    intercept: bool = True,
    class_probs: str = "observed",
    threads: int = 1,
) -> RegressionResult:
    """Outcome and regressor(s) discretized.

    ``X*`` is replaced by ``kappa``; ``y*`` by ``pi`` conditioned on the
    record's reported ``X*`` cell (crossed with the ``W`` partition when
    ``W`` is given).  This is the direct combination of the two one-sided
    pipelines.
    """
    n = len(dataset_y)
    if len(dataset_x) != n:
        raise SchemaError(f"outcome and regressor datasets differ in length ({n} vs {len(dataset_x)})")
    if not np.array_equal(dataset_y.record_id, dataset_x.record_id):
        raise SchemaError("outcome and regressor datasets are not row-aligned")
    if synthetic_y is None or synthetic_x is None:
        if rng is None:
            raise ValueError("pass rng (a seed) or precomputed synthetic samples")
        from ._rng import as_seed_sequence, child

        seq = as_seed_sequence(rng)
        synthetic_y = synthetic_y or synthesize(dataset_y, child(seq, 0), threads=threads)
        synthetic_x = synthetic_x or synthesize(dataset_x, child(seq, 1), threads=threads)
    kappa = estimate_kappa(synthetic_x, dataset_x)
    Xdd = kappa.lookup(dataset_x.s, dataset_x.m)
    groups, n_groups = _own_cell_labels(dataset_x)
    n_empty = 0
    if W is not None:
        Wm = _as_2d(W, "W")
        wl, n_w, n_empty = (partition_w or PartitionPlan.equal_width(Wm)).assign(Wm)
        _, groups = np.unique(groups * n_w + wl, return_inverse=True)
        groups = groups.ravel().astype(np.int64)
        n_groups = int(groups.max()) + 1
    pi = estimate_pi(synthetic_y, dataset_y, groups=groups)
    ytilde = _pi_expected(pi, dataset_y, groups, n_groups, class_probs)
    Wc, w_names = _controls(W, n, intercept)
    Wdd = None if Wc is None else _group_means(Wc, groups, n_groups)
    res = ols_core(ytilde, Xdd, Wdd, names=_x_names(dataset_x.dim), w_names=w_names, case="both")
    res.diagnostics.update(
        joint_groups=n_groups,
        empty_partitions=n_empty,
        combination="direct combination of the one-sided pipelines",
    )
    return res


def midpoint_ols(y, X, W=None, *, intercept: bool = True) -> RegressionResult:
    """OLS on reported interval representatives (the naive baseline).

    ``y`` and ``X`` may be arrays or :class:`DiscretizedDataset` objects, in
    which case each record's own-interval representative is used.
    """
    yv = y.v[:, 0] if isinstance(y, DiscretizedDataset) else np.asarray(y, dtype=float).ravel()
    Xv = X.v if isinstance(X, DiscretizedDataset) else _as_2d(X, "X")
    Wc, w_names = _controls(W, yv.shape[0], intercept)
    return ols_core(yv, Xv, Wc, names=_x_names(Xv.shape[1]), w_names=w_names, case="naive")
