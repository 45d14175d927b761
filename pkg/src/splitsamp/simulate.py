"""Monte Carlo harness for the bias study.

The model is ``y = alpha + beta x + eta``.  Depending on the case the
regressor, the outcome or both are discretized with a shifting plan, and
the shifting pipeline is compared with the midpoint regression on a single
equal-width scheme.  Every replication draws from its own seed stream
``(seed, replication)``, so results do not depend on the thread count.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats

from ._rng import child
from .errors import EmptyCellError, SchemaError, SingularMatrixError
from .estimate import estimate_both, estimate_lhs, estimate_rhs, midpoint_ols
from .mechanism import discretize_dataset
from .scheme import build_shifting_plan, equal_width_design

__all__ = [
    "DISTRIBUTIONS",
    "TruncatedShifted",
    "distribution",
    "sample_distribution",
    "SimConfig",
    "SimResult",
    "SimulationAborted",
    "gen_dgp",
    "run_mc",
    "format_table",
    "write_results_csv",
]

CASES = ("rhs", "lhs", "both")
DISTRIBUTIONS = ("normal", "logistic", "lognormal", "uniform", "exponential", "weibull")


class SimulationAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class TruncatedShifted:
    """``base`` restricted to ``[lo, hi]`` and then shifted by ``shift``."""

    base: object
    lo: float
    hi: float
    shift: float = 0.0

    @property
    def support(self):
        return self.lo + self.shift, self.hi + self.shift

    @property
    def _mass(self):
        return self.base.cdf(self.hi) - self.base.cdf(self.lo)

    def pdf(self, x):
        t = np.asarray(x, dtype=float) - self.shift
        inside = (t >= self.lo) & (t <= self.hi)
        return np.where(inside, self.base.pdf(t) / self._mass, 0.0)

    def cdf(self, x):
        t = np.clip(np.asarray(x, dtype=float) - self.shift, self.lo, self.hi)
        return (self.base.cdf(t) - self.base.cdf(self.lo)) / self._mass

    def ppf(self, u):
        Fa, Fb = self.base.cdf(self.lo), self.base.cdf(self.hi)
        t = self.base.ppf(Fa + np.asarray(u, dtype=float) * (Fb - Fa))
        return np.clip(t, self.lo, self.hi) + self.shift

    def mean(self) -> float:
        val, _ = integrate.quad(lambda t: t * float(self.pdf(t)), *self.support, epsabs=1e-12)
        return val

    def rvs(self, n, rng):
        return self.ppf(rng.random(n))


def distribution(tag: str) -> TruncatedShifted:
    """The six study distributions, each supported on ``[-1, 3]``.

    The exponential has scale 0.5 (rate 2).
    """
    if tag == "normal":
        return TruncatedShifted(stats.norm(), -1.0, 3.0)
    if tag == "logistic":
        return TruncatedShifted(stats.logistic(), -1.0, 3.0)
    if tag == "lognormal":
        return TruncatedShifted(stats.lognorm(1.0), 0.0, 4.0, -1.0)
    if tag == "uniform":
        return TruncatedShifted(stats.uniform(-1.0, 4.0), -1.0, 3.0)
    if tag == "exponential":
        return TruncatedShifted(stats.expon(scale=0.5), 0.0, 4.0, -1.0)
    if tag == "weibull":
        return TruncatedShifted(stats.weibull_min(1.5), 0.0, 4.0, -1.0)
    raise ValueError(f"unknown distribution {tag!r}; choose from {DISTRIBUTIONS}")


# N(0, 0.25) truncated to [-1, 1]
SMALL_NORMAL = TruncatedShifted(stats.norm(0.0, 0.5), -1.0, 1.0)


def _gen(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(rng))
    return np.random.default_rng(rng)


def sample_distribution(tag: str, n: int, rng) -> np.ndarray:
    """``n`` inverse-CDF draws from the distribution named ``tag``."""
    return distribution(tag).rvs(int(n), _gen(rng))


@dataclass(frozen=True)
class SimConfig:
    case: str = "rhs"
    dist: str = "normal"
    N: int = 10_000
    R: int = 200
    S: int = 10
    M: int = 5
    L: int = 50
    beta: float = 0.5
    seed: int = 0
    threads: int = 1
    support_x: tuple = (-1.0, 3.0)
    support_y: tuple = (-2.0, 4.0)

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}")
        distribution(self.dist)
        if self.R < 1:
            raise ValueError("R must be at least 1")
        if self.N < self.S:
            raise ValueError("N must be at least S")
        object.__setattr__(self, "support_x", tuple(float(v) for v in self.support_x))
        object.__setattr__(self, "support_y", tuple(float(v) for v in self.support_y))

    @classmethod
    def from_json(cls, doc) -> "SimConfig":
        if isinstance(doc, str):
            with open(doc, encoding="utf-8") as fh:
                doc = json.load(fh)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class SimResult:
    config: SimConfig
    estimates: dict = field(default_factory=dict)
    n_failed: dict = field(default_factory=dict)

    def bias(self, method: str) -> float:
        return float(np.mean(self.estimates[method]) - self.config.beta)

    def sd(self, method: str) -> float:
        e = self.estimates[method]
        return float(np.std(e, ddof=1)) if e.size > 1 else 0.0

    def n_ok(self, method: str) -> int:
        return int(self.estimates[method].size)

    def summary(self) -> dict:
        return {
            m: {"bias": self.bias(m), "sd": self.sd(m), "replications": self.n_ok(m), "failed": self.n_failed[m]}
            for m in self.estimates
        }


def gen_dgp(config: SimConfig, rng):
    """Draw ``(y, x, truth)`` for one replication.

    For ``rhs`` the regressor follows the tagged distribution and the error
    is N(0, 0.25) truncated to [-1, 1]; otherwise the roles swap.  Error
    means are absorbed by the intercept of the estimation model.
    """
    g = _gen(rng)
    if config.case == "rhs":
        x = sample_distribution(config.dist, config.N, g)
        eps = SMALL_NORMAL.rvs(config.N, g)
    else:
        x = SMALL_NORMAL.rvs(config.N, g)
        eps = sample_distribution(config.dist, config.N, g)
    y = config.beta * x + eps
    return y, x, {"x": x, "eps": eps, "y": y}


_FAILURES = (EmptyCellError, SingularMatrixError, SchemaError, np.linalg.LinAlgError)


def _replication(config: SimConfig, r: int):
    seq = np.random.SeedSequence(config.seed, spawn_key=(r,))
    y, x, _ = gen_dgp(config, child(seq, 0))
    plan_x = build_shifting_plan(config.S, config.M, [config.support_x])
    plan_y = build_shifting_plan(config.S, config.M, [config.support_y])
    mid_x = equal_width_design([config.support_x], config.M)
    mid_y = equal_width_design([config.support_y], config.M)
    out = {}
    try:
        if config.case == "rhs":
            dx = discretize_dataset(x, plan_x, child(seq, 1))
            out["shifting"] = estimate_rhs(y, dx, rng=child(seq, 3)).beta[0]
        elif config.case == "lhs":
            dy = discretize_dataset(y, plan_y, child(seq, 2))
            out["shifting"] = estimate_lhs(dy, x, L=config.L, rng=child(seq, 3)).beta[0]
        else:
            dx = discretize_dataset(x, plan_x, child(seq, 1))
            dy = discretize_dataset(y, plan_y, child(seq, 2))
            out["shifting"] = estimate_both(dy, dx, rng=child(seq, 3)).beta[0]
    except _FAILURES:
        out["shifting"] = np.nan
    try:
        xv = discretize_dataset(x, mid_x, child(seq, 1)) if config.case != "lhs" else x
        yv = discretize_dataset(y, mid_y, child(seq, 2)) if config.case != "rhs" else y
        out["midpoint"] = midpoint_ols(yv, xv).beta[0]
    except _FAILURES:
        out["midpoint"] = np.nan
    return out


def run_mc(config: SimConfig, *, threads: int | None = None) -> SimResult:
    """Run ``config.R`` replications of the shifting and midpoint estimators.

    Failed replications are excluded and counted; more than 5% failures
    for either estimator raises :class:`SimulationAborted`.
    """
    threads = config.threads if threads is None else threads
    reps = range(config.R)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda r: _replication(config, r), reps))
    else:
        rows = [_replication(config, r) for r in reps]
    res = SimResult(config)
    for method in ("shifting", "midpoint"):
        vals = np.array([row[method] for row in rows], dtype=float)
        ok = np.isfinite(vals)
        res.n_failed[method] = int((~ok).sum())
        if res.n_failed[method] > 0.05 * config.R:
            raise SimulationAborted(
                f"{method}: {res.n_failed[method]} of {config.R} replications failed"
            )
        res.estimates[method] = vals[ok]
    return res


def format_table(results) -> str:
    """Bias with SD in parentheses; one block per case, one column per distribution."""
    by_case = {}
    for r in results:
        by_case.setdefault(r.config.case, {})[r.config.dist] = r
    titles = {
        "rhs": "Discretized explanatory variable",
        "lhs": "Discretized outcome variable",
        "both": "Both variables are discretized",
    }
    lines = []
    for case in CASES:
        if case not in by_case:
            continue
        cols = [d for d in DISTRIBUTIONS if d in by_case[case]]
        lines.append(titles[case])
        lines.append(f"{'':<10}" + "".join(f"{d:>20}" for d in cols))
        for method in ("shifting", "midpoint"):
            cells = []
            for d in cols:
                r = by_case[case][d]
                cells.append(f"{r.bias(method):.4f} ({r.sd(method):.4f})")
            lines.append(f"{method:<10}" + "".join(f"{c:>20}" for c in cells))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def write_results_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "dist", "method", "bias", "sd", "replications", "failed", "N", "S", "M", "L"])
        for r in results:
            c = r.config
            for m in r.estimates:
                w.writerow(
                    [c.case, c.dist, m, repr(r.bias(m)), repr(r.sd(m)), r.n_ok(m), r.n_failed[m], c.N, c.S, c.M, c.L]
                )


def config_dict(config: SimConfig) -> dict:
    d = asdict(config)
    d["support_x"] = list(d["support_x"])
    d["support_y"] = list(d["support_y"])
    return d
