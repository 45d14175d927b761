import numpy as np
import pytest
from scipy import stats

from splitsamp.simulate import (
    DISTRIBUTIONS,
    SMALL_NORMAL,
    SimConfig,
    distribution,
    format_table,
    gen_dgp,
    run_mc,
    sample_distribution,
    write_results_csv,
)


@pytest.mark.parametrize("tag", DISTRIBUTIONS)
def test_support(tag):
    x = sample_distribution(tag, 50_000, 0)
    assert x.min() >= -1 and x.max() <= 3
    assert distribution(tag).support == pytest.approx((-1.0, 3.0))


def test_uniform_mean():
    x = sample_distribution("uniform", 100_000, 1)
    assert abs(x.mean() - 1.0) < 3 * np.sqrt(16 / 12 / x.size)


@pytest.mark.parametrize("tag", DISTRIBUTIONS)
def test_ks_against_analytic_cdf(tag):
    d = distribution(tag)
    x = sample_distribution(tag, 100_000, 2)
    assert stats.kstest(x, d.cdf).statistic < 0.01


def test_pdf_integrates_to_one():
    from scipy import integrate

    for tag in DISTRIBUTIONS:
        d = distribution(tag)
        val, _ = integrate.quad(lambda t: float(d.pdf(t)), -1, 3, limit=200)
        assert val == pytest.approx(1, abs=1e-8)


def test_small_normal():
    e = SMALL_NORMAL.rvs(100_000, np.random.default_rng(3))
    assert e.min() >= -1 and e.max() <= 1
    assert abs(e.mean()) < 0.01


def test_unknown_distribution():
    with pytest.raises(ValueError):
        distribution("cauchy")


def test_zero_slope_gives_error_term():
    cfg = SimConfig(case="rhs", beta=0.0, N=500)
    y, x, truth = gen_dgp(cfg, 4)
    np.testing.assert_array_equal(y, truth["eps"])


def test_both_case_domain():
    cfg = SimConfig(case="both", dist="uniform", N=50_000)
    y, x, _ = gen_dgp(cfg, 5)
    assert x.min() >= -1 and x.max() <= 1
    assert y.min() >= -1.5 and y.max() <= 3.5
    assert cfg.support_y[0] <= y.min() and y.max() <= cfg.support_y[1]


def test_observed_ols_recovers_beta():
    cfg = SimConfig(case="rhs", N=10_000)
    est = []
    for r in range(200):
        y, x, _ = gen_dgp(cfg, np.random.SeedSequence(0, spawn_key=(r,)))
        est.append(np.polyfit(x, y, 1)[0])
    est = np.array(est)
    assert abs(est.mean() - 0.5) < 3 * est.std(ddof=1) / np.sqrt(len(est))


def test_reproducible_and_thread_invariant():
    cfg = SimConfig(case="lhs", dist="logistic", N=2000, R=8, seed=11)
    a = run_mc(cfg)
    b = run_mc(cfg)
    c = run_mc(cfg, threads=4)
    for m in ("shifting", "midpoint"):
        np.testing.assert_array_equal(a.estimates[m], b.estimates[m])
        np.testing.assert_array_equal(a.estimates[m], c.estimates[m])


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(case="middle")
    with pytest.raises(ValueError):
        SimConfig.from_json({"case": "rhs", "bogus": 1})
    assert SimConfig.from_json({"case": "both", "R": 3}).R == 3


def test_table_and_csv(tmp_path):
    res = [run_mc(SimConfig(case=c, N=1000, R=3)) for c in ("rhs", "lhs")]
    text = format_table(res)
    assert "shifting" in text and "midpoint" in text
    path = tmp_path / "t.csv"
    write_results_csv(res, path)
    rows = path.read_text().splitlines()
    assert rows[0].startswith("case,dist,method,bias,sd")
    assert len(rows) == 1 + 4
