import numpy as np
import pytest

from splitsamp import SplitDesign, build_shifting_plan
from splitsamp.errors import OutOfSupport, SchemaError
from splitsamp.mechanism import (
    assign_splits,
    discretize_dataset,
    discretize_value,
    read_dataset_csv,
    truncate_unbounded,
    write_dataset_csv,
)
from splitsamp.simulate import distribution


def three_piece(n, rng):
    """Density 0.5 on [0,1), 0.3 on [1,2), 0.1 on [2,4]."""
    piece = rng.choice(3, size=n, p=[0.5, 0.3, 0.2])
    lo = np.array([0.0, 1.0, 2.0])[piece]
    w = np.array([1.0, 1.0, 2.0])[piece]
    return lo + w * rng.random(n)


def test_single_split():
    assert np.all(assign_splits(50, 1, 0) == 1)


def test_split_shares():
    s = assign_splits(100_000, 4, 7)
    shares = np.bincount(s, minlength=5)[1:] / s.size
    np.testing.assert_allclose(shares, 0.25, atol=0.01)
    assert np.all(np.abs(shares - 0.25) < 4 * np.sqrt(4 / s.size))


def test_ten_splits_non_empty():
    s = assign_splits(10_000, 10, 3)
    assert set(np.unique(s)) == set(range(1, 11))


def test_balanced_assignment():
    s = assign_splits(103, 4, 1, balanced=True)
    counts = np.bincount(s)[1:]
    assert counts.max() - counts.min() <= 1


def test_half_open_cells(plan44):
    assert discretize_value(2.5, plan44, 2).m == (3,)
    assert discretize_value(6.0, plan44, 1).m == (4,)
    assert discretize_value(0.1, plan44, 4).m == (1,)
    with pytest.raises(OutOfSupport):
        discretize_value(6.01, plan44, 1)


def test_first_split_never_reports_first_interval(plan44):
    z = np.linspace(0, 6, 1001)
    for s in (1,):
        m = [discretize_value(v, plan44, s).m[0] for v in z]
        assert 1 not in m


def test_figure_one_shares():
    rng = np.random.default_rng(2)
    design = SplitDesign.from_schemes([[0, 2, 4], [0, 1, 4]])
    z = three_piece(200_000, rng)
    ds = discretize_dataset(z, design, 11)
    for s, want in ((1, [0.8, 0.2]), (2, [0.5, 0.5])):
        m = ds.m[ds.s == s, 0]
        shares = np.bincount(m, minlength=3)[1:] / m.size
        se = np.sqrt(0.25 / m.size)
        np.testing.assert_allclose(shares, want, atol=4 * se)


def test_study_plan_population():
    plan = build_shifting_plan(10, 5, [(-1, 3)])
    dist = distribution("normal")
    z = dist.rvs(10_000, np.random.default_rng(0))
    ds = discretize_dataset(z, plan, 5, keep_truth=True)
    assert len(ds) == 10_000
    # truth lies in the reported interval
    lo, hi = ds.cover(0)
    edges = plan.axes[0].edges
    assert np.all(edges[lo] <= ds.truth[:, 0])
    assert np.all(ds.truth[:, 0] <= edges[hi])
    counts = np.zeros((11, 6), dtype=int)
    np.add.at(counts, (ds.s, ds.m[:, 0]), 1)
    assert counts.sum() == 10_000
    assert counts[1, 1] == 0
    # every interval with a non-negligible expected count is populated
    for s in range(1, 11):
        c = plan.axes[0].boundaries(s)
        expected = 1000 * np.diff(dist.cdf(c))
        for m in range(1, 6):
            if expected[m - 1] >= 5:
                assert counts[s, m] > 0


def test_empty_input(plan44):
    ds = discretize_dataset(np.empty(0), plan44, 0)
    assert len(ds) == 0


def test_bivariate_product_consistency():
    plan = build_shifting_plan(4, 4, [(0, 6), (0, 6)])
    uni = build_shifting_plan(4, 4, [(0, 6)])
    rng = np.random.default_rng(4)
    z = rng.uniform(0, 6, size=(500, 2))
    ds = discretize_dataset(z, plan, 9)
    for i in range(len(ds)):
        s = int(ds.s[i])
        for p in range(2):
            assert ds.m[i, p] == discretize_value(z[i, p], uni, s).m[0]


def test_truncation_drops_boundary_records(plan44):
    z = np.array([0.1, 3.0, 5.9])
    ds = discretize_dataset(z, plan44, 0, truncate=True, keep_truth=True)
    M = plan44.M
    assert np.all((ds.m[:, 0] > 1) & (ds.m[:, 0] < M))
    # 3.0 is interior for every split; 0.1 only for s=1, whose first interval is empty
    assert 3.0 in ds.truth[:, 0]
    for seed in range(20):
        full = discretize_dataset(np.array([0.1, 3.0]), plan44, seed)
        kept = truncate_unbounded(full)
        assert (0 in kept.record_id) == (full.s[0] == 1)
        assert 1 in kept.record_id


def test_truncation_keeps_inner_support():
    plan = build_shifting_plan(10, 5, [(-3, 3)])
    z = np.random.default_rng(1).standard_normal(20_000)
    ds = discretize_dataset(z, plan, 3, truncate=True, keep_truth=True)
    assert ds.n_truncated > 0
    for s in range(1, 11):
        c = plan.axes[0].boundaries(s)
        t = ds.truth[ds.s == s, 0]
        assert np.all((t >= c[1]) & (t < c[-2]))


def test_out_of_support_without_truncation(plan44):
    with pytest.raises(OutOfSupport) as err:
        discretize_dataset(np.array([1.0, 7.0]), plan44, 0)
    assert err.value.row == 1


def test_csv_round_trip_and_determinism(tmp_path, plan44):
    z = np.random.default_rng(0).uniform(0, 6, 300)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_dataset_csv(discretize_dataset(z, plan44, 8, covariates={"age": np.arange(300)}), a)
    write_dataset_csv(discretize_dataset(z, plan44, 8, covariates={"age": np.arange(300)}), b)
    assert a.read_bytes() == b.read_bytes()
    back = read_dataset_csv(a, plan44)
    assert len(back) == 300
    assert "age" in back.covariates


def test_csv_refuses_sensitive(tmp_path, plan44):
    z = np.array([1.0, 2.0])
    ds = discretize_dataset(z, plan44, 0, covariates={"wage": z}, sensitive_names=["wage"])
    with pytest.raises(SchemaError):
        write_dataset_csv(ds, tmp_path / "x.csv")


def test_csv_rejects_bad_rows(tmp_path, plan44):
    path = tmp_path / "bad.csv"
    path.write_text("record_id,s,m_1,v_1\n0,2,3,3.5\n1,1,1,0.0\n")
    with pytest.raises(SchemaError) as err:
        read_dataset_csv(path, plan44)
    assert "2" in str(err.value) or err.value.row is not None
