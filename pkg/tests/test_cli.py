import csv
import json

import numpy as np
import pytest

from splitsamp.cli import main


@pytest.fixture(autouse=True)
def no_env_seed(monkeypatch):
    monkeypatch.delenv("SPLITSAMP_SEED", raising=False)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def survey(tmp_path):
    rng = np.random.default_rng(0)
    n = 1000
    x = rng.uniform(-1, 3, n)
    y = 1 + 0.5 * x + rng.normal(0, 0.2, n)
    path = tmp_path / "survey.csv"
    write_csv(path, ["id", "x", "y", "age"], [[i, repr(float(a)), repr(float(b)), 20 + i % 40] for i, (a, b) in enumerate(zip(x, y))])
    return path


def test_plan(tmp_path, capsys):
    out = tmp_path / "p.json"
    assert main(["plan", "--S", "4", "--M", "4", "--support", "0,6", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "h = 0.5" in text and "B = 12" in text
    assert json.loads(out.read_text())["S"] == 4


def test_plan_negative_support(tmp_path, capsys):
    out = tmp_path / "p.json"
    assert main(["plan", "--S", "10", "--M", "5", "--support", "-1,3", "--out", str(out)]) == 0
    assert "h = 0.1" in capsys.readouterr().out


def test_plan_single_split(tmp_path):
    assert main(["plan", "--S", "1", "--M", "3", "--support", "0,6", "--out", str(tmp_path / "p.json")]) == 0


def test_plan_invalid(tmp_path):
    assert main(["plan", "--S", "0", "--M", "4", "--support", "0,6", "--out", str(tmp_path / "p.json")]) == 1
    assert main(["plan", "--S", "4"]) == 1


def test_round_trip(tmp_path, survey):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "10", "--M", "5", "--support", "-1,3", "--out", str(plan)])
    disc = tmp_path / "d.csv"
    assert main(["discretize", "--plan", str(plan), "--input", str(survey), "--columns", "x",
                 "--id", "id", "--out", str(disc), "--seed", "1"]) == 0
    rows = read_csv(disc)
    assert len(rows) == 1000
    assert "x" not in rows[0] and {"y", "age", "s", "m_1", "v_1"} <= set(rows[0])
    syn = tmp_path / "syn.csv"
    assert main(["reconstruct", "--plan", str(plan), "--input", str(disc), "--out", str(syn), "--seed", "2"]) == 0
    z = np.array([float(r["zdagger_1"]) for r in read_csv(syn)])
    b = np.array([int(r["b_1"]) for r in read_csv(syn)])
    assert z.min() >= -1 and z.max() <= 3
    assert b.min() >= 1 and b.max() <= 40
    e = tmp_path / "ecdf.csv"
    assert main(["ecdf", "--input", str(syn), "--out", str(e)]) == 0
    assert float(read_csv(e)[-1]["F"]) == 1.0
    res = tmp_path / "res.json"
    assert main(["estimate", "--case", "rhs", "--plan", str(plan), "--input", str(disc), "--y", "y",
                 "--format", "json", "--out", str(res), "--seed", "3"]) == 0
    doc = json.loads(res.read_text())
    assert doc["coefficients"][0]["term"] == "x1"
    assert doc["coefficients"][0]["coef"] == pytest.approx(0.5, abs=0.05)


def test_identical_invocations_are_byte_identical(tmp_path, survey):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "10", "--M", "5", "--support", "-1,3", "--out", str(plan)])
    outs = []
    for k in range(2):
        d, s = tmp_path / f"d{k}.csv", tmp_path / f"s{k}.csv"
        main(["discretize", "--plan", str(plan), "--input", str(survey), "--columns", "x", "--out", str(d), "--seed", "5"])
        main(["reconstruct", "--plan", str(plan), "--input", str(d), "--out", str(s), "--seed", "6"])
        outs.append((d.read_bytes(), s.read_bytes()))
    assert outs[0] == outs[1]


def test_seed_required(tmp_path, survey, monkeypatch, capsys):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "4", "--M", "4", "--support", "-1,3", "--out", str(plan)])
    args = ["discretize", "--plan", str(plan), "--input", str(survey), "--columns", "x", "--out", str(tmp_path / "d.csv")]
    assert main(args) == 1
    assert "seed" in capsys.readouterr().err
    monkeypatch.setenv("SPLITSAMP_SEED", "9")
    assert main(args) == 0


def test_missing_column(tmp_path, survey, capsys):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "4", "--M", "4", "--support", "-1,3", "--out", str(plan)])
    code = main(["discretize", "--plan", str(plan), "--input", str(survey), "--columns", "wage",
                 "--out", str(tmp_path / "d.csv"), "--seed", "1"])
    assert code == 2
    assert "wage" in capsys.readouterr().err


def test_out_of_support_reports_row(tmp_path, capsys):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "4", "--M", "4", "--support", "0,6", "--out", str(plan)])
    data = tmp_path / "d.csv"
    write_csv(data, ["x"], [[1.0], [2.0], [9.0]])
    code = main(["discretize", "--plan", str(plan), "--input", str(data), "--columns", "x",
                 "--out", str(tmp_path / "o.csv"), "--seed", "1"])
    assert code == 2
    assert "9.0" in capsys.readouterr().err


def test_privacy_single_interval(tmp_path, capsys):
    plan = tmp_path / "p.json"
    plan.write_text(json.dumps({"S": 10, "M": 1, "support": [[0, 1]]}))
    assert main(["privacy", "--plan", str(plan), "--grid", "1000"]) == 0
    out = capsys.readouterr().out
    assert "epsilon: 0" in out and "delta: 0" in out


def test_privacy_csv(tmp_path):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "4", "--M", "4", "--support", "0,6", "--out", str(plan)])
    out = tmp_path / "pb.csv"
    assert main(["privacy", "--plan", str(plan), "--grid", "50", "--csv-out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 50
    assert sum(float(v) for k, v in rows[7].items() if k != "z") == pytest.approx(1, abs=1e-12)


def test_estimate_lhs_and_naive(tmp_path, survey):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "10", "--M", "5", "--support", "-2,4", "--out", str(plan)])
    d = tmp_path / "d.csv"
    main(["discretize", "--plan", str(plan), "--input", str(survey), "--columns", "y", "--out", str(d), "--seed", "1"])
    out = tmp_path / "r.csv"
    assert main(["estimate", "--case", "lhs", "--plan", str(plan), "--input", str(d), "--x", "x", "--L", "10",
                 "--format", "csv", "--out", str(out), "--seed", "2", "--cov-out", str(tmp_path / "cov.csv")]) == 0
    assert read_csv(out)[0]["term"] == "x1"
    assert main(["estimate", "--case", "naive", "--plan", str(plan), "--input", str(d), "--x", "x",
                 "--out", str(tmp_path / "n.txt")]) == 0


def test_estimate_missing_flags(tmp_path, survey):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "4", "--M", "4", "--support", "-1,3", "--out", str(plan)])
    d = tmp_path / "d.csv"
    main(["discretize", "--plan", str(plan), "--input", str(survey), "--columns", "x", "--out", str(d), "--seed", "1"])
    assert main(["estimate", "--case", "rhs", "--plan", str(plan), "--input", str(d), "--seed", "1"]) == 1


def test_singular_is_numeric_exit(tmp_path, capsys):
    plan = tmp_path / "p.json"
    main(["plan", "--S", "4", "--M", "4", "--support", "0,6", "--out", str(plan)])
    data = tmp_path / "raw.csv"
    # a constant regressor is collinear with the intercept
    write_csv(data, ["y", "c"], [[0.1 + 0.05 * i, 1.0] for i in range(100)])
    d = tmp_path / "d.csv"
    main(["discretize", "--plan", str(plan), "--input", str(data), "--columns", "y", "--out", str(d), "--seed", "1"])
    code = main(["estimate", "--case", "lhs", "--plan", str(plan), "--input", str(d), "--x", "c", "--seed", "2",
                 "--out", str(tmp_path / "o.txt")])
    assert code == 3
    assert "collinear" in capsys.readouterr().err


def test_simulate(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps([{"case": "rhs", "dist": "normal", "N": 1000, "R": 4, "seed": 3}]))
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["simulate", "--config", str(cfg), "--out", str(a), "--csv-out", str(tmp_path / "a.csv")]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "Discretized explanatory variable" in a.read_text()


def test_simulate_without_seed(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"case": "rhs", "N": 1000, "R": 2}))
    assert main(["simulate", "--config", str(cfg)]) == 1
    assert main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o.txt")]) == 0
