"""Command-line interface.

Provider side: ``plan``, ``discretize``, ``privacy``.  Analyst side:
``reconstruct``, ``estimate``, ``ecdf``.  ``simulate`` runs the Monte Carlo
study.  Exit codes: 0 success, 1 usage, 2 data or schema error, 3
numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import EmptyCellError, OutOfSupport, PlanError, SchemaError, SingularMatrixError

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SPLITSAMP_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SPLITSAMP_SEED must be an integer, got {env!r}") from None
    raise UsageError("this subcommand is randomized: pass --seed or set SPLITSAMP_SEED")


def _support(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"support must be 'lower,upper', got {text!r}") from None
    return [a, b]


def _read_table(path):
    """Header plus string columns from a comma-separated UTF-8 file."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        rows = list(reader)
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}: wrong number of fields", row=i)
    return header, {h: [r[j] for r in rows] for j, h in enumerate(header)}


def _numeric(cols, name, path):
    if name not in cols:
        raise SchemaError(f"{path}: missing column {name!r}")
    out = np.empty(len(cols[name]))
    for i, v in enumerate(cols[name]):
        try:
            out[i] = float(v)
        except ValueError:
            raise SchemaError(f"{path}: non-numeric value {v!r} in column {name!r}", row=i + 2) from None
    return out


def _matrix(cols, names, path):
    return np.column_stack([_numeric(cols, n, path) for n in names]) if names else None


def _load_plan(path):
    from .scheme import load_plan

    try:
        return load_plan(path)
    except OSError as exc:
        raise UsageError(f"cannot read plan {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"plan {path} is not valid JSON: {exc.msg}") from None


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_plan(args):
    from .scheme import build_shifting_plan, save_plan

    plan = build_shifting_plan(args.S, args.M, args.support, args.representatives)
    save_plan(plan, args.out)
    h = ", ".join(f"{v:.10g}" for v in plan.h)
    print(f"h = {h}\nB = {plan.B}\nplan written to {args.out}")


def cmd_discretize(args):
    from .mechanism import discretize_dataset, write_dataset_csv

    plan = _load_plan(args.plan)
    seed = _seed(args)
    header, cols = _read_table(args.input)
    sensitive = args.columns
    if len(sensitive) != plan.dim:
        raise SchemaError(f"plan has {plan.dim} dimension(s) but {len(sensitive)} sensitive column(s) given")
    z = _matrix(cols, sensitive, args.input)
    ids = _numeric(cols, args.id, args.input).astype(np.int64) if args.id else None
    keep = [h for h in header if h not in sensitive and h != args.id]
    covs = {}
    for h in keep:
        try:
            covs[h] = np.array([float(v) for v in cols[h]])
        except ValueError:
            covs[h] = np.array(cols[h], dtype=object)
    ds = discretize_dataset(
        z, plan, seed, covariates=covs, record_ids=ids, truncate=args.truncate,
        balanced=args.balanced, threads=args.threads, sensitive_names=sensitive,
    )
    write_dataset_csv(ds, args.out)
    msg = f"{len(ds)} records written to {args.out}"
    if args.truncate:
        msg += f" ({ds.n_truncated} truncated)"
    print(msg)


def cmd_reconstruct(args):
    from .mechanism import read_dataset_csv
    from .reconstruct import synthesize, write_synthetic_csv

    plan = _load_plan(args.plan)
    ds = read_dataset_csv(args.input, plan)
    syn = synthesize(ds, _seed(args), threads=args.threads)
    write_synthetic_csv(syn, args.out)
    print(f"{len(syn)} synthetic records written to {args.out}")


def cmd_ecdf(args):
    from .reconstruct import ecdf, write_ecdf_csv

    _, cols = _read_table(args.input)
    vals = _numeric(cols, f"zdagger_{args.dim}", args.input)
    if vals.size == 0:
        raise SchemaError(f"{args.input}: no records")
    write_ecdf_csv(ecdf(vals), args.out)
    print(f"ECDF with {np.unique(vals).size} steps written to {args.out}")


def _result_output(res, args):
    if args.format == "json":
        doc = {
            "case": res.case,
            "N": res.n,
            "sigma2": res.sigma2,
            "coefficients": [
                {"term": n, "coef": float(b), "se": float(s), "t": float(t)} for n, b, s, t in res.rows()
            ],
            "diagnostics": res.diagnostics,
        }
        return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
    if args.format == "csv":
        lines = ["term,coef,se,t,case,N"]
        for n, b, s, t in res.rows():
            lines.append(f"{n},{float(b)!r},{float(s)!r},{float(t)!r},{res.case},{res.n}")
        return "\n".join(lines) + "\n"
    return res.summary() + "\n"


def cmd_estimate(args):
    from .estimate import PartitionPlan, estimate_both, estimate_lhs, estimate_rhs, midpoint_ols
    from .mechanism import read_dataset_csv

    plan = _load_plan(args.plan)
    ds = read_dataset_csv(args.input, plan)
    cov = ds.covariates
    path = args.input

    def matrix(names):
        for n in names or []:
            if n not in cov:
                raise SchemaError(f"{path}: missing column {n!r}")
        return None if not names else np.column_stack([np.asarray(cov[n], dtype=float) for n in names])

    if args.case == "naive":
        y = matrix([args.y])[:, 0] if args.y else ds
        X = matrix(args.x) if args.x else ds
        res = midpoint_ols(y, X, matrix(args.w))
    elif args.case == "rhs":
        if not args.y:
            raise UsageError("--y is required for the rhs case")
        res = estimate_rhs(matrix([args.y])[:, 0], ds, matrix(args.w), rng=_seed(args), threads=args.threads)
    elif args.case == "lhs":
        if not args.x:
            raise UsageError("--x is required for the lhs case")
        X = matrix(args.x)
        res = estimate_lhs(ds, X, rng=_seed(args), partition=PartitionPlan.equal_width(X, args.L), threads=args.threads)
    else:
        if not (args.input_x and args.plan_x):
            raise UsageError("the both case needs --input-x and --plan-x")
        dx = read_dataset_csv(args.input_x, _load_plan(args.plan_x))
        W = matrix(args.w)
        part = PartitionPlan.equal_width(W, args.L) if W is not None else None
        res = estimate_both(ds, dx, W, rng=_seed(args), partition_w=part, threads=args.threads)
    _write_text(args.out, _result_output(res, args))
    if args.cov_out:
        with open(args.cov_out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + res.names)
            for n, row in zip(res.names, res.cov):
                w.writerow([n] + [repr(float(v)) for v in row])


def cmd_privacy(args):
    from .privacy import assignment_distribution, epsilon_delta

    plan = _load_plan(args.plan)
    values = None
    if args.values:
        if not args.column:
            raise UsageError("--values needs --column")
        _, cols = _read_table(args.values)
        values = _numeric(cols, args.column, args.values)
    rep = epsilon_delta(plan, values, grid=args.grid, dim=args.dim - 1)
    print(rep.summary())
    if args.csv_out:
        ax = plan.axes[args.dim - 1]
        grid = np.linspace(ax.edges[0], ax.edges[-1], args.grid) if values is None else np.unique(values)
        P = assignment_distribution(plan, grid, args.dim - 1)
        with open(args.csv_out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["z"] + [f"p_{b + 1}" for b in range(P.shape[1])])
            for z, row in zip(grid, P):
                w.writerow([repr(float(z))] + [repr(float(p)) for p in row])


def cmd_simulate(args):
    from .simulate import SimConfig, format_table, run_mc, write_results_csv

    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{args.config} is not valid JSON: {exc.msg}") from None
    runs = doc if isinstance(doc, list) else [doc]
    if args.seed is not None or os.environ.get("SPLITSAMP_SEED") or not all("seed" in r for r in runs):
        seed = _seed(args)
        runs = [dict(r, seed=seed) for r in runs]
    try:
        configs = [SimConfig.from_json(dict(r, threads=args.threads)) for r in runs]
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{args.config}: {exc}") from None
    results = [run_mc(c) for c in configs]
    _write_text(args.out, format_table(results))
    if args.csv_out:
        write_results_csv(results, args.csv_out)
    if args.dump:
        with open(args.dump, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "dist", "method", "replication", "beta_hat"])
            for r in results:
                for m, est in r.estimates.items():
                    for i, b in enumerate(est):
                        w.writerow([r.config.case, r.config.dist, m, i, repr(float(b))])


# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="splitsamp", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seeded(sp):
        sp.add_argument("--seed", type=int, help="master seed (falls back to SPLITSAMP_SEED)")
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("plan", help="write a shifting plan")
    sp.add_argument("--S", type=int, required=True)
    sp.add_argument("--M", type=int, required=True)
    sp.add_argument("--support", type=_support, action="append", required=True,
                    help="lower,upper; repeat once per sensitive dimension")
    sp.add_argument("--representatives", choices=["midpoint", "left"], default="midpoint")
    sp.add_argument("--out", default="plan.json")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("discretize", help="assign splits and discretize sensitive columns")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--columns", nargs="+", required=True, help="sensitive columns, one per plan dimension")
    sp.add_argument("--id", help="record id column (default: row number)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--truncate", action="store_true", help="drop records in boundary intervals")
    sp.add_argument("--balanced", action="store_true", help="equal split sizes instead of i.i.d. assignment")
    seeded(sp)
    sp.set_defaults(func=cmd_discretize)

    sp = sub.add_parser("reconstruct", help="draw the synthetic variable")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    seeded(sp)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("ecdf", help="empirical CDF of a synthetic sample")
    sp.add_argument("--input", required=True, help="output of reconstruct")
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ecdf)

    sp = sub.add_parser("estimate", help="OLS with discretized variables")
    sp.add_argument("--case", choices=["rhs", "lhs", "both", "naive"], required=True)
    sp.add_argument("--plan", required=True, help="plan of the discretized file given by --input")
    sp.add_argument("--input", required=True, help="discretized file (regressor for rhs, outcome otherwise)")
    sp.add_argument("--input-x", help="discretized regressor file (both case)")
    sp.add_argument("--plan-x", help="plan of --input-x")
    sp.add_argument("--y", help="outcome column (rhs, naive)")
    sp.add_argument("--x", nargs="+", help="observed regressor columns (lhs, naive)")
    sp.add_argument("--w", nargs="+", help="control columns")
    sp.add_argument("--L", type=int, default=50, help="equal-width partitions per column")
    sp.add_argument("--format", choices=["text", "csv", "json"], default="text")
    sp.add_argument("--out", help="result file (default: stdout)")
    sp.add_argument("--cov-out", help="write the coefficient covariance as CSV")
    seeded(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("privacy", help="realised epsilon and delta of a plan")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--grid", type=int, default=1000)
    sp.add_argument("--values", help="CSV of evaluation values instead of the grid")
    sp.add_argument("--column")
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--csv-out", help="write p_b(z) over the evaluation set")
    sp.set_defaults(func=cmd_privacy)

    sp = sub.add_parser("simulate", help="Monte Carlo bias study")
    sp.add_argument("--config", required=True, help="JSON object or list of objects")
    sp.add_argument("--out", help="table file (default: stdout)")
    sp.add_argument("--csv-out")
    sp.add_argument("--dump", help="per-replication estimates as CSV")
    seeded(sp)
    sp.set_defaults(func=cmd_simulate)
    return p


def _glue_negative(argv):
    """Let ``--support -1,3`` through: argparse would read ``-1,3`` as an option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--support":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_glue_negative(sys.argv[1:] if argv is None else list(argv)))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        args.func(args)
    except (UsageError, PlanError) as exc:
        print(f"splitsamp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, OutOfSupport, EmptyCellError) as exc:
        print(f"splitsamp {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularMatrixError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"splitsamp {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
