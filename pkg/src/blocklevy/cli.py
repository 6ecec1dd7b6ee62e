"""``blocklevy`` command line.

Subcommands: ``run`` (config file), ``simulate``, ``flow``, ``sweep``,
``check-cov`` and ``eval``. Exit status is 0 when every requested check
passes, 1 when a check fails (a JSON summary goes to stderr) and 2 on usage
or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .drivers import DriverKind, covariation_check, drift_rate
from .experiment import ConfigError, ExperimentSpec, csv_rows, load_config, run_experiment, write_csv
from .group_sde import PathBlowUp, Scheme, default_steps, integrate_paths
from .hyperlinalg import BlockMatrix, symplectic_defect, unitarity_defect
from .moment_flow import DEFAULT_CAP, ClosureCapExceeded, SolverDisagreement, build_system, solve_moments_report
from .montecarlo import worker_count
from .tables import TableSyntaxError, evaluate, format_table, parse_table


def _fail(summary: dict) -> int:
    print(json.dumps({"status": "fail", **summary}, sort_keys=True), file=sys.stderr)
    return 1


def _ints(text: str):
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_run(args) -> int:
    spec = load_config(args.config)
    res = run_experiment(spec, args.output, args.workers)
    print(f"wrote {len(res.rows)} rows to {res.csv_path} and metadata to {res.json_path}")
    return 0


def cmd_simulate(args) -> int:
    kind = DriverKind.parse(args.kind)
    steps = args.steps or default_steps(args.t)
    batch = integrate_paths(kind, args.n, args.m, args.t, steps, args.scheme, args.seed, 0, args.nsamples)
    defect = unitarity_defect(batch.final, kind.field)
    print(f"kind={kind.value} n={args.n} m={args.m} t={args.t} steps={steps} scheme={Scheme.parse(args.scheme).value}")
    print(f"drift rate p = {drift_rate(kind, args.n, args.m)}")
    print(f"|GG* - I|_F  max {defect.max():.3e}  mean {defect.mean():.3e}")
    worst = float(defect.max())
    if kind is DriverKind.SP:
        sdef = symplectic_defect(batch.final)
        print(f"|eta(G)^t J eta(G) - J|_F  max {sdef.max():.3e}")
        worst = max(worst, float(sdef.max()))
    if args.tol is not None and worst > args.tol:
        return _fail({"check": "group defect", "defect": worst, "tol": args.tol})
    return 0


def cmd_flow(args) -> int:
    tables = [parse_table(s, args.n) for s in args.table]
    system = build_system(tables, args.n, cap=args.cap)
    print(f"basis ({system.dimension} tables, bound per order "
          + ", ".join(f"{o}: {b}" for o, b in sorted(system.bounds.items())) + ")")
    if args.verbose:
        for k, tab in enumerate(system.basis):
            print(f"  [{k}] {format_table(tab)}")
    for t in args.t:
        rep = solve_moments_report(system, t)
        for tab in tables:
            print(f"t={t!r} {format_table(tab)} {float(rep.values[system.index(tab)])!r}")
    if args.dump:
        with open(args.dump, "w", encoding="utf-8") as fh:
            fh.write(system.to_text())
    return 0


def cmd_sweep(args) -> int:
    spec = ExperimentSpec(kinds=args.kinds.split(","), n=args.n, m_list=_ints(args.m), t_list=[args.t],
                          tables=args.table, nsamples=args.nsamples, seed=args.seed, steps=args.steps,
                          scheme=args.scheme)
    rows, _ = csv_rows(spec, args.workers)
    text = write_csv(rows, args.output)
    if args.output is None:
        sys.stdout.write(text)
    return 0


def cmd_check_cov(args) -> int:
    kinds = [DriverKind.parse(k) for k in args.kind.split(",")]
    failures = []
    for kind in kinds:
        for c in covariation_check(kind, args.n, args.m, args.nsamples, args.dt, args.seed):
            flag = "ok" if c.passed else "FAIL"
            print(f"{kind.value} {c.indices} rate={c.rate} empirical={c.estimate:.5f} "
                  f"stderr={c.stderr:.5f} imag_z={c.residual:.2f} {flag}")
            if not c.passed:
                failures.append({"kind": kind.value, "indices": list(c.indices), "rate": str(c.rate),
                                 "empirical": c.estimate, "stderr": c.stderr})
    if failures:
        return _fail({"check": "covariation", "failures": failures})
    return 0


def cmd_eval(args) -> int:
    table = parse_table(args.table, args.n)
    kind = DriverKind.parse(args.kind)
    if args.t == 0:
        g = BlockMatrix.identity(kind.field, args.n, args.m)
    else:
        steps = args.steps or default_steps(args.t)
        batch = integrate_paths(kind, args.n, args.m, args.t, steps, args.scheme, args.seed, args.sample, 1)
        g = BlockMatrix(kind.field, args.n, args.m, batch.final[0])
    print(repr(evaluate(table, g)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blocklevy", description="Block Brownian motions and their limit moment flow.")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_args(sp, nsamples=1):
        sp.add_argument("--kind", default="so", help="so, u or sp")
        sp.add_argument("--n", type=int, default=1)
        sp.add_argument("--m", type=int, default=4)
        sp.add_argument("--t", type=float, default=1.0)
        sp.add_argument("--steps", type=int, default=None, help="default ceil(100 t)")
        sp.add_argument("--scheme", default="geometric", help="geometric or euler")
        sp.add_argument("--seed", type=int, default=0)
        if nsamples:
            sp.add_argument("--nsamples", type=int, default=nsamples)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--output", default=None, help="CSV path, overrides the config")
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("simulate", help="integrate paths and report the group defect")
    sim_args(s, nsamples=10)
    s.add_argument("--tol", type=float, default=None, help="fail if the defect exceeds this")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("flow", help="limit moments exp(B0 t) v0")
    f.add_argument("--n", type=int, default=1)
    f.add_argument("--table", action="append", required=True)
    f.add_argument("--t", type=float, action="append", required=True)
    f.add_argument("--cap", type=int, default=DEFAULT_CAP)
    f.add_argument("--dump", default=None, help="write basis and B0 triplets to this file")
    f.add_argument("-v", "--verbose", action="store_true", help="list the basis")
    f.set_defaults(func=cmd_flow)

    w = sub.add_parser("sweep", help="Monte Carlo against the limit over several m")
    w.add_argument("--kinds", default="so,sp,u")
    w.add_argument("--n", type=int, default=2)
    w.add_argument("--m", default="4,16,32", help="comma separated")
    w.add_argument("--t", type=float, default=1.0)
    w.add_argument("--table", action="append", required=True)
    w.add_argument("--nsamples", type=int, default=500)
    w.add_argument("--steps", type=int, default=None)
    w.add_argument("--scheme", default="geometric")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--workers", type=int, default=None)
    w.add_argument("--output", default=None, help="CSV path (default stdout)")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check-cov", help="empirical increment covariations against the exact rates")
    c.add_argument("--kind", default="so,u,sp")
    c.add_argument("--n", type=int, default=1)
    c.add_argument("--m", type=int, default=4)
    c.add_argument("--nsamples", type=int, default=100_000)
    c.add_argument("--dt", type=float, default=0.01)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check_cov)

    e = sub.add_parser("eval", help="evaluate a table on the identity (t = 0) or on a sampled path")
    sim_args(e, nsamples=0)
    e.set_defaults(t=0.0)
    e.add_argument("--table", required=True)
    e.add_argument("--sample", type=int, default=0)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        worker_count(getattr(args, "workers", None))
        return args.func(args)
    except (ConfigError, TableSyntaxError, ClosureCapExceeded, SolverDisagreement, PathBlowUp, ValueError,
            IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
