"""Command-line entry point: ``bregvopt {solve,merit,batch,oracle}``.

Exit codes: 0 when every certificate passes, 2 when a run finished but a
certificate failed (or a batch row failed), 1 on hard errors.
"""
import argparse
import json
import sys

import numpy as np

from ..errors import BregVOptError, ParseError
from ..merit import merit_report
from ..problems import get_problem
from ..subproblem import DualOptions, brute_force_subproblem, solve_dual
from .batch import (
    EXIT_ERROR,
    batch_exit_code,
    csv_text,
    dump_json,
    execute,
    run_batch,
    summary_csv,
    write_outputs,
)
from .config import config_from_dict


def _floats(values):
    return [float(v) for v in values]


def _solve_config(args):
    text = None
    data = {}
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, None) from exc
    if args.problem is not None:
        data["problem"] = args.problem
    if args.x0 is not None:
        data["x0"] = _floats(args.x0)
    if args.ell is not None:
        data["ell"] = args.ell
    for key, val in (("merit_tol", args.merit_tol), ("max_iters", args.max_iters)):
        if val is not None:
            data.setdefault("stop", {})[key] = val
    for key, val in (("dual_gap_tol", args.dual_gap_tol), ("dual_max_iters", args.dual_max_iters)):
        if val is not None:
            data.setdefault("subproblem", {})[key] = val
    for key, val in (("csv_path", args.csv), ("json_path", args.json)):
        if val is not None:
            data.setdefault("output", {})[key] = val
    if args.certificates is not None:
        data["certificates"] = [c for c in args.certificates.split(",") if c]
    if args.seed is not None:
        data["seed"] = args.seed
    if args.timing:
        data["timing"] = True
    if args.kernel is not None:
        data["kernel"] = json.loads(args.kernel)
    if args.cone is not None:
        data["cone"] = json.loads(args.cone)
    return config_from_dict(data, text)


def cmd_solve(args):
    cfg = _solve_config(args)
    outcome = execute(cfg)
    write_outputs(outcome)
    if not cfg.output.get("json_path"):
        print(dump_json(outcome.to_dict()))
    if args.csv_stdout:
        sys.stdout.write(csv_text(outcome.report))
    for name, cert in outcome.certificates.items():
        print(f"{name}: {cert.status}", file=sys.stderr)
    return outcome.exit_code


def cmd_merit(args):
    prob = get_problem(args.problem)
    opts = DualOptions(dual_gap_tol=args.dual_gap_tol)
    rep = merit_report(prob, _floats(args.x), ells=args.ell, with_u0=not args.no_u0, opts=opts)
    print(dump_json(rep.to_dict()))
    tol = 1e-6 * (1 + (rep.u0 or 0.0))
    return 2 if any(v < -tol for v in rep.relation_slacks.values()) else 0


def cmd_batch(args):
    with open(args.file) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, None) from exc
    if isinstance(data, dict) and "runs" in data:
        data = data["runs"]
    if not isinstance(data, list):
        raise ParseError("batch file must hold a list of configs or {\"runs\": [...]}")
    rows = run_batch(data, workers=args.threads)
    table = summary_csv(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    return batch_exit_code(rows)


def cmd_oracle(args):
    prob = get_problem(args.problem)
    x = np.asarray(_floats(args.x))
    out = {"problem": prob.name, "x": x.tolist()}
    if args.what == "subproblem":
        ell = args.ell if args.ell is not None else prob.L
        if ell is None:
            raise BregVOptError("--ell is required for problems without L")
        v, y, step = brute_force_subproblem(prob, x, ell, points=args.points)
        cert = solve_dual(prob, x, ell, DualOptions(dual_gap_tol=args.dual_gap_tol))
        out.update(ell=ell, grid_value=v, grid_argmax=y.tolist(), grid_step=step,
                   dual_value=cert.v_value, dual_V=cert.V.tolist(), dual_c=cert.c.tolist(),
                   difference=cert.v_value - v)
    else:
        from ..merit import u0_bruteforce

        out["u0"] = u0_bruteforce(prob, x, points=args.points)
    print(dump_json(out))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="bregvopt", description="Interior Bregman gradient method "
                                 "for vector optimization, with certified convergence checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the method and certify the trajectory")
    s.add_argument("config", nargs="?", help="JSON run configuration")
    s.add_argument("--problem")
    s.add_argument("--x0", nargs="+")
    s.add_argument("--ell", type=float)
    s.add_argument("--merit-tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--dual-gap-tol", type=float)
    s.add_argument("--dual-max-iters", type=int)
    s.add_argument("--kernel", help='JSON, e.g. \'{"name": "shannon"}\'')
    s.add_argument("--cone", help='JSON, e.g. \'{"type": "orthant", "m": 2}\'')
    s.add_argument("--certificates", help="comma-separated names")
    s.add_argument("--seed", type=int)
    s.add_argument("--csv", help="trajectory CSV path")
    s.add_argument("--json", help="report JSON path (default: stdout)")
    s.add_argument("--csv-stdout", action="store_true", help="also print the CSV")
    s.add_argument("--timing", action="store_true", help="record wall times in the CSV")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("merit", help="merit values and their relations at a point")
    m.add_argument("--problem", required=True)
    m.add_argument("--x", nargs="+", required=True)
    m.add_argument("--ell", type=float, nargs="+")
    m.add_argument("--no-u0", action="store_true", help="skip the grid oracle")
    m.add_argument("--dual-gap-tol", type=float, default=1e-12)
    m.set_defaults(func=cmd_merit)

    b = sub.add_parser("batch", help="run a list of configs concurrently")
    b.add_argument("file")
    b.add_argument("--out", help="summary CSV path (default: stdout)")
    b.add_argument("--threads", type=int, help="worker count (default: $BREGVOPT_THREADS)")
    b.set_defaults(func=cmd_batch)

    o = sub.add_parser("oracle", help="brute-force cross-checks (n <= 3)")
    o.add_argument("what", choices=["subproblem", "u0"])
    o.add_argument("--problem", required=True)
    o.add_argument("--x", nargs="+", required=True)
    o.add_argument("--ell", type=float)
    o.add_argument("--points", type=int)
    o.add_argument("--dual-gap-tol", type=float, default=1e-12)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BregVOptError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
