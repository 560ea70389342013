"""Executing configs: single runs with outputs, and concurrent batches."""
import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import BregVOptError, InsufficientData, NotConverged
from ..solver import StopRule, limit_point, run, run_certificates
from ..subproblem import DualOptions
from .config import RunConfig, config_from_dict
from .rates import fit_rates

EXIT_OK, EXIT_ERROR, EXIT_CERT_FAIL = 0, 1, 2

SUMMARY_COLUMNS = (
    "index", "problem", "kernel", "ell", "status", "termination", "iterations",
    "final_v", "sublinear_constant", "linear_ratio_geomean", "r_squared",
    "cert_pass", "cert_fail", "error",
)


@dataclass
class RunOutcome:
    config: RunConfig
    report: object
    certificates: dict
    rate_fits: dict
    x_star: object = None
    x_star_source: str = ""
    notes: list = field(default_factory=list)

    @property
    def exit_code(self):
        if any(c.status == "fail" for c in self.certificates.values()):
            return EXIT_CERT_FAIL
        return EXIT_OK

    def to_dict(self):
        d = self.report.to_dict()
        d["kernel"] = self.report.problem.kernel.to_dict()
        d["cone"] = self.report.problem.cone.to_dict()
        d["x_star"] = None if self.x_star is None else np.asarray(self.x_star).tolist()
        d["x_star_source"] = self.x_star_source
        d["certificates"] = {k: c.to_dict() for k, c in self.certificates.items()}
        d["rate_fits"] = self.rate_fits
        d["notes"] = list(self.notes)
        d["config"] = self.config.to_dict()
        return d


def execute(cfg):
    """Run one config: solve, certify, fit rates.  Writes no files."""
    problem = cfg.build()
    stop = StopRule(merit_tol=cfg.stop["merit_tol"], max_iters=cfg.stop["max_iters"])
    dual = DualOptions(dual_gap_tol=cfg.subproblem["dual_gap_tol"],
                       max_iters=cfg.subproblem["dual_max_iters"])
    report = run(problem, cfg.x0, cfg.ell, stop, dual, timing=cfg.timing)
    notes = []
    try:
        x_star, source = limit_point(problem, report)
    except NotConverged as exc:
        x_star, source = None, ""
        notes.append(f"no limit point: {exc}")
    if source == "limit_run":
        notes.append("x* and F* come from continuing the run, not from a known optimum")
    certs = run_certificates(report, cfg.certificates, x_star=x_star, seed=cfg.seed)
    for c in certs.values():
        if "x_star_source" in c.detail:
            c.detail["x_star_source"] = source
    try:
        fits = fit_rates(report, x_star)
    except InsufficientData as exc:
        try:
            fits = fit_rates(report)
        except InsufficientData:
            fits = {"sublinear_constant": None, "linear_ratio_geomean": None, "r_squared": None}
        fits["reason"] = str(exc)
    report.rate_fits = fits
    if report.near_boundary:
        notes.append("run ended near the boundary; convergence there is not certified")
    return RunOutcome(cfg, report, certs, fits, x_star, source, notes)


def _fmt(v):
    return repr(float(v))


def csv_text(report):
    """Trajectory CSV: k, x..., F..., v_ell, D_step, phi_decrease, wall_time_ns."""
    p = report.problem
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k"] + [f"x{i}" for i in range(p.n)] + [f"F{j}" for j in range(p.m)]
               + ["v_ell", "D_step", "phi_decrease", "wall_time_ns"])
    for r in report.records:
        w.writerow([r.k] + [_fmt(v) for v in r.x] + [_fmt(v) for v in r.F_x]
                   + [_fmt(r.v_ell), _fmt(r.D_step), _fmt(r.phi_decrease), int(r.wall_time)])
    return buf.getvalue()


def jsonable(obj):
    """Recursively replace non-finite floats by None and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True)


def write_outputs(outcome):
    out = outcome.config.output
    if out.get("csv_path"):
        with open(out["csv_path"], "w", newline="") as fh:
            fh.write(csv_text(outcome.report))
    if out.get("json_path"):
        with open(out["json_path"], "w") as fh:
            fh.write(dump_json(outcome.to_dict()) + "\n")


def worker_count():
    env = os.environ.get("BREGVOPT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def _row(index, item):
    row = dict.fromkeys(SUMMARY_COLUMNS)
    row["index"] = index
    if isinstance(item, dict):
        row["problem"] = item.get("problem")
        row["ell"] = item.get("ell")
        try:
            cfg = config_from_dict(item)
        except BregVOptError as exc:
            row.update(status="failed", error=str(exc))
            return row
    else:
        cfg = item
    row["problem"], row["ell"] = cfg.problem, cfg.ell
    try:
        outcome = execute(cfg)
        write_outputs(outcome)
    except (BregVOptError, OSError, ValueError) as exc:
        row.update(status="failed", error=str(exc))
        return row
    rep = outcome.report
    fits = outcome.rate_fits
    certs = outcome.certificates.values()
    row.update(
        kernel=rep.problem.kernel.name,
        status="ok",
        termination=rep.termination,
        iterations=rep.iterations,
        final_v=rep.records[-1].v_ell,
        sublinear_constant=fits.get("sublinear_constant"),
        linear_ratio_geomean=fits.get("linear_ratio_geomean"),
        r_squared=fits.get("r_squared"),
        cert_pass=sum(c.status == "pass" for c in certs),
        cert_fail=sum(c.status == "fail" for c in certs),
        error="",
    )
    return row


def run_batch(items, workers=None):
    """Execute configs concurrently; one summary row per item, in input order.

    ``items`` may mix :class:`RunConfig` objects and raw decoded JSON
    objects; a config that fails to parse or run yields a ``failed`` row.
    """
    items = list(items)
    if not items:
        return []
    workers = workers or worker_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_row, range(len(items)), items))


def summary_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else r[k]) for k in SUMMARY_COLUMNS})
    return buf.getvalue()


def batch_exit_code(rows):
    if any(r["status"] != "ok" or (r["cert_fail"] or 0) > 0 for r in rows):
        return EXIT_CERT_FAIL
    return EXIT_OK
