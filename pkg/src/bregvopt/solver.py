"""The interior Bregman gradient method ``x_{k+1} = V_ell(x_k)`` and its certificates.

Every certificate re-evaluates one inequality of the convergence theory on a
finished trajectory and reports the worst signed slack (negative means the
inequality was violated beyond its tolerance).
"""
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BregVOptError,
    DimensionTooLarge,
    DomainViolation,
    InvalidStep,
    MissingConstant,
    NotConverged,
    VacuousBound,
)
from .subproblem import DualOptions, solve_dual

TERMINATIONS = ("merit_tol", "fixed_point", "max_iters", "subproblem_failure")
BOUNDARY_MARGIN = 1e-8


@dataclass
class StopRule:
    merit_tol: float = 1e-10
    max_iters: int = 100_000


@dataclass
class IterateRecord:
    """State at ``x^k`` and the step taken from it.

    ``D_step = D(x^{k+1}, x^k)``, ``D_step_rev = D(x^k, x^{k+1})`` and
    ``phi_decrease = phi(F(x^{k+1}) - F(x^k))`` are NaN on the final record
    when no step was taken.
    """

    k: int
    x: np.ndarray
    F_x: np.ndarray
    v_ell: float
    D_step: float
    D_step_rev: float
    phi_decrease: float
    c: np.ndarray
    wall_time: int = 0
    stationarity_residual: float = 0.0
    identity_residual: float = 0.0
    value_residual: float = 0.0
    jtc_norm: float = 0.0
    dual_gap: float = 0.0
    dual_converged: bool = True

    def to_dict(self):
        return {
            "k": self.k,
            "x": self.x.tolist(),
            "F_x": self.F_x.tolist(),
            "v_ell": self.v_ell,
            "D_step": self.D_step,
            "D_step_rev": self.D_step_rev,
            "phi_decrease": self.phi_decrease,
            "c": self.c.tolist(),
            "wall_time_ns": self.wall_time,
        }


@dataclass
class SolveReport:
    records: list
    termination: str
    ell: float
    problem: object = field(repr=False, default=None)
    message: str = ""
    rate_fits: dict = field(default_factory=dict)
    theorem_flags: dict = field(default_factory=dict)
    near_boundary: bool = False

    @property
    def x_final(self):
        return self.records[-1].x

    @property
    def iterations(self):
        """Number of steps actually taken."""
        last = self.records[-1]
        return len(self.records) - 1 + (0 if np.isnan(last.D_step) else 1)

    def trajectory(self):
        return np.array([r.x for r in self.records])

    def to_dict(self):
        return {
            "problem": getattr(self.problem, "name", None),
            "ell": self.ell,
            "termination": self.termination,
            "message": self.message,
            "iterations": self.iterations,
            "x_final": self.x_final.tolist(),
            "v_final": self.records[-1].v_ell,
            "near_boundary": self.near_boundary,
            "theorem_flags": dict(self.theorem_flags),
            "rate_fits": dict(self.rate_fits),
        }


def theorem_flags(problem, ell):
    """Which convergence theorems have their declared preconditions met."""
    L, mu = problem.L, problem.mu
    alpha = problem.kernel.alpha
    descent = L is not None and ell > L / (1.0 + alpha)
    monotone = L is not None and (1.0 + alpha) * ell >= L
    global_conv = descent and problem.bounded_sublevel
    convex = global_conv and problem.c_convex
    return {
        "monotone_decrease": bool(monotone),
        "sufficient_descent": bool(descent),
        "global_convergence": bool(global_conv),
        "sublinear_rate": bool(global_conv and alpha > 0),
        "ergodic_rate": bool(convex),
        "linear_rate": bool(convex and mu is not None and mu > 0 and ell >= L),
        "boundary_limits_certified": bool(problem.kernel.grad_lipschitz_global),
    }


def run(problem, x0, ell, stop=None, dual_opts=None, timing=False):
    """Iterate ``x_{k+1} = V_ell(x_k)`` from ``x0``.

    Parameters
    ----------
    problem : VectorProblem
    x0 : array_like
        Interior starting point.
    ell : float
        Constant step parameter, ``> 0``.
    stop : StopRule, optional
    dual_opts : DualOptions, optional
    timing : bool
        Record per-iteration wall time in nanoseconds; otherwise the field
        is 0 so that trajectories are reproducible byte for byte.

    Returns
    -------
    SolveReport
        Stops on ``v_ell(x_k) <= merit_tol``, on an exact fixed point, on the
        iteration budget, or when the subproblem fails (the error text is
        kept in ``message``).

    Raises
    ------
    InvalidStep
        If ``ell <= 0``.
    DomainViolation, NotSupercoercive
        If ``x0`` is not interior or the very first subproblem is ill-posed.
    """
    if not ell > 0:
        raise InvalidStep(f"ell must be positive, got {ell}")
    stop = stop or StopRule()
    dual_opts = dual_opts or DualOptions()
    kernel, cone = problem.kernel, problem.cone
    x = np.asarray(x0, dtype=float).reshape(problem.n).copy()
    if not kernel.is_interior(x):
        raise DomainViolation(f"x0={x} is not interior to the feasible set")

    records = []
    termination, message = "max_iters", ""
    Fx = problem.eval_F(x)
    nan = float("nan")
    for k in range(stop.max_iters + 1):
        t0 = time.perf_counter_ns()
        try:
            cert = solve_dual(problem, x, ell, dual_opts)
        except BregVOptError as exc:
            if not records:
                raise
            termination, message = "subproblem_failure", str(exc)
            break
        rec = IterateRecord(
            k=k, x=x.copy(), F_x=Fx.copy(), v_ell=cert.v_value,
            D_step=nan, D_step_rev=nan, phi_decrease=nan, c=cert.c.copy(),
            stationarity_residual=cert.stationarity_residual,
            identity_residual=cert.identity_residual,
            value_residual=cert.value_residual, jtc_norm=cert.jtc_norm,
            dual_gap=cert.dual_gap, dual_converged=cert.converged,
        )
        records.append(rec)
        if not cert.converged:
            message = f"dual gap {cert.dual_gap:.3e} above tolerance at k={k}"
        if cert.v_value <= stop.merit_tol:
            termination = "merit_tol"
            rec.wall_time = time.perf_counter_ns() - t0 if timing else 0
            break
        if k == stop.max_iters:
            rec.wall_time = time.perf_counter_ns() - t0 if timing else 0
            break
        x_new = cert.V
        F_new = problem.eval_F(x_new)
        rec.D_step = float(kernel.bregman(x_new, x))
        rec.D_step_rev = float(kernel.bregman(x, x_new))
        rec.phi_decrease = cone.phi(F_new - Fx)
        rec.wall_time = time.perf_counter_ns() - t0 if timing else 0
        if np.array_equal(x_new, x):
            termination = "fixed_point"
            break
        x, Fx = x_new, F_new

    report = SolveReport(records=records, termination=termination, ell=float(ell),
                         problem=problem, message=message,
                         theorem_flags=theorem_flags(problem, ell))
    margin = kernel.domain.margin(records[-1].x)
    report.near_boundary = bool(np.min(margin) < BOUNDARY_MARGIN)
    return report


def limit_point(problem, report, max_extra=20_000, dual_opts=None):
    """Best available ``x*`` for the run and where it came from.

    The declared optimum is used when the problem has one.  Otherwise the
    iteration is continued from the last iterate with no merit tolerance
    until consecutive iterates agree to machine precision.  The result is
    then only an approximation of the true limit.
    """
    if problem.x_star is not None:
        return np.asarray(problem.x_star, dtype=float), "declared"
    if report.termination == "subproblem_failure":
        raise NotConverged("the run failed; no limit point is available")
    dual_opts = dual_opts or DualOptions(dual_gap_tol=1e-14)
    x = report.x_final.copy()
    eps = np.finfo(float).eps
    for _ in range(max_extra):
        x_new = solve_dual(problem, x, report.ell, dual_opts).V
        if np.all(np.abs(x_new - x) <= 2 * eps * np.maximum(1.0, np.abs(x))):
            return x_new, "limit_run"
        x = x_new
    raise NotConverged(f"iterates still moving after {max_extra} extra steps")


# --- certificates ---------------------------------------------------------

@dataclass
class Certificate:
    """Outcome of one certificate.

    ``status`` is one of ``pass``, ``fail``, ``vacuous`` or ``skipped``;
    ``worst_slack`` is normalized by the tolerance scale of each check.
    """

    name: str
    status: str
    worst_slack: Optional[float] = None
    checked: int = 0
    failures: int = 0
    bound: Optional[float] = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status in ("pass", "vacuous", "skipped")

    def to_dict(self):
        return {
            "name": self.name, "status": self.status, "worst_slack": self.worst_slack,
            "checked": self.checked, "failures": self.failures, "bound": self.bound,
            **({"detail": self.detail} if self.detail else {}),
        }


def _finish(name, slacks, tols, bound=None, detail=None):
    slacks = np.asarray(slacks, dtype=float)
    tols = np.asarray(tols, dtype=float)
    if slacks.size == 0:
        return Certificate(name, "pass", None, 0, 0, bound, detail or {})
    bad = int(np.sum(slacks < -tols))
    worst = float(np.min(slacks / np.maximum(tols, np.finfo(float).tiny)))
    status = "fail" if bad else "pass"
    return Certificate(name, status, worst, int(slacks.size), bad, bound, detail or {})


def _steps(report):
    """Consecutive pairs ``(x^k, x^{k+1})`` that were actually taken."""
    recs = report.records
    return [(recs[i], recs[i + 1]) for i in range(len(recs) - 1)]


def _F_star(problem, report, x_star):
    return problem.eval_F(x_star)


def certify_subproblem_identities(report):
    """Stationarity, identity and value residuals at every iterate."""
    s, t = [], []
    for r in report.records:
        s += [-r.stationarity_residual, -r.identity_residual, -r.value_residual]
        t += [1e-6 * (1 + r.jtc_norm), 1e-6 * (1 + r.v_ell), 1e-8 * (1 + r.v_ell)]
    return _finish("subproblem_identities", s, t)


def certify_interior(report):
    """Every iterate strictly inside the open domain."""
    kernel = report.problem.kernel
    margins = np.array([float(np.min(kernel.domain.margin(r.x))) for r in report.records])
    bad = int(np.sum(~(margins > 0)))
    return Certificate("interior", "fail" if bad else "pass", float(np.min(margins)),
                       int(margins.size), bad)


def certify_sufficient_descent(report, L=None, alpha=None):
    """``phi(F(x^{k+1}) - F(x^k)) <= -((1 + alpha) ell - L) D(x^{k+1}, x^k)``."""
    p = report.problem
    L = p.L if L is None else L
    alpha = p.kernel.alpha if alpha is None else alpha
    if L is None:
        raise MissingConstant(f"{p.name} declares no L")
    ell = report.ell
    coef = (1.0 + alpha) * ell - L
    slacks, tols = [], []
    for a, b in _steps(report):
        lhs = p.cone.phi(b.F_x - a.F_x)
        rhs = -coef * a.D_step
        slacks.append(rhs - lhs)
        tols.append(1e-8 * (1 + abs(lhs)))
    return _finish("sufficient_descent", slacks, tols, bound=coef)


def certify_monotone_decrease(report):
    slacks = [-(b_phi) for b_phi in (a.phi_decrease for a, _ in _steps(report))]
    scales = [1e-8 * (1 + float(np.max(np.abs(a.F_x)))) for a, _ in _steps(report)]
    return _finish("monotone_decrease", slacks, scales)


def certify_summability(report, F_star, L=None, alpha=None):
    """Partial sums of ``D(x^{k+1}, x^k)`` against ``-phi(F* - F(x^0)) / ((1+alpha) ell - L)``."""
    p = report.problem
    L = p.L if L is None else L
    alpha = p.kernel.alpha if alpha is None else alpha
    if L is None:
        raise MissingConstant(f"{p.name} declares no L")
    coef = (1.0 + alpha) * report.ell - L
    if not coef > 0:
        raise MissingConstant("step too small: (1 + alpha) ell - L must be positive")
    bound = -p.cone.phi(np.asarray(F_star) - report.records[0].F_x) / coef
    sums = np.cumsum([a.D_step for a, _ in _steps(report)])
    return _finish("summability", bound - sums, 1e-8 * (1 + abs(bound)) * np.ones_like(sums),
                   bound=bound)


def certify_sublinear_rate(report, F_star, L=None, alpha=None):
    """``k min_{p<k} v(x^p) <= -ell phi(F* - F(x^0)) / (alpha ((1+alpha) ell - L))``.

    Raises
    ------
    VacuousBound
        When ``alpha = 0``.
    """
    p = report.problem
    L = p.L if L is None else L
    alpha = p.kernel.alpha if alpha is None else alpha
    if L is None:
        raise MissingConstant(f"{p.name} declares no L")
    if not alpha > 0:
        raise VacuousBound(f"alpha = 0 for kernel {p.kernel.name}; the constant is infinite")
    ell = report.ell
    coef = (1.0 + alpha) * ell - L
    if not coef > 0:
        raise MissingConstant("step too small: (1 + alpha) ell - L must be positive")
    const = -ell * p.cone.phi(np.asarray(F_star) - report.records[0].F_x) / (alpha * coef)
    v = np.array([r.v_ell for r in report.records])
    k = np.arange(1, v.size + 1)
    lhs = k * np.minimum.accumulate(v)
    tol = 1e-8 * max(abs(const), np.finfo(float).tiny)
    return _finish("sublinear_rate", const - lhs, tol * np.ones_like(lhs), bound=const,
                   detail={"max_k_min_v": float(np.max(lhs))})


def certify_ergodic_rate(report, x_star, L=None):
    """Averaged-weight gap ``<c_bar^{k-1}, F(x^k) - F*>`` against its O(1/k) bound.

    With ``ell >= L`` the bound is ``ell D(x*, x^0) / k``; otherwise the
    accumulated ``(L - ell) sum D(x^{p+1}, x^p)`` term is added.
    """
    p = report.problem
    L = p.L if L is None else L
    if L is None:
        raise MissingConstant(f"{p.name} declares no L")
    if x_star is None:
        raise NotConverged("no limit point supplied")
    x_star = np.asarray(x_star, dtype=float)
    F_star = p.eval_F(x_star)
    ell = report.ell
    d0 = float(p.kernel.bregman(x_star, report.records[0].x))
    steps = _steps(report)
    c_sum = np.zeros(p.m)
    d_sum = 0.0
    slacks, tols, gaps = [], [], []
    for k, (a, b) in enumerate(steps, start=1):
        c_sum += a.c
        d_sum += a.D_step
        gap = float((c_sum / k) @ (b.F_x - F_star))
        bound = ell * d0 / k
        if ell < L:
            bound += (L - ell) * d_sum / k
        slacks.append(bound - gap)
        tols.append(1e-8 * max(bound, np.finfo(float).tiny) + 1e-15 * (1 + np.max(np.abs(F_star))))
        gaps.append(gap)
    return _finish("ergodic_rate", slacks, tols, bound=ell * d0,
                   detail={"first_gaps": gaps[:5]})


def certify_linear_rate(report, x_star, delta=None, mu=None, floor=1e-14):
    """``D(x*, x^{k+1}) <= (ell - delta mu) / ell * D(x*, x^k)`` until ``D < floor``."""
    p = report.problem
    mu = p.mu if mu is None else mu
    delta = p.cone.delta if delta is None else delta
    if mu is None or not mu > 0:
        raise MissingConstant(f"{p.name} declares no mu > 0")
    if x_star is None:
        raise NotConverged("no limit point supplied")
    x_star = np.asarray(x_star, dtype=float)
    ell = report.ell
    q = (ell - delta * mu) / ell
    D = [float(p.kernel.bregman(x_star, r.x)) for r in report.records]
    ratios = []
    for a, b in zip(D, D[1:]):
        if a < floor:
            break
        ratios.append(b / a)
    ratios = np.array(ratios)
    return _finish("linear_rate", q - ratios, 1e-8 * np.ones_like(ratios), bound=q,
                   detail={"max_ratio": float(np.max(ratios)) if ratios.size else None})


def u0_series(report, **kw):
    from .merit import u0_bruteforce

    p = report.problem
    if p.n > 3:
        raise DimensionTooLarge(f"u0 grid oracle needs n <= 3, got {p.n}")
    return np.array([u0_bruteforce(p, r.x, **kw) for r in report.records])


def certify_u0_linear(report, tau_ell=None, series=None, allowance=1e-9):
    """``u0(x^{k+1}) <= (1 - 1/tau(ell)) u0(x^k)`` up to a grid allowance.

    ``series`` defaults to the grid oracle evaluated along the trajectory.
    """
    from .merit import pl_tau

    p = report.problem
    if tau_ell is None:
        tau_ell = pl_tau(p.cone, p.kernel, p.mu, report.ell)
    if series is None:
        series = u0_series(report)
    series = np.asarray(series, dtype=float)
    q = 1.0 - 1.0 / tau_ell
    slacks = q * series[:-1] - series[1:]
    ratios = [b / a for a, b in zip(series, series[1:]) if a > 1e-12]
    return _finish("u0_linear", slacks, allowance * np.ones_like(slacks), bound=q,
                   detail={"max_ratio": max(ratios) if ratios else None})


def certify_fundamental_inequality(report, x_star=None, probes=3, rng=0, L=None, mu=None):
    """Spot-check, per step, the inequality
    ``<c_k, F(x^{k+1}) - F(x)> <= (ell - delta mu) D(x, x^k) - ell D(x, x^{k+1})
    + (L - ell) D(x^{k+1}, x^k)`` at ``x*`` and random interior probes.
    """
    p = report.problem
    L = p.L if L is None else L
    mu = (p.mu or 0.0) if mu is None else mu
    if L is None:
        raise MissingConstant(f"{p.name} declares no L")
    if not (p.c_convex or mu > 0):
        raise MissingConstant("needs a C-convex problem")
    kernel, ell, dm = p.kernel, report.ell, p.cone.delta * mu
    pts = [] if x_star is None else [np.asarray(x_star, dtype=float)]
    if probes:
        pts += list(p.sample_interior(np.random.default_rng(rng), probes))
    pts = np.array([q for q in pts if kernel.is_interior(q)])
    if pts.size == 0:
        return _finish("fundamental_inequality", [], [])
    Fp = p.F_batch(pts)
    slacks, tols = [], []
    for a, b in _steps(report):
        lhs = (b.F_x - Fp) @ a.c
        t1 = (ell - dm) * kernel.bregman(pts, a.x)
        t2 = ell * kernel.bregman(pts, b.x)
        t3 = (L - ell) * a.D_step
        rhs = t1 - t2 + t3
        slacks.extend(rhs - lhs)
        tols.extend(1e-8 * (1 + np.abs(lhs) + np.abs(t1) + np.abs(t2) + abs(t3)))
    return _finish("fundamental_inequality", slacks, tols)


CERTIFICATES = (
    "subproblem_identities",
    "interior",
    "sufficient_descent",
    "monotone_decrease",
    "summability",
    "sublinear_rate",
    "ergodic_rate",
    "linear_rate",
    "fundamental_inequality",
    "u0_linear",
)


def run_certificates(report, names=None, x_star=None, seed=0):
    """Run the named certificates (default: every applicable one).

    Certificates whose preconditions are not declared come back as
    ``skipped`` with the reason; a zero symmetry coefficient gives
    ``vacuous``.  The ``u0_linear`` certificate is only run on request since
    it needs one grid search per iterate.
    """
    p = report.problem
    flags = report.theorem_flags
    names = list(names) if names is not None else [c for c in CERTIFICATES if c != "u0_linear"]
    unknown = set(names) - set(CERTIFICATES)
    if unknown:
        raise ValueError(f"unknown certificates: {sorted(unknown)}")
    out = {}
    needs_limit = {"summability", "sublinear_rate", "ergodic_rate", "linear_rate"}
    star_source = None
    if x_star is None and needs_limit & set(names):
        try:
            x_star, star_source = limit_point(p, report)
        except NotConverged as exc:
            star_source = f"unavailable: {exc}"
    elif x_star is not None:
        star_source = "supplied"

    def skipped(name, why):
        return Certificate(name, "skipped", detail={"reason": why})

    for name in names:
        try:
            if name == "subproblem_identities":
                cert = certify_subproblem_identities(report)
            elif name == "interior":
                cert = certify_interior(report)
            elif name == "sufficient_descent":
                # the inequality itself holds for every ell > 0
                cert = certify_sufficient_descent(report)
            elif name == "monotone_decrease":
                if not flags["monotone_decrease"]:
                    cert = skipped(name, "needs (1 + alpha) ell >= L")
                else:
                    cert = certify_monotone_decrease(report)
            elif name in ("summability", "sublinear_rate"):
                if not flags["global_convergence"]:
                    cert = skipped(name, "needs ell > L / (1 + alpha) and bounded sublevel sets")
                elif x_star is None:
                    cert = skipped(name, "no limit point")
                elif name == "summability":
                    cert = certify_summability(report, p.eval_F(x_star))
                else:
                    cert = certify_sublinear_rate(report, p.eval_F(x_star))
            elif name == "ergodic_rate":
                if not flags["ergodic_rate"]:
                    cert = skipped(name, "needs a C-convex problem and ell > L / (1 + alpha)")
                elif x_star is None:
                    cert = skipped(name, "no limit point")
                else:
                    cert = certify_ergodic_rate(report, x_star)
            elif name == "linear_rate":
                if not flags["linear_rate"]:
                    cert = skipped(name, "needs mu > 0 and ell >= L")
                elif x_star is None:
                    cert = skipped(name, "no limit point")
                else:
                    cert = certify_linear_rate(report, x_star)
            elif name == "fundamental_inequality":
                if p.L is None or not p.c_convex:
                    cert = skipped(name, "needs L and a C-convex problem")
                else:
                    cert = certify_fundamental_inequality(report, x_star, rng=seed)
            else:  # u0_linear
                if not flags["linear_rate"]:
                    cert = skipped(name, "needs mu > 0 and ell >= L")
                else:
                    cert = certify_u0_linear(report)
        except VacuousBound as exc:
            cert = Certificate(name, "vacuous", detail={"reason": str(exc)})
        except (MissingConstant, NotConverged, DimensionTooLarge) as exc:
            cert = skipped(name, str(exc))
        if star_source and name in needs_limit | {"fundamental_inequality"}:
            cert.detail.setdefault("x_star_source", star_source)
        out[name] = cert
    return out
