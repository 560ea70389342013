"""Merit functions u0 and v_ell, the theta / tau moduli, and their relations.

``u0(x) = sup_y min_{c in G} <c, F(x) - F(y)>`` has no closed form and is
only available through a grid oracle (``n <= 3``).  ``v_ell`` comes from the
dual subproblem solver.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._grid import grid_maximize
from .errors import MissingConstant
from .subproblem import DualOptions, solve_dual


def u0_bruteforce(problem, x, box=None, points=None, resolution=1e-12):
    """Grid oracle for ``u0(x)``.

    Parameters
    ----------
    problem : VectorProblem
    x : array_like
    box : (lo, hi), optional
        Search box; defaults to ``problem.grid_box``, which must contain the
        efficient set.
    points : int, optional
        Grid points per axis (default 401 for ``n = 2``).

    Returns
    -------
    float
        The grid supremum, clipped at 0 (``y = x`` is always admissible).
    """
    x = np.asarray(x, dtype=float).reshape(problem.n)
    Fx = problem.eval_F(x)
    cone = problem.cone
    lo, hi = box if box is not None else problem.grid_box

    def objective(Y):
        return cone.min_value(Fx - problem.F_batch(Y))

    def pieces(Y):
        return (Fx - problem.F_batch(Y)) @ cone.generators.T

    val, _, _ = grid_maximize(objective, lo, hi, problem.domain, points=points,
                              resolution=resolution, pieces=pieces)
    return max(val, 0.0)


def v_ell(problem, x, ell, opts=None):
    """``v_ell(x)``; thin wrapper over :func:`solve_dual`."""
    return solve_dual(problem, x, ell, opts).v_value


def theta(kernel):
    """The modulus ``t -> sigma t^2 / kappa``.

    Raises
    ------
    MissingConstant
        When the kernel lacks global ``sigma`` and ``kappa``.
    """
    if kernel.sigma is None or kernel.kappa is None:
        raise MissingConstant(f"kernel {kernel.name} has no sigma/kappa pair")
    if kernel.constants_box is not None:
        raise MissingConstant(f"sigma/kappa of {kernel.name} only hold on a sub-box")
    sigma, kappa = float(kernel.sigma), float(kernel.kappa)
    return lambda t: sigma * t * t / kappa


def pl_tau(cone, kernel, mu, ell):
    """PL modulus ``tau(ell) = delta mu / (theta(delta mu / ell) ell)``."""
    if mu is None or not mu > 0:
        raise MissingConstant("a positive strong convexity constant mu is required")
    if not ell > 0:
        raise ValueError("ell must be positive")
    th = theta(kernel)
    dm = cone.delta * mu
    return dm / (th(dm / ell) * ell)


@dataclass
class MeritReport:
    """Merit values at one point and the signed slacks of their relations."""

    x: np.ndarray
    u0: Optional[float]
    v_at: dict
    theta_fn: Optional[Callable] = field(default=None, repr=False)
    tau: Optional[Callable] = field(default=None, repr=False)
    relation_slacks: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "x": np.asarray(self.x).tolist(),
            "u0": self.u0,
            "v_at": {repr(float(k)): v for k, v in self.v_at.items()},
            "relation_slacks": dict(self.relation_slacks),
        }


def check_merit_sandwich(problem, x, L=None, mu=None, u0=None, opts=None):
    """Slacks of ``v_L(x) <= u0(x) <= v_{delta mu}(x)``.

    Returns
    -------
    dict
        ``lower = u0 - v_L``, ``upper = v_{delta mu} - u0``, the tolerance
        ``1e-6 (1 + u0)`` and the three values.
    """
    L = problem.L if L is None else L
    mu = problem.mu if mu is None else mu
    if L is None or mu is None or not mu > 0:
        raise MissingConstant(f"{problem.name} needs both L and mu > 0")
    if u0 is None:
        u0 = u0_bruteforce(problem, x)
    vL = v_ell(problem, x, L, opts)
    vdm = v_ell(problem, x, problem.cone.delta * mu, opts)
    return {
        "lower": u0 - vL,
        "upper": vdm - u0,
        "tol": 1e-6 * (1.0 + u0),
        "u0": u0,
        "v_L": vL,
        "v_delta_mu": vdm,
    }


def check_ell_ratio(problem, x, ell1, ell2, opts=None):
    """Slacks of ``v_{ell1} <= v_{ell2} <= ell2 / (theta(ell2/ell1) ell1) v_{ell1}``.

    Requires ``ell1 >= ell2 > 0``.  The right slack is ``None`` when the
    kernel has no global ``theta``.
    """
    if not ell1 >= ell2 > 0:
        raise ValueError("need ell1 >= ell2 > 0")
    v1 = v_ell(problem, x, ell1, opts)
    v2 = v_ell(problem, x, ell2, opts)
    out = {"left": v2 - v1, "right": None, "tol": 1e-8 * (1.0 + v1), "v1": v1, "v2": v2}
    try:
        th = theta(problem.kernel)
    except MissingConstant:
        return out
    factor = ell2 / (th(ell2 / ell1) * ell1)
    out["right"] = factor * v1 - v2
    out["factor"] = factor
    return out


def merit_report(problem, x, ells=None, with_u0=True, opts=None):
    """Evaluate ``u0``, ``v_ell`` for several ``ell`` and every applicable relation.

    Relations that need a missing constant are left out of
    ``relation_slacks`` rather than raising.
    """
    x = np.asarray(x, dtype=float).reshape(problem.n)
    if ells is None:
        ells = [e for e in (problem.L, 2 * problem.L if problem.L else None) if e]
        if problem.mu:
            ells.append(problem.cone.delta * problem.mu)
        ells = ells or [1.0]
    ells = sorted({float(e) for e in ells}, reverse=True)
    v_at = {e: v_ell(problem, x, e, opts) for e in ells}
    u0 = u0_bruteforce(problem, x) if with_u0 and problem.n <= 3 else None

    slacks = {}
    th = tau = None
    try:
        th = theta(problem.kernel)
    except MissingConstant:
        pass
    if problem.mu and th is not None:
        tau = lambda ell: pl_tau(problem.cone, problem.kernel, problem.mu, ell)  # noqa: E731
    if u0 is not None and problem.L and problem.mu:
        s = check_merit_sandwich(problem, x, u0=u0, opts=opts)
        slacks["sandwich_lower"] = s["lower"]
        slacks["sandwich_upper"] = s["upper"]
    for a, b in zip(ells, ells[1:]):
        r = check_ell_ratio(problem, x, a, b, opts)
        slacks[f"ell_ratio_left[{a:g},{b:g}]"] = r["left"]
        if r["right"] is not None:
            slacks[f"ell_ratio_right[{a:g},{b:g}]"] = r["right"]
    if u0 is not None and tau is not None:
        for e, v in v_at.items():
            slacks[f"pl[{e:g}]"] = tau(e) * v - u0
    return MeritReport(x=x, u0=u0, v_at=v_at, theta_fn=th, tau=tau, relation_slacks=slacks)


__all__ = [
    "DualOptions",
    "MeritReport",
    "check_ell_ratio",
    "check_merit_sandwich",
    "merit_report",
    "pl_tau",
    "theta",
    "u0_bruteforce",
    "v_ell",
]
