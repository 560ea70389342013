"""The max-min step subproblem, solved through its dual over G.

For a point ``x`` and step parameter ``ell`` the subproblem value is

    v(x) = sup_y min_{c in G} <c, JF(x)(x - y)> - ell D(y, x)
         = min_{c in G} psi(c),   psi(c) = ell D*(grad w(x) - JF(x)^T c / ell, grad w(x))

and the primal solution is recovered in closed form,
``V(c) = grad w*(grad w(x) - JF(x)^T c / ell)``.  ``psi`` is convex and smooth
with ``grad psi(c) = JF(x)(x - V(c))``, and G is only reachable through its
linear minimization oracle, so the dual is solved by Frank-Wolfe with away
steps and an exact line search.  ``psi(c)`` is evaluated as ``ell D(x, V(c))``.
"""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._grid import grid_maximize
from .errors import DomainViolation, InvalidStep, NotSupercoercive


@dataclass
class DualOptions:
    dual_gap_tol: float = 1e-9
    max_iters: int = 10_000
    away_steps: bool = True
    require_supercoercive: bool = True


@dataclass
class DualCertificate:
    """Dual weights ``c``, the step ``V`` and the residuals that certify them."""

    x: np.ndarray
    ell: float
    c: np.ndarray
    V: np.ndarray
    v_value: float
    dual_gap: float
    iterations: int
    converged: bool
    stationarity_residual: float
    identity_residual: float
    value_residual: float
    jtc_norm: float
    wall_time: float = 0.0
    active_set: list = field(default_factory=list, repr=False)

    def checks(self, kernel=None):
        """Evaluate the certificate invariants; returns ``{name: bool}``."""
        out = {
            "stationarity": self.stationarity_residual <= 1e-6 * (1 + self.jtc_norm),
            "identity": self.identity_residual <= 1e-6 * (1 + self.v_value),
            "value": self.value_residual <= 1e-8 * (1 + self.v_value),
            "nonnegative": self.v_value >= 0,
            "converged": self.converged,
        }
        if kernel is not None:
            out["interior"] = kernel.is_interior(self.V)
        return out


def _validate(problem, x, ell, opts):
    if not ell > 0:
        raise InvalidStep(f"ell must be positive, got {ell}")
    kernel = problem.kernel
    if opts.require_supercoercive and not kernel.supercoercive:
        raise NotSupercoercive(
            f"kernel {kernel.name} is not supercoercive; the step may be undefined"
        )
    x = np.asarray(x, dtype=float).reshape(problem.n)
    if not kernel.is_interior(x):
        raise DomainViolation(f"x={x} is not interior to the feasible set")
    return x


def _line_search(dphi, gmax):
    """Minimize a convex 1-D function on [0, gmax] given its derivative."""
    if dphi(gmax) <= 0:
        return gmax
    if dphi(0.0) >= 0:
        return 0.0
    return brentq(dphi, 0.0, gmax, xtol=1e-16, rtol=8.9e-16, maxiter=200)


def solve_dual(problem, x, ell, opts=None, J=None):
    """Compute ``c_ell(x)``, ``V_ell(x)`` and ``v_ell(x)`` with residuals.

    Parameters
    ----------
    problem : VectorProblem
    x : array_like
        Interior point.
    ell : float
        Step parameter, ``> 0``.
    opts : DualOptions, optional
    J : ndarray, optional
        Precomputed Jacobian at ``x``.

    Returns
    -------
    DualCertificate
        ``converged`` is False when the duality gap tolerance was not met
        within ``opts.max_iters``; the certificate is still usable.
    """
    opts = opts or DualOptions()
    x = _validate(problem, x, ell, opts)
    t0 = time.perf_counter()
    kernel, cone = problem.kernel, problem.cone
    J = problem.eval_J(x) if J is None else np.asarray(J, dtype=float)
    zx = kernel.grad(x)

    def step(c):
        return kernel.grad_conj(zx - (J.T @ c) / ell)

    def grad_psi(c):
        return J @ (x - step(c))

    if cone.m == 1:
        c = cone.generators[0].copy()
        atoms, weights = [c.copy()], np.ones(1)
        gap, iters, converged = 0.0, 0, True
    else:
        c, atoms, weights, gap, iters, converged = _frank_wolfe(
            cone, step, grad_psi, kernel, x, ell, opts
        )

    V = step(c)
    if not kernel.is_interior(V):
        raise DomainViolation("the recovered step left the interior (floating-point underflow)")
    jtc = J.T @ c
    lin = float(c @ (J @ (x - V)))
    d_xv = float(kernel.bregman(x, V))
    d_vx = float(kernel.bregman(V, x))
    v_value = ell * d_xv
    stat = float(np.linalg.norm(-jtc - ell * (kernel.grad(V) - zx)))
    ident = abs(lin - ell * (d_xv + d_vx))
    value_res = abs((lin - ell * d_vx) - v_value)
    return DualCertificate(
        x=x, ell=float(ell), c=c, V=V, v_value=v_value, dual_gap=float(gap),
        iterations=iters, converged=converged, stationarity_residual=stat,
        identity_residual=ident, value_residual=value_res,
        jtc_norm=float(np.linalg.norm(jtc)), wall_time=time.perf_counter() - t0,
        active_set=list(zip(weights.tolist(), [a.tolist() for a in atoms])),
    )


def _frank_wolfe(cone, step, grad_psi, kernel, x, ell, opts):
    # start from the normalized all-ones extreme point (orthant) or the
    # barycentre of the generators
    if cone.kind == "orthant":
        atoms = [np.full(cone.m, 1.0 / np.sqrt(cone.m))]
        weights = np.ones(1)
    else:
        atoms = [g.copy() for g in cone.generators]
        weights = np.full(len(atoms), 1.0 / len(atoms))
    c = weights @ np.array(atoms)
    gap = np.inf
    converged = False
    it = 0
    for it in range(opts.max_iters + 1):
        V = step(c)
        g = grad_psi(c)
        s_val, s = cone.min_over_G(g)
        cg = float(c @ g)
        gap = cg - s_val
        psi = ell * float(kernel.bregman(x, V))
        if gap <= opts.dual_gap_tol * (1.0 + abs(psi)):
            converged = True
            break
        if it == opts.max_iters:
            break
        A = np.array(atoms)
        away_i = int(np.argmax(A @ g))
        away_gap = float(A[away_i] @ g) - cg
        use_away = opts.away_steps and away_gap > gap and weights[away_i] < 1.0
        if use_away:
            d = c - A[away_i]
            gmax = weights[away_i] / (1.0 - weights[away_i])
        else:
            d = s - c
            gmax = 1.0

        def dphi(t):
            return float(d @ grad_psi(c + t * d))

        gamma = _line_search(dphi, gmax)
        if gamma == 0.0:
            # no progress possible along this direction in floating point
            break
        if use_away:
            weights = weights * (1.0 + gamma)
            weights[away_i] -= gamma
            if gamma >= gmax:
                weights[away_i] = 0.0
        else:
            weights = weights * (1.0 - gamma)
            hit = [i for i, a in enumerate(atoms) if np.allclose(a, s, rtol=0, atol=1e-14)]
            if hit:
                weights[hit[0]] += gamma
            else:
                atoms.append(s)
                weights = np.append(weights, gamma)
        keep = weights > 0
        atoms = [a for a, k in zip(atoms, keep) if k]
        weights = weights[keep]
        weights /= weights.sum()
        c = weights @ np.array(atoms)
    return c, atoms, weights, gap, it, converged


def brute_force_subproblem(problem, x, ell, box=None, points=None, resolution=1e-12):
    """Grid oracle for the subproblem value, for ``n <= 3``.

    Maximizes ``min_{c in G} <c, JF(x)(x - y)> - ell D(y, x)`` over a dense
    grid on ``box`` (default: the problem's ``grid_box``), using the
    closed-form inner minimum, then zooms into the best cell.

    Returns
    -------
    v : float
    y : ndarray
        Approximate maximizer.
    step : float
        Resolution of the coarse grid.
    """
    x = np.asarray(x, dtype=float).reshape(problem.n)
    J = problem.eval_J(x)
    kernel, cone = problem.kernel, problem.cone
    lo, hi = box if box is not None else problem.grid_box

    def objective(Y):
        lin = (x - Y) @ J.T
        return cone.min_value(lin) - ell * kernel.bregman(Y, x)

    def pieces(Y):
        # at a maximizer the linear part is C-nonnegative, where the inner
        # minimum is the smallest generator pairing
        lin = (x - Y) @ J.T
        return lin @ cone.generators.T - ell * kernel.bregman(Y, x)[:, None]

    return grid_maximize(objective, lo, hi, kernel.domain, points=points,
                         resolution=resolution, pieces=pieces)
