"""Vector objectives, their relative constants, and the built-in test suite."""
import importlib
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlogy

from .cone import ConeOrder
from .errors import MissingConstant, ValidationError
from .kernels import LegendreKernel, LogBarrier, ShannonEntropy, SquaredNorm

SQRT2 = np.sqrt(2.0)


def fd_jacobian(F, x):
    """Central-difference Jacobian, step ``max(1e-6, 1e-8 * ||x||_inf)``."""
    x = np.asarray(x, dtype=float)
    h = max(1e-6, 1e-8 * float(np.max(np.abs(x))))
    cols = []
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = h
        cols.append((np.asarray(F(x + step)) - np.asarray(F(x - step))) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class VectorProblem:
    """``min_{x in Omega} F(x)`` with ``Omega = cl(dom kernel)``.

    ``F`` maps ``(n,)`` to ``(m,)``; when ``vectorized`` is set it must also
    accept ``(..., n)`` and return ``(..., m)`` (``J`` likewise, returning
    ``(..., m, n)``).  ``L`` and ``mu`` are relative to ``kernel`` along the
    normalized direction ``cone.e``.
    """

    name: str
    n: int
    m: int
    F: Callable
    kernel: LegendreKernel
    cone: ConeOrder
    J: Optional[Callable] = None
    L: Optional[float] = None
    mu: Optional[float] = None
    c_convex: bool = False
    bounded_sublevel: bool = False
    known_efficient: tuple = ()
    dominated: tuple = ()
    x_star: Optional[tuple] = None
    grid_box: Optional[tuple] = None
    sample_box: Optional[tuple] = None
    vectorized: bool = False
    description: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kernel.n != self.n:
            raise ValidationError(f"kernel dimension {self.kernel.n} != n={self.n}", "kernel")
        if self.cone.m != self.m:
            raise ValidationError(f"cone dimension {self.cone.m} != m={self.m}", "cone")

    @property
    def domain(self):
        return self.kernel.domain

    def eval_F(self, x):
        return np.asarray(self.F(np.asarray(x, dtype=float)), dtype=float).reshape(self.m)

    def eval_J(self, x):
        x = np.asarray(x, dtype=float)
        if self.J is None:
            return fd_jacobian(self.F, x).reshape(self.m, self.n)
        return np.asarray(self.J(x), dtype=float).reshape(self.m, self.n)

    def F_batch(self, X):
        X = np.asarray(X, dtype=float)
        if self.vectorized:
            return np.asarray(self.F(X), dtype=float)
        flat = X.reshape(-1, self.n)
        out = np.array([self.eval_F(x) for x in flat])
        return out.reshape(X.shape[:-1] + (self.m,))

    def J_batch(self, X):
        X = np.asarray(X, dtype=float)
        if self.vectorized and self.J is not None:
            return np.asarray(self.J(X), dtype=float)
        flat = X.reshape(-1, self.n)
        out = np.array([self.eval_J(x) for x in flat])
        return out.reshape(X.shape[:-1] + (self.m, self.n))

    def sample_interior(self, rng, size):
        """Uniform points from ``sample_box`` (falls back to ``grid_box``)."""
        box = self.sample_box or self.grid_box
        if box is None:
            raise ValueError(f"{self.name} declares no sampling box")
        lo, hi = (np.broadcast_to(np.asarray(b, float), (self.n,)) for b in box)
        rng = np.random.default_rng(rng)
        return rng.uniform(lo, hi, size=(size, self.n))

    def with_kernel(self, kernel):
        """Same objective under another kernel with the same feasible set.

        Constants are kept only when the kernel function itself is unchanged.
        """
        if kernel.domain != self.kernel.domain:
            raise ValidationError(
                f"cl(dom {kernel.name}) = {kernel.domain.kind} does not match "
                f"Omega = {self.kernel.domain.kind} of {self.name}",
                "kernel",
            )
        if kernel.name == self.kernel.name and kernel.n == self.kernel.n:
            return replace(self, kernel=kernel)
        return replace(self, kernel=kernel, L=None, mu=None)

    def with_cone(self, cone):
        if cone.same_as(self.cone):
            return self
        if cone.m != self.m:
            raise ValidationError(f"cone dimension {cone.m} != m={self.m}", "cone")
        return replace(self, cone=cone, L=None, mu=None)

    def with_constants(self, L=None, mu=None):
        return replace(self, L=L, mu=mu)


# --- relative-constant falsification samplers ----------------------------

@dataclass
class ConstantCheck:
    trials: int
    violations: int
    margin: float
    worst_pair: Optional[tuple] = None


def _default_pairs(problem, rng, trials):
    X = problem.sample_interior(rng, trials)
    Y = problem.sample_interior(rng, trials)
    return X, Y


def _constant_check(problem, const, sign, pair_sampler, trials, rng, tol):
    rng = np.random.default_rng(rng)
    if pair_sampler is None:
        X, Y = _default_pairs(problem, rng, trials)
    else:
        pairs = [pair_sampler(rng) for _ in range(trials)]
        X = np.array([p[0] for p in pairs], dtype=float)
        Y = np.array([p[1] for p in pairs], dtype=float)
    FX, FY = problem.F_batch(X), problem.F_batch(Y)
    JX = problem.J_batch(X)
    lin = FX + np.einsum("kmn,kn->km", JX, Y - X)
    D = problem.kernel.bregman(Y, X)
    bump = const * D[:, None] * problem.cone.e
    # smoothness: F(y) <=_C lin + L D e ; strong convexity: lin + mu D e <=_C F(y)
    resid = sign * (lin + bump - FY)
    slack = problem.cone.min_value(resid)
    scale = 1.0 + np.maximum(np.max(np.abs(FY), axis=1), np.max(np.abs(lin), axis=1))
    rel = slack / scale
    bad = rel < -tol
    i = int(np.argmin(rel))
    return ConstantCheck(trials, int(np.sum(bad)), float(rel[i]), (X[i], Y[i]))


def check_relative_smoothness(problem, pair_sampler=None, trials=10_000, rng=None, L=None, tol=1e-9):
    """Count sampled pairs violating ``F(y) <=_C F(x) + JF(x)(y-x) + L D(y,x) e``.

    ``margin`` is the worst slack, scaled by ``1 + |F|``.
    """
    L = problem.L if L is None else L
    if L is None:
        raise MissingConstant(f"{problem.name} declares no smoothness constant L")
    return _constant_check(problem, L, 1.0, pair_sampler, trials, rng, tol)


def check_relative_strong_convexity(problem, pair_sampler=None, trials=10_000, rng=None, mu=None, tol=1e-9):
    mu = problem.mu if mu is None else mu
    if mu is None:
        raise MissingConstant(f"{problem.name} declares no strong convexity constant mu")
    return _constant_check(problem, mu, -1.0, pair_sampler, trials, rng, tol)


# --- built-in suite -------------------------------------------------------

def _p1():
    def F(x):
        return 0.5 * np.sum(x * x, axis=-1, keepdims=True)

    def J(x):
        return np.asarray(x, float)[..., None, :]

    return VectorProblem(
        name="P1", n=2, m=1, F=F, J=J, kernel=SquaredNorm(2), cone=ConeOrder.orthant(1),
        L=1.0, mu=1.0, c_convex=True, bounded_sublevel=True,
        known_efficient=((0.0, 0.0),), dominated=((2.0, 0.0), (-1.0, 1.0)),
        x_star=(0.0, 0.0), grid_box=((-5.0, -5.0), (5.0, 5.0)), sample_box=((-3.0, -3.0), (3.0, 3.0)),
        vectorized=True, description="f(x) = ||x||^2 / 2, Euclidean kernel",
    )


def _p2():
    def F(x):
        x = np.asarray(x, float)[..., 0]
        return np.stack([0.5 * (x - 1) ** 2, 0.5 * (x + 1) ** 2], axis=-1)

    def J(x):
        x = np.asarray(x, float)
        return np.stack([x - 1, x + 1], axis=-2)

    return VectorProblem(
        name="P2", n=1, m=2, F=F, J=J, kernel=SquaredNorm(1), cone=ConeOrder.orthant(2),
        # both components have unit curvature; pairing with e = (1,1)/sqrt(2) costs sqrt(2)
        L=SQRT2, mu=SQRT2, c_convex=True, bounded_sublevel=True,
        known_efficient=((-1.0,), (-0.5,), (0.0,), (0.5,), (1.0,)),
        dominated=((2.0,), (-3.0,), (1.5,)),
        grid_box=((-5.0,), (5.0,)), sample_box=((-3.0,), (3.0,)),
        vectorized=True, description="F(x) = ((x-1)^2/2, (x+1)^2/2), weakly efficient set [-1, 1]",
    )


P3_CURV = np.array([[1.0, 3.0], [3.0, 1.0]])
P3_CENTER = np.array([[0.5, -0.3], [-0.4, 0.6]])
P3_BARRIER = 0.5


def _p3_efficient(lam):
    """Minimizer of lam F_1 + (1 - lam) F_2, coordinate by coordinate."""
    w = np.array([lam, 1.0 - lam])
    pt = []
    for j in range(2):
        def dphi(t, j=j):
            quad = np.sum(w * P3_CURV[:, j] * (t - P3_CENTER[:, j]))
            return quad + P3_BARRIER * (-1.0 / (t + 1.0) + 1.0 / (1.0 - t))

        pt.append(brentq(dphi, -1 + 1e-12, 1 - 1e-12, xtol=1e-15, rtol=8.9e-16))
    return tuple(pt)


def _p3():
    kernel = LogBarrier([-1.0, -1.0], [1.0, 1.0])

    def F(x):
        x = np.asarray(x, float)
        d = x[..., None, :] - P3_CENTER
        quad = 0.5 * np.sum(P3_CURV * d * d, axis=-1)
        bar = -np.sum(np.log(x + 1.0) + np.log(1.0 - x), axis=-1)
        return quad + P3_BARRIER * bar[..., None]

    def J(x):
        x = np.asarray(x, float)
        d = x[..., None, :] - P3_CENTER
        gbar = -1.0 / (x + 1.0) + 1.0 / (1.0 - x)
        return P3_CURV * d + P3_BARRIER * gbar[..., None, :]

    # L/sqrt(2) - beta >= max_i curv_ij / min barrier curvature (= 2 at the centre)
    L = SQRT2 * (P3_BARRIER + np.max(P3_CURV) * 4.0 / 8.0)
    return VectorProblem(
        name="P3", n=2, m=2, F=F, J=J, kernel=kernel, cone=ConeOrder.orthant(2),
        L=float(L), mu=float(SQRT2 * P3_BARRIER), c_convex=True, bounded_sublevel=True,
        known_efficient=tuple(_p3_efficient(t) for t in (0.0, 0.25, 0.5, 0.75, 1.0)),
        dominated=((0.9, 0.9), (-0.9, 0.85), (0.8, -0.9)),
        grid_box=((-1.0, -1.0), (1.0, 1.0)), sample_box=((-0.95, -0.95), (0.95, 0.95)),
        vectorized=True,
        description="quadratics with distinct curvatures plus a shared box barrier, log-barrier kernel",
    )


P4_A = np.array([[1.0, 2.0], [2.0, 1.0]])
P4_B = np.array([[0.0, -2.0 * np.log(2.0)], [-2.0 * np.log(2.0), 0.0]])


def _p4_efficient(lam):
    w = np.array([lam, 1.0 - lam])
    return tuple(np.exp(-(w @ P4_B) / (w @ P4_A)))


def _p4():
    def F(x):
        x = np.asarray(x, float)
        ent = xlogy(x, x) - x
        return ent @ P4_A.T + x @ P4_B.T

    def J(x):
        x = np.asarray(x, float)
        return P4_A * np.log(x)[..., None, :] + P4_B

    return VectorProblem(
        name="P4", n=2, m=2, F=F, J=J, kernel=ShannonEntropy(2), cone=ConeOrder.orthant(2),
        L=float(SQRT2 * np.max(P4_A)), mu=float(SQRT2 * np.min(P4_A)),
        c_convex=True, bounded_sublevel=True,
        known_efficient=tuple(_p4_efficient(t) for t in (0.0, 0.25, 0.5, 0.75, 1.0)),
        dominated=((3.0, 3.0), (0.2, 0.2), (0.5, 3.0)),
        grid_box=((1e-3, 1e-3), (4.0, 4.0)), sample_box=((0.2, 0.2), (3.0, 3.0)),
        vectorized=True,
        description="weighted entropies with linear tilts, Shannon kernel on the orthant",
    )


_SUITE = {"P1": _p1, "P2": _p2, "P3": _p3, "P4": _p4}
_REGISTRY = {}


def builtin_suite():
    return [build() for build in _SUITE.values()]


def register_problem(name, factory):
    """Register a plugin: ``factory() -> VectorProblem``."""
    if name in _SUITE:
        raise ValueError(f"{name!r} is reserved for the built-in suite")
    _REGISTRY[name] = factory


def get_problem(ref):
    """Resolve a suite id, a registered plugin name, or ``"module:attr"``."""
    if ref in _SUITE:
        return _SUITE[ref]()
    if ref in _REGISTRY:
        return _REGISTRY[ref]()
    if ":" in ref:
        mod, attr = ref.split(":", 1)
        obj = getattr(importlib.import_module(mod), attr)
        prob = obj() if callable(obj) and not isinstance(obj, VectorProblem) else obj
        if not isinstance(prob, VectorProblem):
            raise ValidationError(f"{ref} did not produce a VectorProblem", "problem")
        return prob
    raise ValidationError(f"unknown problem {ref!r}", "problem")
