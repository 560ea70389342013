"""Ordering cones described through their dual, and linear oracles over G.

``G`` is the convex hull of the unit-norm elements of the dual cone.  Linear
forms attain their extrema over ``conv(S)`` on ``S`` itself, so for the
nonnegative orthant both oracles are closed-form:

    min_{c in G} <c, u> = -||u_-||    if u has a negative entry, else min_i u_i
    max_{c in G} <c, u> =  ||u_+||    if u has a positive entry, else max_i u_i

For a cone given by finitely many dual generators, ``G`` is realized as the
convex hull of the normalized generators.  This is a subset of the true ``G``
whenever the dual cone is not simplicial; ``ConeOrder.g_is_exact`` records it.
"""
import numpy as np

from .errors import DegenerateDirection, UnsupportedCone

E_SOLVER_ITERS = 10_000


def _normalize_rows(v):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(nrm == 0):
        raise ValueError("dual generators must be nonzero")
    return v / nrm


class ConeOrder:
    """Ordering cone ``C`` together with ``G``, ``e`` and ``delta``.

    Use :meth:`orthant` or :meth:`from_generators` to build one.  After
    construction ``e`` is normalized so that ``max_{c in G} <c, e> = 1`` and
    ``delta = min_{c in G} <c, e>``.
    """

    def __init__(self, m, kind, generators, e=None, solve_e=True):
        self.m = int(m)
        self.kind = kind
        self.generators = _normalize_rows(generators)
        if self.generators.shape[1] != self.m:
            raise ValueError("generator length must equal m")
        self.g_is_exact = kind == "orthant" or self.m == 1
        self._e_supplied = e is not None
        if e is None:
            if kind != "orthant" and not solve_e:
                raise UnsupportedCone("no canonical direction for a non-orthant cone without e")
            e = np.ones(self.m) if kind == "orthant" else self._solve_e()
        e = np.asarray(e, dtype=float).reshape(self.m)
        if np.any(self.generators @ e <= 0):
            raise DegenerateDirection("e must pair positively with every dual generator")
        self.e = e / self.max_value(e)
        self.delta = float(self.min_value(self.e))
        self.r = float(np.linalg.norm(self.e))
        if not self.delta > 0:
            raise UnsupportedCone("G contains the origin; the cone is not pointed")

    @classmethod
    def orthant(cls, m, e=None):
        return cls(m, "orthant", np.eye(m), e=e)

    @classmethod
    def from_generators(cls, vectors, e=None, solve_e=True):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        if np.linalg.matrix_rank(vectors) < vectors.shape[1]:
            raise UnsupportedCone("dual generators must span R^m (C needs a nonempty interior)")
        return cls(vectors.shape[1], "generators", vectors, e=e, solve_e=solve_e)

    def __repr__(self):
        return f"ConeOrder(kind={self.kind!r}, m={self.m})"

    def to_dict(self):
        if self.kind == "orthant":
            d = {"type": "orthant", "m": self.m}
        else:
            d = {"type": "generators", "vectors": self.generators.tolist()}
        if self._e_supplied:
            d["e"] = self.e.tolist()
        return d

    def same_as(self, other):
        return (
            isinstance(other, ConeOrder)
            and self.kind == other.kind
            and self.m == other.m
            and np.array_equal(self.generators, other.generators)
            and np.array_equal(self.e, other.e)
        )

    # --- oracles -------------------------------------------------------
    def min_value(self, u):
        """``min_{c in G} <c, u>`` for ``u`` of shape ``(..., m)``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "orthant":
            neg = np.maximum(-u, 0.0)
            big = np.max(neg, axis=-1, keepdims=True)
            safe = np.where(big > 0, big, 1.0)
            nrm = safe[..., 0] * np.linalg.norm(neg / safe, axis=-1)
            return np.where(np.any(u < 0, axis=-1), -nrm, np.min(u, axis=-1))
        return np.min(u @ self.generators.T, axis=-1)

    def max_value(self, u):
        """Support function ``phi(u) = max_{c in G} <c, u>``."""
        return -self.min_value(-np.asarray(u, dtype=float))

    def min_over_G(self, u):
        """Return ``(value, argmin)`` for a single vector ``u``.

        The minimizer is an extreme point of ``G``.
        """
        u = np.asarray(u, dtype=float).reshape(self.m)
        if self.kind == "orthant":
            if np.any(u < 0):
                neg = np.maximum(-u, 0.0)
                big = np.max(neg)
                direction = neg / big  # rescaled so the norm cannot underflow
                direction /= np.linalg.norm(direction)
                return -big * float(np.linalg.norm(neg / big)), direction
            i = int(np.argmin(u))
            c = np.zeros(self.m)
            c[i] = 1.0
            return float(u[i]), c
        vals = self.generators @ u
        i = int(np.argmin(vals))
        return float(vals[i]), self.generators[i].copy()

    def phi(self, u):
        return float(self.max_value(u))

    def dominated(self, y, y_ref, tol=0.0):
        """True when ``y <=_C y_ref`` up to ``tol``."""
        return bool(self.min_value(np.asarray(y_ref) - np.asarray(y)) >= -tol)

    def _extreme_ratio(self, num, den):
        den_vals = self.generators @ den
        if np.any(den_vals <= 0):
            raise DegenerateDirection("direction must lie in the interior of C")
        # ratios of linear forms over cone(generators) peak at a generator
        return (self.generators @ num) / den_vals

    def rescale_smoothness(self, e_old, e_new, L_old):
        """Smoothness constant after switching the reference direction.

        ``gamma = max_{c in G} <c, e_old> / <c, e_new>``; returns
        ``gamma * L_old``.
        """
        ratios = self._extreme_ratio(np.asarray(e_old, float), np.asarray(e_new, float))
        return float(np.max(ratios)) * L_old

    def rescale_strong_convexity(self, e_old, e_new, mu_old):
        ratios = self._extreme_ratio(np.asarray(e_old, float), np.asarray(e_new, float))
        return float(np.min(ratios)) * mu_old

    def sample_G(self, rng, size):
        """Random points of G (convex combinations of extreme points)."""
        rng = np.random.default_rng(rng)
        if self.kind == "orthant":
            k = self.m + 1
            ext = np.abs(rng.standard_normal((size, k, self.m)))
            ext /= np.linalg.norm(ext, axis=-1, keepdims=True)
        else:
            k = len(self.generators)
            ext = np.broadcast_to(self.generators, (size, k, self.m))
        w = rng.dirichlet(np.ones(k), size=size)
        return np.einsum("sk,skm->sm", w, ext)

    def sample_extreme(self, rng, size):
        rng = np.random.default_rng(rng)
        if self.kind == "orthant":
            c = np.abs(rng.standard_normal((size, self.m)))
            return c / np.linalg.norm(c, axis=1, keepdims=True)
        return self.generators[rng.integers(len(self.generators), size=size)]

    def _solve_e(self):
        """Projected subgradient ascent on ``c -> min_i <g_i, c>`` over the unit ball."""
        gens = self.generators
        c = gens.mean(axis=0)
        c /= np.linalg.norm(c) or 1.0
        best_c, best_val = c.copy(), np.min(gens @ c)
        for k in range(E_SOLVER_ITERS):
            i = int(np.argmin(gens @ c))
            c = c + gens[i] / np.sqrt(k + 1.0)
            c /= max(1.0, np.linalg.norm(c))
            val = np.min(gens @ c)
            if val > best_val:
                best_c, best_val = c.copy(), val
        return best_c


def canonical_e(cone):
    """The normalized reference direction ``e`` and the constant ``delta``."""
    return cone.e.copy(), cone.delta


def rescale_smoothness(cone, e_old, e_new, L_old):
    return cone.rescale_smoothness(e_old, e_new, L_old)


def make_cone(spec):
    """Build a cone from ``{"type": "orthant", "m": 2}`` or
    ``{"type": "generators", "vectors": [...]}`` (optional ``"e"``)."""
    kind = spec.get("type")
    e = spec.get("e")
    if kind == "orthant":
        return ConeOrder.orthant(int(spec["m"]), e=e)
    if kind == "generators":
        return ConeOrder.from_generators(spec["vectors"], e=e)
    raise UnsupportedCone(f"unknown cone type {kind!r}")
