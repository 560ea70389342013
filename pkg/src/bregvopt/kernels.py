"""Legendre kernels, their conjugates and Bregman distances.

Every kernel is separable, so all maps act coordinatewise and the scalar
quantities (values, distances) are summed over the last axis.  Inputs may
carry leading batch dimensions: ``x.shape == (..., n)``.

The Bregman distances are evaluated through the relative increment
``s = (x - y) / scale`` and a short power series when ``|s|`` is small, which
keeps ``D(x, y)`` accurate to a few ulps even when ``x`` and ``y`` agree to
eight or more digits.  The iterates of the solver live in exactly that regime.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import ConjugateRangeError, DomainViolation

_SERIES_CUTOFF = 0.05
_SERIES_TERMS = 14
_INV_FACTORIAL = {k: 1.0 / math.factorial(k) for k in range(2, _SERIES_TERMS + 2)}


@dataclass(frozen=True)
class Domain:
    """Closure of a kernel domain, which doubles as the feasible set.

    ``kind`` is one of ``"all"``, ``"orthant"`` or ``"box"``; ``lower`` and
    ``upper`` are only used by boxes.
    """

    kind: str
    lower: tuple = None
    upper: tuple = None

    def __post_init__(self):
        if self.kind not in ("all", "orthant", "box"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "box":
            lo = np.asarray(self.lower, dtype=float)
            hi = np.asarray(self.upper, dtype=float)
            if lo.shape != hi.shape or lo.ndim != 1 or np.any(hi <= lo):
                raise ValueError("box domain needs lower < upper, same length")
            object.__setattr__(self, "lower", tuple(float(v) for v in lo))
            object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    def margin(self, x):
        """Distance-like margin to the boundary; positive iff x is interior."""
        x = np.asarray(x, dtype=float)
        if self.kind == "all":
            return np.full(x.shape[:-1], np.inf)
        if self.kind == "orthant":
            return np.min(x, axis=-1)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.minimum(np.min(x - lo, axis=-1), np.min(hi - x, axis=-1))

    def is_interior(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.isfinite(x), axis=-1) & (self.margin(x) > 0)

    def is_closed_member(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.isfinite(x), axis=-1) & (self.margin(x) >= 0)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "box":
            d["lower"] = list(self.lower)
            d["upper"] = list(self.upper)
        return d


def _series(s, coef):
    """sum_{k>=2} coef(k) s^k by Horner's rule, for small |s|."""
    acc = np.zeros_like(s)
    for k in range(_SERIES_TERMS + 1, 1, -1):
        acc = acc * s + coef(k)
    return acc * s * s


def _burg_gap(s):
    """r - 1 - log r with r = 1 + s.  Nonnegative, zero only at s = 0."""
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < _SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = s - np.log1p(s)
    return np.where(small, _series(np.where(small, s, 0.0), lambda k: (-1) ** k / k), direct)


def _entropy_gap(s):
    """r log r - r + 1 with r = 1 + s.  Equals 1 at r = 0."""
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < _SERIES_CUTOFF
    r = 1.0 + s
    direct = xlogy(r, r) - s
    return np.where(
        small,
        _series(np.where(small, s, 0.0), lambda k: (-1) ** k / (k * (k - 1))),
        direct,
    )


def _exp_gap(d):
    """exp(d) - 1 - d."""
    d = np.asarray(d, dtype=float)
    small = np.abs(d) < _SERIES_CUTOFF
    return np.where(
        small,
        _series(np.where(small, d, 0.0), _INV_FACTORIAL.__getitem__),
        np.expm1(d) - d,
    )


class LegendreKernel:
    """Base class of the shipped Legendre kernels.

    Attributes
    ----------
    name : str
    n : int
        Ambient dimension.
    domain : Domain
        Closure of ``dom omega``; this is the feasible set of any problem
        paired with the kernel.
    sigma, kappa : float or None
        Strong convexity modulus and gradient Lipschitz modulus of the kernel
        w.r.t. the Euclidean norm.  When ``constants_box`` is set they only
        hold on that box.
    alpha : float
        Stored symmetry coefficient, a lower bound on
        ``inf D(x, y) / D(y, x)``.
    supercoercive : bool
    boundary_in_domain : bool
        Whether boundary points of ``domain`` belong to ``dom omega``.
    """

    name = "abstract"
    alpha = 0.0
    supercoercive = True
    boundary_in_domain = False
    grad_lipschitz_global = False

    def __init__(self, n, domain, sigma=None, kappa=None, constants_box=None):
        if int(n) < 1:
            raise ValueError("dimension must be positive")
        self.n = int(n)
        self.domain = domain
        self.sigma = sigma
        self.kappa = kappa
        self.constants_box = constants_box

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"

    # --- domain guards -------------------------------------------------
    def _interior(self, x, what="x"):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise DomainViolation(f"{what} must have trailing dimension {self.n}, got {x.shape}")
        if not np.all(self.domain.is_interior(x)):
            raise DomainViolation(f"{what} is not in the interior of dom {self.name}")
        return x

    def _in_dom(self, x, what="x"):
        if not self.boundary_in_domain:
            return self._interior(x, what)
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise DomainViolation(f"{what} must have trailing dimension {self.n}, got {x.shape}")
        if not np.all(self.domain.is_closed_member(x)):
            raise DomainViolation(f"{what} is not in dom {self.name}")
        return x

    def is_interior(self, x):
        return bool(np.all(self.domain.is_interior(x)))

    # --- public maps ---------------------------------------------------
    def omega(self, x):
        return self._omega(self._interior(x))

    def grad(self, x):
        return self._grad(self._interior(x))

    def grad_conj(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1:] != (self.n,):
            raise ConjugateRangeError(f"z must have trailing dimension {self.n}")
        if not np.all(np.isfinite(z)):
            raise ConjugateRangeError("z is not finite")
        return self._grad_conj(z)

    def conj(self, z):
        z = np.asarray(z, dtype=float)
        return self._conj(z)

    def bregman(self, x, y):
        """D(x, y) = omega(x) - omega(y) - <grad omega(y), x - y>."""
        x = self._in_dom(x, "x")
        y = self._interior(y, "y")
        return np.sum(self._bregman_terms(x, y), axis=-1)

    def bregman_conj(self, u, v):
        """Bregman distance of the conjugate, by its defining formula."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        gv = self.grad_conj(v)
        return self.conj(u) - self.conj(v) - np.sum(gv * (u - v), axis=-1)

    def params(self):
        """Constructor parameters, for config round-trips."""
        return {}

    def to_dict(self):
        return {"name": self.name, "n": self.n, **self.params()}

    def same_as(self, other):
        return isinstance(other, LegendreKernel) and self.to_dict() == other.to_dict()


class SquaredNorm(LegendreKernel):
    """omega(x) = ||x||^2 / 2 on R^n."""

    name = "squared_norm"
    alpha = 1.0
    grad_lipschitz_global = True

    def __init__(self, n):
        super().__init__(n, Domain("all"), sigma=1.0, kappa=1.0)

    def _omega(self, x):
        return 0.5 * np.sum(x * x, axis=-1)

    def _grad(self, x):
        return np.array(x, dtype=float, copy=True)

    def _grad_conj(self, z):
        return np.array(z, dtype=float, copy=True)

    def _conj(self, z):
        return 0.5 * np.sum(z * z, axis=-1)

    def _bregman_terms(self, x, y):
        d = x - y
        return 0.5 * d * d


class ShannonEntropy(LegendreKernel):
    """omega(x) = sum x_i log x_i - x_i on the closed orthant.

    ``bounds=(lo, hi)`` declares the constants ``sigma = 1/hi`` and
    ``kappa = 1/lo`` valid on the box ``[lo, hi]^n``.
    """

    name = "shannon"
    boundary_in_domain = True

    def __init__(self, n, bounds=None):
        sigma = kappa = box = None
        if bounds is not None:
            lo, hi = (float(b) for b in bounds)
            if not 0 < lo < hi:
                raise ValueError("need 0 < lo < hi")
            sigma, kappa, box = 1.0 / hi, 1.0 / lo, (lo, hi)
        super().__init__(n, Domain("orthant"), sigma=sigma, kappa=kappa, constants_box=box)

    def params(self):
        return {} if self.constants_box is None else {"bounds": list(self.constants_box)}

    def _omega(self, x):
        return np.sum(xlogy(x, x) - x, axis=-1)

    def _grad(self, x):
        return np.log(x)

    def _grad_conj(self, z):
        return np.exp(z)

    def _conj(self, z):
        return np.sum(np.exp(z), axis=-1)

    def _bregman_terms(self, x, y):
        return y * _entropy_gap((x - y) / y)

    def bregman_conj(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.sum(np.exp(v) * _exp_gap(u - v), axis=-1)


class BurgEntropy(LegendreKernel):
    """omega(x) = -sum log x_i on the open orthant.  Not supercoercive."""

    name = "burg"
    supercoercive = False

    def __init__(self, n, bounds=None):
        sigma = kappa = box = None
        if bounds is not None:
            lo, hi = (float(b) for b in bounds)
            if not 0 < lo < hi:
                raise ValueError("need 0 < lo < hi")
            sigma, kappa, box = 1.0 / hi**2, 1.0 / lo**2, (lo, hi)
        super().__init__(n, Domain("orthant"), sigma=sigma, kappa=kappa, constants_box=box)

    def params(self):
        return {} if self.constants_box is None else {"bounds": list(self.constants_box)}

    def _omega(self, x):
        return -np.sum(np.log(x), axis=-1)

    def _grad(self, x):
        return -1.0 / x

    def _grad_conj(self, z):
        if np.any(z >= 0):
            raise ConjugateRangeError("Burg conjugate gradient needs z < 0")
        return -1.0 / z

    def _conj(self, z):
        with np.errstate(invalid="ignore", divide="ignore"):
            val = -z.shape[-1] - np.sum(np.log(-z), axis=-1)
        return np.where(np.all(z < 0, axis=-1), val, np.inf)

    def _bregman_terms(self, x, y):
        return _burg_gap((x - y) / y)


class LogBarrier(LegendreKernel):
    """omega(x) = -sum log(x_i - a_i) + log(b_i - x_i) on the open box (a, b).

    The conjugate gradient is the root in (a, b) of
    ``-1/(t - a) + 1/(b - t) = z``, available in closed form.  ``sigma`` is
    global (``8 / max width^2``); ``kappa`` only exists on a sub-box given via
    ``bounds=(lo, hi)`` (vectors or scalars).
    """

    name = "log_barrier"

    def __init__(self, lower, upper, bounds=None):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        dom = Domain("box", tuple(lo), tuple(hi))
        self._a = np.asarray(dom.lower)
        self._b = np.asarray(dom.upper)
        width = self._b - self._a
        sigma = float(np.min(8.0 / width**2))
        kappa = box = None
        if bounds is not None:
            blo = np.broadcast_to(np.asarray(bounds[0], dtype=float), lo.shape)
            bhi = np.broadcast_to(np.asarray(bounds[1], dtype=float), lo.shape)
            if np.any(blo <= self._a) or np.any(bhi >= self._b) or np.any(bhi <= blo):
                raise ValueError("constants box must sit strictly inside the domain")
            # Hessian 1/(t-a)^2 + 1/(b-t)^2 is convex in t: max at a sub-box corner
            h_lo = 1 / (blo - self._a) ** 2 + 1 / (self._b - blo) ** 2
            h_hi = 1 / (bhi - self._a) ** 2 + 1 / (self._b - bhi) ** 2
            kappa = float(np.max(np.maximum(h_lo, h_hi)))
            box = (tuple(blo.tolist()), tuple(bhi.tolist()))
        super().__init__(lo.size, dom, sigma=sigma, kappa=kappa, constants_box=box)

    def params(self):
        p = {"lower": list(self.domain.lower), "upper": list(self.domain.upper)}
        if self.constants_box is not None:
            p["bounds"] = [list(self.constants_box[0]), list(self.constants_box[1])]
        return p

    def _omega(self, x):
        return -np.sum(np.log(x - self._a) + np.log(self._b - x), axis=-1)

    def _grad(self, x):
        return -1.0 / (x - self._a) + 1.0 / (self._b - x)

    def _grad_conj(self, z):
        # with s = x - c, c the centre and h the half-width: z s^2 + 2 s - z h^2 = 0
        h = 0.5 * (self._b - self._a)
        c = 0.5 * (self._a + self._b)
        zh = z * h
        s = h * zh / (1.0 + np.hypot(1.0, zh))
        return np.clip(c + s, np.nextafter(self._a, self._b), np.nextafter(self._b, self._a))

    def _conj(self, z):
        x = self._grad_conj(z)
        return np.sum(x * z, axis=-1) - self._omega(x)

    def _bregman_terms(self, x, y):
        return _burg_gap((x - y) / (y - self._a)) + _burg_gap((y - x) / (self._b - y))


KERNELS = {
    "squared_norm": SquaredNorm,
    "shannon": ShannonEntropy,
    "burg": BurgEntropy,
    "log_barrier": LogBarrier,
}


def make_kernel(spec):
    """Build a kernel from ``{"name": ..., "n": ..., **params}``."""
    spec = dict(spec)
    name = spec.pop("name")
    if name not in KERNELS:
        raise KeyError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}")
    if name == "log_barrier":
        spec.pop("n", None)
        return LogBarrier(**spec)
    return KERNELS[name](**spec)


def estimate_alpha(kernel, sampler, trials, rng=None):
    """Smallest sampled ratio ``D(x, y) / D(y, x)``.

    Each sampled pair is scored in both orders, so the result lies in
    ``[0, 1]``.  Being a minimum over samples, it is an upper bound on the
    true symmetry coefficient.

    Parameters
    ----------
    sampler : callable
        ``sampler(rng) -> (x, y)`` drawing interior points.
    trials : int
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    best = 1.0
    for _ in range(trials):
        x, y = sampler(rng)
        while np.array_equal(x, y):
            x, y = sampler(rng)
        dxy = float(kernel.bregman(x, y))
        dyx = float(kernel.bregman(y, x))
        if dxy <= 0 or dyx <= 0:
            continue
        r = dxy / dyx
        best = min(best, r, 1.0 / r)
    return best


def looks_supercoercive(kernel, rng=None, rays=16, decades=range(1, 16)):
    """Sample ``omega(t d) / ||t d||`` along rays for growing t.

    Bounded domains are supercoercive trivially.  Otherwise the growth of
    the ratio per decade of t must stay bounded away from zero on the tail,
    which separates ``log t`` growth (entropy) from a vanishing ratio (Burg).
    """
    if kernel.domain.kind == "box":
        return True
    rng = np.random.default_rng(rng)
    d = rng.standard_normal((rays, kernel.n))
    if kernel.domain.kind == "orthant":
        d = np.abs(d) + 1e-3
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    ts = np.array([10.0**k for k in decades])
    ratios = np.array([kernel.omega(t * d) / t for t in ts])
    tail = np.diff(ratios, axis=0)[-5:]
    return bool(np.all(tail > 0.1))
