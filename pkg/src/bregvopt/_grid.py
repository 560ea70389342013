"""Dense-grid maximization with zoom refinement, used by the brute-force oracles."""
import numpy as np
from scipy.optimize import minimize

from .errors import DimensionTooLarge

MAX_DIM = 3
DEFAULT_POINTS = {1: 10_001, 2: 401, 3: 61}


def _mesh(lo, hi, points):
    axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _epigraph_refine(pieces, y0, f0, lo, hi):
    """Maximize ``min_i pieces(y)_i`` locally via the smooth epigraph form."""
    n = y0.size

    def cons(z):
        with np.errstate(all="ignore"):
            out = pieces(z[None, :n])[0] - z[n]
        return np.where(np.isfinite(out), out, -1e300)

    z0 = np.append(y0, f0)
    bounds = [(a, b) for a, b in zip(lo, hi)] + [(None, None)]
    res = minimize(lambda z: -z[n], z0, jac=lambda z: np.eye(n + 1)[n] * -1.0,
                   method="SLSQP", bounds=bounds,
                   constraints=[{"type": "ineq", "fun": cons}],
                   options={"ftol": 1e-15, "maxiter": 500})
    return res.x[:n]


def grid_maximize(objective, lo, hi, domain, points=None, passes=200, zoom_points=41,
                  resolution=1e-12, pieces=None):
    """Maximize ``objective(Y) -> (N,)`` over the box ``[lo, hi]``.

    A full grid is scanned first; then a window of +-5 grid steps around the
    best node is re-gridded with ``zoom_points`` per axis, repeatedly, until
    the step drops below ``resolution``.  When the best node of a window lies
    on its edge the window is moved there without shrinking, so the search
    can follow a ridge.  Points outside the interior of ``domain`` are
    skipped.  Only meant for ``n <= 3``.

    If ``objective`` is a pointwise minimum of smooth functions near the
    maximizer, pass them as ``pieces(Y) -> (N, k)``; the best node is then
    polished by SQP on the epigraph form.  The polished point is scored with
    ``objective`` itself and only kept if it improves on the grid.

    Returns
    -------
    value : float
    argmax : ndarray
    coarse_step : float
        Step of the initial full grid.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    if n > MAX_DIM:
        raise DimensionTooLarge(f"brute-force grids need n <= {MAX_DIM}, got {n}")
    points = points or DEFAULT_POINTS[n]

    def scan(a, b, k):
        Y = _mesh(a, b, k)
        ok = domain.is_interior(Y)
        vals = np.full(len(Y), -np.inf)
        if np.any(ok):
            vals[ok] = objective(Y[ok])
        i = int(np.argmax(vals))
        return vals[i], Y[i]

    best, y = scan(lo, hi, points)
    if not np.isfinite(best):
        raise ValueError("no interior grid point in the search box")
    step = (hi - lo) / (points - 1)
    coarse = float(np.max(step))
    for _ in range(passes):
        if np.max(step) < resolution:
            break
        a = np.maximum(y - 5 * step, lo)
        b = np.minimum(y + 5 * step, hi)
        val, y_new = scan(a, b, zoom_points)
        if val >= best:
            best, y = val, y_new
        on_edge = np.any(((y == a) & (a > lo)) | ((y == b) & (b < hi)))
        if not on_edge:
            step = (b - a) / (zoom_points - 1)
    if pieces is not None:
        y_ref = _epigraph_refine(pieces, y, best, lo, hi)
        if domain.is_interior(y_ref):
            val = float(objective(y_ref[None, :])[0])
            if val > best:
                best, y = val, y_ref
    return float(best), y, coarse
