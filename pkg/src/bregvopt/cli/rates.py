"""Empirical rate fits for a finished run."""
import numpy as np
from scipy.stats import linregress

from ..errors import InsufficientData

MIN_RECORDS = 5
D_FLOOR = 1e-14


def fit_rates(report, x_star=None):
    """Fit the sublinear and linear rate summaries of a trajectory.

    Parameters
    ----------
    report : SolveReport
    x_star : array_like, optional
        Limit point; without it only the sublinear constant is fitted.

    Returns
    -------
    dict
        ``sublinear_constant = max_k k min_{p<k} v(x^p)``,
        ``linear_ratio_geomean`` of consecutive ``D(x*, x^k)`` ratios and the
        ``r_squared`` of a least-squares line through ``log D(x*, x^k)``.

    Raises
    ------
    InsufficientData
        Fewer than five records with positive ``v`` (and positive
        ``D(x*, x^k)`` when ``x_star`` is given).
    """
    v = np.array([r.v_ell for r in report.records])
    pos = v[v > 0]
    if pos.size < MIN_RECORDS:
        raise InsufficientData(f"need {MIN_RECORDS} records with v > 0, have {pos.size}")
    k = np.arange(1, v.size + 1)
    out = {
        "sublinear_constant": float(np.max(k * np.minimum.accumulate(v))),
        "linear_ratio_geomean": None,
        "r_squared": None,
    }
    if x_star is None:
        return out
    kernel = report.problem.kernel
    x_star = np.asarray(x_star, dtype=float)
    D = np.array([float(kernel.bregman(x_star, r.x)) for r in report.records])
    # keep the leading run above the floor
    below = np.flatnonzero(D < D_FLOOR)
    n_use = int(below[0]) if below.size else D.size
    if n_use < MIN_RECORDS:
        raise InsufficientData(f"need {MIN_RECORDS} records with D(x*, x^k) >= {D_FLOOR:g}")
    D = D[:n_use]
    logD = np.log(D)
    out["linear_ratio_geomean"] = float(np.exp(np.mean(np.diff(logD))))
    fit = linregress(np.arange(n_use), logD)
    out["r_squared"] = float(fit.rvalue ** 2)
    return out
