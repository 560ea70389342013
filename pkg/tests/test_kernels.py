import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from bregvopt.errors import ConjugateRangeError, DomainViolation
from bregvopt.kernels import (
    BurgEntropy,
    Domain,
    LogBarrier,
    ShannonEntropy,
    SquaredNorm,
    estimate_alpha,
    looks_supercoercive,
    make_kernel,
)

mpmath.mp.dps = 50


def sample(rng, lo, hi, size, n=2):
    return rng.uniform(lo, hi, size=(size, n))


# --- point values ---------------------------------------------------------

def test_omega_values():
    assert SquaredNorm(2).omega([2.0, 0.0]) == 2.0
    assert_allclose(ShannonEntropy(2).omega([1.0, 1.0]), -2.0, rtol=1e-15)
    assert_allclose(BurgEntropy(2).omega([1.0, np.e]), -1.0, rtol=1e-15)


def test_gradients_and_conjugate_gradients():
    sh = ShannonEntropy(2)
    assert_allclose(sh.grad([1.0, np.e]), [0.0, 1.0], atol=1e-15)
    assert_allclose(sh.grad_conj([0.0, 1.0]), [1.0, np.e], rtol=1e-15)
    assert_array_equal(SquaredNorm(2).grad([3.0, -1.0]), [3.0, -1.0])
    burg = BurgEntropy(1)
    assert_allclose(burg.grad([2.0]), [-0.5])
    assert_allclose(burg.grad_conj([-0.5]), [2.0])


def test_bregman_values():
    assert SquaredNorm(2).bregman([2.0, 0.0], [0.0, 0.0]) == 2.0
    assert_allclose(ShannonEntropy(2).bregman([2.0, 1.0], [1.0, 1.0]), 2 * np.log(2) - 1,
                    rtol=1e-14)
    for kern, pt in [(SquaredNorm(2), [0.3, -2.0]), (ShannonEntropy(2), [0.3, 2.0]),
                     (BurgEntropy(2), [0.3, 2.0]), (LogBarrier(-1.0, 1.0), [0.3])]:
        assert kern.bregman(pt, pt) == 0.0


def test_shannon_accepts_boundary_first_argument():
    # omega(0, 1) = -1, omega(1, 1) = -2, grad omega(1, 1) = 0
    assert_allclose(ShannonEntropy(2).bregman([0.0, 1.0], [1.0, 1.0]), 1.0, rtol=1e-15)
    with pytest.raises(DomainViolation):
        ShannonEntropy(2).bregman([1.0, 1.0], [0.0, 1.0])
    with pytest.raises(DomainViolation):
        ShannonEntropy(2).omega([0.0, 1.0])


@pytest.mark.parametrize("kern,bad", [
    (ShannonEntropy(2), [-1.0, 1.0]),
    (BurgEntropy(2), [0.0, 1.0]),
    (LogBarrier(-1.0, 1.0), [1.0]),
    (LogBarrier(-1.0, 1.0), [-1.5]),
])
def test_domain_violations(kern, bad):
    with pytest.raises(DomainViolation):
        kern.omega(bad)
    with pytest.raises(DomainViolation):
        kern.grad(bad)
    good = np.full(kern.n, 0.5)
    with pytest.raises(DomainViolation):
        kern.bregman(bad, good)


def test_burg_conjugate_range():
    with pytest.raises(ConjugateRangeError):
        BurgEntropy(1).grad_conj([0.5])


def test_log_barrier_conjugate_gradient_extreme_range():
    # oracle: 2t / (1 - t^2) = z has root t = (sqrt(1 + z^2) - 1) / z, in 50 digits
    kern = LogBarrier([-1.0], [1.0])
    for z in (-1e12, -1e3, -1e-9, 0.0, 1e-9, 1e3, 1e12):
        zm = mpmath.mpf(z)
        ref = 0 if z == 0 else (mpmath.sqrt(1 + zm * zm) - 1) / zm
        x = kern.grad_conj([z])
        assert kern.is_interior(x)
        assert_allclose(x[0], float(ref), rtol=2e-16, atol=1e-300)


# --- identities on random samples ------------------------------------------

def test_conjugate_round_trip(kernel_case, rng):
    kern, lo, hi = kernel_case
    X = sample(rng, lo, hi, 1000)
    assert_allclose(kern.grad_conj(kern.grad(X)), X, rtol=1e-10, atol=1e-12)


def test_conjugate_distance_identity(kernel_case, rng):
    kern, lo, hi = kernel_case
    X, Y = sample(rng, lo, hi, 1000), sample(rng, lo, hi, 1000)
    lhs = kern.bregman(X, Y)
    rhs = kern.bregman_conj(kern.grad(Y), kern.grad(X))
    assert_allclose(rhs, lhs, rtol=1e-8, atol=1e-12)


def test_three_points_identity(kernel_case, rng):
    kern, lo, hi = kernel_case
    A, B, C = (sample(rng, lo, hi, 1000) for _ in range(3))
    lhs = np.sum((kern.grad(B) - kern.grad(A)) * (C - A), axis=-1)
    rhs = kern.bregman(C, A) + kern.bregman(A, B) - kern.bregman(C, B)
    scale = np.abs(kern.bregman(C, A)) + np.abs(kern.bregman(A, B)) + np.abs(kern.bregman(C, B))
    assert np.all(np.abs(lhs - rhs) <= 1e-8 * scale + 1e-12)


def test_gradient_matches_finite_differences(kernel_case, rng):
    kern, lo, hi = kernel_case
    X = sample(rng, lo, hi, 100)
    h = 1e-6
    fd = np.stack([(kern.omega(X + h * e) - kern.omega(X - h * e)) / (2 * h) for e in np.eye(2)], -1)
    g = kern.grad(X)
    assert np.max(np.abs(fd - g) / (1 + np.abs(g))) <= 1e-6


def test_bregman_nonnegative_and_definite(kernel_case, rng):
    kern, lo, hi = kernel_case
    X, Y = sample(rng, lo, hi, 1000), sample(rng, lo, hi, 1000)
    D = kern.bregman(X, Y)
    assert np.all(D > 0)
    assert np.all(kern.bregman(X, X) == 0)


def _mp_bregman(kern, x, y):
    """50-digit evaluation of the defining formula."""
    x = [mpmath.mpf(float(v)) for v in x]
    y = [mpmath.mpf(float(v)) for v in y]
    if isinstance(kern, SquaredNorm):
        w = lambda t: t * t / 2  # noqa: E731
        dw = lambda t: t  # noqa: E731
    elif isinstance(kern, ShannonEntropy):
        w = lambda t: t * mpmath.log(t) - t  # noqa: E731
        dw = mpmath.log
    elif isinstance(kern, BurgEntropy):
        w = lambda t: -mpmath.log(t)  # noqa: E731
        dw = lambda t: -1 / t  # noqa: E731
    else:
        a, b = kern.domain.lower, kern.domain.upper
        out = 0
        for xi, yi, ai, bi in zip(x, y, a, b):
            wi = lambda t: -mpmath.log(t - ai) - mpmath.log(bi - t)  # noqa: E731
            dwi = -1 / (yi - ai) + 1 / (bi - yi)
            out += wi(xi) - wi(yi) - dwi * (xi - yi)
        return float(out)
    return float(sum(w(a) - w(b) - dw(b) * (a - b) for a, b in zip(x, y)))


@pytest.mark.parametrize("gap", [1e-1, 1e-3, 1e-6, 1e-9])
def test_bregman_against_high_precision(kernel_case, rng, gap):
    # close pairs exercise the series branch, far pairs the direct one
    kern, lo, hi = kernel_case
    lo = np.broadcast_to(lo, (2,)) + 0.1
    hi = np.broadcast_to(hi, (2,)) - 0.1
    for _ in range(20):
        y = rng.uniform(lo, hi)
        x = np.clip(y * (1 + gap * rng.standard_normal(2)), lo, hi)
        ref = _mp_bregman(kern, x, y)
        assert_allclose(kern.bregman(x, y), ref, rtol=1e-11, atol=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 50.0), min_size=6, max_size=6))
def test_three_points_identity_shannon_property(vals):
    kern = ShannonEntropy(2)
    a, b, c = np.array(vals).reshape(3, 2)
    lhs = (kern.grad(b) - kern.grad(a)) @ (c - a)
    rhs = kern.bregman(c, a) + kern.bregman(a, b) - kern.bregman(c, b)
    scale = kern.bregman(c, a) + kern.bregman(a, b) + kern.bregman(c, b)
    assert abs(lhs - rhs) <= 1e-8 * scale + 1e-12


# --- symmetry coefficient and constants --------------------------------------

def test_alpha_squared_norm(rng):
    kern = SquaredNorm(2)
    est = estimate_alpha(kern, lambda r: (r.normal(size=2), r.normal(size=2)), 500, rng)
    assert_allclose(est, 1.0, rtol=1e-12)
    assert kern.alpha <= est


def test_alpha_shannon_vanishes_towards_boundary(rng):
    kern = ShannonEntropy(2)
    estimates = []
    # D(eps, y) stays bounded while D(y, eps) grows like log(1/eps)
    for eps in (1e-1, 1e-4, 1e-16, 1e-300):
        est = estimate_alpha(kern, lambda r: (r.uniform(eps, 2 * eps, 2), r.uniform(0.5, 2.0, 2)),
                             200, rng)
        estimates.append(est)
    assert estimates[0] > estimates[1] > estimates[2]
    assert estimates[-1] < 0.01
    assert kern.alpha == 0.0


def test_alpha_burg_estimate(rng):
    kern = BurgEntropy(2)
    est = estimate_alpha(kern, lambda r: (r.uniform(0.1, 10, 2), r.uniform(0.1, 10, 2)), 10_000, rng)
    assert 0 < est < 1
    assert kern.alpha <= est


def test_estimate_alpha_resamples_equal_pairs(rng):
    calls = iter([(np.ones(2), np.ones(2)), (np.ones(2), 2 * np.ones(2))])
    assert estimate_alpha(SquaredNorm(2), lambda r: next(calls), 1, rng) == 1.0


def test_supercoercive_flags(rng):
    assert looks_supercoercive(SquaredNorm(2), rng)
    assert looks_supercoercive(ShannonEntropy(2), rng)
    assert not looks_supercoercive(BurgEntropy(2), rng)
    assert looks_supercoercive(LogBarrier(-1.0, 1.0), rng)
    for kern in (SquaredNorm(2), ShannonEntropy(2), BurgEntropy(2), LogBarrier(-1.0, 1.0)):
        assert kern.supercoercive == looks_supercoercive(kern, rng)


@pytest.mark.parametrize("kern,lo,hi", [
    (SquaredNorm(2), -5.0, 5.0),
    (ShannonEntropy(2, bounds=(0.5, 4.0)), 0.5, 4.0),
    (BurgEntropy(2, bounds=(0.5, 4.0)), 0.5, 4.0),
    (LogBarrier([-1.0, -1.0], [1.0, 1.0], bounds=(-0.8, 0.8)), -0.8, 0.8),
])
def test_declared_sigma_kappa_sandwich(kern, lo, hi, rng):
    U, V = sample(rng, lo, hi, 2000), sample(rng, lo, hi, 2000)
    D = kern.bregman(U, V)
    sq = np.sum((U - V) ** 2, axis=-1)
    assert np.all(kern.sigma / 2 * sq <= D * (1 + 1e-12))
    assert np.all(D <= kern.kappa / 2 * sq * (1 + 1e-12))


def test_log_barrier_global_sigma(rng):
    kern = LogBarrier([-1.0, 0.0], [1.0, 3.0])
    assert_allclose(kern.sigma, 8.0 / 9.0)
    assert kern.kappa is None
    U = rng.uniform([-0.999, 0.001], [0.999, 2.999], (2000, 2))
    V = rng.uniform([-0.999, 0.001], [0.999, 2.999], (2000, 2))
    assert np.all(kern.sigma / 2 * np.sum((U - V) ** 2, -1) <= kern.bregman(U, V) * (1 + 1e-12))


def test_batch_shapes():
    kern = ShannonEntropy(3)
    X = np.ones((4, 5, 3))
    assert kern.omega(X).shape == (4, 5)
    assert kern.bregman(X, 2 * X).shape == (4, 5)


def test_make_kernel_round_trip():
    for kern in (SquaredNorm(3), ShannonEntropy(2, bounds=(0.1, 2.0)), BurgEntropy(1),
                 LogBarrier([-1.0, 0.0], [1.0, 2.0], bounds=([-0.5, 0.5], [0.5, 1.5]))):
        again = make_kernel(kern.to_dict())
        assert again.same_as(kern)
    with pytest.raises(KeyError):
        make_kernel({"name": "nope", "n": 2})


def test_domain_descriptor():
    box = Domain("box", (0.0, -1.0), (1.0, 1.0))
    assert box.is_interior([0.5, 0.0])
    assert not box.is_interior([1.0, 0.0])
    assert box.is_closed_member([1.0, 0.0])
    with pytest.raises(ValueError):
        Domain("box", (1.0,), (0.0,))
    with pytest.raises(ValueError):
        Domain("ball")
