import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bregvopt.cone import ConeOrder
from bregvopt.errors import DomainViolation, InvalidStep, NotSupercoercive
from bregvopt.kernels import BurgEntropy
from bregvopt.problems import VectorProblem, get_problem
from bregvopt.subproblem import DualOptions, brute_force_subproblem, solve_dual

SUITE = ["P1", "P2", "P3", "P4"]
TIGHT = DualOptions(dual_gap_tol=1e-12)


def test_p2_at_efficient_origin():
    cert = solve_dual(get_problem("P2"), [0.0], 1.0, TIGHT)
    assert cert.v_value <= 1e-12
    assert_allclose(cert.V, [0.0], atol=1e-6)
    assert cert.dual_gap <= 1e-12


def test_p2_at_two():
    cert = solve_dual(get_problem("P2"), [2.0], 1.0, TIGHT)
    assert_allclose(cert.c, [1.0, 0.0], atol=1e-8)
    assert_allclose(cert.V, [1.0], rtol=1e-8)
    assert_allclose(cert.v_value, 0.5, rtol=1e-8)
    # <c, JF(2)(2 - 1)> = 1 = ell (D(x,V) + D(V,x))
    lin = cert.c @ (get_problem("P2").eval_J([2.0]) @ (cert.x - cert.V))
    assert_allclose(lin, 1.0, rtol=1e-8)
    assert all(cert.checks(get_problem("P2").kernel).values())


def test_scalar_problem_is_a_gradient_step():
    p1 = get_problem("P1")
    cert = solve_dual(p1, [2.0, 0.0], 1.0)
    assert_allclose(cert.V, [0.0, 0.0], atol=1e-15)
    assert_allclose(cert.v_value, 2.0)
    rng = np.random.default_rng(5)
    for x, ell in zip(rng.normal(size=(20, 2)), rng.uniform(0.5, 5, 20)):
        grad = p1.eval_J(x)[0]
        assert_allclose(solve_dual(p1, x, ell).V, x - grad / ell, rtol=1e-12, atol=1e-14)


def test_oracle_examples():
    v, y, step = brute_force_subproblem(get_problem("P2"), [2.0], 1.0)
    assert abs(v - 0.5) <= 2e-3 and abs(y[0] - 1.0) <= 2e-3
    v0, _, _ = brute_force_subproblem(get_problem("P2"), [0.0], 1.0)
    assert abs(v0) <= 2e-3
    v1, _, _ = brute_force_subproblem(get_problem("P1"), [2.0, 0.0], 1.0)
    assert abs(v1 - 2.0) <= 2e-3


@pytest.mark.parametrize("name", SUITE)
def test_dual_matches_grid_oracle(name):
    p = get_problem(name)
    rng = np.random.default_rng(11)
    worst = 0.0
    for x in p.sample_interior(rng, 50 if p.n == 1 else 15):
        ell = p.L if p.L else 1.0
        cert = solve_dual(p, x, ell, TIGHT)
        v, y, _ = brute_force_subproblem(p, x, ell)
        worst = max(worst, abs(cert.v_value - v) / (1 + cert.v_value))
        assert np.linalg.norm(y - cert.V) <= 1e-4 * (1 + np.linalg.norm(cert.V))
    assert worst <= 5e-3
    # the polished oracle is far tighter than the 5e-3 allowance
    assert worst <= 1e-8


@pytest.mark.parametrize("name", SUITE)
def test_certificate_invariants_at_random_points(name, rng):
    p = get_problem(name)
    for x in p.sample_interior(rng, 30):
        for ell in (0.5, 1.0, 3.0):
            cert = solve_dual(p, x, ell)
            assert all(cert.checks(p.kernel).values()), cert
            assert cert.v_value >= 0


@pytest.mark.parametrize("name", SUITE)
def test_merit_zero_exactly_at_efficient_points(name):
    p = get_problem(name)
    ell = p.L or 1.0
    for x in p.known_efficient:
        assert solve_dual(p, x, ell, TIGHT).v_value <= 1e-8
    for x in p.dominated:
        assert solve_dual(p, x, ell, TIGHT).v_value >= 1e-4


@pytest.mark.parametrize("name", SUITE)
def test_monotone_in_ell(name, rng):
    p = get_problem(name)
    for x in p.sample_interior(rng, 20):
        ells = np.sort(rng.uniform(0.2, 8.0, 4))
        vals = [solve_dual(p, x, e, TIGHT).v_value for e in ells]
        assert np.all(np.diff(vals) <= 1e-10 * (1 + max(vals)))


@pytest.mark.parametrize("name", SUITE)
def test_step_length_inequality(name, rng):
    # D(x, grad w*(grad w(x) - t g)) is nondecreasing in t for g = JF(x)^T c
    p = get_problem(name)
    k = p.kernel
    for x in p.sample_interior(rng, 20):
        c = p.cone.sample_extreme(rng, 1)[0]
        g = p.eval_J(x).T @ c
        ts = np.sort(rng.uniform(0.0, 0.2, 6))
        Y = [k.grad_conj(k.grad(x) - t * g) for t in ts]
        if not all(k.is_interior(y) for y in Y):
            continue
        D = np.array([k.bregman(x, y) for y in Y])
        assert np.all(np.diff(D) >= -1e-12 * (1 + D[1:]))


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-8, 8), ell=st.floats(0.1, 20))
def test_p2_closed_form(x, ell):
    # v = min_c (c . JF(x))^2 / (2 ell); JF(x) = (x - 1, x + 1) changes sign on [-1, 1]
    cert = solve_dual(get_problem("P2"), [x], ell, TIGHT)
    dist = max(abs(x) - 1.0, 0.0)
    assert_allclose(cert.v_value, dist ** 2 / (2 * ell), rtol=1e-7, atol=1e-12)


def test_errors():
    p2 = get_problem("P2")
    with pytest.raises(InvalidStep):
        solve_dual(p2, [1.0], 0.0)
    with pytest.raises(InvalidStep):
        solve_dual(p2, [1.0], -1.0)
    p4 = get_problem("P4")
    with pytest.raises(DomainViolation):
        solve_dual(p4, [0.0, 1.0], 1.0)
    burg = VectorProblem("burg", 1, 2, lambda x: np.array([x[0], -np.log(x[0])]),
                         BurgEntropy(1), ConeOrder.orthant(2))
    with pytest.raises(NotSupercoercive):
        solve_dual(burg, [1.0], 1.0)
    relaxed = solve_dual(burg, [1.0], 1.0, DualOptions(require_supercoercive=False))
    assert relaxed.v_value >= 0


def test_nonconvergence_is_flagged():
    p = get_problem("P3")
    cert = solve_dual(p, [0.1, 0.1], 1.0, DualOptions(dual_gap_tol=1e-30, max_iters=3))
    assert not cert.converged
    assert cert.iterations == 3
    assert not cert.checks()["converged"]
