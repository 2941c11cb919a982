import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvbandit import certificates
from curvbandit.exceptions import DomainError
from curvbandit.regularizers import (
    BallPoint,
    HybridParams,
    LpParams,
    SimplexPoint,
    dual_local_norm_sq,
    hybrid_eval,
    lp_dual_norm_bound,
    lp_eval,
    lp_grad_inverse,
    negentropy_hess_diag,
)


def central_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# hybrid regularizer


def test_hybrid_uniform_pure_negentropy():
    _, grad, hess = hybrid_eval(SimplexPoint([0.5, 0.5]), HybridParams(0.0))
    np.testing.assert_allclose(grad, 1 + np.log(0.5))
    np.testing.assert_allclose(hess, [2.0, 2.0])


def test_hybrid_uniform_with_barrier():
    x = np.array([0.5, 0.5])
    params = HybridParams(0.1)
    value, grad, hess = hybrid_eval(SimplexPoint(x), params)
    np.testing.assert_allclose(grad, 0.106853, atol=1e-6)
    np.testing.assert_allclose(hess, 2.4)

    def phi(z):
        return float(np.sum(z * np.log(z)) - 0.1 * np.sum(np.log(z)))

    np.testing.assert_allclose(central_grad(phi, x), grad, atol=1e-6)
    assert value == pytest.approx(phi(x))


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), st.floats(0.0, 1.0))
def test_hybrid_hessian_dominates_negentropy(raw, gamma):
    x = np.array(raw) / np.sum(raw)
    pt = SimplexPoint(x)
    _, _, hess = hybrid_eval(pt, HybridParams(gamma))
    neg = negentropy_hess_diag(pt)
    assert np.all(hess >= neg)
    assert np.all(hess >= 1.0 / pt.weights)


def test_simplex_point_rejects_bad_input():
    with pytest.raises(DomainError):
        SimplexPoint([0.7, 0.7])
    with pytest.raises(DomainError):
        SimplexPoint([1.2, -0.2])


def test_simplex_point_floors_zeros():
    pt = SimplexPoint([1.0, 0.0])
    assert pt.weights[1] > 0.0


# l_p barrier


def test_lp_euclidean_example():
    value, grad, _ = lp_eval(BallPoint(np.array([0.5, 0.0]), 2.0), LpParams(2.0))
    assert value == pytest.approx(-np.log(0.75))
    np.testing.assert_allclose(grad, [4 / 3, 0.0], atol=1e-12)
    fd = central_grad(lambda z: -np.log(1 - np.sum(z**2)), np.array([0.5, 0.0]))
    np.testing.assert_allclose(fd, grad, atol=1e-6)


@pytest.mark.parametrize("p", [1.1, 1.5, 2.0])
def test_lp_center(p):
    value, grad, _ = lp_eval(np.zeros(3), LpParams(p))
    assert value == 0.0
    np.testing.assert_array_equal(grad, 0.0)


def test_lp_outside_ball_rejected():
    with pytest.raises(DomainError):
        lp_eval(np.array([0.8, 0.8]), LpParams(1.5))


def test_lp_params_q():
    assert LpParams(1.5).q == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(ValueError):
        LpParams(1.0)
    with pytest.raises(ValueError):
        LpParams(2.5)


def test_lp_hessian_dominates_diagonal(rng):
    p = 1.5
    params = LpParams(p)
    for _ in range(100):
        x = rng.uniform(0.01, 1.0, 4) * rng.choice([-1, 1], 4)
        x *= rng.uniform(0.05, 0.9) / np.linalg.norm(x, p)
        if np.any(np.abs(x) < 0.01):
            continue
        h = rng.normal(size=4)
        pt = BallPoint(x, p)
        _, _, hess = lp_eval(pt, params)
        lower = p * (p - 1) / pt.gap * np.sum(np.abs(x) ** (p - 2) * h * h)
        assert hess(h) @ h >= lower * (1 - 1e-12)


def test_lp_hessian_singular_direction():
    _, _, hess = lp_eval(np.array([0.3, 0.0]), LpParams(1.5))
    with pytest.raises(DomainError):
        hess(np.array([0.0, 1.0]))
    hess(np.array([1.0, 0.0]))


def test_grad_inverse_examples():
    pt = lp_grad_inverse(np.zeros(3), LpParams(1.5))
    np.testing.assert_array_equal(pt.coords, 0.0)
    assert pt.gap == 1.0
    pt = lp_grad_inverse(np.array([4 / 3, 0.0]), LpParams(2.0))
    np.testing.assert_allclose(pt.coords, [0.5, 0.0], atol=1e-8)


def test_grad_inverse_rejects_nonfinite():
    with pytest.raises(ValueError):
        lp_grad_inverse(np.array([np.nan, 1.0]), LpParams(1.5))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=6),
    st.sampled_from([1.2, 1.5, 2.0]),
)
def test_grad_inverse_roundtrip(v, p):
    v = np.array(v)
    params = LpParams(p)
    pt = lp_grad_inverse(v, params)
    _, grad, _ = lp_eval(pt, params)
    np.testing.assert_allclose(grad, v, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(v).max()))


def test_dual_norm_diagonal():
    assert dual_local_norm_sq(np.array([2.0, 2.0]), np.array([1.0, 0.0])) == 0.5
    with pytest.raises(DomainError):
        dual_local_norm_sq(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


def test_dual_norm_negentropy(rng):
    x = rng.dirichlet(np.ones(5))
    h = rng.normal(size=5)
    pt = SimplexPoint(x)
    got = dual_local_norm_sq(negentropy_hess_diag(pt), h)
    assert got == pytest.approx(np.sum(pt.weights * h * h), rel=1e-12)


def test_exact_dual_norm_matches_dense_inverse(rng):
    params = LpParams(1.5)
    for _ in range(20):
        x = rng.uniform(-0.5, 0.5, 4)
        h = rng.normal(size=4)
        _, _, hess = lp_eval(x, params)
        dense = np.column_stack([hess(e) for e in np.eye(4)])
        exact = h @ np.linalg.solve(dense, h)
        assert dual_local_norm_sq(hess, h) == pytest.approx(exact, rel=1e-9)
        assert dual_local_norm_sq(hess, h) <= lp_dual_norm_bound(x, h, params) * (1 + 1e-12)


# randomized certificate suites


@pytest.mark.parametrize(
    "suite",
    [
        certificates.finite_difference_suite,
        certificates.roundtrip_suite,
        certificates.dual_norm_domination_suite,
        certificates.gap_stability_suite,
        certificates.segment_dual_norm_suite,
    ],
)
def test_regularizer_suites(suite):
    result = suite(rng=np.random.default_rng(7))
    assert result.passed, result.line()
