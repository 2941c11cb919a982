from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from curvbandit import certificates
from curvbandit.environments import gen_low_variation, sequence_stats
from curvbandit.estimators import (
    EXPLOIT,
    EXPLORE,
    Feedback,
    Reservoir,
    centered_estimator,
    exploration_probability,
    lp_estimator,
    lp_sample,
    mab_estimator,
    mab_sample,
    reservoir_mean,
    reservoir_step,
    signed_basis,
    simulate_reservoir,
)
from curvbandit.exceptions import DomainError, ReservoirNotReady
from curvbandit.regularizers import BallPoint, SimplexPoint


def test_feedback_validation():
    with pytest.raises(ValueError):
        Feedback(np.nan, 0)
    with pytest.raises(ValueError):
        Feedback(0.1, 0, probability=0.0)
    with pytest.raises(ValueError):
        Feedback(0.1, 0, mode="other")


# simplex


def test_mab_sample_degenerate(rng):
    x = SimplexPoint([1.0, 0.0, 0.0])
    assert all(mab_sample(x, rng) == 0 for _ in range(1000))


def test_mab_sample_frequencies(rng):
    n, draws = 5, 100_000
    x = SimplexPoint(np.full(n, 1 / n))
    counts = np.bincount([mab_sample(x, rng) for _ in range(draws)], minlength=n)
    sigma = np.sqrt(draws * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - draws / n) <= 3 * sigma)


def test_mab_sample_reproducible():
    x = SimplexPoint([0.2, 0.3, 0.5])
    a = [mab_sample(x, np.random.default_rng(9)) for _ in range(3)]
    b = [mab_sample(x, np.random.default_rng(9)) for _ in range(3)]
    assert a == b


def test_mab_estimator_example():
    est = mab_estimator(Feedback(1.0, 0), SimplexPoint([0.5, 0.5]))
    np.testing.assert_array_equal(est, [2.0, 0.0])


def test_mab_estimator_floor():
    with pytest.raises(DomainError):
        mab_estimator(Feedback(1.0, 1), SimplexPoint([1.0, 0.0]))


def test_mab_identities_by_enumeration(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        x = SimplexPoint(rng.dirichlet(np.ones(n)))
        ell = rng.uniform(-1, 1, n)
        outs = [mab_estimator(Feedback(ell[i], i), x) for i in range(n)]
        mean = sum(w * e for w, e in zip(x.weights, outs))
        np.testing.assert_allclose(mean, ell, atol=1e-12)
        var = sum(w * np.sum(x.weights * e * e) for w, e in zip(x.weights, outs))
        assert var == pytest.approx(ell @ ell, abs=1e-12)


def test_centered_estimator_reductions(rng):
    x = SimplexPoint(rng.dirichlet(np.ones(4)))
    ell = rng.uniform(-1, 1, 4)
    for a in range(4):
        fb = Feedback(ell[a], a)
        np.testing.assert_array_equal(centered_estimator(fb, x, np.zeros(4)), mab_estimator(fb, x))
        np.testing.assert_allclose(centered_estimator(fb, x, ell), ell, atol=1e-15)


def test_centered_unbiased_by_enumeration(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        x = SimplexPoint(rng.dirichlet(np.ones(n)))
        ell, mu = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        mean = sum(x.weights[i] * centered_estimator(Feedback(ell[i], i), x, mu) for i in range(n))
        np.testing.assert_allclose(mean, ell, atol=1e-12)


def test_centered_dimension_check():
    with pytest.raises(ValueError):
        centered_estimator(Feedback(0.1, 0), SimplexPoint([0.5, 0.5]), np.zeros(3))


@pytest.mark.parametrize(
    "suite",
    [certificates.mab_identity_suite, certificates.centered_identity_suite, certificates.hybrid_variance_suite],
)
def test_simplex_suites(suite):
    result = suite(rng=np.random.default_rng(11))
    assert result.passed, result.line()


# reservoir


def test_reservoir_warmup_always_explores(rng):
    n, k = 3, 4
    res = Reservoir.empty(n, k)
    for t in range(1, k * n + 1):
        assert exploration_probability(t, k, n) == 1.0
        res, explored, arm = reservoir_step(res, t, rng, lambda a: 0.5)
        assert explored and 0 <= arm < n
    np.testing.assert_array_equal(res.counts, k)


def test_reservoir_constant_losses_exact(rng):
    c = np.array([0.3, -0.7, 0.1])
    res = Reservoir.empty(3, 2)
    for t in range(1, 500):
        res, _, _ = reservoir_step(res, t, rng, lambda a: c[a])
        if np.all(res.counts > 0):
            np.testing.assert_array_equal(reservoir_mean(res), c)


def test_reservoir_mean_example():
    res = Reservoir(np.array([[1.0, 1.0], [0.0, 0.0]]), np.array([2, 2]))
    np.testing.assert_array_equal(reservoir_mean(res), [1.0, 0.0])


def test_reservoir_not_ready():
    with pytest.raises(ReservoirNotReady):
        reservoir_mean(Reservoir.empty(2, 3))


def test_reservoir_holds_everything_when_large(rng):
    T = 40
    L = rng.uniform(-1, 1, (T, 1))
    res, explored = simulate_reservoir(L, T, rng)
    assert explored.all()
    np.testing.assert_allclose(reservoir_mean(res), L.mean(axis=0), atol=1e-14)


def test_large_reservoir_keeps_every_observation(rng):
    T, n = 60, 3
    L = rng.uniform(-1, 1, (T, n))
    res = Reservoir.empty(n, T)
    seen = [[] for _ in range(n)]
    for t in range(1, T + 1):
        res, explored, arm = reservoir_step(res, t, rng, lambda a, t=t: L[t - 1, a])
        assert explored
        seen[arm].append(L[t - 1, arm])
    for a in range(n):
        np.testing.assert_array_equal(np.sort(res.contents(a)), np.sort(seen[a]))


def test_simulation_matches_round_api():
    L = gen_low_variation(3, 300, 40.0, np.random.default_rng(0)).losses
    fast, flags = simulate_reservoir(L, 4, 17)
    rng = np.random.default_rng(17)
    res = Reservoir.empty(3, 4)
    seen = []
    for t in range(1, 301):
        res, explored, _ = reservoir_step(res, t, rng, lambda a, t=t: L[t - 1, a])
        seen.append(explored)
    np.testing.assert_array_equal(fast.buffers, res.buffers)
    np.testing.assert_array_equal(fast.counts, res.counts)
    np.testing.assert_array_equal(flags, seen)


def test_reservoir_unbiased():
    T, n, k, reps = 500, 3, 3, 10_000
    L = gen_low_variation(n, T, 100.0, np.random.default_rng(2)).losses
    mus = np.array([reservoir_mean(simulate_reservoir(L, k, s)[0]) for s in range(reps)])
    se = mus.std(axis=0, ddof=1) / np.sqrt(reps)
    assert np.all(np.abs(mus.mean(axis=0) - L.mean(axis=0)) <= 3 * se)


def test_reservoir_variance_bound():
    T, n, k, reps = 2000, 5, 4, 1000
    seq = gen_low_variation(n, T, 200.0, np.random.default_rng(1))
    Q = sequence_stats(seq).variation
    mus = np.array([reservoir_mean(simulate_reservoir(seq.losses, k, s)[0]) for s in range(reps)])
    assert np.all(mus.var(axis=0, ddof=1) <= 1.5 * Q / (k * T))


# l_p ball


def test_lp_sample_center_always_explores(rng):
    x = BallPoint(np.zeros(3), 1.5)
    for _ in range(200):
        fb = lp_sample(x, 0.1, rng)
        assert fb.mode == EXPLORE and fb.probability == 1.0


def test_lp_sample_frequencies(rng):
    p, n, draws = 2.0, 3, 100_000
    x = BallPoint(np.array([np.sqrt(0.5), 0.0, 0.0]), p)
    assert x.gap == pytest.approx(0.5)
    atoms = signed_basis(n)
    counts = np.zeros(2 * n)
    explore = 0
    for _ in range(draws):
        fb = lp_sample(x, 0.1, rng)
        if fb.mode == EXPLORE:
            explore += 1
            counts[np.flatnonzero(np.all(atoms == fb.action, axis=1))[0]] += 1
        else:
            np.testing.assert_allclose(fb.action, [1.0, 0.0, 0.0])
    assert abs(explore - draws / 2) <= 3 * np.sqrt(draws / 4)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_lp_estimator_examples():
    x = BallPoint(np.array([np.sqrt(0.5), 0.0]), 2.0)
    ell = np.array([0.3, -0.2])
    fb = Feedback(ell[0], np.array([1.0, 0.0]), EXPLORE, 0.25)
    np.testing.assert_allclose(lp_estimator(fb, x, 0.1), [1.2, 0.0])
    quiet = Feedback(0.7, np.array([1.0, 0.0]), EXPLOIT, 0.5)
    np.testing.assert_array_equal(lp_estimator(quiet, x, 0.1), 0.0)


def test_lp_estimator_variants_differ_by_bounded_factor(rng):
    p = 1.5
    x = BallPoint(np.array([0.4, -0.2, 0.1]), p)
    fb = Feedback(0.5, np.array([0.0, -1.0, 0.0]), EXPLORE, 0.3)
    unbiased = lp_estimator(fb, x, 0.01)
    literal = lp_estimator(fb, x, 0.01, "norm-gap")
    ratio = literal[1] / unbiased[1]
    assert 1.0 <= ratio <= p


def test_lp_estimator_rejects_non_atom():
    x = BallPoint(np.zeros(2), 1.5)
    with pytest.raises(DomainError):
        lp_estimator(Feedback(0.5, np.array([0.5, 0.5]), EXPLORE, 1.0), x, 0.1)
    with pytest.raises(ValueError):
        lp_estimator(Feedback(0.5, np.array([1.0, 0.0]), EXPLORE, 1.0), x, 0.1, "other")


def test_lp_sample_placeholder_value(rng):
    fb = lp_sample(BallPoint(np.zeros(2), 1.5), 0.2, rng)
    filled = replace(fb, value=0.25)
    assert filled.value == 0.25 and filled.mode == fb.mode


@pytest.mark.parametrize(
    "suite", [certificates.lp_identity_suite, certificates.lp_bias_suite, certificates.lp_magnitude_suite]
)
def test_ball_suites(suite):
    result = suite(rng=np.random.default_rng(13))
    assert result.passed, result.line()
