import time
import warnings

import numpy as np
import pytest
from sklearn.base import clone

from curvbandit.environments import gen_ball_noisy, gen_low_variation, gen_sparse
from curvbandit.exceptions import AuditError
from curvbandit.ftrl import simplex_argmin
from curvbandit.regularizers import HybridParams
from curvbandit.strategies import (
    LpBallBandit,
    LpBallConfig,
    SparseMAB,
    UniformExploreCommit,
    VariationMAB,
    default_lp_params,
    holder_extremizer,
    sparse_mab_params,
    variation_params,
)


def test_sparse_params_example():
    eta, gamma = sparse_mab_params(10, 10_000, 20_000)
    # the reference values carry about five significant digits
    assert eta == pytest.approx(0.0042920, rel=1e-4)
    assert gamma == pytest.approx(0.0085839, rel=1e-4)


def test_sparse_params_limits():
    assert sparse_mab_params(10, 100, 1e300)[0] < 1e-140
    assert sparse_mab_params(10_000, 100, 1.0)[0] == 1.0 / 150_000
    with pytest.raises(ValueError):
        sparse_mab_params(10, 100, 0.0)


def test_variation_params():
    k, eta, gamma = variation_params(10, 100_000, 1e4)
    assert k == 12
    assert eta == pytest.approx(0.2 * np.sqrt(np.log(10) / 1e4))
    assert gamma == 2 * eta
    assert variation_params(10, 1000, 0.0)[1] == 1.0 / 150


def test_lp_params_example():
    eta, gamma = default_lp_params(5, 10_000)
    assert eta == pytest.approx(0.013573, rel=1e-4)
    assert gamma == pytest.approx(0.067864, rel=1e-4)
    assert eta == pytest.approx(np.sqrt(np.log(10_000) / 50_000), rel=1e-15)
    assert gamma / eta == pytest.approx(5.0)


def test_lp_params_clamp_warns():
    with pytest.warns(RuntimeWarning):
        eta, gamma = default_lp_params(5, 2)
    assert gamma == pytest.approx(0.5) and gamma < 1.0


def test_lp_config_requires_gamma_above_n_eta():
    with pytest.raises(ValueError):
        LpBallConfig(5, 100, 1.5, 0.1, 0.4)
    LpBallConfig(5, 100, 1.5, 0.1, 0.5)


def test_sklearn_conventions():
    s = SparseMAB(horizon=100, eta=0.01)
    assert s.get_params()["eta"] == 0.01
    c = clone(s).set_params(audit=True)
    assert c.audit and not s.audit
    assert not hasattr(s, "suffered_")


def _round_api(strategy, losses, seed):
    strategy.reset(losses.shape[1], np.random.default_rng(seed))
    decisions, values = [], []
    for row in losses:
        d, v = strategy.play_round(row)
        decisions.append(d.action)
        values.append(v)
    return decisions, np.array(values)


def test_sparse_fit_matches_rounds():
    L = gen_sparse(6, 400, 2, rng=np.random.default_rng(0)).losses
    fitted = SparseMAB().fit(L, np.random.default_rng(5))
    arms, values = _round_api(SparseMAB(horizon=400), L, 5)
    np.testing.assert_array_equal(fitted.arms_, arms)
    np.testing.assert_array_equal(fitted.suffered_, values)


def test_variation_fit_matches_rounds():
    L = gen_low_variation(4, 500, 30.0, np.random.default_rng(1)).losses
    fitted = VariationMAB(variation_budget=30.0).fit(L, np.random.default_rng(6))
    arms, values = _round_api(VariationMAB(horizon=500, variation_budget=30.0), L, 6)
    np.testing.assert_array_equal(fitted.arms_, arms)
    np.testing.assert_array_equal(fitted.suffered_, values)


def test_lp_fit_matches_rounds():
    L = gen_ball_noisy(4, 500, 1.5, np.random.default_rng(2)).losses
    fitted = LpBallBandit(p=1.5).fit(L, np.random.default_rng(7))
    actions, values = _round_api(LpBallBandit(p=1.5, horizon=500), L, 7)
    np.testing.assert_array_equal(fitted.actions_, np.array(actions))
    np.testing.assert_array_equal(fitted.suffered_, values)


def test_explore_commit_fit_matches_rounds():
    L = np.random.default_rng(3).random((300, 3))
    fitted = UniformExploreCommit().fit(L, np.random.default_rng(8))
    arms, values = _round_api(UniformExploreCommit(horizon=300), L, 8)
    np.testing.assert_array_equal(fitted.arms_, arms)
    np.testing.assert_array_equal(fitted.suffered_, values)


def test_replay_is_deterministic():
    L = gen_sparse(5, 300, 2, rng=np.random.default_rng(0)).losses
    a = SparseMAB().fit(L, 42).suffered_
    b = SparseMAB().fit(L, 42).suffered_
    assert a.tobytes() == b.tobytes()


def test_sparse_first_round_uniform():
    s = SparseMAB(horizon=10).reset(4, 0)
    d = s.act()
    assert d.probability == pytest.approx(0.25)
    np.testing.assert_allclose(s.weights_, 0.25)


def test_sparse_symmetry_of_second_iterate():
    n, seeds = 3, 10_000
    loss = np.full(n, 0.5)
    xs = np.empty((seeds, n))
    for seed in range(seeds):
        s = SparseMAB(horizon=100).reset(n, seed)
        s.play_round(loss)
        xs[seed] = simplex_argmin(s.cum_loss_, s.config_.eta, HybridParams(s.config_.gamma)).weights
    se = xs.std(axis=0, ddof=1) / np.sqrt(seeds)
    assert np.all(np.abs(xs.mean(axis=0) - 1 / n) <= 3 * se)


def test_lp_first_round_explores():
    s = LpBallBandit(p=1.5, horizon=100).reset(3, 0)
    d = s.act()
    assert d.branch == "mu" and d.probability == 1.0
    assert np.count_nonzero(d.action) == 1


def test_lp_exploit_rounds_ignore_feedback():
    s = LpBallBandit(p=1.5, horizon=100).reset(3, 0)
    for _ in range(30):
        d = s.act()
        if d.branch == "policy":
            before = s.cum_loss_.copy()
            s.observe(12345.0)
            np.testing.assert_array_equal(s.cum_loss_, before)
        else:
            s.observe(0.3)


def test_lp_constant_loss_drives_iterate_downhill():
    ell = np.array([0.6, -0.3, 0.2])
    T, seeds = 3000, 30
    L = np.tile(ell, (T, 1))
    paths = np.array([LpBallBandit(p=1.5, audit=True).fit(L, s).iterates_[:-1] @ ell for s in range(seeds)])
    early, late = paths[:, :300].mean(axis=1), paths[:, -300:].mean(axis=1)
    diff = late - early
    assert diff.mean() + 3 * diff.std(ddof=1) / np.sqrt(seeds) < 0.0
    target = holder_extremizer(ell, 3.0) @ ell
    assert target < late.mean() < 0.0


def test_variation_large_reservoir_always_explores():
    L = gen_low_variation(3, 200, 10.0, np.random.default_rng(4)).losses
    s = VariationMAB(reservoir_size=200, variation_budget=10.0).fit(L, 0)
    assert s.explored_.all()


def test_sparse_audit_passes():
    L = gen_sparse(5, 300, 2, rng=np.random.default_rng(0)).losses
    s = SparseMAB(audit=True).fit(L, 1)
    assert s.audit_.passed
    r = SparseMAB(horizon=300, audit=True).reset(5, 1)
    for row in L[:50]:
        r.play_round(row)
    assert r.audit_report().passed


def test_sparse_audit_flags_large_losses():
    L = np.full((20, 3), 0.5)
    L[7, 1] = 1.5
    with pytest.raises(AuditError):
        SparseMAB(audit=True).fit(L, 0)
    s = SparseMAB(horizon=20, audit=True).reset(3, 0)
    s.act()
    with pytest.raises(AuditError):
        s.observe(-2.0)


def test_lp_audit_passes():
    L = gen_ball_noisy(4, 500, 1.5, np.random.default_rng(2)).losses
    assert LpBallBandit(audit=True).fit(L, 3).audit_.passed
    r = LpBallBandit(horizon=500, audit=True).reset(4, 3)
    for row in L[:100]:
        r.play_round(row)
    assert r.audit_report().passed


def test_audit_report_needs_audit_mode():
    with pytest.raises(RuntimeError):
        SparseMAB(horizon=10).reset(2, 0).audit_report()


def test_round_protocol_misuse():
    s = SparseMAB(horizon=10)
    with pytest.raises(RuntimeError):
        s.act()
    s.reset(2, 0)
    with pytest.raises(RuntimeError):
        s.observe(0.1)
    s.act()
    with pytest.raises(RuntimeError):
        s.act()


def test_holder_extremizer():
    x = holder_extremizer(np.array([3.0, 4.0]), 2.0)
    np.testing.assert_allclose(x, [-0.6, -0.8])
    np.testing.assert_array_equal(holder_extremizer(np.zeros(2), 3.0), 0.0)


@pytest.mark.slow
def test_large_episode_budget():
    L = gen_sparse(100, 100_000, 5, "random-support", np.random.default_rng(0)).losses
    start = time.perf_counter()
    SparseMAB().fit(L, 0)
    assert time.perf_counter() - start < 60.0
