"""Bandit strategies as round-by-round state machines with a batch ``fit``.

Each strategy follows the scikit-learn estimator conventions: constructor
arguments are stored untouched, ``get_params``/``set_params`` come from
:class:`sklearn.base.BaseEstimator`, and everything learned from data ends
in an underscore.

Two ways to play:

* ``reset(n, rng)`` then ``act()`` / ``observe(value)`` per round (or the
  ``play_round`` shortcut), which is what protocol wrappers need;
* ``fit(losses, rng)``, which runs a whole oblivious episode in a compiled
  loop.

Both draw three uniforms per round from the same generator, so for the same
seed they produce identical trajectories.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import _kernels
from ._validation import check_loss_matrix, check_rng, check_scalar
from .exceptions import AuditError, DomainError
from .ftrl import be_the_leader_audit, raise_for_status
from .regularizers import BallPoint, HybridParams, LpParams

POLICY = "policy"
MU = "mu"


@dataclass(frozen=True)
class Decision:
    """Action chosen for one round.

    ``branch`` is ``"mu"`` when the action was drawn from the strategy's
    fixed exploration distribution and ``"policy"`` otherwise.
    """

    action: object
    branch: str
    probability: float


# ---------------------------------------------------------------------------
# parameter formulas
# ---------------------------------------------------------------------------


def _check_dims(n, T):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if int(T) != T or T < 2:
        raise ValueError(f"T must be an integer >= 2, got {T!r}")
    return int(n), int(T)


def sparse_mab_params(n, T, L):
    """Learning rate and log-barrier weight for the sparse strategy.

    ``eta = min(sqrt(log T / L) / 5, 1 / (15 n))`` and ``gamma = 2 eta``.
    """
    n, T = _check_dims(n, T)
    L = check_scalar(L, "L", low=0.0)
    eta = min(0.2 * math.sqrt(math.log(T) / L), 1.0 / (15 * n))
    return eta, 2.0 * eta


def variation_params(n, T, Q):
    """Reservoir size, learning rate and barrier weight for the variation strategy.

    ``k = ceil(log T)``, ``eta = min(sqrt(log n / Q) / 5, 1 / (15 n))`` and
    ``gamma = 2 eta``; ``Q = 0`` saturates at ``1 / (15 n)``.
    """
    n, T = _check_dims(n, T)
    Q = check_scalar(Q, "Q", low=0.0, low_open=False)
    k = max(1, math.ceil(math.log(T)))
    cap = 1.0 / (15 * n)
    eta = cap if Q == 0.0 or n == 1 else min(0.2 * math.sqrt(math.log(n) / Q), cap)
    return k, eta, 2.0 * eta


def default_lp_params(n, T):
    """``eta = sqrt(log T / (n T))`` and ``gamma = n eta``.

    If that makes ``gamma >= 1`` (tiny horizons) ``eta`` is cut to ``1/(2n)``
    with a warning, keeping ``gamma = n eta = 1/2``.
    """
    n, T = _check_dims(n, T)
    eta = math.sqrt(math.log(T) / (n * T))
    if n * eta >= 1.0:
        warnings.warn(
            f"n*eta = {n * eta:.3g} >= 1 for n={n}, T={T}; reducing eta to 1/(2n)",
            RuntimeWarning,
            stacklevel=2,
        )
        eta = 0.5 / n
    return eta, n * eta


@dataclass(frozen=True)
class SparseMabConfig:
    n: int
    T: int
    L: float
    eta: float
    gamma: float

    def __post_init__(self):
        check_scalar(self.eta, "eta", low=0.0)
        check_scalar(self.gamma, "gamma", low=0.0)


@dataclass(frozen=True)
class VariationMabConfig:
    n: int
    T: int
    Q: float
    k: int
    eta: float
    gamma: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("reservoir size k must be >= 1")
        check_scalar(self.eta, "eta", low=0.0)
        check_scalar(self.gamma, "gamma", low=0.0)


@dataclass(frozen=True)
class LpBallConfig:
    n: int
    T: int
    p: float
    eta: float
    gamma: float

    def __post_init__(self):
        LpParams(self.p)
        check_scalar(self.eta, "eta", low=0.0)
        check_scalar(self.gamma, "gamma", low=0.0, high=1.0, high_open=True)
        if self.gamma < self.n * self.eta * (1.0 - 1e-12):
            raise ValueError(f"gamma={self.gamma} is below n*eta={self.n * self.eta}")

    @property
    def q(self):
        return self.p / (self.p - 1.0)


# ---------------------------------------------------------------------------
# base class
# ---------------------------------------------------------------------------


class BaseStrategy(BaseEstimator):
    """Shared round-protocol plumbing; subclasses fill in the hooks."""

    domain = "simplex"

    def _horizon(self, T=None):
        horizon = self.horizon if self.horizon is not None else T
        if horizon is None:
            raise ValueError(f"{type(self).__name__} needs a horizon before play")
        return int(horizon)

    def reset(self, n, rng=None):
        """Prepare for a fresh episode over ``n`` arms (or dimensions)."""
        self.n_ = int(n)
        self.config_ = self._configure(self.n_, self._horizon())
        self._rng = check_rng(rng)
        self.t_ = 0
        self._pending = None
        self._init_state()
        return self

    def act(self):
        if getattr(self, "_rng", None) is None:
            raise RuntimeError("call reset() before act()")
        if self._pending is not None:
            raise RuntimeError("act() called twice without observe()")
        u = self._rng.random(3)
        decision = self._decide(u)
        self._pending = (decision, u)
        return decision

    def observe(self, value):
        """Feed back the loss of the last action (or a withheld placeholder)."""
        if self._pending is None:
            raise RuntimeError("observe() without a pending action")
        decision, u = self._pending
        self._pending = None
        self._update(decision, u, value)
        self.t_ += 1

    def play_round(self, loss):
        """Act, suffer ``loss . action`` and observe it. Returns (decision, value)."""
        decision = self.act()
        value = float(self._loss_of(np.asarray(loss, dtype=float), decision.action))
        self.observe(value)
        return decision, value

    def _loss_of(self, loss, action):
        return loss[action]

    def fit(self, losses, rng=None):
        """Play a whole oblivious episode against ``losses`` (a T x n matrix).

        Sets ``suffered_`` (per-round loss) plus strategy-specific arrays.
        """
        losses = check_loss_matrix(losses)
        T, n = losses.shape
        self.n_ = n
        self.config_ = self._configure(n, self._horizon(T))
        uniforms = check_rng(rng).random((T, 3))
        self._fit(losses, uniforms)
        self.t_ = T
        self._rng = None
        return self


class _SimplexMixin:
    def _simplex_init(self):
        n = self.n_
        self.cum_loss_ = np.zeros(n)
        self._x = np.full(n, 1.0 / n)
        self._lam = np.array([np.nan])

    @property
    def weights_(self):
        return self._x.copy()


# ---------------------------------------------------------------------------
# sparse losses
# ---------------------------------------------------------------------------


class SparseMAB(_SimplexMixin, BaseStrategy):
    """FTRL with the hybrid negentropy/log-barrier regularizer and the
    importance-weighted loss estimator.

    Parameters
    ----------
    horizon : int, optional
        Number of rounds T; taken from the data in ``fit`` when omitted.
    loss_budget : float, optional
        Bound L on the sum of squared loss norms; defaults to the trivial
        ``n T`` for losses in [-1, 1].
    eta, gamma : float, optional
        Override the default learning rate and barrier weight.
    audit : bool
        Record iterates, check ``|value| <= 1`` every round and run the
        be-the-leader audit at the end of ``fit``.
    """

    def __init__(self, horizon=None, loss_budget=None, eta=None, gamma=None, audit=False):
        self.horizon = horizon
        self.loss_budget = loss_budget
        self.eta = eta
        self.gamma = gamma
        self.audit = audit

    def _configure(self, n, T):
        L = float(n * T) if self.loss_budget is None else self.loss_budget
        eta, gamma = sparse_mab_params(n, T, L)
        if self.eta is not None:
            eta, gamma = self.eta, 2.0 * self.eta
        gamma = gamma if self.gamma is None else self.gamma
        return SparseMabConfig(n, T, L, eta, gamma)

    def _init_state(self):
        self._simplex_init()
        self._trace = ([], []) if self.audit else None

    def _decide(self, u):
        c = self.config_
        arm, st = _kernels.sparse_act(self.cum_loss_, self._x, self._lam, c.eta, c.gamma, u[0])
        raise_for_status(st, round=self.t_ + 1)
        if self.audit:
            self._trace[0].append(self._x.copy())
        return Decision(int(arm), POLICY, float(self._x[arm]))

    def _update(self, decision, u, value):
        value = float(value)
        arm = decision.action
        if self.audit:
            _check_unit_loss(value, self.t_ + 1)
            est = np.zeros(self.n_)
            est[arm] = value / self._x[arm]
            self._trace[1].append(est)
        self.cum_loss_[arm] += value / self._x[arm]

    def _fit(self, losses, uniforms):
        c = self.config_
        if self.audit:
            bad = np.flatnonzero(np.abs(losses).max(axis=1) > 1.0)
            if bad.size:
                _check_unit_loss(losses[bad[0]].max(), int(bad[0]) + 1)
        arms, suffered, iterates, cum, t, st = _kernels.sparse_episode(
            losses, c.eta, c.gamma, uniforms, bool(self.audit)
        )
        raise_for_status(st, round=int(t) + 1)
        self.arms_ = arms
        self.suffered_ = suffered
        self.cum_loss_ = cum
        self._x = iterates[-1].copy() if self.audit else None
        if self.audit:
            T = losses.shape[0]
            est = np.zeros_like(losses)
            est[np.arange(T), arms] = suffered / iterates[np.arange(T), arms]
            self.iterates_ = iterates
            self.audit_ = _simplex_audit(est, iterates, c)

    def audit_report(self):
        """Be-the-leader audit over the rounds played so far through ``act``/``observe``."""
        if not self.audit:
            raise RuntimeError("strategy was not created with audit=True")
        xs, ests = self._trace
        xs = xs[: len(ests)]
        final = np.empty(self.n_)
        final[:] = self._x
        _kernels.hybrid_argmin(self.config_.eta * self.cum_loss_, self.config_.gamma, self._lam[0], final)
        return _simplex_audit(np.array(ests), np.vstack(xs + [final]), self.config_)


def _check_unit_loss(value, t):
    if abs(value) > 1.0:
        raise AuditError(f"round {t}: |loss| = {abs(value):.6g} > 1 breaks the estimator bound")


def _smoothed_best(total, n, T):
    """Interior comparator near the best vertex (the barrier is infinite at vertices)."""
    u = np.full(n, 1.0 / (n * T))
    u[int(np.argmin(total))] += 1.0 - u.sum()
    return u


def _simplex_audit(est, iterates, config):
    u = _smoothed_best(est.sum(axis=0), config.n, est.shape[0] + 1)
    record = be_the_leader_audit(est, iterates, config.eta, HybridParams(config.gamma), u)
    if not record.passed:
        raise AuditError(f"be-the-leader audit failed with slack {record.slack:.3g}")
    return record


# ---------------------------------------------------------------------------
# low variation
# ---------------------------------------------------------------------------


class VariationMAB(_SimplexMixin, BaseStrategy):
    """Hybrid-regularized FTRL on losses centred by a reservoir estimate of
    the running mean.

    Round ``t`` first explores with probability ``min(1, k n / t)``: it plays
    a reservoir-chosen arm, stores the observed loss and leaves the FTRL
    state untouched. Otherwise it samples from the FTRL iterate and feeds
    the centred estimator.

    Parameters
    ----------
    horizon : int, optional
    variation_budget : float, optional
        Bound Q on the total variation; defaults to ``n T``.
    reservoir_size : int, optional
        Capacity k of each arm's buffer; defaults to ``ceil(log T)``.
    eta, gamma : float, optional
    """

    def __init__(self, horizon=None, variation_budget=None, reservoir_size=None, eta=None, gamma=None):
        self.horizon = horizon
        self.variation_budget = variation_budget
        self.reservoir_size = reservoir_size
        self.eta = eta
        self.gamma = gamma

    def _configure(self, n, T):
        Q = float(n * T) if self.variation_budget is None else self.variation_budget
        k, eta, gamma = variation_params(n, T, Q)
        k = k if self.reservoir_size is None else int(self.reservoir_size)
        if self.eta is not None:
            eta, gamma = self.eta, 2.0 * self.eta
        gamma = gamma if self.gamma is None else self.gamma
        return VariationMabConfig(n, T, Q, k, eta, gamma)

    def _init_state(self):
        self._simplex_init()
        self._res = np.zeros((self.n_, self.config_.k))
        self._counts = np.zeros(self.n_, dtype=np.int64)
        self._mu = np.zeros(self.n_)

    def _decide(self, u):
        c = self.config_
        t = self.t_ + 1
        arm, explore, st = _kernels.variation_act(
            self.cum_loss_, self._x, self._lam, self._counts, t, c.k, c.eta, c.gamma, u[0], u[1]
        )
        raise_for_status(st, round=t)
        if explore:
            return Decision(int(arm), MU, min(1.0, c.k * c.n / t))
        return Decision(int(arm), POLICY, float(self._x[arm]))

    def _update(self, decision, u, value):
        arm = decision.action
        value = float(value)
        if decision.branch == MU:
            _kernels.reservoir_insert(
                self._res, self._counts, arm, value, self.t_ + 1, self.n_, u[2]
            )
        else:
            _kernels.reservoir_means(self._res, self._counts, self._mu)
            _kernels.centered_update(self.cum_loss_, self._x, self._mu, arm, value)

    def _fit(self, losses, uniforms):
        c = self.config_
        arms, explored, suffered, cum, t, st = _kernels.variation_episode(
            losses, c.k, c.eta, c.gamma, uniforms
        )
        raise_for_status(st, round=int(t) + 1)
        self.arms_ = arms
        self.explored_ = explored
        self.suffered_ = suffered
        self.cum_loss_ = cum


# ---------------------------------------------------------------------------
# l_p ball
# ---------------------------------------------------------------------------


class LpBallBandit(BaseStrategy):
    """FTRL with the barrier ``-log(1 - ||x||_p^p)`` on the unit l_p ball.

    Each round explores with probability ``max(d(x), gamma)`` by playing a
    uniform signed basis vector; otherwise it plays ``x / ||x||_p`` and
    ignores the feedback, so it only ever learns from its fixed exploration
    distribution.

    Parameters
    ----------
    p : float in (1, 2]
    horizon : int, optional
    eta, gamma : float, optional
        Defaults from :func:`default_lp_params`; ``gamma >= n eta`` is enforced.
    estimator : {"unbiased", "norm-gap"}
        Denominator of the explore-round estimate, see
        :func:`curvbandit.estimators.lp_estimator`.
    audit : bool
        Record iterates and run the be-the-leader audit at the end of ``fit``.
    """

    domain = "lp-ball"

    def __init__(self, p=1.5, horizon=None, eta=None, gamma=None, estimator="unbiased", audit=False):
        self.p = p
        self.horizon = horizon
        self.eta = eta
        self.gamma = gamma
        self.estimator = estimator
        self.audit = audit

    def _configure(self, n, T):
        if self.estimator not in ("unbiased", "norm-gap"):
            raise ValueError(f"unknown estimator variant {self.estimator!r}")
        if self.eta is None:
            eta, gamma = default_lp_params(n, T)
        else:
            eta, gamma = self.eta, n * self.eta
        gamma = gamma if self.gamma is None else self.gamma
        return LpBallConfig(n, T, float(self.p), eta, gamma)

    @property
    def _literal(self):
        return self.estimator == "norm-gap"

    def _init_state(self):
        n = self.n_
        self.cum_loss_ = np.zeros(n)
        self._x = np.zeros(n)
        self._action = np.zeros(n)
        self._gap = 1.0
        self._trace = ([], []) if self.audit else None

    @property
    def iterate_(self):
        return BallPoint(self._x.copy(), self.config_.p, gap=self._gap)

    def _loss_of(self, loss, action):
        return _kernels.dot(loss, action)

    def _decide(self, u):
        c = self.config_
        explore, atom, d, prob = _kernels.lp_act(
            self.cum_loss_, c.eta, c.p, c.gamma, u[0], u[1], self._x, self._action
        )
        self._gap = d
        if self.audit:
            self._trace[0].append(self._x.copy())
        if explore:
            return Decision(self._action.copy(), MU, float(prob))
        return Decision(self._action.copy(), POLICY, float(1.0 - prob))

    def _update(self, decision, u, value):
        est = None
        if decision.branch == MU:
            c = self.config_
            j = int(np.flatnonzero(decision.action)[0])
            denom = _kernels.lp_denominator(self._x, self._gap, c.p, c.gamma, self._literal)
            est = self.n_ * float(value) * decision.action[j] / denom
            self.cum_loss_[j] += est
        # exploit rounds never look at the value
        if self.audit:
            e = np.zeros(self.n_)
            if est is not None:
                e[j] = est
            self._trace[1].append(e)

    def _fit(self, losses, uniforms):
        c = self.config_
        explored, played, suffered, iterates, gaps, cum = _kernels.lp_episode(
            losses, c.eta, c.p, c.gamma, self._literal, uniforms, bool(self.audit)
        )
        self.explored_ = explored
        self.actions_ = played
        self.suffered_ = suffered
        self.gaps_ = gaps
        self.cum_loss_ = cum
        if self.audit:
            est = np.zeros_like(losses)
            rows = np.flatnonzero(explored)
            for t in rows:
                j = int(np.flatnonzero(played[t])[0])
                denom = _kernels.lp_denominator(iterates[t], gaps[t], c.p, c.gamma, self._literal)
                est[t, j] = c.n * suffered[t] * played[t, j] / denom
            self.iterates_ = iterates
            self.audit_ = _ball_audit(est, iterates, c)

    def audit_report(self):
        if not self.audit:
            raise RuntimeError("strategy was not created with audit=True")
        xs, ests = self._trace
        xs = xs[: len(ests)]
        final = np.empty(self.n_)
        _kernels.lp_grad_inverse(-self.config_.eta * self.cum_loss_, self.config_.p, final)
        return _ball_audit(np.array(ests), np.vstack(xs + [final]), self.config_)


def holder_extremizer(S, q):
    """Minimizer of ``S . x`` over the unit l_p ball, p = q/(q-1)."""
    S = np.asarray(S, dtype=float)
    norm = np.linalg.norm(S, q)
    if norm == 0.0:
        return np.zeros_like(S)
    return -np.sign(S) * np.abs(S) ** (q - 1.0) / norm ** (q - 1.0)


def _ball_audit(est, iterates, config):
    # shrink the extremizer a little so the barrier stays finite
    u = holder_extremizer(est.sum(axis=0), config.q) * (1.0 - 1.0 / (est.shape[0] + 1))
    params = LpParams(config.p)
    first = BallPoint(iterates[0], config.p)
    comp = BallPoint(u, config.p)
    record = be_the_leader_audit(est, [first, *iterates[1:]], config.eta, params, comp)
    if not record.passed:
        raise AuditError(f"be-the-leader audit failed with slack {record.slack:.3g}")
    return record


# ---------------------------------------------------------------------------
# explore-then-commit baseline
# ---------------------------------------------------------------------------


class UniformExploreCommit(BaseStrategy):
    """Plays uniformly random arms for ``m`` rounds, then the empirical best.

    Only the first ``m`` rounds need feedback, all drawn from the uniform
    distribution, so this is a valid strategy when feedback is restricted
    to a fixed exploration distribution. ``m`` defaults to
    ``ceil(n^(1/3) T^(2/3))``.
    """

    def __init__(self, horizon=None, explore_rounds=None):
        self.horizon = horizon
        self.explore_rounds = explore_rounds

    def _configure(self, n, T):
        m = math.ceil(n ** (1 / 3) * T ** (2 / 3)) if self.explore_rounds is None else int(self.explore_rounds)
        if m < 0:
            raise ValueError("explore_rounds must be non-negative")
        return {"n": n, "T": T, "m": min(m, T)}

    def _init_state(self):
        self._sums = np.zeros(self.n_)
        self._counts = np.zeros(self.n_, dtype=np.int64)
        self._commit = None

    def _committed_arm(self):
        if self._commit is None:
            means = np.where(self._counts > 0, self._sums / np.maximum(self._counts, 1), np.inf)
            self._commit = int(np.argmin(means)) if np.isfinite(means).any() else 0
        return self._commit

    def _decide(self, u):
        n = self.n_
        if self.t_ < self.config_["m"]:
            return Decision(min(int(u[0] * n), n - 1), MU, 1.0 / n)
        return Decision(self._committed_arm(), POLICY, 1.0)

    def _update(self, decision, u, value):
        if decision.branch == MU:
            self._sums[decision.action] += float(value)
            self._counts[decision.action] += 1

    def _fit(self, losses, uniforms):
        T, n = losses.shape
        m = self.config_["m"]
        arms = np.empty(T, dtype=np.int64)
        arms[:m] = np.minimum((uniforms[:m, 0] * n).astype(np.int64), n - 1)
        self._sums = np.bincount(arms[:m], weights=losses[np.arange(m), arms[:m]], minlength=n)
        self._counts = np.bincount(arms[:m], minlength=n)
        self._commit = None
        arms[m:] = self._committed_arm()
        self.arms_ = arms
        self.suffered_ = losses[np.arange(T), arms]
