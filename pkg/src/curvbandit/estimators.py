"""Sampling schemes, importance-weighted loss estimators, and the reservoir
estimate of the running mean loss.

Every random draw here consumes plain uniforms, so that the round-by-round
API and the compiled episode loops stay on the same random stream.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._validation import check_rng, check_scalar, check_vector
from .exceptions import DomainError, ReservoirNotReady
from .regularizers import SIMPLEX_FLOOR, BallPoint, SimplexPoint

EXPLOIT = "exploit"
EXPLORE = "explore"


@dataclass(frozen=True)
class Feedback:
    """Observed loss of the played action and how that action was drawn.

    ``action`` is an arm index on the simplex and a point of the ball
    otherwise; ``probability`` is that of the realized branch.
    """

    value: float
    action: object
    mode: str = EXPLOIT
    probability: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("feedback value must be finite")
        if self.mode not in (EXPLOIT, EXPLORE):
            raise ValueError(f"unknown feedback mode {self.mode!r}")
        if not (0.0 < self.probability <= 1.0):
            raise ValueError(f"branch probability {self.probability!r} outside (0, 1]")


def _weights(x):
    if isinstance(x, SimplexPoint):
        return x.weights
    return SimplexPoint(x).weights


# ---------------------------------------------------------------------------
# simplex
# ---------------------------------------------------------------------------


def mab_sample(x, rng):
    """Draw an arm with probability ``x_i``."""
    w = _weights(x)
    return int(_kernels.sample_index(w, check_rng(rng).random()))


def _played_weight(x, arm):
    w = _weights(x)
    if not (0 <= arm < w.size):
        raise IndexError(f"arm {arm} out of range for {w.size} arms")
    if w[arm] <= SIMPLEX_FLOOR:
        raise DomainError(f"played arm {arm} has probability at the floor")
    return w


def mab_estimator(feedback, x):
    """``value / x_a`` at the played arm ``a``, zero elsewhere."""
    arm = int(feedback.action)
    w = _played_weight(x, arm)
    est = np.zeros(w.size)
    est[arm] = feedback.value / w[arm]
    return est


def centered_estimator(feedback, x, mu_hat):
    """``mu_hat + e_a (value - mu_hat_a) / x_a``.

    Unbiased whenever ``mu_hat`` does not depend on the current draw.
    """
    arm = int(feedback.action)
    w = _played_weight(x, arm)
    mu = check_vector(mu_hat, "mu_hat")
    if mu.size != w.size:
        raise ValueError("mu_hat has the wrong dimension")
    est = mu.copy()
    est[arm] += (feedback.value - mu[arm]) / w[arm]
    return est


# ---------------------------------------------------------------------------
# reservoir
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reservoir:
    """Per-arm buffers of observed losses.

    ``buffers`` is an ``(n, k)`` array whose first ``min(counts[i], k)``
    entries in row ``i`` are live.
    """

    buffers: np.ndarray
    counts: np.ndarray

    @classmethod
    def empty(cls, n, k):
        if n < 1 or k < 1:
            raise ValueError("reservoir needs n >= 1 arms and capacity k >= 1")
        return cls(np.zeros((n, k)), np.zeros(n, dtype=np.int64))

    @property
    def k(self):
        return self.buffers.shape[1]

    @property
    def n(self):
        return self.buffers.shape[0]

    def sizes(self):
        return np.minimum(self.counts, self.k)

    def contents(self, arm):
        return self.buffers[arm, : self.sizes()[arm]].copy()


def exploration_probability(t, k, n):
    return min(1.0, k * n / t)


def reservoir_step(res, t, rng, full_loss_oracle):
    """One reservoir round at 1-based round ``t``.

    Explores with probability ``min(1, k n / t)``. During the first ``k n``
    rounds arms are visited in random permutations, one sample per arm per
    block; afterwards the explored arm is uniform and its value overwrites a
    uniformly chosen slot. Either way each past round of an arm sits in its
    buffer with probability ``k / t``, which makes the buffer mean unbiased.

    ``full_loss_oracle(arm)`` returns the loss of ``arm`` this round and is
    called only when the round explores.

    Returns ``(res', explored, arm)`` with ``arm = None`` on ordinary rounds.
    """
    if t < 1:
        raise ValueError("round index starts at 1")
    u = check_rng(rng).random(3)
    return _reservoir_step(res, t, u, full_loss_oracle)


def _reservoir_step(res, t, u, full_loss_oracle):
    arm = _kernels.explore_decision(res.counts, t, res.k, u[0], u[1])
    if arm == -2:
        raise RuntimeError("reservoir warm-up counts are inconsistent")
    if arm < 0:
        return res, False, None
    value = float(full_loss_oracle(arm))
    buffers = res.buffers.copy()
    counts = res.counts.copy()
    _kernels.reservoir_insert(buffers, counts, arm, value, t, res.n, u[2])
    return Reservoir(buffers, counts), True, int(arm)


def simulate_reservoir(losses, k, rng):
    """Run :func:`reservoir_step` over every row of ``losses`` in compiled code.

    Consumes the generator exactly as ``T`` successive ``reservoir_step``
    calls would, so both give the same reservoir. Returns
    ``(reservoir, explored flags)``.
    """
    losses = np.ascontiguousarray(losses, dtype=float)
    uniforms = check_rng(rng).random((losses.shape[0], 3))
    buffers, counts, explored = _kernels.reservoir_episode(losses, int(k), uniforms)
    return Reservoir(buffers, counts), explored


def reservoir_mean(res):
    """Per-arm mean of buffer contents.

    Raises
    ------
    ReservoirNotReady
        If some arm has no sample yet.
    """
    mu = np.zeros(res.n)
    if not _kernels.reservoir_means(res.buffers, res.counts, mu):
        empty = np.flatnonzero(res.counts == 0)
        raise ReservoirNotReady(f"arms {empty.tolist()} have no samples")
    return mu


# ---------------------------------------------------------------------------
# l_p ball
# ---------------------------------------------------------------------------


def signed_basis(n):
    """The ``2n`` atoms ``+e_1, -e_1, ..., +e_n, -e_n`` as rows."""
    atoms = np.zeros((2 * n, n))
    idx = np.arange(n)
    atoms[2 * idx, idx] = 1.0
    atoms[2 * idx + 1, idx] = -1.0
    return atoms


def _ball(x):
    if not isinstance(x, BallPoint):
        raise TypeError("expected a BallPoint")
    return x


def lp_sample(x, gamma, rng):
    """Draw the played point for ball iterate ``x``.

    Explores with probability ``max(d(x), gamma)`` by playing a uniform
    signed basis vector, otherwise plays ``x / ||x||_p``. The returned
    :class:`Feedback` has ``value = 0`` as a placeholder; fill it with
    :func:`dataclasses.replace` once the loss is observed.
    """
    gamma = check_scalar(gamma, "gamma", low=0.0, high=1.0, high_open=True)
    pt = _ball(x)
    u = check_rng(rng).random(3)
    return _lp_sample(pt, gamma, u)


def _lp_sample(pt, gamma, u):
    action = np.zeros(pt.n)
    explore, _, prob = _kernels.lp_draw(pt.coords, pt.gap, pt.p, gamma, u[0], u[1], action)
    if explore:
        return Feedback(0.0, action, EXPLORE, prob)
    # the exploit branch needs x != 0, which d(0) = 1 already rules out
    assert np.any(pt.coords != 0.0)
    return Feedback(0.0, action, EXPLOIT, 1.0 - prob)


def lp_estimator(feedback, x, gamma, variant="unbiased"):
    """Loss estimate for the ball strategy.

    Exploit rounds give zero. Explore rounds with atom ``s e_j`` give
    ``n * value / D * s e_j`` where ``D = max(d(x), gamma)`` for the
    ``"unbiased"`` variant and ``max(1 - ||x||_p, gamma)`` for
    ``"norm-gap"``; the latter overestimates by a factor in [1, p].
    """
    if variant not in ("unbiased", "norm-gap"):
        raise ValueError(f"unknown estimator variant {variant!r}")
    pt = _ball(x)
    action = check_vector(feedback.action, "action")
    if action.size != pt.n:
        raise ValueError("action has the wrong dimension")
    if feedback.mode == EXPLOIT:
        return np.zeros(pt.n)
    nz = np.flatnonzero(action)
    if nz.size != 1 or abs(action[nz[0]]) != 1.0:
        raise DomainError("explore feedback must carry a signed basis vector")
    denom = _kernels.lp_denominator(pt.coords, pt.gap, pt.p, gamma, variant == "norm-gap")
    return pt.n * feedback.value / denom * action
