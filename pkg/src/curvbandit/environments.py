"""Loss-sequence generators, the starved-feedback protocol and sequence statistics.

All generators are oblivious: the full ``T x n`` loss matrix is drawn up
front from the supplied generator and never reacts to play.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import hyp1f1

from . import _kernels
from ._validation import check_loss_matrix, check_rng, check_scalar
from .estimators import signed_basis
from .exceptions import ContractViolation
from .strategies import MU

BOUNDED_KINDS = ("sparse", "low-variation", "ball-noisy", "starved-bernoulli", "custom")


@dataclass(frozen=True)
class LossSequence:
    """An oblivious loss sequence with its provenance.

    ``certificate`` holds the budgets the generator promises (for example
    ``L2sum_bound`` or ``variation_bound``) and, for the Gaussian
    construction, the rescaling constant and the mean loss vector.
    """

    losses: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    seed: object = None
    certificate: dict = field(default_factory=dict)

    def __post_init__(self):
        L = check_loss_matrix(self.losses).copy()
        if self.kind in BOUNDED_KINDS and np.any(np.abs(L) > 1.0):
            raise ValueError(f"{self.kind} losses must lie in [-1, 1]")
        L.setflags(write=False)
        object.__setattr__(self, "losses", L)

    @property
    def T(self):
        return self.losses.shape[0]

    @property
    def n(self):
        return self.losses.shape[1]

    def header(self):
        return {
            "kind": self.kind,
            "params": self.params,
            "seed": self.seed,
            "certificate": self.certificate,
            "shape": list(self.losses.shape),
        }

    def to_csv(self, path):
        """Write ``# {json header}`` and one row per round in ``%.17g``.

        17 significant digits round-trip every double exactly.
        """
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(self.header(), default=_jsonable) + "\n")
            np.savetxt(fh, self.losses, fmt="%.17g", delimiter=",")

    def to_binary(self, path):
        """JSON header line, then the raw little-endian float64 matrix (row-major)."""
        with open(path, "wb") as fh:
            fh.write(json.dumps(self.header(), default=_jsonable).encode() + b"\n")
            fh.write(self.losses.astype("<f8").tobytes(order="C"))

    @classmethod
    def from_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise ValueError(f"{path}: missing header line")
            head = json.loads(first[2:])
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls._from_parts(head, data.reshape(head["shape"]))

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            head = json.loads(fh.readline())
            data = np.frombuffer(fh.read(), dtype="<f8")
        return cls._from_parts(head, data.reshape(head["shape"]).astype(float))

    @classmethod
    def _from_parts(cls, head, data):
        cert = dict(head.get("certificate", {}))
        if "mean_loss" in cert:
            cert["mean_loss"] = np.asarray(cert["mean_loss"], dtype=float)
        return cls(data, head["kind"], head.get("params", {}), head.get("seed"), cert)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SequenceStats:
    L2sum: float
    variation: float
    max_sparsity: int
    in_range: bool


def sequence_stats(seq):
    """Sum of squared norms, total variation around the mean, sparsity, range check."""
    L = seq.losses if isinstance(seq, LossSequence) else check_loss_matrix(seq)
    # shifting by the first round first keeps constant sequences at exactly zero
    shifted = L - L[0]
    centered = shifted - shifted.mean(axis=0)
    return SequenceStats(
        L2sum=float(np.sum(L * L)),
        variation=float(np.sum(centered * centered)),
        max_sparsity=int(np.count_nonzero(L, axis=1).max()),
        in_range=bool(np.all(np.abs(L) <= 1.0)),
    )


# ---------------------------------------------------------------------------
# bounded generators
# ---------------------------------------------------------------------------


def gen_sparse(n, T, s, style="hidden-good-arm", rng=None):
    """Losses with at most ``s`` non-zero entries per round.

    ``random-support`` picks ``s`` coordinates uniformly each round with
    values uniform in [-1, 1]. ``hidden-good-arm`` fixes one arm that gets
    loss -1 every round; the other ``s - 1`` non-zeros land on random other
    arms with uniform values.
    """
    if not (0 <= s <= n):
        raise ValueError(f"sparsity s={s} outside [0, {n}]")
    if style not in ("random-support", "hidden-good-arm"):
        raise ValueError(f"unknown sparse style {style!r}")
    rng = check_rng(rng)
    L = np.zeros((T, n))
    params = {"n": n, "T": T, "s": s, "style": style}
    if s == 0:
        return LossSequence(L, "sparse", params, certificate={"L2sum_bound": 0.0})
    rows = np.arange(T)[:, None]
    if style == "random-support":
        support = np.argsort(rng.random((T, n)), axis=1)[:, :s]
        L[rows, support] = rng.uniform(-1.0, 1.0, (T, s))
    else:
        good = int(rng.integers(n))
        params["good_arm"] = good
        L[:, good] = -1.0
        if s > 1:
            others = np.delete(np.arange(n), good)
            pick = np.argsort(rng.random((T, n - 1)), axis=1)[:, : s - 1]
            L[rows, others[pick]] = rng.uniform(-1.0, 1.0, (T, s - 1))
    return LossSequence(L, "sparse", params, certificate={"L2sum_bound": float(s * T)})


def gen_low_variation(n, T, Q, rng=None, delta=0.5, base="independent"):
    """Near-stationary losses with total variation in ``[0.9 Q, Q]``.

    Each round is ``b + a * z_t`` with ``z_t`` uniform in [-1, 1]^n and ``a``
    chosen so the realized variation is ``0.99 Q``. With
    ``base="independent"`` the base vector has independent entries uniform in
    ``[-1 + delta, 1 - delta]`` and the perturbations are centred per arm, so
    the arm means are exactly ``b``. With ``base="common"`` every arm shares
    one base value and the arms differ only through their perturbations.

    Raises ``ValueError`` if the perturbation would push a loss outside
    [-1, 1].
    """
    if not (0.0 <= Q <= n * T):
        raise ValueError(f"variation budget Q={Q} outside [0, nT]")
    check_scalar(delta, "delta", low=0.0, high=1.0)
    if base not in ("independent", "common"):
        raise ValueError(f"unknown base {base!r}")
    rng = check_rng(rng)
    if base == "independent":
        b = rng.uniform(-1.0 + delta, 1.0 - delta, n)
    else:
        b = np.full(n, rng.uniform(-1.0 + delta, 1.0 - delta))
    params = {"n": n, "T": T, "Q": Q, "delta": delta, "base": base}
    if Q == 0.0 or T == 1:
        L = np.tile(b, (T, 1))
        return LossSequence(L, "low-variation", params, certificate={"variation_bound": float(Q)})
    z = rng.uniform(-1.0, 1.0, (T, n))
    zc = z - z.mean(axis=0)
    if base == "independent":
        z = zc
    a = math.sqrt(0.99 * Q / np.sum(zc * zc))
    L = b + a * z
    if np.abs(L).max() > 1.0:
        raise ValueError(f"Q={Q} is infeasible with delta={delta}: perturbations leave [-1, 1]")
    return LossSequence(L, "low-variation", params, certificate={"variation_bound": float(Q)})


def gen_ball_noisy(n, T, p, rng=None, noise=0.5):
    """Linear losses for the l_p ball: ``(1 - noise) theta + noise zeta_t``.

    ``theta`` is a fixed random direction with ``||theta||_q = 1`` and
    ``zeta_t`` is uniform in [-1, 1]^n pulled back into the unit l_q ball,
    so every loss has dual norm at most 1 and ``|loss . x| <= 1`` on the ball.
    """
    check_scalar(noise, "noise", low=0.0, high=1.0, low_open=False)
    q = p / (p - 1.0)
    rng = check_rng(rng)
    theta = rng.normal(size=n)
    theta /= np.linalg.norm(theta, q)
    z = rng.uniform(-1.0, 1.0, (T, n))
    z /= np.maximum(1.0, np.linalg.norm(z, q, axis=1))[:, None]
    L = (1.0 - noise) * theta + noise * z
    params = {"n": n, "T": T, "p": p, "noise": noise}
    return LossSequence(L, "ball-noisy", params, certificate={"dual_norm_bound": 1.0})


def gen_starved_bernoulli(n, T, epsilon, rng=None):
    """Arm 1 is Bernoulli(1/2 +- epsilon), arm 2 Bernoulli(1/2), the rest always 1.

    The sign of ``epsilon`` is drawn once per sequence and recorded in
    ``params["sign"]`` (0-based arm 0 is the tilted arm).
    """
    if n < 2:
        raise ValueError("need at least two arms")
    check_scalar(epsilon, "epsilon", low=0.0, high=0.5, low_open=False, high_open=True)
    rng = check_rng(rng)
    sign = 1 if rng.random() < 0.5 else -1
    L = np.ones((T, n))
    L[:, 0] = rng.random(T) < 0.5 + sign * epsilon
    L[:, 1] = rng.random(T) < 0.5
    params = {"n": n, "T": T, "epsilon": epsilon, "sign": sign}
    return LossSequence(L, "starved-bernoulli", params)


# ---------------------------------------------------------------------------
# Gaussian lower-bound construction
# ---------------------------------------------------------------------------


def gaussian_abs_moment(m, sigma, q):
    """``E|N(m, sigma^2)|^q`` in closed form via Kummer's function."""
    m = np.asarray(m, dtype=float)
    return (
        sigma**q
        * 2.0 ** (q / 2.0)
        * gamma_fn((q + 1.0) / 2.0)
        / math.sqrt(math.pi)
        * hyp1f1(-q / 2.0, 0.5, -(m * m) / (2.0 * sigma * sigma))
    )


@dataclass(frozen=True)
class GaussianLbParams:
    """Parameters of the Gaussian construction over
    ``K = {(x, y): |x|^p + ||y||_p^p <= 1}`` in dimension ``n + 1``.
    """

    n: int
    T: int
    p: float = 3.0
    C: float = 0.1
    xi: np.ndarray = None

    def __post_init__(self):
        if self.p <= 2.0:
            raise ValueError("the Gaussian construction needs p > 2")
        check_scalar(self.C, "C", low=0.0, high=1.0, high_open=True)
        xi = np.ones(self.n) if self.xi is None else np.asarray(self.xi, dtype=float)
        if xi.shape != (self.n,) or not np.all(np.abs(xi) == 1.0):
            raise ValueError("xi must be a sign vector of length n")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        regime = self.n ** max(2.0, (self.p - 1.0) / (self.p - 2.0))
        if self.T < regime:
            warnings.warn(f"T={self.T} is below the construction's regime T >= {regime:.3g}", RuntimeWarning, stacklevel=2)

    @property
    def q(self):
        return self.p / (self.p - 1.0)

    @property
    def epsilon(self):
        return (self.C / math.sqrt(self.T)) ** (1.0 / self.q)

    def raw_moment(self):
        """``E ||l||_q^q`` before rescaling."""
        q, n = self.q, self.n
        sig_z = n ** (-1.0 / q)
        return float(gaussian_abs_moment(-1.0, 1.0, q) + n * gaussian_abs_moment(self.epsilon, sig_z, q))

    @property
    def scale(self):
        return self.raw_moment() ** (-1.0 / self.q)

    def mean_loss(self):
        return self.scale * np.concatenate([[-1.0], self.epsilon * self.xi])

    def comparator_per_round(self):
        """Minimum expected loss over K: ``-scale (1 + eps^q n)^(1/q)``."""
        return -self.scale * (1.0 + self.epsilon**self.q * self.n) ** (1.0 / self.q)


def gen_gaussian_lb(params, rng=None):
    """Losses ``scale * (w_t, z_t)`` with ``w_t ~ N(-1, 1)`` and
    ``z_t ~ N(eps xi, n^(-2/q) I)``, rescaled so ``E ||l||_q^q = 1``.
    """
    rng = check_rng(rng)
    n, T, q = params.n, params.T, params.q
    w = rng.normal(-1.0, 1.0, (T, 1))
    z = rng.normal(params.epsilon * params.xi, n ** (-1.0 / q), (T, n))
    L = params.scale * np.hstack([w, z])
    cert = {
        "scale": params.scale,
        "raw_moment": params.raw_moment(),
        "epsilon": params.epsilon,
        "comparator_per_round": params.comparator_per_round(),
        "mean_loss": params.mean_loss(),
    }
    meta = {"n": n, "T": T, "p": params.p, "C": params.C, "xi": params.xi.tolist()}
    return LossSequence(L, "gaussian-lb", meta, certificate=cert)


def info_diagnostic(action, params):
    """Per-round information ``eps^2 ||y||_2^2 / sigma^2`` with
    ``sigma^2 = x^2 + ||y||_2^2 / n^(2/q)``, for ``action = (x, y)``.
    """
    a = np.asarray(action, dtype=float)
    x, y = a[0], a[1:]
    yy = float(y @ y)
    if yy == 0.0:
        return 0.0
    sigma2 = x * x + yy / params.n ** (2.0 / params.q)
    return params.epsilon**2 * yy / sigma2


# ---------------------------------------------------------------------------
# starved-feedback protocol
# ---------------------------------------------------------------------------


class Withheld:
    """Stand-in for feedback the protocol does not reveal.

    Any attempt to use it as a number raises :class:`ContractViolation`.
    """

    __slots__ = ()

    def _refuse(self, *args):
        raise ContractViolation("strategy read feedback on a round played off the exploration distribution")

    __float__ = __int__ = __index__ = __bool__ = _refuse
    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _refuse
    __truediv__ = __rtruediv__ = __neg__ = __abs__ = _refuse
    __lt__ = __le__ = __gt__ = __ge__ = _refuse
    __array__ = _refuse

    def __repr__(self):
        return "WITHHELD"


WITHHELD = Withheld()


def canonical_basis(n):
    return np.eye(n)


class StarvedProtocol:
    """Wraps a strategy so it only sees feedback on rounds drawn from ``mu``.

    ``mu`` is a matrix whose rows are the atoms of the fixed exploration
    distribution (taken uniform). A round the strategy declares as drawn
    from ``mu`` must play one of those atoms and gets the usual bandit
    feedback; every other round gets :data:`WITHHELD`. The wrapper counts the
    exploration rounds in ``explorations_``.
    """

    def __init__(self, strategy, mu):
        self.strategy = strategy
        self.mu = np.asarray(mu, dtype=float)
        if self.mu.ndim != 2:
            raise ValueError("mu must be a matrix of atoms (one per row)")
        self.explorations_ = 0
        self.branches_ = []

    def reset(self, n, rng=None):
        self.strategy.reset(n, rng)
        self.explorations_ = 0
        self.branches_ = []
        return self

    def _as_vector(self, action):
        if np.isscalar(action) or np.ndim(action) == 0:
            v = np.zeros(self.mu.shape[1])
            v[int(action)] = 1.0
            return v
        return np.asarray(action, dtype=float)

    def play_round(self, loss):
        """One round: the player suffers its loss; feedback only if from ``mu``."""
        decision = self.strategy.act()
        vec = self._as_vector(decision.action)
        loss = np.asarray(loss, dtype=float)
        value = _kernels.dot(loss, vec)
        self.branches_.append(decision.branch)
        if decision.branch == MU:
            if not np.any(np.all(self.mu == vec, axis=1)):
                raise ContractViolation("action declared as exploration is not an atom of mu")
            self.explorations_ += 1
            self.strategy.observe(value)
        else:
            self.strategy.observe(WITHHELD)
        return decision, value


def starved_wrap(strategy, mu=None):
    """Wrap ``strategy`` in the starved protocol.

    ``mu`` defaults to the signed canonical basis for ball strategies and the
    canonical basis for simplex strategies; it is resolved at ``reset``.
    """
    if mu is None:
        return _LazyStarved(strategy)
    return StarvedProtocol(strategy, mu)


class _LazyStarved(StarvedProtocol):
    def __init__(self, strategy):
        self.strategy = strategy
        self.mu = None
        self.explorations_ = 0
        self.branches_ = []

    def reset(self, n, rng=None):
        ball = getattr(self.strategy, "domain", "simplex") == "lp-ball"
        self.mu = signed_basis(n) if ball else canonical_basis(n)
        return super().reset(n, rng)


__all__ = [
    "GaussianLbParams",
    "LossSequence",
    "SequenceStats",
    "StarvedProtocol",
    "WITHHELD",
    "canonical_basis",
    "gaussian_abs_moment",
    "gen_ball_noisy",
    "gen_gaussian_lb",
    "gen_low_variation",
    "gen_sparse",
    "gen_starved_bernoulli",
    "info_diagnostic",
    "sequence_stats",
    "signed_basis",
    "starved_wrap",
]
