"""Follow-the-regularized-leader iterates, the be-the-leader audit, and
the multiplicative conditioning ratio between consecutive simplex iterates.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from ._validation import check_scalar, check_vector
from .exceptions import ConvergenceError
from .regularizers import (
    BallPoint,
    HybridParams,
    LpParams,
    SimplexPoint,
    hybrid_eval,
    hybrid_value,
    lp_eval,
    lp_grad_inverse,
    lp_value,
)

AUDIT_TOL = 1e-6

_STATUS = {
    _kernels.INNER_CAP: "per-coordinate Newton solve exceeded its iteration cap",
    _kernels.OUTER_CAP: "multiplier search exceeded its iteration cap",
    _kernels.BAD_BRACKET: "multiplier bracket does not straddle the constraint",
}


def raise_for_status(status, **diagnostics):
    if status != _kernels.OK:
        raise ConvergenceError(_STATUS.get(status, f"solver status {status}"), **diagnostics)


def simplex_argmin(cum_loss, eta, params, *, lam0=None, x0=None, return_multiplier=False):
    """Minimize ``eta * cum_loss . x + Phi(x)`` over the simplex.

    Solves the KKT system ``eta L + grad Phi(x) = lam * 1`` with a safeguarded
    Newton search over the multiplier ``lam``; each coordinate is recovered
    from ``lam`` by a monotone scalar solve. ``lam0`` and ``x0`` warm-start
    the two levels.

    Raises
    ------
    ConvergenceError
        If either level exceeds its iteration cap.
    """
    L = check_vector(cum_loss, "cum_loss")
    eta = check_scalar(eta, "eta", low=0.0)
    if not isinstance(params, HybridParams):
        raise TypeError("simplex_argmin needs HybridParams")
    if params.gamma <= 0.0:
        raise ValueError("simplex_argmin needs a strictly positive barrier weight")
    n = L.size
    x = np.full(n, 1.0 / n) if x0 is None else np.array(x0, dtype=float)
    lam, iters, status = _kernels.hybrid_argmin(
        eta * L, params.gamma, np.nan if lam0 is None else float(lam0), x
    )
    raise_for_status(status, cum_loss=L, eta=eta, gamma=params.gamma, iterations=iters)
    pt = SimplexPoint(x)
    return (pt, lam) if return_multiplier else pt


def simplex_mass(cum_loss, eta, params, lam):
    """``sum_i x_i(lam)`` for the per-coordinate KKT solutions at multiplier ``lam``."""
    L = check_vector(cum_loss, "cum_loss")
    x = np.full(L.size, 1.0 / L.size)
    s, _, status = _kernels._simplex_mass(eta * L, params.gamma, float(lam), x)
    raise_for_status(status, lam=lam)
    return s


def multiplier_bracket(cum_loss, eta, params):
    """Analytic starting bracket for the multiplier search."""
    eL = eta * check_vector(cum_loss, "cum_loss")
    n, g = eL.size, params.gamma
    return eL.min() + 1.0 + np.log(1.0 / n) - g * n, eL.max() + 1.0 + g + 1.0


def kkt_residual(cum_loss, eta, params, x):
    """Infinity-norm KKT residual once the multiplier is eliminated.

    With ``r = eta L + grad Phi(x)``, the best constant fit is the midrange,
    so the residual is half the spread of ``r``.
    """
    L = check_vector(cum_loss, "cum_loss")
    if isinstance(params, HybridParams):
        _, grad, _ = hybrid_eval(x, params)
        r = eta * L + grad
        return float(0.5 * (r.max() - r.min()))
    _, grad, _ = lp_eval(x, params)
    return float(np.max(np.abs(grad + eta * L)))


def ball_argmin(cum_loss, eta, params):
    """FTRL iterate on the l_p ball.

    The barrier blows up at the sphere, so the constrained minimizer is the
    interior stationary point ``grad Phi(x) = -eta * cum_loss``.
    """
    L = check_vector(cum_loss, "cum_loss")
    eta = check_scalar(eta, "eta", low=0.0)
    if not isinstance(params, LpParams):
        raise TypeError("ball_argmin needs LpParams")
    return lp_grad_inverse(-eta * L, params)


@dataclass(frozen=True)
class FtrlState:
    """Cumulative estimated loss and round counter for one FTRL run.

    Immutable: :meth:`step` returns the successor state.
    """

    cum_loss: np.ndarray
    eta: float
    params: object
    t: int = 1
    lam: float = field(default=None, compare=False)

    def __post_init__(self):
        L = check_vector(self.cum_loss, "cum_loss").copy()
        L.setflags(write=False)
        object.__setattr__(self, "cum_loss", L)
        check_scalar(self.eta, "eta", low=0.0)
        if self.t < 1:
            raise ValueError("round index starts at 1")
        if not isinstance(self.params, (HybridParams, LpParams)):
            raise TypeError("params must be HybridParams or LpParams")

    @classmethod
    def start(cls, n, eta, params):
        return cls(np.zeros(n), eta, params)

    @property
    def domain(self):
        return "simplex" if isinstance(self.params, HybridParams) else "lp-ball"

    def iterate(self):
        if self.domain == "simplex":
            return simplex_argmin(self.cum_loss, self.eta, self.params, lam0=self.lam)
        return ball_argmin(self.cum_loss, self.eta, self.params)

    def step(self, loss_estimate):
        est = check_vector(loss_estimate, "loss_estimate")
        if est.shape != self.cum_loss.shape:
            raise ValueError("loss estimate has the wrong dimension")
        lam = self.lam
        if self.domain == "simplex":
            _, lam = simplex_argmin(
                self.cum_loss, self.eta, self.params, lam0=lam, return_multiplier=True
            )
        return replace(self, cum_loss=self.cum_loss + est, t=self.t + 1, lam=lam)


@dataclass(frozen=True)
class AuditRecord:
    lhs: float
    rhs: float

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return self.slack >= -AUDIT_TOL


def _reg_value(point, regularizer):
    if isinstance(regularizer, HybridParams):
        return hybrid_value(point, regularizer)
    return lp_value(point, regularizer)


def be_the_leader_audit(losses, iterates, eta, regularizer, comparator):
    """Check ``sum l_t.(x_t - u) <= (Phi(u) - Phi(x_1))/eta + sum l_t.(x_t - x_{t+1})``.

    ``iterates`` holds ``x_1..x_T`` or ``x_1..x_{T+1}``; in the first case the
    last iterate is recomputed from the total loss.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2:
        raise ValueError("losses must be a (T, n) matrix")
    T = losses.shape[0]
    xs = [np.asarray(x, dtype=float) for x in iterates]
    if len(xs) == T:
        total = losses.sum(axis=0)
        if isinstance(regularizer, HybridParams):
            xs.append(simplex_argmin(total, eta, regularizer).weights)
        else:
            xs.append(ball_argmin(total, eta, regularizer).coords)
    elif len(xs) != T + 1:
        raise ValueError(f"expected {T} or {T + 1} iterates, got {len(xs)}")
    X = np.vstack(xs)
    if X.shape[1] != losses.shape[1]:
        raise ValueError("iterates and losses differ in dimension")
    u = np.asarray(comparator, dtype=float)
    lhs = float(np.sum(losses * (X[:T] - u)))
    stability = float(np.sum(losses * (X[:T] - X[1:])))
    if isinstance(regularizer, LpParams):
        first = BallPoint(X[0], regularizer.p) if not isinstance(iterates[0], BallPoint) else iterates[0]
        comp = comparator if isinstance(comparator, BallPoint) else BallPoint(u, regularizer.p)
        phi_gap = _reg_value(comp, regularizer) - _reg_value(first, regularizer)
    else:
        phi_gap = _reg_value(u, regularizer) - _reg_value(X[0], regularizer)
    return AuditRecord(lhs=lhs, rhs=phi_gap / eta + stability)


def conditioning_ratio(x, x_next):
    """Largest coordinatewise multiplicative change ``max_i max(x'_i/x_i, x_i/x'_i)``."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(x_next, dtype=float)
    if a.shape != b.shape:
        raise ValueError("points differ in dimension")
    r = b / a
    return float(np.max(np.maximum(r, 1.0 / r)))
