"""Regularizers for the simplex and the l_p ball.

Two mirror maps live here:

* the hybrid regularizer on the positive orthant,
  ``sum x log x - gamma * sum log x`` (negentropy plus a little log-barrier);
* the l_p barrier ``-log(1 - ||x||_p^p)`` on the open unit ball, ``1 < p <= 2``.

Both expose value, gradient and curvature in closed form. The ball barrier
additionally has an exact Fenchel-dual gradient (``lp_grad_inverse``) that
reduces to a monotone scalar root find.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import check_positive, check_scalar, check_vector
from .exceptions import DomainError

SIMPLEX_FLOOR = _kernels.FLOOR
SIMPLEX_SUM_TOL = 1e-9
GAP_REL_TOL = 1e-10


@dataclass(frozen=True)
class HybridParams:
    """Log-barrier weight. Zero is allowed for evaluation (pure negentropy);
    the FTRL solver needs it strictly positive."""

    gamma: float

    def __post_init__(self):
        check_scalar(self.gamma, "gamma", low=0.0, low_open=False)


@dataclass(frozen=True)
class LpParams:
    p: float

    def __post_init__(self):
        check_scalar(self.p, "p", low=1.0, high=2.0)

    @property
    def q(self):
        return self.p / (self.p - 1.0)


@dataclass(frozen=True)
class SimplexPoint:
    """Strictly positive probability vector.

    Entries are floored at ``SIMPLEX_FLOOR`` so that logs stay finite after
    floating-point underflow; negative or non-normalised input is rejected.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = check_vector(self.weights, "weights")
        if np.any(w < 0.0):
            raise DomainError("simplex weights must be non-negative")
        if abs(w.sum() - 1.0) > SIMPLEX_SUM_TOL:
            raise DomainError(f"simplex weights sum to {w.sum()!r}, not 1")
        w = np.maximum(w, SIMPLEX_FLOOR)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


@dataclass(frozen=True)
class BallPoint:
    """Interior point of the unit l_p ball with its cached gap ``1 - ||x||_p^p``.

    The cached gap is what the barrier uses: recomputing it from the
    coordinates loses all relative precision near the sphere.
    """

    coords: np.ndarray
    p: float
    gap: float = field(default=None)

    def __post_init__(self):
        x = check_vector(self.coords, "coords")
        p = check_scalar(self.p, "p", low=1.0, high=2.0)
        direct = 1.0 - float(np.sum(np.abs(x) ** p))
        gap = direct if self.gap is None else float(self.gap)
        if not (0.0 < gap <= 1.0):
            raise DomainError(f"point is not strictly inside the unit l_{p:g} ball (gap {gap!r})")
        # absolute slack covers rounding in the direct recomputation
        if abs(direct - gap) > GAP_REL_TOL * gap + 4 * (x.size + 1) * np.finfo(float).eps:
            raise DomainError(f"cached gap {gap!r} disagrees with coordinates ({direct!r})")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "gap", gap)

    @property
    def n(self):
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


# ---------------------------------------------------------------------------
# hybrid regularizer
# ---------------------------------------------------------------------------


def hybrid_value(x, params):
    x = check_positive(np.asarray(x, dtype=float), "x")
    return float(np.sum(x * np.log(x)) - params.gamma * np.sum(np.log(x)))


def hybrid_eval(x, params):
    """Value, gradient and Hessian diagonal of the hybrid regularizer.

    ``x`` may be any strictly positive vector (the regularizer lives on the
    whole positive orthant); a :class:`SimplexPoint` is accepted as well.

    Returns
    -------
    value : float
    grad : ndarray, ``1 + log x - gamma / x``
    hess_diag : ndarray, ``1/x + gamma / x**2``
    """
    x = check_positive(np.asarray(x, dtype=float), "x")
    g = params.gamma
    logx = np.log(x)
    value = float(np.sum(x * logx) - g * np.sum(logx))
    grad = 1.0 + logx - g / x
    hess_diag = 1.0 / x + g / x**2
    return value, grad, hess_diag


def negentropy_hess_diag(x):
    x = check_positive(np.asarray(x, dtype=float), "x")
    return 1.0 / x


# ---------------------------------------------------------------------------
# l_p barrier
# ---------------------------------------------------------------------------


class LpHessian:
    """Hessian of the l_p barrier at a fixed point: diagonal plus rank one.

    Calling the object applies the Hessian to a vector. ``inverse_quad``
    gives the exact dual local norm through Sherman-Morrison, and
    ``diag_bound`` the diagonal upper bound on the inverse Hessian.
    """

    def __init__(self, coords, gap, p):
        self.coords = np.asarray(coords, dtype=float)
        self.gap = float(gap)
        self.p = float(p)
        ax = np.abs(self.coords)
        self._zero = ax == 0.0
        # inverse of the diagonal part; finite even where x_i = 0
        self.inv_diag = self.gap * ax ** (2.0 - self.p) / (self.p * (self.p - 1.0))
        self.rank_one = self.p * np.sign(self.coords) * ax ** (self.p - 1.0) / self.gap

    def __call__(self, h):
        h = check_vector(h, "h")
        p, d = self.p, self.gap
        if p < 2.0 and np.any(self._zero & (h != 0.0)):
            raise DomainError("Hessian is singular at coordinates where x_i = 0; h must vanish there")
        ax = np.abs(self.coords)
        diag = np.zeros_like(ax)
        nz = ~self._zero if p < 2.0 else np.ones_like(ax, dtype=bool)
        diag[nz] = p * (p - 1.0) * ax[nz] ** (p - 2.0) / d
        return diag * h + self.rank_one * (self.rank_one @ h)

    def inverse_quad(self, h):
        h = check_vector(h, "h")
        a = self.inv_diag
        w = self.rank_one
        aw = a * w
        return float(np.sum(a * h * h) - (aw @ h) ** 2 / (1.0 + w @ aw))

    def diag_bound(self, h):
        h = check_vector(h, "h")
        return float(np.sum(self.inv_diag * h * h))


def _as_ball(x, params):
    if isinstance(x, BallPoint):
        if x.p != params.p:
            raise ValueError(f"point built for p={x.p}, params have p={params.p}")
        return x
    return BallPoint(np.asarray(x, dtype=float), params.p)


def lp_eval(x, params):
    """Value, gradient and Hessian action of ``-log(1 - ||x||_p^p)``.

    Returns ``(value, grad, hess)`` where ``hess`` is an :class:`LpHessian`;
    call it on a vector to apply the Hessian.
    """
    pt = _as_ball(x, params)
    p, d = params.p, pt.gap
    c = pt.coords
    value = -float(np.log(d))
    grad = p * np.sign(c) * np.abs(c) ** (p - 1.0) / d
    return value, grad, LpHessian(c, d, p)


def lp_value(x, params):
    return lp_eval(x, params)[0]


def lp_grad_inverse(v, params):
    """Point whose barrier gradient equals ``v`` (the dual-map gradient).

    Solves for the gap ``d`` on (0, 1] and reads the coordinates off it:
    ``|x_i| = (|v_i| d / p)^(1/(p-1))``.
    """
    v = check_vector(v, "v")
    x = np.empty_like(v)
    d = _kernels.lp_grad_inverse(v, params.p, x)
    return BallPoint(x, params.p, gap=d)


def dual_local_norm_sq(hess, h):
    """Squared dual local norm ``h^T (Hess)^{-1} h``.

    ``hess`` is either a Hessian diagonal (1-D array) or the
    :class:`LpHessian` returned by :func:`lp_eval`.
    """
    if isinstance(hess, LpHessian):
        return hess.inverse_quad(h)
    diag = check_vector(hess, "hess")
    h = check_vector(h, "h")
    if diag.shape != h.shape:
        raise ValueError("hessian diagonal and h differ in length")
    bad = (diag == 0.0) & (h != 0.0)
    if np.any(bad):
        raise DomainError("zero curvature in a direction where h is non-zero")
    nz = h != 0.0
    return float(np.sum(h[nz] ** 2 / diag[nz]))


def lp_dual_norm_bound(x, h, params):
    """Diagonal upper bound ``d/(p(p-1)) * sum |x_i|^(2-p) h_i^2`` on the dual norm."""
    pt = _as_ball(x, params)
    return LpHessian(pt.coords, pt.gap, params.p).diag_bound(h)
