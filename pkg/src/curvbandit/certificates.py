"""Randomized property suites for the regularizers, solvers and estimators.

Each suite draws random instances, evaluates a checkable inequality or
identity, and reports the number of violations together with the worst
observed margin. They back both the test-suite and ``curvbandit
verify-lemmas``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_rng
from .estimators import (
    EXPLOIT,
    EXPLORE,
    Feedback,
    centered_estimator,
    lp_estimator,
    mab_estimator,
    signed_basis,
)
from .ftrl import (
    ball_argmin,
    be_the_leader_audit,
    conditioning_ratio,
    kkt_residual,
    simplex_argmin,
)
from .regularizers import (
    BallPoint,
    HybridParams,
    LpParams,
    dual_local_norm_sq,
    hybrid_eval,
    lp_dual_norm_bound,
    lp_eval,
    lp_grad_inverse,
    negentropy_hess_diag,
)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    violations: int
    worst: float
    limit: float

    @property
    def passed(self):
        return self.violations == 0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: {self.violations}/{self.trials} violations, "
            f"worst {self.worst:.6g} (limit {self.limit:.6g})"
        )


def _result(name, values, limit):
    values = np.asarray(values, dtype=float)
    return SuiteResult(name, values.size, int(np.sum(values > limit)), float(values.max()), limit)


def _ball_point(rng, n, p, radius_max=0.999):
    """Random interior point with ``||x||_p`` log-spread towards the sphere."""
    direction = rng.normal(size=n)
    direction /= np.linalg.norm(direction, p)
    radius = 1.0 - 10.0 ** rng.uniform(np.log10(1.0 - radius_max), 0.0)
    return direction * radius


def _single_coordinate(rng, n):
    ell = np.zeros(n)
    ell[rng.integers(n)] = rng.uniform(-1.0, 1.0)
    return ell


# ---------------------------------------------------------------------------
# simplex
# ---------------------------------------------------------------------------


def conditioning_suite(trials=10_000, rng=None, dims=(2, 5, 20)):
    """Multiplicative stability of the hybrid FTRL iterate.

    Regime: ``gamma = 2 eta``, ``eta <= 1/(15 n)``, and a single-coordinate
    perturbation ``xi e_i`` with ``|xi| <= 1 / x_i``. Limit: ratio 3.
    """
    rng = check_rng(rng)
    ratios = np.empty(trials)
    for k in range(trials):
        n = int(dims[k % len(dims)])
        # half the draws sit exactly at the learning-rate cap
        eta = (1.0 if rng.random() < 0.5 else rng.uniform(0.05, 1.0)) / (15 * n)
        params = HybridParams(2.0 * eta)
        L = rng.normal(0.0, 10.0 ** rng.uniform(-1, 4), n)
        x = simplex_argmin(L, eta, params).weights
        i = rng.integers(n)
        # both edge cases (|xi| at the cap) and interior values
        xi = rng.choice([-1.0, 1.0]) * (1.0 if rng.random() < 0.3 else rng.random()) / x[i]
        L2 = L.copy()
        L2[i] += xi
        ratios[k] = conditioning_ratio(x, simplex_argmin(L2, eta, params).weights)
    return _result("conditioning ratio <= 3 (hybrid FTRL)", ratios, 3.0)


def simplex_kkt_suite(trials=1000, rng=None):
    rng = check_rng(rng)
    res = np.empty(trials)
    for k in range(trials):
        n = int(rng.integers(2, 50))
        eta = 10.0 ** rng.uniform(-4, 0)
        params = HybridParams(10.0 ** rng.uniform(-6, 0))
        L = rng.normal(0.0, 10.0 ** rng.uniform(-1, 4), n)
        x = simplex_argmin(L, eta, params).weights
        res[k] = kkt_residual(L, eta, params, x)
    return _result("simplex KKT residual", res, 1e-8)


def btl_suite(trials=100, rounds=10, rng=None, eta=0.01, gamma=0.02):
    """Be-the-leader inequality on random short simplex games; reports ``-slack``."""
    rng = check_rng(rng)
    params = HybridParams(gamma)
    neg_slack = np.empty(trials)
    for k in range(trials):
        n = int(rng.integers(2, 10))
        losses = rng.uniform(-1.0, 1.0, (rounds, n)) * 10.0 ** rng.uniform(0, 2)
        cum = np.vstack([np.zeros(n), np.cumsum(losses, axis=0)])
        iterates = [simplex_argmin(c, eta, params).weights for c in cum]
        u = rng.dirichlet(np.ones(n))
        neg_slack[k] = -be_the_leader_audit(losses, iterates, eta, params, u).slack
    return _result("be-the-leader slack >= -1e-6", neg_slack, 1e-6)


# ---------------------------------------------------------------------------
# l_p barrier
# ---------------------------------------------------------------------------


def ball_kkt_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0)):
    rng = check_rng(rng)
    res = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        params = LpParams(p)
        n = int(rng.integers(1, 30))
        L = rng.normal(0.0, 10.0 ** rng.uniform(-2, 3), n)
        eta = 10.0 ** rng.uniform(-3, 0)
        x = ball_argmin(L, eta, params)
        res[k] = kkt_residual(L, eta, params, x) / max(1.0, eta * np.abs(L).max())
    return _result("ball first-order residual (relative)", res, 1e-8)


def roundtrip_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0)):
    """``grad_inverse(grad(x)) = x`` checked through the gradient itself."""
    rng = check_rng(rng)
    err = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        params = LpParams(p)
        x = _ball_point(rng, int(rng.integers(1, 20)), p)
        _, v, _ = lp_eval(x, params)
        y = lp_grad_inverse(v, params)
        _, v2, _ = lp_eval(y, params)
        err[k] = np.max(np.abs(v2 - v)) / max(1.0, np.max(np.abs(v)))
    return _result("gradient inversion round trip (relative)", err, 1e-8)


def dual_norm_domination_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0)):
    """Exact dual local norm never exceeds the diagonal bound; reports ratio."""
    rng = check_rng(rng)
    ratio = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        params = LpParams(p)
        n = int(rng.integers(1, 20))
        x = _ball_point(rng, n, p)
        h = rng.normal(size=n)
        _, _, hess = lp_eval(x, params)
        ratio[k] = dual_local_norm_sq(hess, h) / lp_dual_norm_bound(x, h, params)
    return _result("exact dual norm / diagonal bound", ratio, 1.0 + 1e-12)


def gap_stability_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0)):
    """Gap and coordinate control after a single-coordinate dual step.

    Reports the worse of ``d(y) / (4 d(x))`` and the coordinatewise ratio
    ``|y_i| / (2^(3/(p-1)) |x_i| + |2 l_i|^(1/(p-1)))``.
    """
    rng = check_rng(rng)
    worst = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        params = LpParams(p)
        n = int(rng.integers(1, 20))
        v = rng.normal(size=n) * 10.0 ** rng.uniform(-2, 4)
        ell = _single_coordinate(rng, n)
        x = lp_grad_inverse(v, params)
        y = lp_grad_inverse(v + ell, params)
        bound = 2.0 ** (3.0 / (p - 1.0)) * np.abs(x.coords) + np.abs(2.0 * ell) ** (1.0 / (p - 1.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            coord = np.where(bound > 0, np.abs(y.coords) / bound, 0.0)
        worst[k] = max(y.gap / (4.0 * x.gap), coord.max())
    return _result("single-step gap/coordinate control", worst, 1.0 + 1e-12)


def segment_dual_norm_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0), points=20):
    """Dual local norm along the dual segment; reports exact / bound."""
    rng = check_rng(rng)
    ratio = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        params = LpParams(p)
        n = int(rng.integers(1, 20))
        x = BallPoint(_ball_point(rng, n, p), p)
        ell = _single_coordinate(rng, n)
        _, v, _ = lp_eval(x, params)
        bound = (
            2.0 ** (3.0 / (p - 1.0))
            * x.gap
            / (p * (p - 1.0))
            * np.sum((np.abs(x.coords) ** (2.0 - p) + np.abs(ell) ** ((2.0 - p) / (p - 1.0))) * ell**2)
        )
        worst = 0.0
        for s in np.linspace(0.0, 1.0, points):
            y = lp_grad_inverse(v + s * ell, params)
            _, _, hess = lp_eval(y, params)
            exact = dual_local_norm_sq(hess, ell)
            worst = max(worst, exact / bound if bound > 0 else 0.0)
        ratio[k] = worst
    return _result("dual norm along segment / bound", ratio, 1.0 + 1e-12)


def finite_difference_suite(trials=100, rng=None):
    """Gradient and Hessian of both regularizers against central differences."""
    rng = check_rng(rng)
    err = []
    for _ in range(trials):
        n = int(rng.integers(2, 8))
        h = 1e-6
        # hybrid: interior of the positive orthant
        params = HybridParams(10.0 ** rng.uniform(-3, 0))
        x = rng.uniform(0.05, 1.0, n)
        _, g, hd = hybrid_eval(x, params)
        fd_g = np.array([(hybrid_eval(x + h * e, params)[0] - hybrid_eval(x - h * e, params)[0]) / (2 * h) for e in np.eye(n)])
        fd_h = np.array([(hybrid_eval(x + h * e, params)[1][i] - hybrid_eval(x - h * e, params)[1][i]) / (2 * h) for i, e in enumerate(np.eye(n))])
        err.append(np.max(np.abs(fd_g - g) / np.maximum(1.0, np.abs(g))) / 1e-5)
        err.append(np.max(np.abs(fd_h - hd) / np.maximum(1.0, np.abs(hd))) / 1e-4)
        # l_p barrier away from zero coordinates and the sphere
        p = rng.uniform(1.1, 2.0)
        lp = LpParams(p)
        y = _ball_point(rng, n, p, radius_max=0.9)
        y = np.where(np.abs(y) < 0.01, 0.01 * np.sign(y + 1e-300), y)
        if np.sum(np.abs(y) ** p) >= 0.95:
            y *= 0.9
        _, g, hess = lp_eval(y, lp)
        fd_g = np.array([(lp_eval(y + h * e, lp)[0] - lp_eval(y - h * e, lp)[0]) / (2 * h) for e in np.eye(n)])
        err.append(np.max(np.abs(fd_g - g) / np.maximum(1.0, np.abs(g))) / 1e-5)
        d = rng.normal(size=n)
        fd_hd = (lp_eval(y + h * d, lp)[1] - lp_eval(y - h * d, lp)[1]) / (2 * h)
        hv = hess(d)
        err.append(np.max(np.abs(fd_hd - hv) / np.maximum(1.0, np.abs(hv))) / 1e-4)
    return _result("finite differences (error / tolerance)", err, 1.0)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def mab_identity_suite(trials=1000, rng=None):
    """Unbiasedness and the negentropy variance identity by enumerating arms.

    Reports the larger absolute error of the two identities.
    """
    rng = check_rng(rng)
    err = np.empty(trials)
    for k in range(trials):
        n = int(rng.integers(1, 20))
        x = rng.dirichlet(np.ones(n) * rng.uniform(0.2, 5.0))
        x = np.maximum(x, 1e-6)
        x /= x.sum()
        ell = rng.uniform(-1.0, 1.0, n)
        mean = np.zeros(n)
        var = 0.0
        hess = negentropy_hess_diag(x)
        for a in range(n):
            est = mab_estimator(Feedback(ell[a], a, EXPLOIT, x[a]), x)
            mean += x[a] * est
            var += x[a] * dual_local_norm_sq(hess, est)
        err[k] = max(np.max(np.abs(mean - ell)), abs(var - ell @ ell) / max(1.0, ell @ ell))
    return _result("importance-weighted identities", err, 1e-12)


def centered_identity_suite(trials=1000, rng=None):
    rng = check_rng(rng)
    err = np.empty(trials)
    for k in range(trials):
        n = int(rng.integers(1, 20))
        x = rng.dirichlet(np.ones(n))
        x = np.maximum(x, 1e-6)
        x /= x.sum()
        ell = rng.uniform(-1.0, 1.0, n)
        mu = rng.uniform(-1.0, 1.0, n)
        mean = sum(x[a] * centered_estimator(Feedback(ell[a], a), x, mu) for a in range(n))
        err[k] = np.max(np.abs(mean - ell))
    return _result("centered estimator unbiasedness", err, 1e-12)


def hybrid_variance_suite(trials=1000, rng=None):
    """Expected hybrid dual norm of the estimate never exceeds ``||l||_2^2``."""
    rng = check_rng(rng)
    ratio = np.empty(trials)
    for k in range(trials):
        n = int(rng.integers(1, 20))
        x = rng.dirichlet(np.ones(n))
        x = np.maximum(x, 1e-6)
        x /= x.sum()
        params = HybridParams(10.0 ** rng.uniform(-4, 0))
        _, _, hd = hybrid_eval(x, params)
        ell = rng.uniform(-1.0, 1.0, n)
        var = sum(x[a] * dual_local_norm_sq(hd, mab_estimator(Feedback(ell[a], a), x)) for a in range(n))
        ratio[k] = var / (ell @ ell)
    return _result("hybrid variance / ||l||^2", ratio, 1.0 + 1e-12)


def lp_outcomes(x, gamma, ell, variant="unbiased"):
    """All (probability, action, estimate) outcomes of one ball round."""
    n = x.n
    explore_p = max(x.gap, gamma)
    out = []
    for atom in signed_basis(n):
        fb = Feedback(float(ell @ atom), atom, EXPLORE, explore_p)
        out.append((explore_p / (2 * n), atom, lp_estimator(fb, x, gamma, variant)))
    if explore_p < 1.0:
        act = x.coords / np.linalg.norm(x.coords, x.p)
        fb = Feedback(float(ell @ act), act, EXPLOIT, 1.0 - explore_p)
        out.append((1.0 - explore_p, act, lp_estimator(fb, x, gamma, variant)))
    return out


def lp_identity_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0)):
    """Unbiased ball estimator by exact enumeration; reports max error."""
    rng = check_rng(rng)
    err = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        n = int(rng.integers(1, 15))
        x = BallPoint(_ball_point(rng, n, p), p)
        gamma = rng.uniform(0.001, 0.5)
        ell = rng.uniform(-1.0, 1.0, n)
        mean = sum(w * est for w, _, est in lp_outcomes(x, gamma, ell))
        err[k] = np.max(np.abs(mean - ell))
    return _result("ball estimator unbiasedness", err, 1e-12)


def lp_bias_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0)):
    """``|E[l . a] - l . x| / (2 (gamma + d(x)) ||l||_q)``, a conservative envelope."""
    rng = check_rng(rng)
    ratio = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        q = p / (p - 1.0)
        n = int(rng.integers(1, 15))
        x = BallPoint(_ball_point(rng, n, p), p)
        gamma = rng.uniform(0.001, 0.5)
        ell = rng.uniform(-1.0, 1.0, n)
        played = sum(w * (ell @ a) for w, a, _ in lp_outcomes(x, gamma, ell))
        ratio[k] = abs(played - ell @ x.coords) / (2.0 * (gamma + x.gap) * np.linalg.norm(ell, q))
    return _result("played-point bias / envelope", ratio, 1.0)


def lp_magnitude_suite(trials=1000, rng=None, ps=(1.1, 1.5, 2.0)):
    """``||eta l~||_2 <= n eta / gamma`` for unit-bounded feedback; reports ratio."""
    rng = check_rng(rng)
    ratio = np.empty(trials)
    for k in range(trials):
        p = ps[k % len(ps)]
        n = int(rng.integers(1, 15))
        x = BallPoint(_ball_point(rng, n, p), p)
        gamma = rng.uniform(0.001, 0.5)
        ell = rng.uniform(-1.0, 1.0, n)
        worst = max(np.linalg.norm(est) for _, _, est in lp_outcomes(x, gamma, ell))
        ratio[k] = worst / (n / gamma)
    return _result("ball estimate magnitude / (n / gamma)", ratio, 1.0 + 1e-12)


SUITES = {
    "conditioning": conditioning_suite,
    "simplex-kkt": simplex_kkt_suite,
    "btl": btl_suite,
    "ball-kkt": ball_kkt_suite,
    "roundtrip": roundtrip_suite,
    "segment-dual-norm": segment_dual_norm_suite,
    "dual-norm-domination": dual_norm_domination_suite,
    "gap-stability": gap_stability_suite,
    "finite-differences": finite_difference_suite,
    "mab-identities": mab_identity_suite,
    "centered": centered_identity_suite,
    "hybrid-variance": hybrid_variance_suite,
    "lp-unbiased": lp_identity_suite,
    "lp-bias": lp_bias_suite,
    "lp-magnitude": lp_magnitude_suite,
}


def run_all(seed=0, names=None):
    """Run the named suites (all by default) with independent child streams."""
    names = list(SUITES) if names is None else list(names)
    streams = np.random.SeedSequence(seed).spawn(len(names))
    return [SUITES[name](rng=np.random.default_rng(ss)) for name, ss in zip(names, streams)]
