"""Compiled inner loops shared by the public solvers and the strategies.

Every kernel reports failure through an integer status instead of raising,
because numba cannot carry Python exception payloads. Python wrappers turn a
negative status into a :class:`~curvbandit.exceptions.ConvergenceError`.
"""

import math

import numpy as np
from numba import njit

FLOOR = 1e-300

OK = 0
INNER_CAP = -1
OUTER_CAP = -2
BAD_BRACKET = -3

INNER_MAXITER = 100
OUTER_MAXITER = 200
SUM_TOL = 1e-13


# ---------------------------------------------------------------------------
# hybrid regularizer on the simplex
# ---------------------------------------------------------------------------


@njit(cache=True)
def hybrid_coord(c, gamma, u_prev):
    """Solve ``log x - gamma / x = c`` for ``u = log x``.

    f(u) = u - gamma*exp(-u) is increasing and concave, so Newton started
    left of the root climbs monotonically onto it.
    """
    lo = c
    alt = math.log(gamma / (1.0 + abs(c)))
    if alt > 1.0:
        alt = 1.0
    if alt > lo:
        lo = alt
    if u_prev > lo and u_prev - gamma * math.exp(-u_prev) <= c:
        lo = u_prev
    u = lo
    # a few ulps of |c|: the residual cannot be resolved below that
    tol = 8e-16 * max(1.0, abs(c))
    for _ in range(INNER_MAXITER):
        e = gamma * math.exp(-u)
        f = u - e - c
        if abs(f) <= tol:
            return u, OK
        step = f / (1.0 + e)
        if abs(step) <= 4e-16 * max(1.0, abs(u)):
            return u, OK
        u -= step
    return u, INNER_CAP


@njit(cache=True)
def _simplex_mass(eta_cum, gamma, lam, x):
    """Fill ``x`` with the per-coordinate KKT solutions at multiplier ``lam``.

    Returns (sum x, d sum / d lam, status).
    """
    s = 0.0
    ds = 0.0
    for i in range(eta_cum.size):
        c = lam - 1.0 - eta_cum[i]
        up = math.log(x[i]) if x[i] > 0.0 else -np.inf
        u, st = hybrid_coord(c, gamma, up)
        if st != OK:
            return s, ds, st
        xi = math.exp(u)
        if xi < FLOOR:
            xi = FLOOR
        x[i] = xi
        s += xi
        ds += xi * xi / (xi + gamma)
    return s, ds, OK


@njit(cache=True)
def _fix_mass(x, s):
    """Put the leftover mass ``s - 1`` on the largest coordinate.

    Its KKT row is the least sensitive (curvature ``1/x + gamma/x^2`` is
    smallest there); rescaling everything would instead perturb the tiny,
    barrier-dominated coordinates by ``(s - 1) gamma / x``.
    """
    imax = 0
    for i in range(x.size):
        if x[i] > x[imax]:
            imax = i
    x[imax] -= s - 1.0


@njit(cache=True)
def hybrid_argmin(eta_cum, gamma, lam0, x):
    """Minimize ``eta_cum . x + Phi(x)`` over the simplex, writing into ``x``.

    ``x`` doubles as the inner warm start and ``lam0`` (may be NaN) seeds the
    multiplier search. Returns (lam, outer iterations, status).
    """
    n = eta_cum.size
    mn = eta_cum.min()
    mx = eta_cum.max()
    lo = mn + 1.0 + math.log(1.0 / n) - gamma * n
    hi = mx + 1.0 + gamma + 1.0
    lam = lam0
    if not (lam > lo and lam < hi):
        lam = 0.5 * (lo + hi)
    prev = np.inf
    for it in range(OUTER_MAXITER):
        s, ds, st = _simplex_mass(eta_cum, gamma, lam, x)
        if st != OK:
            return lam, it, st
        g = s - 1.0
        if abs(g) <= SUM_TOL:
            _fix_mass(x, s)
            return lam, it + 1, OK
        if g < 0.0:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 1e-15 * max(1.0, abs(lam)):
            _fix_mass(x, s)
            return lam, it + 1, OK
        # Newton on log(sum): one step crosses the exponential regime where
        # the sum is astronomically large
        nxt = lam - s * math.log(s) / ds
        if not (nxt > lo and nxt < hi) or abs(g) > 0.5 * prev:
            nxt = 0.5 * (lo + hi)
        prev = abs(g)
        lam = nxt
    return lam, OUTER_MAXITER, OUTER_CAP


@njit(cache=True)
def sample_index(x, u):
    """Inverse-CDF draw of an index from weights ``x`` with uniform ``u``."""
    total = 0.0
    for i in range(x.size):
        total += x[i]
    target = u * total
    acc = 0.0
    for i in range(x.size):
        acc += x[i]
        if target < acc:
            return i
    for i in range(x.size - 1, -1, -1):
        if x[i] > 0.0:
            return i
    return x.size - 1


# ---------------------------------------------------------------------------
# l_p barrier
# ---------------------------------------------------------------------------


@njit(cache=True)
def lp_gap(v, p):
    """Root ``d`` of ``sum (|v_i| d / p)^q + d - 1`` on (0, 1]."""
    q = p / (p - 1.0)
    a = 0.0
    for i in range(v.size):
        a += (abs(v[i]) / p) ** q
    if a == 0.0:
        return 1.0
    # psi(d) = a d^q + d - 1, increasing and convex; psi(0) = -1
    if a >= 1.0:
        hi = a ** (-1.0 / q)
    else:
        hi = 1.0
    lo = 0.5 * hi
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if a * mid ** q + mid - 1.0 > 0.0:
            hi = mid
        else:
            lo = mid
    # Newton from the right endpoint converges monotonically for convex psi
    d = hi
    for _ in range(5):
        psi = a * d ** q + d - 1.0
        dpsi = q * a * d ** (q - 1.0) + 1.0
        nd = d - psi / dpsi
        if not (nd > 0.0) or nd == d:
            break
        d = nd
    return d


@njit(cache=True)
def lp_grad_inverse(v, p, x):
    """Write ``grad Phi^*(v)`` into ``x``; returns the gap ``d(x)``."""
    d = lp_gap(v, p)
    r = 1.0 / (p - 1.0)
    for i in range(v.size):
        m = (abs(v[i]) * d / p) ** r
        if v[i] < 0.0:
            x[i] = -m
        else:
            x[i] = m
    return d


# ---------------------------------------------------------------------------
# round kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def sparse_act(cum, x, lam, eta, gamma, u):
    """FTRL iterate from ``cum`` (into ``x``), then draw an arm with ``u``.

    ``lam`` is a length-1 array holding the warm-start multiplier.
    Returns (arm, status).
    """
    l, _, st = hybrid_argmin(eta * cum, gamma, lam[0], x)
    if st != OK:
        return -1, st
    lam[0] = l
    return sample_index(x, u), OK


@njit(cache=True)
def sparse_episode(losses, eta, gamma, uniforms, record):
    T, n = losses.shape
    cum = np.zeros(n)
    x = np.full(n, 1.0 / n)
    lam = np.array([np.nan])
    arms = np.empty(T, np.int64)
    suffered = np.empty(T)
    iterates = np.empty((T + 1 if record else 0, n))
    for t in range(T):
        arm, st = sparse_act(cum, x, lam, eta, gamma, uniforms[t, 0])
        if st != OK:
            return arms, suffered, iterates, cum, t, st
        if record:
            iterates[t] = x
        value = losses[t, arm]
        arms[t] = arm
        suffered[t] = value
        cum[arm] += value / x[arm]
    if record:
        l, _, st = hybrid_argmin(eta * cum, gamma, lam[0], x)
        if st != OK:
            return arms, suffered, iterates, cum, T, st
        iterates[T] = x
    return arms, suffered, iterates, cum, T, OK


@njit(cache=True)
def explore_decision(counts, t, k, u0, u1):
    """Reservoir exploration draw at 1-based round ``t``.

    Returns the explored arm, or -1 for an ordinary round. While ``t <= k n``
    every round explores and arms cycle through random permutations, so each
    arm gets exactly one sample per block of ``n`` rounds.
    """
    n = counts.size
    kn = k * n
    if t <= kn:
        block = (t - 1) // n
        m = 0
        for i in range(n):
            if counts[i] == block:
                m += 1
        j = int(u1 * m)
        if j >= m:
            j = m - 1
        for i in range(n):
            if counts[i] == block:
                if j == 0:
                    return i
                j -= 1
        return -2
    if u0 < kn / t:
        arm = int(u1 * n)
        if arm >= n:
            arm = n - 1
        return arm
    return -1


@njit(cache=True)
def variation_act(cum, x, lam, counts, t, k, eta, gamma, u0, u1):
    """One decision of the reservoir-centred strategy at 1-based round ``t``.

    Returns (arm, explore flag, status).
    """
    arm = explore_decision(counts, t, k, u0, u1)
    if arm == -2:
        return -1, True, BAD_BRACKET
    if arm >= 0:
        return arm, True, OK
    l, _, st = hybrid_argmin(eta * cum, gamma, lam[0], x)
    if st != OK:
        return -1, False, st
    lam[0] = l
    return sample_index(x, u1), False, OK


@njit(cache=True)
def reservoir_insert(res, counts, arm, value, t, n, u2):
    k = res.shape[1]
    if t <= k * n and counts[arm] < k:
        res[arm, counts[arm]] = value
    else:
        slot = int(u2 * k)
        if slot >= k:
            slot = k - 1
        res[arm, slot] = value
    counts[arm] += 1


@njit(cache=True)
def reservoir_means(res, counts, mu):
    """Per-arm buffer means into ``mu``; returns False until every arm has data."""
    k = res.shape[1]
    ready = True
    for i in range(res.shape[0]):
        m = counts[i] if counts[i] < k else k
        if m == 0:
            ready = False
            mu[i] = 0.0
            continue
        s = 0.0
        for j in range(m):
            s += res[i, j]
        mu[i] = s / m
    return ready


@njit(cache=True)
def reservoir_episode(losses, k, uniforms):
    """Reservoir rounds alone over a full-information loss matrix.

    Returns the buffers, counts and a per-round exploration flag.
    """
    T, n = losses.shape
    res = np.zeros((n, k))
    counts = np.zeros(n, np.int64)
    explored = np.zeros(T, np.bool_)
    for t in range(T):
        arm = explore_decision(counts, t + 1, k, uniforms[t, 0], uniforms[t, 1])
        if arm >= 0:
            explored[t] = True
            reservoir_insert(res, counts, arm, losses[t, arm], t + 1, n, uniforms[t, 2])
    return res, counts, explored


@njit(cache=True)
def centered_update(cum, x, mu, arm, value):
    for i in range(cum.size):
        cum[i] += mu[i]
    cum[arm] += (value - mu[arm]) / x[arm]


@njit(cache=True)
def variation_episode(losses, k, eta, gamma, uniforms):
    T, n = losses.shape
    cum = np.zeros(n)
    x = np.full(n, 1.0 / n)
    lam = np.array([np.nan])
    res = np.zeros((n, k))
    counts = np.zeros(n, np.int64)
    mu = np.zeros(n)
    arms = np.empty(T, np.int64)
    explored = np.zeros(T, np.bool_)
    suffered = np.empty(T)
    for t in range(T):
        arm, explore, st = variation_act(
            cum, x, lam, counts, t + 1, k, eta, gamma, uniforms[t, 0], uniforms[t, 1]
        )
        if st != OK:
            return arms, explored, suffered, cum, t, st
        value = losses[t, arm]
        arms[t] = arm
        explored[t] = explore
        suffered[t] = value
        if explore:
            reservoir_insert(res, counts, arm, value, t + 1, n, uniforms[t, 2])
        else:
            reservoir_means(res, counts, mu)
            centered_update(cum, x, mu, arm, value)
    return arms, explored, suffered, cum, T, OK


@njit(cache=True)
def dot(a, b):
    """Left-to-right dot product, so every code path rounds the same way."""
    s = 0.0
    for i in range(a.size):
        s += a[i] * b[i]
    return s


@njit(cache=True)
def lp_draw(x, d, p, gamma, u0, u1, action):
    """Sample the played point for ball iterate ``x`` with gap ``d``.

    Returns (explore flag, signed atom index or -1, explore probability).
    Atom ``2*j`` is ``+e_j`` and ``2*j + 1`` is ``-e_j``.
    """
    n = x.size
    prob = d if d > gamma else gamma
    for i in range(n):
        action[i] = 0.0
    if u0 < prob:
        atom = int(u1 * 2 * n)
        if atom >= 2 * n:
            atom = 2 * n - 1
        j = atom // 2
        action[j] = 1.0 if atom % 2 == 0 else -1.0
        return True, atom, prob
    s = 0.0
    for i in range(n):
        s += abs(x[i]) ** p
    nrm = s ** (1.0 / p)
    for i in range(n):
        action[i] = x[i] / nrm
    return False, -1, prob


@njit(cache=True)
def lp_act(cum, eta, p, gamma, u0, u1, x, action):
    """Ball FTRL iterate into ``x`` and the played point into ``action``.

    Returns (explore flag, atom, gap d(x), explore probability).
    """
    d = lp_grad_inverse(-eta * cum, p, x)
    explore, atom, prob = lp_draw(x, d, p, gamma, u0, u1, action)
    return explore, atom, d, prob


@njit(cache=True)
def lp_denominator(x, d, p, gamma, literal):
    if literal:
        s = 0.0
        for i in range(x.size):
            s += abs(x[i]) ** p
        base = 1.0 - s ** (1.0 / p)
    else:
        base = d
    return base if base > gamma else gamma


@njit(cache=True)
def lp_episode(losses, eta, p, gamma, literal, uniforms, record):
    T, n = losses.shape
    cum = np.zeros(n)
    x = np.zeros(n)
    action = np.zeros(n)
    explored = np.zeros(T, np.bool_)
    suffered = np.empty(T)
    played = np.empty((T, n))
    iterates = np.empty((T + 1 if record else 0, n))
    gaps = np.empty(T)
    for t in range(T):
        explore, atom, d, prob = lp_act(cum, eta, p, gamma, uniforms[t, 0], uniforms[t, 1], x, action)
        if record:
            iterates[t] = x
        gaps[t] = d
        played[t] = action
        value = dot(losses[t], action)
        suffered[t] = value
        explored[t] = explore
        if explore:
            j = atom // 2
            sign = 1.0 if atom % 2 == 0 else -1.0
            cum[j] += n * value * sign / lp_denominator(x, d, p, gamma, literal)
    if record:
        lp_grad_inverse(-eta * cum, p, x)
        iterates[T] = x
    return explored, played, suffered, iterates, gaps, cum
