"""Compiled inner loops shared by the sampler, the posterior and the harness.

All kernels take a ``numpy.random.Generator`` so a single generator drives both
the pure-Python API and the compiled run loop.  Arm indices are 0-based.
"""
import math

import numpy as np
from numba import njit

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT1_2 = 1.0 / math.sqrt(2.0)

ALGO_TS = 0
ALGO_UNIFORM = 1


@njit(cache=True)
def log_ndtr(z):
    """log Phi(z), accurate far into both tails."""
    if z > 6.0:
        return math.log1p(-0.5 * math.erfc(z * _SQRT1_2))
    if z > -20.0:
        return math.log(0.5 * math.erfc(-z * _SQRT1_2))
    # asymptotic series of the Mills ratio
    z2 = z * z
    series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)
    return -0.5 * z2 - math.log(-z) - _LOG_SQRT_2PI + math.log(series)


@njit(cache=True)
def log1mexp(x):
    """log(1 - exp(x)) for x <= 0."""
    if x > -0.6931471805599453:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


@njit(cache=True)
def truncated_std_normal(a, rng):
    """Draw Z ~ N(0, 1) conditioned on Z > a (exact)."""
    if a < 0.3:
        while True:
            z = rng.standard_normal()
            if z > a:
                return z
    # exponential proposal with the optimal rate
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        z = a + rng.exponential() / lam
        d = z - lam
        if rng.random() <= math.exp(-0.5 * d * d):
            return z


@njit(cache=True)
def best_feasible(theta, gamma):
    """Index of the feasible row with the largest column 0, or -1."""
    k, width = theta.shape
    best = -1
    top = -np.inf
    for i in range(k):
        ok = True
        for j in range(1, width):
            if theta[i, j] > gamma[j - 1]:
                ok = False
                break
        if ok and (best < 0 or theta[i, 0] > top):
            best = i
            top = theta[i, 0]
    return best


@njit(cache=True)
def draw_into(mean, sd, rng, out):
    k, width = mean.shape
    for i in range(k):
        for j in range(width):
            out[i, j] = mean[i, j] + sd[i, j] * rng.standard_normal()


@njit(cache=True)
def draw_leader(mean, sd, gamma, rng, theta):
    draw_into(mean, sd, rng, theta)
    b = best_feasible(theta, gamma)
    if b < 0:
        b = rng.integers(0, mean.shape[0])
    return b


@njit(cache=True)
def other_arm(lead, k, rng):
    """Uniform arm among the k - 1 arms other than ``lead``."""
    b = rng.integers(0, k - 1)
    if b >= lead:
        b += 1
    return b


@njit(cache=True)
def _events_hit(theta, gamma, lead):
    """Number of elementary events of {best feasible != lead} that theta lies in."""
    k, width = theta.shape
    hits = 0
    for j in range(1, width):
        if theta[lead, j] > gamma[j - 1]:
            hits += 1
    for i in range(k):
        if i == lead or theta[i, 0] <= theta[lead, 0]:
            continue
        ok = True
        for j in range(1, width):
            if theta[i, j] > gamma[j - 1]:
                ok = False
                break
        if ok:
            hits += 1
    return hits


@njit(cache=True)
def exact_challenger(mean, sd, gamma, lead, rng, theta):
    """Sample the first accepted challenger of the unbounded redraw loop.

    The loop accepts a draw whose best feasible arm differs from ``lead`` or
    whose feasible set is empty (then a uniform arm other than ``lead`` is
    played).  That event is the union of "lead violates constraint j" and
    "arm i is feasible and beats lead".  Each piece has a closed-form probability, so the posterior
    restricted to the union is sampled exactly by picking a piece in
    proportion to its probability, sampling inside it, and accepting with
    probability one over the number of pieces the draw falls in.
    """
    k, width = mean.shape
    m = width - 1
    n_ev = m + k
    logp = np.full(n_ev, -np.inf)
    for j in range(m):
        logp[j] = log_ndtr((mean[lead, j + 1] - gamma[j]) / sd[lead, j + 1])
    for i in range(k):
        if i == lead:
            continue
        lp = 0.0
        for j in range(m):
            lp += log_ndtr((gamma[j] - mean[i, j + 1]) / sd[i, j + 1])
        v = sd[i, 0] ** 2 + sd[lead, 0] ** 2
        lp += log_ndtr((mean[i, 0] - mean[lead, 0]) / math.sqrt(v))
        logp[m + i] = lp
    top = logp.max()
    if top == -np.inf:
        raise ValueError("the leader is best feasible with posterior probability one")
    w = np.exp(logp - top)
    cdf = np.cumsum(w)
    total = cdf[-1]
    while True:
        u = rng.random() * total
        e = 0
        while e < n_ev - 1 and cdf[e] <= u:
            e += 1
        draw_into(mean, sd, rng, theta)
        if e < m:
            j = e + 1
            a = (gamma[e] - mean[lead, j]) / sd[lead, j]
            theta[lead, j] = mean[lead, j] + sd[lead, j] * truncated_std_normal(a, rng)
        else:
            i = e - m
            for j in range(1, width):
                a = (mean[i, j] - gamma[j - 1]) / sd[i, j]
                theta[i, j] = mean[i, j] - sd[i, j] * truncated_std_normal(a, rng)
            vi = sd[i, 0] ** 2
            vl = sd[lead, 0] ** 2
            v = vi + vl
            dbar = mean[i, 0] - mean[lead, 0]
            diff = dbar + math.sqrt(v) * truncated_std_normal(-dbar / math.sqrt(v), rng)
            xi = mean[i, 0] + (vi / v) * (diff - dbar) + math.sqrt(vi * vl / v) * rng.standard_normal()
            theta[i, 0] = xi
            theta[lead, 0] = xi - diff
        hits = _events_hit(theta, gamma, lead)
        if hits == 0 or rng.random() * hits >= 1.0:
            continue
        b = best_feasible(theta, gamma)
        if b < 0:
            return other_arm(lead, k, rng)
        return b


@njit(cache=True)
def draw_challenger(mean, sd, gamma, lead, cap, rng, theta):
    """Redraw up to ``cap`` times, then sample the accepted outcome exactly.

    Returns ``(arm, attempts, exact)``; the law of ``arm`` is that of the
    unbounded redraw loop whatever the cap.
    """
    k = mean.shape[0]
    for attempt in range(1, cap + 1):
        draw_into(mean, sd, rng, theta)
        b = best_feasible(theta, gamma)
        if b < 0:
            return other_arm(lead, k, rng), attempt, False
        if b != lead:
            return b, attempt, False
    return exact_challenger(mean, sd, gamma, lead, rng, theta), cap, True


@njit(cache=True)
def select_round(mean, sd, gamma, beta, cap, rng, theta):
    """One top-two round: ``(played, leader, challenger, coin, attempts, exact)``."""
    lead = draw_leader(mean, sd, gamma, rng, theta)
    coin = rng.random() < beta
    if coin:
        return lead, lead, -1, True, 0, False
    ch, attempts, exact = draw_challenger(mean, sd, gamma, lead, cap, rng, theta)
    return ch, lead, ch, False, attempts, exact


@njit(cache=True)
def play_counts(mean, sd, gamma, beta, cap, n_calls, rng):
    """Histogram of played arms over repeated rounds at a frozen posterior."""
    k, width = mean.shape
    theta = np.empty((k, width))
    hist = np.zeros(k, dtype=np.int64)
    leader_share = 0
    for _ in range(n_calls):
        played, lead, ch, coin, attempts, exact = select_round(mean, sd, gamma, beta, cap, rng, theta)
        hist[played] += 1
        if played == lead:
            leader_share += 1
    return hist, leader_share


@njit(cache=True)
def recommend_kernel(mean, var, gamma):
    """Posterior-mean plug-in best feasible arm with the lenient fallback."""
    k, width = mean.shape
    best = -1
    top = -np.inf
    for i in range(k):
        ok = True
        for j in range(1, width):
            if mean[i, j] > gamma[j - 1]:
                ok = False
                break
        if ok and (best < 0 or mean[i, 0] > top):
            best = i
            top = mean[i, 0]
    if best >= 0:
        return best
    least = np.inf
    for i in range(k):
        worst = -np.inf
        for j in range(1, width):
            z = (mean[i, j] - gamma[j - 1]) / math.sqrt(var[i, j])
            if z > worst:
                worst = z
        if worst < least:
            least = worst
            best = i
    return best


@njit(cache=True)
def _pull(i, mu, sd_true, rng, count, sums, mean, sd, sigma2):
    width = mu.shape[1]
    count[i] += 1
    n = count[i]
    for j in range(width):
        x = mu[i, j] + sd_true[i, j] * rng.standard_normal()
        sums[i, j] += x
        mean[i, j] += (x - mean[i, j]) / n
        sd[i, j] = math.sqrt(sigma2[i, j] / n)


@njit(cache=True)
def run_path(mu, sigma2, gamma, algo, beta, n0, budget, cap, checkpoints, rng, record):
    """Warm-up plus sequential sampling up to ``budget`` total pulls.

    ``checkpoints`` holds increasing pull totals at which the recommendation
    and counts are recorded.  With ``record`` the posterior means and counts
    after every pull are kept as well (row t is the state after t+1 pulls).
    """
    k, width = mu.shape
    sd_true = np.sqrt(sigma2)
    count = np.zeros(k, dtype=np.int64)
    sums = np.zeros((k, width))
    mean = np.zeros((k, width))
    sd = np.zeros((k, width))
    theta = np.empty((k, width))
    n_ck = checkpoints.shape[0]
    ck_rec = np.full(n_ck, -1, dtype=np.int64)
    ck_counts = np.zeros((n_ck, k), dtype=np.int64)
    hist_rows = budget if record else 0
    hist_mean = np.full((hist_rows, k, width), np.nan)
    hist_count = np.zeros((hist_rows, k), dtype=np.int64)
    exact_used = 0
    ci = 0
    t = 0
    offset = 0
    for i in range(k):
        for _ in range(n0):
            _pull(i, mu, sd_true, rng, count, sums, mean, sd, sigma2)
            if record:
                for a in range(k):
                    hist_count[t, a] = count[a]
                    if count[a] > 0:
                        for j in range(width):
                            hist_mean[t, a, j] = mean[a, j]
            t += 1
            while ci < n_ck and checkpoints[ci] == t:
                ck_rec[ci] = recommend_kernel(mean, sd * sd, gamma) if count.min() > 0 else -1
                ck_counts[ci, :] = count
                ci += 1
    if algo == ALGO_UNIFORM:
        offset = rng.integers(0, k)
    while t < budget:
        if algo == ALGO_UNIFORM:
            arm = (offset + t) % k
        else:
            arm, lead, ch, coin, attempts, exact = select_round(mean, sd, gamma, beta, cap, rng, theta)
            if exact:
                exact_used += 1
        _pull(arm, mu, sd_true, rng, count, sums, mean, sd, sigma2)
        if record:
            for a in range(k):
                hist_count[t, a] = count[a]
                for j in range(width):
                    hist_mean[t, a, j] = mean[a, j]
        t += 1
        while ci < n_ck and checkpoints[ci] == t:
            ck_rec[ci] = recommend_kernel(mean, sd * sd, gamma)
            ck_counts[ci, :] = count
            ci += 1
    return count, sums, mean, ck_rec, ck_counts, hist_mean, hist_count, exact_used
