"""Brute-force reference implementations.

Everything here is derived independently of the closed forms: the retry
chain is solved as an explicit stationary linear system, the grant queue
is simulated customer by customer, preamble contention is sampled
directly, and the load fixed point is found by bracketing bisection.

Only data containers (ChainSolution, SystemConfig) are imported from the
main modules; no formula code is shared.  The small rate/probability
helpers at the bottom are deliberately re-written from scratch in their
naive algebraic form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .model import ChainSolution

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# ---------------------------------------------------------------------------
# retry chain as an explicit stationary linear system

def chain_linear_solve(p_f: float, p_on: float, m: int, w_c: int) -> ChainSolution:
    """Stationary distribution of the retry chain from its transition
    matrix, with no closed-form shortcuts.

    States: off, connect, drop, then (i, k) for attempt i in 0..m and
    backoff counter k in 0..w_c-1.  Transitions:
      off -> (0,0) with p_on, else stays off
      (i,0) -> connect with 1-p_f
      (i,0) -> (i+1,k) with p_f/w_c for each k, when i < m
      (m,0) -> drop with p_f
      (i,k) -> (i,k-1) with 1, for k >= 1
      connect -> off, drop -> off with 1
    The rows for (0, k>=1) are unreachable and must come back exactly 0.
    """
    if not 0.0 <= p_f < 1.0:
        raise ValueError(f"p_f must be in [0, 1), got {p_f}")
    if not 0.0 < p_on <= 1.0:
        raise ValueError(f"p_on must be in (0, 1], got {p_on}")
    if m < 0 or w_c < 1:
        raise ValueError("need m >= 0 and w_c >= 1")

    off, connect, drop = 0, 1, 2

    def tx(i: int, k: int) -> int:
        return 3 + i * w_c + k

    n = 3 + (m + 1) * w_c
    P = np.zeros((n, n))
    P[off, tx(0, 0)] = p_on
    P[off, off] = 1.0 - p_on
    P[connect, off] = 1.0
    P[drop, off] = 1.0
    for i in range(m + 1):
        P[tx(i, 0), connect] = 1.0 - p_f
        if i < m:
            for k in range(w_c):
                P[tx(i, 0), tx(i + 1, k)] = p_f / w_c
        else:
            P[tx(i, 0), drop] = p_f
        for k in range(1, w_c):
            P[tx(i, k), tx(i, k - 1)] = 1.0

    # pi (P - I) = 0 with sum(pi) = 1: replace one balance equation by
    # the normalization row
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"stationary system is singular: {exc}") from exc
    return ChainSolution(
        b_off=float(pi[off]),
        b_connect=float(pi[connect]),
        b_drop=float(pi[drop]),
        b=pi[3:].reshape(m + 1, w_c).copy(),
        p_on=p_on,
    )


# ---------------------------------------------------------------------------
# impatient grant queue, customer by customer

@dataclass(frozen=True)
class QueueLossEstimate:
    loss_fraction: float
    std_error: float
    customers: int
    losses: int


@njit(cache=True)
def _lindley_losses(lam, mu, tau, n, warmup, deterministic, seed, batch_edges,
                    batch_losses, batch_counts):
    """Workload recursion: a customer arriving to virtual waiting time v
    is lost if v exceeds the patience tau, otherwise it adds its service
    time.  Returns per-batch loss and customer counts for batch-means
    error estimation."""
    np.random.seed(seed)
    v = 0.0
    batch = 0
    for i in range(n):
        v -= np.random.exponential(1.0 / lam)
        if v < 0.0:
            v = 0.0
        lost = v > tau
        if not lost:
            if deterministic:
                v += 1.0 / mu
            else:
                v += np.random.exponential(1.0 / mu)
        if i >= warmup:
            while batch + 1 < batch_edges.shape[0] and i >= batch_edges[batch + 1]:
                batch += 1
            batch_counts[batch] += 1
            if lost:
                batch_losses[batch] += 1
    return v


def impatient_queue_sim(
    lambda_a: float,
    mu: float,
    t_rar: float,
    service: str = "exponential",
    horizon: int = 1_000_000,
    seed: int = 0,
) -> QueueLossEstimate:
    """Simulate the single-server grant queue with abandonment and
    return the long-run lost fraction.

    Customers arrive Poisson at rate lambda_a; service is exponential or
    deterministic at rate mu; patience is the waiting budget
    tau = mu*t_rar - 1/mu.  horizon counts customers; the first 10% are
    warmup.  The standard error comes from 32 batch means, which
    absorbs the autocorrelation of the loss process.
    """
    if lambda_a < 0:
        raise ValueError(f"lambda_a must be >= 0, got {lambda_a}")
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if service not in ("exponential", "deterministic"):
        raise ValueError(f"unknown service discipline {service!r}")
    if horizon < 100:
        raise ValueError("horizon too small for a meaningful estimate")
    tau = mu * t_rar - 1.0 / mu
    if tau <= 0:
        raise ValueError(f"patience mu*t_rar - 1/mu must be positive, got {tau}")
    if lambda_a == 0:
        return QueueLossEstimate(0.0, 0.0, 0, 0)

    warmup = horizon // 10
    counted = horizon - warmup
    n_batches = 32
    # batch b covers customers [edges[b], edges[b+1]) after warmup
    edges = warmup + (np.arange(n_batches, dtype=np.int64) * counted) // n_batches
    losses = np.zeros(n_batches, dtype=np.int64)
    counts = np.zeros(n_batches, dtype=np.int64)
    _lindley_losses(
        float(lambda_a), float(mu), float(tau), int(horizon), int(warmup),
        service == "deterministic", int(seed) % (2**32), edges, losses, counts,
    )
    total_losses = int(losses.sum())
    total = int(counts.sum())
    fractions = losses / np.maximum(counts, 1)
    se = float(fractions.std(ddof=1) / math.sqrt(n_batches))
    return QueueLossEstimate(
        loss_fraction=total_losses / total,
        std_error=se,
        customers=total,
        losses=total_losses,
    )


# ---------------------------------------------------------------------------
# preamble contention sampling

@dataclass(frozen=True)
class PreambleMcResult:
    collision_prob: float    # mean within-opportunity collided fraction
    collision_se: float
    mean_activated: float    # mean count of distinct chosen preambles
    activated_se: float
    n_trials: int


def preamble_monte_carlo(
    lambda_per_rao: float,
    d: int,
    n_trials: int = 100_000,
    seed: int = 0,
) -> PreambleMcResult:
    """Sample contention rounds directly: draw N ~ Poisson(lambda_per_rao)
    devices, assign uniform preambles, and tally the collided fraction
    and the distinct-preamble count per round.

    The collision estimate is the mean over rounds of the within-round
    collided fraction (empty rounds contribute 0), i.e. the expected
    fraction of a round's transmissions that are lost to collision.
    """
    if lambda_per_rao < 0:
        raise ValueError(f"lambda_per_rao must be >= 0, got {lambda_per_rao}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if n_trials < 10_000:
        raise ValueError(f"n_trials must be >= 10000, got {n_trials}")

    rng = np.random.default_rng(seed)
    counts = rng.poisson(lambda_per_rao, n_trials)
    total = int(counts.sum())
    trial_of = np.repeat(np.arange(n_trials, dtype=np.int64), counts)
    preamble = rng.integers(0, d, size=total, dtype=np.int64)
    key = trial_of * d + preamble
    uniq, inverse, occupancy = np.unique(key, return_inverse=True,
                                         return_counts=True)
    collided = occupancy[inverse] > 1
    collided_per_trial = np.bincount(trial_of, weights=collided,
                                     minlength=n_trials)
    frac = np.divide(collided_per_trial, counts,
                     out=np.zeros(n_trials), where=counts > 0)
    activated_per_trial = np.bincount(uniq // d, minlength=n_trials)
    return PreambleMcResult(
        collision_prob=float(frac.mean()),
        collision_se=float(frac.std(ddof=1) / math.sqrt(n_trials)),
        mean_activated=float(activated_per_trial.mean()),
        activated_se=float(activated_per_trial.std(ddof=1) / math.sqrt(n_trials)),
        n_trials=n_trials,
    )


# ---------------------------------------------------------------------------
# fixed point by bracketing bisection
#
# The helpers below intentionally restate the one-shot failure math in
# its plain algebraic form rather than calling the main module.

def _naive_collision(lam: float, d: int, delta_rao: int) -> float:
    n = lam * delta_rao
    if d == 1:
        return 0.0 if n <= 1.0 else 1.0
    p = 1.0 - (1.0 - 1.0 / d) ** (n - 1.0)
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def _naive_grant_drop(lam: float, cfg: SystemConfig) -> float:
    per_rao = cfg.d * (1.0 - math.exp(-lam * cfg.delta_rao / cfg.d))
    lambda_a = per_rao / cfg.delta_rao
    rho = lambda_a / cfg.mu
    if rho == 0.0:
        return 0.0
    tau = cfg.mu * cfg.t_rar - 1.0 / cfg.mu
    x = cfg.mu * (1.0 - rho) * tau
    if abs(1.0 - rho) < 1e-9:
        return 1.0 / (2.0 + cfg.mu * tau)
    if x < -600.0:
        # omega overflows; the loss tends to its heavy-traffic asymptote
        return 1.0 - 1.0 / rho
    omega = math.exp(-x)
    return (1.0 - rho) * rho * omega / (1.0 - rho * rho * omega)


def _naive_failure(lam: float, cfg: SystemConfig) -> float:
    p_c = _naive_collision(lam, cfg.d, cfg.delta_rao)
    p_e = _naive_grant_drop(lam, cfg)
    return 1.0 - (1.0 - p_c) * (1.0 - p_e)


def _naive_mean_tx(p_f: float, m: int) -> float:
    if p_f >= 1.0:
        return float(m + 1)
    total = 0.0
    for i in range(m + 1):
        total += p_f**i
    return total


def fixed_point_bisection(
    lambda_i: float,
    cfg: SystemConfig,
    *,
    rel_tol: float = 1e-9,
) -> float:
    """Root of g(lam) = lam - lambda_i * n_tx(p_f(lam)) on the interval
    [lambda_i, (m+1)*lambda_i], located by marching up from lambda_i to
    bracket the first sign change and bisecting to rel_tol.

    Marching guarantees the smallest root is found even when the curve
    crosses zero several times (light and congested operating points
    coexist near saturation).
    """
    if lambda_i < 0:
        raise ValueError(f"lambda_i must be >= 0, got {lambda_i}")
    if lambda_i == 0:
        return 0.0
    if cfg.m == 0:
        return lambda_i  # n_tx is identically 1

    def g(lam: float) -> float:
        return lam - lambda_i * _naive_mean_tx(_naive_failure(lam, cfg), cfg.m)

    hi_cap = (cfg.m + 1) * lambda_i
    lo = lambda_i
    g_lo = g(lo)
    if g_lo == 0.0:
        return lo
    if g_lo > 0.0:
        raise RuntimeError("g(lambda_i) > 0: no bracket below lambda_i")
    hi = lo
    while True:
        hi = min(hi * 1.05, hi_cap)
        g_hi = g(hi)
        if g_hi >= 0.0:
            break
        lo = hi
        if hi >= hi_cap:
            raise RuntimeError(
                "no sign change on [lambda_i, (m+1)*lambda_i]: "
                "load is super-critical"
            )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return 0.5 * (lo + hi)
