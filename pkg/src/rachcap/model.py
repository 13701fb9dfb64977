"""Closed-form access-capacity model.

Three failure mechanisms are composed per attempt: preamble collision
(contention bound), grant-queue overflow (impatient M/M/1 loss), and the
retransmission feedback loop (geometric retry chain solved as a fixed
point on the total attempt rate).

All rates are per subframe. d preambles are contended every delta_rao
subframes; the grant queue serves mu grants per subframe and a request
is lost if not served within its response window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig

# branch switch for the removable singularity of the queue-loss formula
_RHO_ONE_WINDOW = 1e-6


def collision_probability(lambda_t: float, cfg: SystemConfig) -> float:
    """Upper bound on the chance that an attempt's preamble is also
    picked by another device in the same access opportunity.

    Evaluates 1 - (1 - 1/d)^(n - 1) at the mean contender count
    n = lambda_t * delta_rao, clamped to [0, 1].  The raw expression is
    negative for n < 1; vanishing load cannot collide, so clamp to 0.
    """
    if lambda_t < 0:
        raise ValueError(f"lambda_t must be >= 0, got {lambda_t}")
    if cfg.d < 1:
        raise ValueError(f"d must be >= 1, got {cfg.d}")
    n = lambda_t * cfg.delta_rao
    if cfg.d == 1:
        # any second contender on the single preamble is fatal
        return 0.0 if n <= 1.0 else 1.0
    raw = -math.expm1((n - 1.0) * math.log1p(-1.0 / cfg.d))
    return min(max(raw, 0.0), 1.0)


def activated_preamble_rate(lambda_t: float, cfg: SystemConfig) -> float:
    """Mean rate of distinct activated preambles, per subframe.

    Contenders per opportunity are Poisson(lambda_t * delta_rao), so the
    expected distinct count is d * (1 - exp(-lambda_t*delta_rao/d));
    dividing by delta_rao gives the per-subframe rate offered to the
    grant queue.  Bounded above by both lambda_t and d/delta_rao.
    """
    if lambda_t < 0:
        raise ValueError(f"lambda_t must be >= 0, got {lambda_t}")
    per_rao = -cfg.d * math.expm1(-lambda_t * cfg.delta_rao / cfg.d)
    return per_rao / cfg.delta_rao


def grant_drop_probability(lambda_a: float, cfg: SystemConfig) -> float:
    """Long-run fraction of grant requests lost by the response queue.

    Single exponential server at rate mu with Poisson request rate
    lambda_a; a request abandons unless it would reach the server within
    the patience budget tau_q = mu*t_rar - 1/mu.  With rho = lambda_a/mu
    and W = exp(-mu*(1-rho)*tau_q) the loss is

        (1 - rho) * rho * W / (1 - rho^2 * W)

    which has a removable singularity at rho = 1 with limit
    1/(2 + mu*tau_q).  Near rho = 1 the difference form is evaluated via
    expm1 so the branches join continuously; above rho = 1 numerator and
    denominator are divided by rho^2*W to avoid overflow.
    """
    if lambda_a < 0:
        raise ValueError(f"lambda_a must be >= 0, got {lambda_a}")
    tau_q = cfg.tau_q
    if tau_q <= 0:
        raise ValueError(
            f"patience mu*t_rar - 1/mu must be positive, got {tau_q}"
        )
    if lambda_a == 0:
        return 0.0
    rho = lambda_a / cfg.mu
    a = cfg.mu * tau_q
    u = 1.0 - rho
    if u == 0.0:
        return 1.0 / (2.0 + a)
    if abs(u) < _RHO_ONE_WINDOW:
        # 1 - rho^2*W = -expm1(-a*u) + (2u - u^2)*exp(-a*u); both terms
        # are O(u), so the cancellation of the direct form is avoided
        w = math.exp(-a * u)
        num = u * rho * w
        den = -math.expm1(-a * u) + (2.0 * u - u * u) * w
        return min(max(num / den, 0.0), 1.0)
    if rho < 1.0:
        w = math.exp(-a * u)
        return min(max(u * rho * w / (1.0 - rho * rho * w), 0.0), 1.0)
    # overloaded: divide through by rho^2*W; exp(a*u) < 1 here, so every
    # factor stays bounded no matter how large rho grows
    scaled = (1.0 - 1.0 / rho) / (1.0 - math.exp(a * u) / (rho * rho))
    return min(max(scaled, 0.0), 1.0)


def one_shot_failure(lambda_t: float, cfg: SystemConfig) -> float:
    """Probability a single attempt fails, by collision or grant loss,
    treated as independent events."""
    p_c = collision_probability(lambda_t, cfg)
    p_e = grant_drop_probability(activated_preamble_rate(lambda_t, cfg), cfg)
    return 1.0 - (1.0 - p_c) * (1.0 - p_e)


def expected_transmissions(p_f: float, m: int) -> float:
    """Mean attempts per packet under up to m retransmissions:
    (1 - p_f^(m+1)) / (1 - p_f), continued as m+1 at p_f = 1."""
    if not 0.0 <= p_f <= 1.0:
        raise ValueError(f"p_f must be in [0, 1], got {p_f}")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    if p_f == 1.0:
        return float(m + 1)
    return (1.0 - p_f ** (m + 1)) / (1.0 - p_f)


def outage_probability(p_f: float, m: int) -> float:
    """Chance all m+1 attempts fail: p_f^(m+1)."""
    if not 0.0 <= p_f <= 1.0:
        raise ValueError(f"p_f must be in [0, 1], got {p_f}")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    return p_f ** (m + 1)


@dataclass(frozen=True)
class Load:
    """Rates for one operating point, all per subframe."""

    lambda_i: float  # fresh arrivals
    lambda_t: float  # total attempts including retransmissions
    lambda_a: float  # distinct activated preambles
    lambda_r: float = field(init=False)  # retransmissions only

    def __post_init__(self) -> None:
        if self.lambda_i < 0:
            raise ValueError(f"lambda_i must be >= 0, got {self.lambda_i}")
        if self.lambda_t < self.lambda_i:
            raise ValueError(
                f"lambda_t ({self.lambda_t}) below lambda_i ({self.lambda_i})"
            )
        if self.lambda_a < 0:
            raise ValueError(f"lambda_a must be >= 0, got {self.lambda_a}")
        object.__setattr__(self, "lambda_r", self.lambda_t - self.lambda_i)


@dataclass(frozen=True)
class ModelResult:
    """Converged (or capped) solution for one offered load."""

    load: Load
    rho: float       # grant-queue utilization lambda_a / mu
    p_c: float
    p_e: float
    p_f: float
    p_outage: float
    n_tx: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class ChainSolution:
    """Steady state of the retry chain.

    b[i, k] is the probability of sitting k subframes from the i-th
    retransmission attempt; row 0 is nonzero only at k = 0 because a
    fresh activation transmits without backoff.
    """

    b_off: float
    b_connect: float
    b_drop: float
    b: np.ndarray  # shape (m + 1, w_c)
    p_on: float

    def total_probability(self) -> float:
        return self.b_off + self.b_connect + self.b_drop + float(self.b.sum())

    def outage(self) -> float:
        """Fraction of completed packets that end in drop."""
        return self.b_drop / (self.b_drop + self.b_connect)

    def mean_transmissions(self) -> float:
        """Mean attempts per packet, read off the transmit states."""
        return float(self.b[:, 0].sum()) / float(self.b[0, 0])


def chain_steady_state(p_f: float, p_on: float, cfg: SystemConfig) -> ChainSolution:
    """Closed-form steady state of the backoff/retry chain.

    Normalization: with s = p_f*(1 - p_f^m)/(1 - p_f),

        1/b_off = 1 + 2*p_on + p_on*(w_c + 1)/2 * s

    where the three explicit terms are off, transmit+connect+drop mass,
    and the backoff triangle summed over attempts 1..m.
    """
    if not 0.0 <= p_f < 1.0:
        raise ValueError(f"p_f must be in [0, 1), got {p_f}")
    if not 0.0 < p_on <= 1.0:
        raise ValueError(f"p_on must be in (0, 1], got {p_on}")
    m, w_c = cfg.m, cfg.w_c
    geo = p_f * (1.0 - p_f**m) / (1.0 - p_f)  # sum p_f^i, i = 1..m
    b_off = 1.0 / (1.0 + 2.0 * p_on + p_on * (w_c + 1) / 2.0 * geo)
    b_connect = (1.0 - p_f ** (m + 1)) * p_on * b_off
    b_drop = p_f ** (m + 1) * p_on * b_off
    b = np.zeros((m + 1, w_c))
    b[0, 0] = p_on * b_off
    if m >= 1:
        ramp = (w_c - np.arange(w_c)) / w_c           # (w_c - k)/w_c
        powers = p_f ** np.arange(1, m + 1)
        b[1:, :] = np.outer(powers, ramp) * (p_on * b_off)
    return ChainSolution(b_off=b_off, b_connect=b_connect, b_drop=b_drop,
                         b=b, p_on=p_on)


def activation_probability(lambda_i: float) -> float:
    """Per-subframe chance at least one fresh packet arrives."""
    if lambda_i < 0:
        raise ValueError(f"lambda_i must be >= 0, got {lambda_i}")
    return -math.expm1(-lambda_i)


def _solve_pipeline(
    lambda_i: float,
    cfg: SystemConfig,
    rel_tol: float,
    max_iterations: int,
    grant_queue: bool,
) -> ModelResult:
    lambda_i = float(lambda_i)
    if lambda_i < 0:
        raise ValueError(f"lambda_i must be >= 0, got {lambda_i}")
    if rel_tol <= 0 or max_iterations < 1:
        raise ValueError("rel_tol must be > 0 and max_iterations >= 1")

    def failure(lam: float) -> float:
        p_c = collision_probability(lam, cfg)
        if not grant_queue:
            return p_c
        p_e = grant_drop_probability(activated_preamble_rate(lam, cfg), cfg)
        return 1.0 - (1.0 - p_c) * (1.0 - p_e)

    lam = lambda_i
    iterations = 0
    converged = False
    damped = False
    prev_sign = 0
    for _ in range(max_iterations):
        target = lambda_i * expected_transmissions(failure(lam), cfg.m)
        residual = target - lam
        sign = 1 if residual > 0 else (-1 if residual < 0 else 0)
        if sign and prev_sign and sign != prev_sign:
            damped = True  # oscillating around the root: halve the step
        if sign:
            prev_sign = sign
        new_lam = 0.5 * (lam + target) if damped else target
        iterations += 1
        change = abs(new_lam - lam)
        lam = new_lam
        if change <= rel_tol * max(abs(lam), 1e-300):
            converged = True
            break

    p_c = collision_probability(lam, cfg)
    lambda_a = activated_preamble_rate(lam, cfg)
    p_e = grant_drop_probability(lambda_a, cfg) if grant_queue else 0.0
    p_f = 1.0 - (1.0 - p_c) * (1.0 - p_e)
    load = Load(lambda_i=lambda_i, lambda_t=max(lam, lambda_i), lambda_a=lambda_a)
    return ModelResult(
        load=load,
        rho=lambda_a / cfg.mu,
        p_c=p_c,
        p_e=p_e,
        p_f=p_f,
        p_outage=outage_probability(p_f, cfg.m),
        n_tx=expected_transmissions(p_f, cfg.m),
        iterations=iterations,
        converged=converged,
    )


def solve_total_rate(
    lambda_i: float,
    cfg: SystemConfig,
    *,
    rel_tol: float = 0.01,
    max_iterations: int = 100,
) -> ModelResult:
    """Solve lambda_t = lambda_i * n_tx(p_f(lambda_t)) by damped Picard
    iteration from lambda_t = lambda_i.

    Stops when the relative change of the iterate falls below rel_tol
    (default 1%, tighten for high-accuracy use).  On hitting the
    iteration cap the last iterate is returned with converged=False;
    beyond saturation the reported point is diagnostic only.
    """
    return _solve_pipeline(lambda_i, cfg, rel_tol, max_iterations, True)


def baseline_collision_only(
    lambda_i: float,
    cfg: SystemConfig,
    *,
    rel_tol: float = 0.01,
    max_iterations: int = 100,
) -> ModelResult:
    """Same pipeline with the grant queue removed (p_e forced to 0).

    Stand-in comparison curve: collision is the only failure mechanism,
    so the response-phase bend is absent.
    """
    return _solve_pipeline(lambda_i, cfg, rel_tol, max_iterations, False)
