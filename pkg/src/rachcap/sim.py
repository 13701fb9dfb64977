"""Subframe-resolution simulator of the four-message access procedure.

One loop iteration is one subframe (1 ms).  Within a subframe the order
is fixed: grant-queue service, then scheduled per-device events
(connection or failure), then backoff completions, then fresh arrivals,
then (on opportunity subframes) preamble transmission.  The ordering
matters: a zero backoff drawn while handling a failure must be able to
retransmit in the same subframe's opportunity.

The eNodeB sees only which preambles were activated.  Every activated
preamble yields one grant; devices sharing a preamble share the grant
and collide again at the connection-request step, where the collision
is detected and resolved by timeout.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .config import SystemConfig

# device lifecycle states
BACKOFF = "backoff"
AWAITING_RAO = "awaiting_rao"
MSG1_SENT = "msg1_sent"
AWAITING_RAR = "awaiting_rar"
MSG3_SENT = "msg3_sent"
AWAITING_MSG4 = "awaiting_msg4"
CONNECTED = "connected"
DROPPED = "dropped"

# failure attribution buckets
FAIL_RAR_EXPIRED = "rar_expired"
FAIL_MSG3_COLLISION = "msg1_collision_msg3"
FAIL_CRT_EXPIRED = "crt_expired"


@dataclass(frozen=True)
class SimConfig:
    """One simulation run: system parameters plus horizon and seeding.

    duration and warmup are in subframes; statistics cover
    [warmup, duration).  warmup defaults to duration // 10.
    """

    system: SystemConfig
    duration: int
    seed: "int | tuple[int, ...] | np.random.SeedSequence" = 0
    warmup: int | None = None

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise ValueError(f"duration must be >= 1, got {self.duration}")
        if self.warmup is None:
            object.__setattr__(self, "warmup", self.duration // 10)
        if not 0 <= self.warmup < self.duration:
            raise ValueError(
                f"need duration > warmup >= 0, got duration={self.duration} "
                f"warmup={self.warmup}"
            )


class UeAttempt:
    """A packet working its way through the procedure."""

    __slots__ = (
        "id", "attempt_index", "state", "backoff_remaining", "rar_deadline",
        "crt_deadline", "chosen_preamble", "arrival_subframe",
        "msg1_subframe", "epoch", "in_cohort",
    )

    def __init__(self, uid: int, arrival_subframe: int, in_cohort: bool):
        self.id = uid
        self.attempt_index = 0
        self.state = AWAITING_RAO
        self.backoff_remaining = 0
        self.rar_deadline = -1
        self.crt_deadline = -1
        self.chosen_preamble = -1
        self.arrival_subframe = arrival_subframe
        self.msg1_subframe = -1
        # bumped on every transmission and every failure so stale
        # scheduled events from an earlier attempt cannot fire
        self.epoch = 0
        self.in_cohort = in_cohort


class Grant:
    __slots__ = ("rao", "enq", "preamble", "members")

    def __init__(self, rao: int, enq: int, preamble: int, members: list):
        self.rao = rao
        self.enq = enq
        self.preamble = preamble
        self.members = members


class RarQueue:
    """FIFO of pending grants, served at most mu per subframe.

    A grant is servable from its enqueue subframe for t_rar subframes;
    at age t_rar it is discarded at dequeue without consuming service
    (the owning devices' response windows expire in the same subframe).
    Grants enqueue in opportunity order, so expired entries are always
    contiguous at the head.
    """

    def __init__(self, t_rar: int):
        self.t_rar = t_rar
        self._q: deque[Grant] = deque()

    def push(self, grant: Grant) -> None:
        self._q.append(grant)

    def service(self, t: int, mu: int) -> list[Grant]:
        """Purge expired heads and dequeue up to mu servable grants."""
        served: list[Grant] = []
        q = self._q
        while q and len(served) < mu:
            head = q[0]
            if head.enq > t:
                break  # entered the queue in a future subframe
            if t >= head.enq + self.t_rar:
                q.popleft()  # expired; owners fail via their timers
                continue
            served.append(q.popleft())
        return served

    def __len__(self) -> int:
        return len(self._q)


@dataclass(frozen=True)
class SimStats:
    """Outcome of one run.

    Packet counts (arrivals, connects, drops, in_flight, mean_tx,
    outage_fraction) cover the cohort of packets arriving in
    [warmup, duration); a packet still unresolved at the end is
    in_flight.  Rate and attempt-level quantities count events in the
    same window regardless of the packet's arrival time.
    """

    arrivals: int
    connects: int
    drops: int
    in_flight: int
    outage_fraction: float
    outage_defined: bool
    mean_tx: float
    failures: dict
    attempts: int
    activated_preambles: int
    lambda_t_observed: float
    lambda_a_observed: float
    attempt_collision_fraction: float
    attempt_grant_drop_fraction: float
    max_msg2_per_subframe: int
    max_activated_per_rao: int
    duration: int
    warmup: int


def run(cfg: SimConfig, lambda_i: float) -> SimStats:
    """Simulate `duration` subframes at fresh-arrival rate lambda_i
    (packets per subframe).  Deterministic for a fixed (cfg, lambda_i)."""
    if lambda_i < 0:
        raise ValueError(f"lambda_i must be >= 0, got {lambda_i}")
    sys_cfg = cfg.system
    d = sys_cfg.d
    mu = sys_cfg.mu
    m = sys_cfg.m
    w_c = sys_cfg.w_c
    delta_rao = sys_cfg.delta_rao
    t_enb = sys_cfg.t_enb_proc
    t_ue = sys_cfg.t_ue_proc
    t_rar = sys_cfg.t_rar
    t_crt = sys_cfg.t_crt
    duration = cfg.duration
    warmup = cfg.warmup

    rng = np.random.default_rng(cfg.seed)
    arrival_counts = rng.poisson(lambda_i, duration)

    queue = RarQueue(t_rar)
    waiting: list[UeAttempt] = []
    fail_events: dict[int, list] = {}
    success_events: dict[int, list] = {}
    eligible: dict[int, list] = {}

    next_id = 0
    arrivals = connects = drops = 0
    tx_sum = 0
    attempts = activated = 0
    failures = {FAIL_RAR_EXPIRED: 0, FAIL_MSG3_COLLISION: 0,
                FAIL_CRT_EXPIRED: 0}
    max_msg2 = 0
    max_activated = 0

    def connect(ue: UeAttempt) -> None:
        nonlocal connects, tx_sum
        ue.state = CONNECTED
        if ue.in_cohort:
            connects += 1
            tx_sum += ue.attempt_index + 1

    def fail(ue: UeAttempt, bucket: str, t: int) -> None:
        nonlocal drops, tx_sum
        if t >= warmup:
            failures[bucket] += 1
        ue.epoch += 1
        if ue.attempt_index >= m:
            ue.state = DROPPED
            if ue.in_cohort:
                drops += 1
                tx_sum += ue.attempt_index + 1
            return
        ue.attempt_index += 1
        back = int(rng.integers(0, w_c + 1))  # integer ms in [0, w_c]
        ue.backoff_remaining = back
        ue.state = BACKOFF
        eligible.setdefault(t + back, []).append(ue)

    for t in range(duration):
        # 1: grant service and head purge
        served = queue.service(t, mu)
        if served:
            if len(served) > max_msg2:
                max_msg2 = len(served)
            for grant in served:
                if len(grant.members) == 1:
                    ue = grant.members[0]
                    ue.epoch += 1  # retires the response-window timer
                    ue.state = AWAITING_MSG4
                    msg4_at = t + t_ue + t_enb
                    if msg4_at <= ue.crt_deadline:
                        success_events.setdefault(msg4_at, []).append(
                            (ue, ue.epoch))
                    else:
                        fail_events.setdefault(ue.crt_deadline, []).append(
                            (ue, ue.epoch, FAIL_CRT_EXPIRED))
                else:
                    # shared grant: the connection requests collide and
                    # the owners time out
                    for ue in grant.members:
                        ue.epoch += 1
                        ue.state = MSG3_SENT
                        fail_events.setdefault(ue.crt_deadline, []).append(
                            (ue, ue.epoch, FAIL_MSG3_COLLISION))

        # 2: scheduled outcomes (connections win ties over failures)
        for ue, epoch in success_events.pop(t, ()):
            if ue.epoch == epoch and ue.state == AWAITING_MSG4:
                connect(ue)
        for ue, epoch, bucket in fail_events.pop(t, ()):
            if ue.epoch == epoch and ue.state in (
                    AWAITING_RAR, MSG3_SENT, AWAITING_MSG4):
                fail(ue, bucket, t)

        # 3: backoff completions rejoin the waiting pool
        for ue in eligible.pop(t, ()):
            ue.backoff_remaining = 0
            ue.state = AWAITING_RAO
            waiting.append(ue)

        # 4: fresh arrivals
        k = int(arrival_counts[t])
        if k:
            in_cohort = t >= warmup
            if in_cohort:
                arrivals += k
            for _ in range(k):
                waiting.append(UeAttempt(next_id, t, in_cohort))
                next_id += 1

        # 5: access opportunity
        if t % delta_rao == 0 and waiting:
            n = len(waiting)
            preambles = rng.integers(0, d, n)
            order = np.argsort(preambles, kind="stable")
            if t >= warmup:
                attempts += n
            groups = 0
            i = 0
            while i < n:
                j = i
                p = int(preambles[order[i]])
                members = []
                while j < n and int(preambles[order[j]]) == p:
                    members.append(waiting[int(order[j])])
                    j += 1
                groups += 1
                for ue in members:
                    ue.epoch += 1
                    ue.state = MSG1_SENT
                    ue.chosen_preamble = p
                    ue.msg1_subframe = t
                    ue.rar_deadline = t + t_enb + t_rar
                    ue.crt_deadline = t + t_crt
                    ue.state = AWAITING_RAR
                    if ue.rar_deadline <= ue.crt_deadline:
                        fail_events.setdefault(ue.rar_deadline, []).append(
                            (ue, ue.epoch, FAIL_RAR_EXPIRED))
                    else:
                        # response window outlives the resolution timer
                        fail_events.setdefault(ue.crt_deadline, []).append(
                            (ue, ue.epoch, FAIL_CRT_EXPIRED))
                queue.push(Grant(t, t + t_enb, p, members))
                i = j
            if t >= warmup:
                activated += groups
            if groups > max_activated:
                max_activated = groups
            waiting = []

    window = duration - warmup
    completed = connects + drops
    return SimStats(
        arrivals=arrivals,
        connects=connects,
        drops=drops,
        in_flight=arrivals - completed if arrivals >= completed else 0,
        outage_fraction=drops / completed if completed else 0.0,
        outage_defined=completed > 0,
        mean_tx=tx_sum / completed if completed else 0.0,
        failures=failures,
        attempts=attempts,
        activated_preambles=activated,
        lambda_t_observed=attempts / window,
        lambda_a_observed=activated / window,
        attempt_collision_fraction=(
            failures[FAIL_MSG3_COLLISION] / attempts if attempts else 0.0),
        attempt_grant_drop_fraction=(
            failures[FAIL_RAR_EXPIRED] / attempts if attempts else 0.0),
        max_msg2_per_subframe=max_msg2,
        max_activated_per_rao=max_activated,
        duration=duration,
        warmup=warmup,
    )


# metrics summarized across replications
_REPLICATED_METRICS = (
    "outage_fraction", "mean_tx", "lambda_t_observed", "lambda_a_observed",
    "attempt_collision_fraction", "attempt_grant_drop_fraction",
)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    ci_low: float
    ci_high: float
    std: float


@dataclass(frozen=True)
class ReplicatedStats:
    """Mean and 95% normal-approximation confidence intervals over
    independent replications."""

    n_reps: int
    runs: tuple
    metrics: dict
    outage_defined: bool

    def __getattr__(self, name: str) -> MetricSummary:
        if name.startswith("_") or name == "metrics":
            raise AttributeError(name)
        try:
            return self.metrics[name]
        except KeyError:
            raise AttributeError(name) from None


def run_replications(cfg: SimConfig, lambda_i: float, n_reps: int) -> ReplicatedStats:
    """Run n_reps independent replications with seeds spawned from
    cfg.seed, so streams never collide or repeat."""
    if n_reps < 2:
        raise ValueError(f"n_reps must be >= 2, got {n_reps}")
    parent = cfg.seed
    if not isinstance(parent, np.random.SeedSequence):
        parent = np.random.SeedSequence(parent)
    children = parent.spawn(n_reps)
    runs = tuple(run(replace(cfg, seed=child), lambda_i) for child in children)
    metrics = {}
    for name in _REPLICATED_METRICS:
        values = np.array([getattr(r, name) for r in runs])
        mean = float(values.mean())
        half = 1.96 * float(values.std(ddof=1)) / math.sqrt(n_reps)
        metrics[name] = MetricSummary(
            mean=mean, ci_low=mean - half, ci_high=mean + half,
            std=float(values.std(ddof=1)),
        )
    return ReplicatedStats(
        n_reps=n_reps,
        runs=runs,
        metrics=metrics,
        outage_defined=all(r.outage_defined for r in runs),
    )
