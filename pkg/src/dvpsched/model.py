"""Core model of the two-hop relay path: scenario parameters, slot schedules,
queue states, binomial per-frame service, and the one-frame queue update.

Time is slotted and grouped into frames of N slots. Each frame's slots are
split between the two links (n1 + n2 = N). A slot carries one transmission
attempt that succeeds independently with probability 1 - p_e, so the service
granted to link i in a frame is Binomial(n_i, 1 - p_e). Packets leaving the
first queue during a frame become servable at the second queue in the next
frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class CapExceededError(RuntimeError):
    """An enumeration would exceed its configured size cap."""

    def __init__(self, message: str, estimate: int, cap: int):
        super().__init__(message)
        self.estimate = estimate
        self.cap = cap


class PolicyLookupError(LookupError):
    """A policy table has no action for a state it is asked about."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One problem instance.

    N: slots per frame; p_e: per-slot packet error rate; w: deadline in
    frames; y: size of the time-critical batch arriving at frame 0;
    x1, x2: initial backlogs of the first and second queue.
    """

    N: int
    p_e: float
    w: int
    y: int
    x1: int
    x2: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.w < 1:
            raise ValueError(f"w must be >= 1, got {self.w}")
        if self.y < 1:
            raise ValueError(f"y must be >= 1, got {self.y}")
        if self.x1 < 0 or self.x2 < 0:
            raise ValueError(f"backlogs must be >= 0, got x1={self.x1}, x2={self.x2}")
        if not 0.0 <= self.p_e <= 1.0:
            raise ValueError(f"p_e must be in [0, 1], got {self.p_e}")

    @property
    def total_load(self) -> int:
        """Packets that must clear the second queue: y + x1 + x2."""
        return self.y + self.x1 + self.x2

    @property
    def first_hop_load(self) -> int:
        """Packets that must clear the first queue: y + x1."""
        return self.y + self.x1

    @property
    def q1_max(self) -> int:
        """Largest reachable first-queue backlog."""
        return self.y + self.x1

    @property
    def q2_max(self) -> int:
        """Largest reachable second-queue backlog."""
        return self.y + self.x1 + self.x2


@dataclass(frozen=True)
class Schedule:
    """A per-frame slot split fixed for the whole horizon, stored as the
    link-1 allocations; link 2 implicitly gets the remaining N - n1 slots."""

    n1: tuple[int, ...]
    N: int

    def __post_init__(self):
        object.__setattr__(self, "n1", tuple(int(v) for v in self.n1))
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        for k, v in enumerate(self.n1):
            if not 0 <= v <= self.N:
                raise ValueError(f"n1[{k}]={v} outside 0..{self.N}")

    @property
    def n2(self) -> tuple[int, ...]:
        return tuple(self.N - v for v in self.n1)

    def __len__(self) -> int:
        return len(self.n1)


class QueueState(NamedTuple):
    """Joint backlog pair at a frame boundary."""

    q1: int
    q2: int


class FrameOutcome(NamedTuple):
    """Granted service and resulting departures for one frame."""

    s1: int
    s2: int
    d1: int
    d2: int

    @classmethod
    def from_service(cls, state: QueueState, s1: int, s2: int) -> "FrameOutcome":
        return cls(s1, s2, min(state.q1, s1), min(state.q2, s2))


def binomial_pmf(n: int, p: float, r: int) -> float:
    """P{Binomial(n, p) = r}, computed in log space for stability at the
    cumulative trial counts (up to a few hundred) this toolkit produces."""
    n = int(n)
    r = int(r)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if r < 0 or r > n:
        raise ValueError(f"r={r} outside 0..{n}")
    if p == 0.0:
        return 1.0 if r == 0 else 0.0
    if p == 1.0:
        return 1.0 if r == n else 0.0
    log_pmf = (
        math.lgamma(n + 1)
        - math.lgamma(r + 1)
        - math.lgamma(n - r + 1)
        + r * math.log(p)
        + (n - r) * math.log(1.0 - p)
    )
    return math.exp(log_pmf)


def binomial_cdf(n: int, p: float, r: int) -> float:
    """P{Binomial(n, p) <= r}."""
    n = int(n)
    r = int(r)
    if r < 0 or r > n:
        raise ValueError(f"r={r} outside 0..{n}")
    if r == n:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {p}")
        return 1.0
    total = 0.0
    for j in range(r + 1):
        total += binomial_pmf(n, p, j)
    return min(total, 1.0)


def binomial_tail_at_most(n: int, p: float, r: int) -> float:
    """binomial_cdf with the threshold clamped into the support, so callers
    assembling bound terms may pass thresholds beyond n (probability 1) or
    below 0 (probability 0)."""
    if r < 0:
        return 0.0
    return binomial_cdf(n, p, min(r, int(n)))


def step_queues(state: QueueState, s1: int, s2: int) -> tuple[QueueState, int]:
    """Apply one frame of granted service. Packets relayed from the first
    queue this frame are appended to the second queue after it was served,
    so they only become servable next frame. Returns the next state and the
    number of packets that left the system (d2)."""
    if s1 < 0 or s2 < 0:
        raise ValueError(f"service must be >= 0, got s1={s1}, s2={s2}")
    q1, q2 = state
    d1 = min(q1, s1)
    d2 = min(q2, s2)
    return QueueState(q1 - d1, q2 - d2 + d1), d2


def cumulative_slots(schedule: Schedule, link: int, frames: int) -> int:
    """Slots allocated to a link over the first `frames` frames. The granted
    cumulative service over those frames is Binomial(result, 1 - p_e).
    Zero frames means zero trials."""
    if link not in (1, 2):
        raise ValueError(f"link must be 1 or 2, got {link}")
    if frames < 0 or frames > len(schedule):
        raise ValueError(f"frames={frames} outside 0..{len(schedule)}")
    alloc = schedule.n1 if link == 1 else schedule.n2
    return sum(alloc[:frames])
