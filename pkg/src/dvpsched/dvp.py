"""Delay-violation probability: exact evaluation and analytic upper bounds.

The violation event is that fewer than y + x1 + x2 packets have left the
second queue after w frames. It decomposes exactly into a union over the
last frame u at which the batch could still clear the first hop:

  - the second link's slots over the whole horizon carry fewer than
    total_load successes, or
  - for some u in 1..w: the first link's slots in frames 0..u-2 plus the
    second link's slots in frames u..w-1 carry fewer than first_hop_load
    successes.

(The first-link window ends one frame before the second-link window starts
because a relayed packet is only servable the frame after it crosses.) Both
links share the per-slot success probability, so each union term is a single
binomial tail; summing the terms gives the union-bound estimate, and
replacing each tail by its exponential-moment bound gives a looser bound
whose real-relaxation is used by the schedule optimizer.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    CapExceededError,
    QueueState,
    ScenarioConfig,
    Schedule,
    binomial_pmf,
    binomial_tail_at_most,
    step_queues,
)
from .mdp import TransitionKernel, resolve_policy

ENUM_CAP_DEFAULT = 10_000_000

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EvalResult:
    """A DVP value with its provenance. Bound methods may exceed 1 and are
    reported unclamped; `clamped` is the usable probability."""

    dvp: float
    method: str
    detail: tuple[float, ...] | None = None
    mean_departures: float | None = None

    @property
    def clamped(self) -> float:
        return min(self.dvp, 1.0)


@dataclass(frozen=True)
class ChernoffParam:
    """Positive exponent for the exponential-moment bound."""

    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"s must be > 0, got {self.s}")

    def alpha(self, p_e: float) -> float:
        """E[e^{-s B}] for a single Bernoulli(1 - p_e) slot."""
        return (1.0 - p_e) * math.exp(-self.s) + p_e


def _as_n2(config: ScenarioConfig, schedule) -> list[float]:
    """Accept a Schedule or a raw per-frame link-2 allocation vector (real
    values allowed, for the relaxed optimizer)."""
    if isinstance(schedule, Schedule):
        if len(schedule) != config.w:
            raise ValueError(
                f"schedule has {len(schedule)} frames, deadline needs {config.w}"
            )
        if schedule.N != config.N:
            raise ValueError(f"schedule N={schedule.N} != config N={config.N}")
        return list(schedule.n2)
    n2 = [float(v) for v in schedule]
    if len(n2) != config.w:
        raise ValueError(f"allocation has {len(n2)} frames, deadline needs {config.w}")
    return n2


def bound_terms(config: ScenarioConfig, schedule) -> list[tuple[float, int]]:
    """(trial count, threshold) per union term: the all-horizon second-link
    term, then one term per last-clearing frame u = 1..w combining the
    first link's frames before u with the second link's frames from u on."""
    n2 = _as_n2(config, schedule)
    w = config.w
    suffix2 = [0.0] * (w + 1)
    for u in range(w - 1, -1, -1):
        suffix2[u] = suffix2[u + 1] + n2[u]
    terms = [(suffix2[0], config.total_load - 1)]
    prefix1 = 0.0
    for u in range(1, w + 1):
        # prefix1 covers link-1 frames 0..u-2
        if u >= 2:
            prefix1 += config.N - n2[u - 2]
        terms.append((prefix1 + suffix2[u], config.first_hop_load - 1))
    return terms


def dvpub(config: ScenarioConfig, schedule: Schedule) -> EvalResult:
    """Union-bound DVP estimate: the sum of the binomial tails of the union
    terms. Unclamped; may exceed 1."""
    terms = [
        binomial_tail_at_most(int(round(trials)), 1.0 - config.p_e, threshold)
        for trials, threshold in bound_terms(config, schedule)
    ]
    return EvalResult(dvp=sum(terms), method="dvpub", detail=tuple(terms))


def _exp_or_inf(exponent: float) -> float:
    return math.exp(exponent) if exponent < 709.0 else math.inf


def wtb(config: ScenarioConfig, schedule, s: float | ChernoffParam) -> float:
    """Exponential-moment (transient) bound on DVP at a fixed exponent s.

    Each union term P{S <= m} with S ~ Binomial(T, 1 - p_e) is bounded by
    alpha^T e^{s m} with alpha = (1 - p_e) e^{-s} + p_e, so real-valued
    trial counts are accepted; the allocation may be any vector in the
    relaxed box."""
    s_val = s.s if isinstance(s, ChernoffParam) else float(s)
    if not s_val > 0:
        raise ValueError(f"s must be > 0, got {s_val}")
    if config.p_e == 0.0:
        log_alpha = -s_val
    else:
        log_alpha = math.log(config.p_e + (1.0 - config.p_e) * math.exp(-s_val))
    total = 0.0
    for trials, threshold in bound_terms(config, schedule):
        total += _exp_or_inf(trials * log_alpha + s_val * threshold)
    return total


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def wtb_min_s(
    config: ScenarioConfig,
    schedule,
    *,
    s_lo: float = 1e-6,
    s_hi: float = 50.0,
    tol: float = 1e-9,
    max_doublings: int = 6,
) -> tuple[ChernoffParam, float]:
    """Minimize the exponential-moment bound over the exponent.

    The objective is a sum of terms exp(T log(alpha(s)) + s m) whose
    exponents are convex in s, so it is unimodal and a golden-section
    search over a bracket converges; the upper end is doubled while the
    objective still falls there (alpha saturates at p_e for large s, so a
    handful of doublings always suffices)."""
    n2 = _as_n2(config, schedule)
    f = lambda s: wtb(config, n2, s)
    hi = s_hi
    for _ in range(max_doublings):
        if f(2.0 * hi) < f(hi):
            hi *= 2.0
        else:
            break
    s_star = _golden_section(f, s_lo, hi, tol)
    return ChernoffParam(s_star), f(s_star)


def wtb_gradient(config: ScenarioConfig, n2: Sequence[float], s: float) -> list[float]:
    """Partial derivatives of the fixed-s bound w.r.t. each link-2
    allocation. Term value times log(alpha) times the trial-count
    sensitivity: +1 where the frame lies in the term's link-2 window,
    -1 where it lies in the link-1 window (since n1 = N - n2)."""
    n2 = _as_n2(config, n2)
    w = config.w
    if config.p_e == 0.0:
        log_alpha = -s
    else:
        log_alpha = math.log(config.p_e + (1.0 - config.p_e) * math.exp(-s))
    terms = bound_terms(config, n2)
    values = [_exp_or_inf(t * log_alpha + s * m) for t, m in terms]
    grad = [0.0] * w
    for j in range(w):
        g = values[0]  # whole-horizon link-2 term includes every frame
        for u in range(1, w + 1):
            sens = (1 if j >= u else 0) - (1 if j <= u - 2 else 0)
            if sens:
                g += sens * values[u]
        grad[j] = g * log_alpha
    return grad


def exact_dvp_enum(
    config: ScenarioConfig, schedule: Schedule, cap: int = ENUM_CAP_DEFAULT
) -> EvalResult:
    """Exact DVP by brute-force enumeration of every joint per-frame service
    outcome, weighted by its binomial probability. Independent of the
    chain evaluator; serves as the oracle for everything else."""
    n1 = schedule.n1
    n2 = schedule.n2
    if len(schedule) != config.w or schedule.N != config.N:
        raise ValueError("schedule does not match the scenario")
    outcomes = 1
    for k in range(config.w):
        outcomes *= (n1[k] + 1) * (n2[k] + 1)
    if outcomes > cap:
        raise CapExceededError(
            f"enumeration needs {outcomes} outcomes, cap is {cap}", outcomes, cap
        )
    q = 1.0 - config.p_e
    frame_draws = []
    for k in range(config.w):
        frame_draws.append(
            [
                (s1, s2, binomial_pmf(n1[k], q, s1) * binomial_pmf(n2[k], q, s2))
                for s1 in range(n1[k] + 1)
                for s2 in range(n2[k] + 1)
            ]
        )
    violation = 0.0
    departed_weighted = 0.0
    start = QueueState(config.first_hop_load, config.x2)
    for path in itertools.product(*frame_draws):
        prob = 1.0
        state = start
        for s1, s2, p in path:
            prob *= p
            state, _ = step_queues(state, s1, s2)
        if state.q1 + state.q2 > 0:
            violation += prob
        departed_weighted += prob * (config.total_load - state.q1 - state.q2)
    return EvalResult(
        dvp=violation, method="exact-enum", mean_departures=departed_weighted
    )


def exact_dvp_chain(
    config: ScenarioConfig, policy, kernel: TransitionKernel | None = None
) -> EvalResult:
    """Exact DVP by propagating the joint backlog distribution through the
    w frames under the given policy (schedule, policy table, baseline name,
    or callable). The batch met the deadline iff both queues are empty at
    the horizon, since departures equal the initial load minus what is
    left."""
    if kernel is None:
        kernel = TransitionKernel(config)
    act = resolve_policy(policy, config)
    S = kernel.n_states
    rho = np.zeros(S)
    rho[kernel.index(config.first_hop_load, config.x2)] = 1.0
    for epoch in range(config.w):
        nxt = np.zeros(S)
        for i in np.nonzero(rho)[0]:
            state = kernel.states[i]
            a = act(epoch, state.q1, state.q2)
            if not 0 <= a <= config.N:
                raise ValueError(
                    f"policy returned n1={a} outside 0..{config.N} "
                    f"at epoch={epoch} state=({state.q1},{state.q2})"
                )
            nxt += rho[i] * kernel.P[a, i]
        rho = nxt
    leftover = sum(
        float(rho[i]) * (st.q1 + st.q2) for i, st in enumerate(kernel.states)
    )
    dvp = 1.0 - float(rho[kernel.index(0, 0)])
    return EvalResult(
        dvp=dvp,
        method="exact-chain",
        mean_departures=config.total_load - leftover,
    )
