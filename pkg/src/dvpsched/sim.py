"""Monte Carlo DVP estimation with reproducible, order-independent streams.

Each replication owns a fixed range of counter blocks of a Philox generator
keyed by the seed (one block budget per replication, sized by the horizon),
so the random inputs of replication r never depend on chunking or worker
scheduling: identical (config, spec) give bit-identical results. Binomial
service draws use one uniform per link per frame, inverted through the
binomial distribution function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import BASELINE_KINDS, PolicyTable, baseline_actions
from .model import (
    PolicyLookupError,
    ScenarioConfig,
    Schedule,
    binomial_cdf,
)

WILSON_Z = 1.959963984540054  # two-sided 95%
DEFAULT_CHUNK = 1 << 14


@dataclass(frozen=True, eq=False)
class SimSpec:
    """Replication count, stream seed, and the policy to simulate (schedule,
    policy table, or baseline name)."""

    replications: int
    seed: int
    policy: object

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class SimResult:
    dvp_hat: float
    ci_low: float
    ci_high: float
    mean_departures: float
    replications: int


def wilson_interval(successes: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval; stays sane for counts of 0 or n."""
    p_hat = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p_hat + z2 / (2.0 * n)) / denom
    half = (z / denom) * np.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n))
    # cancellation at counts of 0 or n must not push the interval off the
    # point estimate
    lo = min(max(0.0, float(center - half)), p_hat)
    hi = max(min(1.0, float(center + half)), p_hat)
    return lo, hi


def _inversion_table(N: int, q: float) -> np.ndarray:
    """cdf[a, r] = P{Binomial(a, q) <= r} for r < a, and 1 beyond, so that
    counting thresholds <= u inverts the distribution."""
    cdf = np.ones((N + 1, max(N, 1)))
    for a in range(N + 1):
        for r in range(min(a, cdf.shape[1])):
            cdf[a, r] = binomial_cdf(a, q, r)
    return cdf


def _frame_actions(policy, config: ScenarioConfig, epoch: int, q1, q2) -> np.ndarray:
    if isinstance(policy, Schedule):
        return np.full(q1.shape, policy.n1[epoch], dtype=np.int64)
    if isinstance(policy, PolicyTable):
        idx = q1 * (config.q2_max + 1) + q2
        acts = policy.actions[epoch, idx]
        if np.any(acts < 0):
            bad = int(np.argmax(acts < 0))
            raise PolicyLookupError(
                f"no action stored for epoch={epoch} "
                f"state=({int(q1[bad])},{int(q2[bad])})"
            )
        return acts
    return baseline_actions(policy, q1, q2, config.N)


def simulate(
    config: ScenarioConfig, spec: SimSpec, chunk_size: int = DEFAULT_CHUNK
) -> SimResult:
    """Estimate DVP and expected departures for a policy; Wilson 95% CI.

    The result does not depend on chunk_size. A run is a violation iff any
    packet is still queued after the final frame.
    """
    policy = spec.policy
    if isinstance(policy, Schedule):
        if len(policy) != config.w or policy.N != config.N:
            raise ValueError("schedule does not match the scenario")
    elif isinstance(policy, PolicyTable):
        if policy.config != config:
            raise ValueError("policy table was built for a different scenario")
    elif isinstance(policy, str):
        if policy not in BASELINE_KINDS:
            raise ValueError(f"unknown policy name {policy!r}")
    else:
        raise TypeError(f"cannot simulate a {type(policy).__name__} policy")

    w, N = config.w, config.N
    q = 1.0 - config.p_e
    cdf = _inversion_table(N, q)
    words_per_rep = 2 * w
    blocks_per_rep = -(-words_per_rep // 4)  # Philox yields 4 words per block
    row = 4 * blocks_per_rep

    violations = 0
    departed = 0
    done = 0
    while done < spec.replications:
        n = min(chunk_size, spec.replications - done)
        gen = np.random.Generator(
            np.random.Philox(key=spec.seed, counter=done * blocks_per_rep)
        )
        u = gen.random((n, row))[:, :words_per_rep]
        q1 = np.full(n, config.first_hop_load, dtype=np.int64)
        q2 = np.full(n, config.x2, dtype=np.int64)
        for k in range(w):
            acts = _frame_actions(policy, config, k, q1, q2)
            s1 = (u[:, k, None] >= cdf[acts]).sum(axis=1)
            s2 = (u[:, w + k, None] >= cdf[N - acts]).sum(axis=1)
            d1 = np.minimum(q1, s1)
            q1 = q1 - d1
            q2 = np.maximum(q2 - s2, 0) + d1
        left = q1 + q2
        violations += int((left > 0).sum())
        departed += int((config.total_load - left).sum())
        done += n

    n_total = spec.replications
    lo, hi = wilson_interval(violations, n_total)
    return SimResult(
        dvp_hat=violations / n_total,
        ci_low=lo,
        ci_high=hi,
        mean_departures=departed / n_total,
        replications=n_total,
    )
