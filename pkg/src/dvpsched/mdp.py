"""Finite-horizon MDP scheduler and the queue-state transition kernel.

The state is the joint backlog (q1, q2), the action is the number of slots
n1 given to the first link, and the per-frame reward is the expected number
of packets leaving the system. Backward value iteration yields the policy
maximizing expected total departures over the horizon; the resulting table
is computed once and looked up per frame.

A bound of the form  DVP <= total_load * E[1 / D(w)]  motivates maximizing
throughput as a proxy for minimizing DVP, but the expectation is undefined
on runs with zero departures, so no such bound is computed here; only the
throughput-maximizing policy itself is.

This module also hosts the queue-agnostic-to-queue-aware comparison rules
(max-weight, proportional split, backpressure, even split) as dynamic
policies over the same state space.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .model import (
    CapExceededError,
    PolicyLookupError,
    QueueState,
    ScenarioConfig,
    Schedule,
    binomial_pmf,
    step_queues,
)

BASELINE_KINDS = ("mw", "wfq", "bp", "fifty")

# dense kernel budget: (N + 1) transition matrices over the state space
KERNEL_ENTRY_CAP = 50_000_000


def build_state_space(config: ScenarioConfig) -> list[QueueState]:
    """Full backlog rectangle {0..y+x1} x {0..y+x1+x2}, row-major.

    The first queue never grows, and relays can push the second queue up to
    the total initial load, so the rectangle covers every reachable state.
    """
    return [
        QueueState(q1, q2)
        for q1 in range(config.q1_max + 1)
        for q2 in range(config.q2_max + 1)
    ]


def state_index(config: ScenarioConfig, q1: int, q2: int) -> int:
    """Row-major index of a state in build_state_space's ordering."""
    if not (0 <= q1 <= config.q1_max and 0 <= q2 <= config.q2_max):
        raise ValueError(f"state ({q1},{q2}) outside the backlog rectangle")
    return q1 * (config.q2_max + 1) + q2


def transition_probs(
    config: ScenarioConfig, state: QueueState, n1: int
) -> dict[QueueState, float]:
    """One-frame transition distribution, by marginalizing the queue update
    over the two independent binomial service draws. This is the source of
    truth for the kernel; see transition_probs_casewise for the closed-form
    counterpart kept as a cross-check."""
    if not 0 <= n1 <= config.N:
        raise ValueError(f"action n1={n1} outside 0..{config.N}")
    n2 = config.N - n1
    q = 1.0 - config.p_e
    out: dict[QueueState, float] = {}
    for s1 in range(n1 + 1):
        p1 = binomial_pmf(n1, q, s1)
        for s2 in range(n2 + 1):
            p = p1 * binomial_pmf(n2, q, s2)
            nxt, _ = step_queues(state, s1, s2)
            out[nxt] = out.get(nxt, 0.0) + p
    return out


def _pmf_at_least(n: int, q: float, r: int) -> float:
    """P{Binomial(n, q) >= r}; zero when r exceeds the trial count."""
    if r <= 0:
        return 1.0
    if r > n:
        return 0.0
    return sum(binomial_pmf(n, q, j) for j in range(r, n + 1))


def _pmf_eq(n: int, q: float, r: int) -> float:
    if r < 0 or r > n:
        return 0.0
    return binomial_pmf(n, q, r)


def transition_probs_casewise(
    config: ScenarioConfig, state: QueueState, n1: int
) -> dict[QueueState, float]:
    """One-frame transition distribution assembled case by case from the
    target state, distinguishing whether each queue is partially drained,
    fully drained, or left untouched, with the proviso that an empty queue
    contributes no service term.

    For a target (l1p, l2p) from (l1, l2) with both queues non-empty:
      - infeasible if l1p > l1 or l1p + l2p > l1 + l2;
      - l1p > 0 pins s1 = l1 - l1p exactly; l1p = 0 needs s1 >= l1;
      - the second queue must shed l2 - l2p + (l1 - l1p) packets, which
        requires s2 equal to that count when it is below l2 and s2 >= l2
        when the queue drains completely.
    """
    if not 0 <= n1 <= config.N:
        raise ValueError(f"action n1={n1} outside 0..{config.N}")
    l1, l2 = state
    n2 = config.N - n1
    q = 1.0 - config.p_e
    out: dict[QueueState, float] = {}

    def put(l1p: int, l2p: int, prob: float) -> None:
        if prob > 0.0:
            out[QueueState(l1p, l2p)] = out.get(QueueState(l1p, l2p), 0.0) + prob

    if l1 == 0 and l2 == 0:
        return {QueueState(0, 0): 1.0}

    if l1 == 0:
        # only the second queue receives service
        for l2p in range(l2 + 1):
            if l2p > 0:
                put(0, l2p, _pmf_eq(n2, q, l2 - l2p))
            else:
                put(0, 0, _pmf_at_least(n2, q, l2))
        return out

    if l2 == 0:
        # only the first queue receives service; relays land in queue 2
        for l1p in range(l1 + 1):
            if l1p > 0:
                put(l1p, l1 - l1p, _pmf_eq(n1, q, l1 - l1p))
            else:
                put(0, l1, _pmf_at_least(n1, q, l1))
        return out

    for l1p in range(l1 + 1):
        for l2p in range(l1 + l2 - l1p + 1):
            # relayed packets keep the second queue at >= l1 - l1p
            drained2 = l2 - l2p + (l1 - l1p)
            if drained2 > l2:
                continue
            if l1p > 0 and l2p > 0:
                p1 = _pmf_eq(n1, q, l1 - l1p)
                p2 = _pmf_eq(n2, q, drained2) if drained2 < l2 else _pmf_at_least(n2, q, l2)
                put(l1p, l2p, p1 * p2)
            elif l1p == 0 and l2p > 0:
                p1 = _pmf_at_least(n1, q, l1)
                p2 = _pmf_eq(n2, q, drained2) if drained2 < l2 else _pmf_at_least(n2, q, l2)
                put(l1p, l2p, p1 * p2)
            elif l1p > 0 and l2p == 0:
                # queue 1 partially served with queue 2 emptied needs the
                # frame's relays to vanish, i.e. s1 = 0 and l1p = l1
                if l1p == l1:
                    put(l1, 0, _pmf_eq(n1, q, 0) * _pmf_at_least(n2, q, l2))
            else:
                # l1p = 0 and l2p = 0 is unreachable: the l1 relayed packets
                # arrive after queue 2 was served
                continue
    return out


class TransitionKernel:
    """Dense per-action transition matrices.

    The matrices cover the smallest superset of the backlog rectangle that
    the dynamics cannot leave, {q1 <= q1_max, q1 + q2 <= q1_max + q2_max}:
    corner states of the rectangle with q1 + q2 above the initial load are
    unreachable in their own scenario but can relay beyond q2_max, and
    keeping their rows exact keeps every rectangle row exact."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        total = config.q1_max + config.q2_max
        n_actions = config.N + 1
        n_states = (config.q1_max + 1) * (total + 1) - config.q1_max * (config.q1_max + 1) // 2
        entries = n_actions * n_states * n_states
        if entries > KERNEL_ENTRY_CAP:
            raise CapExceededError(
                f"dense kernel needs {entries} entries "
                f"({n_actions} actions x {n_states}^2 states), "
                f"cap is {KERNEL_ENTRY_CAP}",
                entries,
                KERNEL_ENTRY_CAP,
            )
        self.states = [
            QueueState(q1, q2)
            for q1 in range(config.q1_max + 1)
            for q2 in range(total - q1 + 1)
        ]
        self._index = {s: i for i, s in enumerate(self.states)}
        self.n_states = len(self.states)
        assert self.n_states == n_states
        P = np.zeros((n_actions, self.n_states, self.n_states))
        for i, state in enumerate(self.states):
            for a in range(n_actions):
                for nxt, prob in transition_probs(config, state, a).items():
                    P[a, i, self._index[nxt]] += prob
        self.P = P

    def index(self, q1: int, q2: int) -> int:
        try:
            return self._index[QueueState(q1, q2)]
        except KeyError:
            raise ValueError(f"state ({q1},{q2}) outside the kernel's domain") from None

    def transitions(self, state: QueueState, action: int) -> list[tuple[QueueState, float]]:
        """Sparse view of one (state, action) row."""
        row = self.P[action, self.index(state.q1, state.q2)]
        return [(self.states[j], float(p)) for j, p in enumerate(row) if p > 0.0]


def reward(config: ScenarioConfig, state: QueueState, n1: int) -> float:
    """Expected departures from the system in one frame: E[min(q2, s2)]."""
    if not 0 <= n1 <= config.N:
        raise ValueError(f"action n1={n1} outside 0..{config.N}")
    n2 = config.N - n1
    q = 1.0 - config.p_e
    return sum(min(state.q2, r) * binomial_pmf(n2, q, r) for r in range(n2 + 1))


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Per-epoch action and value tables over the backlog rectangle.

    actions[k, i] is the slot count for link 1 at epoch k in state i;
    values[k, i] the expected departures collectable from epoch k on. The
    terminal row values[w] is zero. Parsed tables may be partial, in which
    case missing lookups raise PolicyLookupError.
    """

    config: ScenarioConfig
    actions: np.ndarray  # (w, S) int, -1 marks a missing entry
    values: np.ndarray  # (w + 1, S) float

    def action(self, epoch: int, q1: int, q2: int) -> int:
        if not 0 <= epoch < self.config.w:
            raise ValueError(f"epoch {epoch} outside 0..{self.config.w - 1}")
        a = int(self.actions[epoch, state_index(self.config, q1, q2)])
        if a < 0:
            raise PolicyLookupError(
                f"no action stored for epoch={epoch} state=({q1},{q2})"
            )
        return a

    def value(self, epoch: int, q1: int, q2: int) -> float:
        return float(self.values[epoch, state_index(self.config, q1, q2)])

    def to_text(self) -> str:
        """Line format: one config header, then `epoch q1 q2 action value`
        rows with values rendered to 12 significant digits."""
        c = self.config
        states = build_state_space(c)
        buf = io.StringIO()
        buf.write(
            f"# policy-table N={c.N} pe={c.p_e:.12g} w={c.w} y={c.y} x1={c.x1} x2={c.x2}\n"
        )
        for k in range(c.w):
            for i, state in enumerate(states):
                a = int(self.actions[k, i])
                if a < 0:
                    continue
                buf.write(
                    f"{k} {state.q1} {state.q2} {a} {self.values[k, i]:.12g}\n"
                )
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "PolicyTable":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# policy-table "):
            raise ValueError("line 1: missing policy-table header")
        fields = {}
        for token in lines[0].removeprefix("# policy-table ").split():
            key, _, val = token.partition("=")
            fields[key] = val
        try:
            config = ScenarioConfig(
                N=int(fields["N"]),
                p_e=float(fields["pe"]),
                w=int(fields["w"]),
                y=int(fields["y"]),
                x1=int(fields["x1"]),
                x2=int(fields["x2"]),
            )
        except KeyError as exc:
            raise ValueError(f"line 1: header missing field {exc}") from exc
        n_states = (config.q1_max + 1) * (config.q2_max + 1)
        actions = np.full((config.w, n_states), -1, dtype=np.int64)
        values = np.zeros((config.w + 1, n_states))
        for lineno, line in enumerate(lines[1:], start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"line {lineno}: expected 5 fields, got {len(parts)}")
            try:
                k, q1, q2, a = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
                v = float(parts[4])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
            if not 0 <= k < config.w:
                raise ValueError(f"line {lineno}: epoch {k} outside 0..{config.w - 1}")
            if not 0 <= a <= config.N:
                raise ValueError(f"line {lineno}: action {a} outside 0..{config.N}")
            actions[k, state_index(config, q1, q2)] = a
            values[k, state_index(config, q1, q2)] = v
        return cls(config=config, actions=actions, values=values)


def value_iteration(config: ScenarioConfig, kernel: TransitionKernel | None = None) -> PolicyTable:
    """Backward recursion from a zero terminal value; per epoch and state the
    action maximizing immediate expected departures plus expected
    continuation, ties broken toward the smallest n1. One sweep costs
    (N + 1) * |states| kernel rows, repeated for each of the w epochs."""
    if kernel is None:
        kernel = TransitionKernel(config)
    S = kernel.n_states
    n_actions = config.N + 1
    R = np.array(
        [[reward(config, state, a) for state in kernel.states] for a in range(n_actions)]
    )  # (A, S)
    actions = np.zeros((config.w, S), dtype=np.int64)
    values = np.zeros((config.w + 1, S))
    for k in range(config.w - 1, -1, -1):
        q_sa = R + kernel.P @ values[k + 1]  # (A, S)
        best = np.argmax(q_sa, axis=0)  # first (= smallest) maximizing action
        actions[k] = best
        values[k] = q_sa[best, np.arange(S)]
    # publish on the rectangle the table contract uses
    rect = build_state_space(config)
    cols = np.array([kernel.index(s.q1, s.q2) for s in rect])
    return PolicyTable(
        config=config, actions=actions[:, cols], values=values[:, cols]
    )


def baseline_actions(kind: str, q1: np.ndarray, q2: np.ndarray, N: int) -> np.ndarray:
    """Vectorized state-to-allocation rules for the comparison policies.

    mw: every slot to the longer queue, ties (including empty-empty) to the
        first link so fresh relays stay possible.
    wfq: n1 proportional to q1/(q1+q2), half-up rounding; an empty system
        falls back to the even split.
    bp: weights q1-q2 and q2; every slot to the strictly larger positive
        weight, otherwise the even split.
    fifty: even split, spare slot to the first link.
    """
    q1 = np.asarray(q1, dtype=np.int64)
    q2 = np.asarray(q2, dtype=np.int64)
    half_up = (N + 1) // 2
    if kind == "mw":
        return np.where(q1 >= q2, N, 0).astype(np.int64)
    if kind == "wfq":
        tot = q1 + q2
        safe = np.maximum(tot, 1)
        prop = (2 * N * q1 + safe) // (2 * safe)  # integer round-half-up
        return np.where(tot == 0, half_up, prop).astype(np.int64)
    if kind == "bp":
        w1 = q1 - q2
        w2 = q2
        n1 = np.full(q1.shape, half_up, dtype=np.int64)
        n1 = np.where((w1 > w2) & (w1 > 0), N, n1)
        n1 = np.where((w2 > w1) & (w2 > 0), 0, n1)
        return n1
    if kind == "fifty":
        return np.full(q1.shape, half_up, dtype=np.int64)
    raise ValueError(f"unknown baseline {kind!r}")


def baseline_policy(kind: str, config: ScenarioConfig, state: QueueState, epoch: int) -> int:
    """Scalar form of baseline_actions for one (state, epoch)."""
    return int(
        baseline_actions(kind, np.array([state.q1]), np.array([state.q2]), config.N)[0]
    )


def resolve_policy(policy, config: ScenarioConfig):
    """Normalize a schedule, policy table, baseline name, or callable into a
    function (epoch, q1, q2) -> n1."""
    if isinstance(policy, Schedule):
        if len(policy) != config.w:
            raise ValueError(
                f"schedule has {len(policy)} frames, deadline needs {config.w}"
            )
        if policy.N != config.N:
            raise ValueError(f"schedule N={policy.N} differs from config N={config.N}")
        n1 = policy.n1
        return lambda epoch, q1, q2: n1[epoch]
    if isinstance(policy, PolicyTable):
        if policy.config != config:
            raise ValueError("policy table was built for a different scenario")
        return lambda epoch, q1, q2: policy.action(epoch, q1, q2)
    if isinstance(policy, str):
        if policy not in BASELINE_KINDS:
            raise ValueError(f"unknown policy name {policy!r}")
        return lambda epoch, q1, q2: baseline_policy(
            policy, config, QueueState(q1, q2), epoch
        )
    if callable(policy):
        return policy
    raise TypeError(f"cannot interpret {type(policy).__name__} as a policy")
