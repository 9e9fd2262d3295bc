"""Deadline-violation analysis and slot scheduling for a two-hop lossy
wireless path: exact evaluators, analytic bounds, semi-static and dynamic
(MDP) schedulers, comparison baselines, and a Monte Carlo estimator."""

from .dvp import (
    ChernoffParam,
    EvalResult,
    dvpub,
    exact_dvp_chain,
    exact_dvp_enum,
    wtb,
    wtb_min_s,
)
from .mdp import (
    PolicyTable,
    TransitionKernel,
    baseline_policy,
    build_state_space,
    reward,
    transition_probs,
    transition_probs_casewise,
    value_iteration,
)
from .model import (
    CapExceededError,
    FrameOutcome,
    PolicyLookupError,
    QueueState,
    ScenarioConfig,
    Schedule,
    binomial_cdf,
    binomial_pmf,
    cumulative_slots,
    step_queues,
)
from .semistatic import (
    RelaxedSchedule,
    SemiStaticResult,
    e_dvpub,
    e_wtb,
    exhaustive,
    fifty_fifty,
    neighbor_search,
    opt,
    round_nearest,
    solve_relaxed,
    wtb_d,
    wtb_r,
    wtb_w,
)
from .sim import SimResult, SimSpec, simulate, wilson_interval

__all__ = [
    "CapExceededError",
    "ChernoffParam",
    "EvalResult",
    "FrameOutcome",
    "PolicyLookupError",
    "PolicyTable",
    "QueueState",
    "RelaxedSchedule",
    "ScenarioConfig",
    "Schedule",
    "SemiStaticResult",
    "SimResult",
    "SimSpec",
    "TransitionKernel",
    "baseline_policy",
    "binomial_cdf",
    "binomial_pmf",
    "build_state_space",
    "cumulative_slots",
    "dvpub",
    "e_dvpub",
    "e_wtb",
    "exact_dvp_chain",
    "exact_dvp_enum",
    "exhaustive",
    "fifty_fifty",
    "neighbor_search",
    "opt",
    "reward",
    "round_nearest",
    "simulate",
    "solve_relaxed",
    "step_queues",
    "transition_probs",
    "transition_probs_casewise",
    "value_iteration",
    "wilson_interval",
    "wtb",
    "wtb_d",
    "wtb_min_s",
    "wtb_r",
    "wtb_w",
]
