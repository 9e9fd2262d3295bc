"""Semi-static schedules computed once from the initial backlogs: the
relaxed convex bound minimization, its integer rounding heuristics, and the
exhaustive reference searches.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .dvp import ChernoffParam, dvpub, exact_dvp_chain, wtb_gradient, wtb_min_s
from .mdp import TransitionKernel
from .model import CapExceededError, ScenarioConfig, Schedule

EXHAUSTIVE_CAP_DEFAULT = 1_000_000
NEIGHBOR_W_CAP = 24

_ARMIJO_C = 1e-4
_GRAD_TOL = 1e-7
_MAX_ITERS = 10_000


@dataclass(frozen=True)
class RelaxedSchedule:
    """Real-valued link-2 allocation in the box [1, N-1]^w, with the bound
    exponent and value at the joint optimum."""

    n2: tuple[float, ...]
    s: ChernoffParam
    objective: float


@dataclass(frozen=True)
class SemiStaticResult:
    """An integer schedule, how it was chosen, and the criterion value that
    selected it."""

    schedule: Schedule
    method: str
    score: float
    relaxed: RelaxedSchedule | None = None


def _project_box(vec: list[float], lo: float, hi: float) -> list[float]:
    return [min(max(v, lo), hi) for v in vec]


def solve_relaxed(config: ScenarioConfig) -> RelaxedSchedule:
    """Minimize the transient bound over the relaxed box [1, N-1]^w.

    Projected gradient descent on the allocation, alternating with exact
    one-dimensional minimization over the exponent; backtracking (halving)
    line search with an Armijo condition. Starts from the uniform split,
    stops when the projected gradient is negligible or after a fixed
    iteration budget.
    """
    if config.N < 2:
        raise ValueError(f"relaxed box [1, N-1] is empty for N={config.N}")
    w = config.w
    lo, hi = 1.0, float(config.N - 1)
    x = _project_box([config.N / 2.0] * w, lo, hi)
    s_param, fx = wtb_min_s(config, x)
    # the objective can sit many orders of magnitude below the unit box
    # scale, so the line search remembers its last accepted step and grows
    # it; plain unit steps stall far from stationarity
    step = 1.0
    for _ in range(_MAX_ITERS):
        grad = wtb_gradient(config, x, s_param.s)
        projected = [xi - min(max(xi - gi, lo), hi) for xi, gi in zip(x, grad)]
        if math.sqrt(sum(g * g for g in projected)) < _GRAD_TOL:
            break
        step = min(step * 4.0, 1e12)
        improved = False
        for _ in range(80):
            cand = _project_box([xi - step * gi for xi, gi in zip(x, grad)], lo, hi)
            moved = sum(g * (c - xi) for g, c, xi in zip(grad, cand, x))
            if moved >= 0.0:
                step *= 0.5
                continue
            s_cand, f_cand = wtb_min_s(config, cand)
            if f_cand <= fx + _ARMIJO_C * moved:
                x, fx, s_param = cand, f_cand, s_cand
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return RelaxedSchedule(n2=tuple(x), s=s_param, objective=fx)


def _schedule_from_n2(config: ScenarioConfig, n2: tuple[int, ...]) -> Schedule:
    return Schedule(n1=tuple(config.N - v for v in n2), N=config.N)


def round_nearest(config: ScenarioConfig, relaxed: RelaxedSchedule) -> SemiStaticResult:
    """Nearest-integer rounding of the relaxed allocation (halves round up),
    clamped back into {1..N-1}."""
    n2 = tuple(
        int(min(max(math.floor(v + 0.5), 1), config.N - 1)) for v in relaxed.n2
    )
    schedule = _schedule_from_n2(config, n2)
    _, score = wtb_min_s(config, schedule)
    return SemiStaticResult(schedule=schedule, method="wtb-r", score=score, relaxed=relaxed)


def neighbor_search(
    config: ScenarioConfig, relaxed: RelaxedSchedule, criterion: str
) -> SemiStaticResult:
    """Score every floor/ceil combination around the relaxed allocation
    (clamped into {1..N-1}, duplicates collapsed) and keep the best; ties go
    to the lexicographically smallest link-2 vector."""
    if criterion not in ("dvpub", "wtb"):
        raise ValueError(f"criterion must be dvpub or wtb, got {criterion!r}")
    if config.w > NEIGHBOR_W_CAP:
        raise CapExceededError(
            f"2^{config.w} neighbor combinations exceed the w<= {NEIGHBOR_W_CAP} cap",
            2**config.w,
            2**NEIGHBOR_W_CAP,
        )
    choices = []
    for v in relaxed.n2:
        a = int(min(max(math.floor(v), 1), config.N - 1))
        b = int(min(max(math.ceil(v), 1), config.N - 1))
        choices.append((a,) if a == b else (a, b))
    best_n2 = None
    best_score = math.inf
    for n2 in itertools.product(*choices):
        schedule = _schedule_from_n2(config, n2)
        if criterion == "dvpub":
            score = dvpub(config, schedule).dvp
        else:
            _, score = wtb_min_s(config, schedule)
        if score < best_score:
            best_score = score
            best_n2 = n2
    method = "wtb-d" if criterion == "dvpub" else "wtb-w"
    return SemiStaticResult(
        schedule=_schedule_from_n2(config, best_n2),
        method=method,
        score=best_score,
        relaxed=relaxed,
    )


def exhaustive(
    config: ScenarioConfig,
    criterion: str,
    cap: int = EXHAUSTIVE_CAP_DEFAULT,
    full_domain: bool = False,
) -> SemiStaticResult:
    """Search every allocation in {1..N-1}^w (optionally {0..N}^w for the
    exact criterion) for the minimizer of the chosen criterion. The exact
    criterion evaluates each candidate with the chain evaluator; its default
    domain matches the bound methods so rankings stay comparable."""
    if criterion not in ("dvpub", "wtb", "exact"):
        raise ValueError(f"criterion must be dvpub, wtb or exact, got {criterion!r}")
    if full_domain and criterion != "exact":
        raise ValueError("the widened {0..N}^w domain applies to the exact criterion")
    if full_domain:
        values = range(0, config.N + 1)
    else:
        if config.N < 2:
            raise ValueError(f"domain {{1..N-1}} is empty for N={config.N}")
        values = range(1, config.N)
    count = len(values) ** config.w
    if count > cap:
        raise CapExceededError(
            f"exhaustive search over {count} schedules exceeds cap {cap}", count, cap
        )
    kernel = TransitionKernel(config) if criterion == "exact" else None
    best_n2 = None
    best_score = math.inf
    for n2 in itertools.product(values, repeat=config.w):
        schedule = _schedule_from_n2(config, n2)
        if criterion == "dvpub":
            score = dvpub(config, schedule).dvp
        elif criterion == "wtb":
            _, score = wtb_min_s(config, schedule)
        else:
            score = exact_dvp_chain(config, schedule, kernel=kernel).dvp
        if score < best_score:
            best_score = score
            best_n2 = n2
    method = {"dvpub": "e-dvpub", "wtb": "e-wtb", "exact": "opt"}[criterion]
    return SemiStaticResult(
        schedule=_schedule_from_n2(config, best_n2), method=method, score=best_score
    )


def fifty_fifty(config: ScenarioConfig) -> SemiStaticResult:
    """Queue-agnostic even split; the spare slot of an odd frame goes to the
    first link. Scored by its exact DVP."""
    n1 = ((config.N + 1) // 2,) * config.w
    schedule = Schedule(n1=n1, N=config.N)
    score = exact_dvp_chain(config, schedule).dvp
    return SemiStaticResult(schedule=schedule, method="fifty-fifty", score=score)


def wtb_r(config: ScenarioConfig) -> SemiStaticResult:
    return round_nearest(config, solve_relaxed(config))


def wtb_w(config: ScenarioConfig) -> SemiStaticResult:
    return neighbor_search(config, solve_relaxed(config), "wtb")


def wtb_d(config: ScenarioConfig) -> SemiStaticResult:
    return neighbor_search(config, solve_relaxed(config), "dvpub")


def e_wtb(config: ScenarioConfig, cap: int = EXHAUSTIVE_CAP_DEFAULT) -> SemiStaticResult:
    return exhaustive(config, "wtb", cap=cap)


def e_dvpub(config: ScenarioConfig, cap: int = EXHAUSTIVE_CAP_DEFAULT) -> SemiStaticResult:
    return exhaustive(config, "dvpub", cap=cap)


def opt(
    config: ScenarioConfig,
    cap: int = EXHAUSTIVE_CAP_DEFAULT,
    full_domain: bool = False,
) -> SemiStaticResult:
    return exhaustive(config, "exact", cap=cap, full_domain=full_domain)
