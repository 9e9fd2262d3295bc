"""Semi-static schedule computation: relaxed solve, roundings, exhaustive."""
import itertools

import numpy as np
import pytest

from dvpsched import (
    CapExceededError,
    RelaxedSchedule,
    ScenarioConfig,
    Schedule,
    TransitionKernel,
    dvpub,
    e_dvpub,
    exact_dvp_chain,
    exhaustive,
    fifty_fifty,
    neighbor_search,
    opt,
    round_nearest,
    solve_relaxed,
    wtb,
    wtb_min_s,
    wtb_r,
    wtb_w,
)
from dvpsched.dvp import wtb_gradient

# frozen via the exact chain at (y=1, x1=1, x2=1, N=4, w=4, p_e=0.2)
GOLDEN_CFG = ScenarioConfig(N=4, p_e=0.2, w=4, y=1, x1=1, x2=1)
GOLDEN_OPT_DVP = 0.0016187123630059252
GOLDEN_EDVPUB_DVP = 0.0016187123630059252
GOLDEN_WTBW_DVP = 0.0019652625367028165


def fake_relaxed(cfg, n2):
    s, obj = wtb_min_s(cfg, list(n2))
    return RelaxedSchedule(n2=tuple(float(v) for v in n2), s=s, objective=obj)


def first_order_certificate(cfg, relaxed, tol=1e-6):
    """Interior coordinates need a near-zero derivative; coordinates pinned
    at one box face need the derivative pointing out of the box. A
    degenerate box (N=2) pins both faces at once and certifies trivially."""
    lo, hi = 1.0, float(cfg.N - 1)
    if lo == hi:
        return True
    grad = wtb_gradient(cfg, relaxed.n2, relaxed.s.s)
    for xi, gi in zip(relaxed.n2, grad):
        at_lo = xi <= lo + 1e-9
        at_hi = xi >= hi - 1e-9
        if not at_lo and not at_hi and abs(gi) > tol:
            return False
        if at_lo and gi < -tol:
            return False
        if at_hi and gi > tol:
            return False
    return True


class TestSolveRelaxed:
    def test_requires_nonempty_box(self):
        with pytest.raises(ValueError):
            solve_relaxed(ScenarioConfig(N=1, p_e=0.2, w=2, y=1, x1=0, x2=0))

    def test_first_order_optimality(self):
        for cfg in (
            ScenarioConfig(N=4, p_e=0.2, w=3, y=1, x1=1, x2=1),
            ScenarioConfig(N=5, p_e=0.33, w=4, y=1, x1=2, x2=0),
            ScenarioConfig(N=6, p_e=0.4, w=6, y=1, x1=1, x2=1),
            ScenarioConfig(N=3, p_e=0.2, w=2, y=1, x1=1, x2=1),  # symmetric backlogs
        ):
            relaxed = solve_relaxed(cfg)
            assert first_order_certificate(cfg, relaxed)

    def test_single_frame_matches_grid_search(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=1, y=1, x1=0, x2=0)
        relaxed = solve_relaxed(cfg)
        grid = np.arange(1.0, 3.0 + 1e-12, 1e-3)
        values = [wtb_min_s(cfg, [g])[1] for g in grid]
        assert abs(relaxed.n2[0] - grid[int(np.argmin(values))]) <= 1e-2

    def test_descends_from_uniform_start(self):
        for cfg in (
            ScenarioConfig(N=4, p_e=0.33, w=4, y=1, x1=1, x2=2),
            ScenarioConfig(N=5, p_e=0.4, w=3, y=2, x1=0, x2=1),
        ):
            relaxed = solve_relaxed(cfg)
            _, uniform_val = wtb_min_s(cfg, [cfg.N / 2.0] * cfg.w)
            assert relaxed.objective <= uniform_val + 1e-12

    def test_objective_consistent_with_wtb(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=3, y=1, x1=1, x2=1)
        relaxed = solve_relaxed(cfg)
        assert relaxed.objective == pytest.approx(
            wtb(cfg, list(relaxed.n2), relaxed.s), abs=1e-9
        )

    def test_relaxation_dominates_integer_optimum(self):
        cfg = ScenarioConfig(N=4, p_e=0.33, w=3, y=1, x1=1, x2=0)
        relaxed = solve_relaxed(cfg)
        best_integer = min(
            wtb_min_s(cfg, list(n2))[1]
            for n2 in itertools.product(range(1, cfg.N), repeat=cfg.w)
        )
        assert relaxed.objective <= best_integer + 1e-9

    def test_degenerate_box(self):
        cfg = ScenarioConfig(N=2, p_e=0.3, w=3, y=1, x1=0, x2=0)
        relaxed = solve_relaxed(cfg)
        assert relaxed.n2 == (1.0, 1.0, 1.0)


class TestRoundNearest:
    def test_nearest_integer(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=2, y=1, x1=0, x2=0)
        res = round_nearest(cfg, fake_relaxed(cfg, (1.2, 2.7)))
        assert res.schedule.n2 == (1, 3)
        assert res.method == "wtb-r"

    def test_clamps_into_box(self):
        cfg = ScenarioConfig(N=3, p_e=0.2, w=2, y=1, x1=0, x2=0)
        res = round_nearest(cfg, fake_relaxed(cfg, (0.9999, 2.0)))
        assert res.schedule.n2[0] == 1

    def test_half_rounds_up(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=1, y=1, x1=0, x2=0)
        res = round_nearest(cfg, fake_relaxed(cfg, (1.5,)))
        assert res.schedule.n2 == (2,)


class TestNeighborSearch:
    def test_integer_relaxed_is_identity(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=3, y=1, x1=0, x2=0)
        res = neighbor_search(cfg, fake_relaxed(cfg, (2.0, 1.0, 3.0)), "wtb")
        assert res.schedule.n2 == (2, 1, 3)

    def test_degenerate_box_single_point(self):
        cfg = ScenarioConfig(N=2, p_e=0.5, w=2, y=1, x1=0, x2=0)
        relaxed = solve_relaxed(cfg)
        for crit in ("dvpub", "wtb"):
            res = neighbor_search(cfg, relaxed, crit)
            assert res.schedule.n2 == (1, 1)

    def test_methods_labelled_by_criterion(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=2, y=1, x1=1, x2=0)
        relaxed = solve_relaxed(cfg)
        assert neighbor_search(cfg, relaxed, "wtb").method == "wtb-w"
        assert neighbor_search(cfg, relaxed, "dvpub").method == "wtb-d"

    def test_winner_scored_by_criterion(self):
        cfg = ScenarioConfig(N=5, p_e=0.33, w=3, y=1, x1=1, x2=1)
        relaxed = solve_relaxed(cfg)
        res = neighbor_search(cfg, relaxed, "dvpub")
        assert res.score == pytest.approx(dvpub(cfg, res.schedule).dvp, abs=1e-12)

    def test_width_cap(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=25, y=1, x1=0, x2=0)
        relaxed = fake_relaxed(cfg, (1.5,) * 25)
        with pytest.raises(CapExceededError):
            neighbor_search(cfg, relaxed, "wtb")

    def test_wtb_w_usually_beats_wtb_r(self):
        # refined rounding should win on exact DVP for most instances
        rng = np.random.default_rng(99)
        wins = 0
        for _ in range(100):
            cfg = ScenarioConfig(
                N=int(rng.integers(3, 6)),
                p_e=float(rng.choice([0.2, 0.33, 0.4, 0.5])),
                w=int(rng.integers(2, 5)),
                y=int(rng.integers(1, 3)),
                x1=int(rng.integers(0, 3)),
                x2=int(rng.integers(0, 3)),
            )
            kern = TransitionKernel(cfg)
            relaxed = solve_relaxed(cfg)
            dv_w = exact_dvp_chain(
                cfg, neighbor_search(cfg, relaxed, "wtb").schedule, kernel=kern
            ).dvp
            dv_r = exact_dvp_chain(
                cfg, round_nearest(cfg, relaxed).schedule, kernel=kern
            ).dvp
            if dv_w <= dv_r + 1e-15:
                wins += 1
        assert wins >= 60


class TestExhaustive:
    def test_single_frame_matches_manual_argmin(self):
        cfg = ScenarioConfig(N=4, p_e=0.3, w=1, y=1, x1=0, x2=1)
        res = exhaustive(cfg, "exact")
        manual = min(
            (exact_dvp_chain(cfg, Schedule(n1=(cfg.N - v,), N=cfg.N)).dvp, v)
            for v in range(1, cfg.N)
        )
        assert res.schedule.n2 == (manual[1],)
        assert res.score == pytest.approx(manual[0], abs=1e-12)

    def test_opt_dominates_e_dvpub_on_exact_dvp(self):
        cfg = ScenarioConfig(N=4, p_e=0.33, w=3, y=1, x1=1, x2=1)
        kern = TransitionKernel(cfg)
        dv_opt = exact_dvp_chain(cfg, opt(cfg).schedule, kernel=kern).dvp
        dv_edv = exact_dvp_chain(cfg, e_dvpub(cfg).schedule, kernel=kern).dvp
        assert dv_opt <= dv_edv + 1e-15

    def test_golden_values(self):
        kern = TransitionKernel(GOLDEN_CFG)
        assert exact_dvp_chain(
            GOLDEN_CFG, opt(GOLDEN_CFG).schedule, kernel=kern
        ).dvp == pytest.approx(GOLDEN_OPT_DVP, rel=1e-10)
        assert exact_dvp_chain(
            GOLDEN_CFG, e_dvpub(GOLDEN_CFG).schedule, kernel=kern
        ).dvp == pytest.approx(GOLDEN_EDVPUB_DVP, rel=1e-10)
        assert exact_dvp_chain(
            GOLDEN_CFG, wtb_w(GOLDEN_CFG).schedule, kernel=kern
        ).dvp == pytest.approx(GOLDEN_WTBW_DVP, rel=1e-10)

    def test_argmin_certificate_by_rescan(self):
        cfg = ScenarioConfig(N=4, p_e=0.4, w=3, y=1, x1=1, x2=0)
        best_wtb = exhaustive(cfg, "wtb").score
        best_ub = exhaustive(cfg, "dvpub").score
        rng = np.random.default_rng(4)
        for _ in range(100):
            n2 = tuple(int(v) for v in rng.integers(1, cfg.N, size=cfg.w))
            sched = Schedule(n1=tuple(cfg.N - v for v in n2), N=cfg.N)
            assert best_wtb <= wtb_min_s(cfg, sched)[1] + 1e-9
            assert best_ub <= dvpub(cfg, sched).dvp + 1e-12

    def test_cap_refusal_reports_count(self):
        cfg = ScenarioConfig(N=12, p_e=0.2, w=8, y=1, x1=0, x2=0)
        with pytest.raises(CapExceededError) as exc:
            exhaustive(cfg, "dvpub")
        assert exc.value.estimate == 11**8

    def test_full_domain_flag(self):
        cfg = ScenarioConfig(N=2, p_e=0.4, w=2, y=1, x1=0, x2=0)
        wide = opt(cfg, full_domain=True)
        assert all(0 <= v <= cfg.N for v in wide.schedule.n1)
        narrow = opt(cfg)
        assert wide.score <= narrow.score + 1e-15

    def test_tie_break_lexicographic(self):
        # on a dead channel every schedule scores DVP = 1
        cfg = ScenarioConfig(N=3, p_e=1.0, w=2, y=1, x1=0, x2=0)
        assert opt(cfg).schedule.n2 == (1, 1)


class TestFiftyFifty:
    def test_even_frame(self):
        cfg = ScenarioConfig(N=4, p_e=0.2, w=3, y=1, x1=0, x2=0)
        assert fifty_fifty(cfg).schedule.n1 == (2, 2, 2)

    def test_odd_frame_extra_slot_upstream(self):
        cfg = ScenarioConfig(N=5, p_e=0.2, w=2, y=1, x1=0, x2=0)
        res = fifty_fifty(cfg)
        assert res.schedule.n1 == (3, 3)
        assert res.schedule.n2 == (2, 2)

    def test_minimal_frame(self):
        cfg = ScenarioConfig(N=2, p_e=0.2, w=3, y=1, x1=0, x2=0)
        assert fifty_fifty(cfg).schedule.n1 == (1, 1, 1)


class TestConvenienceWrappers:
    def test_wtb_r_runs(self):
        res = wtb_r(ScenarioConfig(N=4, p_e=0.2, w=3, y=1, x1=1, x2=1))
        assert res.method == "wtb-r"
        assert all(1 <= v <= 3 for v in res.schedule.n2)
        assert res.relaxed is not None

    def test_score_types(self):
        cfg = ScenarioConfig(N=3, p_e=0.33, w=2, y=1, x1=0, x2=1)
        assert wtb_w(cfg).score == pytest.approx(
            wtb_min_s(cfg, wtb_w(cfg).schedule)[1], abs=1e-9
        )
