"""Command-line front end: single solves and evaluations, plus parameter
sweeps emitting plot-ready CSV.

Exit codes: 0 ok, 2 usage or malformed input, 3 infeasible or cap exceeded,
4 one or more sweep cells failed.
"""
from __future__ import annotations

import argparse
import itertools
import sys
import time
from dataclasses import dataclass

from . import semistatic
from .dvp import exact_dvp_chain
from .mdp import BASELINE_KINDS, PolicyTable, value_iteration
from .model import CapExceededError, ScenarioConfig, Schedule
from .sim import SimSpec, simulate

SEMISTATIC_METHODS = ("wtb-r", "wtb-w", "wtb-d", "e-wtb", "e-dvpub", "opt", "fifty")
ALL_POLICIES = SEMISTATIC_METHODS + ("mdp", "mw", "wfq", "bp")

_SCORE_LABEL = {
    "wtb-r": "wtb",
    "wtb-w": "wtb",
    "e-wtb": "wtb",
    "wtb-d": "dvpub",
    "e-dvpub": "dvpub",
    "opt": "dvp",
    "fifty": "dvp",
}

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_CELL_FAILURES = 4


def fmt_prob(v: float) -> str:
    """10 significant digits; %g switches to scientific below 1e-4."""
    return f"{v:.10g}"


def _solve_semistatic(config: ScenarioConfig, method: str, full_domain: bool):
    if method == "wtb-r":
        return semistatic.wtb_r(config)
    if method == "wtb-w":
        return semistatic.wtb_w(config)
    if method == "wtb-d":
        return semistatic.wtb_d(config)
    if method == "e-wtb":
        return semistatic.e_wtb(config)
    if method == "e-dvpub":
        return semistatic.e_dvpub(config)
    if method == "opt":
        return semistatic.opt(config, full_domain=full_domain)
    if method == "fifty":
        return semistatic.fifty_fifty(config)
    raise ValueError(f"unknown method {method!r}")


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--N", type=int, required=True, help="slots per frame")
    parser.add_argument("--pe", type=float, required=True, help="packet error rate")
    parser.add_argument("--w", type=int, required=True, help="deadline in frames")
    parser.add_argument("--y", type=int, required=True, help="batch size in packets")
    parser.add_argument("--x1", type=int, required=True, help="initial backlog, queue 1")
    parser.add_argument("--x2", type=int, required=True, help="initial backlog, queue 2")


def _config_from(args) -> ScenarioConfig:
    return ScenarioConfig(N=args.N, p_e=args.pe, w=args.w, y=args.y, x1=args.x1, x2=args.x2)


def cmd_solve(args) -> int:
    try:
        config = _config_from(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.method == "mdp":
        table = value_iteration(config)
        text = table.to_text()
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    try:
        result = _solve_semistatic(config, args.method, args.full_domain)
    except (CapExceededError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print("n1=" + ",".join(str(v) for v in result.schedule.n1))
    print(f"{_SCORE_LABEL[args.method]}={fmt_prob(result.score)}")
    return EXIT_OK


def _policy_source(args, config: ScenarioConfig):
    sources = [s for s in (args.schedule, args.policy_file, args.policy) if s]
    if len(sources) != 1:
        raise ValueError("give exactly one of --schedule, --policy-file, --policy")
    if args.schedule:
        try:
            n1 = tuple(int(v) for v in args.schedule.split(","))
        except ValueError as exc:
            raise ValueError(f"bad schedule {args.schedule!r}: {exc}") from exc
        return Schedule(n1=n1, N=config.N)
    if args.policy_file:
        with open(args.policy_file, encoding="utf-8") as fh:
            return PolicyTable.from_text(fh.read())
    if args.policy not in BASELINE_KINDS:
        raise ValueError(f"--policy must be one of {', '.join(BASELINE_KINDS)}")
    return args.policy


def cmd_eval(args) -> int:
    try:
        config = _config_from(args)
        policy = _policy_source(args, config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.evaluator == "exact":
            result = exact_dvp_chain(config, policy)
            print(f"dvp={fmt_prob(result.dvp)}")
            print(f"method={result.method}")
        else:
            sim = simulate(config, SimSpec(args.reps, args.seed, policy))
            print(f"dvp={fmt_prob(sim.dvp_hat)}")
            print(f"ci_low={fmt_prob(sim.ci_low)}")
            print(f"ci_high={fmt_prob(sim.ci_high)}")
            print(f"reps={sim.replications}")
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


@dataclass
class SweepSpec:
    """Cross product of scenario values, the policies to run on each, and
    the evaluator settings."""

    x1: list[int]
    x2: list[int]
    w: list[int]
    N: list[int]
    pe: list[float]
    y: list[int]
    policies: list[str]
    evaluator: str = "exact"
    reps: int = 1_000_000
    seed: int = 0


def parse_sweep_file(text: str) -> SweepSpec:
    """Flat key = value syntax, commas separate list entries, # comments."""
    values: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, rhs = line.partition("=")
        key = key.strip()
        items = [v.strip() for v in rhs.split(",") if v.strip()]
        if not items:
            raise ValueError(f"line {lineno}: no values for {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = items

    known = {"x1", "x2", "w", "N", "pe", "y", "policies", "evaluator", "reps", "seed"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown keys: {', '.join(sorted(unknown))}")
    required = {"x1", "x2", "w", "N", "pe", "y", "policies"}
    missing = required - set(values)
    if missing:
        raise ValueError(f"missing keys: {', '.join(sorted(missing))}")

    policies = values["policies"]
    for p in policies:
        if p not in ALL_POLICIES:
            raise ValueError(f"unknown policy {p!r}")
    evaluator = values.get("evaluator", ["exact"])[0]
    if evaluator not in ("exact", "monte-carlo"):
        raise ValueError(f"evaluator must be exact or monte-carlo, got {evaluator!r}")
    return SweepSpec(
        x1=[int(v) for v in values["x1"]],
        x2=[int(v) for v in values["x2"]],
        w=[int(v) for v in values["w"]],
        N=[int(v) for v in values["N"]],
        pe=[float(v) for v in values["pe"]],
        y=[int(v) for v in values["y"]],
        policies=policies,
        evaluator=evaluator,
        reps=int(values.get("reps", ["1000000"])[0]),
        seed=int(values.get("seed", ["0"])[0]),
    )


def _sweep_cell(config: ScenarioConfig, policy_name: str, spec: SweepSpec, cache: dict):
    """Evaluate one (config, policy) cell; returns (dvp, ci_low, ci_high)."""
    key = (config, policy_name)
    if policy_name in ("wtb-r", "wtb-w", "wtb-d"):
        relaxed = cache.get((config, "relaxed"))
        if relaxed is None:
            relaxed = semistatic.solve_relaxed(config)
            cache[(config, "relaxed")] = relaxed
        if policy_name == "wtb-r":
            policy = semistatic.round_nearest(config, relaxed).schedule
        else:
            crit = "wtb" if policy_name == "wtb-w" else "dvpub"
            policy = semistatic.neighbor_search(config, relaxed, crit).schedule
    elif policy_name in ("e-wtb", "e-dvpub", "opt"):
        policy = _solve_semistatic(config, policy_name, False).schedule
    elif policy_name == "mdp":
        policy = value_iteration(config)
    else:
        policy = policy_name  # baseline kinds incl. fifty

    if spec.evaluator == "exact":
        res = exact_dvp_chain(config, policy)
        return res.dvp, None, None
    sim = simulate(config, SimSpec(spec.reps, spec.seed, policy))
    return sim.dvp_hat, sim.ci_low, sim.ci_high


SWEEP_HEADER = "x1,x2,w,N,pe,y,policy,dvp,ci_low,ci_high,ms"


@dataclass
class SweepRow:
    """One evaluated (config, policy) cell; failed cells carry an error
    message and an empty dvp."""

    x1: int
    x2: int
    w: int
    N: int
    pe: float
    y: int
    policy: str
    dvp: float | None
    ci_low: float | None
    ci_high: float | None
    ms: float
    error: str = ""

    def to_csv(self) -> str:
        cells = [
            str(self.x1), str(self.x2), str(self.w), str(self.N),
            f"{self.pe:g}", str(self.y), self.policy,
            "" if self.dvp is None else fmt_prob(self.dvp),
            "" if self.ci_low is None else fmt_prob(self.ci_low),
            "" if self.ci_high is None else fmt_prob(self.ci_high),
            f"{self.ms:.1f}",
        ]
        if self.error:
            cells.append(self.error.replace(",", ";").replace("\n", " "))
        return ",".join(cells)

    @classmethod
    def from_csv(cls, line: str) -> "SweepRow":
        parts = line.split(",")
        if len(parts) not in (11, 12):
            raise ValueError(f"expected 11 or 12 fields, got {len(parts)}")
        return cls(
            x1=int(parts[0]), x2=int(parts[1]), w=int(parts[2]), N=int(parts[3]),
            pe=float(parts[4]), y=int(parts[5]), policy=parts[6],
            dvp=float(parts[7]) if parts[7] else None,
            ci_low=float(parts[8]) if parts[8] else None,
            ci_high=float(parts[9]) if parts[9] else None,
            ms=float(parts[10]),
            error=parts[11] if len(parts) == 12 else "",
        )


def run_sweep(spec: SweepSpec, out) -> int:
    cells = sorted(
        itertools.product(spec.x1, spec.x2, spec.w, spec.N, spec.pe, spec.y)
    )
    out.write(SWEEP_HEADER + "\n")
    failures = 0
    cache: dict = {}  # shares one relaxed solve across a config's wtb-* rows
    for x1, x2, w, N, pe, y in cells:
        for policy_name in sorted(spec.policies):
            start = time.perf_counter()
            dvp = lo = hi = None
            error = ""
            try:
                config = ScenarioConfig(N=N, p_e=pe, w=w, y=y, x1=x1, x2=x2)
                dvp, lo, hi = _sweep_cell(config, policy_name, spec, cache=cache)
            except (ValueError, CapExceededError) as exc:
                error = str(exc)
                failures += 1
            row = SweepRow(
                x1=x1, x2=x2, w=w, N=N, pe=pe, y=y, policy=policy_name,
                dvp=dvp, ci_low=lo, ci_high=hi,
                ms=(time.perf_counter() - start) * 1e3, error=error,
            )
            out.write(row.to_csv() + "\n")
    return EXIT_CELL_FAILURES if failures else EXIT_OK


def cmd_sweep(args) -> int:
    try:
        with open(args.sweep_file, encoding="utf-8") as fh:
            spec = parse_sweep_file(fh.read())
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            return run_sweep(spec, fh)
    return run_sweep(spec, sys.stdout)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvpsched",
        description="Deadline-violation analysis and slot scheduling for a "
        "two-hop lossy wireless path.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="compute a schedule or policy table")
    _add_config_args(p_solve)
    p_solve.add_argument("--method", required=True, choices=SEMISTATIC_METHODS + ("mdp",))
    p_solve.add_argument("--out", help="write the mdp policy table here")
    p_solve.add_argument(
        "--full-domain",
        action="store_true",
        help="let opt search {0..N}^w instead of {1..N-1}^w",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_eval = sub.add_parser("eval", help="evaluate the DVP of a policy")
    _add_config_args(p_eval)
    p_eval.add_argument("--schedule", help="inline per-frame n1 values, e.g. 1,2,1")
    p_eval.add_argument("--policy-file", help="policy table written by solve --method mdp")
    p_eval.add_argument("--policy", help=f"baseline name: {', '.join(BASELINE_KINDS)}")
    p_eval.add_argument("--evaluator", choices=("exact", "monte-carlo"), default="exact")
    p_eval.add_argument("--reps", type=int, default=1_000_000)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep to CSV")
    p_sweep.add_argument("sweep_file")
    p_sweep.add_argument("--out", help="write CSV here instead of stdout")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
