"""Command-line experiment runner.

``riemgossip run`` simulates one gossip variant on a scenario preset or a
data file and writes the trace CSV, a plain-text summary and optionally a
figure. ``riemgossip generate`` writes synthetic instances or ratings files,
and ``riemgossip report`` renders a figure from an existing trace CSV.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import SyntheticSpec, generate, synthetic_ratings, write_instance
from .gossip import ProtocolConfig, init_agents, parallel_rounds, run
from .ingest import load_instance, nmae, parse_ratings, partition_users, split_train_test
from .metrics import RunTrace, format_float, read_csv, write_csv

log = logging.getLogger("riemgossip")

VARIANT_NAMES = ("online", "precon-online", "parallel", "precon-parallel", "dynamic")


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    variant: str
    rho: float
    gamma0: float
    slots: int
    synthetic: SyntheticSpec | None = None
    # (n_users, n_movies, n_ratings) for a generated ratings file
    ratings: tuple[int, int, int] | None = None
    rank: int = 5
    agents: int = 6
    test_fraction: float = 0.2
    # when --gamma0 is omitted, gamma0 is capped at consensus_scale / rho so
    # the first consensus step rho * gamma_1 stays bounded for large rho
    consensus_scale: float = 100.0

    def default_gamma0(self, rho: float) -> float:
        if rho <= 0:
            return self.gamma0
        return min(self.gamma0, self.consensus_scale / rho)


def _case1(m, n):
    return SyntheticSpec(m, n, 5, 6.0, noise_std=1e-6, n_agents=6)


def _case3(m, n):
    return SyntheticSpec(m, n, 5, 6.0, noise_std=1e-6, cond=500.0, n_agents=6, sigma1=math.sqrt(m * n))


SCENARIOS = {
    "case1-small": Scenario(
        "case1-small", "500x5000, rank 5, OS 6, online gossip", "online", 1e3, 1e-2, 1000, _case1(500, 5000)
    ),
    "case2-small": Scenario(
        "case2-small", "case1-small with the parallel variant, 400 rounds", "parallel", 1e3, 1e-2, 400, _case1(500, 5000)
    ),
    "case3-small": Scenario(
        "case3-small",
        "500x2000, rank 5, condition number 500, preconditioned online gossip",
        "precon-online",
        1e3,
        1e2,
        1000,
        _case3(500, 2000),
        consensus_scale=math.inf,
    ),
    "case4": Scenario(
        "case4", "500x12000, rank 5, OS 6, online gossip", "online", 1e3, 3e-3, 1000, _case1(500, 12000)
    ),
    "case5-small": Scenario(
        "case5-small",
        "100k generated ratings (2000 users, 1000 movies), 4 agents split by user",
        "online",
        3e4,
        1e-4,
        800,
        ratings=(2000, 1000, 100_000),
        agents=4,
    ),
}

XL_SCENARIOS = {
    "case1-small": replace(SCENARIOS["case1-small"], name="case1-xl", synthetic=_case1(10_000, 100_000)),
    "case2-small": replace(SCENARIOS["case2-small"], name="case2-xl", synthetic=_case1(10_000, 100_000)),
    "case3-small": replace(SCENARIOS["case3-small"], name="case3-xl", synthetic=_case3(5_000, 50_000)),
    "case4": SCENARIOS["case4"],
    # the full ratings run needs --data pointing at a real ratings.csv
    "case5-small": replace(SCENARIOS["case5-small"], name="case5-xl", rho=1e7, ratings=None),
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riemgossip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate a gossip variant and write its trace")
    src = p.add_mutually_exclusive_group()
    src.add_argument(
        "--scenario",
        choices=sorted(SCENARIOS),
        help="preset instance and protocol settings (default: case1-small unless --data is given)",
    )
    src.add_argument("--data", type=Path, help="ratings CSV or sparse instance file")
    p.add_argument("--xl", action="store_true", help="use the full-size version of the scenario")
    p.add_argument("--variant", choices=VARIANT_NAMES, help="gossip variant (default: from scenario, else online)")
    p.add_argument("--agents", type=int, help="number of agents N (default: from scenario, else 4)")
    p.add_argument("--rank", type=int, help="subspace rank r (default: scenario or file header, else 5)")
    p.add_argument("--rho", type=float, help="consensus weight (default: from scenario, else 1e3)")
    p.add_argument(
        "--gamma0",
        type=float,
        help="initial stepsize; gamma_t = gamma0 / t (default: scenario value capped at 100/rho, else 1e-3)",
    )
    p.add_argument(
        "--gamma0-grid",
        help="comma-separated gamma0 candidates; each is run and the best final error kept (overrides --gamma0)",
    )
    p.add_argument("--reg", type=float, help="ridge weight for the inner solves (default: 1e-8 * mean squared entry)")
    p.add_argument("--slots", type=int, help="time slots, rounds for parallel variants (default: from scenario, else 1000)")
    p.add_argument("--seed", type=int, default=0, help="seeds data generation, initialization and sampling (default: 0)")
    p.add_argument("--trace-every", type=int, default=10, help="record every k-th slot (default: 10)")
    p.add_argument("--test-fraction", type=float, help="held-out fraction for ratings files (default: 0.2)")
    p.add_argument("--out", type=Path, default=Path("trace.csv"), help="trace CSV path (default: trace.csv)")
    p.add_argument("--summary", type=Path, help="summary text path (default: OUT with .summary.txt)")
    p.add_argument("--figure", type=Path, help="also render the trace to this image file (default: none)")

    g = sub.add_parser("generate", parents=[common], help="write a synthetic instance or ratings file")
    g.add_argument("--out", type=Path, required=True, help="output path")
    g.add_argument("--ratings", action="store_true", help="write a ratings CSV instead of an instance file")
    g.add_argument("--m", type=int, default=500, help="rows (default: 500)")
    g.add_argument("--n", type=int, default=5000, help="columns (default: 5000)")
    g.add_argument("--rank", type=int, default=5, help="rank (default: 5)")
    g.add_argument("--os", type=float, default=6.0, help="over-sampling ratio (default: 6)")
    g.add_argument("--cond", type=float, help="condition number (default: Gaussian factors)")
    g.add_argument("--noise", type=float, default=1e-6, help="training noise std (default: 1e-6)")
    g.add_argument("--agents", type=int, default=6, help="agents in the column split (default: 6)")
    g.add_argument("--test-fraction", type=float, default=0.1, help="test entries per train entry (default: 0.1)")
    g.add_argument("--users", type=int, default=2000, help="ratings: number of users (default: 2000)")
    g.add_argument("--movies", type=int, default=1000, help="ratings: number of movies (default: 1000)")
    g.add_argument("--count", type=int, default=100_000, help="ratings: number of ratings (default: 100000)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")

    r = sub.add_parser("report", parents=[common], help="render a figure from a trace CSV")
    r.add_argument("trace", type=Path, help="trace CSV written by run")
    r.add_argument("--figure", type=Path, help="image path (default: TRACE with .png)")
    r.add_argument("--title", help="figure title")
    return parser


def _seeds(seed: int) -> tuple[int, int, int]:
    data, init, protocol = np.random.SeedSequence(seed).generate_state(3)
    return int(data), int(init), int(protocol)


@dataclass
class Problem:
    blocks: list
    heldout: list
    rank: int
    label: str
    ratings: bool = False


def load_problem(args, scenario: Scenario | None, data_seed: int) -> Problem:
    if args.data is not None:
        n_agents = args.agents or 4
        fraction = 0.2 if args.test_fraction is None else args.test_fraction
        blocks, heldout, file_rank = load_instance(args.data, n_agents, fraction, data_seed)
        if file_rank is not None and len(blocks) != n_agents and args.agents:
            raise UsageError(f"{args.data} is split among {len(blocks)} agents, not {args.agents}")
        rank = args.rank or file_rank or 5
        return Problem(blocks, heldout, rank, str(args.data), ratings=file_rank is None)

    if scenario.synthetic is not None:
        spec = replace(
            scenario.synthetic,
            n_agents=args.agents or scenario.agents,
            r=args.rank or scenario.synthetic.r,
            seed=data_seed,
        )
        blocks, heldout, rank = generate(spec)
        return Problem(blocks, heldout, rank, scenario.name)

    if scenario.ratings is None:
        raise UsageError(f"scenario {scenario.name} needs --data pointing at a ratings file")
    n_users, n_movies, n_ratings = scenario.ratings
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "ratings.csv"
        synthetic_ratings(path, n_users, n_movies, n_ratings, rank=5, seed=data_seed)
        obs = parse_ratings(path).obs
    fraction = scenario.test_fraction if args.test_fraction is None else args.test_fraction
    train, test = split_train_test(obs, fraction, data_seed)
    blocks, heldout = partition_users(train, test, args.agents or scenario.agents)
    return Problem(blocks, heldout, args.rank or scenario.rank, scenario.name, ratings=True)


def _score(trace: RunTrace) -> float:
    # held-out error when available, train cost otherwise
    rmse = trace.rmse()[-1]
    if np.all(np.isfinite(rmse)):
        return float(np.mean(rmse))
    return float(np.mean(trace.costs()[-1]))


def execute(args) -> int:
    scenario = None
    if args.data is None:
        table = XL_SCENARIOS if args.xl else SCENARIOS
        scenario = table[args.scenario or "case1-small"]
    elif args.xl:
        scenario = XL_SCENARIOS["case5-small"]

    variant = args.variant or (scenario.variant if scenario else "online")
    rho = args.rho if args.rho is not None else (scenario.rho if scenario else 1e3)
    slots = args.slots or (scenario.slots if scenario else 1000)
    if args.gamma0_grid:
        try:
            grid = [float(x) for x in args.gamma0_grid.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad --gamma0-grid {args.gamma0_grid!r}") from None
        if not grid:
            raise UsageError("--gamma0-grid is empty")
    elif args.gamma0 is not None:
        grid = [args.gamma0]
    else:
        grid = [scenario.default_gamma0(rho) if scenario else 1e-3]

    data_seed, init_seed, run_seed = _seeds(args.seed)
    problem = load_problem(args, scenario if args.data is None else None, data_seed)

    n_agents = len(problem.blocks)
    if variant.endswith("parallel"):
        rounds = parallel_rounds(n_agents)
    else:
        rounds = None

    start = time.perf_counter()
    best = None
    for gamma0 in grid:
        config = ProtocolConfig(
            rho=rho,
            gamma0=gamma0,
            reg=args.reg,
            max_slots=slots,
            variant=variant.replace("-", "_"),
            seed=run_seed,
            trace_every=args.trace_every,
        )
        agents = init_agents(problem.blocks, problem.heldout, problem.rank, rng=init_seed)
        log.info("running %s on %s with gamma0=%g", variant, problem.label, gamma0)
        trace, final = run(agents, config)
        score = _score(trace)
        if len(grid) > 1:
            log.info("gamma0=%g: final score %.6g", gamma0, score)
        if best is None or score < best[0]:
            best = (score, gamma0, trace, final)
    wall = time.perf_counter() - start
    _, gamma0, trace, final = best

    write_csv(trace, args.out)
    summary_path = args.summary or args.out.with_suffix(".summary.txt")
    summary = summarize(trace, problem, variant, rho, gamma0, grid, slots, args.seed, rounds, wall)
    summary_path.write_text(summary)
    if args.figure is not None:
        from .plotting import render_trace

        render_trace(trace, args.figure, title=f"{problem.label}: {variant}, rho={rho:g}")
    print(summary, end="")
    return 0


def summarize(trace, problem, variant, rho, gamma0, grid, slots, seed, rounds, wall) -> str:
    m = problem.blocks[0].n_rows
    n = sum(b.n_cols for b in problem.blocks)
    last = trace.rows[-1]
    lines = [
        f"data: {problem.label}",
        f"size: {m} x {n}, rank {problem.rank}, {sum(len(b) for b in problem.blocks)} training entries",
        f"variant: {variant}",
        f"agents: {trace.n_agents}",
        f"rho: {rho:g}",
        f"gamma0: {gamma0:g}" + (f" (chosen from {', '.join(f'{g:g}' for g in grid)})" if len(grid) > 1 else ""),
        f"slots: {slots}",
        f"seed: {seed}",
    ]
    if rounds is not None:
        fmt = lambda rnd: "{" + ", ".join(f"({i},{k})" for i, k in rnd) + "}"
        lines.append(f"rounds: {fmt(rounds[0])} {fmt(rounds[1])}")
    lines.append("final_cost: " + " ".join(format_float(c) for c in last.costs))
    lines.append("initial_cost: " + " ".join(format_float(c) for c in trace.rows[0].costs))
    lines.append(
        "final_distance: "
        + " ".join(f"d({i},{k})={format_float(d) or 'undefined'}" for (i, k), d in zip(trace.pairs, last.distances))
    )
    if all(v is not None for v in last.rmse):
        lines.append("final_test_rmse: " + " ".join(format_float(v) for v in last.rmse))
        lines.append("final_test_mae: " + " ".join(format_float(v) for v in last.mae))
        if problem.ratings:
            lines.append("final_test_nmae: " + " ".join(format_float(nmae(v)) for v in last.mae))
    lines.append("update_counts: " + " ".join(str(c) for c in trace.update_counts))
    lines.append(f"skipped_slots: {len(trace.skipped_slots)}")
    lines.append(f"wall_time_s: {wall:.2f}")
    return "\n".join(lines) + "\n"


def generate_cmd(args) -> int:
    if args.ratings:
        synthetic_ratings(args.out, args.users, args.movies, args.count, seed=args.seed)
        print(f"wrote {args.count} ratings to {args.out}")
        return 0
    spec = SyntheticSpec(
        args.m,
        args.n,
        args.rank,
        args.os,
        noise_std=args.noise,
        cond=args.cond,
        test_fraction=args.test_fraction,
        n_agents=args.agents,
        seed=args.seed,
    )
    inst = generate(spec)
    write_instance(args.out, inst.blocks, inst.heldout, inst.rank)
    print(f"wrote {args.m}x{args.n} rank-{args.rank} instance for {args.agents} agents to {args.out}")
    return 0


def report_cmd(args) -> int:
    from .plotting import render_trace

    trace = read_csv(args.trace)
    if not trace.rows:
        raise UsageError(f"{args.trace} has no rows")
    path = render_trace(trace, args.figure or args.trace.with_suffix(".png"), title=args.title)
    print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    commands = {"run": execute, "generate": generate_cmd, "report": report_cmd}
    try:
        return commands[args.command](args)
    except (UsageError, ValueError, OSError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"riemgossip {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
