"""
CLI entrypoint for generating economies, solving them, running oligarch
scenarios and Monte Carlo sweeps, and drawing the report figures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from config import ConfigError, RunConfig, load_config, with_overrides
from economy import DomainError, InvalidEconomyError, require_valid
from economy_store import (
    EconomyFormatError,
    load_economy,
    load_oligarch_members,
    save_economy,
    save_scenario_result,
    save_solution,
)
from experiments import run_monte_carlo, standard_grids
from generator import NoFeasibleOligarch, RejectionExhausted, generate_economy, generate_oligarch
from paths import GRIDS_FILENAME, RECORDS_FILENAME, get_output_dir
from production_graph import InvalidOligarchError, MalformedEconomyError, make_oligarch
from report import ReportFormatError, emit_csv, load_grids, save_grids, write_report
from scenario import ADAPTATION_STAGE, StageFailure, run_scenario
from solver import solve_global_optimum
from util import parse_fraction, parse_fraction_list, parse_int_list, parse_members

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_SOLVER = 3

logger = logging.getLogger("olichain")


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, default=None, help="Flow lower bound ε (default 1e-6).")
    parser.add_argument("--kkt-tol", type=float, default=None, help="KKT residual tolerance (default 1e-6).")
    parser.add_argument("--max-iterations", type=int, default=None, help="Newton step cap per solve (default 500).")
    parser.add_argument(
        "--cap-in-adaptation", action="store_true", default=None,
        help="Keep the capture caps in force while the economy adapts.",
    )


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file with generator/solver/experiment sections.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log solver progress.")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="olichain",
        description="Oligarchs in production-chain economies: optimal plans, capture scenarios and Monte Carlo sweeps.",
    )
    sub = parser.add_subparsers(dest="command", parser_class=CliParser)
    sub.required = True

    gen = sub.add_parser("gen", help="Generate a synthetic economy.")
    gen.add_argument("--seed", type=int, default=0, help="Seed for the economy draw (default 0).")
    gen.add_argument("--n-companies", type=int, default=None, help="Number of companies |M| (default 25).")
    gen.add_argument("--n-raw", type=int, default=None, help="Number of raw resources |N| (default 2).")
    gen.add_argument("--min-graph-depth", type=int, default=None, help="Minimum production-graph depth (default 5).")
    gen.add_argument("--max-attempts", type=int, default=None, help="Rejection-sampling cap (default 10000).")
    gen.add_argument("-o", "--output", type=Path, default=Path("economy.json"), help="Economy JSON to write (default economy.json).")
    _add_common_flags(gen)

    solve = sub.add_parser("solve", help="Solve the GDP-maximizing plan of an economy.")
    solve.add_argument("economy", type=Path, help="Economy JSON file.")
    solve.add_argument("--members", type=str, default=None, help="Oligarch companies, e.g. 3,4,7; the adapted plan is written.")
    solve.add_argument("--gamma", type=str, default="1", help="Capture power when --members is given (default 1).")
    solve.add_argument("-o", "--output", type=Path, default=Path("plan.json"), help="PlanSolution JSON to write (default plan.json).")
    _add_solver_flags(solve)
    _add_common_flags(solve)

    scenario = sub.add_parser("scenario", help="Run the three-stage oligarch scenario.")
    scenario.add_argument("--economy", type=Path, required=True, help="Economy JSON file.")
    scenario.add_argument("--members", type=str, default=None, help="Oligarch companies, e.g. 3,4,7.")
    scenario.add_argument("--oligarch", type=Path, default=None, help="Oligarch JSON file with a 'members' list.")
    scenario.add_argument("--size", type=int, default=None, help="Generate an oligarch of this size.")
    scenario.add_argument("--depth", type=int, default=None, help="Depth of the generated oligarch.")
    scenario.add_argument("--seed", type=int, default=0, help="Seed for oligarch generation (default 0).")
    scenario.add_argument("--gamma", type=str, default="1", help="Capture power γ in [0, 1], e.g. 0.5 or 1/2 (default 1).")
    scenario.add_argument("-o", "--output", type=Path, default=Path("scenario.json"), help="ScenarioResult JSON to write (default scenario.json).")
    _add_solver_flags(scenario)
    _add_common_flags(scenario)

    mc = sub.add_parser("mc", help="Run the Monte Carlo experiment.")
    mc.add_argument("--replications", type=int, default=None, help="Number of economies L (default 1000).")
    mc.add_argument("--seed", type=int, default=None, help="Master seed (default 0).")
    mc.add_argument("--workers", type=int, default=None, help="Worker processes (default 1).")
    mc.add_argument("--depths", type=str, default=None, help="Oligarch depths, e.g. 1-5 (default 1-5).")
    mc.add_argument("--sizes", type=str, default=None, help="Oligarch sizes, e.g. 1,5,10-12 (default 1..|M|-depth).")
    mc.add_argument("--gammas", type=str, default=None, help="Capture powers (default 0,1/4,1/2,3/4,1).")
    mc.add_argument("--n-companies", type=int, default=None, help="Number of companies |M| (default 25).")
    mc.add_argument("-o", "--output", type=Path, default=Path("results"), help="Directory for records.csv and grids.json (default results).")
    _add_solver_flags(mc)
    _add_common_flags(mc)

    report = sub.add_parser("report", help="Draw figures and CSV tables from grids.json.")
    report.add_argument("grids", type=Path, nargs="?", default=Path("results") / GRIDS_FILENAME, help="Grids JSON file (default results/grids.json).")
    report.add_argument("-o", "--output", type=Path, default=None, help="Directory for figures (default: next to the grids file).")
    _add_common_flags(report)
    return parser


def _configure_logging(args) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(message)s")
    logger.setLevel(level)


def _solver_settings(args, run_config):
    return with_overrides(
        run_config.solver,
        epsilon=args.epsilon,
        kkt_tolerance=args.kkt_tol,
        max_iterations=args.max_iterations,
        cap_in_adaptation=args.cap_in_adaptation,
    )


def _solver_log(args):
    return logger.debug if args.verbose else None


def _parse_gamma(text: str) -> float:
    try:
        gamma = parse_fraction(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not 0 <= gamma <= 1:
        raise UsageError(f"gamma must be in [0, 1], got {text}")
    return gamma


def cmd_gen(args) -> int:
    run_config = load_config(args.config)
    generator = with_overrides(
        run_config.generator,
        n_companies=args.n_companies,
        n_raw=args.n_raw,
        min_graph_depth=args.min_graph_depth,
        max_attempts=args.max_attempts,
    )
    economy = generate_economy(generator, args.seed)
    save_economy(economy, args.output)
    logger.info(f"Wrote economy with {economy.n_goods} goods to {args.output}")
    return EXIT_OK


def cmd_solve(args) -> int:
    run_config = load_config(args.config)
    settings = _solver_settings(args, run_config)
    economy = load_economy(args.economy)
    require_valid(economy)
    if args.members:
        oligarch = make_oligarch(economy, parse_members(args.members))
        result = run_scenario(economy, oligarch, _parse_gamma(args.gamma), settings, log=logger.info)
        solution = result.stages[ADAPTATION_STAGE]
    else:
        solution = solve_global_optimum(economy, settings, log=_solver_log(args))
    save_solution(solution, args.output)
    logger.info(f"{solution.status.value}: objective {solution.objective:.4f}, wrote {args.output}")
    if not solution.optimal:
        logger.error(f"solver did not converge ({solution.status.value})")
        return EXIT_SOLVER
    return EXIT_OK


def _scenario_oligarch(args, economy):
    sources = [args.members is not None, args.oligarch is not None, args.size is not None]
    if sum(sources) != 1:
        raise UsageError("give exactly one of --members, --oligarch or --size/--depth")
    if args.members is not None:
        return make_oligarch(economy, parse_members(args.members))
    if args.oligarch is not None:
        return make_oligarch(economy, load_oligarch_members(args.oligarch))
    if args.depth is None:
        raise UsageError("--size needs --depth")
    return generate_oligarch(economy, args.size, args.depth, args.seed)


def cmd_scenario(args) -> int:
    run_config = load_config(args.config)
    settings = _solver_settings(args, run_config)
    gamma = _parse_gamma(args.gamma)
    economy = load_economy(args.economy)
    require_valid(economy)
    oligarch = _scenario_oligarch(args, economy)
    result = run_scenario(economy, oligarch, gamma, settings, log=logger.info)
    save_scenario_result(result, args.output)
    ratio = "undefined" if result.inefficiency_ratio is None else f"{result.inefficiency_ratio:.4f}"
    logger.info(
        f"final GDP {result.final_gdp:.4f} of {result.psi_star:.4f} "
        f"(relative {result.relative_gdp:.4f}), inefficiency {ratio}; wrote {args.output}"
    )
    return EXIT_OK


def cmd_mc(args) -> int:
    run_config = load_config(args.config)
    settings = _solver_settings(args, run_config)
    generator = with_overrides(run_config.generator, n_companies=args.n_companies)
    run_config = RunConfig(generator=generator, solver=settings, experiment=run_config.experiment)
    try:
        depths = parse_int_list(args.depths) if args.depths else None
        sizes = parse_int_list(args.sizes) if args.sizes else None
        gammas = parse_fraction_list(args.gammas) if args.gammas else None
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    config = run_config.experiment_config(
        replications=args.replications,
        master_seed=args.seed,
        workers=args.workers,
        depths=depths,
        sizes=sizes,
        gammas=gammas,
    )

    output_dir = get_output_dir(args.output)
    logger.info(
        f"Running {config.replications} replications, depths {list(config.depths)}, "
        f"gammas {list(config.gammas)}, {config.workers} worker(s)"
    )
    records = run_monte_carlo(config, log=logger.info)
    written = emit_csv(records, output_dir / RECORDS_FILENAME)
    grids = standard_grids(records, config)
    save_grids(grids, output_dir / GRIDS_FILENAME)
    failed = sum(1 for r in records if r.feasible and not r.solved)
    logger.info(f"Wrote {written.items} records to {written.path} (sha256 {written.sha256[:12]})")
    if failed:
        logger.warning(f"{failed} scenario(s) did not converge; see the status column")
    return EXIT_OK


def cmd_report(args) -> int:
    grids = load_grids(args.grids)
    output_dir = get_output_dir(args.output if args.output is not None else args.grids.parent)
    write_report(grids, output_dir, log=logger.info)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "scenario": cmd_scenario,
    "mc": cmd_mc,
    "report": cmd_report,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_USAGE
    except FileNotFoundError as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_USAGE
    except StageFailure as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_SOLVER
    except (
        InvalidEconomyError,
        InvalidOligarchError,
        MalformedEconomyError,
        DomainError,
        EconomyFormatError,
        ReportFormatError,
        ConfigError,
        RejectionExhausted,
        NoFeasibleOligarch,
    ) as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_INVALID
    except ValueError as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
