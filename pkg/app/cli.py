"""
Batch command line.

    python -m app.cli <schedule|simulate|calibrate|image|budget|e2e> --config PATH
                      [--out DIR] [--seed N] [--no-calibrate]

Exit codes: 0 success, 1 config error, 2 guard validation failure,
3 runtime / numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

load_dotenv()

from app.config import settings  # noqa: E402
from app.repositories.artifact_repository import ArtifactRepository  # noqa: E402
from app.schemas.scenario import Scenario  # noqa: E402
from app.services import link_budget  # noqa: E402
from app.services.pipeline_runner import pipeline_runner  # noqa: E402
from app.services.scenario_loader import build_budget_input, config_hash, load_scenario  # noqa: E402
from app.utils.errors import ConfigError, FaaError, GuardValidationFailed  # noqa: E402

logger = logging.getLogger("app.cli")

SUBCOMMANDS = ("schedule", "simulate", "calibrate", "image", "budget", "e2e")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.cli",
        description="Frequency-as-aperture near-field FMCW simulator",
    )
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="Scenario JSON (path, or name under the scenario dir)")
    parser.add_argument("--out", default=None, help="Output directory (default: OUTPUT_DIR/<scenario name>)")
    parser.add_argument("--seed", type=int, default=None, help="Overrides the scenario seed")
    parser.add_argument("--no-calibrate", action="store_true", help="Focus with the nominal mapping")
    return parser


def _with_seed(scenario: Scenario, seed: Optional[int]) -> Scenario:
    if seed is None:
        return scenario
    if not 0 <= seed < 2**64:
        raise ConfigError(f"--seed must lie in [0, 2^64), got {seed}")
    return scenario.model_copy(update={"seed": seed})


def _run(args: argparse.Namespace) -> int:
    scenario = _with_seed(load_scenario(args.config), args.seed)
    out_dir = Path(args.out) if args.out else Path(settings.OUTPUT_DIR) / scenario.name
    calibrate = not args.no_calibrate

    if args.command == "e2e":
        summary = pipeline_runner.run_e2e(scenario, out_dir, calibrate=calibrate)
        print(f"scenario {summary.scenario}: M_eff = {summary.m_eff}, calibrated = {summary.calibrated}")
        if summary.peak_position is not None:
            print(f"peak at {tuple(round(v, 4) for v in summary.peak_position)}, "
                  f"width {summary.width_3db_m:.4f} m, PSLR {summary.pslr_db}")
        if summary.localization_error_m is not None:
            print(f"localization error {summary.localization_error_m:.4f} m")
        print(f"artifacts in {out_dir}")
        return 0

    if args.command == "budget":
        repo = ArtifactRepository(out_dir)
        report = pipeline_runner.run_budget(scenario, repo)
        repo.write_manifest(config_hash(scenario), scenario.seed, {"scenario": scenario.name})
        print(link_budget.format_budget(link_budget.budget_table(build_budget_input(scenario), report)), end="")
        return 0

    repo = ArtifactRepository(out_dir)
    try:
        if args.command == "schedule":
            result = pipeline_runner.run_schedule(scenario, repo)
            print(f"guard validation passed, margin {result.report.margin_s * 1e9:.3f} ns")
        elif args.command == "simulate":
            sim = pipeline_runner.simulate(scenario, repo)
            print(f"cube {sim.cube.shape}, {sim.usable.size} usable states")
        elif args.command == "calibrate":
            fit = pipeline_runner.calibrate(scenario, repo=repo)
            theta = fit.theta_hat
            print(f"tau0 = {theta.tau0_s * 1e12:.3f} ps, gain = {theta.gain_coeffs}, "
                  f"converged = {fit.converged} after {fit.iterations} iterations")
            if not fit.converged:
                print(f"calibration did not converge: {fit.diagnostic}", file=sys.stderr)
                return 3
        elif args.command == "image":
            result = pipeline_runner.image(scenario, calibrate=calibrate, repo=repo)
            m = result.metrics
            print(f"peak at {tuple(round(v, 4) for v in m.peak_position)}, width {m.width_3db:.4f} m, PSLR {m.pslr_db}")
    finally:
        repo.write_manifest(config_hash(scenario), scenario.seed, {"scenario": scenario.name})
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(levelname)s:%(name)s:%(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except GuardValidationFailed as e:
        print(f"error: {e} (margin {e.margin_s:.6e} s)", file=sys.stderr)
        return e.exit_code
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return e.exit_code
    except FaaError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
