"""Command-line interface for VeloNet odometry - Thin Orchestrator."""

import logging
import os
import sys
from pathlib import Path
from typing import Optional

import click

# Load .env BEFORE importing command modules so VELONET_* variables are visible
# to config resolution. Shell variables always win over .env.
from src.core.config_loader import load_config, load_environment_variables, load_overrides_file

load_environment_variables()

from src.cli_commands.utils.runtime import RunConfig  # noqa: E402
from src.cli_commands.synth import synth  # noqa: E402
from src.cli_commands.train import train  # noqa: E402
from src.cli_commands.reconstruct import reconstruct  # noqa: E402
from src.cli_commands.evaluate import evaluate_command  # noqa: E402
from src.cli_commands.pdr import pdr  # noqa: E402
from src.cli_commands.gradcheck import gradcheck  # noqa: E402

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


def get_version():
    """Get package version from installed metadata."""
    try:
        from importlib.metadata import version
        return version("velonet-odometry")
    except Exception:
        return "unknown"


def configure_logging(level: str = "WARNING", log_file: Optional[str] = None) -> None:
    """Route log records to stderr (and optionally a file); stdout stays for rich output."""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, handlers=handlers, force=True)


def resolve_log_level(flag: Optional[str], settings: dict) -> str:
    """--log-level > VELONET_LOG_LEVEL > YAML logging.level > WARNING."""
    if flag:
        return flag
    if env_level := os.getenv("VELONET_LOG_LEVEL"):
        return env_level
    section = settings.get("logging") or {}
    return str(section.get("level", "WARNING")) if isinstance(section, dict) else "WARNING"


@click.group()
@click.version_option(version=get_version(), prog_name="velo")
@click.option("--seed", type=int, default=None, help="Global RNG seed")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value settings file (overrides config.yaml)")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Logging level [default: WARNING]")
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="Also write logs to this file")
@click.pass_context
def main(ctx, seed, config_file, log_level, log_file):
    """VeloNet odometry - deep inertial odometry experiments.

    Data:
      velo synth --path line --out seq.csv      # Synthetic IMU sequence

    Network:
      velo train --train a.csv --val b.csv --out net.npz
      velo reconstruct --weights net.npz --sequence seq.csv --out pred.csv
      velo gradcheck                            # Verify gradients

    Baseline and evaluation:
      velo pdr --sequence seq.csv --out pdr.csv
      velo eval --pred pred.csv --gt seq.csv --out metrics.csv

    Use 'velo COMMAND --help' for more information on a specific command.
    """
    settings = load_config()
    configure_logging(resolve_log_level(log_level, settings), log_file)

    run = RunConfig(command=ctx.invoked_subcommand, seed=seed, settings=settings)
    if config_file:
        run.inputs["config"] = Path(config_file)
        try:
            run.overrides = load_overrides_file(Path(config_file))
        except (ValueError, OSError) as e:
            raise click.BadParameter(str(e), param_hint="--config")
    ctx.obj = run


# Register commands
main.add_command(synth)
main.add_command(train)
main.add_command(reconstruct)
main.add_command(evaluate_command)
main.add_command(pdr)
main.add_command(gradcheck)


if __name__ == "__main__":
    main()
