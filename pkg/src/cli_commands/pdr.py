"""Pedestrian dead reckoning baseline command."""

import click

from src.cli_commands.utils.runtime import RunConfig, console, fail, pass_run
from src.core.errors import VelonetError
from src.dataio.sequence import load_sequence
from src.odometry.pdr import PdrConfig, pdr_track
from src.odometry.trajectory import save_trajectory


@click.command(name="pdr")
@click.option("--sequence", required=True, type=click.Path(exists=True, dir_okay=False), help="Sequence CSV")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output trajectory CSV")
@click.option("--step-length", type=float, help="Metres per step [default: 0.67]")
@click.option("--threshold", "accel_peak_threshold", type=float, help="Peak threshold (m/s²) [default: 10.5]")
@click.option("--min-interval", "min_step_interval", type=float, help="Minimum step spacing (s) [default: 0.3]")
@click.option("--smoothing", "smoothing_window", type=int, help="Moving-average window (samples) [default: 15]")
@pass_run
def pdr(run: RunConfig, sequence, out, **flags):
    """Track a walk by step detection and device yaw.

    Example:
        velo pdr --sequence walk.csv --out pdr.csv
    """
    try:
        config = run.build(PdrConfig, "pdr", **flags)
        seq = load_sequence(sequence)
        trajectory = pdr_track(seq, config)
        path = save_trajectory(trajectory, out)
        run.outputs["trajectory"] = path
        steps = len(trajectory) - 1
        console.print(
            f"[bold green]✓ {steps} steps ({steps * config.step_length:.2f} m) written to {path}[/bold green]"
        )
    except (VelonetError, ValueError, OSError) as e:
        fail(e)
