"""Trajectory reconstruction command."""

import click

from src.cli_commands.utils.runtime import RunConfig, console, fail, pass_run
from src.core.errors import VelonetError
from src.dataio.sequence import load_sequence
from src.nn.weights import load_weights
from src.odometry.integration import reconstruct_from_network
from src.odometry.trajectory import save_trajectory


@click.command(name="reconstruct")
@click.option("--weights", required=True, type=click.Path(exists=True, dir_okay=False), help="Weight file")
@click.option("--sequence", required=True, type=click.Path(exists=True, dir_okay=False), help="Sequence CSV")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output trajectory CSV")
@click.option("--stride", type=int, help="Window stride; below N averages overlapping windows [default: N]")
@click.option("--batch-size", type=int, default=512, show_default=True, help="Inference batch size")
@pass_run
def reconstruct(run: RunConfig, weights, sequence, out, stride, batch_size):
    """Predict per-window velocities and integrate them into a trajectory.

    The trajectory starts at the sequence's first ground-truth position when
    present, otherwise at (0, 0).
    """
    try:
        net = load_weights(weights)
        seq = load_sequence(sequence)
        trajectory = reconstruct_from_network(net, seq, stride=stride, batch_size=batch_size)
        path = save_trajectory(trajectory, out)
        run.outputs["trajectory"] = path
        end_x, end_y = trajectory.endpoint
        console.print(
            f"[bold green]✓ Wrote {len(trajectory)} points to {path}[/bold green] "
            f"[dim](end ({end_x:.2f}, {end_y:.2f}) m, length {trajectory.length():.2f} m)[/dim]"
        )
    except (VelonetError, ValueError, OSError) as e:
        fail(e)
