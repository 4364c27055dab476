"""Synthetic sequence generation command."""

import click

from src.cli_commands.utils.runtime import RunConfig, console, fail, pass_run, seed_option
from src.core.errors import VelonetError
from src.dataio.sequence import save_sequence
from src.dataio.synthetic import PATH_TYPES, SyntheticConfig, synthesize


@click.command(name="synth")
@click.option("--path", "path_type", type=click.Choice(PATH_TYPES), help="Path shape")
@click.option("--speed", type=float, help="Walking speed (m/s)")
@click.option("--duration", type=float, help="Sequence length (s)")
@click.option("--rate", "sample_rate", type=float, help="Sample rate (Hz)")
@click.option("--heading", type=float, help="Initial heading (rad)")
@click.option("--radius", type=float, help="Circle radius (m)")
@click.option("--noise-accel", "noise_std_accel", type=float, help="Accelerometer noise std (m/s²)")
@click.option("--noise-gyro", "noise_std_gyro", type=float, help="Gyroscope noise std (rad/s)")
@click.option("--gait/--no-gait", default=None,
              help="Add step bounce and surge. Without gait a constant-speed line gives the same IMU "
                   "readings at any speed or heading, so use --gait for training data")
@click.option("--id", "sequence_id", help="Sequence id (default: derived from path and seed)")
@seed_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output sequence CSV")
@pass_run
def synth(run: RunConfig, out, seed, **flags):
    """Generate a synthetic IMU sequence with ground truth.

    Examples:
        velo synth --path line --speed 1.0 --duration 10 --out seq.csv

        velo synth --path circle --radius 4 --gait --seed 3 --out circle.csv
    """
    try:
        config = run.build(SyntheticConfig, "synthetic", rng_seed=run.effective_seed(seed), **flags)
        record = synthesize(config)
        path = save_sequence(record, out)
        run.outputs["sequence"] = path
        console.print(
            f"[bold green]✓ Wrote {config.path_type} sequence '{record.id}' "
            f"({len(record)} samples, {record.duration:.1f} s) to {path}[/bold green]"
        )
    except (VelonetError, ValueError, OSError) as e:
        fail(e)
