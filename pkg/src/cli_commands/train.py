"""Network training command."""

from pathlib import Path

import click
from rich.table import Table

from src.cli_commands.utils.runtime import RunConfig, console, fail, pass_run, seed_option
from src.core.errors import VelonetError
from src.dataio.sequence import load_sequence
from src.dataio.windows import concat_datasets, window_dataset
from src.nn.velonet import PLACEMENTS, PRECISIONS, VeloNetConfig, build
from src.nn.weights import save_weights
from src.training.trainer import TrainConfig, fit


def _load_windows(paths, window_n: int, stride: int):
    return concat_datasets([window_dataset(load_sequence(p), window_n, stride) for p in paths])


@click.command(name="train")
@click.option("--train", "train_paths", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False), help="Training sequence CSV (repeatable)")
@click.option("--val", "val_paths", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False), help="Validation sequence CSV (repeatable)")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output weight file (.npz)")
@click.option("--report", type=click.Path(dir_okay=False), help="Training report CSV (default: <out>_report.csv)")
@click.option("--window-n", type=int, help="Window length N (samples)")
@click.option("--stride", type=int, help="Training window stride (default: N/2)")
@click.option("--blocks", "layer_blocks", help="Res2Net blocks per layer, e.g. 3,4,6,3")
@click.option("--base-width", type=int, help="Stem width (64 for the full network)")
@click.option("--placement", "cbam_placement", type=click.Choice(PLACEMENTS), help="First attention placement")
@click.option("--dropout", "dropout_rate", type=float, help="Dropout rate before the head")
@click.option("--precision", type=click.Choice(sorted(PRECISIONS)), help="Floating-point precision")
@click.option("--lr", "learning_rate", type=float, help="Initial learning rate [default: 0.001]")
@click.option("--batch", "batch_size", type=int, help="Batch size [default: 128]")
@click.option("--epochs", "max_epochs", type=int, help="Number of epochs [default: 200]")
@click.option("--patience", "plateau_patience", type=int, help="Plateau patience in epochs [default: 10]")
@click.option("--factor", "plateau_factor", type=float, help="Plateau lr factor [default: 0.1]")
@click.option("--augment/--no-augment", "augment_yaw", default=None, help="Random yaw augmentation")
@seed_option
@pass_run
def train(run: RunConfig, train_paths, val_paths, out, report, window_n, stride, layer_blocks,
          base_width, cbam_placement, dropout_rate, precision, learning_rate, batch_size,
          max_epochs, plateau_patience, plateau_factor, augment_yaw, seed):
    """Train VeloNet on windowed sequences and save weights plus a training report.

    Examples:
        velo train --train a.csv --train b.csv --val c.csv --out net.npz

        velo train --train a.csv --val c.csv --blocks 1,1,1,1 --base-width 8 \\
            --window-n 64 --epochs 50 --out tiny.npz
    """
    try:
        seed = run.effective_seed(seed)
        model_config = run.build(
            VeloNetConfig,
            "model",
            window_n=window_n,
            layer_blocks=layer_blocks,
            base_width=base_width,
            cbam_placement=cbam_placement,
            dropout_rate=dropout_rate,
            precision=precision,
            rng_seed=seed,
        )
        train_config = run.build(
            TrainConfig,
            "training",
            learning_rate=learning_rate,
            batch_size=batch_size,
            max_epochs=max_epochs,
            plateau_patience=plateau_patience,
            plateau_factor=plateau_factor,
            augment_yaw=augment_yaw,
            rng_seed=seed,
        )
        stride = stride or max(1, model_config.window_n // 2)

        train_set = _load_windows(train_paths, model_config.window_n, stride)
        val_set = _load_windows(val_paths, model_config.window_n, stride)
        console.print(
            f"[bold blue]Training on {len(train_set)} windows, validating on {len(val_set)} "
            f"(N={model_config.window_n}, stride={stride})[/bold blue]"
        )

        net = build(model_config)
        console.print(f"[dim]{net.parameter_count():,} parameters[/dim]")

        def show(record):
            console.print(
                f"  epoch {record.epoch:>4}  train {record.train_loss:.6f}  "
                f"val {record.val_loss:.6f}  lr {record.lr:.2e}"
            )

        result = fit(net, train_set, val_set, train_config, on_epoch=show)

        weights_path = save_weights(net, out)
        report_path = Path(report) if report else weights_path.with_name(f"{weights_path.stem}_report.csv")
        result.to_csv(report_path)
        run.outputs.update(weights=weights_path, report=report_path)

        table = Table(title="Training summary")
        table.add_column("Epochs", justify="right")
        table.add_column("Best epoch", justify="right")
        table.add_column("Best val MSE", justify="right")
        table.add_column("Final lr", justify="right")
        table.add_row(
            str(len(result.epochs)),
            str(result.best_epoch),
            f"{result.best_val_loss:.6f}",
            f"{result.learning_rates[-1]:.2e}",
        )
        console.print(table)
        console.print(f"[bold green]✓ Saved weights to {weights_path} and report to {report_path}[/bold green]")
    except (VelonetError, ValueError, OSError) as e:
        fail(e)
