"""Finite-difference gradient check of a small VeloNet."""

import sys

import click
import numpy as np
from rich.table import Table

from src.cli_commands.utils.runtime import RunConfig, console, fail, pass_run, seed_option
from src.core.errors import VelonetError
from src.core.gradcheck import GradCheckReport, grad_check
from src.core.tensor import Tape, Tensor
from src.nn.velonet import PLACEMENTS, VeloNet, VeloNetConfig, build
from src.training.losses import mse_loss

# Parameter always included when --corrupt is set; every backward path reaches it.
CORRUPTION_PROBE = "stem_conv.weight"
CORRUPTION_FACTOR = 2.0


def run_gradcheck(
    net: VeloNet,
    batch: int = 2,
    params: int = 10,
    elements: int = 3,
    tolerance: float = 1e-3,
    corrupt: bool = False,
    seed: int = 0,
) -> GradCheckReport:
    """MSE loss gradients of `params` random parameter tensors against central differences."""
    rng = np.random.default_rng(seed)
    net.eval()
    config = net.config
    x = Tensor(rng.standard_normal((batch, config.in_channels, config.window_n)), dtype=config.dtype)
    y = Tensor(rng.standard_normal((batch, 2)), dtype=config.dtype)

    named = dict(net.named_parameters())
    names = sorted(named)
    chosen = set(rng.choice(names, size=min(params, len(names)), replace=False).tolist())
    if corrupt:
        chosen.add(CORRUPTION_PROBE)
    subset = {name: named[name] for name in names if name in chosen}

    perturb = {"conv1d": CORRUPTION_FACTOR} if corrupt else None
    return grad_check(
        lambda: mse_loss(net(x), y),
        subset,
        tolerance=tolerance,
        max_elements=elements,
        rng=rng,
        tape_factory=lambda: Tape(perturb=perturb),
    )


@click.command(name="gradcheck")
@click.option("--window-n", type=int, default=64, show_default=True, help="Window length N")
@click.option("--base-width", type=int, default=8, show_default=True, help="Stem width")
@click.option("--blocks", "layer_blocks", default="1,1,1,1", show_default=True, help="Blocks per layer")
@click.option("--placement", type=click.Choice(PLACEMENTS), default="p4", show_default=True,
              help="First attention placement")
@click.option("--params", type=int, default=10, show_default=True, help="Parameter tensors to check")
@click.option("--elements", type=int, default=3, show_default=True, help="Elements checked per tensor")
@click.option("--tolerance", type=float, default=1e-3, show_default=True, help="Max relative error")
@click.option("--corrupt", is_flag=True, help="Scale conv1d gradients by 2 (the check must then fail)")
@seed_option
@pass_run
def gradcheck(run: RunConfig, window_n, base_width, layer_blocks, placement, params, elements,
              tolerance, corrupt, seed):
    """Verify network gradients against finite differences (float64, eval mode).

    Exits 0 when every checked element is within tolerance, 1 otherwise.

    Examples:
        velo gradcheck

        velo gradcheck --corrupt
    """
    try:
        seed = run.effective_seed(seed) or 0
        config = VeloNetConfig(
            window_n=window_n,
            layer_blocks=[int(b) for b in layer_blocks.split(",") if b.strip()],
            base_width=base_width,
            cbam_placement=placement,
            dropout_rate=0.0,
            precision="float64",
            rng_seed=seed,
        )
        report = run_gradcheck(
            build(config), params=params, elements=elements, tolerance=tolerance, corrupt=corrupt, seed=seed
        )
    except (VelonetError, ValueError, OSError) as e:
        fail(e)

    table = Table(title="Gradient check" + (" (corrupted conv1d backward)" if corrupt else ""))
    table.add_column("Parameter", style="cyan")
    table.add_column("Elements", justify="right")
    table.add_column("Max rel. error", justify="right")
    for name, error in report.max_relative_error.items():
        style = "green" if error <= tolerance else "red"
        table.add_row(name, str(report.details.get(name, 0)), f"[{style}]{error:.3e}[/{style}]")
    console.print(table)

    if report.passed:
        console.print(
            f"[bold green]✓ PASS: max relative error {report.overall_max_error:.3e} "
            f"<= {tolerance:.1e}[/bold green]"
        )
        return
    console.print(
        f"[bold red]✗ FAIL: max relative error {report.overall_max_error:.3e} "
        f"> {tolerance:.1e} (worst: {report.worst_parameter})[/bold red]"
    )
    sys.exit(1)
