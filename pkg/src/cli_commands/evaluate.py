"""Trajectory evaluation command (ATE / RTE)."""

from pathlib import Path
from typing import Iterator, Optional

import click
import numpy as np
import pandas as pd
from rich.table import Table

from src.cli_commands.utils.runtime import RunConfig, console, fail, pass_run
from src.core.errors import ContractViolation, MissingGroundTruthError, VelonetError
from src.dataio.sequence import GYRO_COLUMNS, load_sequence
from src.evaluation.metrics import SUMMARY_ID, EvaluationConfig, evaluate_pairs, write_metric_report
from src.evaluation.metrics import TIMESTAMP_TOLERANCE
from src.odometry.trajectory import Trajectory, load_trajectory


def load_ground_truth(path: Path) -> tuple[Trajectory, str]:
    """Ground truth from a trajectory CSV or from the px,py columns of a sequence CSV."""
    header = pd.read_csv(path, nrows=0).columns
    if set(GYRO_COLUMNS) <= set(header):
        seq = load_sequence(path)
        if seq.gt_pos is None:
            raise MissingGroundTruthError(f"{path}: sequence '{seq.id}' has no px,py columns")
        return Trajectory(seq.t, seq.gt_pos[:, 0], seq.gt_pos[:, 1]), seq.id
    return load_trajectory(path), path.stem


def align(pred: Trajectory, gt: Trajectory) -> Trajectory:
    """Resample ground truth onto the prediction timestamps when they differ."""
    if len(pred) == len(gt) and np.allclose(pred.timestamps, gt.timestamps, rtol=0.0, atol=TIMESTAMP_TOLERANCE):
        return gt
    return gt.resample(pred.timestamps)


def matched_files(pred_dir: Path, gt_dir: Path) -> list[tuple[Path, Path]]:
    """Pair every `<name>.csv` prediction with the ground truth of the same name."""
    predictions = sorted(pred_dir.glob("*.csv"))
    if not predictions:
        raise ContractViolation(f"{pred_dir}: no prediction CSV files")
    pairs = []
    for pred in predictions:
        gt = gt_dir / pred.name
        if not gt.is_file():
            raise MissingGroundTruthError(f"no ground truth {gt} for prediction {pred}")
        pairs.append((pred, gt))
    return pairs


def scored_pairs(
    sources: list[tuple[Path, Path, str]], sequence_id: Optional[str]
) -> Iterator[tuple[Trajectory, Trajectory, str, str]]:
    for pred_path, gt_path, split in sources:
        files = matched_files(pred_path, gt_path) if pred_path.is_dir() else [(pred_path, gt_path)]
        for pred_file, gt_file in files:
            predicted = load_trajectory(pred_file)
            truth, default_id = load_ground_truth(gt_file)
            yield predicted, align(predicted, truth), sequence_id or default_id, split


@click.command(name="eval")
@click.option("--pred", "preds", required=True, multiple=True, type=click.Path(exists=True, path_type=Path),
              help="Predicted trajectory CSV, or a directory of them (repeatable)")
@click.option("--gt", "gts", required=True, multiple=True, type=click.Path(exists=True, path_type=Path),
              help="Ground truth: trajectory CSV or sequence CSV with px,py, or a directory of them (repeatable)")
@click.option("--split", "splits", multiple=True, help="Split label for each --pred/--gt pair, e.g. seen, unseen")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output metric report CSV")
@click.option("--interval", "rte_interval", type=float, help="RTE interval in seconds [default: 60]")
@click.option("--id", "sequence_id", help="Sequence id for the report row (single file pair only)")
@pass_run
def evaluate_command(run: RunConfig, preds, gts, splits, out, rte_interval, sequence_id):
    """Compute ATE and RTE of predicted trajectories against ground truth.

    Directory pairs match files by name. With several sequences the report
    adds a mean row per split and, across splits, an overall mean.

    Examples:
        velo eval --pred pred.csv --gt seq.csv --out metrics.csv

        velo eval --pred pdr.csv --gt gt_traj.csv --interval 30 --out metrics.csv

        velo eval --pred out/seen --gt data/seen --split seen --pred out/unseen --gt data/unseen --split unseen --out metrics.csv
    """
    if len(preds) != len(gts):
        raise click.UsageError(f"got {len(preds)} --pred but {len(gts)} --gt")
    if splits and len(splits) != len(preds):
        raise click.UsageError(f"got {len(splits)} --split labels for {len(preds)} --pred/--gt pairs")
    for pred, gt in zip(preds, gts):
        if pred.is_dir() != gt.is_dir():
            raise click.UsageError(f"--pred {pred} and --gt {gt} must both be files or both be directories")
    if sequence_id and (len(preds) > 1 or preds[0].is_dir()):
        raise click.UsageError("--id applies to a single --pred/--gt file pair")

    try:
        config = run.build(EvaluationConfig, "evaluation", rte_interval=rte_interval)
        sources = list(zip(preds, gts, splits or [""] * len(preds)))
        results = evaluate_pairs(scored_pairs(sources, sequence_id), config.rte_interval)
        path = write_metric_report(results, out)
        run.outputs["report"] = path

        title = results[0].sequence_id if len(results) == 1 else f"{len(results)} rows"
        table = Table(title=f"Trajectory error: {title}")
        if splits:
            table.add_column("Split")
        table.add_column("Sequence")
        table.add_column("ATE (m)", justify="right")
        table.add_column(f"RTE@{config.rte_interval:g}s (m)", justify="right")
        table.add_column("Points", justify="right")
        for result in results:
            cells = [result.sequence_id, f"{result.ate:.4f}", f"{result.rte:.4f}", str(result.n)]
            if splits:
                cells.insert(0, result.split)
            table.add_row(*cells, style="bold" if result.sequence_id == SUMMARY_ID else None)
        console.print(table)
        console.print(f"[bold green]✓ Wrote metric report to {path}[/bold green]")
    except (VelonetError, ValueError, OSError) as e:
        fail(e)
