"""Shared state and helpers for CLI commands."""

import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NoReturn, Optional

import click
from rich.console import Console

from src.core.config_loader import build_dataclass, section_settings

logger = logging.getLogger(__name__)

console = Console()


@dataclass
class RunConfig:
    """
    One CLI invocation: the subcommand, the global seed, the `--config`
    key=value overrides and the YAML settings they layer over.
    """

    command: Optional[str] = None
    seed: Optional[int] = None
    overrides: dict[str, str] = field(default_factory=dict)
    settings: dict[str, Any] = field(default_factory=dict)
    inputs: dict[str, Path] = field(default_factory=dict)
    outputs: dict[str, Path] = field(default_factory=dict)

    def effective_seed(self, local_seed: Optional[int]) -> Optional[int]:
        """Subcommand --seed wins over the global --seed; None leaves config defaults."""
        return local_seed if local_seed is not None else self.seed

    def build(self, cls, section: str, **explicit: Any):
        """Dataclass from YAML section < overrides file < explicit CLI flags."""
        return build_dataclass(cls, section_settings(section, self.settings), self.overrides, **explicit)


pass_run = click.make_pass_decorator(RunConfig, ensure=True)

seed_option = click.option("--seed", type=int, default=None, help="RNG seed (overrides the global --seed)")


def fail(error: BaseException) -> NoReturn:
    """Report a runtime failure and exit with status 1."""
    logger.error(f"{type(error).__name__}: {error}")
    console.print(f"[bold red]Error: {error}[/bold red]")
    sys.exit(1)
