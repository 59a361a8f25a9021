"""Shared option handling and exit-code mapping for the CLI."""
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import typer
import yaml
from pydantic import ValidationError

from libs.scattering.errors import (
    DomainError,
    ParametrizationError,
    ScatteringError,
    SchemaError,
    StageError,
)
from libs.scattering.models import PhaseRecord
from marchenko_lab.config import Settings, load_settings
from marchenko_lab.ingest import ingest
from marchenko_lab.models import ChannelConfig, load_channel_config

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_GATE = 2
EXIT_INPUT = 3

INPUT_ERRORS = (
    SchemaError,
    DomainError,
    ParametrizationError,
    FileNotFoundError,
    ValidationError,
    yaml.YAMLError,
    json.JSONDecodeError,
)


def fail(message: str, code: int) -> None:
    typer.echo(f"❌ Error: {message}", err=True)
    raise typer.Exit(code=code)


@contextmanager
def handle_errors() -> Iterator[None]:
    """Map exceptions onto the CLI exit codes (3 input, 1 numerical failure)."""
    try:
        yield
    except typer.Exit:
        raise
    except StageError as e:
        code = EXIT_INPUT if isinstance(e.error, INPUT_ERRORS) else EXIT_FAILURE
        fail(str(e), code)
    except INPUT_ERRORS as e:
        fail(str(e), EXIT_INPUT)
    except ScatteringError as e:
        fail(str(e), EXIT_FAILURE)


def with_overrides(
    config: ChannelConfig,
    qmax: Optional[float] = None,
    rmax: Optional[float] = None,
    grid: Optional[int] = None,
    gate: Optional[float] = None,
) -> ChannelConfig:
    """Apply command-line overrides and re-validate."""
    updates = {
        key: value
        for key, value in {"q_max": qmax, "r_max": rmax, "grid_points": grid, "gate": gate}.items()
        if value is not None
    }
    if not updates:
        return config
    return ChannelConfig.model_validate({**config.model_dump(), **updates})


def settings_for(threads: Optional[int] = None) -> Settings:
    settings = load_settings()
    if threads is not None:
        settings = Settings.from_dict({**settings.to_dict(), "threads": threads})
    return settings


def load_run_inputs(
    config_path: Path,
    input_path: Path,
    fmt: Optional[str] = None,
    qmax: Optional[float] = None,
    rmax: Optional[float] = None,
    grid: Optional[int] = None,
    gate: Optional[float] = None,
) -> Tuple[ChannelConfig, List[PhaseRecord]]:
    """Channel config with overrides plus the ingested records."""
    config = with_overrides(load_channel_config(config_path), qmax, rmax, grid, gate)
    records = ingest(input_path, config, fmt)
    if not records:
        raise DomainError(f"no records in {input_path}")
    typer.echo(f"📋 Channel {config.name}: {len(records)} records, l={list(config.channels)}")
    return config, records
