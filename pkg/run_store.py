#!/usr/bin/env python3
"""
Run Store for sbp-groundstate

Every CLI run is persisted once as a self-describing JSON RunRecord in the
run store directory (SBP_RUN_STORE, default runs/). Records are never
overwritten. This utility lists, inspects and validates stored records.
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import click
import jsonschema
from rich.console import Console
from rich.table import Table

logger = logging.getLogger(__name__)
console = Console()

SCHEMA_VERSION = 1
ARTIFACT_VERSION = "1.0.0"
ENV_VAR = "SBP_RUN_STORE"
DEFAULT_STORE = "runs"
SCHEMA_PATH = Path(__file__).resolve().parent / "schemas" / "run_record.schema.json"


@dataclass
class RunRecord:
    """One persisted run: config snapshot, timestamps and results payload"""
    command: str
    config: Dict[str, Any]
    config_hash: str
    started_at: str
    finished_at: str
    status: str
    results: Any
    schema_version: int = SCHEMA_VERSION
    artifact_version: str = ARTIFACT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def results_json(self) -> str:
        """Results payload bytes; identical configs give identical payloads."""
        return json.dumps(self.results, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        return cls(**data)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def config_hash(serialized_config: str) -> str:
    """sha256 of the canonical config JSON"""
    return hashlib.sha256(serialized_config.encode("utf-8")).hexdigest()


def store_dir(explicit: Optional[str] = None) -> Path:
    """Run store directory: explicit path, then $SBP_RUN_STORE, then runs/."""
    return Path(explicit or os.environ.get(ENV_VAR) or DEFAULT_STORE)


@lru_cache(maxsize=1)
def load_schema() -> Dict[str, Any]:
    with open(SCHEMA_PATH, 'r') as f:
        return json.load(f)


def validate_record(data: Dict[str, Any]) -> None:
    """Validate a record mapping against the shipped schema.

    Raises:
        jsonschema.ValidationError: If the record does not conform
    """
    jsonschema.validate(instance=data, schema=load_schema(),
                        cls=jsonschema.Draft7Validator)


def record_filename(record: RunRecord) -> str:
    stamp = datetime.fromisoformat(record.started_at).strftime("%Y%m%dT%H%M%S%fZ")
    return f"{stamp}-{record.command}-{record.config_hash[:8]}"


def write_record(record: RunRecord, store: Optional[str] = None) -> Path:
    """Write a record once; a numeric suffix is added if the name is taken.

    Returns:
        Path of the written record
    """
    directory = store_dir(store)
    directory.mkdir(parents=True, exist_ok=True)
    base = record_filename(record)
    payload = record.to_json()

    suffix = 0
    while True:
        name = f"{base}.json" if suffix == 0 else f"{base}-{suffix}.json"
        path = directory / name
        try:
            with open(path, 'x') as f:
                f.write(payload)
                f.write("\n")
        except FileExistsError:
            suffix += 1
            continue
        logger.info(f"Run record written to {path}")
        return path


def load_record(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, 'r') as f:
        return json.load(f)


def record_files(store: Optional[str] = None) -> List[Path]:
    directory = store_dir(store)
    if not directory.exists():
        return []
    return sorted(p for p in directory.iterdir() if p.suffix == ".json")


def list_run_records(store: Optional[str] = None):
    """List all run records with their details"""
    directory = store_dir(store)
    if not directory.exists():
        console.print(f"[yellow]Run store '{directory}' does not exist[/yellow]")
        return

    files = record_files(store)
    if not files:
        console.print(f"[yellow]No run records found in '{directory}'[/yellow]")
        return

    table = Table(title=f"Run Records in {directory}")
    table.add_column("File", style="cyan")
    table.add_column("Command", style="green")
    table.add_column("Status", style="magenta")
    table.add_column("Started", style="blue")
    table.add_column("Config", style="yellow")

    for path in files:
        try:
            data = load_record(path)
            table.add_row(path.name, data.get("command", "?"), data.get("status", "?"),
                          data.get("started_at", "?"), data.get("config_hash", "")[:8])
        except (OSError, json.JSONDecodeError):
            table.add_row(path.name, "Error", "Error", "", "")

    console.print(table)


def inspect_run_record(record_file: str, store: Optional[str] = None, validate: bool = False) -> bool:
    """Inspect a specific run record; returns False if it is missing or invalid"""
    path = Path(record_file)
    if not path.exists():
        path = store_dir(store) / record_file
    if not path.exists():
        console.print(f"[red]Run record '{record_file}' not found[/red]")
        return False

    try:
        data = load_record(path)
    except (OSError, json.JSONDecodeError) as e:
        console.print(f"[red]Error reading run record: {str(e)}[/red]")
        return False

    console.print(f"[bold blue]Run Record: {path.name}[/bold blue]")
    console.print(f"[blue]Command: {data.get('command')}  Status: {data.get('status')}[/blue]")
    console.print(f"[blue]Started: {data.get('started_at')}  Finished: {data.get('finished_at')}[/blue]")
    console.print(f"[blue]Artifact version: {data.get('artifact_version')}[/blue]")

    results = data.get("results")
    if isinstance(results, dict):
        kind = results.get("kind")
        if kind == "probe_reports":
            table = Table(title="Probes")
            table.add_column("Probe", style="cyan")
            table.add_column("Status", style="green")
            table.add_column("Residual", style="yellow")
            for report in results.get("reports", []):
                table.add_row(report["name"], report["status"], f"{report['residual']:.3e}")
            console.print(table)
        elif kind == "solution":
            diag = results.get("diagnostics", {})
            console.print(f"[green]J = {diag.get('j_value')}  converged = {results.get('converged')}[/green]")
        else:
            console.print(f"[yellow]Results: {kind}[/yellow]")

    if validate:
        try:
            validate_record(data)
        except jsonschema.ValidationError as e:
            console.print(f"[red]Schema validation failed: {e.message}[/red]")
            return False
        console.print("[green]Record validates against the run record schema[/green]")
    return True


@click.group()
def cli():
    """Run Store for sbp-groundstate"""
    pass


@cli.command(name="list")
@click.option('--store', default=None, help='Run store directory (default: $SBP_RUN_STORE or runs/)')
def list_command(store):
    """List all run records"""
    list_run_records(store)


@cli.command()
@click.argument('record_file')
@click.option('--store', default=None, help='Run store directory (default: $SBP_RUN_STORE or runs/)')
@click.option('--validate', is_flag=True, help='Validate the record against the JSON schema')
def inspect(record_file, store, validate):
    """Inspect a specific run record"""
    if not inspect_run_record(record_file, store, validate):
        raise SystemExit(1)


if __name__ == '__main__':
    cli()
