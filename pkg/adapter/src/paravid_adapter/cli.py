"""Command-line front-end: serve the adapter or replay conformance vectors."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import uvicorn

from paravid_adapter.app import AdapterConfig, create_app
from paravid_adapter.conformance import check_file


@click.group()
def main() -> None:
    """Reference provider service for the paravid wire protocol."""


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8199)
@click.option("--stub/--passthrough", "stub_mode", default=True,
              help="Deterministic stub models (default) or forward to a real upstream.")
@click.option("--seed", type=int, default=0, help="Stub seed.")
@click.option("--dim", type=int, default=64, help="Stub embedding dimension.")
@click.option("--concept-dim", type=int, default=0,
              help="Stub concept dimension; 0 disables the concept head.")
@click.option("--upstream", default=None, help="Upstream base URL for passthrough mode.")
def cmd_serve(host, port, stub_mode, seed, dim, concept_dim, upstream) -> None:
    """Run the service with all seven endpoints live."""
    try:
        config = AdapterConfig(
            mode="stub" if stub_mode else "passthrough",
            stub_seed=seed,
            dim=dim,
            concept_dim=concept_dim or None,
            upstream_base_url=upstream,
        )
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")


@main.command("conformance-check")
@click.argument("vectors_file", type=click.Path(exists=True, path_type=Path))
def cmd_conformance_check(vectors_file: Path) -> None:
    """Replay VECTORS_FILE against the stub and report pass/fail."""
    report = check_file(vectors_file)
    click.echo(report.summary())
    if not report.passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
