"""Command-line entry point."""

from __future__ import annotations

import sys

import click

from .errors import TlfemError
from .scenario import apply_overrides, load_scenario, run_scenario


@click.group()
def main():
    """Deformable multibody dynamics: run scenario files."""


@main.command("run")
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Dotted-path override, e.g. solver.h=5e-4. Repeatable.")
@click.option("--out", "out_dir", default="out", show_default=True,
              help="Output directory for CSV series and snapshots.")
@click.option("--frames", type=int, default=None,
              help="Write about N grid snapshots spread over the run.")
@click.option("--verify", is_flag=True,
              help="Run FD/invariant self-checks on the scenario before stepping.")
def run(scenario_path, overrides, out_dir, frames, verify):
    """Run SCENARIO_PATH and write outputs."""
    try:
        scenario = load_scenario(scenario_path)
        if overrides:
            scenario = apply_overrides(scenario, overrides)
        status = run_scenario(scenario, out_dir, frames=frames, verify=verify,
                              progress=click.echo)
    except TlfemError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    sys.exit(status)


if __name__ == "__main__":
    main()
