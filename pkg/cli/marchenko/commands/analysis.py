"""Forward phase shifts and optical α for an existing potential table."""
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
import typer

from cli.marchenko.common import EXIT_INPUT, fail, handle_errors, load_run_inputs
from libs.scattering.forward import (
    direct_scatter,
    direct_scatter_coupled,
    phase_eq_coupled,
    phase_eq_single,
)
from libs.scattering.models import CoupledPotential
from marchenko_lab.pipeline import alpha_table, read_potential


def forward(
    potential: Path = typer.Option(..., "--potential", "-p", help="Potential CSV from 'invert' or 'run'"),
    q: List[float] = typer.Option(..., "--q", help="Momenta (fm^-1); repeat for several"),
    l: int = typer.Option(0, "--l", help="Angular momentum (channel 1)"),
    l2: Optional[int] = typer.Option(None, "--l2", help="Channel-2 angular momentum"),
    method: str = typer.Option("phase", "--method", help="phase (phase equation) or direct (Numerov)"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write the table as CSV"),
):
    """Phase shifts of a tabulated potential, in degrees."""
    if method not in ("phase", "direct"):
        fail(f"unknown method '{method}'", EXIT_INPUT)
    rows = []
    with handle_errors():
        table = read_potential(potential, l=l, l2=l2)
        for momentum in q:
            if isinstance(table, CoupledPotential):
                if method == "direct":
                    d1, d2, eps = direct_scatter_coupled(table, momentum, table.l1, table.l2)
                else:
                    d1, d2, eps = phase_eq_coupled(table, momentum, table.l1, table.l2).terminal
                rows.append({"q": momentum, "delta_deg": np.degrees(np.real(d1)),
                             "delta2_deg": np.degrees(np.real(d2)),
                             "eps_deg": np.degrees(np.real(eps))})
                continue
            if method == "direct":
                delta = direct_scatter(table, momentum, l)
            else:
                delta = phase_eq_single(table, momentum, l).terminal[0]
            rows.append({"q": momentum, "delta_deg": np.degrees(np.real(delta)),
                         "im_delta_deg": np.degrees(np.imag(delta))})

    frame = pd.DataFrame(rows)
    typer.echo(frame.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(output, index=False, float_format="%.12g")
        typer.echo(f"📁 Saved: {output}")


def optical(
    config: Path = typer.Option(..., "--config", "-c", help="Channel config (JSON or YAML)"),
    input: Path = typer.Option(..., "--input", "-i", help="Phase-shift data with inelasticities"),
    potential: Path = typer.Option(..., "--potential", "-p", help="Real potential CSV"),
    format: Optional[str] = typer.Option(None, "--format", help="Input format: csv or json"),
    refine: bool = typer.Option(True, "--refine/--no-refine", help="Refine single-channel α"),
):
    """Predict (and refine) the absorption strength α per energy."""
    with handle_errors():
        channel, records = load_run_inputs(config, input, format)
        channel = channel.model_copy(update={"refine_alpha": refine})
        table = read_potential(potential, l=channel.l, l2=channel.l2)
        rows, diagnostics = alpha_table(channel, records, table)

    typer.echo("🌫️  Optical α")
    for row in rows:
        values = ", ".join(f"{a:.5g}" for a in row["predicted"])
        line = f"   • q={row['q']:.4f} fm^-1  predicted [{values}]"
        if "refined" in row:
            refined = ", ".join(f"{a:.5g}" for a in row["refined"])
            line += f"  refined [{refined}] ({row['provenance']})"
        typer.echo(line)
    if diagnostics.get("unconverged"):
        typer.echo(f"⚠️  {diagnostics['unconverged']} energies kept the predicted α")
