"""Synthetic phase-shift data from built-in potentials."""
from pathlib import Path
from typing import List, Optional

import numpy as np
import typer

from cli.marchenko.common import EXIT_INPUT, fail, handle_errors
from marchenko_lab.ingest import write_records
from marchenko_lab.kinematics import cm_momentum
from marchenko_lab.synth import BUILTIN_POTENTIALS, make_coupled_corpus, make_single_corpus

COUPLED = {"coupled-toy"}


def synth(
    potential: str = typer.Option("exponential", "--potential", help="Built-in potential name"),
    output: Path = typer.Option(Path("synthetic.csv"), "--output", "-o", help="Data file to write"),
    format: Optional[str] = typer.Option(None, "--format", help="csv or json (default: suffix)"),
    t_min: float = typer.Option(1.0, "--t-min", help="Lowest lab energy (MeV)"),
    t_max: float = typer.Option(150.0, "--t-max", help="Highest lab energy (MeV)"),
    points: int = typer.Option(30, "--points", help="Number of energies"),
    l: int = typer.Option(0, "--l", help="Angular momentum (channel 1)"),
    l2: int = typer.Option(2, "--l2", help="Channel-2 angular momentum (coupled potentials)"),
    alpha: List[float] = typer.Option(
        [], "--alpha", help="Absorption α; one value, or three (α11 α22 α12) for coupled"
    ),
    convention: str = typer.Option("bar", "--convention", help="bar or eigen (coupled)"),
    m1: float = typer.Option(938.272, "--m1", help="Projectile mass (MeV)"),
    m2: float = typer.Option(939.565, "--m2", help="Target mass (MeV)"),
    error: float = typer.Option(1e-3, "--error", help="Quoted uncertainty (rad)"),
):
    """Write forward-solved phase shifts of a built-in potential."""
    if potential not in BUILTIN_POTENTIALS:
        fail(f"unknown potential '{potential}' (choose from {', '.join(BUILTIN_POTENTIALS)})",
             EXIT_INPUT)
    if t_min <= 0 or t_max <= t_min or points < 2:
        fail("need 0 < t_min < t_max and at least two points", EXIT_INPUT)

    typer.echo(f"🧪 Generating {points} records from '{potential}'")
    with handle_errors():
        model = BUILTIN_POTENTIALS[potential]()
        momenta = cm_momentum(np.linspace(t_min, t_max, points), m1, m2)
        if potential in COUPLED:
            if alpha and len(alpha) != 3:
                fail("coupled absorption needs three --alpha values", EXIT_INPUT)
            records = make_coupled_corpus(
                model, momenta, l, l2, alphas=tuple(alpha) if alpha else None,
                convention=convention, error=error, masses=(m1, m2),
            )
        else:
            if len(alpha) > 1:
                fail("single-channel absorption takes one --alpha value", EXIT_INPUT)
            records = make_single_corpus(model, momenta, l, alpha=alpha[0] if alpha else 0.0,
                                         error=error, masses=(m1, m2))
        path = write_records(records, output, format)

    typer.echo(f"✅ Wrote {len(records)} records to {path}")
