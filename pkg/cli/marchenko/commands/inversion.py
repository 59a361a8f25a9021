"""Fit, inversion and full-pipeline commands."""
from pathlib import Path
from typing import List, Optional

import typer

from cli.marchenko.common import (
    EXIT_GATE,
    handle_errors,
    load_run_inputs,
    settings_for,
)
from marchenko_lab.kinematics import reduced_mass
from marchenko_lab.pipeline import fit_spectrum, qmax_sweep, run, write_outputs, write_potential

ConfigOption = typer.Option(..., "--config", "-c", help="Channel config (JSON or YAML)")
InputOption = typer.Option(..., "--input", "-i", help="Phase-shift data file")
FormatOption = typer.Option(None, "--format", help="Input format: csv or json (default: suffix)")
QmaxOption = typer.Option(None, "--qmax", help="Fit range end Q_max (fm^-1)")
RmaxOption = typer.Option(None, "--rmax", help="Radial grid end (fm)")
GridOption = typer.Option(None, "--grid", help="Number of radial grid points")
GateOption = typer.Option(None, "--gate", help="Round-trip gate (rad)")
ThreadsOption = typer.Option(None, "--threads", help="Worker threads for forward solves")


def fit(
    config: Path = ConfigOption,
    input: Path = InputOption,
    format: Optional[str] = FormatOption,
    qmax: Optional[float] = QmaxOption,
):
    """Fit the Padé S-matrix and list its upper-half-plane poles."""
    with handle_errors():
        channel, records = load_run_inputs(config, input, format, qmax=qmax)
        result = fit_spectrum(channel, records, settings_for())

    typer.echo(f"✅ Fitted S-matrix on [0, {result.q_max:.4f}] fm^-1")
    for term in result.spectrum.kernel_terms():
        beta = term.beta
        typer.echo(f"   • β = {beta.real:+.6f} {beta.imag:+.6f}i  order {term.order}  ({term.source})")
    if result.spectrum.is_empty:
        typer.echo("   • no poles: the potential vanishes")


def invert(
    config: Path = ConfigOption,
    input: Path = InputOption,
    output: Path = typer.Option(Path("results"), "--output", "-o", help="Output directory"),
    format: Optional[str] = FormatOption,
    qmax: Optional[float] = QmaxOption,
    rmax: Optional[float] = RmaxOption,
    grid: Optional[int] = GridOption,
    gate: Optional[float] = GateOption,
    threads: Optional[int] = ThreadsOption,
):
    """Invert phase shifts to a potential table and check the round trip."""
    with handle_errors():
        channel, records = load_run_inputs(config, input, format, qmax, rmax, grid, gate)
        report, potential = run(channel, records, settings_for(threads), observables=False)
        path = write_potential(potential, output / f"{channel.name}_potential.csv",
                               reduced_mass(channel.m1, channel.m2), report.config_hash)

    typer.echo(f"📁 Potential: {path}")
    _echo_gate(report.max_residual, report.gate, report.gate_passed)


def run_pipeline(
    config: Path = ConfigOption,
    input: Path = InputOption,
    output: Path = typer.Option(Path("results"), "--output", "-o", help="Output directory"),
    format: Optional[str] = FormatOption,
    qmax: Optional[float] = QmaxOption,
    rmax: Optional[float] = RmaxOption,
    grid: Optional[int] = GridOption,
    gate: Optional[float] = GateOption,
    threads: Optional[int] = ThreadsOption,
    sweep: Optional[List[float]] = typer.Option(
        None, "--sweep", help="Also rerun the inversion at these Q_max factors"
    ),
):
    """Full pipeline: inversion, round trip, bound states, optical α, report."""
    with handle_errors():
        channel, records = load_run_inputs(config, input, format, qmax, rmax, grid, gate)
        settings = settings_for(threads)
        report, potential = run(channel, records, settings)
        if sweep:
            report.diagnostics["qmax_sweep"] = qmax_sweep(channel, records, sweep, settings)
        paths = write_outputs(report, potential, output, reduced_mass(channel.m1, channel.m2))

    for state in report.bound_states:
        flags = " ".join(f"{k}:{'✓' if ok else '✗'}" for k, ok in state.checks.items())
        typer.echo(f"🔗 Bound state E={state.energy:.5f} MeV A_S={state.A_S:.5f} {flags}".rstrip())
    if report.alpha:
        typer.echo(f"🌫️  α table: {len(report.alpha)} entries")
    for row in report.diagnostics.get("qmax_sweep", []):
        typer.echo(f"   • factor {row['factor']}: max residual {row['max_residual']}")
    typer.echo(f"📁 Report: {paths['report']}")
    typer.echo(f"📁 Potential: {paths['potential']}")
    _echo_gate(report.max_residual, report.gate, report.gate_passed)


def _echo_gate(residual: float, gate: float, passed: bool) -> None:
    if passed:
        typer.echo(f"✅ Round trip max |Δδ| = {residual:.3e} rad (gate {gate:.1e})")
        return
    typer.echo(f"⚠️  Round trip max |Δδ| = {residual:.3e} rad exceeds gate {gate:.1e}", err=True)
    raise typer.Exit(code=EXIT_GATE)
