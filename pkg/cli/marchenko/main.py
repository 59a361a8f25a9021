"""Main CLI entry point for the Marchenko lab."""
import logging

import typer

from cli.marchenko.commands import analysis, inversion, synth
from marchenko_lab.config import load_settings

app = typer.Typer(
    name="marchenko",
    help="Marchenko Lab - potentials from phase shifts and inelasticities",
    add_completion=False,
)

app.command("fit")(inversion.fit)
app.command("invert")(inversion.invert)
app.command("run")(inversion.run_pipeline)
app.command("forward")(analysis.forward)
app.command("optical")(analysis.optical)
app.command("synth")(synth.synth)


@app.callback()
def configure(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Configure logging from settings before any command runs."""
    settings = load_settings()
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@app.command()
def version():
    """Show version information."""
    from cli.marchenko import __version__
    typer.echo(f"marchenko version {__version__}")


def main():
    app()


if __name__ == "__main__":
    main()
