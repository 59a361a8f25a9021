"""
Tests for end-to-end inversion runs and their outputs.
"""
import json

import numpy as np
import pytest

from libs.scattering.errors import (
    DomainError,
    PoleCountError,
    RealAxisPoleError,
    SchemaError,
    StageError,
)
from libs.scattering.forward import find_bound_states
from libs.scattering.marchenko1 import default_grid, extract_potential, solve_output_kernel
from libs.scattering.marchenko2 import extract_coupled_potential, solve_coupled_kernel
from libs.scattering.models import CoupledPotential, PhaseRecord, RadialPotential
from libs.scattering.smatrix import spectral_decompose
from marchenko_lab.config import Settings
from marchenko_lab.models import BoundStateInput, ChannelConfig
from marchenko_lab.pipeline import (
    alpha_table,
    fit_spectrum,
    qmax_sweep,
    read_potential,
    resolve_q_max,
    run,
    run_coupled,
    run_single,
    stage,
    wrap_pi,
    write_outputs,
    write_potential,
)
from marchenko_lab.synth import (
    bargmann_phase,
    bargmann_potential,
    coupled_toy_potential,
    exponential_well,
    make_coupled_corpus,
    make_single_corpus,
)

MU = 469.4591
NUCLEONS = {"m1": 938.272, "m2": 939.565}
CORPUS_Q = np.linspace(0.05, 3.0, 30)


@pytest.fixture
def settings():
    """Small grid for fast runs."""
    return Settings(grid_points=400, r_max=10.0)


@pytest.fixture
def single_config():
    return ChannelConfig(name="bargmann", m1=938.272, m2=939.565, l=0, nodes=2, q_max=2.1)


@pytest.fixture
def zero_records():
    return [PhaseRecord(q=q) for q in np.linspace(0.1, 1.5, 8)]


@pytest.fixture
def bargmann_records():
    qs = np.linspace(0.1, 2.0, 24)
    return [PhaseRecord(q=q, delta=float(bargmann_phase(q, 0.5, 1.5)), delta_err=0.01) for q in qs]


@pytest.fixture(scope="module")
def bargmann_run():
    config = ChannelConfig(name="bargmann", m1=938.272, m2=939.565, l=0, nodes=2, q_max=2.1)
    records = [PhaseRecord(q=q, delta=float(bargmann_phase(q, 0.5, 1.5)), delta_err=0.01)
               for q in np.linspace(0.1, 2.0, 24)]
    return run_single(config, records, Settings(grid_points=400, r_max=10.0))


def test_wrap_pi():
    """Differences are taken modulo π."""
    assert wrap_pi(np.pi - 0.01) == pytest.approx(-0.01)
    assert wrap_pi(0.3) == pytest.approx(0.3)
    assert wrap_pi(-np.pi + 0.2) == pytest.approx(0.2)


def test_stage_wraps_errors():
    """Failures carry the stage name and the original error."""
    with pytest.raises(StageError) as info:
        with stage("fit_pade"):
            raise ValueError("boom")
    assert info.value.stage == "fit_pade"
    assert isinstance(info.value.error, ValueError)


def test_resolve_q_max(single_config, zero_records, settings):
    """Explicit Q_max wins; otherwise the factor scales the data range."""
    assert resolve_q_max(single_config, zero_records, settings) == 2.1
    config = single_config.model_copy(update={"q_max": None})
    assert resolve_q_max(config, zero_records, settings) == pytest.approx(1.5 * 1.5)
    with pytest.raises(DomainError):
        resolve_q_max(config.model_copy(update={"q_max": 1.0}), zero_records, settings)


def test_fit_requires_records(single_config, settings):
    """An empty record list cannot be inverted."""
    with pytest.raises(DomainError):
        fit_spectrum(single_config, [], settings)


def test_trivial_run(single_config, zero_records, settings):
    """All-zero phases give V ≡ 0, no bound states and α ≡ 0."""
    report, potential = run(single_config, zero_records, settings)
    assert isinstance(potential, RadialPotential)
    assert np.all(potential.values == 0)
    assert report.poles == []
    assert report.max_residual == 0.0
    assert report.gate_passed
    assert report.levinson["observed"] == 0
    assert report.bound_states == []
    assert all(row["predicted"] == [0.0] for row in report.alpha)


def test_trivial_coupled_run(zero_records, settings):
    """The coupled path gives a zero 2×2 potential for vanishing phases and mixing."""
    config = ChannelConfig(name="3SD1", m1=938.272, m2=939.565, l=0, l2=2, nodes=4)
    records = [PhaseRecord(q=r.q, delta=0.0, delta2=0.0, epsilon=0.0) for r in zero_records]
    report, potential = run(config, records, settings)
    assert isinstance(potential, CoupledPotential)
    assert np.all(potential.values == 0)
    assert report.channels == (0, 2)
    assert report.gate_passed
    assert report.levinson["observed"] == [0, 0]
    assert report.diagnostics["asymmetry"] == 0.0
    assert report.alpha == []


def test_run_dispatch_guards(single_config, zero_records, settings):
    """run_single and run_coupled refuse the other kind of config."""
    with pytest.raises(DomainError):
        run_coupled(single_config, zero_records, settings)
    coupled = single_config.model_copy(update={"l2": 2})
    with pytest.raises(DomainError):
        run_single(coupled, zero_records, settings)


def test_bargmann_run_recovers_potential(bargmann_run):
    """The one-pole Bargmann data invert to its closed-form potential."""
    report, potential = bargmann_run
    assert report.gate_passed
    assert report.max_residual < 1e-3
    assert len(report.poles) == 1
    assert report.bound_states == []
    assert report.poles[0].beta_im == pytest.approx(1.5, abs=1e-3)
    expected = bargmann_potential(0.5, 1.5)(potential.grid)
    assert np.max(np.abs(potential.values - expected)) < 1e-3 * np.max(np.abs(expected))


def test_report_diagnostics(bargmann_run):
    """Condition numbers, kernel residual and grid metadata are recorded."""
    report, _ = bargmann_run
    assert report.diagnostics["max_condition"] >= 1.0
    assert report.diagnostics["marchenko_residual"] < 1e-6
    assert report.diagnostics["pairing_defect"] < 1e-6
    assert report.grid["points"] == 400
    assert set(report.fit) == {"f1", "f2"}


def test_stage_error_names_stage(single_config, zero_records, settings):
    """A Q_max inside the data range fails the tail stage."""
    config = single_config.model_copy(update={"q_max": 1.0})
    with pytest.raises(StageError) as info:
        run(config, zero_records, settings)
    assert info.value.stage == "extrapolate_tail"
    assert isinstance(info.value.error, DomainError)


def test_report_is_deterministic(single_config, zero_records, settings):
    """Identical inputs give byte-identical payloads."""
    first, _ = run(single_config, zero_records, settings)
    second, _ = run(single_config, zero_records, settings)
    assert first.payload() == second.payload()
    assert "created_at" not in json.loads(first.payload())
    assert first.config_hash == single_config.config_hash()


def test_qmax_sweep(single_config, bargmann_records, settings):
    """Each factor gets a residual entry, and failures name their stage."""
    rows = qmax_sweep(single_config, bargmann_records, factors=(1.05, 0.9), settings=settings)
    assert rows[0]["factor"] == 1.05
    assert rows[0]["q_max"] == pytest.approx(2.1)
    assert rows[0]["max_residual"] is not None
    assert rows[1]["failed_stage"] == "extrapolate_tail"


def test_alpha_table_single_without_refinement():
    """Predicted α per record; refinement off leaves no refined column."""
    well = exponential_well(3.0, 1.0)
    records = make_single_corpus(well, [0.4, 0.8], alpha=0.02)
    config = ChannelConfig(m1=938.272, m2=939.565, refine_alpha=False)
    rows, diagnostics = alpha_table(config, records, well)
    assert len(rows) == 2
    assert all(row["predicted"][0] > 0 for row in rows)
    assert "refined" not in rows[0]
    assert diagnostics == {}


def test_write_and_read_potential(tmp_path):
    """Potential tables carry a header and read back unchanged."""
    grid = np.linspace(0.01, 5.0, 50)
    potential = RadialPotential(grid=grid, values=-2.0 * np.exp(-grid))
    path = write_potential(potential, tmp_path / "v.csv", MU, config_hash="abc123")
    header = path.read_text().splitlines()[:3]
    assert header[0] == "# config_hash: abc123"
    assert "points=50" in header[1]
    back = read_potential(path)
    np.testing.assert_allclose(back.grid, grid, rtol=1e-11)
    np.testing.assert_allclose(back.values, potential.values, rtol=1e-11)
    assert not back.is_complex


def test_write_and_read_coupled_potential(tmp_path):
    """Coupled tables store the three components with real and imaginary parts."""
    grid = np.linspace(0.1, 4.0, 30)
    decay = np.exp(-grid)
    values = np.stack([-decay, -0.3 * decay, (-0.5 - 0.05j) * decay], axis=1)
    path = write_potential(CoupledPotential(grid=grid, values=values), tmp_path / "c.csv", MU)
    back = read_potential(path, l=0, l2=2)
    assert isinstance(back, CoupledPotential)
    np.testing.assert_allclose(back.values, values, rtol=1e-11)


def test_read_potential_rejects_other_tables(tmp_path):
    """A data file is not a potential table."""
    path = tmp_path / "data.csv"
    path.write_text("T_lab_MeV,delta_deg\n10,20\n")
    with pytest.raises(SchemaError):
        read_potential(path)


def test_write_outputs(tmp_path, single_config, zero_records, settings):
    """A run writes the potential table and the report payload."""
    report, potential = run(single_config, zero_records, settings)
    paths = write_outputs(report, potential, tmp_path / "results", MU)
    assert paths["potential"].name == "bargmann_potential.csv"
    assert json.loads(paths["report"].read_text())["config_hash"] == report.config_hash


# ---------------------------------------------------------------------------
# Synthetic round trips
# ---------------------------------------------------------------------------


def _well_run(depth, range_, settings=None, observables=False, **overrides):
    well = exponential_well(depth, range_)
    config = ChannelConfig(**{"name": "well", "l": 0, **NUCLEONS, **overrides})
    records = make_single_corpus(well, CORPUS_Q)
    return run_single(config, records, settings or Settings(grid_points=400, r_max=10.0),
                      observables=observables)


@pytest.fixture(scope="module")
def shallow_well_run():
    """Exponential well V₀ = 1, a = 1 (a virtual state) at the default node count."""
    return _well_run(1.0, 1.0)


@pytest.fixture(scope="module")
def bound_well():
    well = exponential_well(3.0, 1.0)
    return well, find_bound_states(well, 0, MU)[0]


@pytest.fixture(scope="module")
def bound_well_run(bound_well):
    """Exponential well V₀ = 3, a = 1 with its single bound state in the kernel."""
    _, state = bound_well
    return _well_run(
        3.0, 1.0, observables=True, name="bound-well", levinson=(1, 0), refine_alpha=False,
        bound_states=[BoundStateInput(energy=state.energy, A_S=state.A_S)],
    )


def test_shallow_well_passes_gate(shallow_well_run):
    """The order scan avoids near-real poles and the round trip stays inside the gate."""
    report, _ = shallow_well_run
    assert report.gate_passed
    assert report.max_residual < 2e-3
    assert report.levinson["observed"] == 0
    scan = report.diagnostics["order_scan"]
    assert scan[0]["nodes"] == 8
    assert "deviation" in scan[-1]


def test_shallow_well_kernel_poles_clear_axis(shallow_well_run):
    """Every fitted kernel pole keeps the clearance band free."""
    report, _ = shallow_well_run
    poles = [row for row in report.poles if row.source == "pole"]
    assert poles
    assert all(row.beta_im > 0.03 * report.q_max for row in poles)


def test_shallow_well_potential_is_bounded(shallow_well_run):
    """No spurious spike: the potential stays near −e^{−r} away from the origin."""
    _, potential = shallow_well_run
    outer = potential.grid >= 0.5
    values = np.real(potential.values[outer])
    assert np.max(np.abs(values)) < 5.0
    expected = exponential_well(1.0, 1.0)(potential.grid[outer])
    assert np.max(np.abs(values - expected)) < 0.1


def test_shallow_well_fixed_order_is_refused():
    """With the scan off, the inadmissible eight-node fit fails the fit stage."""
    with pytest.raises(StageError) as info:
        _well_run(1.0, 1.0, node_search=False)
    assert info.value.stage == "fit_pade"
    assert isinstance(info.value.error, (RealAxisPoleError, PoleCountError))


@pytest.mark.parametrize(
    "depth,range_",
    [(0.5, 1.0), (1.5, 0.7), (-1.0, 0.8), (0.3, 1.5)],
    ids=["weak", "short-range", "repulsive", "long-range"],
)
def test_well_corpus_round_trip(depth, range_):
    """Scattering-only wells invert within the 2e-3 rad gate."""
    report, _ = _well_run(depth, range_)
    assert report.gate_passed, report.max_residual
    assert report.max_residual < 2e-3
    assert report.levinson["observed"] == 0


def test_bound_well_round_trip(bound_well_run):
    """The bound-state well of the corpus also passes the gate."""
    report, _ = bound_well_run
    assert report.gate_passed, report.max_residual
    assert report.max_residual < 2e-3


def test_bound_well_levinson(bound_well_run):
    """δ(0) − δ(∞) counts the one bound state."""
    report, _ = bound_well_run
    assert report.levinson["expected"] == 1
    assert report.levinson["observed"] == 1
    assert report.levinson["kernel_bound_terms"] == 1
    assert abs(report.levinson["gap"]) < 0.05


def test_bound_well_state_reproduced(bound_well, bound_well_run):
    """The reconstructed potential binds at the input energy with the input A_S."""
    _, state = bound_well
    report, _ = bound_well_run
    assert len(report.bound_states) == 1
    row = report.bound_states[0]
    assert row.energy == pytest.approx(state.energy, abs=1e-3)
    assert row.checks == {"energy": True, "A_S": True}


@pytest.fixture(scope="module")
def toy_deuteron():
    """Bound state of the coupled toy potential, used as a ³S₁–³D₁ stand-in."""
    return find_bound_states(coupled_toy_potential(), (0, 2), MU)[0]


@pytest.fixture(scope="module")
def deuteron_run(toy_deuteron):
    records = make_coupled_corpus(coupled_toy_potential(), CORPUS_Q)
    config = ChannelConfig(
        name="3SD1", l=0, l2=2, labels=["3S1", "3D1"], levinson=(1, 0), gate=3e-3,
        refine_alpha=False, **NUCLEONS,
        bound_states=[BoundStateInput(energy=toy_deuteron.energy, A_S=toy_deuteron.A_S,
                                      eta=toy_deuteron.eta)],
        reference_observables={"rms_radius": toy_deuteron.rms_radius,
                               "quadrupole": toy_deuteron.quadrupole},
    )
    return run_coupled(config, records, Settings(grid_points=400, r_max=10.0))


def test_coupled_toy_round_trip(deuteron_run):
    """δ₁, δ₂ and ε of the coupled toy corpus come back within 3e-3 rad."""
    report, potential = deuteron_run
    assert report.gate == 3e-3
    assert report.gate_passed, report.max_residual
    assert report.max_residual < 3e-3
    assert report.levinson["observed"] == [1, 0]
    assert potential.asymmetry < 1e-3
    assert set(report.diagnostics["order_scan"]) == {"channel1", "channel2", "mixing"}


def test_coupled_toy_deuteron_observables(toy_deuteron, deuteron_run):
    """E, A_S, η, r_d and Q of the reconstructed bound state match the input potential."""
    report, _ = deuteron_run
    assert len(report.bound_states) == 1
    row = report.bound_states[0]
    assert set(row.checks) == {"energy", "A_S", "eta", "rms_radius", "quadrupole"}
    assert all(row.checks.values()), row.checks
    assert row.quadrupole > 0
    assert row.eta == pytest.approx(toy_deuteron.eta, rel=1e-2)


def test_unmixed_coupled_fit_matches_single_channels(settings):
    """With ε ≡ 0 the coupled inversion equals two single-channel inversions."""
    diagonal = coupled_toy_potential(central=(-1.5, 0.8), tensor=(0.0, 1.0), d_wave=(-1.0, 0.8))
    records = [rec.model_copy(update={"epsilon": 0.0})
               for rec in make_coupled_corpus(diagonal, CORPUS_Q)]
    config = ChannelConfig(name="unmixed", l=0, l2=2, **NUCLEONS)
    fit = fit_spectrum(config, records, settings)
    assert fit.smatrix.f1_mix.is_zero

    grid = default_grid(0.01, 10.0, 400)
    coupled = extract_coupled_potential(solve_coupled_kernel(fit.spectrum, 0, 2, grid))
    for index, (channel, l) in enumerate(((1, 0), (2, 2))):
        spec = spectral_decompose(fit.smatrix.channel_matrix(channel))
        single = extract_potential(solve_output_kernel(spec, l, grid))
        np.testing.assert_allclose(coupled.values[:, index], single.values, rtol=0, atol=1e-8)
    np.testing.assert_allclose(coupled.values[:, 2], 0.0, atol=1e-10)
