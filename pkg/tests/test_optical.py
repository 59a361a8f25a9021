"""
Tests for optical-potential α prediction, refinement and scaling.
"""
import numpy as np
import pytest

from libs.scattering.errors import DomainError
from libs.scattering.forward import phase_eq_coupled, phase_eq_single
from libs.scattering.models import (
    CoupledPotential,
    OpticalEntry,
    OpticalScaling,
    PhaseRecord,
    RadialPotential,
)
from libs.scattering.optical import (
    alpha_predict_coupled,
    alpha_predict_single,
    alpha_refine_single,
    apply_scaling,
    coupled_jacobian,
    coupled_targets,
    inelasticity_of,
    jacobian_diagnostics,
)
from marchenko_lab.synth import (
    coupled_toy_potential,
    exponential_well,
    make_coupled_corpus,
    make_single_corpus,
)


@pytest.fixture
def well():
    return exponential_well(3.0, 1.0)


def test_predict_single_value():
    """α = −ln(cos²0.2)/(2·0.5236)."""
    assert alpha_predict_single(0.5236, 0.2) == pytest.approx(0.038455, abs=1e-6)


def test_predict_single_elastic_and_sign():
    """ρ = 0 gives α = 0; α has the sign of δ⁰."""
    assert alpha_predict_single(1.1, 0.0) == 0.0
    assert alpha_predict_single(-0.4, 0.1) < 0


def test_predict_single_undefined():
    """Absorption with δ⁰ = 0 has no α."""
    with pytest.raises(DomainError):
        alpha_predict_single(0.0, 0.1)


def test_inelasticity_of():
    """cos²ρ = e^{−2 Im δ}."""
    delta, rho = inelasticity_of(0.5 + 0.01j)
    assert delta == 0.5
    assert np.cos(rho) ** 2 == pytest.approx(np.exp(-0.02), rel=1e-12)
    assert rho == pytest.approx(np.arccos(np.exp(-0.01)), rel=1e-12)
    assert inelasticity_of(0.3) == (0.3, 0.0)


def test_inelasticity_inverts_prediction():
    """Im δ = α·δ⁰ with the predicted α returns the input ρ."""
    delta0, rho = 0.7, 0.15
    alpha = alpha_predict_single(delta0, rho)
    assert inelasticity_of(delta0 + 1j * alpha * delta0)[1] == pytest.approx(rho, rel=1e-12)


def test_inelasticity_rejects_gain():
    """Im δ < 0 is flux gain."""
    with pytest.raises(DomainError):
        inelasticity_of(0.5 - 0.01j)


def test_apply_scaling_single():
    """Re V unchanged, Im V / Re V = α."""
    grid = np.linspace(0.1, 5.0, 50)
    v0 = RadialPotential(grid=grid, values=-np.exp(-grid))
    scaling = OpticalScaling(entries=[OpticalEntry(q=0.5, alpha=(0.05,))])
    v1 = apply_scaling(v0, scaling, 0.5)
    np.testing.assert_allclose(v1.values.real, v0.values)
    np.testing.assert_allclose(v1.values.imag / v1.values.real, 0.05)


def test_apply_scaling_zero_alpha_is_identity():
    """α = 0 leaves the potential unchanged."""
    grid = np.linspace(0.1, 5.0, 50)
    v0 = RadialPotential(grid=grid, values=-np.exp(-grid))
    v1 = apply_scaling(v0, OpticalScaling(entries=[OpticalEntry(q=0.5, alpha=(0.0,))]), 0.9)
    np.testing.assert_allclose(v1.values, v0.values)


def test_apply_scaling_coupled():
    """Each component gets its own α."""
    grid = np.linspace(0.1, 5.0, 20)
    values = np.stack([-np.exp(-grid), -0.5 * np.exp(-grid), -0.2 * np.exp(-grid)], axis=1)
    v0 = CoupledPotential(grid=grid, values=values)
    scaling = OpticalScaling(entries=[OpticalEntry(q=0.5, alpha=(0.1, 0.2, 0.3))], channels=(0, 2))
    v1 = apply_scaling(v0, scaling, 0.5)
    ratios = v1.values.imag / v1.values.real
    np.testing.assert_allclose(ratios, np.broadcast_to([0.1, 0.2, 0.3], values.shape))


def test_alpha_interpolation_flags():
    """Exact, interpolated and flat-extrapolated lookups."""
    scaling = OpticalScaling(entries=[
        OpticalEntry(q=0.2, alpha=(0.01,)),
        OpticalEntry(q=0.4, alpha=(0.03,)),
        OpticalEntry(q=0.8, alpha=(0.05,)),
    ])
    assert scaling.alpha_at(0.4) == ((0.03,), "exact")
    value, flag = scaling.alpha_at(0.6)
    assert flag == "interpolated"
    assert 0.03 < value[0] < 0.05
    assert scaling.alpha_at(1.5) == ((0.05,), "extrapolated")
    assert scaling.alpha_at(0.1) == ((0.01,), "extrapolated")


def test_refine_recovers_generating_alpha(well):
    """Secant refinement finds the α used to generate the data."""
    records = make_single_corpus(well, [0.3, 0.6, 1.0], alpha=0.05, error=1e-8)
    scaling = alpha_refine_single(well, records)
    for entry in scaling.entries:
        assert entry.provenance == "refined"
        assert entry.converged
        assert entry.alpha[0] == pytest.approx(0.05, abs=1e-4)


def test_refine_and_prediction_agree_in_sign(well):
    """Weak absorption gives a positive α both ways for an attractive well."""
    records = make_single_corpus(well, [0.5], alpha=0.005, error=1e-8)
    refined = alpha_refine_single(well, records).entries[0].alpha[0]
    predicted = alpha_predict_single(records[0].delta, records[0].rho)
    assert predicted > 0
    assert refined > 0


def test_refine_elastic_record_is_zero(well):
    """Records without absorption keep α = 0 exactly."""
    scaling = alpha_refine_single(well, [PhaseRecord(q=0.4, delta=0.9)])
    assert scaling.entries[0].alpha == (0.0,)


def test_coupled_elastic_targets_vanish():
    """An elastic coupled record needs no absorption."""
    record = PhaseRecord(q=0.5, delta=1.2, delta2=-0.05, epsilon=0.03)
    np.testing.assert_allclose(coupled_targets(record), 0.0, atol=1e-13)
    assert alpha_predict_coupled(coupled_toy_potential(), record) == (0.0, 0.0, 0.0)


def test_coupled_prediction_self_consistent():
    """The solved α reproduce the target imaginary parts."""
    toy = coupled_toy_potential()
    record = make_coupled_corpus(toy, [0.6], alphas=(0.02, 0.02, 0.02))[0]
    target = coupled_targets(record)
    alphas = alpha_predict_coupled(toy, record)
    factors = np.array([[1 + 1j * alphas[0], 1 + 1j * alphas[2]],
                        [1 + 1j * alphas[2], 1 + 1j * alphas[1]]])

    def scaled(r):
        return factors * toy(r)

    model = np.imag(np.array(phase_eq_coupled(scaled, record.q).terminal, dtype=complex))
    np.testing.assert_allclose(model, target, atol=0.05 * np.max(np.abs(target)))


def test_jacobian_diagnostics_keys():
    """Diagnostics compare the difference Jacobian with the phase integrals."""
    result = jacobian_diagnostics(coupled_toy_potential(), 0.6)
    assert result["jacobian"].shape == (3, 3)
    assert result["integral_gap"] >= 0
    assert result["row_sum_error"] < 1e-3


@pytest.fixture(scope="module")
def absorptive_high_q():
    """well(3, 1) scaled by 1 + 0.02i where |δ⁰| stays above 0.2."""
    v0 = exponential_well(3.0, 1.0)
    records = make_single_corpus(v0, [2.5, 3.0, 4.0], alpha=0.02, error=1e-8)
    return v0, records, alpha_refine_single(v0, records)


def test_prediction_close_to_refined(absorptive_high_q):
    """α = −ln cos²ρ/(2δ⁰) stays within 30% of the refined α."""
    v0, records, scaling = absorptive_high_q
    for record, entry in zip(records, scaling.entries):
        delta0 = float(np.real(phase_eq_single(v0, record.q).terminal[0]))
        assert abs(delta0) > 0.2
        predicted = alpha_predict_single(delta0, record.rho)
        assert entry.converged
        assert abs(predicted - entry.alpha[0]) < 0.3 * abs(entry.alpha[0])


def test_refined_alpha_preserves_real_phase(absorptive_high_q):
    """Re δ of the scaled potential stays at δ⁰."""
    v0, records, scaling = absorptive_high_q
    for record, entry in zip(records, scaling.entries):
        delta0 = float(np.real(phase_eq_single(v0, record.q).terminal[0]))
        assert abs(entry.real_phase_shift - delta0) < max(0.01, 0.02 * abs(delta0))


def test_coupled_alpha_recovered():
    """Solving the Jacobian system returns the generating (α₁, α₂, α₃) to 5%."""
    toy = coupled_toy_potential()
    q, alphas = 0.6, np.array([0.03, 0.02, 0.025])
    factors = np.array([[1 + 1j * alphas[0], 1 + 1j * alphas[2]],
                        [1 + 1j * alphas[2], 1 + 1j * alphas[1]]])

    def scaled(r):
        return factors * toy(r)

    target = np.imag(np.array(phase_eq_coupled(scaled, q).terminal, dtype=complex))
    jac, _ = coupled_jacobian(toy, q)
    np.testing.assert_allclose(np.linalg.solve(jac, target), alphas, rtol=0.05)
