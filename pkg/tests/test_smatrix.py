"""
Tests for Padé fitting, spectral decomposition and phase conventions.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial

from libs.scattering.errors import DomainError, PoleCountError, RealAxisPoleError
from libs.scattering.models import (
    CoupledRationalSMatrix,
    ParityPolynomial,
    PhaseRecord,
    RationalSMatrix,
)
from libs.scattering.smatrix import (
    bar_from_eigen,
    bar_phases_from_s,
    bar_s_matrix,
    bound_state_term,
    chebyshev_nodes,
    check_admissible,
    coupled_bound_state_term,
    eigen_from_bar,
    eigen_s_matrix,
    eigenphases_from_s,
    extrapolate_power_tail,
    extrapolate_tail,
    fit_pade_coupled,
    fit_pade_single,
    kmatrix_to_srecord,
    laurent_coefficients,
    pairing_defect,
    pole_balance,
    scan_orders,
    select_pade_coupled,
    select_pade_single,
    spectral_decompose,
    srecord_to_kmatrix,
)
from marchenko_lab.synth import bargmann_phase, bargmann_pole_weight, bargmann_smatrix

coefficient = st.floats(min_value=-2.0, max_value=2.0)


def odd(values):
    coeffs = [0.0] * (2 * len(values))
    coeffs[1::2] = values
    return ParityPolynomial(coefficients=coeffs, parity="odd")


def even(values):
    coeffs = [1.0] + [0.0] * (2 * len(values))
    coeffs[2::2] = values
    return ParityPolynomial(coefficients=coeffs, parity="even")


@pytest.fixture
def bargmann():
    """One-pole rational S-matrix with a = 0.5, b = 1.5."""
    return bargmann_smatrix(0.5, 1.5, q_max=3.0)


def test_parity_polynomial_validation():
    """Coefficients of the wrong parity are rejected."""
    with pytest.raises(ValueError):
        ParityPolynomial(coefficients=[1.0, 2.0], parity="even")
    assert ParityPolynomial(coefficients=[0.0, 1.0, 0.0, 0.0], parity="odd").degree == 1


def test_chebyshev_nodes_inside_range():
    """Nodes are distinct and strictly inside (0, q_max)."""
    nodes = chebyshev_nodes(7, 2.5)
    assert len(nodes) == 7
    assert np.all((nodes > 0) & (nodes < 2.5))
    assert len(np.unique(nodes)) == 7


def test_fit_zero_phase_is_identity():
    """A vanishing phase curve gives S ≡ 1 and no poles."""
    smat = fit_pade_single(lambda q: np.zeros_like(q), 6, 0, 2.0)
    assert smat.f1.is_zero
    assert smat.f2.coefficients == [1.0]
    assert smat(1.3) == pytest.approx(1.0)
    assert spectral_decompose(smat).is_empty


def test_fit_recovers_arctan_curve():
    """δ = −atan(q) is reproduced exactly by f1 = q, f2 = 1."""
    smat = fit_pade_single(lambda q: -np.arctan(q), 2, 0, 2.0)
    assert smat.f1.coefficients == pytest.approx([0.0, 1.0], abs=1e-12)
    assert smat.f2.coefficients == pytest.approx([1.0], abs=1e-12)


def test_fit_collocation_exact_at_nodes():
    """The fitted phase matches the curve at every node."""
    def curve(q):
        return 0.3 * np.sin(q)

    smat = fit_pade_single(curve, 6, 0, 2.0)
    nodes = chebyshev_nodes(6, 2.0)
    np.testing.assert_allclose(smat(nodes), np.exp(2j * curve(nodes)), atol=1e-10)


def test_fit_bargmann_curve(bargmann):
    """Two nodes recover the Bargmann S-matrix and its pole."""
    smat = fit_pade_single(lambda q: bargmann_phase(q, 0.5, 1.5), 2, 0, 3.0)
    q = np.linspace(0.1, 3.0, 20)
    np.testing.assert_allclose(smat(q), bargmann(q), rtol=1e-10)
    spec = spectral_decompose(smat)
    assert len(spec.poles) == 1
    assert spec.poles[0].beta == pytest.approx(1.5j, abs=1e-10)


def test_fit_requires_two_nodes():
    """A single collocation node is rejected."""
    with pytest.raises(DomainError):
        fit_pade_single(lambda q: q, 1, 0, 1.0)


def test_fit_levinson_offset():
    """Subtracting nπ leaves S unchanged."""
    def curve(q):
        return np.pi - np.arctan(q)

    smat = fit_pade_single(curve, 2, 0, 2.0, levinson=1)
    assert smat(0.7) == pytest.approx(np.exp(2j * curve(0.7)), rel=1e-12)


def test_fit_pins_bound_pole():
    """bound_momenta force a zero of f2 + i f1 at q = iκ."""
    def curve(q):
        return np.pi - 2 * np.arctan(q / 0.4) + 0.2 * np.sin(q)

    smat = fit_pade_single(curve, 6, 0, 3.0, levinson=1, bound_momenta=[0.3])
    assert abs(smat.denominator()(0.3j)) < 1e-9


def test_bargmann_pole_weight(bargmann):
    """Residue weight 2b(a − b)/(a + b) at the pole ib."""
    spec = spectral_decompose(bargmann)
    assert len(spec.poles) == 1
    pole = spec.poles[0]
    assert pole.beta == pytest.approx(1.5j, abs=1e-12)
    assert pole.order == 1
    assert pole.weight == pytest.approx(bargmann_pole_weight(0.5, 1.5), rel=1e-12)
    assert pole.weight == pytest.approx(-1.5, rel=1e-12)


def test_laurent_matches_closed_weight(bargmann):
    """Contour extraction reproduces the closed-form residue weight."""
    order, c_m1, _ = laurent_coefficients(bargmann, 1.5j, 0.5)
    assert order == 1
    assert 1j * c_m1 == pytest.approx(-1.5, rel=1e-9)


def test_squared_channel_gives_second_order(bargmann):
    """A power-2 channel turns the pole second order."""
    squared = bargmann.model_copy(update={"power": 2})
    spec = spectral_decompose(squared)
    assert len(spec.poles) == 1
    assert spec.poles[0].order == 2
    assert spec.poles[0].weight2 is not None


def test_real_axis_pole_rejected():
    """A denominator root on the real axis is refused."""
    smat = RationalSMatrix(
        f1=ParityPolynomial(coefficients=[0.0, -1.0, 0.0, 1.0], parity="odd"),
        f2=ParityPolynomial(coefficients=[1.0, 0.0, -1.0], parity="even"),
    )
    with pytest.raises(RealAxisPoleError):
        spectral_decompose(smat)


def test_pairing_of_fitted_poles():
    """Poles come in pairs β, −β̄."""
    def curve(q):
        return 0.6 * q * np.exp(-0.5 * q * q)

    smat = fit_pade_single(curve, 6, 0, 3.0)
    spec = spectral_decompose(smat)
    assert pairing_defect(spec) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    c1=st.lists(coefficient, min_size=1, max_size=3),
    c2=st.lists(coefficient, min_size=1, max_size=3),
    q=st.floats(min_value=-5.0, max_value=5.0),
)
def test_single_unitarity_and_reflection(c1, c2, q):
    """|S(q)| = 1 and S(q)S(−q) = 1 on the real axis."""
    smat = RationalSMatrix(f1=odd(c1), f2=even(c2))
    denominator = smat.denominator()(q)
    if abs(denominator) < 1e-6:
        return
    assert abs(smat(q)) == pytest.approx(1.0, abs=1e-12)
    assert smat(q) * smat(-q) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    c=st.lists(coefficient, min_size=6, max_size=6),
    q=st.floats(min_value=0.01, max_value=5.0),
)
def test_coupled_unitarity(c, q):
    """S S† = I and S is symmetric for real q."""
    smat = CoupledRationalSMatrix(
        f1_ch1=odd([c[0]]), f2_ch1=even([c[1]]),
        f1_ch2=odd([c[2]]), f2_ch2=even([c[3]]),
        f1_mix=odd([c[4]]), f2_mix=even([c[5]]),
    )
    if min(abs(p(q)) for p in smat.denominators()) < 1e-6:
        return
    s = smat(q)
    np.testing.assert_allclose(s @ s.conj().T, np.eye(2), atol=1e-10)
    assert s[0, 1] == pytest.approx(s[1, 0])


def test_coupled_fit_decouples():
    """With ε ≡ 0 each channel equals its squared half-angle S-matrix."""
    curves = (lambda q: 0.5 * np.arctan(q), lambda q: -0.1 * q * q / (1 + q * q),
              lambda q: np.zeros_like(q))
    smat = fit_pade_coupled(curves, 6, 0, 2, 2.0)
    assert smat.f1_mix.is_zero
    q = np.linspace(0.1, 2.0, 7)
    s = smat(q)
    np.testing.assert_allclose(s[:, 0, 0], smat.channel_matrix(1)(q), rtol=1e-12)
    np.testing.assert_allclose(s[:, 1, 1], smat.channel_matrix(2)(q), rtol=1e-12)
    nodes = chebyshev_nodes(6, 2.0)
    np.testing.assert_allclose(smat(nodes)[:, 0, 0], np.exp(1j * np.arctan(nodes)), atol=1e-10)
    np.testing.assert_allclose(s[:, 0, 1], 0.0, atol=1e-14)


def test_coupled_fit_reproduces_data_matrix():
    """The assembled S equals the bar-phase S of the data at the nodes."""
    def d1(q):
        return np.pi - 1.2 * np.arctan(q)

    def d2(q):
        return -0.05 * q**2 / (1 + q**2)

    def eps(q):
        return 0.08 * q / (1 + q**2)

    smat = fit_pade_coupled((d1, d2, eps), 6, 0, 2, 2.0, levinson=(1, 0))
    nodes = chebyshev_nodes(6, 2.0)
    np.testing.assert_allclose(smat(nodes), bar_s_matrix(d1(nodes), d2(nodes), eps(nodes)),
                               atol=1e-10)


def test_pole_balance_of_bargmann(bargmann):
    """f2 + i f1 = (q + ia)(q − ib)/(ab): one zero on each side."""
    assert pole_balance(bargmann.denominator()) == (1, 1)
    assert pole_balance(Polynomial([1.0])) == (0, 0)


def test_admissible_rejects_near_real_pole():
    """An upper zero inside the clearance band is refused unless it is a bound state."""
    near = Polynomial.fromroots([0.5 + 0.01j, -0.5j])
    with pytest.raises(RealAxisPoleError):
        check_admissible(near, 0, 2.0)
    bound = Polynomial.fromroots([0.02j, -1.0j])
    check_admissible(bound, 0, 2.0, exempt=[0.02])
    with pytest.raises(RealAxisPoleError):
        check_admissible(bound, 0, 2.0)


def test_admissible_keeps_virtual_state():
    """A shallow zero on the negative imaginary axis passes, except for mixing pairs."""
    virtual = Polynomial.fromroots([-0.05j, 1.2j])
    check_admissible(virtual, 0, 3.0)
    with pytest.raises(RealAxisPoleError):
        check_admissible(virtual, 0, 3.0, both_sides=True)
    off_axis = Polynomial.fromroots([0.4 - 0.02j, 1.2j])
    with pytest.raises(RealAxisPoleError):
        check_admissible(off_axis, 0, 3.0)


def test_admissible_checks_winding(bargmann):
    """The zero count must match the Levinson offset."""
    check_admissible(bargmann.denominator(), 0, 3.0)
    with pytest.raises(PoleCountError):
        check_admissible(bargmann.denominator(), 2, 3.0)
    with pytest.raises(PoleCountError):
        check_admissible(Polynomial.fromroots([1.0j, 2.0j]), 0, 3.0)


def _trial(deviations):
    def trial(count):
        value = deviations[count]
        if isinstance(value, Exception):
            raise value
        return f"fit{count}", value
    return trial


def test_scan_orders_first_within_tolerance():
    """Rejected orders are logged and the first passing order wins."""
    trial = _trial({8: PoleCountError("winding"), 2: 0.1, 3: 2e-4, 4: 1e-6})
    fit, count, log = scan_orders(trial, [8, 2, 3, 4], 5e-4)
    assert (fit, count) == ("fit3", 3)
    assert [entry["nodes"] for entry in log] == [8, 2, 3]
    assert "rejected" in log[0]
    assert log[2]["deviation"] == 2e-4


def test_scan_orders_falls_back_to_best(caplog):
    """Without any order inside the tolerance the smallest deviation is kept."""
    trial = _trial({2: 0.1, 3: RealAxisPoleError("near"), 4: 0.02, 5: 0.05})
    with caplog.at_level("WARNING", logger="libs.scattering.smatrix"):
        fit, count, _ = scan_orders(trial, [2, 3, 4, 5], 1e-3, "toy fit")
    assert (fit, count) == ("fit4", 4)
    assert "toy fit: no order within" in caplog.text


def test_scan_orders_without_admissible_fit():
    """Every order rejected is a real-axis failure."""
    trial = _trial({2: PoleCountError("a"), 3: RealAxisPoleError("b")})
    with pytest.raises(RealAxisPoleError):
        scan_orders(trial, [2, 3], 1e-3)


def test_select_single_stops_at_exact_order(bargmann):
    """Two nodes reproduce the Bargmann phases, so the scan stops there."""
    check_q = np.linspace(0.1, 2.0, 15)
    smat, log = select_pade_single(lambda q: bargmann_phase(q, 0.5, 1.5), 0, 3.0, check_q,
                                   bargmann_phase(check_q, 0.5, 1.5))
    assert [entry["nodes"] for entry in log] == [2]
    assert log[0]["deviation"] < 1e-10
    q = np.linspace(0.1, 3.0, 10)
    np.testing.assert_allclose(smat(q), bargmann(q), rtol=1e-10)


def test_coupled_odd_levinson_layout():
    """An odd n₁ puts the leading power in f1, with one net upper zero and S₁₁ → 1."""
    def d1(q):
        return np.pi - 2.0 * np.arctan(q / 0.4)

    def zero(q):
        return np.zeros_like(q)

    smat = fit_pade_coupled((d1, zero, zero), 3, 0, 2, 2.0, levinson=(1, 0))
    assert smat.f1_ch1.degree > smat.f2_ch1.degree
    upper, lower = pole_balance(smat.f2_ch1.polynomial + 1j * smat.f1_ch1.polynomial)
    assert upper - lower == 1
    nodes = chebyshev_nodes(3, 2.0)
    np.testing.assert_allclose(smat(nodes)[:, 0, 0], np.exp(2j * d1(nodes)), atol=1e-10)
    assert abs(smat(np.array([1e3]))[0, 0, 0] - 1.0) < 1e-2


def test_select_coupled_per_pair():
    """Each pair gets its own node count and log; the bound channel winds once."""
    def d1(q):
        return np.pi - 2.0 * np.arctan(q / 0.4)

    def d2(q):
        return -0.05 * q**2 / (1 + q**2)

    def eps(q):
        return 0.08 * q / (1 + q**2)

    check_q = np.linspace(0.1, 1.8, 12)
    smat, logs = select_pade_coupled(
        (d1, d2, eps), 0, 2, 2.0, check_q, (d1(check_q), d2(check_q), eps(check_q)),
        levinson=(1, 0),
    )
    assert set(logs) == {"channel1", "channel2", "mixing"}
    assert all(log[-1]["deviation"] <= 5e-4 for log in logs.values())
    upper, lower = pole_balance(smat.f2_ch1.polynomial + 1j * smat.f1_ch1.polynomial)
    assert upper - lower == 1
    np.testing.assert_allclose(smat(check_q), bar_s_matrix(d1(check_q), d2(check_q), eps(check_q)),
                               atol=2e-3)


def test_bound_state_weights():
    """Single weight −(−1)^l A² and coupled weight −A²[[1, −η], [−η, η²]]."""
    assert bound_state_term(0.23, 0.88, 0).weight == pytest.approx(-0.88**2)
    assert bound_state_term(0.23, 0.88, 1).weight == pytest.approx(0.88**2)
    term = coupled_bound_state_term(0.2316, 0.8802, 0.02714)
    expected = -0.8802**2 * np.array([[1.0, -0.02714], [-0.02714, 0.02714**2]])
    np.testing.assert_allclose(term.weight, expected, rtol=1e-12)
    with pytest.raises(DomainError):
        bound_state_term(-0.1, 1.0, 0)


def test_kmatrix_elastic_limit():
    """(δ̃, ρ̃) = (0.3, 0) maps to (0.3, 0)."""
    record = kmatrix_to_srecord(0.3, 0.0, q=0.5)
    assert record.delta == pytest.approx(0.3, abs=1e-14)
    assert record.rho == pytest.approx(0.0, abs=1e-7)


def test_kmatrix_pure_absorption():
    """(0, 0.2) gives S = cos 0.4, so cos²ρ = cos 0.4."""
    record = kmatrix_to_srecord(0.0, 0.2, q=0.5)
    assert record.delta == pytest.approx(0.0, abs=1e-14)
    assert record.rho == pytest.approx(np.arccos(np.sqrt(np.cos(0.4))), abs=1e-12)


def test_kmatrix_round_trip():
    """srecord → K → srecord is the identity."""
    delta, rho = 0.7, 0.35
    k_delta, k_rho = srecord_to_kmatrix(delta, rho)
    record = kmatrix_to_srecord(k_delta, k_rho, q=1.0, reference=delta)
    assert record.delta == pytest.approx(delta, abs=1e-12)
    assert record.rho == pytest.approx(rho, abs=1e-12)


def test_kmatrix_reference_keeps_branch():
    """The returned phase is shifted toward the reference."""
    record = kmatrix_to_srecord(np.pi / 3, 0.0, q=0.2, reference=np.pi + 1.0)
    assert record.delta == pytest.approx(np.pi + np.pi / 3, abs=1e-12)


def test_eigen_and_bar_agree_without_mixing():
    """Both conventions coincide at ε = 0."""
    np.testing.assert_allclose(eigen_s_matrix(0.4, -0.1, 0.0), bar_s_matrix(0.4, -0.1, 0.0))


def test_eigen_bar_conversion_consistency():
    """Converting eigen → bar → eigen returns the input parameters."""
    d1, d2, eps = 1.2, -0.3, 0.1
    bar = bar_from_eigen(d1, d2, eps)
    np.testing.assert_allclose(bar_s_matrix(*bar), eigen_s_matrix(d1, d2, eps), atol=1e-13)
    back = eigen_from_bar(*bar)
    np.testing.assert_allclose(back, (d1, d2, eps), atol=1e-12)


def test_phases_read_back_from_s():
    """eigenphases_from_s and bar_phases_from_s invert their builders."""
    np.testing.assert_allclose(
        eigenphases_from_s(eigen_s_matrix(0.9, 0.2, -0.15), reference=(0.9, 0.2)),
        (0.9, 0.2, -0.15), atol=1e-12,
    )
    np.testing.assert_allclose(
        bar_phases_from_s(bar_s_matrix(0.9, 0.2, 0.05), reference=(0.9, 0.2)),
        (0.9, 0.2, 0.05), atol=1e-12,
    )


def test_tail_of_zero_data_is_zero():
    """Elastic zero data extrapolate to zero without a model fit."""
    records = [PhaseRecord(q=q, delta=0.0) for q in (0.2, 0.4, 0.6, 0.8)]
    curve = extrapolate_tail(records, q_cap=1.2)
    np.testing.assert_allclose(curve(np.linspace(0.0, 1.2, 9)), 0.0, atol=1e-15)


def test_tail_requires_cap_beyond_data():
    """Q_max inside the data range is a domain error."""
    records = [PhaseRecord(q=q, delta=0.1) for q in (0.2, 0.4, 0.6)]
    with pytest.raises(DomainError):
        extrapolate_tail(records, q_cap=0.5)


def test_power_tail_exponent():
    """A q⁻² curve continues with exponent 2."""
    qs = np.linspace(0.5, 2.0, 8)
    curve = extrapolate_power_tail(qs, 0.1 / qs**2)
    assert curve.power == pytest.approx(2.0, rel=1e-8)
    assert curve(4.0) == pytest.approx(0.1 / 16.0, rel=1e-8)
