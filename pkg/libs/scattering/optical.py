"""Optical potentials V⁽¹⁾ = (1 + iα)V⁽⁰⁾ built on a real reconstructed V⁽⁰⁾.

To first order in α the phase shift becomes (1 + iα)δ⁰, so with
S = cos²ρ·e^{2iδ} the absorption fixes α = −ln(cos²ρ)/(2δ⁰). Single channels
refine that prediction by a secant iteration on the forward-solved phase;
coupled channels solve a 3×3 linear system built from the response of the
eigenphases to separate scalings of V₁₁, V₂₂ and V₁₂.
"""
from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from libs.scattering.errors import DomainError, SingularSystemError
from libs.scattering.forward import coupled_phase_integrals, phase_eq_coupled, phase_eq_single
from libs.scattering.models import (
    CoupledPotential,
    OpticalEntry,
    OpticalScaling,
    PhaseRecord,
    RadialPotential,
)
from libs.scattering.smatrix import bar_s_matrix, eigenphases_from_s

logger = logging.getLogger(__name__)

MAX_SECANT_ITERATIONS = 50
JACOBIAN_STEP = 1e-4
GAIN_TOL = 1e-9


def alpha_predict_single(delta0: float, rho: float) -> float:
    """α = −ln(cos²ρ)/(2δ⁰); zero for an elastic record.

    Raises:
        DomainError: ρ > 0 with δ⁰ = 0
    """
    if rho == 0.0:
        return 0.0
    if delta0 == 0.0:
        raise DomainError("alpha is undefined for absorption with a vanishing real phase shift")
    return float(-np.log(np.cos(rho) ** 2) / (2.0 * delta0))


def inelasticity_of(delta: complex) -> Tuple[float, float]:
    """(Re δ, ρ) with cos²ρ = e^{−2 Im δ}.

    Raises:
        DomainError: Im δ < 0 beyond tolerance (flux gain)
    """
    delta = complex(delta)
    if delta.imag < -GAIN_TOL:
        raise DomainError(f"Im delta={delta.imag:.3e} < 0 means flux gain")
    absorption = np.exp(-2.0 * max(delta.imag, 0.0))
    return delta.real, float(np.arccos(np.sqrt(absorption)))


def _scaled(potential, factor):
    if isinstance(potential, (RadialPotential, CoupledPotential)):
        return potential.scaled(factor)
    if np.ndim(factor) == 0:
        return lambda r: factor * np.asarray(potential(r))
    f11, f22, f12 = factor
    scale = np.array([[f11, f12], [f12, f22]])
    return lambda r: scale * np.asarray(potential(r))


def _absorption_tolerance(record: PhaseRecord) -> float:
    return max(1e-6, abs(np.sin(2.0 * record.rho)) * record.rho_err)


def alpha_refine_single(
    v0,
    records: Sequence[PhaseRecord],
    l: int = 0,
    alpha_init: Optional[Sequence[float]] = None,
    r_max: Optional[float] = None,
) -> OpticalScaling:
    """Per-energy secant refinement of α against measured inelasticities.

    Each entry is converged when |cos²ρ_model − cos²ρ_data| is below 1e-6 or
    the data uncertainty, whichever is looser. Energies that do not converge
    in 50 iterations keep the predicted α and are flagged.
    """
    entries: List[OpticalEntry] = []
    for index, record in enumerate(records):
        delta0 = float(np.real(phase_eq_single(v0, record.q, l, r_max=r_max).terminal[0]))
        if record.rho == 0.0:
            entries.append(OpticalEntry(q=record.q, alpha=(0.0,), provenance="refined",
                                        real_phase_shift=delta0))
            continue
        predicted = alpha_predict_single(delta0, record.rho) if alpha_init is None else float(
            alpha_init[index]
        )
        target = -np.log(np.cos(record.rho) ** 2) / 2.0
        tol = _absorption_tolerance(record)

        def model(alpha: float) -> complex:
            return complex(phase_eq_single(_scaled(v0, 1.0 + 1j * alpha), record.q, l,
                                           r_max=r_max).terminal[0])

        a_prev, a_cur = predicted, predicted * 1.05 if predicted else 1e-3
        g_prev = model(a_prev).imag - target
        converged = False
        phase = model(a_cur)
        for _ in range(MAX_SECANT_ITERATIONS):
            g_cur = phase.imag - target
            if abs(np.exp(-2.0 * phase.imag) - np.cos(record.rho) ** 2) < tol:
                converged = True
                break
            if g_cur == g_prev:
                break
            a_prev, a_cur = a_cur, a_cur - g_cur * (a_cur - a_prev) / (g_cur - g_prev)
            g_prev = g_cur
            phase = model(a_cur)

        if converged:
            entries.append(OpticalEntry(q=record.q, alpha=(a_cur,), provenance="refined",
                                        real_phase_shift=phase.real))
        else:
            logger.warning("alpha refinement did not converge at q=%.4g fm^-1; keeping prediction",
                           record.q)
            entries.append(OpticalEntry(q=record.q, alpha=(predicted,), provenance="predicted",
                                        converged=False, real_phase_shift=delta0))
    return OpticalScaling(entries=entries, channels=(l,))


def coupled_targets(record: PhaseRecord) -> np.ndarray:
    """(Im δ₁, Im δ₂, Im ε) of the complex eigenphases of the measured S.

    The record's bar-phase S-matrix is damped as D S D with
    D = diag(cos ρ₁, cos ρ₂).
    """
    rho2 = record.rho if record.rho2 is None else record.rho2
    damp = np.diag([np.cos(record.rho), np.cos(rho2)])
    smat = damp @ bar_s_matrix(record.delta, record.delta2, record.epsilon) @ damp
    params = eigenphases_from_s(smat, reference=(record.delta, record.delta2))
    return np.imag(np.array(params, dtype=complex))


def coupled_jacobian(
    v0, q: float, l1: int = 0, l2: int = 2, step: float = JACOBIAN_STEP, r_max: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """J_ij = Im ∂(δ₁, δ₂, ε)_i / ∂α_j at α = 0 by central differences.

    Returns:
        tuple: (J, real terminal parameters of V⁽⁰⁾)
    """
    base = phase_eq_coupled(v0, q, l1, l2, r_max=r_max)
    jac = np.zeros((3, 3))
    for j in range(3):
        factors = np.ones(3, dtype=complex)
        factors[j] = 1.0 + 1j * step
        plus = np.array(phase_eq_coupled(_scaled(v0, factors), q, l1, l2, r_max=r_max).terminal)
        factors[j] = 1.0 - 1j * step
        minus = np.array(phase_eq_coupled(_scaled(v0, factors), q, l1, l2, r_max=r_max).terminal)
        jac[:, j] = np.imag(plus - minus) / (2.0 * step)
    return jac, np.real(np.array(base.terminal, dtype=complex))


def jacobian_diagnostics(
    v0, q: float, l1: int = 0, l2: int = 2, step: float = JACOBIAN_STEP, r_max: Optional[float] = None
) -> Dict[str, object]:
    """Compare the difference Jacobian with the phase-function integrals.

    ``integral_gap`` is ‖J − I⁽⁰⁾‖/‖I⁽⁰⁾‖; ``row_sum_error`` is the largest
    |Σ_j I⁽⁰⁾_ij − δ_i⁽⁰⁾| over the two channels.
    """
    jac, params = coupled_jacobian(v0, q, l1, l2, step, r_max)
    pf = phase_eq_coupled(v0, q, l1, l2, r_max=r_max, n_eval=2000)
    integrals, _ = coupled_phase_integrals(pf, v0, q, l1, l2)
    integrals = np.real(integrals)
    gap = float(np.linalg.norm(jac - integrals) / max(np.linalg.norm(integrals), 1e-300))
    row_error = float(np.max(np.abs(integrals[:2].sum(axis=1) - params[:2])))
    return {"jacobian": jac, "integrals": integrals, "integral_gap": gap,
            "row_sum_error": row_error}


def alpha_predict_coupled(
    v0,
    record: PhaseRecord,
    l1: int = 0,
    l2: int = 2,
    step: float = JACOBIAN_STEP,
    r_max: Optional[float] = None,
) -> Tuple[float, float, float]:
    """Solve J·(α₁, α₂, α₃) = (Im δ₁, Im δ₂, Im ε).

    Raises:
        SingularSystemError: Jacobian singular (a channel insensitive to a component)
    """
    target = coupled_targets(record)
    if np.all(np.abs(target) < 1e-14):
        return (0.0, 0.0, 0.0)
    jac, _ = coupled_jacobian(v0, record.q, l1, l2, step, r_max)
    condition = np.linalg.cond(jac)
    if not np.isfinite(condition) or condition > 1e10:
        raise SingularSystemError("coupled optical Jacobian is singular", condition=condition)
    alphas = np.linalg.solve(jac, target)
    return tuple(float(a) for a in alphas)


def apply_scaling(
    v0: Union[RadialPotential, CoupledPotential], scaling: OpticalScaling, q: float
) -> Union[RadialPotential, CoupledPotential]:
    """(1 + iα(q))·V⁽⁰⁾ with channel-specific α for coupled potentials."""
    alpha, flag = scaling.alpha_at(q)
    if flag == "extrapolated":
        logger.info("alpha at q=%.4g fm^-1 held flat from the nearest entry", q)
    if isinstance(v0, CoupledPotential):
        return v0.scaled([1.0 + 1j * a for a in alpha])
    return v0.scaled(1.0 + 1j * alpha[0])
