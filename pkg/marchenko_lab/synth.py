"""
Synthetic potentials and phase-shift corpora.

Built-in potentials (all 2μV in fm⁻²):
- exponential well V = −V₀ e^{−r/a}, with a closed-form bound-state condition
- one-pole Bargmann potential, whose S-matrix is exactly rational
- a coupled toy potential for S/D-like channel pairs
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from libs.scattering.forward import phase_eq_coupled, phase_eq_single
from libs.scattering.models import ParityPolynomial, PhaseRecord, RationalSMatrix
from libs.scattering.optical import inelasticity_of
from libs.scattering.smatrix import bar_phases_from_s
from marchenko_lab.kinematics import lab_energy

logger = logging.getLogger(__name__)


def exponential_well(depth: float, range_: float) -> Callable:
    """V(r) = −depth·e^{−r/range_}."""
    def potential(r):
        return -depth * np.exp(-np.asarray(r, dtype=float) / range_)
    return potential


def exponential_well_levels(depth: float, range_: float) -> List[float]:
    """Bound-state momenta κ (fm⁻¹) of the l = 0 exponential well, deepest first.

    u(r) = J_{2aκ}(2a√V₀ e^{−r/2a}) is regular at the origin only when
    J_{2aκ}(2a√V₀) = 0.
    """
    x0 = 2.0 * range_ * np.sqrt(depth)
    orders = np.linspace(1e-9, x0, 2000)
    values = jv(orders, x0)
    roots = []
    for i in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0):
        nu = brentq(lambda v: jv(v, x0), orders[i], orders[i + 1], xtol=1e-15)
        roots.append(nu / (2.0 * range_))
    return sorted(roots, reverse=True)


def bargmann_smatrix(a: float, b: float, q_max: float = 1.0) -> RationalSMatrix:
    """Rational S with f1 = (a − b)q/(ab), f2 = 1 + q²/(ab); S-matrix pole at q = ib."""
    return RationalSMatrix(
        f1=ParityPolynomial(coefficients=[0.0, (a - b) / (a * b)], parity="odd"),
        f2=ParityPolynomial(coefficients=[1.0, 0.0, 1.0 / (a * b)], parity="even"),
        l=0, q_max=q_max,
    )


def bargmann_phase(q, a: float, b: float):
    """δ(q) = atan(b/q) − atan(a/q)."""
    q = np.asarray(q, dtype=float)
    return np.arctan(b / q) - np.arctan(a / q)


def bargmann_potential(a: float, b: float) -> Callable:
    """V(r) = −8b²u/(1 + u)² with u = ((b − a)/(a + b))e^{−2br}."""
    def potential(r):
        u = (b - a) / (a + b) * np.exp(-2.0 * b * np.asarray(r, dtype=float))
        return -8.0 * b * b * u / (1.0 + u) ** 2
    return potential


def bargmann_pole_weight(a: float, b: float) -> float:
    """Kernel weight of the pole at ib: 2b(a − b)/(a + b)."""
    return 2.0 * b * (a - b) / (a + b)


def coupled_toy_potential(
    central: Tuple[float, float] = (-4.0, 0.8),
    tensor: Tuple[float, float] = (-2.0, 1.0),
    d_wave: Tuple[float, float] = (-1.0, 0.8),
) -> Callable:
    """2×2 exponential potential; each pair is (strength fm⁻², range fm)."""
    def potential(r):
        r = np.asarray(r, dtype=float)
        v11 = central[0] * np.exp(-r / central[1])
        v22 = d_wave[0] * np.exp(-r / d_wave[1])
        vt = tensor[0] * np.exp(-r / tensor[1])
        out = np.empty(r.shape + (2, 2))
        out[..., 0, 0] = v11
        out[..., 1, 1] = v22
        out[..., 0, 1] = out[..., 1, 0] = vt
        return out
    return potential


def _with_absorption(potential: Callable, factor) -> Callable:
    factor = np.asarray(factor)
    if factor.ndim == 0:
        return lambda r: factor * np.asarray(potential(r))
    f11, f22, f12 = factor
    scale = np.array([[f11, f12], [f12, f22]])
    return lambda r: scale * np.asarray(potential(r))


def make_single_corpus(
    potential: Callable,
    q_values: Sequence[float],
    l: int = 0,
    alpha: float = 0.0,
    error: float = 1e-3,
    masses: Optional[Tuple[float, float]] = None,
    r_max: float = 30.0,
) -> List[PhaseRecord]:
    """Forward-solved records of (1 + iα)V at the given momenta."""
    scaled = _with_absorption(potential, 1.0 + 1j * alpha) if alpha else potential
    records = []
    for q in q_values:
        delta = phase_eq_single(scaled, q, l, r_max=r_max).terminal[0]
        real, rho = inelasticity_of(delta)
        t_lab = lab_energy(q, *masses) if masses else None
        records.append(PhaseRecord(q=q, delta=real, rho=rho, delta_err=error,
                                   rho_err=error if alpha else 0.0, t_lab=t_lab))
    logger.info("Generated %d single-channel records", len(records))
    return records


def make_coupled_corpus(
    potential: Callable,
    q_values: Sequence[float],
    l1: int = 0,
    l2: int = 2,
    alphas: Optional[Tuple[float, float, float]] = None,
    convention: str = "bar",
    error: float = 1e-3,
    masses: Optional[Tuple[float, float]] = None,
    r_max: float = 30.0,
) -> List[PhaseRecord]:
    """Forward-solved coupled records in the bar or eigen convention.

    Phases and mixing come from the real potential. With absorption the
    channel inelasticities follow from |S_ii| = cos²ρ_i·cos 2ε̄ of the
    absorptive solve.
    """
    records = []
    reference = None
    for q in q_values:
        pf = phase_eq_coupled(potential, q, l1, l2, r_max=r_max)
        e1, e2, e_eps = (float(np.real(v)) for v in pf.terminal)
        b1, b2, b_eps = (float(v) for v in bar_phases_from_s(pf.smatrix, reference=reference or (e1, e2)))
        d1, d2, eps = (b1, b2, b_eps) if convention == "bar" else (e1, e2, e_eps)
        rho = rho2 = 0.0
        if alphas is not None:
            absorbed = phase_eq_coupled(_with_absorption(potential, 1.0 + 1j * np.asarray(alphas)),
                                        q, l1, l2, r_max=r_max).smatrix
            cos2e = np.cos(2.0 * b_eps)
            rho = float(np.arccos(np.sqrt(min(1.0, abs(absorbed[0, 0]) / cos2e))))
            rho2 = float(np.arccos(np.sqrt(min(1.0, abs(absorbed[1, 1]) / cos2e))))
        reference = (b1, b2)
        t_lab = lab_energy(q, *masses) if masses else None
        records.append(PhaseRecord(
            q=q, delta=d1, delta2=d2, epsilon=eps, rho=rho, rho2=rho2, delta_err=error,
            delta2_err=error, epsilon_err=error, t_lab=t_lab,
        ))
    logger.info("Generated %d coupled records (%s phases)", len(records), convention)
    return records


BUILTIN_POTENTIALS: Dict[str, Callable[..., Callable]] = {
    "exponential": lambda: exponential_well(3.0, 1.0),
    "bargmann": lambda: bargmann_potential(0.5, 1.5),
    "coupled-toy": coupled_toy_potential,
}
