"""
Relativistic two-body kinematics and unit helpers.

The lab-to-cm bridge is the fixed-target convention: projectile m1 with
kinetic energy T_lab on m2 at rest, so M² = m1² + m2² + 2m2(m1 + T_lab).
"""
import numpy as np

from libs.scattering.units import (
    HBARC,
    energy_to_kappa,
    fm2_to_mev,
    kappa_to_energy,
    mev_to_fm2,
)

__all__ = [
    "HBARC",
    "cm_momentum",
    "energy_to_kappa",
    "fm2_to_mev",
    "invariant_mass_squared",
    "kappa_to_energy",
    "lab_energy",
    "mev_to_fm2",
    "reduced_mass",
]


def invariant_mass_squared(t_lab, m1: float, m2: float):
    """M² in MeV² for projectile kinetic energy T_lab (MeV)."""
    t = np.asarray(t_lab, dtype=float)
    if np.any(t < 0):
        raise ValueError("T_lab must be non-negative")
    return m1 * m1 + m2 * m2 + 2.0 * m2 * (m1 + t)


def cm_momentum(t_lab, m1: float, m2: float):
    """Center-of-mass momentum q (fm⁻¹) for T_lab (MeV).

    q² = M²/4 − (m1² + m2²)/2 + (m1² − m2²)²/(4M²)
    """
    s = invariant_mass_squared(t_lab, m1, m2)
    q2 = s / 4.0 - (m1 * m1 + m2 * m2) / 2.0 + (m1 * m1 - m2 * m2) ** 2 / (4.0 * s)
    q = np.sqrt(np.maximum(q2, 0.0)) / HBARC
    return float(q) if np.ndim(q) == 0 else q


def lab_energy(q, m1: float, m2: float):
    """Inverse of :func:`cm_momentum`: T_lab (MeV) for q (fm⁻¹)."""
    p = np.asarray(q, dtype=float) * HBARC
    mass = np.sqrt(p * p + m1 * m1) + np.sqrt(p * p + m2 * m2)
    t = (mass * mass - m1 * m1 - m2 * m2) / (2.0 * m2) - m1
    return float(t) if np.ndim(t) == 0 else t


def reduced_mass(m1: float, m2: float) -> float:
    """Nonrelativistic reduced mass (MeV)."""
    return m1 * m2 / (m1 + m2)
