"""Unit conversions between MeV and the fm-based units of the solvers.

Potentials are stored as 2μV in fm⁻², beside q² in the radial equation.
"""
import numpy as np

HBARC = 197.3269804  # MeV·fm


def mev_to_fm2(value, reduced_mass: float):
    """Energy or potential in MeV → 2μ·value/(ħc)² in fm⁻²."""
    return 2.0 * reduced_mass * np.asarray(value) / HBARC**2


def fm2_to_mev(value, reduced_mass: float):
    """Inverse of :func:`mev_to_fm2`."""
    return np.asarray(value) * HBARC**2 / (2.0 * reduced_mass)


def energy_to_kappa(energy: float, reduced_mass: float) -> float:
    """Binding energy (MeV, negative) → κ in fm⁻¹."""
    if energy >= 0:
        raise ValueError(f"bound-state energy must be negative, got {energy}")
    return float(np.sqrt(-mev_to_fm2(energy, reduced_mass)))


def kappa_to_energy(kappa: float, reduced_mass: float) -> float:
    """κ in fm⁻¹ → binding energy (MeV, negative)."""
    return -float(fm2_to_mev(kappa * kappa, reduced_mass))
