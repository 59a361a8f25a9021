"""Inverse and forward scattering for single and coupled partial waves.

This package turns phase-shift curves into potentials through a rational
S-matrix and the Marchenko equation, and provides the forward solvers and
optical-potential tools used to check and extend the reconstruction.
"""
from libs.scattering.errors import (
    AsymmetryError,
    ContourError,
    ConvergenceError,
    DomainError,
    ParametrizationError,
    PoleCountError,
    RealAxisPoleError,
    ScatteringError,
    SchemaError,
    SingularSystemError,
    StageError,
    TailFitError,
)
from libs.scattering.models import (
    BoundState,
    CoupledPotential,
    CoupledRationalSMatrix,
    OpticalScaling,
    ParityPolynomial,
    PhaseRecord,
    PoleTerm,
    RadialPotential,
    RationalSMatrix,
    SpectralData,
)
from libs.scattering.smatrix import (
    extrapolate_tail,
    fit_pade_coupled,
    fit_pade_single,
    kmatrix_to_srecord,
    select_pade_coupled,
    select_pade_single,
    spectral_decompose,
)
from libs.scattering.marchenko1 import extract_potential, solve_output_kernel
from libs.scattering.marchenko2 import extract_coupled_potential, solve_coupled_kernel
from libs.scattering.forward import (
    direct_scatter,
    direct_scatter_coupled,
    find_bound_states,
    phase_eq_coupled,
    phase_eq_single,
)
from libs.scattering.optical import (
    alpha_predict_coupled,
    alpha_predict_single,
    alpha_refine_single,
    apply_scaling,
    inelasticity_of,
)

__version__ = "1.0.0"

__all__ = [
    "AsymmetryError",
    "ContourError",
    "ConvergenceError",
    "DomainError",
    "ParametrizationError",
    "PoleCountError",
    "RealAxisPoleError",
    "ScatteringError",
    "SchemaError",
    "SingularSystemError",
    "StageError",
    "TailFitError",
    "BoundState",
    "CoupledPotential",
    "CoupledRationalSMatrix",
    "OpticalScaling",
    "ParityPolynomial",
    "PhaseRecord",
    "PoleTerm",
    "RadialPotential",
    "RationalSMatrix",
    "SpectralData",
    "extrapolate_tail",
    "fit_pade_coupled",
    "fit_pade_single",
    "kmatrix_to_srecord",
    "select_pade_coupled",
    "select_pade_single",
    "spectral_decompose",
    "extract_potential",
    "solve_output_kernel",
    "extract_coupled_potential",
    "solve_coupled_kernel",
    "direct_scatter",
    "direct_scatter_coupled",
    "find_bound_states",
    "phase_eq_coupled",
    "phase_eq_single",
    "alpha_predict_coupled",
    "alpha_predict_single",
    "alpha_refine_single",
    "apply_scaling",
    "inelasticity_of",
]
