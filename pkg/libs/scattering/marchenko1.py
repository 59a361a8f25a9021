"""Single-channel Marchenko inversion for a degenerate (pole-sum) kernel.

With F(x, y) = Σ_i b_i ĥ_l(β_i x) ĥ_l(β_i y) the output kernel is
L(x, y) = Σ_i P_i(x) ĥ_l(β_i y), where at each radius

    Σ_k A_ik(x) P_k(x) = D_i(x),
    A_ik = δ_ik + b_i ∫ₓ^∞ ĥ_l(β_i t) ĥ_l(β_k t) dt,   D_i = −b_i ĥ_l(β_i x),

and the potential (2m absorbed, fm⁻²) is V(r) = −2 dL(r, r)/dr.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad_vec

from libs.scattering.errors import SingularSystemError
from libs.scattering.models import KernelSolution, PoleTerm, RadialPotential, SpectralData
from libs.scattering.specfun import overlap_tables, riccati_hankel, riccati_hankel_deriv

logger = logging.getLogger(__name__)

CONDITION_WARNING = 1e12
REALITY_TOL = 1e-8


def default_grid(r_min: float = 0.01, r_max: float = 12.0, points: int = 1200) -> np.ndarray:
    """Uniform radial grid on [r_min, r_max]."""
    return np.linspace(r_min, r_max, points)


def assemble_kernel_row(
    x, spec_or_terms, l: int
) -> Tuple[np.ndarray, np.ndarray]:
    """A(x) and D(x) for one radius or a whole grid.

    Args:
        x: Radius (fm) or array of radii, all > 0
        spec_or_terms: SpectralData or a sequence of first-order PoleTerms
        l: Angular momentum

    Returns:
        tuple: (A, D) with shapes (..., n, n) and (..., n)
    """
    terms = _terms(spec_or_terms)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(terms)
    if n == 0:
        shape = xa.shape if np.ndim(x) else ()
        return np.zeros(shape + (0, 0), complex), np.zeros(shape + (0,), complex)
    if any(t.order != 1 for t in terms):
        raise ValueError("assemble_kernel_row handles first-order terms only")

    betas = np.array([t.beta for t in terms])
    weights = np.array([complex(t.weight) for t in terms])
    overlap = np.empty((len(xa), n, n), dtype=complex)
    for i in range(n):
        for k in range(i, n):
            value = overlap_tables(xa, betas[i], betas[k], l)[0]
            overlap[:, i, k] = value
            overlap[:, k, i] = value
    a = np.eye(n) + weights[None, :, None] * overlap
    d = -weights[None, :] * np.stack([riccati_hankel(l, b * xa) for b in betas], axis=1)
    if np.ndim(x) == 0:
        return a[0], d[0]
    return a, d


def _terms(spec_or_terms) -> Sequence[PoleTerm]:
    if isinstance(spec_or_terms, SpectralData):
        return spec_or_terms.kernel_terms()
    return list(spec_or_terms)


def solve_output_kernel(spec: SpectralData, l: int, grid: np.ndarray) -> KernelSolution:
    """P(x) = A(x)⁻¹ D(x) on every grid radius, plus L(r, r).

    Second-order terms (a squared channel factor) go through the block solver
    of the coupled module with a single channel.

    Raises:
        SingularSystemError: A(x) singular at some radius
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("radial grid must be positive and strictly increasing")
    terms = spec.kernel_terms()

    if any(t.order == 2 for t in terms):
        from libs.scattering.marchenko2 import solve_block_kernel

        p, nn, l_diag, condition = solve_block_kernel(terms, (l,), grid)
        return KernelSolution(
            grid=grid, P=p[:, :, 0, 0], N=nn[:, :, 0, 0], L_diag=l_diag[:, 0, 0],
            terms=list(terms), l=l, condition=condition,
        )

    if not terms:
        return KernelSolution(
            grid=grid, P=np.zeros((len(grid), 0), complex), L_diag=np.zeros(len(grid)),
            terms=[], l=l, condition=np.ones(len(grid)),
        )

    a, d = assemble_kernel_row(grid, terms, l)
    condition = np.linalg.cond(a)
    bad = ~np.isfinite(condition) | (condition > 1e16)
    if np.any(bad):
        where = int(np.argmax(bad))
        raise SingularSystemError(
            "Marchenko system is singular", radius=float(grid[where]),
            condition=float(condition[where]),
        )
    worst = int(np.argmax(condition))
    if condition[worst] > CONDITION_WARNING:
        logger.warning("Ill-conditioned Marchenko system at r=%.4g fm (cond=%.3e)",
                       grid[worst], condition[worst])

    p = np.linalg.solve(a, d[..., None])[..., 0]
    hankel = np.stack([riccati_hankel(l, t.beta * grid) for t in terms], axis=1)
    l_diag = np.sum(p * hankel, axis=1)
    logger.info("Solved Marchenko system: %d terms on %d radii (max cond %.2e)",
                len(terms), len(grid), condition[worst])
    return KernelSolution(
        grid=grid, P=p, L_diag=l_diag, terms=list(terms), l=l, condition=condition
    )


def five_point_derivative(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Fourth-order finite-difference derivative on a uniform grid.

    Central stencil inside, one-sided five-point stencils at the two ends.
    Non-uniform grids fall back to second-order ``np.gradient``.
    """
    f = np.asarray(values)
    steps = np.diff(grid)
    if len(f) < 5 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        return np.gradient(f, grid, edge_order=2)
    h = steps[0]
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return out


def realify(values: np.ndarray, tol: float = REALITY_TOL) -> np.ndarray:
    """Drop a negligible imaginary part."""
    values = np.asarray(values)
    if not np.iscomplexobj(values):
        return values
    scale = max(float(np.max(np.abs(values.real))), 1e-300)
    if float(np.max(np.abs(values.imag))) <= tol * scale:
        return values.real.copy()
    return values


def extract_potential(sol: KernelSolution) -> RadialPotential:
    """V(r) = −2 dL(r, r)/dr on the solution grid."""
    v = -2.0 * five_point_derivative(sol.L_diag, sol.grid)
    return RadialPotential(grid=sol.grid, values=realify(v), l=sol.l)


def input_kernel(terms: Sequence[PoleTerm], l: int, x, y):
    """F(x, y) for scalar kernel terms, broadcasting over x and y."""
    total = 0.0 + 0.0j
    for term in terms:
        hx = riccati_hankel(l, term.beta * np.asarray(x, dtype=float))
        hy = riccati_hankel(l, term.beta * np.asarray(y, dtype=float))
        total = total + complex(term.weight) * hx * hy
        if term.order == 2:
            dx = riccati_hankel_deriv(l, term.beta * np.asarray(x, dtype=float))
            dy = riccati_hankel_deriv(l, term.beta * np.asarray(y, dtype=float))
            total = total + complex(term.weight2) * (x * dx * hy + hx * y * dy)
    return total


def output_kernel(sol: KernelSolution, index: int, y):
    """L(grid[index], y)."""
    total = 0.0 + 0.0j
    second = [t for t in sol.terms if t.order == 2]
    for k, term in enumerate(sol.terms):
        total = total + sol.P[index, k] * riccati_hankel(sol.l, term.beta * np.asarray(y, dtype=float))
    for k, term in enumerate(second):
        total = total + sol.N[index, k] * y * riccati_hankel_deriv(sol.l, term.beta * np.asarray(y, dtype=float))
    return total


def marchenko_residual(
    sol: KernelSolution, index: int, y: float, terms: Optional[Sequence[PoleTerm]] = None
) -> float:
    """|F + L + ∫ₓ^∞ L(x,t) F(t,y) dt| at x = grid[index]."""
    terms = sol.terms if terms is None else terms
    x = float(sol.grid[index])

    def integrand(t):
        value = output_kernel(sol, index, t) * input_kernel(terms, sol.l, t, y)
        return np.array([value.real, value.imag])

    integral, _ = quad_vec(integrand, x, np.inf, epsabs=1e-13, epsrel=1e-11)
    total = input_kernel(terms, sol.l, x, y) + output_kernel(sol, index, y) + complex(*integral)
    return float(abs(total))
