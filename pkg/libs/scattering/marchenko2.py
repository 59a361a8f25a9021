"""Coupled-channel Marchenko inversion with first- and second-order poles.

Input kernel (H(z) = diag(ĥ_{l1}(z), ĥ_{l2}(z)), H_i(x) = H(β_i x)):

    F(x, y) = Σ_i H_i(x) W¹_i H_i(y) + x H′_i(x) W²_i H_i(y) + H_i(x) W²_i y H′_i(y)

Output kernel ansatz:

    L(x, y) = Σ_i P_i(x) H_i(y) + Σ_{i: order 2} N_i(x) y H′_i(y)

Matching the coefficients of H_i(y) and y H′_i(y) in
F + L + ∫ₓ^∞ L(x,t) F(t,y) dt = 0 gives one block linear system per radius.
Unknown blocks are ordered P_1 … P_n, then N for the second-order terms in
term order; each block spans the channel index. Each row of the unknown
matrices solves the same system, so the transpose is factored once per
radius.

The same solver serves a single channel with second-order poles (one
channel, 1×1 blocks).
"""
from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad_vec

from libs.scattering.errors import AsymmetryError, SingularSystemError
from libs.scattering.models import (
    CoupledKernelSolution,
    CoupledPotential,
    PoleTerm,
    SpectralData,
)
from libs.scattering.specfun import overlap_tables, riccati_hankel, riccati_hankel_deriv

logger = logging.getLogger(__name__)

CONDITION_WARNING = 1e12
ASYMMETRY_TOL = 1e-5


def _weights(term: PoleTerm, nc: int) -> Tuple[np.ndarray, np.ndarray]:
    w1 = np.asarray(term.weight, dtype=complex).reshape(nc, nc)
    if term.order == 2 and term.weight2 is not None:
        w2 = np.asarray(term.weight2, dtype=complex).reshape(nc, nc)
    else:
        w2 = np.zeros((nc, nc), dtype=complex)
    return w1, w2


def _hankel_blocks(terms: Sequence[PoleTerm], channels: Sequence[int], x: np.ndarray):
    """ĥ and ĥ′ per term and channel: arrays of shape (n_terms, nc, n_r)."""
    h = np.array([[riccati_hankel(l, t.beta * x) for l in channels] for t in terms])
    dh = np.array([[riccati_hankel_deriv(l, t.beta * x) for l in channels] for t in terms])
    return h.reshape(len(terms), len(channels), len(x)), dh.reshape(len(terms), len(channels), len(x))


def solve_block_kernel(
    terms: Sequence[PoleTerm],
    channels: Sequence[int],
    grid: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Solve the block system on every radius.

    Returns:
        tuple: (P, N, L_diag, condition) with P of shape (n_r, n, nc, nc),
        N of shape (n_r, n2, nc, nc), L_diag of shape (n_r, nc, nc)

    Raises:
        SingularSystemError: Singular matrix at some radius
    """
    x = np.asarray(grid, dtype=float)
    nc = len(channels)
    n_r = len(x)
    n = len(terms)
    second = [i for i, t in enumerate(terms) if t.order == 2]
    n2 = len(second)
    if n == 0:
        zeros = np.zeros((n_r, nc, nc), dtype=complex)
        return (np.zeros((n_r, 0, nc, nc), complex), np.zeros((n_r, 0, nc, nc), complex),
                zeros, np.ones(n_r))

    weights = [_weights(t, nc) for t in terms]
    h, dh = _hankel_blocks(terms, channels, x)

    # Overlap integrals per (k, i) and channel, shape (n, n, nc, n_r).
    hh = np.empty((n, n, nc, n_r), dtype=complex)
    hd = np.empty_like(hh)
    dhh = np.empty_like(hh)
    dd = np.empty_like(hh)
    for k, tk in enumerate(terms):
        for i, ti in enumerate(terms):
            for c, l in enumerate(channels):
                t_hh, t_dh_ki, t_dh_ik, t_dd = overlap_tables(x, tk.beta, ti.beta, l)
                hh[k, i, c] = t_hh
                dhh[k, i, c] = t_dh_ki
                hd[k, i, c] = t_dh_ik
                dd[k, i, c] = t_dd

    size = (n + n2) * nc
    mat = np.zeros((n_r, size, size), dtype=complex)
    rhs = np.zeros((n_r, nc, size), dtype=complex)
    eye = np.eye(nc)

    def block(u: int, e: int):
        return slice(u * nc, (u + 1) * nc), slice(e * nc, (e + 1) * nc)

    def diag_times(values: np.ndarray, w: np.ndarray) -> np.ndarray:
        # diag(values[c]) @ w for each radius -> (n_r, nc, nc)
        return values.T[:, :, None] * w[None, :, :]

    for i in range(n):
        w1, w2 = weights[i]
        for k in range(n):
            rows, cols = block(k, i)
            mat[:, rows, cols] = diag_times(hh[k, i], w1) + diag_times(hd[k, i], w2)
            if k == i:
                mat[:, rows, cols] += eye
        for slot, k in enumerate(second):
            rows, cols = block(n + slot, i)
            mat[:, rows, cols] = diag_times(dhh[k, i], w1) + diag_times(dd[k, i], w2)
        hx = h[i].T
        dhx = dh[i].T * x[:, None]
        rhs[:, :, i * nc:(i + 1) * nc] = hx[:, :, None] * w1 + dhx[:, :, None] * w2

    for e_slot, i in enumerate(second):
        _, w2 = weights[i]
        e = n + e_slot
        for k in range(n):
            rows, cols = block(k, e)
            mat[:, rows, cols] = diag_times(hh[k, i], w2)
        for slot, k in enumerate(second):
            rows, cols = block(n + slot, e)
            mat[:, rows, cols] = diag_times(dhh[k, i], w2)
            if k == i:
                mat[:, rows, cols] += eye
        rhs[:, :, e * nc:(e + 1) * nc] = h[i].T[:, :, None] * w2

    condition = np.linalg.cond(mat)
    bad = ~np.isfinite(condition) | (condition > 1e16)
    if np.any(bad):
        where = int(np.argmax(bad))
        raise SingularSystemError(
            "Marchenko block system is singular", radius=float(x[where]),
            condition=float(condition[where]),
        )
    worst = int(np.argmax(condition))
    if condition[worst] > CONDITION_WARNING:
        logger.warning("Ill-conditioned Marchenko system at r=%.4g fm (cond=%.3e)",
                       x[worst], condition[worst])

    try:
        solution = np.linalg.solve(np.swapaxes(mat, 1, 2), -np.swapaxes(rhs, 1, 2))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"Marchenko block system is singular: {exc}") from exc
    unknowns = np.swapaxes(solution, 1, 2)  # (n_r, nc, size)

    blocks = unknowns.reshape(n_r, nc, n + n2, nc).transpose(0, 2, 1, 3)
    p = blocks[:, :n]
    nn = blocks[:, n:]

    l_diag = np.einsum("rkab,kbr->rab", p, h)
    if n2:
        dh_second = dh[second] * x[None, None, :]
        l_diag = l_diag + np.einsum("rkab,kbr->rab", nn, dh_second)
    return p, nn, l_diag, condition


def assemble_coupled_kernel(spec: SpectralData, l1: int, l2: int, x: float, y: float) -> np.ndarray:
    """Input kernel F(x, y) as a 2×2 matrix."""
    return input_kernel_matrix(spec.kernel_terms(), (l1, l2), x, y)


def input_kernel_matrix(
    terms: Sequence[PoleTerm], channels: Sequence[int], x: float, y: float
) -> np.ndarray:
    nc = len(channels)
    out = np.zeros((nc, nc), dtype=complex)
    for term in terms:
        w1, w2 = _weights(term, nc)
        hx = np.array([riccati_hankel(l, term.beta * x) for l in channels])
        hy = np.array([riccati_hankel(l, term.beta * y) for l in channels])
        out += hx[:, None] * w1 * hy[None, :]
        if term.order == 2:
            dx = np.array([riccati_hankel_deriv(l, term.beta * x) for l in channels])
            dy = np.array([riccati_hankel_deriv(l, term.beta * y) for l in channels])
            out += x * dx[:, None] * w2 * hy[None, :] + hx[:, None] * w2 * (y * dy)[None, :]
    return out


def output_kernel_matrix(
    p: np.ndarray, nn: np.ndarray, terms: Sequence[PoleTerm], channels: Sequence[int], y: float
) -> np.ndarray:
    """L(x, y) from the coefficients at one radius x."""
    out = np.zeros(p.shape[-2:], dtype=complex)
    second = [t for t in terms if t.order == 2]
    for k, term in enumerate(terms):
        hy = np.array([riccati_hankel(l, term.beta * y) for l in channels])
        out += p[k] * hy[None, :]
    for k, term in enumerate(second):
        dy = np.array([riccati_hankel_deriv(l, term.beta * y) for l in channels])
        out += nn[k] * (y * dy)[None, :]
    return out


def solve_coupled_kernel(
    spec: SpectralData, l1: int, l2: int, grid: np.ndarray
) -> CoupledKernelSolution:
    """Per-radius P_i(x), N_i(x) for the coupled input kernel."""
    terms = spec.kernel_terms()
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("radial grid must be positive and strictly increasing")
    p, nn, l_diag, condition = solve_block_kernel(terms, (l1, l2), grid)
    logger.info("Solved coupled Marchenko system: %d terms, %d second order, %d radii",
                len(terms), nn.shape[1], len(grid))
    return CoupledKernelSolution(
        grid=grid, P=p, N=nn, L_diag=l_diag, terms=list(terms), channels=(l1, l2),
        condition=condition,
    )


def extract_coupled_potential(
    sol: CoupledKernelSolution, asymmetry_tol: float = ASYMMETRY_TOL
) -> CoupledPotential:
    """V(r) = −2 dL(r,r)/dr entrywise, symmetrized.

    Raises:
        AsymmetryError: |V₁₂ − V₂₁| exceeds ``asymmetry_tol`` relative to max |V|
    """
    from libs.scattering.marchenko1 import five_point_derivative, realify

    deriv = np.stack(
        [np.stack([five_point_derivative(sol.L_diag[:, a, b], sol.grid) for b in range(2)], -1)
         for a in range(2)], -2,
    )
    v = -2.0 * deriv
    scale = max(float(np.max(np.abs(v))), 1e-300)
    asymmetry = float(np.max(np.abs(v[:, 0, 1] - v[:, 1, 0]))) / scale
    if asymmetry > asymmetry_tol:
        raise AsymmetryError(f"coupled potential asymmetry {asymmetry:.2e} exceeds {asymmetry_tol:.0e}")
    values = np.stack([v[:, 0, 0], v[:, 1, 1], 0.5 * (v[:, 0, 1] + v[:, 1, 0])], axis=1)
    return CoupledPotential(
        grid=sol.grid, values=realify(values), l1=sol.channels[0], l2=sol.channels[1],
        asymmetry=asymmetry,
    )


def coupled_marchenko_residual(
    sol: CoupledKernelSolution, index: int, y: float, terms: Optional[List[PoleTerm]] = None
) -> float:
    """sup-norm of F + L + ∫ L F at (x = grid[index], y)."""
    terms = sol.terms if terms is None else terms
    x = float(sol.grid[index])
    channels = sol.channels
    p, nn = sol.P[index], sol.N[index]

    def integrand(t):
        value = output_kernel_matrix(p, nn, sol.terms, channels, t) @ input_kernel_matrix(
            terms, channels, t, y
        )
        return np.concatenate([value.real.ravel(), value.imag.ravel()])

    integral, _ = quad_vec(integrand, x, np.inf, epsabs=1e-13, epsrel=1e-11)
    half = integral.size // 2
    integral = (integral[:half] + 1j * integral[half:]).reshape(len(channels), len(channels))
    total = (
        input_kernel_matrix(terms, channels, x, y)
        + output_kernel_matrix(p, nn, sol.terms, channels, y)
        + integral
    )
    return float(np.max(np.abs(total)))
