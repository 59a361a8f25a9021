"""Forward solvers: phase equations, direct radial integration, bound states.

All potentials are 2μV in fm⁻² and may be any callable of r: a
RadialPotential, a CoupledPotential (returning 2×2 matrices) or a plain
function. Complex potentials give complex phase shifts.

Variable-phase equation for one channel:

    δ′(r) = −(1/q) V(r) [ĵ_l(qr) cos δ − n̂_l(qr) sin δ]²

Coupled channels integrate the variable S-matrix

    S′(r) = −(i/2q) Wᵀ V W,   W = Ĵ(1 + S) + iN̂(S − 1),

and read eigenphases and mixing off S(r).
"""
from __future__ import annotations

import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq
from scipy.special import factorial2

from libs.scattering.errors import ConvergenceError, DomainError
from libs.scattering.models import BoundState, PhaseFunction
from libs.scattering.smatrix import eigenphases_from_s
from libs.scattering.specfun import decaying_solution, riccati_bessel
from libs.scattering.units import energy_to_kappa, kappa_to_energy

logger = logging.getLogger(__name__)

R_START = 1e-4
DEFAULT_EXTENT = 30.0
DEGENERACY_TOL = 1e-3

Potential = Callable[[np.ndarray], np.ndarray]


def _extent(potential, r_max: Optional[float]) -> float:
    if r_max is not None:
        return float(r_max)
    grid = getattr(potential, "grid", None)
    if grid is not None:
        return float(np.asarray(grid)[-1])
    return DEFAULT_EXTENT


def _maybe_real(values, tol: float = 0.0):
    values = np.asarray(values)
    if np.iscomplexobj(values) and np.all(np.abs(values.imag) <= tol):
        return values.real
    return values


# ---------------------------------------------------------------------------
# Phase equations
# ---------------------------------------------------------------------------


def phase_eq_single(
    potential: Potential,
    q: float,
    l: int = 0,
    r_max: Optional[float] = None,
    r0: float = R_START,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    n_eval: int = 400,
) -> PhaseFunction:
    """Integrate the single-channel phase equation from r0 to r_max.

    δ(r0) is the leading Born term −V(r0) q^{2l+1} r0^{2l+3}/((2l+3)((2l+1)!!)²).

    Raises:
        DomainError: q ≤ 0
        ConvergenceError: The integrator failed (stiff or singular potential)
    """
    if q <= 0:
        raise DomainError("phase equation requires q > 0")
    r_end = _extent(potential, r_max)
    double_fact = float(factorial2(2 * l + 1))
    start = -complex(potential(r0)) * q ** (2 * l + 1) * r0 ** (2 * l + 3) / (
        (2 * l + 3) * double_fact**2
    )

    def rhs(r, y):
        jh, nh, _, _ = riccati_bessel(l, q * r)
        g = jh * np.cos(y[0]) - nh * np.sin(y[0])
        return [-complex(potential(r)) * g * g / q]

    sol = solve_ivp(rhs, (r0, r_end), [start], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if sol.status != 0:
        raise ConvergenceError(f"phase equation failed at q={q}: {sol.message}")
    r = np.linspace(r0, r_end, n_eval)
    delta = _maybe_real(sol.sol(r)[0])
    terminal = complex(sol.y[0, -1])
    terminal = terminal.real if terminal.imag == 0.0 else terminal
    return PhaseFunction(r=r, delta=delta, terminal=(terminal,))


def _pack(s: np.ndarray) -> np.ndarray:
    return np.array([s[0, 0], s[1, 1], s[0, 1]])


def _unpack(y: np.ndarray) -> np.ndarray:
    return np.array([[y[0], y[2]], [y[2], y[1]]])


def _continuous_eigenphases(smats: np.ndarray):
    deltas = np.empty((len(smats), 2), dtype=complex)
    eps = np.empty(len(smats), dtype=complex)
    reference = (0.0, 0.0)
    for k, s in enumerate(smats):
        d1, d2, e = eigenphases_from_s(s, reference=reference)
        deltas[k] = (d1, d2)
        eps[k] = e
        reference = (np.real(d1), np.real(d2))
    return deltas, eps


def phase_eq_coupled(
    potential: Potential,
    q: float,
    l1: int = 0,
    l2: int = 2,
    r_max: Optional[float] = None,
    r0: float = R_START,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    n_eval: int = 400,
) -> PhaseFunction:
    """Coupled phase functions δ₁(r), δ₂(r), ε(r) via the variable S-matrix.

    The eigenphase representation is read off S(r) at every output radius,
    so the sin(δ₁ − δ₂) denominators of the direct eigenphase equations never
    enter the integration.
    """
    if q <= 0:
        raise DomainError("phase equation requires q > 0")
    r_end = _extent(potential, r_max)
    ls = (l1, l2)
    eye = np.eye(2)

    def rhs(r, y):
        s = _unpack(y)
        pairs = [riccati_bessel(l, q * r) for l in ls]
        jmat = np.diag([p[0] for p in pairs])
        nmat = np.diag([p[1] for p in pairs])
        w = jmat @ (eye + s) + 1j * nmat @ (s - eye)
        ds = -(0.5j / q) * (w.T @ np.asarray(potential(r)) @ w)
        return _pack(ds)

    sol = solve_ivp(rhs, (r0, r_end), _pack(eye.astype(complex)), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    if sol.status != 0:
        raise ConvergenceError(f"coupled phase equation failed at q={q}: {sol.message}")
    r = np.linspace(r0, r_end, n_eval)
    smats = np.array([_unpack(y) for y in sol.sol(r).T])
    deltas, eps = _continuous_eigenphases(smats)
    s_end = _unpack(sol.y[:, -1])
    d1, d2, e = eigenphases_from_s(s_end, reference=tuple(np.real(deltas[-1])))
    return PhaseFunction(
        r=r, delta=_maybe_real(deltas, 1e-13), epsilon=_maybe_real(eps, 1e-13),
        terminal=(d1, d2, e), smatrix=s_end,
    )


def coupled_phase_integrands(
    pf: PhaseFunction, potential: Potential, q: float, l1: int = 0, l2: int = 2
) -> np.ndarray:
    """Contributions of V₁₁, V₂₂ and V₁₂ to δ₁′, δ₂′, ε′ along a phase function.

    Returns:
        ndarray: shape (n_r, 3, 3); entry [k, i, j] is the part of the
        derivative of parameter i (δ₁, δ₂, ε) driven by potential component j.
    """
    r = pf.r
    d1, d2 = pf.delta[:, 0], pf.delta[:, 1]
    eps = pf.epsilon
    j1, n1, _, _ = riccati_bessel(l1, q * r)
    j2, n2, _, _ = riccati_bessel(l2, q * r)
    vmat = np.array([np.asarray(potential(x)) for x in r])
    v1, v2, vt = vmat[:, 0, 0], vmat[:, 1, 1], vmat[:, 0, 1]
    c, s = np.cos(eps), np.sin(eps)

    g11 = j1 * np.cos(d1) - n1 * np.sin(d1)
    g12 = j2 * np.cos(d1) - n2 * np.sin(d1)
    g21 = j1 * np.cos(d2) - n1 * np.sin(d2)
    g22 = j2 * np.cos(d2) - n2 * np.sin(d2)

    out = np.zeros((len(r), 3, 3), dtype=np.result_type(d1, eps, vmat, float))
    out[:, 0, 0] = c * c * v1 * g11 * g11
    out[:, 0, 1] = s * s * v2 * g12 * g12
    out[:, 0, 2] = 2.0 * c * s * vt * g11 * g12
    out[:, 1, 0] = s * s * v1 * g21 * g21
    out[:, 1, 1] = c * c * v2 * g22 * g22
    out[:, 1, 2] = -2.0 * s * c * vt * g21 * g22

    # 1/sin(δ₁ − δ₂), smoothed inside the degeneracy band
    gap = np.sin(d1 - d2)
    inverse = gap / (gap * gap + DEGENERACY_TOL**2)
    resolved = np.abs(gap) > DEGENERACY_TOL
    if np.any(resolved):
        crossings = int(np.count_nonzero(~resolved[int(np.argmax(resolved)):]))
        if crossings:
            logger.warning(
                "ε integrand regularized at %d radii where |sin(δ₁ − δ₂)| ≤ %.0e (q=%.4g fm^-1)",
                crossings, DEGENERACY_TOL, q,
            )
    half = 0.5 * np.sin(2.0 * eps)
    out[:, 2, 0] = -half * v1 * g11 * g21 * inverse
    out[:, 2, 1] = half * v2 * g12 * g22 * inverse
    out[:, 2, 2] = vt * (c * c * g11 * g22 - s * s * g12 * g21) * inverse
    return -out / q


def coupled_phase_integrals(
    pf: PhaseFunction, potential: Potential, q: float, l1: int = 0, l2: int = 2
) -> Tuple[np.ndarray, complex]:
    """Integrated contributions I_ij = ∫ (∂ parameter i / ∂r)_j dr.

    Rows sum to the terminal δ₁ and δ₂. The ε row starts at the first radius
    where |sin(δ₁ − δ₂)| exceeds the degeneracy tolerance, and the value of ε
    there is returned alongside.
    """
    dens = coupled_phase_integrands(pf, potential, q, l1, l2)
    integrals = simpson(dens, x=pf.r, axis=0)
    gap = np.abs(np.sin(pf.delta[:, 0] - pf.delta[:, 1]))
    start = int(np.argmax(gap > DEGENERACY_TOL)) if np.any(gap > DEGENERACY_TOL) else len(pf.r) - 1
    integrals[2] = simpson(dens[start:, 2], x=pf.r[start:], axis=0) if start < len(pf.r) - 2 else 0.0
    return integrals, complex(pf.epsilon[start])


# ---------------------------------------------------------------------------
# Direct radial integration
# ---------------------------------------------------------------------------


def _numerov(fmat: np.ndarray, ls: Sequence[int], h: float) -> np.ndarray:
    """Regular matrix solution of U″ = F U on r_n = n·h, columns per channel."""
    n_pts, nc, _ = fmat.shape
    eye = np.eye(nc)
    inverse = np.linalg.inv(eye - (h * h / 12.0) * fmat[1:])
    u = np.zeros((n_pts, nc, nc), dtype=complex)
    u[1] = np.diag([h ** (l + 1) for l in ls])
    # F·U at the origin: only the l = 1 centrifugal term survives.
    fu0 = np.diag([2.0 if l == 1 else 0.0 for l in ls])
    w_prev = -(h * h / 12.0) * fu0
    w = (eye - (h * h / 12.0) * fmat[1]) @ u[1]
    for n in range(1, n_pts - 1):
        w_next = 2.0 * w - w_prev + h * h * (fmat[n] @ u[n])
        u[n + 1] = inverse[n] @ w_next
        w_prev, w = w, w_next
    return u


def _match_s(potential, q: float, ls: Sequence[int], r_match: float, h: float, gap: float):
    steps = int(np.ceil(r_match / h))
    h = r_match / steps
    r = h * np.arange(steps + 1)
    nc = len(ls)
    vals = np.array([np.asarray(potential(x), dtype=complex).reshape(nc, nc) for x in r[1:]])
    fmat = np.zeros((steps + 1, nc, nc), dtype=complex)
    centrifugal = np.array([[l * (l + 1) for l in ls]]) / r[1:, None] ** 2
    fmat[1:] = vals
    idx = np.arange(nc)
    fmat[1:, idx, idx] += centrifugal - q * q

    u = _numerov(fmat, ls, h)
    back = max(1, int(round(gap / h)))
    ra, rb = r[-1], r[-1 - back]
    ua, ub = u[-1], u[-1 - back]

    def hankels(x):
        pairs = [riccati_bessel(l, q * x) for l in ls]
        jd = np.array([p[0] for p in pairs])
        nd = np.array([p[1] for p in pairs])
        return np.diag(jd + 1j * nd), np.diag(jd - 1j * nd)

    hp_a, hm_a = hankels(ra)
    hp_b, hm_b = hankels(rb)
    ratio = ua @ np.linalg.inv(ub)
    return np.linalg.solve(hp_a - ratio @ hp_b, ratio @ hm_b - hm_a)


def _direct_s(potential, q: float, ls: Sequence[int], r_match: Optional[float], h: float):
    if q <= 0:
        raise DomainError("direct integration requires q > 0")
    r_end = _extent(potential, r_match)
    gap = min(1.0, np.pi / (4.0 * q))
    if r_end <= 2.0 * gap:
        raise ConvergenceError(f"matching radius {r_end} fm too small for q={q}")
    tail = np.max(np.abs(np.asarray(potential(r_end))))
    if tail > 1e-8:
        logger.warning("Potential not decayed at matching radius %.3g fm (|V|=%.2e)", r_end, tail)
    coarse = _match_s(potential, q, ls, r_end, h, gap)
    fine = _match_s(potential, q, ls, r_end, h / 2.0, gap)
    return fine + (fine - coarse) / 15.0


def direct_scatter(
    potential: Potential,
    q: float,
    l: int = 0,
    r_match: Optional[float] = None,
    h: float = 0.01,
    reference: Optional[float] = None,
):
    """Phase shift from Numerov integration matched to free solutions.

    Two runs at h and h/2 are Richardson-combined. δ is the principal value
    −(i/2) log S, shifted by a multiple of π toward ``reference``.
    """
    s = complex(_direct_s(potential, q, (l,), r_match, h)[0, 0])
    delta = -0.5j * np.log(s)
    if reference is not None:
        delta += np.pi * np.round((np.real(reference) - delta.real) / np.pi)
    if abs(delta.imag) < 1e-12 and not np.iscomplexobj(np.asarray(potential(1.0))):
        return float(delta.real)
    return complex(delta)


def direct_scatter_coupled(
    potential: Potential,
    q: float,
    l1: int = 0,
    l2: int = 2,
    r_match: Optional[float] = None,
    h: float = 0.01,
    reference: Optional[Tuple[float, float]] = None,
    return_matrix: bool = False,
):
    """Eigenphases (δ₁, δ₂, ε) from direct integration of the coupled equations."""
    s = _direct_s(potential, q, (l1, l2), r_match, h)
    params = eigenphases_from_s(s, reference=reference)
    if return_matrix:
        return params, s
    return params


# ---------------------------------------------------------------------------
# Bound states
# ---------------------------------------------------------------------------


def _oriented_basis(columns: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(columns)
    return q * np.sign(np.diag(r))


def _outward(potential, kappa: float, ls: Sequence[int], r_match: float, r0: float = R_START):
    nc = len(ls)
    cent = np.array([l * (l + 1) for l in ls], dtype=float)
    u0 = np.diag([r0 ** (l + 1) for l in ls])
    du0 = np.diag([(l + 1) * r0**l for l in ls])

    def rhs(r, y):
        u = y[: nc * nc].reshape(nc, nc)
        du = y[nc * nc:].reshape(nc, nc)
        vmat = np.real(np.asarray(potential(r))).reshape(nc, nc)
        f = vmat + np.diag(cent / (r * r) + kappa * kappa)
        return np.concatenate([du.ravel(), (f @ u).ravel()])

    sol = solve_ivp(rhs, (r0, r_match), np.concatenate([u0.ravel(), du0.ravel()]),
                    method="DOP853", rtol=1e-10, atol=1e-14, dense_output=True)
    if sol.status != 0:
        raise ConvergenceError(f"outward integration failed at kappa={kappa}: {sol.message}")
    return sol


def _boundary(ls: Sequence[int], kappa: float, r: float):
    pairs = [decaying_solution(l, kappa, r) for l in ls]
    return np.diag([float(p[0]) for p in pairs]), np.diag([float(p[1]) for p in pairs])


def _matching_det(potential, kappa: float, ls: Sequence[int], r_match: float) -> float:
    nc = len(ls)
    end = _outward(potential, kappa, ls, r_match).y[:, -1]
    u, du = end[: nc * nc].reshape(nc, nc), end[nc * nc:].reshape(nc, nc)
    phi, dphi = _boundary(ls, kappa, r_match)
    inner = _oriented_basis(np.vstack([u, du / kappa]))
    outer = _oriented_basis(np.vstack([phi, dphi / kappa]))
    return float(np.linalg.det(np.hstack([inner, outer])))


def _bound_state(potential, kappa: float, ls: Sequence[int], r_match: float, reduced_mass: float):
    nc = len(ls)
    sol = _outward(potential, kappa, ls, r_match)
    end = sol.y[:, -1]
    u, du = end[: nc * nc].reshape(nc, nc), end[nc * nc:].reshape(nc, nc)
    phi, dphi = _boundary(ls, kappa, r_match)
    system = np.block([[u, -phi], [du / kappa, -dphi / kappa]])
    _, _, vh = np.linalg.svd(system)
    null = vh[-1].conj()
    inner_coef, outer_coef = null[:nc].real, null[nc:].real
    if outer_coef[0] < 0:
        inner_coef, outer_coef = -inner_coef, -outer_coef

    r_in = np.linspace(R_START, r_match, 1500)
    r_out = np.linspace(r_match, r_match + 40.0 / kappa, 1500)[1:]
    inside = sol.sol(r_in)[: nc * nc].reshape(nc, nc, -1)
    waves_in = np.einsum("abr,b->ar", inside, inner_coef)
    waves_out = np.array([decaying_solution(l, kappa, r_out)[0] * outer_coef[c]
                          for c, l in enumerate(ls)])
    r = np.concatenate([r_in, r_out])
    waves = np.concatenate([waves_in, waves_out], axis=1)
    norm = np.sqrt(simpson(np.sum(waves**2, axis=0), x=r))
    waves /= norm
    amplitudes = outer_coef / norm

    u_wave = waves[0]
    w_wave = waves[1] if nc == 2 else None
    density = np.sum(waves**2, axis=0)
    rms = float(np.sqrt(0.25 * simpson(r * r * density, x=r)))
    quadrupole = 0.0
    d_prob = 0.0
    eta = 0.0
    if w_wave is not None:
        quadrupole = float(simpson(r * r * w_wave * (np.sqrt(8.0) * u_wave - w_wave), x=r) / 20.0)
        d_prob = float(simpson(w_wave**2, x=r))
        eta = float(amplitudes[1] / amplitudes[0])
    return BoundState(
        energy=kappa_to_energy(kappa, reduced_mass), kappa=kappa, r=r, u=u_wave, w=w_wave,
        A_S=float(amplitudes[0]), eta=eta, rms_radius=rms, quadrupole=quadrupole,
        d_state_probability=d_prob,
    )


def find_bound_states(
    potential: Potential,
    l: Union[int, Tuple[int, int]],
    reduced_mass: float,
    window: Tuple[float, float] = (-50.0, -0.01),
    n_scan: int = 200,
    r_match: Optional[float] = None,
) -> List[BoundState]:
    """Bound states with energies inside ``window`` (MeV, below threshold).

    Scans κ for sign changes of the normalized matching determinant between
    the outward regular solution(s) and the decaying free solutions at
    ``r_match``, then refines each with Brent's method.

    Returns:
        list: Bound states ordered from deepest to shallowest; empty if none
    """
    ls = (l,) if isinstance(l, int) else tuple(l)
    low, high = window
    if high >= 0 or low >= high:
        logger.warning("Degenerate bound-state window %s; nothing to search", window)
        return []
    r_end = _extent(potential, r_match)
    k_lo = energy_to_kappa(high, reduced_mass)
    k_hi = energy_to_kappa(low, reduced_mass)
    kappas = np.linspace(k_lo, k_hi, n_scan)
    dets = np.array([_matching_det(potential, k, ls, r_end) for k in kappas])

    states = []
    for i in np.flatnonzero(np.sign(dets[:-1]) * np.sign(dets[1:]) < 0):
        root = brentq(
            lambda k: _matching_det(potential, k, ls, r_end), kappas[i], kappas[i + 1],
            xtol=1e-13, rtol=1e-13,
        )
        states.append(_bound_state(potential, root, ls, r_end, reduced_mass))
    states.sort(key=lambda s: s.energy)
    logger.info("Found %d bound state(s) in window %s MeV", len(states), window)
    return states
