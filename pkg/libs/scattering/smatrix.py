"""Rational S-matrices: fitting, spectral decomposition and data conversions.

Single channel:
    tan(−δ) = f1(q)/f2(q),  S = (f2 − i f1)/(f2 + i f1)

Coupled channels (bar-phase form):
    tan(−δ_i/2) = f1⁽ⁱ⁾/f2⁽ⁱ⁾,  tan(−ε) = f1⁽¹²⁾/f2⁽¹²⁾
    S₁₁ = cos 2ε e^{2iδ₁},  S₂₂ = cos 2ε e^{2iδ₂},  S₁₂ = i sin 2ε e^{i(δ₁+δ₂)}

Poles of S in the upper half plane become the terms of the Marchenko input
kernel. Near a pole β the expansion S = c₋₂/(q−β)² + c₋₁/(q−β) + … gives
kernel weights W¹ = i·c₋₁ and W² = i·c₋₂.
"""
from __future__ import annotations

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from libs.scattering.errors import (
    ContourError,
    DomainError,
    ParametrizationError,
    PoleCountError,
    RealAxisPoleError,
    SingularSystemError,
    TailFitError,
)
from libs.scattering.models import (
    CoupledRationalSMatrix,
    ParityPolynomial,
    PhaseRecord,
    PoleTerm,
    RationalSMatrix,
    SpectralData,
)

logger = logging.getLogger(__name__)

REAL_AXIS_CLEARANCE = 1e-6
KERNEL_POLE_CLEARANCE = 0.03
DEFAULT_NODE_COUNTS = tuple(range(2, 17))
POLE_MERGE_TOL = 1e-7
CONTOUR_POINTS = 128
CONTOUR_TOL = 1e-8

Curve = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def chebyshev_nodes(n: int, q_max: float) -> np.ndarray:
    """Chebyshev-spaced collocation momenta inside (0, q_max)."""
    k = np.arange(1, n + 1)
    return 0.5 * q_max * (1.0 - np.cos((2 * k - 1) * np.pi / (2 * n)))


def _fit_angle(
    nodes: np.ndarray,
    theta: np.ndarray,
    q_max: float,
    pole_momenta: Sequence[float] = (),
    odd_leading: bool = False,
) -> Tuple[ParityPolynomial, ParityPolynomial]:
    """Solve f1 cos θ + f2 sin θ = 0 at the nodes with f2(0) = 1.

    Optional ``pole_momenta`` κ add the constraints f2(iκ) + i f1(iκ) = 0.
    Works in t = q/q_max; unknown count is the smallest number covering all
    equations, so collocation is exact and any surplus freedom is removed by
    the minimum-norm solution. With ``odd_leading`` deg f1 = deg f2 + 1, so
    the fitted angle tends to −π/2 (mod π) at high momentum.
    """
    if not np.all(np.isfinite(theta)):
        raise DomainError("phase curve is not finite at every collocation node")
    if len(np.unique(np.round(nodes, 14))) != len(nodes):
        raise SingularSystemError("collocation nodes are not distinct")

    n_eq = len(nodes) + len(pole_momenta)
    if odd_leading:
        m = n_eq // 2
        odd_powers = 2 * np.arange(0, m + 1) + 1
    else:
        m = (n_eq + 1) // 2
        odd_powers = 2 * np.arange(1, m + 1) - 1
    even_powers = 2 * np.arange(1, m + 1)
    n_odd = len(odd_powers)
    t = nodes / q_max

    rows = np.hstack([
        (t[:, None] ** odd_powers) * np.cos(theta)[:, None],
        (t[:, None] ** even_powers) * np.sin(theta)[:, None],
    ])
    rhs = -np.sin(theta)
    if pole_momenta:
        # i·(is)^(2j−1) and (is)^(2j) both equal (−1)^j s^k
        s = np.asarray(pole_momenta, dtype=float) / q_max
        extra = np.hstack([
            (-1.0) ** ((odd_powers + 1) // 2) * s[:, None] ** odd_powers,
            (-1.0) ** (even_powers // 2) * s[:, None] ** even_powers,
        ])
        rows = np.vstack([rows, extra])
        rhs = np.concatenate([rhs, -np.ones(len(s))])

    scale = np.linalg.norm(rows, axis=0)
    live = scale > 0
    solution = np.zeros(rows.shape[1])
    if np.any(live):
        scaled = rows[:, live] / scale[live]
        coef, _, rank, _ = linalg.lstsq(scaled, rhs, cond=1e-13, lapack_driver="gelsy")
        if rank < scaled.shape[1]:
            logger.debug("collocation system rank %d of %d; using minimum-norm solution",
                         rank, scaled.shape[1])
        solution[live] = coef / scale[live]
        residual = np.max(np.abs(rows @ solution - rhs))
        if residual > 1e-8 * (1.0 + np.max(np.abs(rhs))):
            raise SingularSystemError(
                f"collocation system is singular or inconsistent (residual {residual:.2e})"
            )

    cutoff = 1e-12 * max(1.0, np.max(np.abs(solution)))
    solution[np.abs(solution) < cutoff] = 0.0

    f1 = np.zeros(int(odd_powers[-1]) + 1)
    f2 = np.zeros(2 * m + 1)
    f2[0] = 1.0
    f1[odd_powers] = solution[:n_odd] / q_max ** odd_powers
    f2[even_powers] = solution[n_odd:] / q_max ** even_powers
    return (
        ParityPolynomial(coefficients=list(f1), parity="odd"),
        ParityPolynomial(coefficients=list(f2), parity="even"),
    )


def _check_clearance(denominators: Sequence[Polynomial], q_max: float) -> None:
    for poly in denominators:
        if poly.degree() < 1:
            continue
        roots = poly.roots()
        close = roots[np.abs(roots.imag) < REAL_AXIS_CLEARANCE * q_max]
        if close.size:
            raise RealAxisPoleError(
                f"S-matrix pole at q={close[0]:.6g} lies within the real-axis clearance"
            )


def fit_pade_single(
    curve: Curve,
    n_nodes: int,
    l: int,
    q_max: float,
    levinson: int = 0,
    bound_momenta: Sequence[float] = (),
) -> RationalSMatrix:
    """Fit a single-channel Padé S-matrix to a phase curve.

    Args:
        curve: δ(q) on [0, q_max], δ(0) = levinson·π
        n_nodes: Number of collocation nodes (≥ 2)
        l: Angular momentum
        q_max: Upper end of the fit range (fm⁻¹)
        levinson: Number of bound (and forbidden) states n
        bound_momenta: Optional κ values forcing S-matrix poles at q = iκ

    Returns:
        RationalSMatrix with tan(−δ(q_k)) = f1(q_k)/f2(q_k) at every node

    Raises:
        SingularSystemError: Degenerate collocation system
        RealAxisPoleError: Fitted denominator vanishes near the real axis
    """
    if n_nodes < 2:
        raise DomainError("at least two collocation nodes are required")
    nodes = chebyshev_nodes(n_nodes, q_max)
    theta = np.asarray(curve(nodes), dtype=float) - levinson * np.pi
    f1, f2 = _fit_angle(nodes, theta, q_max, bound_momenta)
    smat = RationalSMatrix(f1=f1, f2=f2, l=l, q_max=q_max)
    _check_clearance([smat.denominator()], q_max)
    logger.info("Fitted single-channel S-matrix: deg f1=%d, deg f2=%d", f1.degree, f2.degree)
    return smat


def fit_pade_coupled(
    curves: Tuple[Curve, Curve, Curve],
    n_nodes: Union[int, Tuple[int, int, int]],
    l1: int,
    l2: int,
    q_max: float,
    levinson: Tuple[int, int] = (0, 0),
    convention: str = "bar",
) -> CoupledRationalSMatrix:
    """Fit the coupled Padé S-matrix to (δ₁, δ₂, ε) curves.

    Channel pairs solve tan(−(δ_i − n_iπ)/2) = f1⁽ⁱ⁾/f2⁽ⁱ⁾. The mixing pair
    solves tan(−ε) = f1⁽¹²⁾/f2⁽¹²⁾ with ε sign-flipped when n₁ + n₂ is odd, so
    the assembled S equals the data S-matrix. With ``convention="eigen"``
    the curves are eigenphases and are converted to bar phases at the nodes.
    A channel with odd n_i has deg f1⁽ⁱ⁾ = deg f2⁽ⁱ⁾ + 1, the only parity
    layout whose half angle runs from 0 to −n_iπ/2.
    """
    counts = (n_nodes,) * 3 if isinstance(n_nodes, int) else tuple(n_nodes)
    if min(counts) < 2:
        raise DomainError("at least two collocation nodes are required")

    pairs = []
    for index, count in enumerate(counts):
        nodes = chebyshev_nodes(count, q_max)
        theta = _pair_angles([c(nodes) for c in curves], levinson, convention)[index]
        pairs.append(_fit_angle(nodes, theta, q_max, odd_leading=_odd_leading(index, levinson)))

    smat = CoupledRationalSMatrix(
        f1_ch1=pairs[0][0], f2_ch1=pairs[0][1],
        f1_ch2=pairs[1][0], f2_ch2=pairs[1][1],
        f1_mix=pairs[2][0], f2_mix=pairs[2][1],
        l1=l1, l2=l2, q_max=q_max,
    )
    _check_clearance(smat.denominators(), q_max)
    return smat


def _odd_leading(index: int, levinson: Tuple[int, int]) -> bool:
    return index < 2 and levinson[index] % 2 == 1


def _pair_angles(phases, levinson: Tuple[int, int], convention: str):
    """Angles fitted by the three coupled pairs, from (δ₁, δ₂, ε) arrays."""
    d1, d2, eps = (np.asarray(v, dtype=float) for v in phases)
    if convention == "eigen":
        d1, d2, eps = bar_from_eigen(d1, d2, eps)
    elif convention != "bar":
        raise ValueError(f"unknown mixing convention '{convention}'")
    sign = -1.0 if (levinson[0] + levinson[1]) % 2 else 1.0
    return (d1 - levinson[0] * np.pi) / 2.0, (d2 - levinson[1] * np.pi) / 2.0, sign * eps


# ---------------------------------------------------------------------------
# Order selection
# ---------------------------------------------------------------------------


def pole_balance(denominator: Polynomial) -> Tuple[int, int]:
    """Number of zeros of a denominator in the upper and lower half planes."""
    if denominator.degree() < 1:
        return 0, 0
    roots = denominator.roots()
    upper = int(np.count_nonzero(roots.imag > 0))
    return upper, len(roots) - upper


def check_admissible(
    denominator: Polynomial,
    winding: int,
    q_max: float,
    clearance: float = KERNEL_POLE_CLEARANCE,
    exempt: Sequence[float] = (),
    both_sides: bool = False,
) -> None:
    """Reject a fitted denominator the Marchenko kernel cannot carry.

    Upper-half-plane zeros closer than ``clearance``·q_max to the real axis
    are refused, except near the bound-state momenta iκ in ``exempt``.
    Below the axis only zeros off the imaginary axis are refused (virtual
    states stay); ``both_sides`` refuses every zero in the lower band. The
    upper minus lower zero count must equal ``winding``, the number of half
    turns the fitted angle makes between q = 0 and q → ∞.

    Raises:
        RealAxisPoleError: Zero inside the clearance band
        PoleCountError: Zero count inconsistent with ``winding``
    """
    roots = denominator.roots() if denominator.degree() >= 1 else np.array([], dtype=complex)
    band = clearance * q_max
    for root in roots:
        upper = 0 < root.imag < band
        lower = -band < root.imag <= 0 and (both_sides or abs(root.real) > band)
        if not (upper or lower):
            continue
        if any(abs(root - 1j * k) < 0.1 * k for k in exempt):
            continue
        raise RealAxisPoleError(
            f"fitted pole at q={root:.6g} is within {band:.3g} fm^-1 of the real axis"
        )
    upper = int(np.count_nonzero(roots.imag > 0))
    lower = len(roots) - upper
    if upper - lower != winding:
        raise PoleCountError(
            f"fitted denominator has {upper} upper and {lower} lower zeros; "
            f"the Levinson offset needs a difference of {winding}"
        )


def angle_deviation(f1: ParityPolynomial, f2: ParityPolynomial, q, theta, scale: float = 1.0) -> float:
    """Largest |scale·(θ_fit − θ)| modulo π over the momenta q."""
    q = np.asarray(q, dtype=float)
    model = -np.arctan2(f1(q), f2(q))
    diff = scale * (model - np.asarray(theta, dtype=float))
    return float(np.max(np.abs((diff + np.pi / 2) % np.pi - np.pi / 2), initial=0.0))


def scan_orders(
    trial: Callable[[int], Tuple[object, float]],
    candidates: Sequence[int],
    tolerance: float,
    label: str = "fit",
) -> Tuple[object, int, List[Dict[str, Any]]]:
    """Try node counts in turn and keep the first admissible fit within tolerance.

    ``trial(n)`` returns (fit, deviation) or raises when order n is not
    admissible. Without any fit inside the tolerance, the admissible fit with
    the smallest deviation is returned.

    Returns:
        tuple: (fit, node count, trial log)

    Raises:
        RealAxisPoleError: No candidate order is admissible
    """
    log: List[Dict[str, Any]] = []
    best = None
    for count in candidates:
        try:
            fit, deviation = trial(count)
        except (SingularSystemError, RealAxisPoleError, PoleCountError) as e:
            logger.debug("%s with %d nodes rejected: %s", label, count, e)
            log.append({"nodes": count, "rejected": str(e)})
            continue
        log.append({"nodes": count, "deviation": deviation})
        if best is None or deviation < best[2]:
            best = (fit, count, deviation)
        if deviation <= tolerance:
            logger.info("%s: %d nodes, deviation %.2e rad", label, count, deviation)
            return fit, count, log
    if best is None:
        raise RealAxisPoleError(f"no admissible {label} for node counts {list(candidates)}")
    logger.warning("%s: no order within %.1e rad; using %d nodes (deviation %.2e rad)",
                   label, tolerance, best[1], best[2])
    return best[0], best[1], log


def select_pade_single(
    curve: Curve,
    l: int,
    q_max: float,
    check_q: Sequence[float],
    check_delta: Sequence[float],
    levinson: int = 0,
    bound_momenta: Sequence[float] = (),
    pin_bound_poles: bool = True,
    candidates: Sequence[int] = DEFAULT_NODE_COUNTS,
    tolerance: float = 5e-4,
    clearance: float = KERNEL_POLE_CLEARANCE,
) -> Tuple[RationalSMatrix, List[Dict[str, Any]]]:
    """Single-channel fit with the node count chosen by :func:`scan_orders`.

    Each candidate is a :func:`fit_pade_single` collocation fit; it must pass
    :func:`check_admissible` with winding 2n and reproduce ``check_delta``
    (the data phases at ``check_q``) within ``tolerance``.
    """
    pinned = bound_momenta if pin_bound_poles else ()

    def trial(count: int):
        smat = fit_pade_single(curve, count, l, q_max, levinson=levinson, bound_momenta=pinned)
        check_admissible(smat.denominator(), 2 * levinson, q_max, clearance, exempt=bound_momenta)
        return smat, angle_deviation(smat.f1, smat.f2, check_q, check_delta)

    smat, _, log = scan_orders(trial, candidates, tolerance, "single-channel fit")
    return smat, log


def select_pade_coupled(
    curves: Tuple[Curve, Curve, Curve],
    l1: int,
    l2: int,
    q_max: float,
    check_q: Sequence[float],
    check_phases: Tuple[Sequence[float], Sequence[float], Sequence[float]],
    levinson: Tuple[int, int] = (0, 0),
    convention: str = "bar",
    bound_momenta: Sequence[float] = (),
    candidates: Sequence[int] = DEFAULT_NODE_COUNTS,
    tolerance: float = 5e-4,
    clearance: float = KERNEL_POLE_CLEARANCE,
) -> Tuple[CoupledRationalSMatrix, Dict[str, List[Dict[str, Any]]]]:
    """Coupled fit with a node count chosen per pair.

    Channel pairs wind n_i half turns and are scored on 2θ (a phase-shift
    error); the mixing pair winds none and keeps its clearance on both
    sides of the axis, because both f2 ± i f1 are denominators.
    """
    targets = _pair_angles(check_phases, levinson, convention)
    windings = (levinson[0], levinson[1], 0)
    counts = []
    logs: Dict[str, List[Dict[str, Any]]] = {}
    for index, name in enumerate(("channel1", "channel2", "mixing")):
        def trial(count: int, index: int = index):
            nodes = chebyshev_nodes(count, q_max)
            theta = _pair_angles([c(nodes) for c in curves], levinson, convention)[index]
            f1, f2 = _fit_angle(nodes, theta, q_max, odd_leading=_odd_leading(index, levinson))
            denominator = f2.polynomial + 1j * f1.polynomial
            _check_clearance([denominator], q_max)
            check_admissible(denominator, windings[index], q_max, clearance,
                             exempt=bound_momenta if index < 2 else (), both_sides=index == 2)
            scale = 2.0 if index < 2 else 1.0
            return (f1, f2), angle_deviation(f1, f2, check_q, targets[index], scale)

        _, count, logs[name] = scan_orders(trial, candidates, tolerance, f"{name} fit")
        counts.append(count)
    smat = fit_pade_coupled(curves, tuple(counts), l1, l2, q_max, levinson=levinson,
                            convention=convention)
    return smat, logs


# ---------------------------------------------------------------------------
# Spectral decomposition
# ---------------------------------------------------------------------------


def laurent_coefficients(
    func: Callable[[complex], Union[complex, np.ndarray]],
    beta: complex,
    radius: float,
    n_points: int = CONTOUR_POINTS,
) -> Tuple[int, object, object]:
    """Principal part of ``func`` at ``beta`` by trapezoidal contour quadrature.

    The trapezoid rule on a circle gives c_k ρ^k = (1/M) Σ f(β + ρe^{iθ_j}) e^{−ikθ_j}.
    The expansion is validated by re-summing it at an off-contour point.

    Returns:
        tuple: (order, c₋₁, c₋₂); order 0 means the singularity cancels

    Raises:
        ContourError: Pole order above two or failed re-summation check
    """
    theta = 2.0 * np.pi * np.arange(n_points) / n_points
    values = np.array([func(beta + radius * np.exp(1j * t)) for t in theta])
    spectrum = np.fft.fft(values, axis=0) / n_points

    def size(a):
        return float(np.max(np.abs(a)))

    c_m1 = spectrum[-1] * radius
    c_m2 = spectrum[-2] * radius**2
    regular = size(spectrum[0]) + size(spectrum[1])
    principal = size(spectrum[-1]) + size(spectrum[-2])
    scale = regular + principal
    if size(spectrum[-3]) > CONTOUR_TOL * scale:
        raise ContourError(f"pole at {beta:.6g} is of order higher than two")
    if principal < 1e-10 * scale:
        return 0, 0.0 * c_m1, 0.0 * c_m2

    order = 2 if size(spectrum[-2]) > 1e-9 * scale else 1
    if order == 1:
        c_m2 = 0.0 * c_m2

    # Re-sum the Laurent series at half radius.
    offset = 0.5 * np.exp(0.7j)
    dq = radius * offset
    series = sum(spectrum[k] * offset**k for k in range(n_points // 2 - 4))
    series = series + c_m1 / dq + c_m2 / dq**2
    direct = func(beta + dq)
    error = size(series - direct) / max(1.0, size(direct))
    if error > CONTOUR_TOL:
        raise ContourError(
            f"Laurent expansion at {beta:.6g} failed validation (relative error {error:.2e})"
        )
    return order, c_m1, c_m2


def _cluster(roots: np.ndarray, tol: float) -> List[np.ndarray]:
    groups: List[List[complex]] = []
    for root in sorted(roots, key=lambda z: (z.imag, z.real)):
        for group in groups:
            if abs(group[0] - root) < tol:
                group.append(root)
                break
        else:
            groups.append([root])
    return [np.array(g) for g in groups]


def _contour_radius(center: complex, members: np.ndarray, all_roots: np.ndarray) -> float:
    others = np.array([r for r in all_roots if np.min(np.abs(members - r)) > 0])
    if others.size == 0:
        return 0.5 * abs(center)
    return 0.5 * float(np.min(np.abs(others - center)))


def _cancels(poly_num: Polynomial, beta: complex) -> bool:
    coef = np.abs(poly_num.coef)
    scale = float(np.sum(coef * np.abs(beta) ** np.arange(len(coef))))
    return abs(poly_num(beta)) < 1e-9 * max(scale, 1e-300)


def spectral_decompose(
    smat: Union[RationalSMatrix, CoupledRationalSMatrix],
    bound_states: Sequence[PoleTerm] = (),
    merge_tol: float = POLE_MERGE_TOL,
) -> SpectralData:
    """Upper-half-plane poles of S with their kernel weights.

    Single-channel simple poles use b = 2 f1(β)/(f2′(β) + i f1′(β)); clustered
    roots, squared channels and all coupled poles go through contour Laurent
    extraction. Bound-state terms are carried alongside.
    """
    tol = merge_tol * smat.q_max
    poles: List[PoleTerm] = []

    if isinstance(smat, RationalSMatrix):
        denominator = smat.denominator()
        _check_clearance([denominator], smat.q_max)
        roots = denominator.roots() if denominator.degree() >= 1 else np.array([], complex)
        upper = np.array([r for r in roots if r.imag > 0 and not _cancels(smat.numerator(), r)])
        f1 = smat.f1.polynomial
        f2 = smat.f2.polynomial
        for group in _cluster(upper, tol):
            beta = complex(np.mean(group))
            if len(group) == 1 and smat.power == 1:
                weight = 2.0 * f1(beta) / (f2.deriv()(beta) + 1j * f1.deriv()(beta))
                poles.append(PoleTerm(beta=beta, order=1, weight=complex(weight)))
                continue
            radius = _contour_radius(beta, group, roots)
            order, c_m1, c_m2 = laurent_coefficients(smat, beta, radius)
            if order == 0:
                continue
            poles.append(PoleTerm(
                beta=beta, order=order, weight=complex(1j * c_m1),
                weight2=complex(1j * c_m2) if order == 2 else None,
            ))
        channels: Tuple[int, ...] = (smat.l,)
    else:
        denominators = smat.denominators()
        _check_clearance(denominators, smat.q_max)
        all_roots = np.concatenate(
            [p.roots() for p in denominators if p.degree() >= 1] or [np.array([], complex)]
        )
        upper = all_roots[all_roots.imag > 0]
        for group in _cluster(upper, tol):
            beta = complex(np.mean(group))
            radius = _contour_radius(beta, group, all_roots)
            order, c_m1, c_m2 = laurent_coefficients(smat, beta, radius)
            if order == 0:
                logger.debug("pole at %s cancels in S", beta)
                continue
            poles.append(PoleTerm(
                beta=beta, order=order, weight=1j * np.asarray(c_m1),
                weight2=1j * np.asarray(c_m2) if order == 2 else None,
            ))
        channels = (smat.l1, smat.l2)

    logger.info("Spectral decomposition: %d poles (%d second order), %d bound states",
                len(poles), sum(p.order == 2 for p in poles), len(bound_states))
    return SpectralData(
        poles=poles, bound_states=list(bound_states), channels=channels, q_max=smat.q_max
    )


def bound_state_term(kappa: float, normalization: float, l: int) -> PoleTerm:
    """Single-channel bound-state term with weight −(−1)^l·A².

    ``normalization`` is A in u(r) → A·e^{−κr}.
    """
    if kappa <= 0:
        raise DomainError("bound-state momentum κ must be positive")
    weight = -((-1) ** l) * normalization**2
    return PoleTerm(beta=1j * kappa, order=1, weight=complex(weight), source="bound")


def coupled_bound_state_term(
    kappa: float, a_s: float, eta: float, l1: int = 0, l2: int = 2
) -> PoleTerm:
    """Coupled bound-state term M² = −c·cᵀ with c = (i^{l1} A_S, i^{l2} η A_S).

    For l1 = 0, l2 = 2 this is −A_S²·[[1, −η], [−η, η²]].
    """
    if kappa <= 0:
        raise DomainError("bound-state momentum κ must be positive")
    c = np.array([(1j ** l1) * a_s, (1j ** l2) * eta * a_s])
    return PoleTerm(beta=1j * kappa, order=1, weight=-np.outer(c, c), source="bound")


def pairing_defect(spec: SpectralData) -> float:
    """Largest distance from −β̄ to the nearest pole, over all poles."""
    betas = np.array([p.beta for p in spec.poles])
    if betas.size == 0:
        return 0.0
    mirrored = -np.conj(betas)
    return float(max(np.min(np.abs(betas - m)) for m in mirrored))


# ---------------------------------------------------------------------------
# Tail extrapolation
# ---------------------------------------------------------------------------


class TailCurve:
    """Phase curve on [0, q_cap]: data spline, blend window, model tail.

    Attributes:
        amplitude: A of the exponential model potential A·e^{−br} (fm⁻²)
        rate: b (fm⁻¹)
        q_max: End of the data range
        q_cap: End of the composite curve
    """

    def __init__(self, data_spline, model_spline, q_blend, q_max, q_cap, amplitude, rate):
        self.data_spline = data_spline
        self.model_spline = model_spline
        self.q_blend = q_blend
        self.q_max = q_max
        self.q_cap = q_cap
        self.amplitude = amplitude
        self.rate = rate

    def model(self, q):
        if self.model_spline is None:
            return np.zeros_like(np.asarray(q, dtype=float))
        return self.model_spline(q)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        data = self.data_spline(np.minimum(q, self.q_max))
        model = self.model(np.maximum(q, self.q_blend))
        t = np.clip((q - self.q_blend) / (self.q_max - self.q_blend), 0.0, 1.0)
        weight = t * t * (3.0 - 2.0 * t)
        return (1.0 - weight) * data + weight * model


def _exponential_model(amplitude: float, rate: float):
    def potential(r):
        return amplitude * np.exp(-rate * np.asarray(r, dtype=float))
    return potential


def extrapolate_tail(
    samples: Sequence[PhaseRecord],
    q_cap: float,
    l: int = 0,
    q_max: Optional[float] = None,
    model_shape: Optional[Tuple[float, float]] = None,
    levinson: int = 0,
    sigma_floor: float = 1e-3,
    window: float = 0.2,
    blend: float = 0.1,
) -> TailCurve:
    """Composite phase curve continued past the data by an exponential model.

    The model V(r) = A·e^{−br} is least-squares fitted so its phase passes
    inside the error bars over the last ``window`` fraction of the data.

    Raises:
        DomainError: q_cap not beyond the data range
        TailFitError: Model misses the matching window by more than 3σ
    """
    from libs.scattering.forward import phase_eq_single

    records = sorted(samples, key=lambda rec: rec.q)
    qs = np.array([rec.q for rec in records])
    deltas = np.array([rec.delta for rec in records])
    sigmas = np.maximum(np.array([rec.delta_err for rec in records]), sigma_floor)
    q_max = float(q_max if q_max is not None else qs[-1])
    if q_cap <= q_max:
        raise DomainError(f"Q_max={q_cap} must exceed the data range end q_max={q_max}")

    data_spline = CubicSpline(np.concatenate([[0.0], qs]), np.concatenate([[levinson * np.pi], deltas]))
    q_blend = q_max * (1.0 - blend)

    if np.all(np.abs(deltas) < 1e-12):
        return TailCurve(data_spline, None, q_blend, q_max, q_cap, 0.0, 1.0)

    in_window = qs >= q_max * (1.0 - window)
    if in_window.sum() < 3:
        in_window[-3:] = True
    wq, wd, ws = qs[in_window], deltas[in_window], sigmas[in_window]

    def model_phase(params, momenta):
        potential = _exponential_model(params[0], params[1])
        return np.array([
            phase_eq_single(potential, q, l, r_max=60.0 / params[1], rtol=1e-8).terminal[0].real
            for q in momenta
        ])

    def residuals(params):
        return (model_phase(params, wq) - wd) / ws

    if model_shape is None:
        rate0 = 1.0
        qe = wq[-1]
        amp0 = -wd[-1] * rate0 * (rate0**2 + 4 * qe**2) / (2 * qe)
    else:
        amp0, rate0 = model_shape
    fit = least_squares(residuals, x0=[amp0, rate0], bounds=([-np.inf, 0.05], [np.inf, 20.0]))
    worst = float(np.max(np.abs(fit.fun)))
    if worst > 3.0:
        raise TailFitError(
            f"exponential model misses the matching window by {worst:.2f} error bars"
        )
    amplitude, rate = (float(v) for v in fit.x)
    logger.info("Tail model A=%.5g fm^-2, b=%.5g fm^-1 (worst residual %.2f sigma)",
                amplitude, rate, worst)

    tail_q = np.linspace(q_blend, q_cap, 60)
    model_spline = CubicSpline(tail_q, model_phase(fit.x, tail_q))
    return TailCurve(data_spline, model_spline, q_blend, q_max, q_cap, amplitude, rate)


class PowerTailCurve:
    """Data spline continued by c·(q_max/q)^p past the data."""

    def __init__(self, data_spline, q_max, amplitude, power):
        self.data_spline = data_spline
        self.q_max = q_max
        self.amplitude = amplitude
        self.power = power

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        inside = self.data_spline(np.minimum(q, self.q_max))
        outside = self.amplitude * (self.q_max / np.maximum(q, self.q_max)) ** self.power
        return np.where(q <= self.q_max, inside, outside)


def extrapolate_power_tail(qs: np.ndarray, values: np.ndarray, origin: float = 0.0) -> PowerTailCurve:
    """Continue a curve that decays at high momentum (e.g. the mixing parameter).

    The exponent is the log-log slope over the last three points, at least 1.
    """
    order = np.argsort(qs)
    qs, values = np.asarray(qs)[order], np.asarray(values)[order]
    spline = CubicSpline(np.concatenate([[0.0], qs]), np.concatenate([[origin], values]))
    power = 2.0
    tail = values[-3:]
    if len(qs) >= 3 and np.all(tail != 0) and np.all(np.sign(tail) == np.sign(tail[-1])):
        slope = np.polyfit(np.log(qs[-3:]), np.log(np.abs(tail)), 1)[0]
        power = max(1.0, -slope)
    return PowerTailCurve(spline, float(qs[-1]), float(values[-1]), power)


# ---------------------------------------------------------------------------
# Conventions
# ---------------------------------------------------------------------------


def _shift_to_reference(delta, reference):
    if reference is None:
        return delta
    return delta + np.pi * np.round((np.real(reference) - np.real(delta)) / np.pi)


def kmatrix_to_srecord(
    delta_tilde: float, rho_tilde: float, q: float, reference: Optional[float] = None
) -> PhaseRecord:
    """Convert a K-matrix-type (δ̃, ρ̃) pair to the S = cos²ρ·e^{2iδ} convention.

    K_r = tan δ̃, K_i = tan² ρ̃ and S = (1 − K_i + iK_r)/(1 + K_i − iK_r). The
    returned δ is shifted by a multiple of π toward ``reference``.

    Raises:
        ParametrizationError: |S| > 1 or a vanishing denominator
    """
    k_r = np.tan(delta_tilde)
    k_i = np.tan(rho_tilde) ** 2
    denominator = 1.0 + k_i - 1j * k_r
    if abs(denominator) < 1e-14:
        raise ParametrizationError("K-matrix denominator 1 + K_i − iK_r vanishes")
    s = (1.0 - k_i + 1j * k_r) / denominator
    modulus = abs(s)
    if modulus > 1.0 + 1e-12:
        raise ParametrizationError(f"|S|={modulus:.12g} exceeds 1")
    rho = float(np.arccos(np.sqrt(min(modulus, 1.0))))
    delta = float(_shift_to_reference(np.angle(s) / 2.0, reference))
    return PhaseRecord(q=q, delta=delta, rho=rho)


def srecord_to_kmatrix(delta: float, rho: float) -> Tuple[float, float]:
    """Inverse of :func:`kmatrix_to_srecord`: (δ, ρ) → (δ̃, ρ̃)."""
    s = np.cos(rho) ** 2 * np.exp(2j * delta)
    x = (1.0 - s) / (1.0 + s)
    k_i, k_r = x.real, -x.imag
    if k_i < -1e-14:
        raise ParametrizationError("record has no K-matrix representation (K_i < 0)")
    return float(np.arctan(k_r)), float(np.arctan(np.sqrt(max(k_i, 0.0))))


def eigen_s_matrix(delta1, delta2, epsilon) -> np.ndarray:
    """S = U diag(e^{2iδ₁}, e^{2iδ₂}) Uᵀ, U = [[cos ε, −sin ε], [sin ε, cos ε]]."""
    d1, d2, eps = np.broadcast_arrays(
        np.asarray(delta1, dtype=complex), np.asarray(delta2, dtype=complex),
        np.asarray(epsilon, dtype=complex),
    )
    e1, e2 = np.exp(2j * d1), np.exp(2j * d2)
    c2, s2 = np.cos(eps) ** 2, np.sin(eps) ** 2
    out = np.empty(d1.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c2 * e1 + s2 * e2
    out[..., 1, 1] = s2 * e1 + c2 * e2
    out[..., 0, 1] = out[..., 1, 0] = np.cos(eps) * np.sin(eps) * (e1 - e2)
    return out


def bar_s_matrix(delta1, delta2, epsilon) -> np.ndarray:
    """S₁₁ = cos 2ε e^{2iδ₁}, S₂₂ = cos 2ε e^{2iδ₂}, S₁₂ = i sin 2ε e^{i(δ₁+δ₂)}."""
    d1, d2, eps = np.broadcast_arrays(
        np.asarray(delta1, dtype=complex), np.asarray(delta2, dtype=complex),
        np.asarray(epsilon, dtype=complex),
    )
    out = np.empty(d1.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.cos(2 * eps) * np.exp(2j * d1)
    out[..., 1, 1] = np.cos(2 * eps) * np.exp(2j * d2)
    out[..., 0, 1] = out[..., 1, 0] = 1j * np.sin(2 * eps) * np.exp(1j * (d1 + d2))
    return out


def eigenphases_from_s(smat: np.ndarray, reference=None):
    """(δ₁, δ₂, ε) of a symmetric 2×2 S in the eigenphase form, |Re ε| ≤ π/4.

    Complex S (absorptive) yields complex parameters. ``reference`` is an
    optional (δ₁, δ₂) pair toward which the phases are shifted by multiples
    of π.
    """
    s = np.asarray(smat, dtype=complex)
    s11, s22, s12 = s[..., 0, 0], s[..., 1, 1], s[..., 0, 1]
    trace = s11 + s22
    diff = s11 - s22
    root = np.sqrt(diff * diff + 4.0 * s12 * s12)
    degenerate = np.abs(root) < 1e-14
    safe = np.where(degenerate, 1.0, root)
    cos2 = np.where(degenerate, 1.0, diff / safe)
    flip = np.real(cos2) < 0
    root = np.where(flip, -root, root)
    safe = np.where(flip, -safe, safe)
    cos2 = np.where(degenerate, 1.0, diff / safe)
    sin2 = np.where(degenerate, 0.0, 2.0 * s12 / safe)
    e1 = (trace + root) / 2.0
    e2 = (trace - root) / 2.0
    d1 = -0.5j * np.log(e1)
    d2 = -0.5j * np.log(e2)
    eps = 0.5 * np.arctan(sin2 / cos2)
    if reference is not None:
        d1 = _shift_to_reference(d1, reference[0])
        d2 = _shift_to_reference(d2, reference[1])
    if np.all(np.abs(np.imag([d1, d2, eps])) < 1e-13):
        return np.real(d1), np.real(d2), np.real(eps)
    return d1, d2, eps


def bar_phases_from_s(smat: np.ndarray, reference=None):
    """(δ̄₁, δ̄₂, ε̄) of a unitary symmetric S in the bar-phase form."""
    s = np.asarray(smat, dtype=complex)
    s11, s22, s12 = s[..., 0, 0], s[..., 1, 1], s[..., 0, 1]
    d1 = np.angle(s11) / 2.0
    d2 = np.angle(s22) / 2.0
    if reference is not None:
        d1 = _shift_to_reference(d1, reference[0])
        d2 = _shift_to_reference(d2, reference[1])
    cos2 = np.clip(np.abs(s11), 0.0, 1.0)
    sin2 = np.real(s12 / (1j * np.exp(1j * (d1 + d2))))
    eps = 0.5 * np.arctan2(sin2, cos2)
    return d1, d2, eps


def bar_from_eigen(delta1, delta2, epsilon):
    """Convert eigenphase parameters to bar phases through S."""
    smat = eigen_s_matrix(delta1, delta2, epsilon)
    return bar_phases_from_s(smat, reference=(delta1, delta2))


def eigen_from_bar(delta1, delta2, epsilon):
    """Convert bar-phase parameters to eigenphases through S."""
    smat = bar_s_matrix(delta1, delta2, epsilon)
    return eigenphases_from_s(smat, reference=(delta1, delta2))
