"""Riccati-Bessel and Riccati-Hankel functions and their overlap integrals.

Conventions:
    ĥ_l(z) = z·h_l⁽¹⁾(z), so ĥ₀(z) = −i·e^{iz} and ĥ₋₁(z) = e^{iz}.
    For real x the Riccati-Bessel pair is ĵ_l = x·j_l(x), n̂_l = x·y_l(x) and
    ĥ_l = ĵ_l + i·n̂_l.

The overlap integrals are the building blocks of the degenerate Marchenko
kernels:

    overlap_hh(x, a, b, l)    = ∫ₓ^∞ ĥ_l(at) ĥ_l(bt) dt
    overlap_dh_t(x, a, b, l)  = ∫ₓ^∞ ĥ′_l(at) ĥ_l(bt) t dt      (= ∂_a overlap_hh)
    overlap_dd_t2(x, a, b, l) = ∫ₓ^∞ ĥ′_l(at) ĥ′_l(bt) t² dt    (= ∂_a∂_b overlap_hh)

All three are evaluated in closed form; ``method="quad"`` switches to
multiprecision quadrature along a steepest-descent ray.
"""
from __future__ import annotations

import logging
from typing import Tuple, Union

import mpmath
import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from libs.scattering.errors import DomainError
from libs.scattering.models import AmplitudePhase

logger = logging.getLogger(__name__)

MAX_L = 6

# Relative |a − b|/(|a|+|b|) below which the coincident expansions are used.
# The distinct forms lose digits as 1/rel (hh, dh) and 1/rel² (dd).
COINCIDENCE_TOL = 1e-5
DD_COINCIDENCE_TOL = 1e-4

_UNWRAP_STEP = 0.5

Number = Union[complex, np.ndarray]


def _check_l(l: int, lowest: int = -1) -> None:
    if int(l) != l or l < lowest or l > MAX_L:
        raise DomainError(f"angular momentum l={l} outside supported range {lowest}..{MAX_L}")


def _prepare(z: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=complex)
    if np.any(arr == 0):
        raise DomainError("Riccati-Hankel functions are singular at z = 0")
    if np.any(-arr.imag > 700.0):
        raise OverflowError("e^{iz} overflows for Im z < -700; rescale the argument")
    return arr, arr.ndim == 0


def _out(value: np.ndarray, scalar: bool) -> Number:
    return complex(value) if scalar else value


def hankel_sequence(lmax: int, z: ArrayLike) -> list:
    """Return [ĥ₋₁(z), ĥ₀(z), …, ĥ_lmax(z)] by upward recursion."""
    arr, _ = _prepare(z)
    seq = [np.exp(1j * arr)]
    seq.append(-1j * seq[0])
    for k in range(0, lmax):
        seq.append(((2 * k + 1) / arr) * seq[-1] - seq[-2])
    return seq


def riccati_hankel(l: int, z: ArrayLike) -> Number:
    """Outgoing Riccati-Hankel function ĥ_l(z) for l ≥ −1.

    Args:
        l: Angular momentum (−1 is accepted for the kernel formulas)
        z: Complex argument (scalar or array), z ≠ 0

    Returns:
        complex or ndarray: ĥ_l(z)

    Raises:
        DomainError: z = 0 or l out of range
        OverflowError: Im z so negative that e^{iz} overflows

    Example:
        ```python
        riccati_hankel(0, 1j)    # -0.36787944117144233j
        ```
    """
    _check_l(l)
    _, scalar = _prepare(z)
    seq = hankel_sequence(max(l, 0), z)
    return _out(seq[l + 1], scalar)


def riccati_hankel_deriv(l: int, z: ArrayLike) -> Number:
    """Derivative dĥ_l/dz = ĥ_{l−1}(z) − (l/z)·ĥ_l(z); for l = −1 it is −ĥ₀(z)."""
    _check_l(l)
    arr, scalar = _prepare(z)
    seq = hankel_sequence(max(l, 0), arr)
    if l == -1:
        return _out(-seq[1], scalar)
    return _out(seq[l] - (l / arr) * seq[l + 1], scalar)


def riccati_bessel(l: int, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Real Riccati-Bessel pair and derivatives: (ĵ_l, n̂_l, ĵ′_l, n̂′_l)."""
    _check_l(l, lowest=0)
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("Riccati-Bessel functions require x > 0")
    j = special.spherical_jn(l, xa)
    y = special.spherical_yn(l, xa)
    jp = special.spherical_jn(l, xa, derivative=True)
    yp = special.spherical_yn(l, xa, derivative=True)
    return xa * j, xa * y, j + xa * jp, y + xa * yp


def decaying_solution(l: int, kappa: float, r: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Real free solution decaying like e^{−κr} and its r-derivative.

    φ_l(r) = Re[i^{l+1} ĥ_l(iκr)] equals e^{−κr}(1 + …) with a polynomial in
    1/(κr); e.g. φ₂ = e^{−κr}(1 + 3/(κr) + 3/(κr)²).
    """
    ra = np.asarray(r, dtype=float)
    z = 1j * kappa * ra
    phase = 1j ** (l + 1)
    value = np.real(phase * riccati_hankel(l, z))
    slope = np.real(phase * 1j * kappa * riccati_hankel_deriv(l, z))
    return value, slope


def amplitude_phase(l: int, x: ArrayLike) -> AmplitudePhase:
    """Amplitude D̂_l and branch-continuous phase δ̂_l of the Riccati-Bessel pair.

    ĵ_l = D̂_l sin δ̂_l and n̂_l = −D̂_l cos δ̂_l, with δ̂_l(0⁺) = 0 and
    δ̂_l(x) → x − lπ/2. Since dδ̂_l/dx = 1/D̂_l² ≤ 1 the phase is unwrapped
    along a coarse grid from the origin, where the principal value is exact.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("amplitude_phase requires x > 0")
    jh, nh, _, _ = riccati_bessel(l, xa)
    amplitude = np.hypot(jh, nh)
    principal = np.arctan2(jh, -nh)

    xmax = float(np.max(xa))
    phase = principal
    if xmax >= np.pi:
        grid = np.append(np.arange(_UNWRAP_STEP, xmax, _UNWRAP_STEP), xmax)
        gj, gn, _, _ = riccati_bessel(l, grid)
        unwrapped = np.unwrap(np.arctan2(gj, -gn))
        estimate = np.interp(xa, grid, unwrapped)
        turns = np.round((estimate - principal) / (2.0 * np.pi))
        phase = principal + 2.0 * np.pi * turns

    if xa.ndim == 0:
        return AmplitudePhase(l=l, x=float(xa), amplitude=float(amplitude), phase=float(phase))
    return AmplitudePhase(l=l, x=xa, amplitude=amplitude, phase=phase)


# ---------------------------------------------------------------------------
# Overlap integrals
# ---------------------------------------------------------------------------


def _triplet(l: int, z: np.ndarray):
    """ĥ_{l−1}, ĥ_l, ĥ_{l+1} at z."""
    seq = hankel_sequence(l + 1, z)
    return seq[l], seq[l + 1], seq[l + 2]


def _coincident(x: np.ndarray, a: np.ndarray, l: int):
    """Coincident-argument integrals (I1, J, K) at a = b, plus ∂_aJ − ∂_bJ there.

    Along the diagonal dJ/da = ∂_aJ + ∂_bJ and ∂_bJ = K, which gives the
    antisymmetric slope used next to the coincidence.
    """
    z = a * x
    p, s, s_next = _triplet(l, z)
    c = l * (l + 1)
    i1 = -x * (s * s - p * s_next) / 2.0
    j = -(x * s * s + i1) / (2.0 * a)
    u = s
    du = a * (p - (l / z) * s)
    energy = du * du + (a * a - c / (x * x)) * u * u
    y = (-x * x * u * du + x * u * u + (1.0 - 2.0 * c / 3.0) * i1 - x**3 * energy / 3.0) / 2.0
    k = y / (a * a)
    skew = -(x * x) * s * du / (a * a) - 2.0 * j / a - 2.0 * k
    return i1, j, k, skew


def _distinct(x: np.ndarray, a: np.ndarray, b: np.ndarray, l: int):
    """Distinct-argument integrals (I1, J(a,b), J(b,a), K)."""
    za = a * x
    zb = b * x
    p, s, _ = _triplet(l, za)
    P, S, _ = _triplet(l, zb)
    s_a = x * (p - (l / za) * s)
    p_a = x * ((l / za) * p - s)
    S_b = x * (P - (l / zb) * S)
    P_b = x * ((l / zb) * P - S)

    d = a * a - b * b
    n = a * p * S - b * s * P
    n_a = p * S + a * p_a * S - b * s_a * P
    n_b = a * p * S_b - s * P - b * s * P_b
    n_ab = p * S_b + a * p_a * S_b - s_a * P - b * s_a * P_b

    i1 = n / d
    j_ab = n_a / d - 2.0 * a * n / d**2
    j_ba = n_b / d + 2.0 * b * n / d**2
    k = n_ab / d + 2.0 * b * n_a / d**2 - 2.0 * a * n_b / d**2 - 8.0 * a * b * n / d**3
    return i1, j_ab, j_ba, k


def overlap_tables(x: ArrayLike, a: ArrayLike, b: ArrayLike, l: int):
    """Vectorized closed forms over broadcast (x, a, b).

    Returns:
        tuple: (hh, dh_ab, dh_ba, dd) where dh_ab = ∫ t ĥ′(at)ĥ(bt) and
        dh_ba = ∫ t ĥ(at)ĥ′(bt).
    """
    _check_l(l, lowest=0)
    xa, aa, ba = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    )
    if np.any(xa <= 0):
        raise DomainError("overlap integrals require x > 0")
    if np.any(aa.imag <= 0) or np.any(ba.imag <= 0):
        raise DomainError("overlap integrals diverge unless Im β > 0 for both poles")

    rel = np.abs(aa - ba) / (np.abs(aa) + np.abs(ba))
    mid = (aa + ba) / 2.0

    hh = np.empty(xa.shape, dtype=complex)
    dh_ab = np.empty(xa.shape, dtype=complex)
    dh_ba = np.empty(xa.shape, dtype=complex)
    dd = np.empty(xa.shape, dtype=complex)

    c_i1, c_j, c_k, c_skew = _coincident(xa, mid, l)
    half = (aa - ba) / 2.0
    far = rel >= COINCIDENCE_TOL
    near = ~far
    if np.any(far):
        i1, jab, jba, k = _distinct(xa[far], aa[far], ba[far], l)
        hh[far], dh_ab[far], dh_ba[far], dd[far] = i1, jab, jba, k
    # I1 is symmetric: I1(m + d, m − d) = I1(m, m) + d²·(∂_aJ − ∂_bJ) + O(d⁴)
    hh[near] = (c_i1 + half * half * c_skew)[near]
    # J(m ± d, m ∓ d) = J(m, m) ± d·(∂_aJ − ∂_bJ) + O(d²)
    dh_ab[near] = (c_j + half * c_skew)[near]
    dh_ba[near] = (c_j - half * c_skew)[near]
    near_dd = rel < DD_COINCIDENCE_TOL
    dd[near_dd] = c_k[near_dd]
    return hh, dh_ab, dh_ba, dd


def _mp_hankel(l: int, z):
    prev = mpmath.exp(1j * z)
    cur = -1j * prev
    if l == -1:
        return prev
    for k in range(0, l):
        prev, cur = cur, ((2 * k + 1) / z) * cur - prev
    return cur


def _mp_hankel_deriv(l: int, z):
    return _mp_hankel(l - 1, z) - (l / z) * _mp_hankel(l, z)


def overlap_quad(kind: str, x: float, a: complex, b: complex, l: int, dps: int = 30) -> complex:
    """Reference value of an overlap integral by multiprecision quadrature.

    The integrand is analytic for Re t > 0 and behaves like e^{i(a+b)t}, so the
    contour is rotated onto the ray t = x + i·u/(a+b), u ≥ 0, where it decays
    without oscillating.

    Args:
        kind: "hh", "dh_t" or "dd_t2"
        x: Lower limit (> 0)
        a, b: Pole momenta with positive imaginary part
        l: Angular momentum
        dps: Working precision in decimal digits
    """
    if a.imag <= 0 or b.imag <= 0:
        raise DomainError("overlap integrals diverge unless Im β > 0 for both poles")
    with mpmath.workdps(dps):
        ma, mb, mx = mpmath.mpc(a), mpmath.mpc(b), mpmath.mpf(x)
        direction = 1j / (ma + mb)

        if kind == "hh":
            def f(t):
                return _mp_hankel(l, ma * t) * _mp_hankel(l, mb * t)
        elif kind == "dh_t":
            def f(t):
                return t * _mp_hankel_deriv(l, ma * t) * _mp_hankel(l, mb * t)
        elif kind == "dd_t2":
            def f(t):
                return t * t * _mp_hankel_deriv(l, ma * t) * _mp_hankel_deriv(l, mb * t)
        else:
            raise ValueError(f"unknown overlap kind '{kind}'")

        value = mpmath.quad(lambda u: f(mx + direction * u) * direction, [0, 1, 10, mpmath.inf])
    return complex(value)


def _dispatch(kind: str, x, a, b, l: int, method: str):
    if method == "quad":
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        values = np.array([overlap_quad(kind, float(xi), complex(a), complex(b), l) for xi in xs])
        return complex(values[0]) if np.ndim(x) == 0 else values
    if method != "closed":
        raise ValueError(f"unknown method '{method}'")
    hh, dh_ab, _, dd = overlap_tables(x, a, b, l)
    value = {"hh": hh, "dh_t": dh_ab, "dd_t2": dd}[kind]
    return complex(value) if value.ndim == 0 else value


def overlap_hh(x: ArrayLike, beta_i: complex, beta_k: complex, l: int, method: str = "closed"):
    """∫ₓ^∞ ĥ_l(β_i t) ĥ_l(β_k t) dt."""
    return _dispatch("hh", x, beta_i, beta_k, l, method)


def overlap_dh_t(x: ArrayLike, beta_i: complex, beta_k: complex, l: int, method: str = "closed"):
    """∫ₓ^∞ ĥ′_l(β_i t) ĥ_l(β_k t) t dt."""
    return _dispatch("dh_t", x, beta_i, beta_k, l, method)


def overlap_dd_t2(x: ArrayLike, beta_i: complex, beta_k: complex, l: int, method: str = "closed"):
    """∫ₓ^∞ ĥ′_l(β_i t) ĥ′_l(β_k t) t² dt."""
    return _dispatch("dd_t2", x, beta_i, beta_k, l, method)


def coincident_dd_integral(z: ArrayLike, l: int) -> Number:
    """Dimensionless coincident integral I₂(z, l) = ∫_z^∞ ĥ′_l(s)² s² ds.

    overlap_dd_t2(x, β, β, l) = I₂(βx, l)/β³. With c = l(l+1) + 1 the
    polynomial part is (−1)^{l+1}(−iz²/2 + cz/2 + ic²/4)·e^{2iz}; for l = 1

        I₂(z, 1) = (−iz²/2 + 3z/2 + 9i/4 − 1/z)·e^{2iz}.

    Tables written for the opposite sign of ĥ′² list −I₂. The commonly
    printed l = 1 entry (iz²/2 − 3z/2 − 9i/2 + 1/z)·e^{2iz} has its
    constant doubled (9i/2 for 9i/4), as do the l = 2..4 entries.
    """
    za = np.asarray(z, dtype=complex)
    _, _, k, _ = _coincident(np.abs(za) * np.ones_like(za.real), za / np.abs(za), l)
    # x = |z| and β = z/|z|, so K = I₂(z)/β³
    value = k * (za / np.abs(za)) ** 3
    return complex(value) if value.ndim == 0 else value
