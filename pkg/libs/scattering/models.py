"""Data models for the scattering library.

Defines pydantic schemas for:
- Riccati-Bessel amplitude/phase pairs
- Rational (Padé) S-matrices, single and coupled
- Spectral data feeding the Marchenko kernels
- Phase records, potentials, kernel solutions, phase functions, bound states
- Optical scalings

Numeric payloads are numpy arrays; models holding them set
``arbitrary_types_allowed``.
"""
from __future__ import annotations

import math
from typing import Any, List, Literal, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from scipy.interpolate import CubicSpline, PchipInterpolator

_ARRAYS = ConfigDict(arbitrary_types_allowed=True)


class AmplitudePhase(BaseModel):
    """Amplitude D̂_l(x) and phase δ̂_l(x) of the Riccati-Bessel pair.

    Attributes:
        l: Angular momentum
        x: Argument(s), scalar or array
        amplitude: D̂_l(x) = sqrt(ĵ_l² + n̂_l²)
        phase: δ̂_l(x), continuous in x
    """
    model_config = _ARRAYS

    l: int
    x: Any
    amplitude: Any
    phase: Any


class ParityPolynomial(BaseModel):
    """Real polynomial in q containing only even or only odd powers.

    Attributes:
        coefficients: Ascending-power coefficients c₀, c₁, …
        parity: "even" or "odd"

    Example:
        ```python
        f1 = ParityPolynomial(coefficients=[0.0, 1.0], parity="odd")   # q
        f1(2.0)   # 2.0
        ```
    """
    coefficients: List[float] = Field(default_factory=lambda: [0.0])
    parity: Literal["even", "odd"]

    @field_validator("coefficients")
    @classmethod
    def _strip_trailing_zeros(cls, value: List[float]) -> List[float]:
        coeffs = [float(c) for c in value] or [0.0]
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs.pop()
        return coeffs

    @model_validator(mode="after")
    def _check_parity(self) -> "ParityPolynomial":
        offset = 0 if self.parity == "even" else 1
        for power, value in enumerate(self.coefficients):
            if (power - offset) % 2 and value != 0.0:
                raise ValueError(
                    f"{self.parity} polynomial has nonzero coefficient at power {power}"
                )
        return self

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial(self.coefficients)

    @property
    def degree(self) -> int:
        if self.is_zero:
            return -1
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coefficients)

    def __call__(self, q):
        return self.polynomial(q)

    def deriv(self) -> Polynomial:
        return self.polynomial.deriv()

    @classmethod
    def one(cls) -> "ParityPolynomial":
        return cls(coefficients=[1.0], parity="even")

    @classmethod
    def zero(cls) -> "ParityPolynomial":
        return cls(coefficients=[0.0], parity="odd")


class RationalSMatrix(BaseModel):
    """Single-channel diagonal Padé S-matrix S(q) = ((f2 − i f1)/(f2 + i f1))^power.

    Attributes:
        f1: Odd polynomial
        f2: Even polynomial with f2(0) = 1
        l: Angular momentum
        q_max: Upper end of the fitted momentum range (fm⁻¹), sets tolerances
        power: 1 for a fitted single channel, 2 for a decoupled channel of a
            coupled S-matrix (half-angle fit, every pole second order)
    """
    f1: ParityPolynomial
    f2: ParityPolynomial
    l: int = 0
    q_max: float = Field(default=1.0, gt=0)
    power: Literal[1, 2] = 1

    def numerator(self) -> Polynomial:
        return self.f2.polynomial - 1j * self.f1.polynomial

    def denominator(self) -> Polynomial:
        return self.f2.polynomial + 1j * self.f1.polynomial

    def __call__(self, q):
        q = np.asarray(q, dtype=complex)
        value = (self.numerator()(q) / self.denominator()(q)) ** self.power
        return complex(value) if value.ndim == 0 else value

    def phase(self, q):
        """Principal-branch phase shift for real q: −power·atan2(f1, f2)."""
        q = np.asarray(q, dtype=float)
        return -self.power * np.arctan2(self.f1(q), self.f2(q))


class CoupledRationalSMatrix(BaseModel):
    """Two-channel Padé S-matrix in the bar-phase form.

    Channel factors s_i = (f2⁽ⁱ⁾ − i f1⁽ⁱ⁾)/(f2⁽ⁱ⁾ + i f1⁽ⁱ⁾) = e^{iδ_i} and the
    mixing pair with tan(−ε) = f1m/f2m give

        S₁₁ = s₁² cos 2ε,  S₂₂ = s₂² cos 2ε,  S₁₂ = S₂₁ = i s₁ s₂ sin 2ε.
    """
    f1_ch1: ParityPolynomial
    f2_ch1: ParityPolynomial
    f1_ch2: ParityPolynomial
    f2_ch2: ParityPolynomial
    f1_mix: ParityPolynomial
    f2_mix: ParityPolynomial
    l1: int = 0
    l2: int = 2
    q_max: float = Field(default=1.0, gt=0)

    def _pairs(self):
        return (
            (self.f1_ch1.polynomial, self.f2_ch1.polynomial),
            (self.f1_ch2.polynomial, self.f2_ch2.polynomial),
            (self.f1_mix.polynomial, self.f2_mix.polynomial),
        )

    def __call__(self, q) -> np.ndarray:
        """S(q) with shape (..., 2, 2)."""
        q = np.asarray(q, dtype=complex)
        (a1, a2), (b1, b2), (m1, m2) = self._pairs()
        s1 = (a2(q) - 1j * a1(q)) / (a2(q) + 1j * a1(q))
        s2 = (b2(q) - 1j * b1(q)) / (b2(q) + 1j * b1(q))
        fm1, fm2 = m1(q), m2(q)
        norm = fm2 * fm2 + fm1 * fm1
        cos2 = (fm2 * fm2 - fm1 * fm1) / norm
        sin2 = -2.0 * fm1 * fm2 / norm
        out = np.empty(q.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = s1 * s1 * cos2
        out[..., 1, 1] = s2 * s2 * cos2
        out[..., 0, 1] = 1j * s1 * s2 * sin2
        out[..., 1, 0] = out[..., 0, 1]
        return out

    def denominators(self) -> List[Polynomial]:
        """Polynomials whose zeros are the poles of S."""
        (a1, a2), (b1, b2), (m1, m2) = self._pairs()
        return [a2 + 1j * a1, b2 + 1j * b1, m2 + 1j * m1, m2 - 1j * m1]

    def channel_matrix(self, channel: int) -> RationalSMatrix:
        """Diagonal channel as a single-channel S-matrix, s_i² with power 2.

        Equals S_ii only in the decoupled limit f1_mix ≡ 0.
        """
        f1, f2 = (self.f1_ch1, self.f2_ch1) if channel == 1 else (self.f1_ch2, self.f2_ch2)
        return RationalSMatrix(
            f1=f1, f2=f2, l=self.l1 if channel == 1 else self.l2, q_max=self.q_max, power=2
        )


class PoleTerm(BaseModel):
    """One term of the Marchenko input kernel.

    Attributes:
        beta: Pole momentum (Im β > 0) or bound-state momentum iκ
        order: 1 or 2
        weight: First-order weight (scalar, or 2×2 matrix Q¹ for coupled data)
        weight2: Second-order weight Q² (None for first-order terms)
        source: "pole" for S-matrix poles, "bound" for bound-state terms
    """
    model_config = _ARRAYS

    beta: complex
    order: Literal[1, 2] = 1
    weight: Any
    weight2: Any = None
    source: Literal["pole", "bound"] = "pole"

    @field_validator("beta")
    @classmethod
    def _upper_half_plane(cls, value: complex) -> complex:
        if value.imag <= 0:
            raise ValueError(f"kernel term momentum {value} must lie in the upper half plane")
        return value


class SpectralData(BaseModel):
    """Poles with residue weights plus bound-state terms.

    Attributes:
        poles: S-matrix pole terms
        bound_states: Bound-state terms (source="bound")
        channels: Angular momenta, (l,) single or (l1, l2) coupled
        q_max: Momentum scale used for merge tolerances
    """
    poles: List[PoleTerm] = Field(default_factory=list)
    bound_states: List[PoleTerm] = Field(default_factory=list)
    channels: Tuple[int, ...] = (0,)
    q_max: float = 1.0

    @property
    def coupled(self) -> bool:
        return len(self.channels) == 2

    @property
    def is_empty(self) -> bool:
        return not self.poles and not self.bound_states

    def kernel_terms(self, merge_tol: float = 1e-7) -> List[PoleTerm]:
        """All terms, with bound states that coincide with a pole merged into it.

        Second-order terms come first.
        """
        terms = [term.model_copy() for term in self.poles]
        for bound in self.bound_states:
            for i, term in enumerate(terms):
                if abs(term.beta - bound.beta) < merge_tol * self.q_max:
                    terms[i] = term.model_copy(update={"weight": term.weight + bound.weight})
                    break
            else:
                terms.append(bound.model_copy())
        return sorted(terms, key=lambda t: -t.order)


class PhaseRecord(BaseModel):
    """Phase-shift data at one energy.

    Attributes:
        q: Center-of-mass momentum (fm⁻¹)
        delta: Phase shift (rad), channel 1 for coupled waves
        delta2: Channel-2 phase shift (coupled only)
        epsilon: Mixing parameter (coupled only)
        rho: Inelasticity in the S = cos²ρ·e^{2iδ} convention
        rho2: Channel-2 inelasticity for coupled waves (defaults to rho)
        t_lab: Laboratory kinetic energy (MeV), if known
    """
    q: float = Field(gt=0)
    delta: float = 0.0
    delta2: Optional[float] = None
    epsilon: Optional[float] = None
    rho: float = 0.0
    rho2: Optional[float] = None
    delta_err: float = 0.0
    delta2_err: float = 0.0
    epsilon_err: float = 0.0
    rho_err: float = 0.0
    t_lab: Optional[float] = None

    model_config = ConfigDict(
        json_schema_extra={
            "example": {"q": 0.5, "delta": 1.2, "rho": 0.0, "delta_err": 0.01, "t_lab": 21.0}
        }
    )

    @field_validator("rho", "rho2")
    @classmethod
    def _rho_range(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 <= value < math.pi / 2:
            raise ValueError(f"inelasticity rho={value} outside [0, pi/2)")
        return value

    @property
    def coupled(self) -> bool:
        return self.delta2 is not None


class RadialPotential(BaseModel):
    """Tabulated potential in fm⁻² (2m absorbed, V beside q² in the radial equation).

    Evaluation between nodes uses cubic splines of the real and imaginary
    parts; below the first node the first value is held and beyond the last
    node the potential is zero.
    """
    model_config = _ARRAYS

    grid: np.ndarray
    values: np.ndarray
    l: int = 0
    extrapolated_below: bool = True

    _spline: Any = PrivateAttr(default=None)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def __call__(self, r):
        if self._spline is None:
            re = CubicSpline(self.grid, np.real(self.values))
            im = CubicSpline(self.grid, np.imag(self.values)) if self.is_complex else None
            self._spline = (re, im)
        re, im = self._spline
        ra = np.asarray(r, dtype=float)
        clipped = np.clip(ra, self.grid[0], self.grid[-1])
        out = re(clipped) + (1j * im(clipped) if im is not None else 0.0)
        out = np.where(ra > self.grid[-1], 0.0, out)
        return out if out.ndim else out[()]

    def scaled(self, factor: complex) -> "RadialPotential":
        return RadialPotential(
            grid=self.grid, values=self.values * factor, l=self.l,
            extrapolated_below=self.extrapolated_below,
        )


class CoupledPotential(BaseModel):
    """Symmetric 2×2 potential matrix per radius, fm⁻².

    ``values`` has shape (n, 3) holding (V₁₁, V₂₂, V₁₂); the off-diagonal is
    stored once.
    """
    model_config = _ARRAYS

    grid: np.ndarray
    values: np.ndarray
    l1: int = 0
    l2: int = 2
    asymmetry: float = 0.0

    _splines: Any = PrivateAttr(default=None)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def component(self, index: int) -> RadialPotential:
        return RadialPotential(grid=self.grid, values=self.values[:, index])

    def matrix(self) -> np.ndarray:
        out = np.empty((len(self.grid), 2, 2), dtype=self.values.dtype)
        out[:, 0, 0] = self.values[:, 0]
        out[:, 1, 1] = self.values[:, 1]
        out[:, 0, 1] = out[:, 1, 0] = self.values[:, 2]
        return out

    def __call__(self, r) -> np.ndarray:
        if self._splines is None:
            self._splines = [self.component(i) for i in range(3)]
        v11, v22, v12 = (s(r) for s in self._splines)
        shape = np.shape(v11)
        out = np.empty(shape + (2, 2), dtype=complex)
        out[..., 0, 0] = v11
        out[..., 1, 1] = v22
        out[..., 0, 1] = out[..., 1, 0] = v12
        return out

    def scaled(self, factors) -> "CoupledPotential":
        """Scale (V₁₁, V₂₂, V₁₂) by three factors."""
        return CoupledPotential(
            grid=self.grid, values=self.values * np.asarray(factors), l1=self.l1, l2=self.l2
        )


class KernelSolution(BaseModel):
    """Per-radius coefficients of the degenerate Marchenko solution.

    Attributes:
        grid: Radii (fm)
        P: Coefficients P_i(r), shape (n_r, n_terms)
        N: Coefficients of the y·ĥ′ terms for second-order poles, shape (n_r, n_second)
        L_diag: L(r, r)
        terms: Kernel terms the coefficients belong to
        condition: Condition number per radius
    """
    model_config = _ARRAYS

    grid: np.ndarray
    P: np.ndarray
    L_diag: np.ndarray
    terms: List[PoleTerm] = Field(default_factory=list)
    l: int = 0
    N: Optional[np.ndarray] = None
    condition: Optional[np.ndarray] = None


class CoupledKernelSolution(BaseModel):
    """Per-radius P_i, N_i matrix coefficients of the coupled solution.

    Attributes:
        P: shape (n_r, n_terms, nc, nc)
        N: shape (n_r, n_second_order, nc, nc)
        L_diag: shape (n_r, nc, nc)
    """
    model_config = _ARRAYS

    grid: np.ndarray
    P: np.ndarray
    N: np.ndarray
    L_diag: np.ndarray
    terms: List[PoleTerm] = Field(default_factory=list)
    channels: Tuple[int, ...] = (0, 2)
    condition: Optional[np.ndarray] = None


class PhaseFunction(BaseModel):
    """Accumulated phase functions along r.

    Attributes:
        r: Radii
        delta: δ(r), shape (n,) single or (n, 2) coupled; complex for complex V
        epsilon: ε(r) for coupled waves
        terminal: Terminal values (δ,) or (δ₁, δ₂, ε)
    """
    model_config = _ARRAYS

    r: np.ndarray
    delta: np.ndarray
    epsilon: Optional[np.ndarray] = None
    terminal: Tuple[complex, ...]
    smatrix: Optional[np.ndarray] = None


class BoundState(BaseModel):
    """Bound state with asymptotic normalization and deuteron-type observables.

    Attributes:
        energy: Binding energy (MeV, negative)
        kappa: q̃ = iκ with κ in fm⁻¹
        r: Radial grid of the wavefunction
        u: Channel-1 radial function, normalized with w to ∫(u² + w²) dr = 1
        w: Channel-2 radial function (None for a single channel)
        A_S: Asymptotic normalization of u (fm^-1/2)
        eta: Ratio of the asymptotic channel-2 and channel-1 amplitudes
        rms_radius: sqrt(¼∫r²(u² + w²)dr) (fm)
        quadrupole: (1/20)∫r² w(√8 u − w) dr (fm²)
        d_state_probability: ∫w² dr
    """
    model_config = _ARRAYS

    energy: float
    kappa: float
    r: np.ndarray
    u: np.ndarray
    w: Optional[np.ndarray] = None
    A_S: float
    eta: float = 0.0
    rms_radius: float = 0.0
    quadrupole: float = 0.0
    d_state_probability: float = 0.0


class OpticalEntry(BaseModel):
    """α at one momentum; a 1-tuple for a single channel, 3-tuple for coupled."""
    q: float
    alpha: Tuple[float, ...]
    provenance: Literal["predicted", "refined"] = "predicted"
    converged: bool = True
    real_phase_shift: Optional[float] = None


class OpticalScaling(BaseModel):
    """Energy-dependent α defining V⁽¹⁾ = (1 + iα)V⁽⁰⁾.

    Between entries α(q) is a monotone cubic; outside it is held flat.
    """
    entries: List[OpticalEntry] = Field(default_factory=list)
    channels: Tuple[int, ...] = (0,)

    def alpha_at(self, q: float) -> Tuple[Tuple[float, ...], str]:
        """α at q plus a flag: "exact", "interpolated" or "extrapolated"."""
        if not self.entries:
            raise ValueError("optical scaling has no entries")
        qs = np.array([e.q for e in self.entries])
        order = np.argsort(qs)
        qs = qs[order]
        alphas = np.array([self.entries[i].alpha for i in order], dtype=float)
        hit = np.isclose(qs, q, rtol=1e-12, atol=0.0)
        if np.any(hit):
            return tuple(alphas[np.argmax(hit)]), "exact"
        if q < qs[0] or q > qs[-1] or len(qs) == 1:
            edge = 0 if q < qs[0] else -1
            return tuple(alphas[edge]), "extrapolated"
        value = PchipInterpolator(qs, alphas, axis=0)(q)
        return tuple(float(v) for v in np.atleast_1d(value)), "interpolated"

