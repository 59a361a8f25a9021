"""
Data models for pipeline runs.

Defines pydantic schemas for:
- Channel configuration (masses, partial waves, Levinson offsets, bound states)
- Run reports (fits, poles, round-trip residuals, bound states, α tables)
"""
import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator


class BoundStateInput(BaseModel):
    """Bound (or forbidden) state entering the Marchenko kernel.

    Attributes:
        energy: Binding energy in MeV (negative)
        A_S: Asymptotic normalization of the channel-1 wave, fm^-1/2
        eta: Ratio of channel-2 to channel-1 asymptotic amplitudes (coupled only)
    """
    energy: float = Field(lt=0)
    A_S: float = Field(gt=0)
    eta: float = 0.0


class ChannelConfig(BaseModel):
    """
    Configuration for one partial-wave inversion.

    Attributes:
        name: Free-form label used in output file names
        m1: Projectile mass (MeV)
        m2: Target mass (MeV)
        l: Angular momentum of channel 1
        l2: Angular momentum of channel 2; set for coupled waves
        labels: Spin/partial-wave tags, e.g. ["3S1", "3D1"]
        levinson: Phase at q = 0 in units of π, per channel
        phase_origin: "levinson" when the file phases already start at nπ,
            "zero" when they start at 0 and must be raised by nπ
        flip_mixing_sign: Negate ε on ingestion
        mixing_convention: "bar" or "eigen" phase parametrization of the input
        input_convention: "delta-rho" or "type-K" columns
        bound_states: Bound-state inputs for the kernel
        pin_bound_poles: Force S-matrix poles at the bound-state momenta
        nodes: Collocation nodes per fitted curve, tried first by the order scan
        node_search: Scan node counts 2..max_nodes when `nodes` is not admissible
            or misses the data; off fits exactly `nodes`
        max_nodes: Largest node count of the scan
        pole_clearance: Smallest Im β of a fitted kernel pole, as a fraction of Q_max
        q_max: Fit range end Q_max (fm⁻¹); default is qmax_factor × data range
        qmax_factor: Q_max / (largest data momentum) when q_max is unset
        tail_model: Initial (A fm⁻², b fm⁻¹) of the exponential tail model
        r_min, r_max, grid_points: Radial grid; unset values come from Settings
        gate: Round-trip gate (rad); unset uses Settings
        bound_window: Bound-state search window (MeV)
        refine_alpha: Refine predicted α against inelasticities
        reference_observables: Expected bound-state observables for the report
        units: Unit system declaration
        kinematics: Lab-to-cm convention declaration

    Example:
        ```python
        config = ChannelConfig(name="1S0", m1=938.272, m2=939.565, l=0, levinson=(1, 0))
        config.coupled   # False
        ```
    """
    name: str = "channel"
    m1: float = Field(gt=0)
    m2: float = Field(gt=0)
    l: int = Field(0, ge=0)
    l2: Optional[int] = Field(None, ge=0)
    labels: List[str] = Field(default_factory=list)
    levinson: Tuple[int, int] = (0, 0)
    phase_origin: Literal["levinson", "zero"] = "levinson"
    flip_mixing_sign: bool = False
    mixing_convention: Literal["bar", "eigen"] = "bar"
    input_convention: Literal["delta-rho", "type-K"] = "delta-rho"
    bound_states: List[BoundStateInput] = Field(default_factory=list)
    pin_bound_poles: bool = True
    nodes: int = Field(8, ge=2)
    node_search: bool = True
    max_nodes: int = Field(16, ge=2)
    pole_clearance: float = Field(0.03, ge=0, lt=1)
    q_max: Optional[float] = Field(None, gt=0)
    qmax_factor: Optional[float] = Field(None, gt=1.0)
    tail_model: Optional[Tuple[float, float]] = None
    r_min: Optional[float] = Field(None, gt=0)
    r_max: Optional[float] = Field(None, gt=0)
    grid_points: Optional[int] = Field(None, ge=10)
    gate: Optional[float] = Field(None, gt=0)
    bound_window: Tuple[float, float] = (-50.0, -0.01)
    refine_alpha: bool = True
    reference_observables: Dict[str, float] = Field(default_factory=dict)
    units: Literal["fm"] = "fm"
    kinematics: Literal["fixed-target"] = "fixed-target"

    model_config = {
        "json_schema_extra": {
            "example": {
                "name": "3SD1",
                "m1": 938.272,
                "m2": 939.565,
                "l": 0,
                "l2": 2,
                "labels": ["3S1", "3D1"],
                "levinson": [1, 0],
                "bound_states": [{"energy": -2.2246, "A_S": 0.8802, "eta": 0.02714}],
            }
        }
    }

    @field_validator("levinson")
    @classmethod
    def _non_negative(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if min(value) < 0:
            raise ValueError("Levinson offsets must be non-negative")
        return value

    @model_validator(mode="after")
    def _check_window(self) -> "ChannelConfig":
        low, high = self.bound_window
        if not low < high <= 0:
            raise ValueError(f"bound_window {self.bound_window} must lie below threshold")
        return self

    @property
    def coupled(self) -> bool:
        return self.l2 is not None

    @property
    def channels(self) -> Tuple[int, ...]:
        return (self.l, self.l2) if self.coupled else (self.l,)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON dump."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_channel_config(path: Union[str, Path]) -> ChannelConfig:
    """Read a ChannelConfig from JSON or YAML (by suffix)."""
    path = Path(path)
    with open(path, "r") as f:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(f) or {}
        else:
            data = json.load(f)
    return ChannelConfig.model_validate(data)


class PoleRow(BaseModel):
    """One kernel term as reported."""
    beta_re: float
    beta_im: float
    order: int
    source: str
    weight: Any


class ResidualRow(BaseModel):
    """Forward round-trip comparison at one data momentum."""
    q: float
    data: Tuple[float, ...]
    model: Tuple[float, ...]
    residual: float


class BoundStateRow(BaseModel):
    """Bound state of the reconstructed potential."""
    energy: float
    kappa: float
    A_S: float
    eta: float = 0.0
    rms_radius: float = 0.0
    quadrupole: float = 0.0
    d_state_probability: float = 0.0
    checks: Dict[str, bool] = Field(default_factory=dict)


class RunReport(BaseModel):
    """
    Everything a run produced, keyed by the config hash.

    Attributes:
        config_hash: sha256 of the ChannelConfig
        channel: Config name
        channels: Angular momenta
        q_max: Fit range end (fm⁻¹)
        fit: Fitted polynomial coefficients per pair
        poles: Kernel terms
        grid: Radial grid description (r_min, r_max, points, units)
        round_trip: Per-momentum forward comparison
        max_residual: Largest round-trip residual (rad)
        gate: Gate the residual was held to
        gate_passed: max_residual ≤ gate
        levinson: Expected and observed Levinson counts
        bound_states: Bound states of the reconstructed potential
        alpha: Optical α per data momentum
        diagnostics: Condition numbers, asymmetry, Jacobian checks
        created_at: Timestamp, excluded from the deterministic payload
    """
    config_hash: str
    channel: str
    channels: Tuple[int, ...]
    q_max: float
    fit: Dict[str, List[float]] = Field(default_factory=dict)
    poles: List[PoleRow] = Field(default_factory=list)
    grid: Dict[str, Any] = Field(default_factory=dict)
    round_trip: List[ResidualRow] = Field(default_factory=list)
    max_residual: float = 0.0
    gate: float = 2e-3
    gate_passed: bool = True
    levinson: Dict[str, Any] = Field(default_factory=dict)
    bound_states: List[BoundStateRow] = Field(default_factory=list)
    alpha: List[Dict[str, Any]] = Field(default_factory=list)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    created_at: datetime = Field(default_factory=datetime.now)

    def payload(self) -> str:
        """Deterministic JSON (timestamp excluded)."""
        return json.dumps(self.model_dump(mode="json", exclude={"created_at"}), sort_keys=True,
                          indent=2)
