"""
Ambient settings: logging, output location and numerical defaults.

Channel physics lives in ChannelConfig; nothing here changes what a run
computes beyond grid and tolerance defaults.
"""
from pydantic import BaseModel, ConfigDict, Field


class Settings(BaseModel):
    """
    Settings loaded from environment, ~/.marchenko/config.yaml and .env.

    fit_tolerance is the share of the gate a Padé fit may miss the data by
    before the order scan moves on. With extend_grid the radial grid grows
    past r_max (up to grid_reach·r_max) until the slowest kernel pole term
    has decayed.
    """
    model_config = ConfigDict(extra="ignore")

    log_level: str = "INFO"
    output_dir: str = "results"
    default_qmax_factor: float = Field(1.5, gt=1.0)
    grid_points: int = Field(1200, ge=10)
    r_min: float = Field(0.01, gt=0)
    r_max: float = Field(12.0, gt=0)
    gate: float = Field(2e-3, gt=0)
    rtol: float = Field(1e-10, gt=0)
    threads: int = Field(1, ge=1)
    fit_tolerance: float = Field(0.25, gt=0, le=1)
    extend_grid: bool = True
    grid_reach: float = Field(4.0, ge=1.0)

    @classmethod
    def from_dict(cls, data: dict) -> "Settings":
        """Create Settings from dictionary."""
        return cls.model_validate(data)

    def to_dict(self) -> dict:
        """Export settings as dictionary."""
        return self.model_dump()

    def __repr__(self):
        return f"Settings({self.to_dict()})"
