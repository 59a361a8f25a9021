"""
Phase-shift data ingestion (CSV or JSON) into PhaseRecord sequences.

Columns (degrees, MeV):
    T_lab_MeV, delta_deg, rho_deg                       single channel
    T_lab_MeV, delta_deg, delta2_deg, eps_deg, rho_deg  coupled (rho2_deg optional)
    *_err columns for each quantity are optional

JSON files hold a list of row objects with the same keys, or an object with
a "records" list.
"""
import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from libs.scattering.errors import ParametrizationError, SchemaError
from libs.scattering.models import PhaseRecord
from libs.scattering.smatrix import kmatrix_to_srecord
from marchenko_lab.kinematics import cm_momentum
from marchenko_lab.models import ChannelConfig

logger = logging.getLogger(__name__)

SINGLE_COLUMNS = ["T_lab_MeV", "delta_deg"]
COUPLED_COLUMNS = ["T_lab_MeV", "delta_deg", "delta2_deg", "eps_deg"]
OPTIONAL_COLUMNS = [
    "rho_deg", "rho2_deg", "delta_err", "delta2_err", "eps_err", "rho_err",
]


def read_table(path: Union[str, Path], fmt: Optional[str] = None) -> pd.DataFrame:
    """Load the raw table; ``fmt`` defaults to the file suffix."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if path.stat().st_size == 0:
        return pd.DataFrame()
    if fmt == "csv":
        try:
            return pd.read_csv(path, comment="#")
        except pd.errors.EmptyDataError:
            return pd.DataFrame()
        except pd.errors.ParserError as e:
            raise SchemaError(f"malformed CSV: {e}") from e
    if fmt == "json":
        with open(path, "r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise SchemaError(f"malformed JSON: {e.msg}", row=e.lineno) from e
        rows = data.get("records", []) if isinstance(data, dict) else data
        if not isinstance(rows, list):
            raise SchemaError("JSON input must be a list of rows or {'records': [...]}")
        return pd.DataFrame(rows)
    raise SchemaError(f"unsupported input format '{fmt}'")


def _value(row: pd.Series, column: str, index: int, default: Optional[float] = None) -> float:
    if column not in row.index or pd.isna(row[column]):
        if default is not None:
            return default
        raise SchemaError("missing value", row=index, column=column)
    try:
        return float(row[column])
    except (TypeError, ValueError):
        raise SchemaError(f"non-numeric value {row[column]!r}", row=index, column=column)


def ingest(path: Union[str, Path], config: ChannelConfig, fmt: Optional[str] = None) -> List[PhaseRecord]:
    """Parse a data file into records sorted by momentum.

    Degrees become radians, type-K rows go through ``kmatrix_to_srecord``
    with the phase kept continuous across the scan, and Levinson offsets are
    added when the file phases start at zero.

    Raises:
        SchemaError: Missing column, non-numeric or negative-energy row
        ParametrizationError: Row with |S| > 1
    """
    table = read_table(path, fmt)
    if table.empty:
        logger.info("No rows in %s", path)
        return []

    required = COUPLED_COLUMNS if config.coupled else SINGLE_COLUMNS
    for column in required:
        if column not in table.columns:
            raise SchemaError("missing column", column=column)

    table = table.sort_values("T_lab_MeV", kind="stable").reset_index()
    n1, n2 = config.levinson
    offset1 = n1 * math.pi if config.phase_origin == "zero" else 0.0
    offset2 = n2 * math.pi if config.phase_origin == "zero" else 0.0
    sign = -1.0 if config.flip_mixing_sign else 1.0

    records = []
    previous = (None, None)
    for _, row in table.iterrows():
        index = int(row["index"]) + 1
        t_lab = _value(row, "T_lab_MeV", index)
        if t_lab <= 0:
            raise SchemaError("T_lab must be positive", row=index, column="T_lab_MeV")
        q = cm_momentum(t_lab, config.m1, config.m2)
        delta = math.radians(_value(row, "delta_deg", index))
        rho = math.radians(_value(row, "rho_deg", index, 0.0))
        errors = {
            "delta_err": math.radians(_value(row, "delta_err", index, 0.0)),
            "rho_err": math.radians(_value(row, "rho_err", index, 0.0)),
        }
        fields = {}
        if config.coupled:
            fields["delta2"] = math.radians(_value(row, "delta2_deg", index))
            fields["epsilon"] = sign * math.radians(_value(row, "eps_deg", index))
            errors["delta2_err"] = math.radians(_value(row, "delta2_err", index, 0.0))
            errors["epsilon_err"] = math.radians(_value(row, "eps_err", index, 0.0))
            if "rho2_deg" in row.index and not pd.isna(row["rho2_deg"]):
                fields["rho2"] = math.radians(_value(row, "rho2_deg", index))

        if config.input_convention == "type-K":
            try:
                converted = kmatrix_to_srecord(delta, rho, q, reference=previous[0])
                delta, rho = converted.delta, converted.rho
                if config.coupled:
                    second = kmatrix_to_srecord(fields["delta2"], fields.get("rho2", 0.0), q,
                                                reference=previous[1])
                    fields["delta2"] = second.delta
                    if "rho2" in fields:
                        fields["rho2"] = second.rho
            except ParametrizationError as e:
                raise ParametrizationError(f"row {index}: {e}") from e
            previous = (delta, fields.get("delta2"))

        if config.coupled:
            fields["delta2"] += offset2
        try:
            records.append(PhaseRecord(q=q, delta=delta + offset1, rho=rho, t_lab=t_lab,
                                       **fields, **errors))
        except ValueError as e:
            raise SchemaError(f"invalid record: {e}", row=index) from e

    records.sort(key=lambda rec: rec.q)
    logger.info("Ingested %d records from %s", len(records), path)
    return records


def write_records(
    records: List[PhaseRecord], path: Union[str, Path], fmt: Optional[str] = None
) -> Path:
    """Write records in the ingestion schema (inverse of :func:`ingest` for delta-rho input)."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    rows = []
    for rec in records:
        row = {
            "T_lab_MeV": rec.t_lab,
            "delta_deg": np.degrees(rec.delta),
            "rho_deg": np.degrees(rec.rho),
            "delta_err": np.degrees(rec.delta_err),
            "rho_err": np.degrees(rec.rho_err),
        }
        if rec.coupled:
            row.update({
                "delta2_deg": np.degrees(rec.delta2),
                "eps_deg": np.degrees(rec.epsilon),
                "delta2_err": np.degrees(rec.delta2_err),
                "eps_err": np.degrees(rec.epsilon_err),
            })
            if rec.rho2 is not None:
                row["rho2_deg"] = np.degrees(rec.rho2)
        rows.append(row)
    frame = pd.DataFrame(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        with open(path, "w") as f:
            json.dump({"records": frame.to_dict(orient="records")}, f, indent=2)
    else:
        frame.to_csv(path, index=False, float_format="%.12g")
    return path
