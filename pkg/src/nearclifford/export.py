import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import polars as pl

from nearclifford.schemas import EstimatorResult, ThresholdPoint

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.17g}"

THRESHOLD_COLUMNS = [
    "strength",
    "physical_infidelity",
    "logical_infidelity",
    "std_error",
    "shots",
]


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return FLOAT_FORMAT.format(value)


def _stringify_floats(df: pl.DataFrame) -> pl.DataFrame:
    float_columns = [name for name, dtype in df.schema.items() if dtype.is_float()]
    return df.with_columns(
        pl.col(name).map_elements(format_float, return_dtype=pl.String)
        for name in float_columns
    )


def csv_text(df: pl.DataFrame) -> str:
    """Header row plus one line per row, floats at 17 significant digits."""
    return _stringify_floats(df).write_csv()


def write_csv(df: pl.DataFrame, path: Path) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(csv_text(df))
    logger.info(f"Wrote {df.height} rows to {path}")


def json_text(payload: Dict) -> str:
    return json.dumps(payload, indent=2)


def write_json(payload: Dict, path: Path) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(json_text(payload) + "\n")
    logger.info(f"Wrote {path}")


## result tables


def threshold_frame(points: Sequence[ThresholdPoint]) -> pl.DataFrame:
    return pl.DataFrame(
        [p.model_dump() for p in points],
        schema={
            "strength": pl.Float64,
            "physical_infidelity": pl.Float64,
            "logical_infidelity": pl.Float64,
            "std_error": pl.Float64,
            "shots": pl.Int64,
        },
    ).select(THRESHOLD_COLUMNS)


def estimates_frame(
    labels: Sequence[str],
    results: Sequence[EstimatorResult],
    exact: Optional[Sequence[float]] = None,
) -> pl.DataFrame:
    """One row per estimated quantity: label, mean, std_error, variance, shots."""
    if len(labels) != len(results):
        raise ValueError(f"{len(labels)} labels for {len(results)} results")
    columns: Dict[str, List] = {
        "quantity": list(labels),
        "mean": [r.mean for r in results],
        "std_error": [r.std_error for r in results],
        "variance": [r.sample_variance for r in results],
        "shots": [r.shots for r in results],
    }
    schema = {
        "quantity": pl.String,
        "mean": pl.Float64,
        "std_error": pl.Float64,
        "variance": pl.Float64,
        "shots": pl.Int64,
    }
    if exact is not None:
        columns["exact"] = list(exact)
        schema["exact"] = pl.Float64
    return pl.DataFrame(columns, schema=schema)
