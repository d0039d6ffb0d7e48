import math
import os
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nearclifford.channels import (
    PTM,
    StabilizerDecomposition,
    amplitude_damping_infidelity,
    channel_from_name,
    decomp_to_ptm,
    depolarizing_infidelity,
    infidelity,
)

# fixed default so that runs without --seed are reproducible
DEFAULT_SEED = 20140326


## noise models


class NoiseModel(BaseModel):
    """A named single-qubit channel with its parameters, e.g. depolarizing(1e-3)."""

    model_config = ConfigDict(frozen=True)

    channel: str = Field(..., description="Name from channels.CHANNEL_CONSTRUCTORS")
    params: Tuple[float, ...] = Field(default=(), description="Constructor arguments")

    @model_validator(mode="after")
    def validate_fields(self):
        # raises ValueError for unknown names and out-of-domain parameters
        channel_from_name(self.channel, self.params)
        return self

    @property
    def strength(self) -> float:
        return self.params[0] if self.params else 0.0

    def decomposition(self) -> StabilizerDecomposition:
        return channel_from_name(self.channel, self.params)

    def ptm(self) -> PTM:
        return decomp_to_ptm(self.decomposition())

    @property
    def is_noiseless(self) -> bool:
        """True when the channel is exactly the identity (e.g. zero strength)."""
        return bool(np.array_equal(self.ptm().matrix, np.eye(4)))

    def physical_infidelity(self) -> float:
        """Average infidelity of one application of the channel to a bare qubit."""
        if self.channel == "depolarizing":
            return depolarizing_infidelity(self.strength)
        if self.channel == "amplitude_damping":
            return amplitude_damping_infidelity(self.strength)
        return infidelity(self.ptm())

    def __str__(self) -> str:
        return f"{self.channel}({', '.join(repr(p) for p in self.params)})"


## results


class EstimatorResult(BaseModel):
    """
    Weighted Monte Carlo estimate of one observable.

    The mean can legitimately fall outside [0, 1] when shots carry negative weight.
    """

    model_config = ConfigDict(frozen=True)

    mean: float
    sample_variance: float = Field(..., ge=0.0)
    std_error: float = Field(..., ge=0.0)
    shots: int = Field(..., ge=2)
    one_norm_product: float = Field(1.0, ge=0.0, description="Product of channel g_k")
    seed: Optional[int] = None

    @model_validator(mode="after")
    def validate_fields(self):
        expected = math.sqrt(self.sample_variance / self.shots)
        if not math.isclose(self.std_error, expected, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError(
                f"std_error {self.std_error} != sqrt(variance / shots) = {expected}"
            )
        return self

    @classmethod
    def from_values(
        cls,
        values: np.ndarray,
        one_norm_product: float = 1.0,
        seed: Optional[int] = None,
    ) -> "EstimatorResult":
        """Mean and unbiased (N - 1) sample variance of the per-shot values."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or len(values) < 2:
            raise ValueError(f"need at least 2 shot values, got shape {values.shape}")
        variance = float(np.var(values, ddof=1))
        return cls(
            mean=float(np.mean(values)),
            sample_variance=variance,
            std_error=math.sqrt(variance / len(values)),
            shots=len(values),
            one_norm_product=one_norm_product,
            seed=seed,
        )

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "variance": self.sample_variance,
            "shots": self.shots,
            "one_norm_product": self.one_norm_product,
            "seed": self.seed,
        }


class ThresholdPoint(BaseModel):
    """One point of a logical-vs-physical infidelity sweep."""

    model_config = ConfigDict(frozen=True)

    strength: float = Field(..., ge=0.0, description="p or gamma")
    physical_infidelity: float = Field(..., ge=0.0)
    logical_infidelity: float
    std_error: float = Field(..., ge=0.0)
    shots: int = Field(..., ge=2)


## run configuration


class Subcommand(str, Enum):
    DECOMPOSE = "decompose"
    RUN = "run"
    ROTATION_DEMO = "rotation-demo"
    STEANE = "steane"
    VERIFY = "verify"
    DICTIONARY_INFO = "dictionary-info"


class DecomposeChannel(str, Enum):
    ROTATION_Z = "rotation_z"
    ROTATION_Z_POSITIVE = "rotation_z_positive"
    T = "t"
    AMPLITUDE_DAMPING = "amplitude_damping"
    DEPOLARIZING = "depolarizing"
    IDENTITY = "identity"
    KRAUS_FILE = "kraus-file"


class SweepChannel(str, Enum):
    DEPOLARIZING = "depolarizing"
    AMPLITUDE_DAMPING = "amplitude_damping"


class RunConfig(BaseModel):
    """Validated command-line configuration shared by every subcommand."""

    model_config = ConfigDict(frozen=True)

    subcommand: Subcommand
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    shots: int = Field(10_000, ge=2)
    workers: int = Field(1, ge=0, description="0 means one worker per CPU")
    output: Optional[Path] = None
    json_output: bool = False
    channel: Optional[NoiseModel] = None

    @property
    def resolved_workers(self) -> int:
        return resolve_workers(self.workers)


def resolve_workers(workers: int) -> int:
    if workers < 0:
        raise ValueError(f"worker count must be nonnegative, got {workers}")
    return workers if workers > 0 else (os.cpu_count() or 1)
