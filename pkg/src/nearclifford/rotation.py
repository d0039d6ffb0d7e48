"""
Single-qubit rotation demonstration: a non-Clifford rotation split into equal
Z-rotation steps, estimated after every step from the same shots.
"""

import logging
import math

import polars as pl

from nearclifford.channels import make_rotation_z, make_rotation_z_positive_approx
from nearclifford.pauli import PauliString
from nearclifford.sampler import PlannedChannel, SimulationPlan, estimate_trajectory
from nearclifford.schemas import DEFAULT_SEED

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 50
DEFAULT_THETA_STEPS = 100


def rotation_plan(
    steps: int = DEFAULT_STEPS,
    theta: float = math.pi / DEFAULT_THETA_STEPS,
    positive: bool = False,
) -> SimulationPlan:
    """
    |+> input, ``steps`` applications of Z_theta, projection onto |+i>.

    With ``positive`` each step uses the biased all-positive approximation instead.
    """
    if steps < 1:
        raise ValueError(f"need at least one rotation step, got {steps}")
    step = make_rotation_z_positive_approx(theta) if positive else make_rotation_z(theta)
    channel = PlannedChannel(decomposition=step, qubits=(0,))
    return SimulationPlan(
        n=1,
        initial=(PauliString.from_label("+X"),),
        channels=(channel,) * steps,
        observables=((PauliString.from_label("+Y"),),),
    )


def exact_rotation_value(step: int, theta: float) -> float:
    """Overlap of the rotated state with |+i> after ``step`` exact rotations."""
    return (1 + math.sin(step * theta)) / 2


def run_rotation_demo(
    steps: int = DEFAULT_STEPS,
    shots: int = 10_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    positive: bool = False,
    theta_steps: int = DEFAULT_THETA_STEPS,
) -> pl.DataFrame:
    """
    Estimate after each of ``steps`` rotations by pi / ``theta_steps``.

    Returns:
        One row per step with columns step, estimate, std_error and exact
    """
    if theta_steps < 1:
        raise ValueError(f"theta steps must be positive, got {theta_steps}")
    theta = math.pi / theta_steps
    plan = rotation_plan(steps, theta, positive)
    results = estimate_trajectory(plan, shots, seed, workers)
    df = pl.DataFrame(
        {
            "step": list(range(1, steps + 1)),
            "estimate": [results[k][0].mean for k in range(1, steps + 1)],
            "std_error": [results[k][0].std_error for k in range(1, steps + 1)],
            "exact": [exact_rotation_value(k, theta) for k in range(1, steps + 1)],
        },
        schema={
            "step": pl.Int64,
            "estimate": pl.Float64,
            "std_error": pl.Float64,
            "exact": pl.Float64,
        },
    )
    final = df.row(-1, named=True)
    logger.info(
        f"After {steps} steps: {final['estimate']:.4f} +- {final['std_error']:.4f} "
        f"(exact {final['exact']:.4f})"
    )
    return df
