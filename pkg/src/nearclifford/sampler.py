"""
Quasiprobability importance sampling.

Each channel ``chi_k = sum_i q_i S_i`` is sampled term by term with probability
``|q_i| / g_k``; the sampled stabilizer circuit runs on a tableau and the shot
value is ``w * f`` with ``w = prod_k sign(q_k) g_k`` and ``f`` the projection of
the final state onto the observable. The mean over shots is an unbiased estimate
of the exact expectation.

Shots are grouped into blocks of ``BLOCK_SIZE`` and every shot draws from its own
stream ``default_rng((seed, shot))``, so results do not depend on the number of
workers.
"""

import logging
import math
import time
from typing import Callable, List, Sequence, Tuple

import numpy as np
import ray
from humanize.time import naturaldelta
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nearclifford.channels import StabilizerDecomposition, one_norm
from nearclifford.pauli import PauliString
from nearclifford.schemas import DEFAULT_SEED, EstimatorResult, resolve_workers
from nearclifford.tableau import Tableau, check_generators, new_zero_state

logger = logging.getLogger(__name__)

BLOCK_SIZE = 512


## plans


class PlannedChannel(BaseModel):
    """A decomposition applied to specific qubits (listed in local order)."""

    model_config = ConfigDict(frozen=True)

    decomposition: StabilizerDecomposition
    qubits: Tuple[int, ...]

    @model_validator(mode="after")
    def validate_fields(self):
        if len(self.qubits) != self.decomposition.n:
            raise ValueError(
                f"{self.decomposition.n}-qubit channel tagged with qubits {self.qubits}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.qubits}")
        return self


class SimulationPlan(BaseModel):
    """
    Initial stabilizer state, K channels and M observables.

    The initial state and each observable are single stabilizer states given by n
    generators (so their own 1-norms are 1). An empty ``initial`` means |0...0>.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    initial: Tuple[PauliString, ...] = ()
    channels: Tuple[PlannedChannel, ...] = ()
    observables: Tuple[Tuple[PauliString, ...], ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_fields(self):
        for channel in self.channels:
            for q in channel.qubits:
                if not 0 <= q < self.n:
                    raise ValueError(f"channel qubit {q} out of range for {self.n} qubits")
        if self.initial:
            if len(self.initial) != self.n:
                raise ValueError(
                    f"initial state needs {self.n} generators, got {len(self.initial)}"
                )
            check_generators(self.initial, self.n)
        for generators in self.observables:
            if not generators:
                raise ValueError("an observable needs at least one generator")
            check_generators(generators, self.n)
        return self

    @property
    def one_norm_product(self) -> float:
        return math.prod(one_norm(c.decomposition) for c in self.channels)


def zero_state_generators(n: int) -> Tuple[PauliString, ...]:
    return tuple(PauliString.single(n, k, "Z") for k in range(n))


def weight_bound(plan: SimulationPlan) -> float:
    """Largest possible |shot weight|, ``prod_k g_k``."""
    return plan.one_norm_product


def variance_bound(plan: SimulationPlan, shots: int) -> float:
    """
    ``prod_k g_k**2 / (4 N)``, the variance budget behind ``shots_for_variance``.

    It bounds the variance of the estimate when every decomposition is
    nonnegative. Signed decompositions spread shot values over ``[-G, G]`` with
    ``G = prod_k g_k``, so the variance can exceed it, up to ``G**2 / N``.
    """
    return plan.one_norm_product**2 / (4 * shots)


## sampling


def term_probabilities(d: StabilizerDecomposition) -> np.ndarray:
    """
    ``p_i = |q_i| / sum_j |q_j|``.

    Raises:
        ValueError: If the decomposition is empty or all coefficients are zero.
    """
    magnitudes = np.abs(d.coefficients)
    total = magnitudes.sum()
    if len(magnitudes) == 0 or total == 0:
        raise ValueError("cannot sample from an all-zero decomposition")
    return magnitudes / total


class PreparedChannel:
    """A planned channel with its sampling tables precomputed."""

    def __init__(self, channel: PlannedChannel):
        d = channel.decomposition
        self.qubits = channel.qubits
        self.terms = [term for _, term in d.terms]
        self.signs = np.sign(d.coefficients)
        self.g = one_norm(d)
        self.cumulative = np.cumsum(term_probabilities(d))
        self.single = len(self.terms) == 1

    def sample(self, rng: np.random.Generator):
        """A term and its weight factor ``sign(q_i) g``; one-term channels draw nothing."""
        if self.single:
            index = 0
        else:
            index = int(np.searchsorted(self.cumulative, rng.random(), side="right"))
            index = min(index, len(self.terms) - 1)
        return self.terms[index], self.signs[index] * self.g


class PreparedPlan:
    """Plan data shared read-only by every shot of a block."""

    def __init__(self, plan: SimulationPlan):
        self.plan = plan
        self.channels = [PreparedChannel(c) for c in plan.channels]
        if plan.initial:
            self.initial = Tableau.from_stabilizers(plan.initial)
        else:
            self.initial = new_zero_state(plan.n)

    def _observe(self, tableau: Tableau) -> np.ndarray:
        return np.array(
            [
                tableau.projection_probability(obs, validate=False)
                for obs in self.plan.observables
            ]
        )

    def run_shot(self, rng: np.random.Generator, trajectory: bool = False) -> np.ndarray:
        """
        Per-observable ``w * f`` for one shot; with ``trajectory`` an array of shape
        (K + 1, M) holding the value after every channel prefix.
        """
        tableau = self.initial.copy()
        tableau.rng = rng
        weight = 1.0
        prefixes = [self._observe(tableau)] if trajectory else None
        for channel in self.channels:
            term, factor = channel.sample(rng)
            weight *= factor
            tableau.apply_term(term, channel.qubits)
            if trajectory:
                prefixes.append(weight * self._observe(tableau))
        if trajectory:
            return np.stack(prefixes)
        return weight * self._observe(tableau)


def run_shot(plan: SimulationPlan, rng: np.random.Generator) -> np.ndarray:
    """One sampled stabilizer circuit: weighted projection for each observable."""
    return PreparedPlan(plan).run_shot(rng)


def shot_rng(seed: int, shot: int) -> np.random.Generator:
    return np.random.default_rng((seed, shot))


def _plan_block(
    plan: SimulationPlan, seed: int, trajectory: bool, start: int, stop: int
) -> np.ndarray:
    prepared = PreparedPlan(plan)
    return np.stack(
        [prepared.run_shot(shot_rng(seed, s), trajectory) for s in range(start, stop)]
    )


## block execution


def _blocks(shots: int) -> List[Tuple[int, int]]:
    return [(start, min(start + BLOCK_SIZE, shots)) for start in range(0, shots, BLOCK_SIZE)]


def run_blocks(
    block_fn: Callable[..., np.ndarray], args: Sequence, shots: int, workers: int = 1
) -> np.ndarray:
    """
    Evaluate ``block_fn(*args, start, stop)`` over consecutive shot blocks and
    concatenate the results in shot order.

    With one worker (or one block) the blocks run in-process; otherwise each block is
    a Ray task and ``ray.get`` collects them in block order.
    """
    workers = resolve_workers(workers)
    blocks = _blocks(shots)
    if workers == 1 or len(blocks) == 1:
        results = []
        for start, stop in blocks:
            results.append(block_fn(*args, start, stop))
            logger.debug(f"Finished shots {start}..{stop - 1}")
        return np.concatenate(results)

    ray.init(ignore_reinit_error=True, num_cpus=workers)
    remote_fn = ray.remote(block_fn)
    arg_refs = [ray.put(arg) for arg in args]
    futures = [remote_fn.remote(*arg_refs, start, stop) for start, stop in blocks]
    logger.debug(f"Submitted {len(futures)} shot blocks to {workers} workers")
    return np.concatenate(ray.get(futures))


## estimators


def _check_shots(shots: int) -> None:
    if shots < 2:
        raise ValueError(f"need at least 2 shots, got {shots}")


def estimate(
    plan: SimulationPlan,
    shots: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> List[EstimatorResult]:
    """
    Unbiased estimates of every observable in ``plan``; each shot's final state is
    reused for all observables.

    Raises:
        ValueError: If ``shots < 2``.
    """
    _check_shots(shots)
    start = time.time()
    values = run_blocks(_plan_block, (plan, seed, False), shots, workers)
    g = plan.one_norm_product
    results = [
        EstimatorResult.from_values(values[:, m], one_norm_product=g, seed=seed)
        for m in range(len(plan.observables))
    ]
    logger.info(
        f"Estimated {len(results)} observable(s) from {shots} shots "
        f"(prod g = {g:.6g}) in {naturaldelta(time.time() - start)}"
    )
    return results


def estimate_trajectory(
    plan: SimulationPlan,
    shots: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> List[List[EstimatorResult]]:
    """
    Estimates after every channel prefix, from the same shots.

    Returns:
        ``results[k][m]`` for observable m after the first k channels, k = 0..K
    """
    _check_shots(shots)
    start = time.time()
    values = run_blocks(_plan_block, (plan, seed, True), shots, workers)
    results = []
    g = 1.0
    for k in range(len(plan.channels) + 1):
        if k > 0:
            g *= one_norm(plan.channels[k - 1].decomposition)
        results.append(
            [
                EstimatorResult.from_values(values[:, k, m], one_norm_product=g, seed=seed)
                for m in range(len(plan.observables))
            ]
        )
    logger.info(
        f"Estimated {len(plan.channels) + 1} prefixes from {shots} shots "
        f"in {naturaldelta(time.time() - start)}"
    )
    return results


## sample-size planning


def _ceil(value: float) -> int:
    # snap float noise such as (sqrt 2)**2 = 2.0000000000000004, never round down
    # a value that is genuinely above an integer
    nearest = round(value)
    if abs(value - nearest) <= 1e-12 * max(1.0, abs(value)):
        return int(nearest)
    return math.ceil(value)


def _check_one_norms(*norms: float) -> None:
    for g in norms:
        if g < 1:
            raise ValueError(f"one-norms of trace-preserving channels are >= 1, got {g}")


def shots_for_variance(
    g_in: float, g_obs: float, g_ch: float, k: int, epsilon: float
) -> int:
    """Shots for standard error ``epsilon``: ``ceil(g_in^2 g_obs^2 g_ch^2K / (4 eps^2))``."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_one_norms(g_in, g_obs, g_ch)
    return _ceil(g_in**2 * g_obs**2 * g_ch ** (2 * k) / (4 * epsilon**2))


def shots_for_hoeffding(
    g_in: float, g_obs: float, g_ch: float, k: int, epsilon: float, delta: float
) -> int:
    """
    Shots so that the estimate is within ``epsilon`` with probability at least
    ``1 - delta``.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    _check_one_norms(g_in, g_obs, g_ch)
    bound = g_in**2 * g_obs**2 * g_ch ** (2 * k) / (2 * epsilon**2)
    return _ceil(bound * math.log(2 / delta))

