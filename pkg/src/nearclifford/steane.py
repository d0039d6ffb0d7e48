"""
Steane [[7,1,3]] logical identity with fault-tolerant error correction.

Qubits 0-6 carry the code block and 7-10 are the syndrome ancillas, reused by
every syndrome circuit through measure-and-reset. Syndromes 1-3 measure the
Z-type checks (they see X errors) and syndromes 4-6 the X-type checks (they see
Z errors); each syndrome bit is the parity of its four ancilla outcomes.
"""

import logging
import math
import time
from collections import Counter
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from humanize.time import naturaldelta
from pydantic import BaseModel, ConfigDict, model_validator

from nearclifford.circuits import (
    Barrier,
    Circuit,
    CircuitExecutor,
    Gate,
    MeasureReset,
    Noise,
    bind_error_markers,
    circuit_one_norm,
    default_registry,
    error_markers,
)
from nearclifford.pauli import PauliString, comm_sign, pauli_mul
from nearclifford.sampler import run_blocks, shot_rng
from nearclifford.schemas import DEFAULT_SEED, EstimatorResult, NoiseModel, ThresholdPoint
from nearclifford.tableau import Tableau, check_generators, new_zero_state

logger = logging.getLogger(__name__)

N_DATA = 7
N_QUBITS = 11
DATA = tuple(range(N_DATA))
ANCILLAS = (7, 8, 9, 10)
INPUT_QUBIT = 6

# data qubits of each check, in the order they couple to ancillas 7, 8, 9, 10
CHECK_SUPPORTS = ((0, 3, 5, 6), (1, 3, 4, 6), (2, 3, 4, 5))

BITS_PER_SYNDROME = len(ANCILLAS)
BITS_PER_ROUND = 6 * BITS_PER_SYNDROME

EIGENSTATES = ("+Z", "-Z", "+X", "-X", "+Y", "-Y")

SWEEP_CHANNELS = ("depolarizing", "amplitude_damping")

Syndrome = Tuple[int, int, int]


## code layout


def _check_operator(letter: str, support: Sequence[int]) -> PauliString:
    label = ["I"] * N_DATA
    for q in support:
        label[q] = letter
    return PauliString.from_label("".join(label))


def _syndrome_of(error: PauliString, checks: Sequence[PauliString]) -> Syndrome:
    return tuple(0 if comm_sign(error, check) == 1 else 1 for check in checks)


class SteaneLayout(BaseModel):
    """
    The code on data qubits 0-6: six checks, logical operators and the
    syndrome -> qubit lookup tables.

    ``x_table`` maps a Z-type syndrome (syndromes 1-3) to the qubit needing an X
    correction; ``z_table`` maps an X-type syndrome (syndromes 4-6) to the qubit
    needing a Z correction.
    """

    model_config = ConfigDict(frozen=True)

    data: Tuple[int, ...] = DATA
    ancillas: Tuple[int, ...] = ANCILLAS
    supports: Tuple[Tuple[int, ...], ...] = CHECK_SUPPORTS
    z_checks: Tuple[PauliString, ...]
    x_checks: Tuple[PauliString, ...]
    logical_x: PauliString
    logical_z: PauliString
    x_table: Dict[Syndrome, int]
    z_table: Dict[Syndrome, int]

    @model_validator(mode="after")
    def validate_fields(self):
        check_generators(self.generators, N_DATA)
        for logical in (self.logical_x, self.logical_z):
            for g in self.generators:
                if comm_sign(logical, g) != 1:
                    raise ValueError(f"logical {logical.label} anticommutes with {g.label}")
        if comm_sign(self.logical_x, self.logical_z) != -1:
            raise ValueError("logical X and Z must anticommute")
        for name, table in (("x_table", self.x_table), ("z_table", self.z_table)):
            if len(table) != N_DATA or (0, 0, 0) in table:
                raise ValueError(f"{name} must map 7 distinct nontrivial syndromes")
        return self

    @property
    def generators(self) -> Tuple[PauliString, ...]:
        """Z-type checks then X-type checks, in syndrome order."""
        return self.z_checks + self.x_checks

    @property
    def logical_y(self) -> PauliString:
        product = pauli_mul(self.logical_x, self.logical_z)
        return product.with_phase(product.phase + 1)

    def logical(self, eigenstate: str) -> PauliString:
        """The signed logical operator stabilizing ``eigenstate``, e.g. "-Y" -> -Y_L."""
        _check_eigenstate(eigenstate)
        operator = {"X": self.logical_x, "Y": self.logical_y, "Z": self.logical_z}[
            eigenstate[1]
        ]
        return operator.negate() if eigenstate[0] == "-" else operator


@lru_cache(maxsize=None)
def steane_layout() -> SteaneLayout:
    """Build the layout, filling the lookup tables by trying every single-qubit error."""
    z_checks = tuple(_check_operator("Z", s) for s in CHECK_SUPPORTS)
    x_checks = tuple(_check_operator("X", s) for s in CHECK_SUPPORTS)
    x_table, z_table = {}, {}
    for q in DATA:
        x_table[_syndrome_of(PauliString.single(N_DATA, q, "X"), z_checks)] = q
        z_table[_syndrome_of(PauliString.single(N_DATA, q, "Z"), x_checks)] = q
    return SteaneLayout(
        z_checks=z_checks,
        x_checks=x_checks,
        logical_x=PauliString.from_label("+IIIIXXX"),
        logical_z=PauliString.from_label("+ZZIIIIZ"),
        x_table=x_table,
        z_table=z_table,
    )


def _check_eigenstate(eigenstate: str) -> None:
    if eigenstate not in EIGENSTATES:
        raise ValueError(f"unknown eigenstate {eigenstate!r}, expected one of {EIGENSTATES}")


def encoded_target(eigenstate: str, n_qubits: int = N_QUBITS) -> Tuple[PauliString, ...]:
    """The six checks plus the signed logical operator, placed on the data qubits."""
    layout = steane_layout()
    generators = layout.generators + (layout.logical(eigenstate),)
    return tuple(g.embed(DATA, n_qubits) for g in generators)


## circuits


def _gate(name: str, *qubits: int) -> Gate:
    return Gate(name=name, qubits=qubits)


def input_preparation(eigenstate: str, qubit: int = INPUT_QUBIT) -> List[Gate]:
    """Gates taking |0> on ``qubit`` to the Pauli eigenstate ``eigenstate``."""
    _check_eigenstate(eigenstate)
    gates = [_gate("x", qubit)] if eigenstate[0] == "-" else []
    if eigenstate[1] in "XY":
        gates.append(_gate("h", qubit))
    if eigenstate[1] == "Y":
        gates.append(_gate("s", qubit))
    return gates


def _encoding_gates() -> List[Gate]:
    gates = [_gate("h", q) for q in (0, 1, 2)]
    gates += [_gate("cnot", 6, 5), _gate("cnot", 6, 4)]
    gates += [_gate("cnot", 0, t) for t in (3, 5, 6)]
    gates += [_gate("cnot", 1, t) for t in (3, 4, 6)]
    gates += [_gate("cnot", 2, t) for t in (3, 4, 5)]
    return gates


def build_encoding_circuit(
    eigenstate: Optional[str] = None, n_qubits: int = N_DATA
) -> Circuit:
    """
    Noiseless encoder taking the state on qubit 6 (with 0-5 in |0>) into the code
    block. With ``eigenstate`` the input is prepared first.
    """
    prep = input_preparation(eigenstate) + [Barrier()] if eigenstate is not None else []
    return Circuit.from_instructions(n_qubits, prep + _encoding_gates())


def build_noop_circuit(n_qubits: int = N_QUBITS) -> Circuit:
    """Logical identity: an identity gate on each data qubit followed by an error location."""
    return Circuit.from_instructions(
        n_qubits, [_gate("i", q) for q in DATA] + [Barrier()] + error_markers(DATA)
    )


def _cat_preparation() -> List:
    a0, a1, a2, a3 = ANCILLAS
    return [
        _gate("h", a1),
        _gate("cnot", a1, a2),
        _gate("cnot", a1, a0),
        _gate("cnot", a2, a3),
        Barrier(),
    ]


def build_syndrome_circuit(
    index: int, bit_offset: int = 0, n_qubits: int = N_QUBITS
) -> Circuit:
    """
    Syndrome ``index`` (0-5) with error markers at its noise locations; the four
    ancilla outcomes go to bits ``bit_offset + 4 * index + k``.
    """
    if not 0 <= index < 6:
        raise ValueError(f"syndrome index must be in 0..5, got {index}")
    support = CHECK_SUPPORTS[index % 3]
    ancillas = list(ANCILLAS)
    instructions = _cat_preparation()
    if index < 3:
        instructions += [_gate("h", a) for a in ancillas] + error_markers(ancillas)
        instructions += [Barrier()]
        instructions += [_gate("cnot", d, a) for d, a in zip(support, ancillas)]
        instructions += [Barrier()] + error_markers(list(support) + ancillas)
    else:
        instructions += [_gate("cnot", a, d) for d, a in zip(support, ancillas)]
        instructions += [Barrier()] + error_markers(list(support) + ancillas)
        instructions += [Barrier()] + [_gate("h", a) for a in ancillas]
        instructions += error_markers(ancillas)
    first_bit = bit_offset + BITS_PER_SYNDROME * index
    instructions += [Barrier()] + [
        MeasureReset(qubit=a, bit=first_bit + k) for k, a in enumerate(ancillas)
    ]
    return Circuit.from_instructions(n_qubits, instructions)


def build_syndrome_circuits(bit_offset: int = 0, n_qubits: int = N_QUBITS) -> List[Circuit]:
    return [build_syndrome_circuit(i, bit_offset, n_qubits) for i in range(6)]


def build_ec_round(bit_offset: int = 0, n_qubits: int = N_QUBITS) -> Circuit:
    """All six syndrome circuits, one after another."""
    circuits = build_syndrome_circuits(bit_offset, n_qubits)
    result = circuits[0]
    for circuit in circuits[1:]:
        result = result + circuit
    return result


def build_pipeline_circuit(model: Optional[NoiseModel], rounds: int = 3) -> Circuit:
    """
    Noisy logical identity, ``rounds`` noisy error-correction rounds and one
    noiseless round, with the markers of the noisy part bound to ``model``.
    """
    if rounds < 1:
        raise ValueError(f"need at least one noisy syndrome round, got {rounds}")
    noisy = build_noop_circuit()
    for r in range(rounds):
        noisy = noisy + build_ec_round(bit_offset=r * BITS_PER_ROUND)
    final = bind_error_markers(build_ec_round(bit_offset=rounds * BITS_PER_ROUND), None)
    return bind_error_markers(noisy, model) + final


## decoding


def _check_syndrome(syndrome: Sequence[int]) -> Syndrome:
    syndrome = tuple(int(b) for b in syndrome)
    if len(syndrome) != 3 or any(b not in (0, 1) for b in syndrome):
        raise ValueError(f"a syndrome is three bits, got {syndrome}")
    return syndrome


def decode_syndrome(
    z_syndrome: Sequence[int], x_syndrome: Sequence[int]
) -> PauliString:
    """
    Correction on the 7 data qubits: X where the Z-type syndrome points, Z where the
    X-type syndrome points (Y when both point at the same qubit).
    """
    layout = steane_layout()
    z_syndrome, x_syndrome = _check_syndrome(z_syndrome), _check_syndrome(x_syndrome)
    correction = PauliString.identity(N_DATA)
    if z_syndrome in layout.x_table:
        correction = pauli_mul(
            correction, PauliString.single(N_DATA, layout.x_table[z_syndrome], "X")
        )
    if x_syndrome in layout.z_table:
        correction = pauli_mul(
            correction, PauliString.single(N_DATA, layout.z_table[x_syndrome], "Z")
        )
    return correction.unsigned()


def syndromes_from_bits(
    bits: Dict[int, int], bit_offset: int = 0
) -> Tuple[Syndrome, Syndrome]:
    """(Z-type, X-type) syndromes of one round: each bit is the parity of four outcomes."""
    parities = []
    for index in range(6):
        first = bit_offset + BITS_PER_SYNDROME * index
        parities.append(sum(bits[first + k] for k in range(BITS_PER_SYNDROME)) % 2)
    return tuple(parities[:3]), tuple(parities[3:])


def majority_syndrome(syndromes: Sequence[Syndrome]) -> Syndrome:
    """The syndrome seen in more than half of the rounds, else the trivial one."""
    value, count = Counter(syndromes).most_common(1)[0]
    return value if 2 * count > len(syndromes) else (0, 0, 0)


def correction_instructions(
    correction: PauliString, model: Optional[NoiseModel] = None
) -> List:
    """Gates applying ``correction`` to the data qubits, each followed by ``model`` if given."""
    instructions = []
    for q in correction.support:
        instructions.append(_gate(correction.letter(q).lower(), DATA[q]))
        if model is not None:
            instructions.append(
                Noise(channel=model.channel, params=model.params, qubits=(DATA[q],))
            )
    return instructions


class SyndromeDecoder:
    """
    Feedback handler for the pipeline circuit.

    Once all noisy rounds are recorded it applies the majority-vote correction
    (followed by noise); once the noiseless round is recorded it applies that
    round's correction without noise.
    """

    def __init__(self, rounds: int, model: Optional[NoiseModel] = None):
        self.rounds = rounds
        # corrections made after the noisy rounds are themselves noisy
        self.model = None if model is None or model.is_noiseless else model
        self.noisy_bits = rounds * BITS_PER_ROUND

    def __call__(self, bits: Dict[int, int]) -> Optional[List]:
        if self.rounds > 0 and len(bits) == self.noisy_bits:
            per_round = [
                syndromes_from_bits(bits, r * BITS_PER_ROUND) for r in range(self.rounds)
            ]
            correction = decode_syndrome(
                majority_syndrome([z for z, _ in per_round]),
                majority_syndrome([x for _, x in per_round]),
            )
            return correction_instructions(correction, self.model)
        if len(bits) == self.noisy_bits + BITS_PER_ROUND:
            z, x = syndromes_from_bits(bits, self.noisy_bits)
            return correction_instructions(decode_syndrome(z, x))
        return None


## execution


@lru_cache(maxsize=None)
def _encoded_state(eigenstate: str) -> Tableau:
    tableau = new_zero_state(N_QUBITS)
    for gate in build_encoding_circuit(eigenstate, N_QUBITS).instructions:
        tableau.apply_gate(gate.name, gate.qubits)
    return tableau


def encoded_state(eigenstate: str) -> Tableau:
    """Fresh 11-qubit tableau holding the encoded ``eigenstate`` with ancillas in |0>."""
    _check_eigenstate(eigenstate)
    return _encoded_state(eigenstate).copy()


def extract_syndromes(
    tableau: Tableau, rng: np.random.Generator
) -> Tuple[Syndrome, Syndrome]:
    """Run one noiseless round on ``tableau`` and return its (Z-type, X-type) syndromes."""
    record = CircuitExecutor(bind_error_markers(build_ec_round(), None)).run(tableau, rng)
    return syndromes_from_bits(record.bits)


def single_error_fidelity(
    error: PauliString, eigenstate: str, seed: int = DEFAULT_SEED
) -> float:
    """
    Fidelity with the ideal encoded ``eigenstate`` after ``error`` (on the 7 data
    qubits) followed by one noiseless round of error correction.
    """
    tableau = encoded_state(eigenstate)
    tableau.apply_pauli(error.embed(DATA, N_QUBITS))
    executor = CircuitExecutor(bind_error_markers(build_ec_round(), None))
    executor.run(tableau, np.random.default_rng(seed), SyndromeDecoder(rounds=0))
    return tableau.projection_probability(encoded_target(eigenstate))


def correct_single_errors(seed: int = DEFAULT_SEED) -> Dict[Tuple[str, str], float]:
    """Fidelity for every (eigenstate, weight-1 Pauli error) pair."""
    results = {}
    for eigenstate in EIGENSTATES:
        for q in DATA:
            for letter in "XYZ":
                error = PauliString.single(N_DATA, q, letter)
                results[(eigenstate, error.label)] = single_error_fidelity(
                    error, eigenstate, seed
                )
    return results


def _steane_block(
    circuit: Circuit,
    decoder: SyndromeDecoder,
    shots_per_input: int,
    seed: int,
    start: int,
    stop: int,
) -> np.ndarray:
    executor = CircuitExecutor(circuit)
    targets = [encoded_target(e) for e in EIGENSTATES]
    values = np.empty(stop - start)
    for i, shot in enumerate(range(start, stop)):
        index = shot // shots_per_input
        tableau = encoded_state(EIGENSTATES[index])
        record = executor.run(tableau, shot_rng(seed, shot), decoder)
        fidelity = tableau.projection_probability(targets[index], validate=False)
        values[i] = record.weight * (1.0 - fidelity)
    return values


def logical_infidelity(
    model: NoiseModel,
    shots: int,
    seed: int = DEFAULT_SEED,
    rounds: int = 3,
    workers: int = 1,
) -> EstimatorResult:
    """
    Infidelity of the error-corrected logical identity, averaged over the six
    Pauli eigenstates with ``shots`` shots each.

    The standard error combines the per-input errors, ``sqrt(sum se_i^2) / 6``, and
    the reported shot count is ``6 * shots``.

    Raises:
        ValueError: If the channel is not depolarizing or amplitude damping, or
            ``shots < 2``.
    """
    if model.channel not in SWEEP_CHANNELS:
        raise ValueError(
            f"logical infidelity needs one of {SWEEP_CHANNELS}, got {model.channel!r}"
        )
    if shots < 2:
        raise ValueError(f"need at least 2 shots per input, got {shots}")
    start = time.time()
    circuit = build_pipeline_circuit(model, rounds)
    decoder = SyndromeDecoder(rounds, model)
    total = len(EIGENSTATES) * shots
    values = run_blocks(_steane_block, (circuit, decoder, shots, seed), total, workers)
    g = circuit_one_norm(circuit, default_registry())
    per_input = [
        EstimatorResult.from_values(v, one_norm_product=g, seed=seed)
        for v in values.reshape(len(EIGENSTATES), shots)
    ]
    for eigenstate, result in zip(EIGENSTATES, per_input):
        logger.debug(f"{model} input {eigenstate}: {result.mean:.6g} +- {result.std_error:.2g}")
    std_error = math.sqrt(sum(r.std_error**2 for r in per_input)) / len(per_input)
    result = EstimatorResult(
        mean=float(np.mean([r.mean for r in per_input])),
        sample_variance=std_error**2 * total,
        std_error=std_error,
        shots=total,
        one_norm_product=g,
        seed=seed,
    )
    logger.info(
        f"Logical infidelity for {model}: {result.mean:.4g} +- {result.std_error:.2g} "
        f"({total} shots in {naturaldelta(time.time() - start)})"
    )
    return result


## threshold sweeps


def threshold_sweep(
    channel: str,
    strengths: Sequence[float],
    shots: int,
    seed: int = DEFAULT_SEED,
    rounds: int = 3,
    workers: int = 1,
) -> Tuple[List[ThresholdPoint], Optional[float]]:
    """
    Logical vs physical infidelity at each strength, and the physical infidelity
    where the two curves cross (None if they do not cross inside the sweep).

    Raises:
        ValueError: With fewer than two strengths.
    """
    if len(strengths) < 2:
        raise ValueError(f"a sweep needs at least two strengths, got {len(strengths)}")
    points = []
    for strength in strengths:
        model = NoiseModel(channel=channel, params=(strength,))
        result = logical_infidelity(model, shots, seed, rounds, workers)
        points.append(
            ThresholdPoint(
                strength=strength,
                physical_infidelity=model.physical_infidelity(),
                logical_infidelity=result.mean,
                std_error=result.std_error,
                shots=result.shots,
            )
        )
    crossing = estimate_crossing(points)
    if crossing is None:
        logger.info(f"No {channel} pseudo-threshold inside the sweep")
    else:
        logger.info(f"Estimated {channel} pseudo-threshold: physical infidelity {crossing:.3g}")
    return points, crossing


def estimate_crossing(points: Sequence[ThresholdPoint]) -> Optional[float]:
    """
    Physical infidelity where logical = physical, by linear interpolation of
    ``log(logical / physical)`` against ``log(physical)`` between the first pair of
    neighbouring points whose ratio changes side. Points with a nonpositive
    logical or physical infidelity are skipped.
    """
    usable = sorted(
        (p for p in points if p.logical_infidelity > 0 and p.physical_infidelity > 0),
        key=lambda p: p.physical_infidelity,
    )
    xs = [math.log(p.physical_infidelity) for p in usable]
    ratios = [math.log(p.logical_infidelity / p.physical_infidelity) for p in usable]
    for i in range(len(usable) - 1):
        r0, r1 = ratios[i], ratios[i + 1]
        if r0 == 0:
            return usable[i].physical_infidelity
        if (r0 < 0) != (r1 < 0) or r1 == 0:
            x = xs[i] + (0 - r0) * (xs[i + 1] - xs[i]) / (r1 - r0)
            return math.exp(x)
    return None
