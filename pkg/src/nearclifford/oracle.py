"""
Dense reference implementations for small registers (n <= 4).

Two independent paths: the PTM chain, which multiplies exact channel PTMs into the
initial state's Pauli vector, and the density-matrix path, which applies unitaries,
Kraus operators and projective measurements to a 2**n x 2**n matrix. Tests use both
to check the tableau kernel and the sampler.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nearclifford.channels import (
    CHANNEL_CONSTRUCTORS,
    PTM,
    decomp_to_ptm,
    kraus_from_name,
    reset_correction,
    term_to_ptm,
)
from nearclifford.circuits import (
    Circuit,
    Gate,
    MeasurePauli,
    MeasureReset,
    Noise,
    Registry,
    ResetPauli,
    compile,
    default_registry,
    resolve_channel,
)
from nearclifford.pauli import PauliString, basis_matrices
from nearclifford.sampler import SimulationPlan

logger = logging.getLogger(__name__)

MAX_DENSE_QUBITS = 4

_SQRT_HALF = 1 / math.sqrt(2)
GATE_UNITARIES = {
    "i": np.eye(2, dtype=complex),
    "h": _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex),
    "s": np.diag([1, 1j]),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
    "t": np.diag([1, np.exp(1j * math.pi / 4)]),
    # control is the leftmost factor
    "cnot": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}


def _check_size(n: int) -> None:
    if not 1 <= n <= MAX_DENSE_QUBITS:
        raise ValueError(
            f"dense oracle supports 1 <= n <= {MAX_DENSE_QUBITS} qubits, got {n}"
        )


## tensor helpers


def _apply_left(operator: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n: int):
    """``O`` on ``qubits`` (local qubit 0 leftmost) times ``matrix``, without building O on n qubits."""
    k = len(qubits)
    tensor = matrix.reshape((2,) * n + (matrix.shape[1],))
    op = operator.reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(qubits)))
    out = np.moveaxis(out, list(range(k)), list(qubits))
    return out.reshape(matrix.shape)


def _conjugate(operator: np.ndarray, rho: np.ndarray, qubits: Sequence[int], n: int):
    left = _apply_left(operator, rho, qubits, n)
    return _apply_left(operator, left.conj().T, qubits, n).conj().T


def apply_local_ptm(
    vector: np.ndarray, ptm: np.ndarray, qubits: Sequence[int], n: int
) -> np.ndarray:
    """Apply a k-qubit PTM to ``qubits`` of an n-qubit Pauli vector."""
    k = len(qubits)
    if ptm.shape != (4**k, 4**k):
        raise ValueError(f"PTM of shape {ptm.shape} does not act on {k} qubits")
    # base-4 digits: qubit 0 least significant, so qubit q is axis n - 1 - q
    tensor = vector.reshape((4,) * n)
    op = ptm.reshape((4,) * (2 * k))
    in_axes = [k + (k - 1 - j) for j in range(k)]
    target_axes = [n - 1 - q for q in qubits]
    out = np.tensordot(op, tensor, axes=(in_axes, target_axes))
    out = np.moveaxis(
        out, list(range(k)), [n - 1 - qubits[k - 1 - a] for a in range(k)]
    )
    return out.reshape(4**n)


def projector(generators: Sequence[PauliString], n: int) -> np.ndarray:
    """Projector onto the joint +1 eigenspace, ``prod_j (I + g_j) / 2``."""
    dim = 2**n
    result = np.eye(dim, dtype=complex)
    for g in generators:
        if g.n != n:
            raise ValueError(f"generator {g.label} is not on {n} qubits")
        result = result @ ((np.eye(dim) + g.to_matrix()) / 2)
    return result


def pauli_vector(operator: np.ndarray, n: int) -> np.ndarray:
    """``r_i = Tr(P_i O)`` in basis-index order (real part)."""
    return np.einsum("kij,ji->k", basis_matrices(n), operator).real


def from_pauli_vector(vector: np.ndarray, n: int) -> np.ndarray:
    return np.einsum("k,kij->ij", vector, basis_matrices(n)) / 2**n


## dense states


class DenseState(BaseModel):
    """n-qubit density matrix, qubit 0 as the leftmost tensor factor."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(..., ge=1, le=MAX_DENSE_QUBITS)
    rho: np.ndarray

    @model_validator(mode="after")
    def validate_fields(self):
        dim = 2**self.n
        if self.rho.shape != (dim, dim):
            raise ValueError(f"density matrix shape {self.rho.shape} != ({dim}, {dim})")
        trace = np.trace(self.rho)
        if abs(trace - 1) > 1e-10:
            raise ValueError(f"density matrix trace {trace} is not 1")
        return self

    @classmethod
    def zero(cls, n: int) -> "DenseState":
        _check_size(n)
        rho = np.zeros((2**n, 2**n), dtype=complex)
        rho[0, 0] = 1
        return cls(n=n, rho=rho)

    @classmethod
    def from_statevector(cls, psi: np.ndarray) -> "DenseState":
        psi = np.asarray(psi, dtype=complex)
        n = int(round(math.log2(len(psi))))
        _check_size(n)
        psi = psi / np.linalg.norm(psi)
        return cls(n=n, rho=np.outer(psi, psi.conj()))

    @classmethod
    def from_stabilizers(cls, generators: Sequence[PauliString]) -> "DenseState":
        """The pure state fixed by n commuting independent generators."""
        n = generators[0].n
        _check_size(n)
        if len(generators) != n:
            raise ValueError(f"need {n} generators for a pure state, got {len(generators)}")
        rho = projector(generators, n)
        trace = np.trace(rho).real
        if abs(trace - 1) > 1e-10:
            raise ValueError("generators do not define a single stabilizer state")
        return cls(n=n, rho=rho)

    def expectation(self, generators: Sequence[PauliString]) -> float:
        """``Tr(Pi rho)`` for the projector onto the generators' +1 eigenspace."""
        return float(np.trace(projector(generators, self.n) @ self.rho).real)

    def outcome_probability(self, observable: PauliString, outcome: int = 1) -> float:
        if observable.n != self.n:
            raise ValueError(f"{observable.n}-qubit observable on {self.n} qubits")
        proj = (np.eye(2**self.n) + outcome * observable.to_matrix()) / 2
        return float(np.trace(proj @ self.rho).real)

    def pauli_vector(self) -> np.ndarray:
        return pauli_vector(self.rho, self.n)

    def _with(self, rho: np.ndarray) -> "DenseState":
        return DenseState(n=self.n, rho=rho)


## dense evolution


def apply_unitary(st: DenseState, unitary: np.ndarray, qubits: Sequence[int]) -> DenseState:
    return st._with(_conjugate(unitary, st.rho, qubits, st.n))


def apply_kraus(
    st: DenseState, kraus: Sequence[np.ndarray], qubits: Sequence[int]
) -> DenseState:
    rho = sum(_conjugate(k, st.rho, qubits, st.n) for k in kraus)
    return st._with(rho)


def apply_ptm(st: DenseState, ptm: PTM, qubits: Sequence[int]) -> DenseState:
    vector = apply_local_ptm(st.pauli_vector(), ptm.matrix, qubits, st.n)
    return st._with(from_pauli_vector(vector, st.n))


def _project(st: DenseState, observable: PauliString, outcome: Optional[int]):
    dim = 2**st.n
    proj = {s: (np.eye(dim) + s * observable.to_matrix()) / 2 for s in (1, -1)}
    if outcome is None:
        return {s: proj[s] @ st.rho @ proj[s] for s in (1, -1)}
    probability = st.outcome_probability(observable, outcome)
    if probability < 1e-14:
        raise ValueError(f"outcome {outcome} of {observable.label} has probability 0")
    return {outcome: proj[outcome] @ st.rho @ proj[outcome] / probability}


def measure(st: DenseState, observable: PauliString, outcome: Optional[int] = None):
    """Pauli measurement: dephasing without ``outcome``, post-selection with it."""
    return st._with(sum(_project(st, observable, outcome).values()))


def pauli_reset(
    st: DenseState, target: PauliString, pre: Optional[PauliString] = None
) -> DenseState:
    """Measure ``target`` and map the -1 branch back with the fixed correction."""
    if pre is not None:
        st = st._with(pre.to_matrix() @ st.rho @ pre.to_matrix().conj().T)
    branches = _project(st, target, None)
    fix = reset_correction(target).to_matrix()
    return st._with(branches[1] + fix @ branches[-1] @ fix.conj().T)


def dense_apply(
    st: DenseState,
    instruction,
    outcome: Optional[int] = None,
    registry: Optional[Registry] = None,
) -> DenseState:
    """
    Exact action of one circuit instruction. Named noise channels go through their
    Kraus operators; other registry channels through their PTMs. ``outcome``
    post-selects measurements.

    Raises:
        ValueError: If the state is too large or the instruction is unsupported.
    """
    _check_size(st.n)
    if isinstance(instruction, Gate):
        return apply_unitary(st, GATE_UNITARIES[instruction.name], instruction.qubits)
    if isinstance(instruction, Noise):
        if instruction.channel in CHANNEL_CONSTRUCTORS:
            kraus = kraus_from_name(instruction.channel, instruction.params)
            return apply_kraus(st, kraus, instruction.qubits)
        registry = default_registry() if registry is None else registry
        d = resolve_channel(registry, instruction.channel, instruction.params)
        return apply_ptm(st, decomp_to_ptm(d), instruction.qubits)
    if isinstance(instruction, MeasurePauli):
        return measure(st, instruction.observable, outcome)
    if isinstance(instruction, ResetPauli):
        return pauli_reset(st, instruction.target)
    if isinstance(instruction, MeasureReset):
        z = PauliString.single(st.n, instruction.qubit, "Z")
        st = measure(st, z, outcome)
        return pauli_reset(st, z)
    raise ValueError(f"unsupported instruction {instruction!r}")


def dense_run(circuit: Circuit, registry: Optional[Registry] = None) -> DenseState:
    """Non-selective evolution of |0...0> through every instruction."""
    st = DenseState.zero(circuit.n)
    for instr in circuit.instructions:
        st = dense_apply(st, instr, registry=registry)
    return st


## exact expectations


def stabilizer_pauli_vector(generators: Sequence[PauliString], n: int) -> np.ndarray:
    return pauli_vector(projector(generators, n), n)


def exact_expectation(plan: SimulationPlan) -> float:
    """
    ``F = Tr(Pi_obs chi_K ... chi_1(rho))`` for the first observable, via the PTM
    chain. See ``exact_expectations`` for all observables.
    """
    return exact_expectations(plan)[0]


def exact_expectations(plan: SimulationPlan, prefix: Optional[int] = None) -> list:
    """
    Exact value of every observable after the first ``prefix`` channels (all of
    them by default).

    Raises:
        ValueError: If the plan has more than four qubits.
    """
    n = plan.n
    _check_size(n)
    initial = plan.initial or tuple(PauliString.single(n, k, "Z") for k in range(n))
    vector = stabilizer_pauli_vector(initial, n)
    channels = plan.channels if prefix is None else plan.channels[:prefix]
    for channel in channels:
        vector = apply_local_ptm(
            vector, decomp_to_ptm(channel.decomposition).matrix, channel.qubits, n
        )
    return [
        float(stabilizer_pauli_vector(obs, n) @ vector) / 2**n for obs in plan.observables
    ]


def exact_circuit_expectation(
    circuit: Circuit,
    observables: Optional[Sequence[Sequence[PauliString]]] = None,
    registry: Optional[Registry] = None,
) -> list:
    """Exact observable values for a feedback-free circuit run from |0...0>."""
    return exact_expectations(compile(circuit, registry, observables))


def term_action_on_state(st: DenseState, term, qubits: Sequence[int]) -> DenseState:
    """One stabilizer channel term applied through its PTM."""
    return apply_ptm(st, term_to_ptm(term), qubits)


## fidelities


def pauli_eigenstates() -> list:
    """The six single-qubit Pauli eigenstates as generator lists."""
    return [[PauliString.from_label(s + p)] for p in "XYZ" for s in "+-"]


def state_averaged_fidelity(kraus: Sequence[np.ndarray]) -> float:
    """
    Average of ``<psi| E(|psi><psi|) |psi>`` over the six Pauli eigenstates; for a
    single qubit this equals the average gate fidelity to the identity.
    """
    total = 0.0
    for generators in pauli_eigenstates():
        st = apply_kraus(DenseState.from_stabilizers(generators), kraus, (0,))
        total += st.expectation(generators)
    return total / 6

