"""
Quantum channels as Pauli transfer matrices, and stabilizer-channel
decompositions of them.

A decomposition is a real (possibly negative) combination of stabilizer channels,
each either a Clifford channel (stored by its action on the X/Z generators) or a
Pauli reset. PTM entry (i, j) is ``2**-n * Tr(P_i chi(P_j))`` with the Pauli
basis ordering from ``nearclifford.pauli``.
"""

import json
import logging
import math
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import (
    Annotated,
    Callable,
    Dict,
    List,
    Literal,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nearclifford.pauli import (
    PauliString,
    basis_matrices,
    comm_sign,
    pauli_mul,
    product_phase,
    symplectic_bits,
)

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9

# channels act on at most this many qubits
MAX_CHANNEL_QUBITS = 2


class TermKind(str, Enum):
    CLIFFORD = "clifford"
    PAULI_RESET = "pauli_reset"


## Pauli transfer matrices


class PTM(BaseModel):
    """Real 4**n x 4**n Pauli transfer matrix."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(..., ge=1, le=MAX_CHANNEL_QUBITS + 2, description="Qubit count")
    matrix: np.ndarray = Field(..., description="Real PTM, rows/cols in basis order")

    @model_validator(mode="before")
    @classmethod
    def coerce_matrix(cls, data):
        if isinstance(data, dict) and "matrix" in data:
            matrix = np.array(data["matrix"])
            if np.iscomplexobj(matrix):
                if np.max(np.abs(matrix.imag), initial=0.0) > TOLERANCE:
                    raise ValueError("PTM entries must be real")
                matrix = matrix.real
            matrix = matrix.astype(float)
            matrix.setflags(write=False)
            data = {**data, "matrix": matrix}
        return data

    @model_validator(mode="after")
    def validate_fields(self):
        size = 4**self.n
        if self.matrix.shape != (size, size):
            raise ValueError(
                f"PTM for {self.n} qubits must be {size}x{size}, "
                f"got {self.matrix.shape}"
            )
        return self

    @classmethod
    def identity(cls, n: int) -> "PTM":
        return cls(n=n, matrix=np.eye(4**n))

    @property
    def is_trace_preserving(self) -> bool:
        first_row = np.zeros(4**self.n)
        first_row[0] = 1.0
        return bool(np.allclose(self.matrix[0], first_row, atol=TOLERANCE, rtol=0))

    @property
    def is_unital(self) -> bool:
        first_col = np.zeros(4**self.n)
        first_col[0] = 1.0
        return bool(
            np.allclose(self.matrix[:, 0], first_col, atol=TOLERANCE, rtol=0)
        )

    def __matmul__(self, other: "PTM") -> "PTM":
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n} qubits")
        return PTM(n=self.n, matrix=self.matrix @ other.matrix)


def ptm_from_kraus(kraus: Sequence[np.ndarray]) -> PTM:
    """
    PTM of the channel ``rho -> sum_k E_k rho E_k^dagger``.

    A Kraus set that is not trace preserving only triggers a warning, so that
    non-TP maps can still be inspected.

    Args:
        kraus: complex 2**n x 2**n matrices

    Returns:
        The channel's PTM

    Raises:
        ValueError: If the list is empty, an operator is not square, the operators
            disagree in shape, or the dimension is not a power of two.
    """
    if len(kraus) == 0:
        raise ValueError("at least one Kraus operator is required")
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    dim = ops[0].shape[0]
    for op in ops:
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"Kraus operators must be square, got shape {op.shape}")
        if op.shape != ops[0].shape:
            raise ValueError(
                f"dimension mismatch among Kraus operators: {op.shape} vs {ops[0].shape}"
            )
    n = int(round(math.log2(dim)))
    if 2**n != dim or n < 1:
        raise ValueError(f"Kraus dimension {dim} is not a power of two")

    completeness = sum(op.conj().T @ op for op in ops)
    if not np.allclose(completeness, np.eye(dim), atol=TOLERANCE, rtol=0):
        logger.warning("Kraus operators are not trace preserving")

    basis = basis_matrices(n)
    evolved = np.zeros_like(basis)
    for op in ops:
        evolved += np.einsum("ab,jbc,dc->jad", op, basis, op.conj())
    matrix = np.einsum("iab,jba->ij", basis, evolved).real / dim
    return PTM(n=n, matrix=matrix)


## Clifford actions


def _gen_label(kind: str, qubit: int) -> str:
    return f"{kind}{qubit}"


class CliffordAction(BaseModel):
    """
    A Clifford channel given by the images of X_k and Z_k for every qubit k.

    Images are signed Hermitian Pauli strings; global phase of the underlying
    unitary is irrelevant for the channel.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    x_images: Tuple[PauliString, ...]
    z_images: Tuple[PauliString, ...]

    @model_validator(mode="after")
    def validate_fields(self):
        if len(self.x_images) != self.n or len(self.z_images) != self.n:
            raise ValueError(f"need {self.n} X images and {self.n} Z images")
        images = self.x_images + self.z_images
        for image in images:
            if image.n != self.n:
                raise ValueError(f"image {image.label} is not on {self.n} qubits")
            if not image.is_hermitian:
                raise ValueError(f"image {image.label} is not Hermitian")
        for j in range(self.n):
            for k in range(self.n):
                xx = symplectic_bits(
                    self.x_images[j].x, self.x_images[j].z,
                    self.x_images[k].x, self.x_images[k].z,
                )
                zz = symplectic_bits(
                    self.z_images[j].x, self.z_images[j].z,
                    self.z_images[k].x, self.z_images[k].z,
                )
                xz = symplectic_bits(
                    self.x_images[j].x, self.x_images[j].z,
                    self.z_images[k].x, self.z_images[k].z,
                )
                if xx or zz or xz != (1 if j == k else 0):
                    raise ValueError(
                        "generator images do not preserve commutation relations"
                    )
        return self

    @classmethod
    def identity(cls, n: int) -> "CliffordAction":
        return cls(
            n=n,
            x_images=tuple(PauliString.single(n, k, "X") for k in range(n)),
            z_images=tuple(PauliString.single(n, k, "Z") for k in range(n)),
        )

    @classmethod
    def from_images(cls, images: Dict[str, str]) -> "CliffordAction":
        """Build from ``{"X0": "+Z", "Z0": "+X", ...}`` labels."""
        n = len(images) // 2
        return cls(
            n=n,
            x_images=tuple(
                PauliString.from_label(images[_gen_label("X", k)]) for k in range(n)
            ),
            z_images=tuple(
                PauliString.from_label(images[_gen_label("Z", k)]) for k in range(n)
            ),
        )

    def to_images(self) -> Dict[str, str]:
        images = {}
        for k in range(self.n):
            images[_gen_label("X", k)] = self.x_images[k].label
            images[_gen_label("Z", k)] = self.z_images[k].label
        return images

    @property
    def is_identity(self) -> bool:
        return all(
            (px.x, px.z, px.phase, pz.x, pz.z, pz.phase) == (1 << k, 0, 0, 0, 1 << k, 0)
            for k, (px, pz) in enumerate(zip(self.x_images, self.z_images))
        )

    def _letter_images(self):
        # per qubit: images of X, Y = iXZ, Z as (x, z, phase) triples
        return _letter_image_table(self)

    def conjugate(self, pauli: PauliString) -> PauliString:
        """Image ``U P U^dagger`` of a Pauli string, phase exact."""
        if pauli.n != self.n:
            raise ValueError(f"dimension mismatch: {pauli.n} vs {self.n} qubits")
        table = self._letter_images()
        x = z = 0
        phase = pauli.phase
        for k in range(self.n):
            bits = (((pauli.x >> k) & 1) << 1) | ((pauli.z >> k) & 1)
            if bits == 0:
                continue
            ix, iz, ip = table[k][bits]
            phase += ip + product_phase(x, z, ix, iz)
            x ^= ix
            z ^= iz
        return PauliString._make(self.n, x, z, phase)

    def compose(self, first: "CliffordAction") -> "CliffordAction":
        """The action of applying ``first`` and then this one."""
        if first.n != self.n:
            raise ValueError(f"dimension mismatch: {first.n} vs {self.n} qubits")
        return CliffordAction.model_construct(
            n=self.n,
            x_images=tuple(self.conjugate(p) for p in first.x_images),
            z_images=tuple(self.conjugate(p) for p in first.z_images),
        )

    def as_pauli(self) -> Optional[PauliString]:
        """The Pauli Q whose conjugation this is, or None if it is not a Pauli frame."""
        x = z = 0
        for k in range(self.n):
            gx = PauliString.single(self.n, k, "X")
            gz = PauliString.single(self.n, k, "Z")
            if self.x_images[k].unsigned() != gx or self.z_images[k].unsigned() != gz:
                return None
            # Q anticommutes with X_k iff it has Z or Y on k
            if self.x_images[k].phase == 2:
                z |= 1 << k
            if self.z_images[k].phase == 2:
                x |= 1 << k
        return PauliString(n=self.n, x=x, z=z)


@lru_cache(maxsize=None)
def _letter_image_table(action: CliffordAction):
    table = []
    for k in range(action.n):
        ix, iz = action.x_images[k], action.z_images[k]
        yx, yz = ix.x ^ iz.x, ix.z ^ iz.z
        yp = 1 + ix.phase + iz.phase + product_phase(ix.x, ix.z, iz.x, iz.z)
        # keyed by (x << 1 | z): 1 = Z, 2 = X, 3 = Y
        table.append(
            (
                None,
                (iz.x, iz.z, iz.phase),
                (ix.x, ix.z, ix.phase),
                (yx, yz, yp % 4),
            )
        )
    return table


def pauli_conjugation(pauli: PauliString) -> CliffordAction:
    """Clifford action of conjugation by a Pauli string (phase ignored)."""
    n = pauli.n
    x_images, z_images = [], []
    for k in range(n):
        gx = PauliString.single(n, k, "X")
        gz = PauliString.single(n, k, "Z")
        x_images.append(gx if comm_sign(pauli, gx) == 1 else gx.negate())
        z_images.append(gz if comm_sign(pauli, gz) == 1 else gz.negate())
    return CliffordAction.model_construct(
        n=n, x_images=tuple(x_images), z_images=tuple(z_images)
    )


_GATE_IMAGES = {
    "i": {"X0": "+X", "Z0": "+Z"},
    "h": {"X0": "+Z", "Z0": "+X"},
    "s": {"X0": "+Y", "Z0": "+Z"},
    "x": {"X0": "+X", "Z0": "-Z"},
    "y": {"X0": "-X", "Z0": "-Z"},
    "z": {"X0": "-X", "Z0": "+Z"},
    # control is local qubit 0, target local qubit 1
    "cnot": {"X0": "+XX", "Z0": "+ZI", "X1": "+IX", "Z1": "+ZZ"},
}

CLIFFORD_GATES = tuple(_GATE_IMAGES)


@lru_cache(maxsize=None)
def gate_action(name: str) -> CliffordAction:
    """
    Clifford action of a named gate.

    Raises:
        ValueError: If ``name`` is not one of CLIFFORD_GATES.
    """
    if name not in _GATE_IMAGES:
        raise ValueError(f"Unknown Clifford gate: {name}")
    return CliffordAction.from_images(_GATE_IMAGES[name])


def gate_arity(name: str) -> int:
    return gate_action(name).n


def reset_correction(target: PauliString) -> PauliString:
    """
    The fixed Pauli N_P applied after a -1 outcome when resetting ``target``.

    It is the single-qubit Pauli on the lowest-index qubit of the target's support
    that anticommutes with the target's letter there (Z -> X, X or Y -> Z).
    """
    support = target.support
    if not support:
        raise ValueError("cannot reset the identity")
    qubit = support[0]
    letter = "X" if target.letter(qubit) == "Z" else "Z"
    return PauliString.single(target.n, qubit, letter)


## stabilizer channel terms


class CliffordTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal[TermKind.CLIFFORD] = TermKind.CLIFFORD
    action: CliffordAction

    @property
    def n(self) -> int:
        return self.action.n

    @property
    def is_identity(self) -> bool:
        return self.action.is_identity


class PauliResetTerm(BaseModel):
    """
    Measure ``target``; on -1 apply ``reset_correction(target)``, leaving the +1
    eigenstate. An optional Pauli ``pre`` is applied before the measurement.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal[TermKind.PAULI_RESET] = TermKind.PAULI_RESET
    target: PauliString
    pre: Optional[PauliString] = None

    @model_validator(mode="after")
    def validate_fields(self):
        if not self.target.is_hermitian:
            raise ValueError(f"reset target {self.target.label} must have phase +-1")
        if self.target.is_identity:
            raise ValueError("reset target must not be the identity")
        if self.pre is not None and self.pre.n != self.target.n:
            raise ValueError("pre Pauli and reset target differ in qubit count")
        return self

    @property
    def n(self) -> int:
        return self.target.n

    @property
    def is_identity(self) -> bool:
        return False


StabilizerChannelTerm = Annotated[
    Union[CliffordTerm, PauliResetTerm], Field(discriminator="kind")
]


def clifford_term(action: CliffordAction) -> CliffordTerm:
    return CliffordTerm(action=action)


def pauli_term(label: str) -> CliffordTerm:
    return CliffordTerm(action=pauli_conjugation(PauliString.from_label(label)))


def gate_term(name: str) -> CliffordTerm:
    return CliffordTerm(action=gate_action(name))


def reset_term(label: str) -> PauliResetTerm:
    return PauliResetTerm(target=PauliString.from_label(label))


def _clifford_ptm(action: CliffordAction) -> np.ndarray:
    size = 4**action.n
    matrix = np.zeros((size, size))
    for j in range(size):
        image = action.conjugate(PauliString.from_basis_index(j, action.n))
        matrix[image.basis_index, j] = image.sign
    return matrix


def _reset_ptm(term: PauliResetTerm) -> np.ndarray:
    n, target = term.n, term.target
    correction = reset_correction(target)
    size = 4**n
    matrix = np.zeros((size, size))
    for j in range(size):
        basis = PauliString.from_basis_index(j, n)
        scale = 1 if term.pre is None else comm_sign(term.pre, basis)
        # components anticommuting with the target are dephased away, and the
        # correction cancels the others unless it commutes with them
        if comm_sign(basis, target) == -1 or comm_sign(correction, basis) == -1:
            continue
        product = pauli_mul(basis, target)
        matrix[j, j] += scale
        matrix[product.basis_index, j] += scale * product.sign
    return matrix


def term_to_ptm(term: Union[CliffordTerm, PauliResetTerm]) -> PTM:
    """
    PTM of a single stabilizer channel.

    Clifford terms give signed permutation matrices. A reset of P gives
    ``rho -> Pi+ rho Pi+ + N Pi- rho Pi- N^dagger`` with Pi+- = (I +- P)/2 and N the
    fixed correction from ``reset_correction``.
    """
    return PTM(n=term.n, matrix=_term_matrix(term))


@lru_cache(maxsize=None)
def _term_matrix(term) -> np.ndarray:
    if isinstance(term, CliffordTerm):
        matrix = _clifford_ptm(term.action)
    else:
        matrix = _reset_ptm(term)
    matrix.setflags(write=False)
    return matrix


## decompositions


class StabilizerDecomposition(BaseModel):
    """Quasiprobability decomposition: ``chi = sum_i q_i S_i``."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, le=MAX_CHANNEL_QUBITS)
    terms: Tuple[Tuple[float, StabilizerChannelTerm], ...] = Field(
        ..., description="(coefficient, stabilizer channel) pairs"
    )

    @model_validator(mode="after")
    def validate_fields(self):
        for q, term in self.terms:
            if term.n != self.n:
                raise ValueError(
                    f"mixed qubit counts: term on {term.n} qubits in a "
                    f"{self.n}-qubit decomposition"
                )
            if not math.isfinite(q):
                raise ValueError(f"coefficient {q} is not finite")
        return self

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([q for q, _ in self.terms], dtype=float)

    def coefficient_of(self, term) -> float:
        """Total coefficient carried by ``term`` (0 if absent)."""
        return sum(q for q, t in self.terms if t == term)


def decomposition(terms: Sequence[Tuple[float, object]]) -> StabilizerDecomposition:
    """Decomposition from (q, term) pairs, dropping exactly-zero coefficients."""
    if not terms:
        raise ValueError("a decomposition needs at least one term")
    kept = tuple((float(q), t) for q, t in terms if q != 0.0)
    n = terms[0][1].n
    return StabilizerDecomposition(n=n, terms=kept)


def decomp_to_ptm(d: StabilizerDecomposition) -> PTM:
    """PTM of ``sum_i q_i S_i``."""
    size = 4**d.n
    matrix = np.zeros((size, size))
    for q, term in d.terms:
        matrix += q * _term_matrix(term)
    return PTM(n=d.n, matrix=matrix)


def negativity(d: StabilizerDecomposition) -> float:
    """Total magnitude of the negative coefficients."""
    q = d.coefficients
    return float(-q[q < 0].sum())


def one_norm(d: StabilizerDecomposition) -> float:
    return float(np.abs(d.coefficients).sum())


def tensor_decompositions(
    a: StabilizerDecomposition, b: StabilizerDecomposition
) -> StabilizerDecomposition:
    """
    Term-by-term tensor product ``a (x) b`` (a on the low qubits).

    Coefficients multiply, so the 1-norm is multiplicative. Clifford pairs give a
    Clifford; a reset paired with a Pauli-frame Clifford gives a reset carrying the
    Pauli as its ``pre`` frame.

    Raises:
        ValueError: If the result would act on more than two qubits, or a reset is
            paired with a non-Pauli Clifford or another reset.
    """
    n = a.n + b.n
    if n > MAX_CHANNEL_QUBITS:
        raise ValueError(f"tensor product would act on {n} qubits")
    low, high = list(range(a.n)), list(range(a.n, n))
    terms = []
    for qa, ta in a.terms:
        for qb, tb in b.terms:
            terms.append((qa * qb, _tensor_terms(ta, tb, low, high, n)))
    return decomposition(terms)


def _embed_action(action: CliffordAction, qubits: List[int], n: int):
    return [p.embed(qubits, n) for p in action.x_images], [
        p.embed(qubits, n) for p in action.z_images
    ]


def _tensor_terms(ta, tb, low, high, n):
    if isinstance(ta, CliffordTerm) and isinstance(tb, CliffordTerm):
        xa, za = _embed_action(ta.action, low, n)
        xb, zb = _embed_action(tb.action, high, n)
        return CliffordTerm(
            action=CliffordAction(n=n, x_images=tuple(xa + xb), z_images=tuple(za + zb))
        )
    if isinstance(ta, PauliResetTerm) and isinstance(tb, PauliResetTerm):
        raise ValueError("tensor product of two resets is not a single stabilizer channel")
    if isinstance(ta, PauliResetTerm):
        reset, frame, reset_qubits, frame_qubits = ta, tb, low, high
    else:
        reset, frame, reset_qubits, frame_qubits = tb, ta, high, low
    frame_pauli = frame.action.as_pauli()
    if frame_pauli is None:
        raise ValueError("a reset can only be tensored with a Pauli-frame Clifford")
    pre = frame_pauli.embed(frame_qubits, n)
    if reset.pre is not None:
        pre = pauli_mul(pre, reset.pre.embed(reset_qubits, n)).unsigned()
    return PauliResetTerm(
        target=reset.target.embed(reset_qubits, n),
        pre=None if pre.is_identity else pre,
    )


## closed-form decompositions


def make_identity(n: int = 1) -> StabilizerDecomposition:
    return decomposition([(1.0, CliffordTerm(action=CliffordAction.identity(n)))])


def make_rotation_z(theta: float) -> StabilizerDecomposition:
    """
    Minimal-negativity decomposition of conjugation by diag(1, e^{i theta}).

    ``Z_theta = (1 + cos - sin)/2 I + (1 - cos - sin)/2 Z + sin S``; the negativity
    is minimal for 0 <= theta <= pi/4.
    """
    c, s = math.cos(theta), math.sin(theta)
    return decomposition(
        [
            ((1 + c - s) / 2, gate_term("i")),
            ((1 - c - s) / 2, gate_term("z")),
            (s, gate_term("s")),
        ]
    )


def make_t_gate() -> StabilizerDecomposition:
    return make_rotation_z(math.pi / 4)


def make_rotation_z_positive_approx(theta: float) -> StabilizerDecomposition:
    """Biased all-positive approximation ``(1 - sin) I + sin S``."""
    if not 0 <= theta <= math.pi / 2:
        raise ValueError(f"theta must lie in [0, pi/2], got {theta}")
    s = math.sin(theta)
    return decomposition([(1 - s, gate_term("i")), (s, gate_term("s"))])


def make_amplitude_damping(gamma: float) -> StabilizerDecomposition:
    """
    Minimal-negativity decomposition of amplitude damping.

    ``A_gamma = ((1-g) + sqrt(1-g))/2 I + ((1-g) - sqrt(1-g))/2 Z + g R_Z``
    """
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    root = math.sqrt(1 - gamma)
    return decomposition(
        [
            (((1 - gamma) + root) / 2, gate_term("i")),
            (((1 - gamma) - root) / 2, gate_term("z")),
            (gamma, reset_term("+Z")),
        ]
    )


def make_depolarizing(p: float) -> StabilizerDecomposition:
    """``D(rho) = (1 - p) rho + p/3 (X rho X + Y rho Y + Z rho Z)``"""
    if not 0 <= p <= 0.75:
        raise ValueError(f"p must lie in [0, 3/4], got {p}")
    return decomposition(
        [
            (1 - p, gate_term("i")),
            (p / 3, pauli_term("X")),
            (p / 3, pauli_term("Y")),
            (p / 3, pauli_term("Z")),
        ]
    )


def make_pauli_channel(probabilities: Dict[str, float]) -> StabilizerDecomposition:
    """Stochastic Pauli channel from ``{"XI": p, ...}`` (identity gets the rest)."""
    total = sum(probabilities.values())
    if any(p < 0 for p in probabilities.values()) or total > 1 + TOLERANCE:
        raise ValueError("Pauli channel probabilities must be nonnegative and sum <= 1")
    n = len(next(iter(probabilities)))
    terms = [(1 - total, CliffordTerm(action=CliffordAction.identity(n)))]
    terms += [(p, pauli_term(label)) for label, p in probabilities.items()]
    return decomposition(terms)


## Kraus representations


_S = np.diag([1, 1j])


def kraus_rotation_z(theta: float) -> List[np.ndarray]:
    return [np.diag([1, np.exp(1j * theta)])]


def t_gate_kraus() -> List[np.ndarray]:
    return kraus_rotation_z(math.pi / 4)


def kraus_rotation_z_positive_approx(theta: float) -> List[np.ndarray]:
    s = math.sin(theta)
    return [math.sqrt(1 - s) * np.eye(2, dtype=complex), math.sqrt(s) * _S]


def kraus_amplitude_damping(gamma: float) -> List[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def kraus_depolarizing(p: float) -> List[np.ndarray]:
    paulis = [PauliString.from_label(c).to_matrix() for c in "XYZ"]
    return [math.sqrt(1 - p) * np.eye(2, dtype=complex)] + [
        math.sqrt(p / 3) * m for m in paulis
    ]


def random_kraus(n: int, rank: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Random CPTP channel: blocks of a random isometry from QR of a Gaussian matrix."""
    dim = 2**n
    gaussian = rng.normal(size=(rank * dim, dim)) + 1j * rng.normal(
        size=(rank * dim, dim)
    )
    isometry, _ = np.linalg.qr(gaussian)
    return [isometry[k * dim : (k + 1) * dim, :] for k in range(rank)]


def load_kraus_file(path: Path) -> List[np.ndarray]:
    """
    Read Kraus operators from JSON: a list whose entries are either
    ``{"re": [[...]], "im": [[...]]}`` or a ``[re, im]`` pair of nested lists.
    """
    with open(path, "r") as f:
        data = json.load(f)
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a non-empty JSON list of matrices")
    kraus = []
    for entry in data:
        if isinstance(entry, dict):
            re, im = entry["re"], entry.get("im", 0)
        elif isinstance(entry, list) and len(entry) == 2:
            re, im = entry
        else:
            raise ValueError(f"{path}: unrecognized Kraus entry {entry!r}")
        kraus.append(np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float))
    return kraus


## fidelity helpers


def average_gate_fidelity(ptm: PTM) -> float:
    """Average gate fidelity to the identity, ``(d F_pro + 1)/(d + 1)``."""
    d = 2**ptm.n
    process_fidelity = float(np.trace(ptm.matrix)) / d**2
    return (d * process_fidelity + 1) / (d + 1)


def infidelity(ptm: PTM) -> float:
    return 1.0 - average_gate_fidelity(ptm)


def depolarizing_infidelity(p: float) -> float:
    return 2 * p / 3


def amplitude_damping_infidelity(gamma: float) -> float:
    process_fidelity = (1 + math.sqrt(1 - gamma)) ** 2 / 4
    return 1 - (2 * process_fidelity + 1) / 3


## JSON format


def _format_float(value: float) -> float:
    # 17 significant digits round-trip exactly
    return float(f"{value:.17g}")


def decomposition_to_json_dict(d: StabilizerDecomposition) -> dict:
    terms = []
    for q, term in d.terms:
        entry = {"q": _format_float(q), "kind": term.kind.value}
        if isinstance(term, CliffordTerm):
            entry["action"] = term.action.to_images()
        else:
            entry["target"] = term.target.label
            if term.pre is not None:
                entry["pre"] = term.pre.label
        terms.append(entry)
    return {"n": d.n, "terms": terms}


def decomposition_from_json_dict(data: dict) -> StabilizerDecomposition:
    terms = []
    for entry in data["terms"]:
        kind = TermKind(entry["kind"])
        if kind == TermKind.CLIFFORD:
            term = CliffordTerm(action=CliffordAction.from_images(entry["action"]))
        else:
            pre = entry.get("pre")
            term = PauliResetTerm(
                target=PauliString.from_label(entry["target"]),
                pre=PauliString.from_label(pre) if pre else None,
            )
        terms.append((float(entry["q"]), term))
    return StabilizerDecomposition(n=int(data["n"]), terms=tuple(terms))


## named constructors

# name -> (decomposition constructor, Kraus constructor, parameter count)
CHANNEL_CONSTRUCTORS: Dict[str, Tuple[Callable, Callable, int]] = {
    "identity": (lambda: make_identity(1), lambda: [np.eye(2, dtype=complex)], 0),
    "t": (make_t_gate, t_gate_kraus, 0),
    "rotation_z": (make_rotation_z, kraus_rotation_z, 1),
    "rotation_z_positive": (
        make_rotation_z_positive_approx,
        kraus_rotation_z_positive_approx,
        1,
    ),
    "amplitude_damping": (make_amplitude_damping, kraus_amplitude_damping, 1),
    "depolarizing": (make_depolarizing, kraus_depolarizing, 1),
}


def _lookup_constructor(name: str, params: Sequence[float]):
    if name not in CHANNEL_CONSTRUCTORS:
        raise ValueError(
            f"unknown channel {name!r}; expected one of {sorted(CHANNEL_CONSTRUCTORS)}"
        )
    entry = CHANNEL_CONSTRUCTORS[name]
    if len(params) != entry[2]:
        raise ValueError(f"channel {name!r} takes {entry[2]} parameter(s), got {len(params)}")
    return entry


def channel_from_name(name: str, params: Sequence[float] = ()) -> StabilizerDecomposition:
    """
    Decomposition of a named single-qubit channel, e.g. ``("depolarizing", [1e-3])``.

    Raises:
        ValueError: If the name is unknown, the parameter count is wrong or a
            parameter is outside the constructor's domain.
    """
    construct, _, _ = _lookup_constructor(name, params)
    return construct(*params)


def kraus_from_name(name: str, params: Sequence[float] = ()) -> List[np.ndarray]:
    construct, kraus, _ = _lookup_constructor(name, params)
    # the decomposition constructors own the domain checks
    construct(*params)
    return kraus(*params)
