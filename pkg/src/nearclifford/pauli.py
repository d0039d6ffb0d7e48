"""
Pauli operator algebra.

An n-qubit Pauli string is stored as two integer bitmasks plus a phase:
bit k of ``x``/``z`` describes qubit k, and the (x, z) pair selects the letter
on that qubit ((0,0)=I, (1,0)=X, (1,1)=Y, (0,1)=Z). The operator is
``i**phase`` times the tensor product of those letters, so a Hermitian string
has phase 0 (+1) or 2 (-1).

The Pauli basis index packs one base-4 digit per qubit (I=0, X=1, Y=2, Z=3) with
qubit 0 as the least significant digit. Index 0 is the identity. Every PTM in the
package is indexed this way.
"""

import re
from functools import lru_cache
from typing import Iterable, List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# hard cap for explicit basis enumeration (4**4 = 256 operators)
MAX_BASIS_QUBITS = 4

LETTERS = "IXYZ"

# (x << 1 | z) -> basis digit, and back
_DIGIT_FROM_BITS = (0, 3, 1, 2)
_BITS_FROM_DIGIT = ((0, 0), (1, 0), (1, 1), (0, 1))

_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LABEL_RE = re.compile(r"^\s*([+-]?)(i?)([IXYZ]+)\s*$")

_SINGLE_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """
    Phase exponent (power of i, mod 4) picked up when multiplying letter-form
    Pauli strings (x1, z1) and (x2, z2) in that order.

    Per qubit XY = iZ, YZ = iX, ZX = iY and the reversed products carry -i.
    """
    xo1, yo1, zo1 = x1 & ~z1, x1 & z1, z1 & ~x1
    xo2, yo2, zo2 = x2 & ~z2, x2 & z2, z2 & ~x2
    plus = (xo1 & yo2) | (yo1 & zo2) | (zo1 & xo2)
    minus = (xo1 & zo2) | (zo1 & yo2) | (yo1 & xo2)
    return (plus.bit_count() - minus.bit_count()) % 4


def symplectic_bits(x1: int, z1: int, x2: int, z2: int) -> int:
    """0 if the two Pauli strings commute, 1 if they anticommute."""
    return ((x1 & z2).bit_count() + (z1 & x2).bit_count()) & 1


class PauliString(BaseModel):
    """
    Signed n-qubit Pauli operator.

    Immutable and hashable, so it can be used as a dictionary key and shared
    freely between threads and Ray workers.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Number of qubits")
    x: int = Field(0, ge=0, description="X bitmask, bit k is qubit k")
    z: int = Field(0, ge=0, description="Z bitmask, bit k is qubit k")
    phase: int = Field(0, ge=0, le=3, description="Exponent of i")

    @model_validator(mode="after")
    def validate_fields(self):
        limit = 1 << self.n
        if self.x >= limit or self.z >= limit:
            raise ValueError(
                f"bitmasks x={self.x:b}, z={self.z:b} do not fit in {self.n} qubits"
            )
        return self

    ## constructors

    @classmethod
    def _make(cls, n: int, x: int, z: int, phase: int = 0) -> "PauliString":
        # unchecked constructor for internal arithmetic
        return cls.model_construct(n=n, x=x, z=z, phase=phase % 4)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n=n)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        """The Pauli ``letter`` on ``qubit`` and identity elsewhere."""
        if not 0 <= qubit < n:
            raise ValueError(f"qubit {qubit} out of range for {n} qubits")
        if letter not in LETTERS:
            raise ValueError(f"unknown Pauli letter {letter!r}")
        bx, bz = _BITS_FROM_DIGIT[LETTERS.index(letter)]
        return cls(n=n, x=bx << qubit, z=bz << qubit)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """
        Parse the textual form, e.g. ``"-XZI"`` or ``"+iY"``.

        The leftmost letter is qubit 0. A missing sign means +1.

        Raises:
            ValueError: If the label is not of the form ``[+-]?i?[IXYZ]+``.
        """
        match = _LABEL_RE.match(label)
        if match is None:
            raise ValueError(f"invalid Pauli label {label!r}")
        sign, imag, letters = match.groups()
        x = z = 0
        for k, letter in enumerate(letters):
            bx, bz = _BITS_FROM_DIGIT[LETTERS.index(letter)]
            x |= bx << k
            z |= bz << k
        phase = (2 if sign == "-" else 0) + (1 if imag else 0)
        return cls(n=len(letters), x=x, z=z, phase=phase)

    @classmethod
    def from_basis_index(cls, index: int, n: int) -> "PauliString":
        if not 0 <= index < 4**n:
            raise ValueError(f"basis index {index} out of range for {n} qubits")
        x = z = 0
        for k in range(n):
            bx, bz = _BITS_FROM_DIGIT[(index >> (2 * k)) & 3]
            x |= bx << k
            z |= bz << k
        return cls._make(n, x, z)

    ## properties

    @property
    def letters(self) -> str:
        return "".join(self.letter(k) for k in range(self.n))

    @property
    def label(self) -> str:
        return _PHASE_PREFIX[self.phase] + self.letters

    @property
    def basis_index(self) -> int:
        index = 0
        for k in range(self.n):
            bits = (((self.x >> k) & 1) << 1) | ((self.z >> k) & 1)
            index |= _DIGIT_FROM_BITS[bits] << (2 * k)
        return index

    @property
    def support(self) -> List[int]:
        mask = self.x | self.z
        return [k for k in range(self.n) if (mask >> k) & 1]

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign(self) -> int:
        """+1 or -1 for a Hermitian string."""
        if not self.is_hermitian:
            raise ValueError(f"{self.label} is not Hermitian")
        return 1 if self.phase == 0 else -1

    def letter(self, qubit: int) -> str:
        bits = (((self.x >> qubit) & 1) << 1) | ((self.z >> qubit) & 1)
        return LETTERS[_DIGIT_FROM_BITS[bits]]

    ## algebra

    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_mul(self, other)

    def __str__(self) -> str:
        return self.label

    def negate(self) -> "PauliString":
        return PauliString._make(self.n, self.x, self.z, self.phase + 2)

    def unsigned(self) -> "PauliString":
        return PauliString._make(self.n, self.x, self.z, 0)

    def with_phase(self, phase: int) -> "PauliString":
        return PauliString._make(self.n, self.x, self.z, phase)

    def embed(self, qubits: Sequence[int], n_total: int) -> "PauliString":
        """Place this k-qubit Pauli on ``qubits`` of an ``n_total``-qubit register."""
        if len(qubits) != self.n:
            raise ValueError(f"need {self.n} target qubits, got {len(qubits)}")
        x = z = 0
        for local, q in enumerate(qubits):
            if not 0 <= q < n_total:
                raise ValueError(f"qubit {q} out of range for {n_total} qubits")
            x |= ((self.x >> local) & 1) << q
            z |= ((self.z >> local) & 1) << q
        return PauliString._make(n_total, x, z, self.phase)

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        """The letters on ``qubits`` as a len(qubits)-qubit string, keeping the phase."""
        x = z = 0
        for local, q in enumerate(qubits):
            x |= ((self.x >> q) & 1) << local
            z |= ((self.z >> q) & 1) << local
        return PauliString._make(len(qubits), x, z, self.phase)

    def to_matrix(self) -> np.ndarray:
        """Dense 2**n x 2**n matrix, qubit 0 as the leftmost tensor factor."""
        matrix = np.ones((1, 1), dtype=complex)
        for k in range(self.n):
            matrix = np.kron(matrix, _SINGLE_MATRICES[self.letter(k)])
        return (1j**self.phase) * matrix


def _check_same_size(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} qubits vs {b.n} qubits")


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    """
    Product ``a @ b`` with exact phase.

    Raises:
        ValueError: If the qubit counts differ.
    """
    _check_same_size(a, b)
    phase = a.phase + b.phase + product_phase(a.x, a.z, b.x, b.z)
    return PauliString._make(a.n, a.x ^ b.x, a.z ^ b.z, phase)


def symplectic_product(a: PauliString, b: PauliString) -> int:
    _check_same_size(a, b)
    return symplectic_bits(a.x, a.z, b.x, b.z)


def comm_sign(a: PauliString, b: PauliString) -> int:
    """+1 if ``a`` and ``b`` commute, -1 if they anticommute."""
    return -1 if symplectic_product(a, b) else 1


def multiply_all(paulis: Iterable[PauliString], n: int) -> PauliString:
    result = PauliString.identity(n)
    for pauli in paulis:
        result = pauli_mul(result, pauli)
    return result


@lru_cache(maxsize=None)
def _basis(n: int) -> tuple:
    return tuple(PauliString.from_basis_index(i, n) for i in range(4**n))


def pauli_basis(n: int) -> List[PauliString]:
    """
    The 4**n unsigned Pauli strings in basis-index order (entry 0 is identity).

    Args:
        n: number of qubits, 1 <= n <= MAX_BASIS_QUBITS

    Raises:
        ValueError: If n is outside the supported range.
    """
    if not 1 <= n <= MAX_BASIS_QUBITS:
        raise ValueError(
            f"Pauli basis supported for 1 <= n <= {MAX_BASIS_QUBITS}, got n={n}"
        )
    return list(_basis(n))


@lru_cache(maxsize=None)
def basis_matrices(n: int) -> np.ndarray:
    """Dense matrices of the Pauli basis, shape (4**n, 2**n, 2**n)."""
    return np.stack([p.to_matrix() for p in pauli_basis(n)])
