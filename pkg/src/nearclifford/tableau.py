"""
Extended CHP stabilizer tableau.

Rows 0..n-1 are destabilizers and rows n..2n-1 stabilizers. Each row is a signed
Pauli string stored as bit-packed X and Z words (``uint64``, 64 qubits per word)
plus a sign bit, with (x, z) = (1, 1) meaning Y. Row products use word-level
popcounts, so a row operation costs O(n / 64) and a multi-qubit measurement
O(n^2 / 64).
"""

import logging
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from nearclifford.channels import (
    CliffordAction,
    CliffordTerm,
    PauliResetTerm,
    gate_action,
    reset_correction,
)
from nearclifford.pauli import PauliString, symplectic_bits

logger = logging.getLogger(__name__)

WORD_BITS = 64
_ONE = np.uint64(1)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


class MeasurementRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    outcome: int = Field(..., description="+1 or -1")
    deterministic: bool

    @property
    def bit(self) -> int:
        """Classical bit: 0 for +1, 1 for -1."""
        return 0 if self.outcome == 1 else 1


## bit packing helpers


def _words(n: int) -> int:
    return (n + WORD_BITS - 1) // WORD_BITS


def _pack(bits: int, n_words: int) -> np.ndarray:
    mask = (1 << WORD_BITS) - 1
    return np.array(
        [(bits >> (WORD_BITS * w)) & mask for w in range(n_words)], dtype=np.uint64
    )


def _unpack(words: np.ndarray) -> int:
    value = 0
    for w, word in enumerate(words):
        value |= int(word) << (WORD_BITS * w)
    return value


def _popcount_rows(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def _product_phase_rows(x1, z1, x2, z2) -> np.ndarray:
    """Vectorized ``pauli.product_phase`` over the leading axis of x1/z1."""
    xo1, yo1, zo1 = x1 & ~z1, x1 & z1, z1 & ~x1
    xo2, yo2, zo2 = x2 & ~z2, x2 & z2, z2 & ~x2
    plus = (xo1 & yo2) | (yo1 & zo2) | (zo1 & xo2)
    minus = (xo1 & zo2) | (zo1 & yo2) | (yo1 & xo2)
    return _popcount_rows(plus) - _popcount_rows(minus)


@lru_cache(maxsize=None)
def _local_table(action: CliffordAction) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    For every local letter code (2 bits per qubit, (x << 1) | z), the image's x
    bits, z bits and sign flip under ``action``.
    """
    k = action.n
    size = 4**k
    new_x = np.zeros(size, dtype=np.uint64)
    new_z = np.zeros(size, dtype=np.uint64)
    flip = np.zeros(size, dtype=np.uint8)
    for code in range(size):
        x = z = 0
        for j in range(k):
            bits = (code >> (2 * j)) & 3
            x |= (bits >> 1) << j
            z |= (bits & 1) << j
        image = action.conjugate(PauliString._make(k, x, z))
        new_x[code], new_z[code] = image.x, image.z
        flip[code] = 1 if image.phase == 2 else 0
    return new_x, new_z, flip


## GF(2) helpers on int bitsets


def _gf2_rank(rows: List[int]) -> int:
    work = list(rows)
    rank = 0
    while work:
        pivot = work.pop()
        if pivot == 0:
            continue
        rank += 1
        low = pivot & -pivot
        work = [r ^ pivot if r & low else r for r in work]
    return rank


def check_generators(generators: Sequence[PauliString], n: int) -> None:
    for g in generators:
        if g.n != n:
            raise ValueError(f"generator {g.label} is not on {n} qubits")
        if not g.is_hermitian:
            raise ValueError(f"generator {g.label} must have phase +-1")
    for i, a in enumerate(generators):
        for b in generators[i + 1 :]:
            if symplectic_bits(a.x, a.z, b.x, b.z):
                raise ValueError(f"generators {a.label} and {b.label} do not commute")
    if _gf2_rank([g.x | (g.z << n) for g in generators]) != len(generators):
        raise ValueError("generators are not independent")


def _destabilizers(generators: Sequence[PauliString], n: int) -> List[Tuple[int, int]]:
    """
    Destabilizers for n independent commuting generators: D_i anticommutes with
    S_i only, and the D_i commute with each other.
    """
    # solve <S_j, D> = delta_ij with S_j written as (z | x << n)
    rows = [[g.z | (g.x << n), 1 << j] for j, g in enumerate(generators)]
    pivots = []
    next_row = 0
    for col in range(2 * n):
        found = next(
            (r for r in range(next_row, n) if (rows[r][0] >> col) & 1), None
        )
        if found is None:
            continue
        rows[next_row], rows[found] = rows[found], rows[next_row]
        for r in range(n):
            if r != next_row and (rows[r][0] >> col) & 1:
                rows[r][0] ^= rows[next_row][0]
                rows[r][1] ^= rows[next_row][1]
        pivots.append(col)
        next_row += 1
    full = (1 << n) - 1
    destab = []
    for i in range(n):
        vec = 0
        for k, col in enumerate(pivots):
            if (rows[k][1] >> i) & 1:
                vec |= 1 << col
        destab.append([vec & full, vec >> n])
    for i in range(n):
        for j in range(i):
            if symplectic_bits(destab[i][0], destab[i][1], destab[j][0], destab[j][1]):
                destab[i][0] ^= generators[j].x
                destab[i][1] ^= generators[j].z
    return [tuple(d) for d in destab]


class Tableau:
    """
    Stabilizer state on n qubits.

    Measurement randomness comes from ``rng``, the owning shot's stream; a tableau
    never seeds itself. With ``debug=True`` the commutation structure is checked
    after every mutation.
    """

    def __init__(
        self,
        n: int,
        rng: Optional[np.random.Generator] = None,
        debug: bool = False,
    ):
        if n < 1:
            raise ValueError(f"a tableau needs at least one qubit, got {n}")
        self.n = n
        self.rng = rng
        self.debug = debug
        self.n_words = _words(n)
        self.x = np.zeros((2 * n, self.n_words), dtype=np.uint64)
        self.z = np.zeros((2 * n, self.n_words), dtype=np.uint64)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        for k in range(n):
            word, bit = divmod(k, WORD_BITS)
            self.x[k, word] = _ONE << np.uint64(bit)
            self.z[n + k, word] = _ONE << np.uint64(bit)

    ## construction

    @classmethod
    def from_stabilizers(
        cls,
        generators: Sequence[PauliString],
        rng: Optional[np.random.Generator] = None,
        debug: bool = False,
    ) -> "Tableau":
        """
        The stabilizer state fixed by n independent, commuting, signed generators.

        Raises:
            ValueError: If the generators are not n independent commuting Hermitian
                Paulis on n qubits.
        """
        if not generators:
            raise ValueError("at least one generator is required")
        n = generators[0].n
        if len(generators) != n:
            raise ValueError(f"need {n} generators for {n} qubits, got {len(generators)}")
        check_generators(generators, n)
        tableau = cls(n, rng=rng, debug=debug)
        for i, (dx, dz) in enumerate(_destabilizers(generators, n)):
            tableau.x[i] = _pack(dx, tableau.n_words)
            tableau.z[i] = _pack(dz, tableau.n_words)
            tableau.r[i] = 0
        for i, g in enumerate(generators):
            tableau.x[n + i] = _pack(g.x, tableau.n_words)
            tableau.z[n + i] = _pack(g.z, tableau.n_words)
            tableau.r[n + i] = 1 if g.sign == -1 else 0
        tableau._after_mutation()
        return tableau

    def copy(self) -> "Tableau":
        other = Tableau.__new__(Tableau)
        other.n, other.rng, other.debug, other.n_words = (
            self.n,
            self.rng,
            self.debug,
            self.n_words,
        )
        other.x, other.z, other.r = self.x.copy(), self.z.copy(), self.r.copy()
        return other

    ## row access

    def row(self, i: int) -> PauliString:
        return PauliString._make(
            self.n, _unpack(self.x[i]), _unpack(self.z[i]), 2 * int(self.r[i])
        )

    def stabilizers(self) -> List[PauliString]:
        return [self.row(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> List[PauliString]:
        return [self.row(i) for i in range(self.n)]

    def dump(self) -> str:
        """Rows in +-[IXYZ] notation, destabilizers first."""
        return "\n".join(self.row(i).label for i in range(2 * self.n))

    ## invariants

    def check_invariants(self) -> None:
        """
        Raises:
            ValueError: If the stabilizers do not commute, a destabilizer has the wrong
                commutation with the rows, or the rows are dependent.
        """
        n = self.n
        x, z = self.x, self.z
        anti = (
            _popcount_rows(x[:, None, :] & z[None, :, :])
            + _popcount_rows(z[:, None, :] & x[None, :, :])
        ) & 1
        expected = np.zeros((2 * n, 2 * n), dtype=anti.dtype)
        expected[np.arange(n), np.arange(n) + n] = 1
        expected[np.arange(n) + n, np.arange(n)] = 1
        if not np.array_equal(anti, expected):
            raise ValueError("tableau commutation structure is broken")
        rows = [_unpack(x[i]) | (_unpack(z[i]) << n) for i in range(2 * n)]
        if _gf2_rank(rows) != 2 * n:
            raise ValueError("tableau rows are not independent")

    def _after_mutation(self) -> None:
        if self.debug:
            self.check_invariants()

    ## Clifford evolution

    def _check_qubits(self, qubits: Sequence[int]) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise ValueError(f"qubit {q} out of range for {self.n} qubits")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit in {tuple(qubits)}")

    def apply_action(self, action: CliffordAction, qubits: Sequence[int]) -> None:
        """Conjugate every row by a k-qubit Clifford acting on ``qubits``."""
        if len(qubits) != action.n:
            raise ValueError(
                f"{action.n}-qubit Clifford applied to {len(qubits)} qubits"
            )
        self._check_qubits(qubits)
        new_x, new_z, flip = _local_table(action)
        locations = [divmod(q, WORD_BITS) for q in qubits]
        code = np.zeros(2 * self.n, dtype=np.int64)
        for j, (word, bit) in enumerate(locations):
            shift = np.uint64(bit)
            bx = (self.x[:, word] >> shift) & _ONE
            bz = (self.z[:, word] >> shift) & _ONE
            code |= ((bx << _ONE) | bz).astype(np.int64) << (2 * j)
        self.r ^= flip[code]
        img_x, img_z = new_x[code], new_z[code]
        for j, (word, bit) in enumerate(locations):
            shift = np.uint64(bit)
            keep = _ALL ^ (_ONE << shift)
            self.x[:, word] = (self.x[:, word] & keep) | (
                ((img_x >> np.uint64(j)) & _ONE) << shift
            )
            self.z[:, word] = (self.z[:, word] & keep) | (
                ((img_z >> np.uint64(j)) & _ONE) << shift
            )
        self._after_mutation()

    def apply_gate(self, name: str, qubits: Sequence[int]) -> None:
        """Named gate from ``channels.CLIFFORD_GATES``; cnot takes (control, target)."""
        if name == "i":
            self._check_qubits(qubits)
            return
        self.apply_action(gate_action(name), qubits)

    def apply_clifford(
        self, action: Union[str, CliffordAction], qubits: Sequence[int]
    ) -> None:
        if isinstance(action, str):
            self.apply_gate(action, qubits)
        else:
            self.apply_action(action, qubits)

    def _pauli_words(self, pauli: PauliString) -> Tuple[np.ndarray, np.ndarray]:
        if pauli.n != self.n:
            raise ValueError(f"{pauli.n}-qubit Pauli on a {self.n}-qubit tableau")
        return _pack(pauli.x, self.n_words), _pack(pauli.z, self.n_words)

    def _anticommuting(self, px: np.ndarray, pz: np.ndarray) -> np.ndarray:
        return ((_popcount_rows(self.x & pz) + _popcount_rows(self.z & px)) & 1).astype(
            bool
        )

    def apply_pauli(self, pauli: PauliString) -> None:
        """Conjugate by a Pauli string: flips the sign of every anticommuting row."""
        px, pz = self._pauli_words(pauli)
        self.r ^= self._anticommuting(px, pz).astype(np.uint8)
        self._after_mutation()

    ## measurement

    def _multiply_rows_into(self, targets: np.ndarray, source: int) -> None:
        """row_t <- row_t * row_source for every t in ``targets``."""
        if len(targets) == 0:
            return
        sx, sz = self.x[source], self.z[source]
        exponent = (
            2 * self.r[targets].astype(np.int64)
            + 2 * int(self.r[source])
            + _product_phase_rows(self.x[targets], self.z[targets], sx, sz)
        ) % 4
        self.r[targets] = ((exponent >> 1) & 1).astype(np.uint8)
        self.x[targets] ^= sx
        self.z[targets] ^= sz

    def measure_pauli(
        self, observable: PauliString, forced: Optional[int] = None
    ) -> MeasurementRecord:
        """
        Measure a signed Hermitian Pauli observable.

        If some stabilizer anticommutes with it the outcome is uniformly random
        (taken from ``forced`` when given, else from the shot's stream) and the
        state is updated. Otherwise the outcome is fixed by the stabilizer group.
        The identity measures +1 deterministically.

        Raises:
            ValueError: If the observable is not Hermitian or not on n qubits, or a
                random outcome is needed and the tableau has no rng.
        """
        if not observable.is_hermitian:
            raise ValueError(f"observable {observable.label} must have phase +-1")
        if observable.is_identity:
            return MeasurementRecord(outcome=1, deterministic=True)
        n = self.n
        px, pz = self._pauli_words(observable)
        anti = self._anticommuting(px, pz)
        stab_anti = np.flatnonzero(anti[n:])

        if len(stab_anti):
            p = n + int(stab_anti[0])
            if forced is not None:
                outcome = forced
            elif self.rng is None:
                raise ValueError("random measurement outcome needs an rng")
            else:
                outcome = 1 if self.rng.integers(0, 2) == 0 else -1
            others = np.flatnonzero(anti)
            self._multiply_rows_into(others[others != p], p)
            self.x[p - n], self.z[p - n], self.r[p - n] = (
                self.x[p],
                self.z[p],
                self.r[p],
            )
            self.x[p], self.z[p] = px, pz
            self.r[p] = 1 if observable.sign * outcome == -1 else 0
            self._after_mutation()
            return MeasurementRecord(outcome=outcome, deterministic=False)

        # deterministic: observable is +-(product of stabilizers whose destabilizer
        # anticommutes with it)
        acc_x = np.zeros(self.n_words, dtype=np.uint64)
        acc_z = np.zeros(self.n_words, dtype=np.uint64)
        exponent = 0
        for i in np.flatnonzero(anti[:n]):
            row = n + int(i)
            exponent += 2 * int(self.r[row]) + int(
                _product_phase_rows(
                    acc_x[None, :], acc_z[None, :], self.x[row], self.z[row]
                )[0]
            )
            acc_x ^= self.x[row]
            acc_z ^= self.z[row]
        if not (np.array_equal(acc_x, px) and np.array_equal(acc_z, pz)):
            raise ValueError("observable is not in the stabilizer group; tableau is corrupt")
        group_sign = 1 if exponent % 4 == 0 else -1
        outcome = 1 if group_sign == observable.sign else -1
        return MeasurementRecord(outcome=outcome, deterministic=True)

    def measure_qubit(self, qubit: int) -> MeasurementRecord:
        """Computational-basis (Z) measurement of one qubit."""
        return self.measure_pauli(PauliString.single(self.n, qubit, "Z"))

    def pauli_reset(self, target: PauliString) -> None:
        """
        Leave the state in the +1 eigenspace of ``target``: measure it and, on -1,
        apply the fixed Pauli correction N_P.

        Raises:
            ValueError: If the target is the identity or not Hermitian.
        """
        if target.is_identity:
            raise ValueError("cannot reset the identity")
        record = self.measure_pauli(target)
        if record.outcome == -1:
            self.apply_pauli(reset_correction(target))

    def apply_term(
        self, term: Union[CliffordTerm, PauliResetTerm], qubits: Sequence[int]
    ) -> None:
        """Apply one stabilizer channel from a decomposition to ``qubits``."""
        if isinstance(term, CliffordTerm):
            if not term.is_identity:
                self.apply_action(term.action, qubits)
            return
        if term.pre is not None:
            self.apply_pauli(term.pre.embed(qubits, self.n))
        self.pauli_reset(term.target.embed(qubits, self.n))

    ## projection

    def projection_probability(
        self, generators: Sequence[PauliString], validate: bool = True
    ) -> float:
        """
        ``Tr(Pi rho)`` for the projector onto the joint +1 eigenspace of
        ``generators`` (the overlap with a pure target when n generators are given).

        Each generator is measured on a scratch copy with the +1 outcome forced: a
        random outcome contributes 1/2, a deterministic +1 contributes 1, and a
        deterministic -1 makes the result 0. The result is 0 or a power of 1/2.

        Raises:
            ValueError: If the generators do not commute or are dependent (checked
                unless ``validate`` is False, for pre-validated plans).
        """
        if validate:
            check_generators(generators, self.n)
        scratch = self.copy()
        scratch.debug = False
        probability = 1.0
        for g in generators:
            record = scratch.measure_pauli(g, forced=1)
            if record.deterministic:
                if record.outcome == -1:
                    return 0.0
            else:
                probability *= 0.5
        return probability


def new_zero_state(
    n: int, rng: Optional[np.random.Generator] = None, debug: bool = False
) -> Tableau:
    """|0...0>: stabilizers +Z_k, destabilizers +X_k."""
    return Tableau(n, rng=rng, debug=debug)
