"""
Minimal 1-norm stabilizer decompositions.

The dictionary holds every Clifford channel and every Pauli reset on n = 1 or 2
qubits. ``decompose_min_norm`` solves

    min sum_i |q_i|  subject to  chi = sum_i q_i S_i

as a standard-form LP on the split q = q+ - q- with scipy's HiGHS dual simplex,
which returns a vertex of the feasible polytope. ``basis_channel_decomposition``
is the constructive proof that the dictionary spans every trace-preserving
channel, and serves as an independent check of the LP.
"""

import logging
import time
from enum import Enum
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from humanize.time import naturaldelta
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.optimize import linprog

from nearclifford.channels import (
    MAX_CHANNEL_QUBITS,
    PTM,
    TOLERANCE,
    CliffordAction,
    CliffordTerm,
    PauliResetTerm,
    StabilizerDecomposition,
    _term_matrix,
    decomp_to_ptm,
    decomposition,
    pauli_conjugation,
)
from nearclifford.pauli import PauliString, comm_sign, symplectic_bits

logger = logging.getLogger(__name__)

# coefficients below this magnitude are dropped from LP solutions
PRUNE_TOLERANCE = 1e-12

# smallest tolerance HiGHS accepts
_HIGHS_MIN_TOLERANCE = 1e-10


class InfeasibleDecompositionError(ValueError):
    """The channel is not a combination of dictionary terms (non-TP or corrupt input)."""


class LPStatus(str, Enum):
    # infeasible problems raise InfeasibleDecompositionError instead
    OPTIMAL = "optimal"


class ChannelDictionary(BaseModel):
    """All stabilizer channels on n qubits, with their flattened PTMs as columns."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(..., ge=1, le=MAX_CHANNEL_QUBITS)
    terms: Tuple[object, ...] = Field(..., description="Clifford terms, then resets")
    ptm_columns: sparse.csc_array = Field(
        ..., description="16**n x len(terms) matrix of row-major flattened PTMs"
    )

    @property
    def clifford_count(self) -> int:
        return sum(1 for t in self.terms if isinstance(t, CliffordTerm))

    @property
    def reset_count(self) -> int:
        return sum(1 for t in self.terms if isinstance(t, PauliResetTerm))

    def __len__(self) -> int:
        return len(self.terms)


class LPSolution(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    coefficients: np.ndarray = Field(..., description="q over the dictionary")
    objective: float = Field(..., description="Achieved sum of |q_i|")
    status: LPStatus


## enumeration


def _check_supported(n: int) -> None:
    if n not in (1, 2):
        raise ValueError(f"stabilizer channel enumeration supports n = 1 or 2, got {n}")


def _symplectic_frames(n: int) -> List[List[Tuple[int, int]]]:
    """
    Unsigned images (X_0, Z_0, X_1, Z_1, ...) of every symplectic map, as (x, z)
    bitmask pairs, in lexicographic order of basis indices.
    """
    candidates = [
        (p.x, p.z) for p in (PauliString.from_basis_index(i, n) for i in range(1, 4**n))
    ]
    frames = []

    def extend(assigned: List[Tuple[int, int]]) -> None:
        if len(assigned) == 2 * n:
            frames.append(list(assigned))
            return
        slot = len(assigned)
        qubit, is_z = divmod(slot, 2)
        for cand in candidates:
            ok = True
            for other_slot, other in enumerate(assigned):
                other_qubit, other_is_z = divmod(other_slot, 2)
                expected = 1 if (is_z and not other_is_z and other_qubit == qubit) else 0
                if symplectic_bits(cand[0], cand[1], other[0], other[1]) != expected:
                    ok = False
                    break
            if ok:
                assigned.append(cand)
                extend(assigned)
                assigned.pop()

    extend([])
    return frames


@lru_cache(maxsize=None)
def _cliffords(n: int) -> Tuple[CliffordTerm, ...]:
    terms = []
    for frame in _symplectic_frames(n):
        for signs in range(4**n):
            images = [
                PauliString._make(n, x, z, 2 * ((signs >> slot) & 1))
                for slot, (x, z) in enumerate(frame)
            ]
            action = CliffordAction.model_construct(
                n=n, x_images=tuple(images[0::2]), z_images=tuple(images[1::2])
            )
            terms.append(CliffordTerm.model_construct(action=action))
    return tuple(terms)


def enumerate_cliffords(n: int) -> List[CliffordTerm]:
    """
    Every Clifford channel on n qubits (global phase quotiented out).

    Symplectic frames are built by choosing generator images one at a time, keeping
    only candidates with the right commutation relations to the images already
    chosen; each frame then takes all 2**(2n) sign choices.

    Returns:
        24 terms for n=1, 11520 for n=2

    Raises:
        ValueError: If n is not 1 or 2.
    """
    _check_supported(n)
    return list(_cliffords(n))


def enumerate_pauli_resets(n: int) -> List[PauliResetTerm]:
    """One reset per signed non-identity Pauli: 6 for n=1, 30 for n=2."""
    _check_supported(n)
    resets = []
    for index in range(1, 4**n):
        target = PauliString.from_basis_index(index, n)
        resets.append(PauliResetTerm(target=target))
        resets.append(PauliResetTerm(target=target.negate()))
    return resets


@lru_cache(maxsize=None)
def build_dictionary(n: int) -> ChannelDictionary:
    """The full n-qubit dictionary, built once per n."""
    _check_supported(n)
    start = time.time()
    terms = tuple(enumerate_cliffords(n)) + tuple(enumerate_pauli_resets(n))
    rows, cols, values = [], [], []
    for col, term in enumerate(terms):
        flat = _term_matrix(term).ravel()
        nonzero = np.flatnonzero(flat)
        rows.append(nonzero)
        cols.append(np.full(len(nonzero), col))
        values.append(flat[nonzero])
    columns = sparse.csc_array(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
        shape=(16**n, len(terms)),
    )
    logger.info(
        f"Built {n}-qubit stabilizer channel dictionary with {len(terms)} terms "
        f"in {naturaldelta(time.time() - start)}"
    )
    return ChannelDictionary(n=n, terms=terms, ptm_columns=columns)


## LP


def solve_min_norm(
    channel: PTM, dictionary: ChannelDictionary, feas_tol: float = TOLERANCE
) -> Tuple[LPSolution, StabilizerDecomposition]:
    """
    Solve the minimal 1-norm LP and return both the raw solution and the pruned
    decomposition.

    Raises:
        ValueError: On a qubit-count mismatch.
        InfeasibleDecompositionError: If the channel is not trace preserving or the
            LP has no solution.
    """
    if channel.n != dictionary.n:
        raise ValueError(
            f"dimension mismatch: {channel.n}-qubit channel, "
            f"{dictionary.n}-qubit dictionary"
        )
    if not np.allclose(
        channel.matrix[0], np.eye(4**channel.n)[0], atol=feas_tol, rtol=0
    ):
        raise InfeasibleDecompositionError(
            "channel is not trace preserving; no stabilizer decomposition exists"
        )

    columns = dictionary.ptm_columns
    size = columns.shape[1]
    a_eq = sparse.hstack([columns, -columns], format="csc")
    b_eq = channel.matrix.ravel()
    tolerance = max(feas_tol, _HIGHS_MIN_TOLERANCE)
    result = linprog(
        np.ones(2 * size),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": tolerance,
            "dual_feasibility_tolerance": tolerance,
        },
    )
    if result.status == 2:
        raise InfeasibleDecompositionError(f"LP infeasible: {result.message}")
    if result.status != 0:
        raise ValueError(f"LP solve failed: {result.message}")

    q = result.x[:size] - result.x[size:]
    q[np.abs(q) < PRUNE_TOLERANCE] = 0.0
    solution = LPSolution(
        coefficients=q, objective=float(np.abs(q).sum()), status=LPStatus.OPTIMAL
    )
    kept = [(float(q[i]), dictionary.terms[i]) for i in np.flatnonzero(q)]
    decomp = StabilizerDecomposition(n=channel.n, terms=tuple(kept))

    residual = verify_decomposition(channel, decomp)
    if residual > feas_tol:
        logger.warning(
            f"LP reconstruction residual {residual:.3e} exceeds tolerance {feas_tol:.1e}"
        )
    logger.debug(
        f"LP solved: objective {solution.objective:.12f} with {len(kept)} terms, "
        f"residual {residual:.3e}"
    )
    return solution, decomp


def decompose_min_norm(
    channel: PTM, dictionary: ChannelDictionary, feas_tol: float = TOLERANCE
) -> StabilizerDecomposition:
    """
    Minimal 1-norm exact decomposition of ``channel`` over ``dictionary``.

    Degenerate optima may come back as any optimal vertex; only the objective is
    canonical.
    """
    _, decomp = solve_min_norm(channel, dictionary, feas_tol)
    return decomp


def verify_decomposition(channel: PTM, d: StabilizerDecomposition) -> float:
    """Largest elementwise deviation between ``channel`` and the decomposition's PTM."""
    if channel.n != d.n:
        raise ValueError(f"dimension mismatch: {channel.n} vs {d.n} qubits")
    return float(np.max(np.abs(channel.matrix - decomp_to_ptm(d).matrix)))


## constructive decomposition of basis channels


def first_clifford_mapping(p: PauliString, p_prime: PauliString) -> CliffordAction:
    """First Clifford in enumeration order whose action sends P to +P'."""
    target = p_prime.unsigned()
    source = p.unsigned()
    for term in _cliffords(p.n):
        if term.action.conjugate(source) == target:
            return term.action
    raise ValueError(f"no Clifford maps {p.label} to {p_prime.label}")


def basis_channel_decomposition(
    p: PauliString, p_prime: PauliString
) -> StabilizerDecomposition:
    """
    Decompose the basis map that sends P to P' and every other Pauli to zero.

    For P != I this is ``4**-n sum_Q <P,Q> C o Q`` with C any Clifford mapping P to
    P'. For P = P' = I it is the full Pauli twirl. For P = I, P' != I it is
    ``4**-n sum_Q (R_P' - 1) o Q``, where each ``R_P' o Q`` is a reset with Q as its
    pre-applied Pauli.

    Raises:
        ValueError: For P' = I with P != I, which no trace-preserving channel
            contains, or on a qubit-count mismatch.
    """
    if p.n != p_prime.n:
        raise ValueError(f"dimension mismatch: {p.n} vs {p_prime.n} qubits")
    n = p.n
    _check_supported(n)
    p, p_prime = p.unsigned(), p_prime.unsigned()
    if p_prime.is_identity and not p.is_identity:
        raise ValueError(
            f"basis channel {p.label} -> I is not a component of any "
            "trace-preserving channel"
        )
    weight = 1.0 / 4**n
    paulis = [PauliString.from_basis_index(i, n) for i in range(4**n)]

    if not p.is_identity:
        clifford = first_clifford_mapping(p, p_prime)
        terms = [
            (
                weight * comm_sign(p, q),
                CliffordTerm(action=clifford.compose(pauli_conjugation(q))),
            )
            for q in paulis
        ]
    elif p_prime.is_identity:
        terms = [(weight, CliffordTerm(action=pauli_conjugation(q))) for q in paulis]
    else:
        terms = []
        for q in paulis:
            terms.append(
                (weight, PauliResetTerm(target=p_prime, pre=None if q.is_identity else q))
            )
            terms.append((-weight, CliffordTerm(action=pauli_conjugation(q))))
    return decomposition(terms)
