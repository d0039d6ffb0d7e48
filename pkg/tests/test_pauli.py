import numpy as np
import pytest

from nearclifford.pauli import (
    PauliString,
    basis_matrices,
    comm_sign,
    multiply_all,
    pauli_basis,
    pauli_mul,
    symplectic_product,
)


def test_label_round_trip():
    """Labels parse to the right bits and render back unchanged."""
    p = PauliString.from_label("-XZIY")
    assert p.n == 4
    assert p.letters == "XZIY"
    assert p.label == "-XZIY"
    assert p.sign == -1
    assert p.support == [0, 1, 3]
    assert p.weight == 3

    assert PauliString.from_label("XX").label == "+XX"
    assert PauliString.from_label("+iZ").label == "+iZ"


def test_invalid_labels():
    """Malformed labels and out-of-range constructors raise ValueError."""
    with pytest.raises(ValueError, match="invalid Pauli label"):
        PauliString.from_label("XQ")
    with pytest.raises(ValueError, match="invalid Pauli label"):
        PauliString.from_label("")
    with pytest.raises(ValueError):
        PauliString.single(2, 2, "X")
    with pytest.raises(ValueError):
        PauliString(n=1, x=2, z=0)


def test_single_qubit_products():
    """XY = iZ, YZ = iX, ZX = iY and the reversed products carry -i."""
    x, y, z = (PauliString.from_label(c) for c in "XYZ")
    assert pauli_mul(x, y).label == "+iZ"
    assert pauli_mul(y, z).label == "+iX"
    assert pauli_mul(z, x).label == "+iY"
    assert pauli_mul(y, x).label == "-iZ"
    assert pauli_mul(x, z).label == "-iY"
    assert pauli_mul(x, x).label == "+I"


def test_product_matches_matrices():
    """pauli_mul agrees with dense matrix multiplication on random 3-qubit strings."""
    rng = np.random.default_rng(7)
    for _ in range(50):
        a = PauliString.from_basis_index(int(rng.integers(64)), 3).with_phase(
            int(rng.integers(4))
        )
        b = PauliString.from_basis_index(int(rng.integers(64)), 3).with_phase(
            int(rng.integers(4))
        )
        np.testing.assert_allclose(
            pauli_mul(a, b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12
        )


def test_commutation():
    """XX and ZZ commute; XI and ZI anticommute."""
    xx, zz = PauliString.from_label("XX"), PauliString.from_label("ZZ")
    xi, zi = PauliString.from_label("XI"), PauliString.from_label("ZI")
    assert comm_sign(xx, zz) == 1
    assert symplectic_product(xx, zz) == 0
    assert comm_sign(xi, zi) == -1
    assert symplectic_product(xi, zi) == 1


def test_dimension_mismatch():
    """Operations on strings of different length raise ValueError."""
    with pytest.raises(ValueError, match="dimension mismatch"):
        pauli_mul(PauliString.from_label("X"), PauliString.from_label("XX"))
    with pytest.raises(ValueError, match="dimension mismatch"):
        comm_sign(PauliString.from_label("Z"), PauliString.from_label("ZZ"))


def test_basis_order():
    """Basis index packs I, X, Y, Z digits with qubit 0 least significant."""
    basis = pauli_basis(1)
    assert [p.label for p in basis] == ["+I", "+X", "+Y", "+Z"]
    two = pauli_basis(2)
    assert len(two) == 16
    assert two[1].label == "+XI"
    assert two[4].label == "+IX"
    for i, p in enumerate(two):
        assert p.basis_index == i
    with pytest.raises(ValueError):
        pauli_basis(5)


def test_basis_matrices_orthogonal():
    """Tr(P_i P_j) = 2**n delta_ij."""
    mats = basis_matrices(2)
    gram = np.einsum("iab,jba->ij", mats, mats)
    np.testing.assert_allclose(gram, 4 * np.eye(16), atol=1e-12)


def test_embed_and_restrict():
    """Embedding places letters on chosen qubits; restricting reads them back."""
    p = PauliString.from_label("-XZ")
    embedded = p.embed([3, 1], 4)
    assert embedded.label == "-IZIX"
    assert embedded.restrict([3, 1]) == p
    with pytest.raises(ValueError):
        p.embed([0], 4)


def test_to_matrix_qubit_order():
    """Qubit 0 is the leftmost tensor factor."""
    xi = PauliString.from_label("XI").to_matrix()
    expected = np.kron(np.array([[0, 1], [1, 0]]), np.eye(2))
    np.testing.assert_allclose(xi, expected)


def test_multiply_all_and_helpers():
    """Products of many strings, negation and sign stripping."""
    paulis = [PauliString.from_label(s) for s in ("XI", "IX", "ZZ")]
    assert multiply_all(paulis, 2).label == "-YY"
    assert PauliString.from_label("+Z").negate().label == "-Z"
    assert PauliString.from_label("-iY").unsigned().label == "+Y"
    assert PauliString.identity(3).is_identity
    with pytest.raises(ValueError, match="not Hermitian"):
        PauliString.from_label("+iX").sign
