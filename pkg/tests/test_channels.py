import json
import math

import numpy as np
import pytest

from nearclifford.channels import (
    PTM,
    CliffordAction,
    amplitude_damping_infidelity,
    average_gate_fidelity,
    channel_from_name,
    decomp_to_ptm,
    decomposition,
    decomposition_from_json_dict,
    decomposition_to_json_dict,
    depolarizing_infidelity,
    gate_action,
    gate_term,
    infidelity,
    kraus_amplitude_damping,
    kraus_depolarizing,
    kraus_from_name,
    kraus_rotation_z,
    kraus_rotation_z_positive_approx,
    load_kraus_file,
    make_amplitude_damping,
    make_depolarizing,
    make_identity,
    make_pauli_channel,
    make_rotation_z,
    make_rotation_z_positive_approx,
    make_t_gate,
    negativity,
    one_norm,
    ptm_from_kraus,
    random_kraus,
    reset_correction,
    reset_term,
    t_gate_kraus,
    tensor_decompositions,
    term_to_ptm,
)
from nearclifford.pauli import PauliString


def test_identity_kraus_ptm():
    """The identity channel has the identity PTM."""
    ptm = ptm_from_kraus([np.eye(2)])
    np.testing.assert_allclose(ptm.matrix, np.eye(4), atol=1e-12)
    assert ptm.is_trace_preserving
    assert ptm.is_unital


def test_ptm_validation():
    """PTMs must be square 4**n matrices with real entries."""
    with pytest.raises(ValueError, match="must be 4x4"):
        PTM(n=1, matrix=np.eye(3))
    with pytest.raises(ValueError, match="real"):
        PTM(n=1, matrix=1j * np.eye(4))
    with pytest.raises(ValueError, match="at least one Kraus"):
        ptm_from_kraus([])
    with pytest.raises(ValueError, match="power of two"):
        ptm_from_kraus([np.eye(3)])


def test_closed_forms_match_kraus():
    """Every closed-form decomposition reproduces its channel's PTM."""
    cases = [
        (make_t_gate(), t_gate_kraus()),
        (make_rotation_z(math.pi / 16), kraus_rotation_z(math.pi / 16)),
        (make_rotation_z(math.pi / 100), kraus_rotation_z(math.pi / 100)),
        (
            make_rotation_z_positive_approx(math.pi / 8),
            kraus_rotation_z_positive_approx(math.pi / 8),
        ),
        (make_amplitude_damping(0.1), kraus_amplitude_damping(0.1)),
        (make_amplitude_damping(1.0), kraus_amplitude_damping(1.0)),
        (make_depolarizing(0.05), kraus_depolarizing(0.05)),
    ]
    for d, kraus in cases:
        np.testing.assert_allclose(
            decomp_to_ptm(d).matrix, ptm_from_kraus(kraus).matrix, atol=1e-12
        )


def test_t_gate_one_norm():
    """The T gate decomposition has 1-norm sqrt(2) and negativity (sqrt(2) - 1)/2."""
    d = make_t_gate()
    assert one_norm(d) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert negativity(d) == pytest.approx((math.sqrt(2) - 1) / 2, abs=1e-12)
    assert sum(q for q, _ in d.terms) == pytest.approx(1.0, abs=1e-12)


def test_amplitude_damping_one_norm():
    """1-norm is 1 + 2 * |negative coefficient|."""
    for gamma in (0.01, 0.1, 0.5):
        d = make_amplitude_damping(gamma)
        negative = ((1 - gamma) - math.sqrt(1 - gamma)) / 2
        assert one_norm(d) == pytest.approx(1 + 2 * abs(negative), abs=1e-12)


def test_zero_strength_channels_are_single_terms():
    """Zero-strength noise drops to the bare identity term."""
    for d in (make_depolarizing(0.0), make_amplitude_damping(0.0)):
        assert len(d.terms) == 1
        np.testing.assert_array_equal(decomp_to_ptm(d).matrix, np.eye(4))


def test_constructor_domains():
    """Out-of-domain parameters raise ValueError."""
    with pytest.raises(ValueError, match="gamma"):
        make_amplitude_damping(1.5)
    with pytest.raises(ValueError, match="p must"):
        make_depolarizing(0.8)
    with pytest.raises(ValueError, match="theta"):
        make_rotation_z_positive_approx(2.0)
    with pytest.raises(ValueError, match="nonnegative"):
        make_pauli_channel({"X": -0.1})


def test_gate_actions():
    """Named gates conjugate Paulis as expected."""
    x, y, z = (PauliString.from_label(c) for c in "XYZ")
    h, s = gate_action("h"), gate_action("s")
    assert h.conjugate(x) == z
    assert h.conjugate(y) == y.negate()
    assert s.conjugate(x) == y
    assert s.conjugate(y) == x.negate()
    cnot = gate_action("cnot")
    assert cnot.conjugate(PauliString.from_label("XI")).label == "+XX"
    assert cnot.conjugate(PauliString.from_label("IZ")).label == "+ZZ"
    with pytest.raises(ValueError, match="Unknown Clifford gate"):
        gate_action("toffoli")


def test_compose_and_identity():
    """S after S is Z; the identity action is recognised."""
    ss = gate_action("s").compose(gate_action("s"))
    z_gate = gate_action("z")
    for label in "XYZ":
        p = PauliString.from_label(label)
        assert ss.conjugate(p) == z_gate.conjugate(p)
    assert gate_action("i").is_identity
    assert not gate_action("h").is_identity


def test_invalid_clifford_images():
    """Images that break the commutation relations are rejected."""
    with pytest.raises(ValueError, match="commutation"):
        CliffordAction.from_images({"X0": "+X", "Z0": "+X"})
    with pytest.raises(ValueError, match="Hermitian"):
        CliffordAction.from_images({"X0": "+iX", "Z0": "+Z"})


def test_reset_correction():
    """The correction sits on the lowest support qubit and anticommutes there."""
    assert reset_correction(PauliString.from_label("+Z")).label == "+X"
    assert reset_correction(PauliString.from_label("-X")).label == "+Z"
    assert reset_correction(PauliString.from_label("IYZ")).label == "+IZI"
    with pytest.raises(ValueError):
        reset_correction(PauliString.from_label("II"))


def test_reset_ptm():
    """Resetting to |0> sends every input to |0>."""
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 0] = 1.0
    np.testing.assert_allclose(term_to_ptm(reset_term("+Z")).matrix, expected)
    # resetting to |1> flips the Z row
    expected[3, 0] = -1.0
    np.testing.assert_allclose(term_to_ptm(reset_term("-Z")).matrix, expected)


def test_decomposition_requires_terms():
    """An empty decomposition is an error; zero coefficients are dropped."""
    with pytest.raises(ValueError, match="at least one term"):
        decomposition([])
    d = decomposition([(1.0, gate_term("i")), (0.0, gate_term("z"))])
    assert len(d.terms) == 1


def test_tensor_product_ptm():
    """Tensor products multiply 1-norms and their PTMs are Kronecker products."""
    a = make_amplitude_damping(0.2)
    b = make_depolarizing(0.1)
    t = tensor_decompositions(a, b)
    assert t.n == 2
    assert one_norm(t) == pytest.approx(one_norm(a) * one_norm(b), abs=1e-12)
    # qubit 0 is the least significant basis digit
    expected = np.kron(decomp_to_ptm(b).matrix, decomp_to_ptm(a).matrix)
    np.testing.assert_allclose(decomp_to_ptm(t).matrix, expected, atol=1e-12)

    reversed_order = tensor_decompositions(b, a)
    expected = np.kron(decomp_to_ptm(a).matrix, decomp_to_ptm(b).matrix)
    np.testing.assert_allclose(decomp_to_ptm(reversed_order).matrix, expected, atol=1e-12)


def test_tensor_product_errors():
    """Unsupported pairings raise ValueError."""
    with pytest.raises(ValueError, match="two resets"):
        tensor_decompositions(make_amplitude_damping(0.1), make_amplitude_damping(0.1))
    with pytest.raises(ValueError, match="Pauli-frame"):
        tensor_decompositions(make_amplitude_damping(0.1), make_t_gate())
    with pytest.raises(ValueError, match="3 qubits"):
        tensor_decompositions(make_identity(2), make_identity(1))


def test_fidelity_helpers():
    """Analytic infidelities agree with the PTM formula."""
    assert average_gate_fidelity(PTM.identity(1)) == pytest.approx(1.0)
    for p in (1e-4, 1e-2, 0.3):
        assert infidelity(decomp_to_ptm(make_depolarizing(p))) == pytest.approx(
            depolarizing_infidelity(p), abs=1e-12
        )
    for gamma in (9e-4, 0.1, 0.7):
        assert infidelity(decomp_to_ptm(make_amplitude_damping(gamma))) == pytest.approx(
            amplitude_damping_infidelity(gamma), abs=1e-12
        )


def test_json_round_trip():
    """A decomposition survives JSON serialization exactly."""
    d = tensor_decompositions(make_amplitude_damping(0.3), make_depolarizing(0.2))
    text = json.dumps(decomposition_to_json_dict(d))
    restored = decomposition_from_json_dict(json.loads(text))
    np.testing.assert_array_equal(decomp_to_ptm(restored).matrix, decomp_to_ptm(d).matrix)
    assert any("pre" in entry for entry in json.loads(text)["terms"])


def test_load_kraus_file(tmp_path):
    """Both the re/im object form and the pair form are accepted."""
    gamma = 0.25
    kraus = kraus_amplitude_damping(gamma)
    as_objects = [{"re": k.real.tolist(), "im": k.imag.tolist()} for k in kraus]
    as_pairs = [[k.real.tolist(), k.imag.tolist()] for k in kraus]
    for name, content in (("objects.json", as_objects), ("pairs.json", as_pairs)):
        path = tmp_path / name
        path.write_text(json.dumps(content))
        loaded = load_kraus_file(path)
        np.testing.assert_allclose(
            ptm_from_kraus(loaded).matrix, ptm_from_kraus(kraus).matrix, atol=1e-12
        )

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"re": [[1]]}))
    with pytest.raises(ValueError, match="non-empty JSON list"):
        load_kraus_file(bad)


def test_random_kraus_is_trace_preserving(rng):
    """Random Kraus sets satisfy sum K^dagger K = I."""
    for n in (1, 2):
        kraus = random_kraus(n, 3, rng)
        completeness = sum(k.conj().T @ k for k in kraus)
        np.testing.assert_allclose(completeness, np.eye(2**n), atol=1e-12)
        assert ptm_from_kraus(kraus).is_trace_preserving


def test_channel_from_name():
    """Named lookup dispatches to constructors and validates parameters."""
    d = channel_from_name("depolarizing", [0.01])
    np.testing.assert_allclose(
        decomp_to_ptm(d).matrix,
        ptm_from_kraus(kraus_from_name("depolarizing", [0.01])).matrix,
        atol=1e-12,
    )
    assert one_norm(channel_from_name("t")) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError, match="unknown channel"):
        channel_from_name("bitflip", [0.1])
    with pytest.raises(ValueError, match="takes 1 parameter"):
        channel_from_name("depolarizing", [])
    with pytest.raises(ValueError):
        channel_from_name("amplitude_damping", [2.0])


def test_pauli_channel():
    """A stochastic Pauli channel has 1-norm 1 and a diagonal PTM."""
    d = make_pauli_channel({"X": 0.1, "Z": 0.2})
    assert one_norm(d) == pytest.approx(1.0)
    ptm = decomp_to_ptm(d).matrix
    np.testing.assert_allclose(np.diag(ptm), [1.0, 0.6, 0.4, 0.8], atol=1e-12)
    np.testing.assert_allclose(ptm - np.diag(np.diag(ptm)), 0.0, atol=1e-12)
