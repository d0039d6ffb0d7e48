import math

import numpy as np
import pytest

from nearclifford.channels import (
    PTM,
    amplitude_damping_infidelity,
    decomp_to_ptm,
    depolarizing_infidelity,
    kraus_amplitude_damping,
    kraus_depolarizing,
    make_amplitude_damping,
    make_t_gate,
    ptm_from_kraus,
    random_kraus,
    reset_term,
)
from nearclifford.circuits import parse
from nearclifford.oracle import (
    DenseState,
    apply_kraus,
    apply_ptm,
    dense_run,
    exact_circuit_expectation,
    exact_expectations,
    measure,
    pauli_eigenstates,
    pauli_reset,
    state_averaged_fidelity,
    term_action_on_state,
)
from nearclifford.pauli import PauliString
from nearclifford.rotation import exact_rotation_value, rotation_plan


def _label(text):
    return PauliString.from_label(text)


def test_zero_and_stabilizer_states(bell_state):
    """Projectors onto the defining generators have unit overlap."""
    zero = DenseState.zero(2)
    assert zero.expectation([_label("+ZI"), _label("+IZ")]) == pytest.approx(1.0)
    assert zero.expectation(bell_state) == pytest.approx(0.5)
    bell = DenseState.from_stabilizers(bell_state)
    assert bell.expectation(bell_state) == pytest.approx(1.0)
    assert bell.outcome_probability(_label("+ZI"), -1) == pytest.approx(0.5)


def test_size_limits():
    """The dense oracle stops at four qubits."""
    with pytest.raises(ValueError, match="dense oracle supports"):
        DenseState.zero(5)
    with pytest.raises(ValueError, match="need 2 generators"):
        DenseState.from_stabilizers([_label("+ZZ")])


def test_kraus_and_ptm_paths_agree(rng):
    """Kraus evolution and PTM evolution give the same state on a 3-qubit register."""
    st = DenseState.from_stabilizers([_label("+XXI"), _label("+ZZI"), _label("+IIY")])
    for qubits in ((2, 0), (1, 2)):
        kraus = random_kraus(2, 2, rng)
        by_kraus = apply_kraus(st, kraus, qubits)
        by_ptm = apply_ptm(st, ptm_from_kraus(kraus), qubits)
        np.testing.assert_allclose(by_kraus.rho, by_ptm.rho, atol=1e-12)


def test_decomposition_acts_like_channel():
    """A stabilizer decomposition's PTM matches the Kraus channel on a state."""
    st = DenseState.from_stabilizers([_label("-Y")])
    by_kraus = apply_kraus(st, kraus_amplitude_damping(0.4), (0,))
    by_decomposition = apply_ptm(st, decomp_to_ptm(make_amplitude_damping(0.4)), (0,))
    np.testing.assert_allclose(by_kraus.rho, by_decomposition.rho, atol=1e-12)


def test_reset_term_matches_dense_reset():
    """Applying a reset term through its PTM equals the projective reset."""
    st = DenseState.from_stabilizers([_label("+XI"), _label("+IY")])
    for label in ("+ZX", "-YI", "+IX"):
        via_term = term_action_on_state(st, reset_term(label), (0, 1))
        direct = pauli_reset(st, _label(label))
        np.testing.assert_allclose(via_term.rho, direct.rho, atol=1e-12)
        assert direct.outcome_probability(_label(label), 1) == pytest.approx(1.0)


def test_measurement():
    """Non-selective measurement dephases; post-selection renormalizes."""
    plus = DenseState.from_stabilizers([_label("+X")])
    dephased = measure(plus, _label("+Z"))
    np.testing.assert_allclose(dephased.rho, np.eye(2) / 2, atol=1e-12)
    selected = measure(plus, _label("+Z"), outcome=-1)
    assert selected.outcome_probability(_label("+Z"), -1) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="probability 0"):
        measure(DenseState.zero(1), _label("+Z"), outcome=-1)


def test_dense_run():
    """Circuits run non-selectively from |0...0>."""
    st = dense_run(parse("qubits 2\nh 0\ncnot 0 1\nmr 1 -> 0\n"))
    # measuring and resetting one half of a Bell pair leaves (|0><0| + |1><1|)/2 x |0><0|
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[2, 2] = 0.5
    np.testing.assert_allclose(st.rho, expected, atol=1e-12)


def test_exact_rotation_prefixes():
    """The PTM chain reproduces (1 + sin(k theta))/2 for every prefix."""
    theta = math.pi / 100
    plan = rotation_plan(steps=50, theta=theta)
    for k in (0, 1, 25, 50):
        (value,) = exact_expectations(plan, prefix=k)
        assert value == pytest.approx(exact_rotation_value(k, theta), abs=1e-12)


def test_exact_circuit_expectation_uses_t_gate():
    """The t gate in a circuit resolves to the T decomposition."""
    (value,) = exact_circuit_expectation(
        parse("qubits 1\nh 0\nt 0\n"), [(_label("+Y"),)]
    )
    assert value == pytest.approx((1 + math.sin(math.pi / 4)) / 2, abs=1e-12)
    assert decomp_to_ptm(make_t_gate()).is_unital


def test_pauli_eigenstates():
    """Six eigenstates, two per axis."""
    labels = [g[0].label for g in pauli_eigenstates()]
    assert sorted(labels) == ["+X", "+Y", "+Z", "-X", "-Y", "-Z"]


def test_state_averaged_fidelity():
    """The six-state average equals the average gate fidelity for one qubit."""
    for p in (0.0, 0.01, 0.2):
        assert state_averaged_fidelity(kraus_depolarizing(p)) == pytest.approx(
            1 - depolarizing_infidelity(p), abs=1e-12
        )
    for gamma in (0.001, 0.3):
        assert state_averaged_fidelity(kraus_amplitude_damping(gamma)) == pytest.approx(
            1 - amplitude_damping_infidelity(gamma), abs=1e-12
        )
    assert state_averaged_fidelity([np.eye(2)]) == pytest.approx(1.0)
    assert PTM.identity(1).is_unital
