import numpy as np
import pytest

from nearclifford.channels import gate_action, reset_term
from nearclifford.oracle import GATE_UNITARIES, DenseState, apply_unitary, measure
from nearclifford.pauli import PauliString
from nearclifford.tableau import Tableau, check_generators, new_zero_state

GATES = ["h", "s", "x", "y", "z", "cnot"]


def _labels(paulis):
    return [p.label for p in paulis]


def _random_circuit(rng, n, depth):
    names = GATES if n > 1 else GATES[:-1]
    circuit = []
    for _ in range(depth):
        name = names[rng.integers(len(names))]
        if name == "cnot":
            qubits = tuple(int(q) for q in rng.choice(n, size=2, replace=False))
        else:
            qubits = (int(rng.integers(n)),)
        circuit.append((name, qubits))
    return circuit


def test_zero_state():
    """|00> is stabilized by Z on each qubit."""
    tableau = new_zero_state(2)
    assert _labels(tableau.stabilizers()) == ["+ZI", "+IZ"]
    assert _labels(tableau.destabilizers()) == ["+XI", "+IX"]
    for q in range(2):
        record = tableau.measure_qubit(q)
        assert record.deterministic
        assert record.outcome == 1
        assert record.bit == 0


def test_hadamard_and_pauli():
    """H|0> is |+>; X|0> measures -1 in Z."""
    tableau = new_zero_state(1)
    tableau.apply_gate("h", (0,))
    assert tableau.measure_pauli(PauliString.from_label("+X")).outcome == 1
    assert tableau.measure_pauli(PauliString.from_label("-X")).outcome == -1

    tableau = new_zero_state(1)
    tableau.apply_pauli(PauliString.from_label("X"))
    record = tableau.measure_qubit(0)
    assert record.deterministic and record.outcome == -1 and record.bit == 1


def test_bell_state(bell_state):
    """H then CNOT prepares the Bell state."""
    tableau = new_zero_state(2)
    tableau.apply_gate("h", (0,))
    tableau.apply_gate("cnot", (0, 1))
    assert tableau.projection_probability(bell_state) == 1.0
    wrong_sign = (PauliString.from_label("+XX"), PauliString.from_label("-ZZ"))
    assert tableau.projection_probability(wrong_sign) == 0.0


def test_from_stabilizers(bell_state):
    """A tableau built from generators is stabilized by them."""
    tableau = Tableau.from_stabilizers(bell_state, debug=True)
    assert tableau.projection_probability(bell_state) == 1.0
    tableau.check_invariants()
    assert tableau.measure_pauli(PauliString.from_label("-YY")).outcome == 1


def test_invalid_generators():
    """Generators must commute, be independent and be signed."""
    with pytest.raises(ValueError, match="do not commute"):
        check_generators([PauliString.from_label("X"), PauliString.from_label("Z")], 1)
    with pytest.raises(ValueError, match="not independent"):
        Tableau.from_stabilizers(
            [PauliString.from_label("ZZ"), PauliString.from_label("-ZZ")]
        )
    with pytest.raises(ValueError, match="phase"):
        Tableau.from_stabilizers([PauliString.from_label("+iZ")])
    with pytest.raises(ValueError, match="need 2 generators"):
        Tableau.from_stabilizers([PauliString.from_label("ZZ")])


def test_random_measurement_needs_rng():
    """A random outcome with no generator is an error."""
    tableau = new_zero_state(1)
    tableau.apply_gate("h", (0,))
    with pytest.raises(ValueError, match="needs an rng"):
        tableau.measure_qubit(0)


def test_forced_outcome_collapses(plus_state):
    """A forced outcome is random-flagged and collapses the state."""
    tableau = Tableau.from_stabilizers(plus_state)
    record = tableau.measure_pauli(PauliString.from_label("Z"), forced=-1)
    assert not record.deterministic
    assert record.outcome == -1
    again = tableau.measure_qubit(0)
    assert again.deterministic and again.outcome == -1


def test_measurement_statistics(rng):
    """Z measurements of |+> are fair coin flips."""
    shots = 4000
    ones = 0
    for _ in range(shots):
        tableau = new_zero_state(1, rng=rng)
        tableau.apply_gate("h", (0,))
        ones += tableau.measure_qubit(0).bit
    # five standard deviations
    assert abs(ones / shots - 0.5) < 5 * 0.5 / np.sqrt(shots)


def test_pauli_reset(rng):
    """Reset leaves the +1 eigenstate whatever the input."""
    target = PauliString.from_label("+Z")
    for prepare in ([], [("x", (0,))], [("h", (0,))], [("h", (0,)), ("s", (0,))]):
        for _ in range(10):
            tableau = new_zero_state(1, rng=rng)
            for name, qubits in prepare:
                tableau.apply_gate(name, qubits)
            tableau.pauli_reset(target)
            record = tableau.measure_pauli(target)
            assert record.deterministic and record.outcome == 1
    with pytest.raises(ValueError, match="identity"):
        new_zero_state(1).pauli_reset(PauliString.from_label("I"))


def test_two_qubit_reset_term(rng):
    """A reset term on a subset of qubits targets the embedded Pauli."""
    tableau = new_zero_state(3, rng=rng)
    tableau.apply_gate("h", (2,))
    tableau.apply_term(reset_term("-XZ"), (2, 0))
    record = tableau.measure_pauli(PauliString.from_label("-ZIX"))
    assert record.deterministic and record.outcome == 1


def test_gate_arity_and_range():
    """Qubit lists are checked against the action and the register."""
    tableau = new_zero_state(2)
    with pytest.raises(ValueError, match="out of range"):
        tableau.apply_gate("h", (2,))
    with pytest.raises(ValueError, match="repeated"):
        tableau.apply_gate("cnot", (1, 1))
    with pytest.raises(ValueError):
        tableau.apply_action(gate_action("cnot"), (0,))


def test_matches_dense_simulation(rng):
    """Random Clifford circuits agree with dense state-vector evolution."""
    n = 3
    for _ in range(20):
        circuit = _random_circuit(rng, n, depth=25)
        tableau = new_zero_state(n, debug=True)
        dense = DenseState.zero(n)
        for name, qubits in circuit:
            tableau.apply_gate(name, qubits)
            dense = apply_unitary(dense, GATE_UNITARIES[name], qubits)
        stabilizers = tableau.stabilizers()
        assert dense.expectation(stabilizers) == pytest.approx(1.0, abs=1e-12)
        for generator in stabilizers:
            assert dense.outcome_probability(generator, 1) == pytest.approx(1.0, abs=1e-12)
        for label in ("+XYZ", "-ZZI", "+IXX"):
            observable = (PauliString.from_label(label),)
            assert tableau.projection_probability(observable) == pytest.approx(
                dense.expectation(observable), abs=1e-12
            )


def _random_pauli(rng, n):
    while True:
        letters = "".join(rng.choice(list("IXYZ"), size=n))
        if set(letters) != {"I"}:
            return PauliString.from_label(str(rng.choice(["+", "-"])) + letters)


def _random_program(rng, n, depth):
    """Gates with up to four Pauli measurements spliced in at random positions."""
    program = [("gate", op) for op in _random_circuit(rng, n, depth)]
    for _ in range(int(rng.integers(0, 5))):
        program.insert(int(rng.integers(len(program) + 1)), ("measure", _random_pauli(rng, n)))
    return program


def test_measurements_match_dense_oracle(rng):
    """
    500 random circuits on up to 4 qubits mixing gates and Pauli measurements:
    outcome probabilities and the post-measurement states agree with the dense
    oracle to 1e-12.
    """
    for _ in range(500):
        n = int(rng.integers(1, 5))
        tableau = new_zero_state(n)
        dense = DenseState.zero(n)
        for kind, op in _random_program(rng, n, depth=12):
            if kind == "gate":
                name, qubits = op
                tableau.apply_gate(name, qubits)
                dense = apply_unitary(dense, GATE_UNITARIES[name], qubits)
                continue
            p_plus = tableau.projection_probability((op,))
            assert p_plus in (0.0, 0.5, 1.0)
            assert abs(p_plus - dense.outcome_probability(op, 1)) < 1e-12
            record = tableau.measure_pauli(op, forced=int(rng.choice([1, -1])))
            assert record.deterministic == (p_plus != 0.5)
            expected = 0.5 if p_plus == 0.5 else 1.0
            assert abs(dense.outcome_probability(op, record.outcome) - expected) < 1e-12
            dense = measure(dense, op, record.outcome)
        tableau.check_invariants()
        stabilizers = tableau.stabilizers()
        assert abs(dense.expectation(stabilizers) - 1.0) < 1e-12
        observable = (_random_pauli(rng, n),)
        overlap = tableau.projection_probability(observable)
        assert abs(overlap - dense.expectation(observable)) < 1e-12


@pytest.mark.slow
def test_measurement_frequencies_match_dense_oracle(rng):
    """
    Sampled outcome frequencies of every measurement stay within 4 sigma of the
    dense marginals (non-selective evolution through the earlier measurements).
    """
    shots = 400
    for _ in range(40):
        n = int(rng.integers(1, 5))
        program = _random_program(rng, n, depth=10)
        measured = [op for kind, op in program if kind == "measure"]
        if not measured:
            continue
        dense = DenseState.zero(n)
        marginals = []
        for kind, op in program:
            if kind == "gate":
                dense = apply_unitary(dense, GATE_UNITARIES[op[0]], op[1])
            else:
                marginals.append(dense.outcome_probability(op, 1))
                dense = measure(dense, op)
        plus_counts = np.zeros(len(measured))
        for _ in range(shots):
            tableau = new_zero_state(n, rng=rng)
            outcomes = []
            for kind, op in program:
                if kind == "gate":
                    tableau.apply_gate(*op)
                else:
                    outcomes.append(tableau.measure_pauli(op).outcome)
            plus_counts += np.array(outcomes) == 1
        for count, p in zip(plus_counts, marginals):
            frequency = count / shots
            sigma = np.sqrt(p * (1 - p) / shots)
            assert abs(frequency - p) <= 4 * sigma + 1e-9


def test_projection_leaves_state_untouched(bell_state):
    """projection_probability works on a scratch copy."""
    tableau = new_zero_state(2)
    before = tableau.dump()
    assert tableau.projection_probability(bell_state) == 0.5
    assert tableau.dump() == before


def test_copy_is_independent():
    """Mutating a copy does not touch the original."""
    tableau = new_zero_state(2)
    other = tableau.copy()
    other.apply_gate("h", (0,))
    assert _labels(tableau.stabilizers()) == ["+ZI", "+IZ"]
    assert _labels(other.stabilizers())[0] == "+XI"


def test_wide_ghz_state(rng):
    """Rows wider than one machine word: a 70-qubit GHZ state."""
    n = 70
    tableau = new_zero_state(n, rng=rng, debug=True)
    tableau.apply_gate("h", (0,))
    for q in range(1, n):
        tableau.apply_gate("cnot", (q - 1, q))
    first = tableau.measure_qubit(0)
    assert not first.deterministic
    for q in range(1, n):
        record = tableau.measure_qubit(q)
        assert record.deterministic
        assert record.outcome == first.outcome


@pytest.mark.benchmark
@pytest.mark.parametrize("n", [64, 256])
def test_ghz_measurement_speed(benchmark, n):
    """Prepare and measure an n-qubit GHZ state."""

    def run():
        tableau = new_zero_state(n, rng=np.random.default_rng(n))
        tableau.apply_gate("h", (0,))
        for q in range(1, n):
            tableau.apply_gate("cnot", (q - 1, q))
        return [tableau.measure_qubit(q).bit for q in range(n)]

    bits = benchmark(run)
    assert len(set(bits)) == 1
