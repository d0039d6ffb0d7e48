"""
Circuit representation, text format, noise insertion, compilation to simulation
plans and dynamic execution with classical feedback.

Text format, one instruction per line (``#`` or ``//`` start a comment):

    qubits 3
    h 0
    cnot 0 1
    noise depolarizing(0.001) 0 1
    measure_pauli +ZZI -> 0
    reset_pauli -X
    mr 2 -> 1
    barrier

Consecutive instructions on disjoint qubits fuse greedily into one timestep;
``barrier`` closes the current timestep.
"""

import logging
import re
import time
from pathlib import Path
from typing import (
    Annotated,
    Callable,
    Dict,
    Iterable,
    List,
    Literal,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from humanize.time import naturaldelta
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nearclifford.channels import (
    CHANNEL_CONSTRUCTORS,
    CLIFFORD_GATES,
    PauliResetTerm,
    StabilizerDecomposition,
    decomposition,
    gate_arity,
    gate_term,
)
from nearclifford.pauli import PauliString
from nearclifford.sampler import (
    PlannedChannel,
    PreparedChannel,
    SimulationPlan,
    run_blocks,
    shot_rng,
    zero_state_generators,
)
from nearclifford.schemas import DEFAULT_SEED, EstimatorResult, NoiseModel
from nearclifford.tableau import Tableau, check_generators, new_zero_state

logger = logging.getLogger(__name__)

# named gates: the Clifford set plus t, which resolves through the registry
GATE_NAMES = CLIFFORD_GATES + ("t",)

# placeholder noise location, bound to a concrete channel by bind_error_markers
ERROR_MARKER = "E"


class CircuitSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


## instructions


class Gate(BaseModel):
    model_config = ConfigDict(frozen=True)

    op: Literal["gate"] = "gate"
    name: str
    qubits: Tuple[int, ...]

    @model_validator(mode="after")
    def validate_fields(self):
        if self.name not in GATE_NAMES:
            raise ValueError(f"unknown gate {self.name!r}")
        arity = 1 if self.name == "t" else gate_arity(self.name)
        if len(self.qubits) != arity:
            raise ValueError(f"gate {self.name} takes {arity} qubit(s), got {self.qubits}")
        return self


class Noise(BaseModel):
    model_config = ConfigDict(frozen=True)

    op: Literal["noise"] = "noise"
    channel: str
    params: Tuple[float, ...] = ()
    qubits: Tuple[int, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_fields(self):
        if (self.channel in CHANNEL_CONSTRUCTORS or self.channel == ERROR_MARKER) and len(
            self.qubits
        ) != 1:
            raise ValueError(
                f"single-qubit channel {self.channel!r} needs one noise instruction per qubit"
            )
        return self


class MeasurePauli(BaseModel):
    model_config = ConfigDict(frozen=True)

    op: Literal["measure_pauli"] = "measure_pauli"
    observable: PauliString
    bit: int = Field(..., ge=0)


class ResetPauli(BaseModel):
    model_config = ConfigDict(frozen=True)

    op: Literal["reset_pauli"] = "reset_pauli"
    target: PauliString

    @model_validator(mode="after")
    def validate_fields(self):
        if self.target.is_identity or not self.target.is_hermitian:
            raise ValueError(f"invalid reset target {self.target.label}")
        return self


class MeasureReset(BaseModel):
    """Z measurement of one qubit into a classical bit, then reset to |0>."""

    model_config = ConfigDict(frozen=True)

    op: Literal["mr"] = "mr"
    qubit: int = Field(..., ge=0)
    bit: int = Field(..., ge=0)


class Barrier(BaseModel):
    model_config = ConfigDict(frozen=True)

    op: Literal["barrier"] = "barrier"


Instruction = Annotated[
    Union[Gate, Noise, MeasurePauli, ResetPauli, MeasureReset, Barrier],
    Field(discriminator="op"),
]
_INSTRUCTION_TYPES = (Gate, Noise, MeasurePauli, ResetPauli, MeasureReset, Barrier)


def instruction_qubits(instr) -> Tuple[int, ...]:
    if isinstance(instr, (Gate, Noise)):
        return instr.qubits
    if isinstance(instr, MeasurePauli):
        return tuple(instr.observable.support)
    if isinstance(instr, ResetPauli):
        return tuple(instr.target.support)
    if isinstance(instr, MeasureReset):
        return (instr.qubit,)
    return ()


def _is_measurement(instr) -> bool:
    return isinstance(instr, (MeasurePauli, MeasureReset))


## circuits


class Circuit(BaseModel):
    """An n-qubit circuit as an ordered list of timesteps."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    steps: Tuple[Tuple[Instruction, ...], ...] = ()

    @model_validator(mode="after")
    def validate_fields(self):
        bits = set()
        for index, step in enumerate(self.steps):
            used = set()
            for instr in step:
                if isinstance(instr, Barrier):
                    raise ValueError("barriers separate timesteps and are not stored")
                for pauli in _paulis_of(instr):
                    if pauli.n != self.n:
                        raise ValueError(
                            f"Pauli {pauli.label} has length {pauli.n}, circuit has "
                            f"{self.n} qubits"
                        )
                qubits = instruction_qubits(instr)
                for q in qubits:
                    if not 0 <= q < self.n:
                        raise ValueError(f"qubit {q} out of range for {self.n} qubits")
                if used & set(qubits):
                    raise ValueError(f"timestep {index} uses a qubit twice")
                used |= set(qubits)
                if _is_measurement(instr):
                    if instr.bit in bits:
                        raise ValueError(f"classical bit {instr.bit} written twice")
                    bits.add(instr.bit)
        return self

    @classmethod
    def from_instructions(cls, n: int, instructions: Iterable) -> "Circuit":
        """Fuse instructions greedily: each joins the last timestep unless it shares a qubit."""
        steps, current, used = [], [], set()
        for instr in instructions:
            if isinstance(instr, Barrier):
                if current:
                    steps.append(tuple(current))
                current, used = [], set()
                continue
            qubits = set(instruction_qubits(instr))
            if used & qubits:
                steps.append(tuple(current))
                current, used = [], set()
            current.append(instr)
            used |= qubits
        if current:
            steps.append(tuple(current))
        return cls(n=n, steps=tuple(steps))

    @property
    def instructions(self) -> List:
        return [instr for step in self.steps for instr in step]

    @property
    def has_measurements(self) -> bool:
        return any(_is_measurement(instr) for instr in self.instructions)

    @property
    def classical_bits(self) -> List[int]:
        return sorted(i.bit for i in self.instructions if _is_measurement(i))

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise ValueError(f"cannot join {self.n}- and {other.n}-qubit circuits")
        return Circuit(n=self.n, steps=self.steps + other.steps)


def _paulis_of(instr) -> List[PauliString]:
    if isinstance(instr, MeasurePauli):
        return [instr.observable]
    if isinstance(instr, ResetPauli):
        return [instr.target]
    return []


## parsing


_TOKEN_RE = re.compile(
    r"->|[A-Za-z_][A-Za-z0-9_]*|[-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?|\S"
)
_PAULI_RE = re.compile(r"^[IXYZ]+$")
_COMMENT_RE = re.compile(r"(#|//).*$")


class _LineTokens:
    """Tokens of one line with 1-based columns, consumed left to right."""

    def __init__(self, text: str, lineno: int):
        self.tokens = [(m.group(), m.start() + 1) for m in _TOKEN_RE.finditer(text)]
        self.lineno = lineno
        self.pos = 0
        self.end_column = len(text.rstrip()) + 1

    def fail(self, message: str, column: Optional[int] = None):
        if column is None:
            column = self.tokens[self.pos][1] if self.pos < len(self.tokens) else self.end_column
        raise CircuitSyntaxError(message, self.lineno, column)

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self, expected: str) -> Tuple[str, int]:
        if self.pos >= len(self.tokens):
            self.fail(f"expected {expected}")
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, literal: str) -> None:
        token, column = self.next(f"'{literal}'")
        if token != literal:
            self.fail(f"expected '{literal}', got '{token}'", column)

    def integer(self, what: str) -> Tuple[int, int]:
        token, column = self.next(what)
        if not token.isdigit():
            self.fail(f"expected {what}, got '{token}'", column)
        return int(token), column

    def number(self) -> float:
        token, column = self.next("a number")
        try:
            return float(token)
        except ValueError:
            self.fail(f"expected a number, got '{token}'", column)

    def done(self) -> None:
        if self.pos < len(self.tokens):
            self.fail(f"unexpected '{self.tokens[self.pos][0]}'")


def _qubit(tokens: _LineTokens, n: int) -> int:
    q, column = tokens.integer("a qubit index")
    if q >= n:
        tokens.fail(f"undeclared qubit {q} (circuit has {n} qubits)", column)
    return q


def _pauli(tokens: _LineTokens, n: int) -> PauliString:
    sign = ""
    if tokens.peek() in ("+", "-"):
        sign, _ = tokens.next("a sign")
    token, column = tokens.next("a Pauli string")
    if not _PAULI_RE.match(token):
        tokens.fail(f"expected a Pauli string over IXYZ, got '{token}'", column)
    if len(token) != n:
        tokens.fail(f"Pauli '{token}' has length {len(token)}, expected {n}", column)
    return PauliString.from_label(sign + token)


def _parse_noise(tokens: _LineTokens, n: int) -> List[Noise]:
    name, column = tokens.next("a channel name")
    if not re.match(r"^[A-Za-z_]", name):
        tokens.fail(f"expected a channel name, got '{name}'", column)
    tokens.expect("(")
    params = []
    if tokens.peek() != ")":
        params.append(tokens.number())
        while tokens.peek() == ",":
            tokens.next("','")
            params.append(tokens.number())
    tokens.expect(")")
    qubits = [_qubit(tokens, n)]
    while tokens.peek() is not None:
        qubits.append(_qubit(tokens, n))
    if len(set(qubits)) != len(qubits):
        tokens.fail(f"repeated qubit in noise on {qubits}", column)
    if name in CHANNEL_CONSTRUCTORS or name == ERROR_MARKER:
        # single-qubit channels apply independently to every listed qubit
        return [Noise(channel=name, params=tuple(params), qubits=(q,)) for q in qubits]
    return [Noise(channel=name, params=tuple(params), qubits=tuple(qubits))]


def _parse_line(tokens: _LineTokens, n: int, bits: set) -> List:
    keyword, column = tokens.next("an instruction")

    def bit() -> int:
        tokens.expect("->")
        value, bit_column = tokens.integer("a classical bit")
        if value in bits:
            tokens.fail(f"classical bit {value} written twice", bit_column)
        bits.add(value)
        return value

    if keyword in GATE_NAMES:
        arity = 1 if keyword == "t" else gate_arity(keyword)
        qubits = tuple(_qubit(tokens, n) for _ in range(arity))
        if tokens.peek() is not None:
            tokens.fail(f"gate {keyword} takes {arity} qubit(s)")
        if len(set(qubits)) != len(qubits):
            tokens.fail(f"gate {keyword} applied to a repeated qubit", column)
        result = [Gate(name=keyword, qubits=qubits)]
    elif keyword == "noise":
        result = _parse_noise(tokens, n)
    elif keyword == "measure_pauli":
        observable = _pauli(tokens, n)
        result = [MeasurePauli(observable=observable, bit=bit())]
    elif keyword == "reset_pauli":
        target = _pauli(tokens, n)
        if target.is_identity:
            tokens.fail("cannot reset the identity", column)
        result = [ResetPauli(target=target)]
    elif keyword == "mr":
        qubit = _qubit(tokens, n)
        result = [MeasureReset(qubit=qubit, bit=bit())]
    elif keyword == "barrier":
        result = [Barrier()]
    else:
        tokens.fail(f"unknown instruction '{keyword}'", column)
    tokens.done()
    return result


def parse(text: str) -> Circuit:
    """
    Parse the line-based circuit format.

    Raises:
        CircuitSyntaxError: With line and column, on malformed input, undeclared
            qubits or arity mismatches.
    """
    n = None
    instructions = []
    bits = set()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = _COMMENT_RE.sub("", raw)
        tokens = _LineTokens(line, lineno)
        if tokens.peek() is None:
            continue
        if n is None:
            keyword, column = tokens.next("'qubits'")
            if keyword != "qubits":
                tokens.fail("circuit must start with 'qubits N'", column)
            n, column = tokens.integer("a qubit count")
            if n < 1:
                tokens.fail("qubit count must be positive", column)
            tokens.done()
            continue
        instructions.extend(_parse_line(tokens, n, bits))
    if n is None:
        raise CircuitSyntaxError("missing 'qubits N' header", 1, 1)
    return Circuit.from_instructions(n, instructions)


def parse_file(path: Path) -> Circuit:
    with open(path, "r") as f:
        return parse(f.read())


def _render_instruction(instr) -> str:
    if isinstance(instr, Gate):
        return " ".join([instr.name, *map(str, instr.qubits)])
    if isinstance(instr, Noise):
        params = ", ".join(repr(float(p)) for p in instr.params)
        return f"noise {instr.channel}({params}) " + " ".join(map(str, instr.qubits))
    if isinstance(instr, MeasurePauli):
        return f"measure_pauli {instr.observable.label} -> {instr.bit}"
    if isinstance(instr, ResetPauli):
        return f"reset_pauli {instr.target.label}"
    if isinstance(instr, MeasureReset):
        return f"mr {instr.qubit} -> {instr.bit}"
    return "barrier"


def render(circuit: Circuit) -> str:
    """Text form of a circuit; ``parse(render(c)) == c``."""
    lines = [f"qubits {circuit.n}"]
    for index, step in enumerate(circuit.steps):
        if index > 0:
            lines.append("barrier")
        lines.extend(_render_instruction(instr) for instr in step)
    return "\n".join(lines) + "\n"


## noise


def insert_noise(circuit: Circuit, model: NoiseModel) -> Circuit:
    """After every timestep, one noise instruction per qubit that timestep touched."""
    steps = []
    for step in circuit.steps:
        steps.append(step)
        touched = sorted({q for instr in step for q in instruction_qubits(instr)})
        if touched:
            steps.append(
                tuple(
                    Noise(channel=model.channel, params=model.params, qubits=(q,))
                    for q in touched
                )
            )
    return Circuit(n=circuit.n, steps=tuple(steps))


def error_markers(qubits: Sequence[int]) -> List[Noise]:
    """Placeholder noise locations on ``qubits``."""
    return [Noise(channel=ERROR_MARKER, qubits=(q,)) for q in qubits]


def bind_error_markers(circuit: Circuit, model: Optional[NoiseModel]) -> Circuit:
    """
    Replace every error marker with ``model``'s channel, or drop the markers when
    the model is absent or exactly noiseless.
    """
    strip = model is None or model.is_noiseless
    steps = []
    for step in circuit.steps:
        new_step = []
        for instr in step:
            if isinstance(instr, Noise) and instr.channel == ERROR_MARKER:
                if strip:
                    continue
                instr = Noise(channel=model.channel, params=model.params, qubits=instr.qubits)
            new_step.append(instr)
        if new_step:
            steps.append(tuple(new_step))
    return Circuit(n=circuit.n, steps=tuple(steps))


## channel registry

RegistryEntry = Union[Callable[..., StabilizerDecomposition], StabilizerDecomposition]
Registry = Dict[str, RegistryEntry]


def default_registry() -> Registry:
    """Every named single-qubit channel constructor."""
    return {name: entry[0] for name, entry in CHANNEL_CONSTRUCTORS.items()}


def resolve_channel(
    registry: Registry, name: str, params: Sequence[float] = ()
) -> StabilizerDecomposition:
    """
    Raises:
        ValueError: If ``name`` is not in the registry (including unbound error
            markers) or the parameters do not fit the entry.
    """
    if name not in registry:
        if name == ERROR_MARKER:
            raise ValueError("unbound error marker; call bind_error_markers first")
        raise ValueError(f"unknown channel {name!r}")
    entry = registry[name]
    if isinstance(entry, StabilizerDecomposition):
        if params:
            raise ValueError(f"channel {name!r} takes no parameters")
        return entry
    try:
        return entry(*params)
    except TypeError as e:
        raise ValueError(f"bad parameters {tuple(params)} for channel {name!r}: {e}") from e


def _instruction_decomposition(instr, registry: Registry) -> StabilizerDecomposition:
    if isinstance(instr, Gate):
        if instr.name == "t":
            return resolve_channel(registry, "t")
        return decomposition([(1.0, gate_term(instr.name))])
    return resolve_channel(registry, instr.channel, instr.params)


def _check_channel_qubits(d: StabilizerDecomposition, qubits: Sequence[int], name: str):
    if d.n != len(qubits):
        raise ValueError(f"{d.n}-qubit channel {name!r} applied to qubits {tuple(qubits)}")


## compilation


def compile(
    circuit: Circuit,
    registry: Optional[Registry] = None,
    observables: Optional[Sequence[Sequence[PauliString]]] = None,
    initial: Sequence[PauliString] = (),
) -> SimulationPlan:
    """
    Simulation plan for a feedback-free circuit: Clifford gates become one-term
    decompositions, noise and ``t`` come from the registry, small Pauli resets
    become one-term reset channels.

    ``observables`` defaults to the |0...0> projector.

    Raises:
        ValueError: On unknown channels, or measurements (which need
            ``execute_dynamic``).
    """
    registry = default_registry() if registry is None else registry
    cache = {}
    channels = []
    for instr in circuit.instructions:
        if _is_measurement(instr):
            raise ValueError(
                "circuit records measurement outcomes; use execute_dynamic instead"
            )
        if isinstance(instr, ResetPauli):
            support = instr.target.support
            if len(support) > 2:
                raise ValueError(
                    f"reset of {instr.target.label} acts on more than two qubits; "
                    "use execute_dynamic instead"
                )
            d = decomposition([(1.0, PauliResetTerm(target=instr.target.restrict(support)))])
            channels.append(PlannedChannel(decomposition=d, qubits=tuple(support)))
            continue
        if isinstance(instr, Gate) and instr.name == "i":
            continue
        if isinstance(instr, Gate):
            key = ("gate", instr.name, ())
        else:
            key = ("noise", instr.channel, instr.params)
        if key not in cache:
            cache[key] = _instruction_decomposition(instr, registry)
        d = cache[key]
        _check_channel_qubits(d, instr.qubits, key[1])
        channels.append(PlannedChannel(decomposition=d, qubits=instr.qubits))
    if observables is None:
        observables = [zero_state_generators(circuit.n)]
    plan = SimulationPlan(
        n=circuit.n,
        initial=tuple(initial),
        channels=tuple(channels),
        observables=tuple(tuple(obs) for obs in observables),
    )
    logger.debug(
        f"Compiled {len(channels)} channels on {circuit.n} qubits "
        f"(prod g = {plan.one_norm_product:.6g})"
    )
    return plan


## dynamic execution


class ExecutionRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    bits: Dict[int, int] = Field(default_factory=dict, description="bit -> 0 or 1")
    weight: float = 1.0


# receives the classical bits recorded so far; returns instructions to run now
FeedbackHandler = Callable[[Dict[int, int]], Optional[Sequence]]


class CircuitExecutor:
    """A circuit with its noise channels prepared once, run shot after shot."""

    def __init__(self, circuit: Circuit, registry: Optional[Registry] = None):
        self.circuit = circuit
        self.registry = default_registry() if registry is None else registry
        self._prepared: Dict[tuple, PreparedChannel] = {}
        self.steps = [
            [(instr, self._prepare(instr)) for instr in step] for step in circuit.steps
        ]

    def _prepare(self, instr) -> Optional[PreparedChannel]:
        if isinstance(instr, Noise) or (isinstance(instr, Gate) and instr.name == "t"):
            key = (getattr(instr, "channel", "t"), getattr(instr, "params", ()), instr.qubits)
            if key not in self._prepared:
                d = _instruction_decomposition(instr, self.registry)
                _check_channel_qubits(d, instr.qubits, key[0])
                self._prepared[key] = PreparedChannel(
                    PlannedChannel(decomposition=d, qubits=instr.qubits)
                )
            return self._prepared[key]
        return None

    def _execute(
        self,
        tableau: Tableau,
        rng: np.random.Generator,
        instr,
        prepared: Optional[PreparedChannel],
        bits: Dict[int, int],
    ) -> float:
        if prepared is not None:
            term, factor = prepared.sample(rng)
            tableau.apply_term(term, prepared.qubits)
            return factor
        if isinstance(instr, Gate):
            tableau.apply_gate(instr.name, instr.qubits)
        elif isinstance(instr, MeasurePauli):
            bits[instr.bit] = tableau.measure_pauli(instr.observable).bit
        elif isinstance(instr, ResetPauli):
            tableau.pauli_reset(instr.target)
        elif isinstance(instr, MeasureReset):
            record = tableau.measure_qubit(instr.qubit)
            bits[instr.bit] = record.bit
            if record.outcome == -1:
                tableau.apply_gate("x", (instr.qubit,))
        return 1.0

    def run(
        self,
        tableau: Tableau,
        rng: np.random.Generator,
        handler: Optional[FeedbackHandler] = None,
    ) -> ExecutionRecord:
        """
        Run every instruction in order, sampling noise terms from ``rng``. After each
        timestep that measured something, ``handler`` sees the bits so far and may
        return instructions, which run immediately.

        Raises:
            ValueError: If the handler returns something that is not an instruction.
        """
        if tableau.n != self.circuit.n:
            raise ValueError(
                f"{self.circuit.n}-qubit circuit on a {tableau.n}-qubit tableau"
            )
        tableau.rng = rng
        bits: Dict[int, int] = {}
        weight = 1.0
        for step in self.steps:
            measured = False
            for instr, prepared in step:
                weight *= self._execute(tableau, rng, instr, prepared, bits)
                measured = measured or _is_measurement(instr)
            if measured and handler is not None:
                for injected in handler(dict(bits)) or ():
                    if not isinstance(injected, _INSTRUCTION_TYPES):
                        raise ValueError(f"feedback handler returned {injected!r}")
                    for q in instruction_qubits(injected):
                        if not 0 <= q < tableau.n:
                            raise ValueError(f"feedback instruction on missing qubit {q}")
                    weight *= self._execute(
                        tableau, rng, injected, self._prepare(injected), bits
                    )
        return ExecutionRecord(bits=bits, weight=weight)


def execute_dynamic(
    circuit: Circuit,
    tableau: Tableau,
    rng: np.random.Generator,
    handler: Optional[FeedbackHandler] = None,
    registry: Optional[Registry] = None,
) -> ExecutionRecord:
    """Run ``circuit`` on ``tableau`` with classical feedback; returns bits and weight."""
    return CircuitExecutor(circuit, registry).run(tableau, rng, handler)


class CircuitEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    observables: List[EstimatorResult]
    bits: Dict[int, EstimatorResult] = Field(
        default_factory=dict, description="Weighted probability of each bit being 1"
    )


def _circuit_block(
    circuit: Circuit,
    registry: Registry,
    observables: Tuple[Tuple[PauliString, ...], ...],
    handler: Optional[FeedbackHandler],
    seed: int,
    start: int,
    stop: int,
) -> np.ndarray:
    executor = CircuitExecutor(circuit, registry)
    bit_order = circuit.classical_bits
    initial = new_zero_state(circuit.n)
    rows = []
    for shot in range(start, stop):
        tableau = initial.copy()
        record = executor.run(tableau, shot_rng(seed, shot), handler)
        values = [tableau.projection_probability(obs, validate=False) for obs in observables]
        values += [record.bits.get(b, 0) for b in bit_order]
        rows.append(record.weight * np.array(values, dtype=float))
    return np.stack(rows)


def estimate_circuit(
    circuit: Circuit,
    observables: Optional[Sequence[Sequence[PauliString]]] = None,
    shots: int = 10_000,
    seed: int = DEFAULT_SEED,
    registry: Optional[Registry] = None,
    workers: int = 1,
    handler: Optional[FeedbackHandler] = None,
) -> CircuitEstimate:
    """
    Weighted estimates for a circuit run from |0...0> with dynamic execution: one
    result per observable and per classical bit.

    For feedback-free circuits each shot value equals the corresponding shot of
    ``estimate(compile(circuit))`` under the same seed.
    """
    if shots < 2:
        raise ValueError(f"need at least 2 shots, got {shots}")
    registry = default_registry() if registry is None else registry
    if observables is None:
        observables = [zero_state_generators(circuit.n)]
    observables = tuple(tuple(obs) for obs in observables)
    for obs in observables:
        check_generators(obs, circuit.n)
    # fail on unknown channels before launching workers
    CircuitExecutor(circuit, registry)

    start = time.time()
    values = run_blocks(
        _circuit_block, (circuit, registry, observables, handler, seed), shots, workers
    )
    g = circuit_one_norm(circuit, registry)
    m = len(observables)
    result = CircuitEstimate(
        observables=[
            EstimatorResult.from_values(values[:, i], one_norm_product=g, seed=seed)
            for i in range(m)
        ],
        bits={
            b: EstimatorResult.from_values(values[:, m + i], one_norm_product=g, seed=seed)
            for i, b in enumerate(circuit.classical_bits)
        },
    )
    logger.info(
        f"Ran {shots} shots of a {circuit.n}-qubit circuit in "
        f"{naturaldelta(time.time() - start)}"
    )
    return result


def circuit_one_norm(circuit: Circuit, registry: Registry) -> float:
    """Product of the 1-norms of every sampled channel in the circuit body."""
    executor = CircuitExecutor(circuit, registry)
    g = 1.0
    for step in executor.steps:
        for _, prepared in step:
            if prepared is not None:
                g *= prepared.g
    return g
