import logging
import math
import time
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import polars as pl
import typer
from humanize.time import naturaldelta
from pydantic import ValidationError

from nearclifford.channels import (
    decomposition_to_json_dict,
    kraus_from_name,
    load_kraus_file,
    negativity,
    one_norm,
    ptm_from_kraus,
)
from nearclifford.circuits import (
    ERROR_MARKER,
    Circuit,
    Noise,
    bind_error_markers,
    estimate_circuit,
    insert_noise,
    parse_file,
)
from nearclifford.decomposer import (
    build_dictionary,
    enumerate_cliffords,
    enumerate_pauli_resets,
    solve_min_norm,
    verify_decomposition,
)
from nearclifford.export import (
    csv_text,
    estimates_frame,
    json_text,
    threshold_frame,
    write_csv,
    write_json,
)
from nearclifford.oracle import MAX_DENSE_QUBITS, exact_circuit_expectation
from nearclifford.pauli import PauliString
from nearclifford.rotation import DEFAULT_STEPS, DEFAULT_THETA_STEPS, run_rotation_demo
from nearclifford.sampler import zero_state_generators
from nearclifford.schemas import (
    DEFAULT_SEED,
    DecomposeChannel,
    NoiseModel,
    RunConfig,
    Subcommand,
    SweepChannel,
)
from nearclifford.steane import threshold_sweep

logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)

logger = logging.getLogger(__name__)

app = typer.Typer()

# agreement tolerance for verify, in standard errors
VERIFY_SIGMAS = 4.0


## shared option handling


def _set_verbosity(verbose: bool) -> None:
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


def _config(**fields) -> RunConfig:
    """Validate flags into a RunConfig; invalid values are usage errors (exit 2)."""
    try:
        return RunConfig(**fields)
    except ValidationError as e:
        raise typer.BadParameter(str(e))


@contextmanager
def _reported_errors():
    """Turn domain and file errors raised by a subcommand into exit code 1."""
    try:
        yield
    except (ValueError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=1)


def _parse_floats(text: str, option: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise typer.BadParameter(f"{option} expects comma-separated numbers, got {text!r}")


def _parse_observable(text: str) -> Tuple[PauliString, ...]:
    """"+ZI,+IZ" -> the generators of one projector."""
    return tuple(PauliString.from_label(part.strip()) for part in text.split(","))


def _emit_table(df: pl.DataFrame, config: RunConfig, payload: dict) -> None:
    if config.output is not None:
        write_csv(df, config.output)
    if config.json_output:
        typer.echo(json_text(payload))
    elif config.output is None:
        typer.echo(csv_text(df), nl=False)


## decompose


def _channel_params(
    channel: DecomposeChannel,
    theta: Optional[float],
    gamma: Optional[float],
    p: Optional[float],
) -> Tuple[float, ...]:
    needed = {
        DecomposeChannel.ROTATION_Z: ("--theta", theta),
        DecomposeChannel.ROTATION_Z_POSITIVE: ("--theta", theta),
        DecomposeChannel.AMPLITUDE_DAMPING: ("--gamma", gamma),
        DecomposeChannel.DEPOLARIZING: ("--p", p),
    }
    if channel not in needed:
        return ()
    option, value = needed[channel]
    if value is None:
        raise typer.BadParameter(f"channel {channel.value} needs {option}")
    return (value,)


def _kraus_for(
    channel: DecomposeChannel, params: Tuple[float, ...], kraus_file: Optional[Path], n: int
) -> List[np.ndarray]:
    if channel == DecomposeChannel.KRAUS_FILE:
        if kraus_file is None:
            raise typer.BadParameter("channel kraus-file needs --kraus-file")
        kraus = load_kraus_file(kraus_file)
        dim = np.asarray(kraus[0]).shape[0]
        if dim != 2**n:
            raise ValueError(f"Kraus operators act on dimension {dim}, but --n is {n}")
        return kraus
    kraus = kraus_from_name(channel.value, params)
    if n == 2:
        # the named channel on both qubits independently
        kraus = [np.kron(a, b) for a in kraus for b in kraus]
    return kraus


@app.command("decompose")
def decompose(
    channel: DecomposeChannel = typer.Option(
        ..., "--channel", "-c", help="Channel to decompose"
    ),
    theta: Optional[float] = typer.Option(None, "--theta", help="Rotation angle (radians)"),
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Damping strength"),
    p: Optional[float] = typer.Option(None, "--p", help="Depolarizing probability"),
    kraus_file: Optional[Path] = typer.Option(
        None, "--kraus-file", help="JSON list of Kraus matrices (with --channel kraus-file)"
    ),
    n: int = typer.Option(1, "--n", min=1, max=2, help="Number of qubits"),
    output: Optional[Path] = typer.Option(
        None, "--out", "-o", help="Write the decomposition JSON here"
    ),
    seed: int = typer.Option(
        DEFAULT_SEED, "--seed", "-s", help="Random seed (the LP is deterministic)"
    ),
    workers: int = typer.Option(
        1, "--workers", "-w", help="Worker processes (the LP runs in-process)"
    ),
    json_output: bool = typer.Option(False, "--json", help="Echo the result as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
):
    """
    Minimal 1-norm decomposition of a channel into stabilizer channels.
    """
    _set_verbosity(verbose)
    config = _config(
        subcommand=Subcommand.DECOMPOSE,
        seed=seed,
        workers=workers,
        output=output,
        json_output=json_output,
    )
    params = _channel_params(channel, theta, gamma, p)
    with _reported_errors():
        kraus = _kraus_for(channel, params, kraus_file, n)
        ptm = ptm_from_kraus(kraus)
        solution, d = solve_min_norm(ptm, build_dictionary(n))
        residual = verify_decomposition(ptm, d)
        payload = {
            "channel": channel.value,
            "params": list(params),
            "one_norm": one_norm(d),
            "negativity": negativity(d),
            "residual": residual,
            **decomposition_to_json_dict(d),
        }
        logger.info(
            f"Decomposed {channel.value}{list(params)} into {len(d.terms)} terms "
            f"(LP status {solution.status.value})"
        )
        if config.output is not None:
            write_json(payload, config.output)
        if config.json_output:
            typer.echo(json_text(payload))
        else:
            typer.echo(f"one_norm: {payload['one_norm']!r}")
            typer.echo(f"negativity: {payload['negativity']!r}")
            typer.echo(f"residual: {residual!r}")
            typer.echo(f"terms: {len(d.terms)}")


## run


def _noisy_circuit(circuit: Circuit, model: Optional[NoiseModel]) -> Circuit:
    """Bind error markers to ``model``; without markers, noise follows every timestep."""
    has_markers = any(
        isinstance(i, Noise) and i.channel == ERROR_MARKER for i in circuit.instructions
    )
    if model is None or has_markers:
        return bind_error_markers(circuit, model)
    return insert_noise(circuit, model)


def _observable_labels(observables: Sequence[Sequence[PauliString]]) -> List[str]:
    return [",".join(g.label for g in obs) for obs in observables]


def _load_circuit(path: Path, noise: Optional[str], params: List[float]):
    model = NoiseModel(channel=noise, params=tuple(params)) if noise else None
    circuit = _noisy_circuit(parse_file(path), model)
    return circuit, model


@app.command("run")
def run(
    circuit_file: Path = typer.Option(..., "--circuit", help="Circuit file"),
    noise: Optional[str] = typer.Option(
        None, "--noise", "-n", help="Named single-qubit noise channel"
    ),
    param: List[float] = typer.Option([], "--param", "-p", help="Noise parameter"),
    observable: List[str] = typer.Option(
        [],
        "--observable",
        help="Projector generators, comma separated (repeatable); default |0...0>",
    ),
    shots: int = typer.Option(10_000, "--shots", "-N", help="Number of shots"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", "-s", help="Random seed"),
    workers: int = typer.Option(1, "--workers", "-w", help="Worker processes (0 = all CPUs)"),
    output: Optional[Path] = typer.Option(None, "--out", "-o", help="Write CSV here"),
    verify: bool = typer.Option(
        False, "--verify", help="Add exact values (feedback-free circuits, n <= 4)"
    ),
    json_output: bool = typer.Option(False, "--json", help="Echo the result as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
):
    """
    Estimate observables (and classical bit probabilities) of a noisy circuit.
    """
    _set_verbosity(verbose)
    config = _config(
        subcommand=Subcommand.RUN,
        seed=seed,
        shots=shots,
        workers=workers,
        output=output,
        json_output=json_output,
    )
    with _reported_errors():
        circuit, model = _load_circuit(circuit_file, noise, param)
        observables = [_parse_observable(o) for o in observable] or None
        estimate = estimate_circuit(
            circuit,
            observables,
            shots=config.shots,
            seed=config.seed,
            workers=config.resolved_workers,
        )
        if observables is None:
            observables = [zero_state_generators(circuit.n)]
        labels = _observable_labels(observables)
        exact = exact_circuit_expectation(circuit, observables) if verify else None
        results = list(estimate.observables) + list(estimate.bits.values())
        labels += [f"bit[{b}]" for b in estimate.bits]
        if exact is not None:
            exact = list(exact) + [math.nan] * len(estimate.bits)
        df = estimates_frame(labels, results, exact)
        payload = {
            "circuit": str(circuit_file),
            "noise": str(model) if model else None,
            "results": [
                {"quantity": label, **r.to_json_dict()} for label, r in zip(labels, results)
            ],
        }
        if exact is not None:
            for entry, value in zip(payload["results"], exact):
                entry["exact"] = None if math.isnan(value) else value
        _emit_table(df, config, payload)


## verify


@app.command("verify")
def verify(
    circuit_file: Path = typer.Option(..., "--circuit", help="Circuit file (n <= 4)"),
    noise: Optional[str] = typer.Option(
        None, "--noise", "-n", help="Named single-qubit noise channel"
    ),
    param: List[float] = typer.Option([], "--param", "-p", help="Noise parameter"),
    observable: List[str] = typer.Option(
        [], "--observable", help="Projector generators, comma separated (repeatable)"
    ),
    shots: int = typer.Option(10_000, "--shots", "-N", help="Number of shots"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", "-s", help="Random seed"),
    workers: int = typer.Option(1, "--workers", "-w", help="Worker processes (0 = all CPUs)"),
    output: Optional[Path] = typer.Option(None, "--out", "-o", help="Write CSV here"),
    json_output: bool = typer.Option(False, "--json", help="Echo the result as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
):
    """
    Cross-check sampled estimates against the dense reference simulator.

    Exits with code 1 if any estimate is more than four standard errors from the
    exact value.
    """
    _set_verbosity(verbose)
    config = _config(
        subcommand=Subcommand.VERIFY,
        seed=seed,
        shots=shots,
        workers=workers,
        output=output,
        json_output=json_output,
    )
    with _reported_errors():
        circuit, _ = _load_circuit(circuit_file, noise, param)
        if circuit.n > MAX_DENSE_QUBITS:
            raise ValueError(
                f"verify supports at most {MAX_DENSE_QUBITS} qubits, circuit has {circuit.n}"
            )
        observables = [_parse_observable(o) for o in observable] or [
            zero_state_generators(circuit.n)
        ]
        exact = exact_circuit_expectation(circuit, observables)
        estimate = estimate_circuit(
            circuit,
            observables,
            shots=config.shots,
            seed=config.seed,
            workers=config.resolved_workers,
        )
        agree = [
            abs(r.mean - e) <= VERIFY_SIGMAS * r.std_error + 1e-9
            for r, e in zip(estimate.observables, exact)
        ]
        labels = _observable_labels(observables)
        df = estimates_frame(labels, estimate.observables, exact).with_columns(
            pl.Series("agrees", agree)
        )
        payload = {
            "circuit": str(circuit_file),
            "results": [
                {"quantity": label, **r.to_json_dict(), "exact": e, "agrees": a}
                for label, r, e, a in zip(labels, estimate.observables, exact, agree)
            ],
        }
        _emit_table(df, config, payload)
    if not all(agree):
        logger.error(f"{agree.count(False)} estimate(s) disagree with the exact values")
        raise typer.Exit(code=1)


## rotation demo


@app.command("rotation-demo")
def rotation_demo(
    steps: int = typer.Option(DEFAULT_STEPS, "--steps", help="Number of rotation steps"),
    theta_steps: int = typer.Option(
        DEFAULT_THETA_STEPS, "--theta-steps", help="Each step rotates by pi / THETA_STEPS"
    ),
    positive: bool = typer.Option(
        False, "--positive", help="Use the biased all-positive approximation"
    ),
    shots: int = typer.Option(10_000, "--shots", "-N", help="Number of shots"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", "-s", help="Random seed"),
    workers: int = typer.Option(1, "--workers", "-w", help="Worker processes (0 = all CPUs)"),
    output: Optional[Path] = typer.Option(None, "--out", "-o", help="Write CSV here"),
    json_output: bool = typer.Option(False, "--json", help="Echo the result as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
):
    """
    Rotate |+> towards |+i> in equal Z-rotation steps and estimate the overlap
    after every step.
    """
    _set_verbosity(verbose)
    config = _config(
        subcommand=Subcommand.ROTATION_DEMO,
        seed=seed,
        shots=shots,
        workers=workers,
        output=output,
        json_output=json_output,
    )
    with _reported_errors():
        df = run_rotation_demo(
            steps=steps,
            shots=config.shots,
            seed=config.seed,
            workers=config.resolved_workers,
            positive=positive,
            theta_steps=theta_steps,
        )
        payload = {
            "steps": steps,
            "theta": math.pi / theta_steps,
            "positive": positive,
            "shots": config.shots,
            "seed": config.seed,
            "rows": df.to_dicts(),
        }
        _emit_table(df, config, payload)


## steane


@app.command("steane")
def steane(
    noise: SweepChannel = typer.Option(..., "--noise", "-n", help="Noise channel"),
    strengths: str = typer.Option(
        ..., "--strengths", help="Comma-separated noise strengths, e.g. 1e-4,2e-4"
    ),
    shots: int = typer.Option(10_000, "--shots", "-N", help="Shots per input state"),
    rounds: int = typer.Option(3, "--rounds", min=1, help="Noisy syndrome rounds"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", "-s", help="Random seed"),
    workers: int = typer.Option(1, "--workers", "-w", help="Worker processes (0 = all CPUs)"),
    output: Optional[Path] = typer.Option(None, "--out", "-o", help="Write CSV here"),
    json_output: bool = typer.Option(False, "--json", help="Echo the result as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
):
    """
    Logical vs physical infidelity of an error-corrected Steane logical identity.
    """
    _set_verbosity(verbose)
    config = _config(
        subcommand=Subcommand.STEANE,
        seed=seed,
        shots=shots,
        workers=workers,
        output=output,
        json_output=json_output,
    )
    values = _parse_floats(strengths, "--strengths")
    with _reported_errors():
        points, crossing = threshold_sweep(
            noise.value,
            values,
            shots=config.shots,
            seed=config.seed,
            rounds=rounds,
            workers=config.resolved_workers,
        )
        payload = {
            "noise": noise.value,
            "rounds": rounds,
            "seed": config.seed,
            "points": [p.model_dump() for p in points],
            "crossing": crossing,
        }
        _emit_table(threshold_frame(points), config, payload)


## dictionary info


@app.command("dictionary-info")
def dictionary_info(
    n: int = typer.Option(1, "--n", min=1, max=2, help="Number of qubits"),
    json_output: bool = typer.Option(False, "--json", help="Echo the result as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
):
    """
    Count the Cliffords and Pauli resets in the n-qubit stabilizer channel dictionary.
    """
    _set_verbosity(verbose)
    _config(subcommand=Subcommand.DICTIONARY_INFO, json_output=json_output)
    with _reported_errors():
        start = time.time()
        dictionary = build_dictionary(n)
        elapsed = time.time() - start
        payload = {
            "n": n,
            "cliffords": len(enumerate_cliffords(n)),
            "pauli_resets": len(enumerate_pauli_resets(n)),
            "terms": len(dictionary.terms),
            "build_seconds": elapsed,
        }
        if json_output:
            typer.echo(json_text(payload))
        else:
            typer.echo(f"Cliffords: {payload['cliffords']}")
            typer.echo(f"Pauli resets: {payload['pauli_resets']}")
            typer.echo(f"Total terms: {payload['terms']}")
            typer.echo(f"Built in {naturaldelta(elapsed)}")


if __name__ == "__main__":
    app()
