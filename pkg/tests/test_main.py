import json
import math

import pytest
import ray
from typer.testing import CliRunner

from nearclifford.main import app

runner = CliRunner()

BELL = "qubits 2\nh 0\ncnot 0 1\n"


@pytest.fixture
def bell_file(tmp_path):
    path = tmp_path / "bell.circ"
    path.write_text(BELL)
    return path


def test_decompose_t_gate():
    """The T gate decomposes with 1-norm sqrt(2)."""
    result = runner.invoke(app, ["decompose", "--channel", "t", "--json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert payload["one_norm"] == pytest.approx(math.sqrt(2), abs=1e-8)
    assert payload["residual"] < 1e-8
    assert payload["n"] == 1
    assert payload["terms"]


def test_decompose_writes_json(tmp_path):
    """--out stores the same payload on disk."""
    out = tmp_path / "ad.json"
    result = runner.invoke(
        app, ["decompose", "-c", "amplitude_damping", "--gamma", "0.1", "-o", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert "one_norm:" in result.stdout
    payload = json.loads(out.read_text())
    assert payload["channel"] == "amplitude_damping"
    assert payload["params"] == [0.1]


def test_decompose_kraus_file(tmp_path):
    """Kraus operators can be read from a JSON file."""
    path = tmp_path / "kraus.json"
    path.write_text(json.dumps([{"re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]}]))
    result = runner.invoke(
        app, ["decompose", "-c", "kraus-file", "--kraus-file", str(path), "--json"]
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["one_norm"] == pytest.approx(1.0, abs=1e-8)


def test_decompose_usage_errors(tmp_path):
    """Missing parameters are usage errors; bad channels are domain errors."""
    result = runner.invoke(app, ["decompose", "-c", "depolarizing"])
    assert result.exit_code == 2
    result = runner.invoke(app, ["decompose", "-c", "amplitude_damping", "--gamma", "2"])
    assert result.exit_code == 1
    lossy = tmp_path / "lossy.json"
    lossy.write_text(json.dumps([[[[0.5, 0], [0, 0.5]], [[0, 0], [0, 0]]]]))
    result = runner.invoke(app, ["decompose", "-c", "kraus-file", "--kraus-file", str(lossy)])
    assert result.exit_code == 1


def test_run_bell_circuit(bell_file):
    """A noiseless Bell circuit gives exact estimates."""
    result = runner.invoke(
        app,
        [
            "run",
            "--circuit",
            str(bell_file),
            "--observable",
            "+XX,+ZZ",
            "--shots",
            "20",
            "--json",
        ],
    )
    assert result.exit_code == 0, result.output
    (row,) = json.loads(result.stdout)["results"]
    assert row["quantity"] == "+XX,+ZZ"
    assert row["mean"] == 1.0
    assert row["std_error"] == 0.0


def test_run_with_noise_and_verify(bell_file, tmp_path):
    """Noise after every timestep, CSV output and exact values side by side."""
    out = tmp_path / "estimates.csv"
    result = runner.invoke(
        app,
        [
            "run",
            "--circuit",
            str(bell_file),
            "--noise",
            "amplitude_damping",
            "--param",
            "0.1",
            "--observable",
            "+XX,+ZZ",
            "--shots",
            "200",
            "--verify",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    header = out.read_text().split("\n")[0]
    assert header == "quantity,mean,std_error,variance,shots,exact"


def test_run_reports_bits(tmp_path):
    """Classical bits get their own rows."""
    path = tmp_path / "mr.circ"
    path.write_text("qubits 1\nx 0\nmr 0 -> 0\n")
    result = runner.invoke(app, ["run", "--circuit", str(path), "--shots", "4", "--json"])
    assert result.exit_code == 0, result.output
    rows = {r["quantity"]: r for r in json.loads(result.stdout)["results"]}
    assert rows["bit[0]"]["mean"] == 1.0


def test_run_errors(tmp_path):
    """Missing files and syntax errors exit with code 1."""
    result = runner.invoke(app, ["run", "--circuit", str(tmp_path / "missing.circ")])
    assert result.exit_code == 1
    bad = tmp_path / "bad.circ"
    bad.write_text("qubits 1\nh 3\n")
    result = runner.invoke(app, ["run", "--circuit", str(bad)])
    assert result.exit_code == 1
    result = runner.invoke(app, ["run", "--circuit", str(bad), "--shots", "1"])
    assert result.exit_code == 2


def test_verify_agrees(bell_file):
    """A noisy Bell circuit agrees with the dense simulator."""
    result = runner.invoke(
        app,
        [
            "verify",
            "--circuit",
            str(bell_file),
            "--noise",
            "depolarizing",
            "-p",
            "0.05",
            "--observable",
            "+XX,+ZZ",
            "--shots",
            "500",
            "--json",
        ],
    )
    assert result.exit_code == 0, result.output
    (row,) = json.loads(result.stdout)["results"]
    assert row["agrees"]


def test_verify_rejects_large_circuits(tmp_path):
    """The dense check stops at four qubits."""
    path = tmp_path / "wide.circ"
    path.write_text("qubits 5\nh 0\n")
    result = runner.invoke(app, ["verify", "--circuit", str(path), "--shots", "10"])
    assert result.exit_code == 1


def test_rotation_demo_csv():
    """The demo prints one CSV row per step."""
    result = runner.invoke(
        app, ["rotation-demo", "--steps", "3", "--theta-steps", "10", "--shots", "100"]
    )
    assert result.exit_code == 0, result.output
    lines = result.stdout.strip().split("\n")
    assert lines[0] == "step,estimate,std_error,exact"
    assert len(lines) == 4


def test_steane_sweep_json():
    """A tiny sweep reports its points and crossing."""
    result = runner.invoke(
        app,
        [
            "steane",
            "--noise",
            "depolarizing",
            "--strengths",
            "0,0.001",
            "--shots",
            "2",
            "--rounds",
            "1",
            "--json",
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert [p["strength"] for p in payload["points"]] == [0.0, 0.001]
    assert payload["points"][0]["logical_infidelity"] == 0.0
    assert "crossing" in payload


def test_steane_usage_errors():
    """Bad strengths and channels are usage errors."""
    result = runner.invoke(app, ["steane", "--noise", "t", "--strengths", "0.1,0.2"])
    assert result.exit_code == 2
    result = runner.invoke(app, ["steane", "--noise", "depolarizing", "--strengths", "a,b"])
    assert result.exit_code == 2
    result = runner.invoke(app, ["steane", "--noise", "depolarizing", "--strengths", "0.1"])
    assert result.exit_code == 1


def test_dictionary_info():
    """One-qubit dictionary sizes."""
    result = runner.invoke(app, ["dictionary-info", "--json"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert (payload["cliffords"], payload["pauli_resets"], payload["terms"]) == (24, 6, 30)


@pytest.mark.slow
@pytest.mark.parametrize(
    "args",
    [
        ["run", "--noise", "amplitude_damping", "--param", "0.1", "--observable", "+XX,+ZZ", "--shots", "1100"],
        ["rotation-demo", "--steps", "5", "--theta-steps", "10", "--shots", "1100"],
        ["steane", "--noise", "depolarizing", "--strengths", "0.001,0.002", "--rounds", "1", "--shots", "600"],
    ],
    ids=["run", "rotation-demo", "steane"],
)
def test_output_is_identical_across_workers(args, bell_file, tmp_path):
    """The same command line and seed writes byte-identical CSV for 1 and 4 workers."""
    if args[0] == "run":
        args = args + ["--circuit", str(bell_file)]
    outputs = []
    for workers in (1, 4):
        out = tmp_path / f"workers-{workers}.csv"
        result = runner.invoke(
            app, args + ["--seed", "7", "--workers", str(workers), "-o", str(out)]
        )
        assert result.exit_code == 0, result.output
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].count(b"\n") >= 2

    ray.shutdown()
