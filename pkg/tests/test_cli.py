import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

PROJECT_ROOT = Path(__file__).parent.parent


def run_cli(*args: str, env_extra=None) -> subprocess.CompletedProcess:
    env = {k: v for k, v in os.environ.items() if not k.startswith("OQO_")}
    env.update(env_extra or {})
    cmd = [sys.executable, "-m", "oqo_engine", *args]
    return subprocess.run(cmd, capture_output=True, text=True, cwd=PROJECT_ROOT, env=env)


def read_table(text: str) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(text), comment="#")


def test_help():
    cp = run_cli("--help")
    assert cp.returncode == 0, cp.stderr
    assert "Operational quantum observables" in cp.stdout


def test_qp_spreads_json():
    cp = run_cli("qp-spreads", "--state", "coherent:1,0", "--nbar", "0.5", "--dim", "40")
    assert cp.returncode == 0, cp.stderr
    payload = json.loads(cp.stdout)
    assert payload["tool"] == "oqo-engine"
    assert payload["config"]["dim"] == 40
    assert payload["result"]["lhs"] == pytest.approx(1.5, abs=1e-8)
    assert payload["result"]["equality_case"] is True


def test_phase_propensity_csv():
    cp = run_cli("phase-propensity", "--state", "fock:2", "--dim", "30", "--nphi", "64")
    assert cp.returncode == 0, cp.stderr
    assert cp.stdout.startswith("# tool: oqo-engine")
    frame = read_table(cp.stdout)
    assert list(frame.columns) == ["a1", "weight", "pr"]
    assert len(frame) == 64
    assert (frame["pr"] == 0.159154943092).all()


def test_state_from_config_file(tmp_path):
    config = tmp_path / "state.json"
    config.write_text(json.dumps({"kind": "thermal", "nbar": 0.5}))
    cp = run_cli("phase-propensity", "--config", str(config), "--dim", "30", "--nphi", "16", "--format", "json")
    assert cp.returncode == 0, cp.stderr
    payload = json.loads(cp.stdout)
    assert payload["config"]["state"]["kind"] == "thermal"
    assert payload["result"]["pr"] == pytest.approx([0.159154943092] * 16)


def test_reruns_are_byte_identical(tmp_path):
    outputs = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        cp = run_cli("qp-moments", "--state", "random_mixed:3", "--nbar", "0.5", "--dim", "30",
                     "--points", "65", "--order", "3", "--out", str(out))
        assert cp.returncode == 0, cp.stderr
        assert cp.stdout == ""
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    frame = read_table(outputs[0].decode("utf-8"))
    assert list(frame.columns) == ["axis", "n", "operational", "intrinsic", "direct"]


def test_default_dim_from_environment():
    cp = run_cli("phasors", "--n-max", "2", "--format", "json", env_extra={"OQO_DEFAULT_DIM": "24"})
    assert cp.returncode == 0, cp.stderr
    assert json.loads(cp.stdout)["config"]["dim"] == 24


def test_phasors_csv_columns():
    cp = run_cli("phasors", "--n-max", "1", "--dim", "5")
    assert cp.returncode == 0, cp.stderr
    frame = read_table(cp.stdout)
    assert list(frame.columns) == ["n", "row", "col", "re", "im"]
    assert len(frame) == 5 + 4 + 4


def test_phase_operator_against_windowed_mean(tmp_path):
    vectors = tmp_path / "vectors.csv"
    cp = run_cli("phase-op", "--state", "coherent:2,0", "--dim", "40", "--eigenvectors", str(vectors))
    assert cp.returncode == 0, cp.stderr
    result = json.loads(cp.stdout)["result"]
    assert result["expectation"] == pytest.approx(result["windowed_mean"], abs=5e-3)
    assert len(result["spectrum"]["eigenvalues"]) == 40
    frame = read_table(vectors.read_text())
    assert list(frame.columns) == ["level", "index", "re", "im"]
    assert len(frame) == 40 * 40


def test_verify_passes():
    cp = run_cli("verify", "--dim", "30", "--states", "2", "--seed", "3")
    assert cp.returncode == 0, cp.stdout
    assert "All invariants hold" in cp.stdout


@pytest.mark.parametrize("args", [
    ("qp-spreads", "--state", "coherent:x", "--dim", "30"),
    ("qp-spreads", "--state", "coherent:4,0", "--dim", "20"),
    ("qp-propensity", "--dim", "30"),
    ("verify", "--dim", "10"),
])
def test_bad_input_exits_with_one_line_error(args):
    cp = run_cli(*args)
    assert cp.returncode == 2
    assert cp.stdout == ""
    errors = [line for line in cp.stderr.splitlines() if line.startswith("error:")]
    assert len(errors) == 1


def test_bad_environment_dim():
    cp = run_cli("phasors", "--n-max", "1", env_extra={"OQO_DEFAULT_DIM": "many"})
    assert cp.returncode == 2
    assert "OQO_DEFAULT_DIM" in cp.stderr


def test_bad_environment_log_level():
    cp = run_cli("phasors", "--n-max", "1", "--dim", "4", env_extra={"OQO_LOG_LEVEL": "LOUD"})
    assert cp.returncode == 2
    errors = [line for line in cp.stderr.splitlines() if line.startswith("error:")]
    assert len(errors) == 1
    assert "OQO_LOG_LEVEL" in errors[0]
    assert "Traceback" not in cp.stderr


def test_qp_spreads_at_default_cutoff():
    cp = run_cli("qp-spreads", "--state", "coherent:3,0", "--nbar", "2", "--dim", "80")
    assert cp.returncode == 0, cp.stderr
    result = json.loads(cp.stdout)["result"]
    assert result["lhs"] == pytest.approx(3.0, abs=1e-6)
    assert result["equality_case"] is True
