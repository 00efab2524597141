import json

import numpy as np
import pandas as pd
import pytest

from oqo_engine import __version__
from oqo_engine.data_export import (
    TOOL_NAME,
    make_envelope,
    operator_frame,
    phasor_frame,
    read_csv_output,
    read_json_output,
    render_csv,
    render_json,
    round_significant,
    write_output,
)
from oqo_engine.fock_core import build_operators
from oqo_engine.phase_nfm import phasor_set
from oqo_engine.schemas import RunConfig, StateSpec


@pytest.fixture
def config():
    state = StateSpec.from_compact("coherent:1,0", 20)
    return RunConfig(command="qp-spreads", dim=20, state=state, nbar=0.5, format="json")


def test_round_significant_nested():
    value = {"a": [1.0 / 3.0, np.float64(2.0 / 3.0)], "b": np.int64(4), "c": "text", "d": 0.0}
    rounded = round_significant(value)
    assert rounded["a"] == [0.333333333333, 0.666666666667]
    assert type(rounded["a"][1]) is float
    assert rounded["b"] == 4 and type(rounded["b"]) is int
    assert rounded["c"] == "text"
    assert rounded["d"] == 0.0


def test_round_significant_keeps_non_finite():
    assert round_significant(float("inf")) == float("inf")


def test_json_envelope(config):
    text = render_json(make_envelope(config, {"lhs": 1.5000000000000002, "equality_case": True}))
    payload = json.loads(text)
    assert payload["tool"] == TOOL_NAME
    assert payload["version"] == __version__
    assert payload["config"]["state"]["kind"] == "coherent"
    assert payload["result"] == {"lhs": 1.5, "equality_case": True}
    assert text.endswith("\n")


def test_csv_has_header_lines(config):
    frame = pd.DataFrame({"a1": [0.1, 0.2], "pr": [1.0 / 3.0, 2.0 / 3.0]})
    text = render_csv(frame, make_envelope(config.model_copy(update={"format": "csv"})))
    lines = text.splitlines()
    assert lines[0] == f"# tool: {TOOL_NAME}"
    assert lines[1] == f"# version: {__version__}"
    assert json.loads(lines[2][len("# config: "):])["nbar"] == 0.5
    assert lines[3] == "a1,pr"
    assert lines[4] == "0.1,0.333333333333"
    assert "\r" not in text


def test_rendering_is_deterministic(config):
    envelope = make_envelope(config, {"x": np.float64(0.1) + 0.2})
    assert render_json(envelope) == render_json(make_envelope(config, {"x": np.float64(0.1) + 0.2}))


def test_write_and_read_back(tmp_path, config):
    frame = pd.DataFrame({"n": [1, 2], "value": [0.25, -1.5]})
    target = tmp_path / "nested" / "out.csv"
    assert write_output(render_csv(frame, make_envelope(config)), target) == target
    pd.testing.assert_frame_equal(read_csv_output(target), frame)

    json_target = tmp_path / "out.json"
    write_output(render_json(make_envelope(config, {"k": 1})), json_target)
    assert read_json_output(json_target)["result"] == {"k": 1}


def test_write_to_stdout_returns_none():
    assert write_output("text", None) is None


def test_operator_frame_lists_nonzero_entries():
    frame = operator_frame(build_operators(4).b)
    assert list(frame.columns) == ["row", "col", "re", "im"]
    assert list(zip(frame["row"], frame["col"])) == [(0, 1), (1, 2), (2, 3)]
    assert frame["re"].iloc[2] == pytest.approx(np.sqrt(3.0))


def test_phasor_frame_orders():
    frame = phasor_frame(phasor_set(2, 5))
    assert frame.columns[0] == "n"
    assert sorted(frame["n"].unique()) == [-2, -1, 0, 1, 2]
    assert len(frame[frame["n"] == 0]) == 5
    assert len(frame[frame["n"] == 2]) == 3
