import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from . import __version__
from .fock_core import FockOperator
from .phase_nfm import PhasorSet
from .schemas import OutputEnvelope, RunConfig

logger = logging.getLogger(__name__)

TOOL_NAME = "oqo-engine"
SIGNIFICANT_DIGITS = 12
FLOAT_FORMAT = "%.12g"
ENTRY_TOL = 1e-15


def round_significant(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """Round every float inside nested dicts/lists to `digits` significant digits."""
    if isinstance(value, dict):
        return {key: round_significant(item, digits) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_significant(item, digits) for item in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == 0.0 or not math.isfinite(value):
            return value
        return float(f"{value:.{digits}g}")
    if isinstance(value, np.integer):
        return int(value)
    return value


def make_envelope(config: RunConfig, result: Any = None) -> OutputEnvelope:
    return OutputEnvelope(tool=TOOL_NAME, version=__version__, config=config, result=round_significant(result))


def render_json(envelope: OutputEnvelope) -> str:
    payload = round_significant(envelope.model_dump(mode="json"))
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def render_csv(frame: pd.DataFrame, envelope: OutputEnvelope) -> str:
    """CSV table preceded by '# ' lines carrying tool, version and the resolved config."""
    header = envelope.model_dump(mode="json", exclude={"result"})
    buffer = io.StringIO()
    buffer.write(f"# tool: {header['tool']}\n")
    buffer.write(f"# version: {header['version']}\n")
    buffer.write(f"# config: {json.dumps(round_significant(header['config']), sort_keys=True)}\n")
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def write_output(text: str, out: Optional[Path] = None) -> Optional[Path]:
    """Write to `out` (parents created) or return None so the caller prints to stdout."""
    if out is None:
        return None
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info(f"✅ Wrote {out}")
    return out


def operator_frame(op: FockOperator, tol: float = ENTRY_TOL) -> pd.DataFrame:
    """Nonzero entries as columns row, col, re, im."""
    rows, cols = np.nonzero(np.abs(op.entries) > tol)
    values = op.entries[rows, cols]
    return pd.DataFrame({"row": rows, "col": cols, "re": values.real, "im": values.imag})


def phasor_frame(phasors: PhasorSet, tol: float = ENTRY_TOL) -> pd.DataFrame:
    """Nonzero entries of every phasor, n from -n_max to n_max."""
    frames = []
    for n in sorted(phasors.ops):
        frame = operator_frame(phasors[n], tol)
        frame.insert(0, "n", n)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def read_csv_output(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_json_output(path: Path) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
