"""
Command-line front end.

    python -m oqo_engine qp-spreads --state coherent:1,0 --nbar 0.5 --dim 80
    python -m oqo_engine phase-propensity --state fock:2 --dim 40 --nphi 64
    python -m oqo_engine verify --dim 60 --seed 7

Data goes to stdout (or --out); diagnostics go to stderr.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .data_export import (
    make_envelope,
    operator_frame,
    phasor_frame,
    render_csv,
    render_json,
    write_output,
)
from .errors import ConfigError
from .fock_core import DensityState, make_state
from .measurement_core import propensity
from .phase_nfm import phase_expectation, phase_operator, phase_propensity, phase_spectrum_report, phasor_set
from .qp_measurement import QpFilterFamily, moment_table, spreads_and_bound, state_grid
from .schemas import PhaseOpConfig, QpGridSpec, QpModel, RunConfig, StateSpec
from .settings import get_default_dim, get_log_level
from .verification import format_summary, run_verification

logger = logging.getLogger(__name__)

DEFAULT_FORMATS = {
    "qp-propensity": "csv",
    "qp-moments": "csv",
    "qp-spreads": "json",
    "phase-propensity": "csv",
    "phasors": "csv",
    "phase-op": "json",
    "verify": "text",
}


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--dim", type=int, default=None, help="Fock cutoff D (default: OQO_DEFAULT_DIM or 80)")
    parser.add_argument("--format", choices=["csv", "json"], default=None, help="output format")
    parser.add_argument("--out", type=Path, default=None, help="write output to this file instead of stdout")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")


def _add_state(parser: argparse.ArgumentParser, required: bool = True):
    parser.add_argument("--state", default=None,
                        help="fock:N | coherent:RE[,IM] | thermal:NBAR | displaced_thermal:RE,IM,NBAR | "
                             "random_mixed:SEED[,SUPPORT] | squeezed:R[,THETA]")
    parser.add_argument("--config", type=Path, default=None, help="JSON file with StateSpec fields")
    parser.set_defaults(state_required=required)


def _add_qp(parser: argparse.ArgumentParser):
    parser.add_argument("--nbar", type=float, default=0.0, help="thermal occupation of the reference")
    parser.add_argument("--points", type=int, default=129, help="grid points per axis")
    parser.add_argument("--half-width", type=float, default=None, help="grid half width L (default: sized to state)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oqo-engine",
        description="Operational quantum observables: propensities, OQOs and phase operators in a truncated Fock space.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qp-propensity", help="(q, p) propensity on a grid")
    _add_common(p)
    _add_state(p)
    _add_qp(p)

    p = sub.add_parser("qp-moments", help="operational, inverted and intrinsic quadrature moments")
    _add_common(p)
    _add_state(p)
    _add_qp(p)
    p.add_argument("--order", type=int, default=4, help="highest moment order")

    p = sub.add_parser("qp-spreads", help="operational spreads and the nbar + 1 bound")
    _add_common(p)
    _add_state(p)
    _add_qp(p)

    p = sub.add_parser("phase-propensity", help="phase propensity Pr(phi)")
    _add_common(p)
    _add_state(p)
    p.add_argument("--nphi", type=int, default=512, help="uniform phase points")
    p.add_argument("--phi0", type=float, default=-math.pi, help="window start")

    p = sub.add_parser("phasors", help="phasor matrices E^(n), |n| <= n-max")
    _add_common(p)
    p.add_argument("--n-max", type=int, default=6)

    p = sub.add_parser("phase-op", help="operational phase operator and its spectrum")
    _add_common(p)
    _add_state(p, required=False)
    p.add_argument("--n-max", type=int, default=400)
    p.add_argument("--phi0", type=float, default=-math.pi)
    p.add_argument("--smoothing", choices=["none", "cesaro"], default="none")
    p.add_argument("--eigenvectors", type=Path, default=None, help="also write eigenvectors as CSV")

    p = sub.add_parser("verify", help="run the invariant suite")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--states", type=int, default=5, help="random states per group")
    return parser


def resolve_state(args, dim: int) -> Optional[StateSpec]:
    """StateSpec from --config (JSON) or --state (compact string)."""
    if args.config is not None:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        data.setdefault("dim", dim)
        return StateSpec(**data)
    if args.state is not None:
        return StateSpec.from_compact(args.state, dim)
    if args.state_required:
        raise ConfigError("a state is required (--state or --config)")
    return None


def build_state(spec: StateSpec) -> DensityState:
    rho = make_state(spec)
    if not rho.faithful:
        raise ConfigError(f"state {spec.kind} is not faithful at dim={spec.dim} "
                          f"(tail mass {rho.tail_mass:.2e}); raise --dim")
    return rho


def _qp_setup(args, dim: int) -> Tuple[StateSpec, DensityState, QpModel, QpGridSpec]:
    spec = resolve_state(args, dim)
    rho = build_state(spec)
    model = QpModel(nbar=args.nbar, dim=dim)
    if args.half_width is not None:
        grid = QpGridSpec(half_width=args.half_width, points=args.points)
    else:
        grid = state_grid(rho, model, args.points)
    return spec, rho, model, grid


def _render(frame: pd.DataFrame, result, config: RunConfig) -> str:
    envelope = make_envelope(config, result)
    if config.format == "csv":
        return render_csv(frame, envelope)
    return render_json(envelope)


def cmd_qp_propensity(args, dim: int, fmt: str) -> Tuple[str, int]:
    spec, rho, model, grid = _qp_setup(args, dim)
    config = RunConfig(command=args.command, dim=dim, state=spec, nbar=args.nbar,
                       points=grid.points, half_width=grid.half_width, format=fmt)
    frame = propensity(rho, QpFilterFamily(model, grid)).to_frame()
    return _render(frame, frame.to_dict(orient="list"), config), 0


def cmd_qp_moments(args, dim: int, fmt: str) -> Tuple[str, int]:
    spec, rho, model, grid = _qp_setup(args, dim)
    config = RunConfig(command=args.command, dim=dim, state=spec, nbar=args.nbar, points=grid.points,
                       half_width=grid.half_width, order=args.order, format=fmt)
    frame = moment_table(rho, model, args.order, grid)
    return _render(frame, frame.to_dict(orient="records"), config), 0


def cmd_qp_spreads(args, dim: int, fmt: str) -> Tuple[str, int]:
    spec, rho, model, grid = _qp_setup(args, dim)
    config = RunConfig(command=args.command, dim=dim, state=spec, nbar=args.nbar,
                       points=grid.points, half_width=grid.half_width, format=fmt)
    report = spreads_and_bound(rho, model, grid)
    return _render(pd.DataFrame([report.model_dump()]), report.model_dump(), config), 0


def cmd_phase_propensity(args, dim: int, fmt: str) -> Tuple[str, int]:
    spec = resolve_state(args, dim)
    rho = build_state(spec)
    config = RunConfig(command=args.command, dim=dim, state=spec, nphi=args.nphi, phi0=args.phi0, format=fmt)
    frame = phase_propensity(rho, args.nphi, args.phi0).to_frame()
    return _render(frame, frame.to_dict(orient="list"), config), 0


def cmd_phasors(args, dim: int, fmt: str) -> Tuple[str, int]:
    config = RunConfig(command=args.command, dim=dim, n_max=args.n_max, format=fmt)
    frame = phasor_frame(phasor_set(args.n_max, dim))
    return _render(frame, frame.to_dict(orient="records"), config), 0


def cmd_phase_op(args, dim: int, fmt: str) -> Tuple[str, int]:
    spec = resolve_state(args, dim)
    cfg = PhaseOpConfig(phi0=args.phi0, n_max=args.n_max, smoothing=args.smoothing)
    config = RunConfig(command=args.command, dim=dim, state=spec, phi0=cfg.phi0, n_max=cfg.n_max,
                       smoothing=cfg.smoothing, format=fmt)
    spectrum = phase_spectrum_report(cfg, dim)
    result = {"spectrum": spectrum.report.model_dump()}
    if spec is not None:
        rho = build_state(spec)
        result["expectation"] = phase_expectation(rho, cfg)
        result["windowed_mean"] = phase_propensity(rho, 512, cfg.phi0).windowed_mean()
    if args.eigenvectors is not None:
        vectors = spectrum.decomposition.eigenvectors
        levels, index = np.indices(vectors.shape)
        frame = pd.DataFrame({"level": levels.ravel(), "index": index.ravel(),
                              "re": vectors.real.ravel(), "im": vectors.imag.ravel()})
        write_output(render_csv(frame, make_envelope(config.model_copy(update={"format": "csv"}))),
                     args.eigenvectors)
    return _render(operator_frame(phase_operator(cfg, dim)), result, config), 0


def cmd_verify(args, dim: int, fmt: str) -> Tuple[str, int]:
    config = RunConfig(command=args.command, dim=dim, seed=args.seed, states=args.states, format=fmt)
    summary = run_verification(dim, args.seed, args.states)
    code = 0 if summary.passed else 1
    if fmt == "text":
        return format_summary(summary), code
    frame = pd.DataFrame([check.model_dump() for check in summary.checks])
    return _render(frame, summary.model_dump(), config), code


COMMANDS: Dict[str, Callable] = {
    "qp-propensity": cmd_qp_propensity,
    "qp-moments": cmd_qp_moments,
    "qp-spreads": cmd_qp_spreads,
    "phase-propensity": cmd_phase_propensity,
    "phasors": cmd_phasors,
    "phase-op": cmd_phase_op,
    "verify": cmd_verify,
}


def _one_line(error: Exception) -> str:
    return "; ".join(line.strip() for line in str(error).splitlines() if line.strip())


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        level = logging.DEBUG if args.verbose else get_log_level()
        logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        dim = args.dim if args.dim is not None else get_default_dim()
        fmt = args.format or DEFAULT_FORMATS[args.command]
        text, code = COMMANDS[args.command](args, dim, fmt)
        if write_output(text, args.out) is None:
            sys.stdout.write(text)
    except (ValueError, OSError) as e:
        # OQOError and pydantic ValidationError are both ValueErrors
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
