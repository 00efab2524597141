"""
Position/momentum measurement with a thermal reference oscillator.

The filter is the reference's thermal state displaced to (q, p):
F(q, p) = D(q, p) rho_th(nbar) D(q, p)^dag = sum_m p_m |alpha, m><alpha, m|,
with |alpha, m> the displaced number states and p_m the thermal populations.
"""

import logging
import math
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import CutoffError, DimensionMismatchError, OQOError
from .fock_core import (
    FAITHFUL_TAIL,
    DensityState,
    FockOperator,
    build_operators,
    displaced_number_block,
    displaced_number_columns,
    displacement,
    expectation_real,
    low_block,
    thermal_populations,
    thermal_term_count,
)
from .measurement_core import FilterFamily, classical_moments, oqo_weighted, propensity
from .schemas import QpGridSpec, QpModel, SpreadReport
from .special_fn import hermite_mod_coeffs, hermite_operator

logger = logging.getLogger(__name__)

MAX_OQO_ORDER = 10
EQUALITY_TOL = 1e-6
CHUNK_ENTRIES = 2 ** 20
AXES = ("q", "p")


def trapezoid_axis(half_width: float, points: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes = np.linspace(-half_width, half_width, points)
    step = nodes[1] - nodes[0]
    weights = np.full(points, step)
    weights[[0, -1]] = 0.5 * step
    return nodes, weights


class QpFilterFamily(FilterFamily):
    """
    Displaced thermal filter on a square (q, p) trapezoid grid.

    The batched paths only ever need the rows of D(q, p)|m> below a level bound, and
    those rows are exact however far the point sits from the origin. `op_at` builds the
    whole filter on the cutoff and refuses points whose filter leaks past it.
    """

    def __init__(self, model: QpModel, grid: QpGridSpec):
        nodes, axis_weights = trapezoid_axis(grid.half_width, grid.points)
        q, p = np.meshgrid(nodes, nodes, indexing="ij")
        weights = np.outer(axis_weights, axis_weights).ravel()
        edge = np.zeros((grid.points, grid.points), dtype=bool)
        edge[[0, -1], :] = True
        edge[:, [0, -1]] = True

        self.model = model
        self.grid = grid
        self.alphas = (q.ravel() + 1j * p.ravel()) / math.sqrt(2.0)
        self.populations = thermal_populations(model.nbar, thermal_term_count(model.nbar))
        super().__init__(model.dim, np.column_stack([q.ravel(), p.ravel()]), weights,
                         axes=AXES, boundary=edge.ravel())
        logger.debug(f"qp filter: nbar={model.nbar}, L={grid.half_width:.4g}, "
                     f"{grid.points}^2 points, {len(self.populations)} thermal terms, k={self.k:.12g}")

    @property
    def operator_levels(self) -> int:
        levels = self.grid.resolved_levels
        return self.dim if levels is None else min(levels, self.dim)

    def _blocks(self, rows: int) -> Iterator[Tuple[slice, np.ndarray]]:
        terms = len(self.populations)
        step = max(1, CHUNK_ENTRIES // (rows * terms))
        for start in range(0, len(self), step):
            window = slice(start, min(start + step, len(self)))
            yield window, displaced_number_block(self.alphas[window], rows, terms)

    def op_at(self, index: int) -> FockOperator:
        """
        Full filter F(q, p) on the cutoff.

        Raises:
            CutoffError: when Tr F(q, p) on the cutoff falls more than FAITHFUL_TAIL below 1
        """
        columns = displaced_number_columns(self.alphas[index], self.dim, len(self.populations))
        op = FockOperator((columns * self.populations[None, :]) @ columns.conj().T)
        leak = 1.0 - op.trace().real
        if leak > FAITHFUL_TAIL:
            q, p = self.points[index]
            raise CutoffError(f"filter at (q, p)=({q:.4g}, {p:.4g}) leaks {leak:.3e} "
                              f"past dim={self.dim}; raise the dimension or shrink the grid")
        return op

    def expectations(self, rho: DensityState) -> np.ndarray:
        if rho.dim != self.dim:
            raise DimensionMismatchError(f"state dim {rho.dim} differs from filter dim {self.dim}")
        rows = rho.support()
        block = rho.entries[:rows, :rows]
        out = np.empty(len(self))
        for window, amps in self._blocks(rows):
            applied = np.einsum("kl,glm->gkm", block, amps)
            out[window] = np.einsum("gkm,gkm,m->g", amps.conj(), applied, self.populations).real
        return out

    def weighted_operator(self, coeffs: np.ndarray, levels: Optional[int] = None) -> FockOperator:
        rows = self.operator_levels if levels is None else min(levels, self.dim)
        coeffs = np.asarray(coeffs, dtype=complex)
        roots = np.sqrt(self.populations)
        block = np.zeros((rows, rows), dtype=complex)
        for window, amps in self._blocks(rows):
            scaled = (amps * roots[None, None, :]).transpose(1, 0, 2).reshape(rows, -1)
            c = np.repeat(coeffs[window], len(roots))
            block += (scaled * c[None, :]) @ scaled.conj().T
        total = np.zeros((self.dim, self.dim), dtype=complex)
        total[:rows, :rows] = block
        return FockOperator(total)

    def diagonals(self, levels: int) -> np.ndarray:
        out = np.empty((len(self), levels))
        for window, amps in self._blocks(levels):
            out[window] = (np.abs(amps) ** 2) @ self.populations
        return out


def default_operator_grid(model: QpModel) -> QpGridSpec:
    return QpGridSpec.for_levels(model.nbar, low_block(model.dim))


def qp_filter(model: QpModel, grid: Optional[QpGridSpec] = None) -> QpFilterFamily:
    """
    Displaced thermal filter family for the model.

    The grid is taken from the argument, then from the model, then defaults to one
    resolving the low 80% of the cutoff.
    """
    grid = grid or model.grid or default_operator_grid(model)
    family = QpFilterFamily(model, grid)
    if abs(family.k - 1.0 / (2.0 * math.pi)) > 1e-6:
        logger.warning(f"⚠️  qp filter normalization k={family.k:.9g} differs from 1/(2 pi)")
    return family


def state_grid(rho: DensityState, model: QpModel, points: int = 129) -> QpGridSpec:
    mean_number = expectation_real(rho, build_operators(rho.dim).num)
    return QpGridSpec.for_state(mean_number, model.nbar, points)


def qp_propensity(rho: DensityState, model: QpModel, grid: Optional[QpGridSpec] = None):
    """Propensity on the given grid, or on one sized to the state and the reference noise."""
    grid = grid or model.grid or state_grid(rho, model)
    return propensity(rho, QpFilterFamily(model, grid))


def zf_closed_form(rho: DensityState, model: QpModel, lam: float, mu: float) -> complex:
    """
    Z_F(lambda, mu) = <exp(i lambda Q - i mu P)> exp(-(2 nbar + 1)(lambda^2 + mu^2) / 4).

    The intrinsic characteristic function is Tr(rho D(q=mu, p=lambda)).
    """
    if rho.dim != model.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} differs from model dim {model.dim}")
    intrinsic = complex(np.einsum("ij,ji->", rho.entries, displacement(mu, lam, rho.dim).entries))
    noise = math.exp(-0.25 * model.noise_scale ** 2 * (lam ** 2 + mu ** 2))
    return intrinsic * noise


def hermite_oqo(model: QpModel, axis: str, n: int) -> FockOperator:
    """Q_F^(n) = ((1/2i) s)^n H_n(i Q / s), s = sqrt(2 nbar + 1); same form for P."""
    if axis not in AXES:
        raise OQOError(f"axis must be 'q' or 'p', got {axis!r}")
    if n < 0 or n > MAX_OQO_ORDER:
        raise OQOError(f"OQO order must be in [0, {MAX_OQO_ORDER}], got {n}")
    ops = build_operators(model.dim)
    quadrature = ops.Q if axis == "q" else ops.P
    return hermite_operator(hermite_mod_coeffs(n, model.noise_scale), quadrature)


def _moment_map(order: int, nbar: float) -> np.ndarray:
    """Lower-triangular C with m_n = sum_j C[n, j] <Q^j>, rows and columns 0..order."""
    scale = math.sqrt(2.0 * nbar + 1.0)
    table = np.zeros((order + 1, order + 1))
    for n in range(order + 1):
        table[n, : n + 1] = hermite_mod_coeffs(n, scale).coefficients
    return table


def operational_from_intrinsic(intrinsic: Sequence[float], nbar: float) -> List[float]:
    """Operational moments m_1..m_N from intrinsic moments <Q^1>..<Q^N>."""
    values = np.asarray(intrinsic, dtype=float)
    if values.size > MAX_OQO_ORDER:
        raise OQOError(f"at most {MAX_OQO_ORDER} moments supported, got {values.size}")
    table = _moment_map(values.size, nbar)
    return list(table[1:, 0] + table[1:, 1:] @ values)


def intrinsic_from_operational(measured: Sequence[float], nbar: float) -> List[float]:
    """Invert the triangular moment map: <Q^1>..<Q^N> from measured m_1..m_N."""
    values = np.asarray(measured, dtype=float)
    if values.size > MAX_OQO_ORDER:
        raise OQOError(f"at most {MAX_OQO_ORDER} moments supported, got {values.size}")
    table = _moment_map(values.size, nbar)
    solved = linalg.solve_triangular(table[1:, 1:], values - table[1:, 0], lower=True, unit_diagonal=True)
    return list(solved)


def mixed_qp_oqo(family: QpFilterFamily, levels: Optional[int] = None) -> FockOperator:
    """k * integral q p F(q, p), the operational version of the mixed moment."""
    return oqo_weighted(family, lambda pts: pts[:, 0] * pts[:, 1], levels)


def symmetrized_qp(dim: int) -> FockOperator:
    ops = build_operators(dim)
    return 0.5 * (ops.Q @ ops.P + ops.P @ ops.Q)


def spreads_and_bound(rho: DensityState, model: QpModel, grid: Optional[QpGridSpec] = None) -> SpreadReport:
    """Operational spreads from the propensity, intrinsic ones from Q and P, and the nbar + 1 bound."""
    ops = build_operators(rho.dim)
    pr = qp_propensity(rho, model, grid)
    dq = math.sqrt(pr.variance(0))
    dp = math.sqrt(pr.variance(1))
    DQ = math.sqrt(expectation_real(rho, ops.Q @ ops.Q) - expectation_real(rho, ops.Q) ** 2)
    DP = math.sqrt(expectation_real(rho, ops.P @ ops.P) - expectation_real(rho, ops.P) ** 2)
    floor = 1.0 / math.sqrt(2.0)
    report = SpreadReport(
        dq=dq, dp=dp, DQ=DQ, DP=DP,
        lhs=dq * dp, rhs=model.nbar + 1.0, margin=dq * dp - (model.nbar + 1.0),
        equality_case=abs(DQ - floor) < EQUALITY_TOL and abs(DP - floor) < EQUALITY_TOL,
    )
    logger.debug(f"Spreads: dq={dq:.12g}, dp={dp:.12g}, margin={report.margin:.3e}")
    return report


def moment_table(rho: DensityState, model: QpModel, order: int,
                 grid: Optional[QpGridSpec] = None) -> pd.DataFrame:
    """Per axis and order: measured moment, intrinsic moment by inversion, and <Q^n> directly."""
    ops = build_operators(rho.dim)
    pr = qp_propensity(rho, model, grid)
    rows = []
    for index, axis in enumerate(AXES):
        measured = classical_moments(pr, order, index)[1:]
        inverted = intrinsic_from_operational(measured, model.nbar)
        quadrature = ops.Q if axis == "q" else ops.P
        power = FockOperator.identity(rho.dim)
        for n in range(1, order + 1):
            power = power @ quadrature
            rows.append({"axis": axis, "n": n, "operational": measured[n - 1],
                         "intrinsic": inverted[n - 1], "direct": expectation_real(rho, power)})
    return pd.DataFrame(rows)


def classical_limit_report(rho: DensityState, model: QpModel, n_max: int = 4,
                           steps: int = 4) -> pd.DataFrame:
    """
    Intrinsic <Q^n> against the operational <Q_F^(n)> while nbar is lowered to 0.

    The offsets that remain at nbar = 0 are the vacuum-noise constants of the moment map.
    """
    ops = build_operators(rho.dim)
    nbars = [model.nbar * (0.1 ** i) for i in range(steps)] + [0.0]
    rows = []
    power = FockOperator.identity(rho.dim)
    intrinsic = []
    for _ in range(n_max):
        power = power @ ops.Q
        intrinsic.append(expectation_real(rho, power))
    for nbar in nbars:
        reduced = model.model_copy(update={"nbar": nbar})
        for n in range(1, n_max + 1):
            operational = expectation_real(rho, hermite_oqo(reduced, "q", n))
            rows.append({"nbar": nbar, "n": n, "intrinsic": intrinsic[n - 1],
                         "operational": operational, "offset": operational - intrinsic[n - 1]})
    return pd.DataFrame(rows)
