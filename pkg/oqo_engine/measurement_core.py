"""
Generic measurement framework: filters, propensity densities, operational moment
operators (OQOs) and the two moment-generating functions.

Moments here are brute-force quadratures over the filter grid. They serve as the
oracle for the closed forms in qp_measurement and phase_nfm.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import CutoffError, DimensionMismatchError, GridCoverageError, OQOError
from .fock_core import DensityState, FockOperator, expectation
from .special_fn import ln_gamma

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-6
NEGATIVITY_TOL = 1e-12
TAIL_TOL = 1e-8


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PropensityGrid:
    """Sampled classical density Pr(a) with quadrature weights."""

    points: np.ndarray  # (G, d), d = 1 or 2
    weights: np.ndarray  # (G,)
    values: np.ndarray  # (G,)
    axes: Tuple[str, ...] = ("a1",)
    periodic: bool = False
    phi0: Optional[float] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        object.__setattr__(self, "points", _readonly(points))
        object.__setattr__(self, "weights", _readonly(self.weights))
        object.__setattr__(self, "values", _readonly(self.values))
        if not (points.shape[0] == self.weights.shape[0] == self.values.shape[0]):
            raise DimensionMismatchError("points, weights and values must have equal length")
        lowest = float(np.min(self.values))
        if lowest < -NEGATIVITY_TOL:
            raise GridCoverageError(f"propensity is negative ({lowest:.3e})")
        total = self.total()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise GridCoverageError(f"propensity integrates to {total!r} on this grid, expected 1")

    def total(self) -> float:
        return float(np.sum(self.weights * self.values))

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> complex:
        """sum_a w(a) f(a) Pr(a); f receives the (G, d) point array."""
        return complex(np.sum(self.weights * f(self.points) * self.values))

    def moment(self, n: int, axis: int = 0) -> float:
        return float(np.sum(self.weights * self.points[:, axis] ** n * self.values))

    def mean(self, axis: int = 0) -> float:
        return self.moment(1, axis)

    def variance(self, axis: int = 0) -> float:
        mean = self.mean(axis)
        return float(np.sum(self.weights * (self.points[:, axis] - mean) ** 2 * self.values))

    def circular_moment(self, n: int) -> complex:
        """integral e^{i n phi} Pr(phi) dphi over one period."""
        if not self.periodic:
            raise OQOError("circular moments need a periodic grid")
        return complex(np.sum(self.weights * np.exp(1j * n * self.points[:, 0]) * self.values))

    def windowed_mean(self) -> float:
        """integral_{phi0}^{phi0+2pi} phi Pr(phi) dphi, trapezoid with the end point folded in."""
        if not self.periodic or self.phi0 is None:
            raise OQOError("windowed mean needs a periodic grid with a window start")
        step = float(self.weights[0])
        rect = float(np.sum(self.weights * self.points[:, 0] * self.values))
        return rect + 0.5 * step * 2.0 * math.pi * float(self.values[0])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({f"a{i + 1}": self.points[:, i] for i in range(self.points.shape[1])})
        frame["weight"] = self.weights
        frame["pr"] = self.values
        return frame


class FilterFamily:
    """
    Map from classical grid points to positive operators F(a), plus the normalization k.

    Subclasses provide `op_at`; the batched `expectations`, `weighted_operator` and
    `diagonals` default to a per-point loop over `op_at`.
    """

    def __init__(self, dim: int, points: np.ndarray, weights: np.ndarray,
                 axes: Tuple[str, ...], periodic: bool = False, phi0: Optional[float] = None,
                 boundary: Optional[np.ndarray] = None):
        points = np.array(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        self.dim = dim
        self.points = _readonly(points)
        self.weights = _readonly(weights)
        self.axes = axes
        self.periodic = periodic
        self.phi0 = phi0
        self.boundary = _readonly(np.zeros(len(weights), dtype=bool) if boundary is None else boundary, bool)
        self.k = self._normalization()

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def operator_levels(self) -> int:
        """Levels filled by weighted_operator when no explicit block is requested."""
        return self.dim

    def _normalization(self) -> float:
        """k = 1 / sum_a w(a) <0|F(a)|0>, so that k * integral F = identity."""
        vacuum_total = float(np.sum(self.weights * self.diagonals(1)[:, 0]))
        if not math.isfinite(vacuum_total) or vacuum_total <= 0:
            raise GridCoverageError(f"filter not normalizable on this grid (total {vacuum_total!r})")
        return 1.0 / vacuum_total

    def op_at(self, index: int) -> FockOperator:
        raise NotImplementedError

    def expectations(self, rho: DensityState) -> np.ndarray:
        """Tr(rho F(a)) for every grid point."""
        return np.array([expectation(rho, self.op_at(g)).real for g in range(len(self))])

    def weighted_operator(self, coeffs: np.ndarray, levels: Optional[int] = None) -> FockOperator:
        """sum_a coeffs(a) F(a); only the first `levels` levels are filled when given."""
        levels = self.dim if levels is None else levels
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for g, c in enumerate(coeffs):
            if c != 0:
                total[:levels, :levels] += c * self.op_at(g).block(levels)
        return FockOperator(total)

    def diagonals(self, levels: int) -> np.ndarray:
        """<m|F(a)|m> for m < levels, shape (G, levels)."""
        return np.array([np.diag(self.op_at(g).entries)[:levels].real for g in range(len(self))])

    def tail_ratio(self, n: int, levels: int, axis: int = 0) -> float:
        """Largest share of sum_a w |a|^n <m|F(a)|m> carried by boundary points, over m < levels."""
        if self.periodic or not self.boundary.any():
            return 0.0
        integrand = (self.weights * np.abs(self.points[:, axis]) ** n)[:, None] * self.diagonals(levels)
        totals = integrand.sum(axis=0)
        edge = integrand[self.boundary].sum(axis=0)
        return float(np.max(edge / totals))

    def check_coverage(self, n: int, levels: int, axis: int = 0):
        ratio = self.tail_ratio(n, levels, axis)
        if ratio > TAIL_TOL:
            raise GridCoverageError(
                f"grid tail carries {ratio:.2e} of the order-{n} moment integrand (limit {TAIL_TOL})")


def phase_grid(n_phi: int, phi0: float) -> Tuple[np.ndarray, np.ndarray]:
    """phi_j = phi0 + 2 pi j / N with weights 2 pi / N."""
    if n_phi < 4:
        raise OQOError(f"phase grid needs at least 4 points, got {n_phi}")
    phis = phi0 + 2.0 * math.pi * np.arange(n_phi) / n_phi
    return phis, np.full(n_phi, 2.0 * math.pi / n_phi)


def radial_moment_matrix(dim: int) -> np.ndarray:
    """g_mn = Gamma((m+n)/2 + 1) / sqrt(m! n!), the radial integrals of the Q function."""
    m = np.arange(dim)
    half_sum = 0.5 * (m[:, None] + m[None, :]) + 1.0
    log_fact = ln_gamma(m + 1.0)
    return np.exp(ln_gamma(half_sum) - 0.5 * (log_fact[:, None] + log_fact[None, :]))


class PhaseFilterFamily(FilterFamily):
    """Phase filter <m|F(phi)|n> = g_mn e^{i(m-n) phi}, evaluated through its Fourier structure."""

    def __init__(self, dim: int, n_phi: int, phi0: float = -math.pi):
        phis, weights = phase_grid(n_phi, phi0)
        self.radial = _readonly(radial_moment_matrix(dim))
        self.offsets = np.arange(-(dim - 1), dim)
        super().__init__(dim, phis, weights, axes=("phi",), periodic=True, phi0=phi0)

    def op_at(self, index: int) -> FockOperator:
        phi = self.points[index, 0]
        m = np.arange(self.dim)
        return FockOperator(self.radial * np.exp(1j * (m[:, None] - m[None, :]) * phi))

    def expectations(self, rho: DensityState) -> np.ndarray:
        if rho.dim != self.dim:
            raise DimensionMismatchError(f"state dim {rho.dim} differs from filter dim {self.dim}")
        weighted = rho.entries * self.radial
        # c_d = sum over rho_mn g_mn with n - m = d
        coeffs = np.array([np.sum(np.diagonal(weighted, offset=d)) for d in self.offsets])
        phases = np.exp(1j * np.outer(self.points[:, 0], self.offsets))
        return (phases @ coeffs).real

    def weighted_operator(self, coeffs: np.ndarray, levels: Optional[int] = None) -> FockOperator:
        # s_d = sum_j c_j e^{i d phi_j}, entry (m, n) picks d = m - n
        sums = np.exp(1j * np.outer(self.offsets, self.points[:, 0])) @ np.asarray(coeffs, dtype=complex)
        m = np.arange(self.dim)
        index = (m[:, None] - m[None, :]) + (self.dim - 1)
        total = self.radial * sums[index]
        if levels is not None and levels < self.dim:
            total[levels:, :] = 0.0
            total[:, levels:] = 0.0
        return FockOperator(total)

    def diagonals(self, levels: int) -> np.ndarray:
        return np.tile(np.diag(self.radial)[:levels], (len(self), 1))


def phase_filter(dim: int, n_phi: int = 512, phi0: float = -math.pi) -> PhaseFilterFamily:
    return PhaseFilterFamily(dim, n_phi, phi0)


def propensity(rho: DensityState, family: FilterFamily) -> PropensityGrid:
    """
    Pr(a) = k Tr(rho F(a)) on the filter grid.

    Raises:
        CutoffError: rho carries population in the top levels of the cutoff
        GridCoverageError: the result does not normalize on the grid
    """
    if rho.dim != family.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} differs from filter dim {family.dim}")
    if not rho.faithful:
        raise CutoffError(f"state tail mass {rho.tail_mass:.3e} too large for dim={rho.dim}")
    values = family.k * family.expectations(rho)
    logger.debug(f"Propensity on {len(family)} points, total={np.sum(family.weights * values):.12g}")
    return PropensityGrid(points=family.points, weights=family.weights, values=values,
                          axes=family.axes, periodic=family.periodic, phi0=family.phi0)


def oqo_weighted(family: FilterFamily, f: Callable[[np.ndarray], np.ndarray],
                 levels: Optional[int] = None) -> FockOperator:
    """k * integral f(a) F(a) da for a classical function f of the (G, d) points."""
    coeffs = family.weights * f(family.points)
    return family.k * family.weighted_operator(coeffs, levels)


def oqo_moment(family: FilterFamily, n: int, axis: int = 0, levels: Optional[int] = None) -> FockOperator:
    """
    A_F^(n) = k * integral a^n F(a) da.

    Args:
        family: filter family
        n: moment order
        axis: coordinate a_axis used for the moment
        levels: compute only the top-left levels x levels block

    Raises:
        GridCoverageError: the grid boundary carries more than 1e-8 of the integrand
    """
    if n < 0:
        raise OQOError(f"moment order must be >= 0, got {n}")
    checked = family.operator_levels if levels is None else min(levels, family.operator_levels)
    family.check_coverage(n, checked, axis)
    return oqo_weighted(family, lambda pts: pts[:, axis] ** n, levels)


def classical_moments(grid: PropensityGrid, n_max: int, axis: int = 0) -> List[float]:
    """[m_0, m_1, ..., m_n_max] of the propensity along one axis."""
    return [grid.moment(n, axis) for n in range(n_max + 1)]


def generating_Z(rho: DensityState, op: FockOperator, lam: complex) -> complex:
    """Z(lambda) = Tr(rho exp(lambda A))."""
    if rho.dim != op.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} differs from operator dim {op.dim}")
    growth = abs(complex(lam).real) * np.linalg.norm(op.entries, 2) if lam != 0 else 0.0
    if growth > 700.0:
        raise OQOError(f"exp(lambda A) overflows (|Re lambda| * ||A|| = {growth:.3g})")
    value = complex(np.einsum("ij,ji->", rho.entries, linalg.expm(complex(lam) * op.entries)))
    if not np.isfinite(value):
        raise OQOError(f"Z({lam}) is not finite")
    return value


def generating_ZF(grid: PropensityGrid, lam: Union[complex, Sequence[complex]]) -> complex:
    """
    Z_F(lambda) = integral e^{lambda . a} Pr(a) da.

    `lam` is a scalar on 1-D grids and a pair on 2-D grids.
    """
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))
    if lams.shape[0] != grid.points.shape[1]:
        raise DimensionMismatchError(f"lambda has {lams.shape[0]} components for a {grid.points.shape[1]}-D grid")
    exponent = grid.points @ lams
    integrand = grid.weights * np.exp(exponent) * grid.values
    if not grid.periodic:
        edge = _grid_edge(grid.points)
        magnitude = np.abs(integrand)
        total = float(np.sum(magnitude))
        if total > 0 and float(np.sum(magnitude[edge])) > TAIL_TOL * total:
            raise GridCoverageError(f"e^(lambda a) Pr(a) not negligible at the grid edge for lambda={lam}")
    return complex(np.sum(integrand))


def _grid_edge(points: np.ndarray) -> np.ndarray:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    return np.any((points == lo) | (points == hi), axis=1)
