"""
Truncated Fock-space linear algebra: operators, density states, displacement,
expectation values and hermitean eigendecomposition.

Convention: Q = (b + b^dag)/sqrt(2), P = (b - b^dag)/(i sqrt(2)), so that
(Q^2 + P^2 - 1)/2 = b^dag b and D(q, p) = exp(i p Q - i q P) displaces by
alpha = (q + i p)/sqrt(2).
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .errors import (
    CutoffError,
    DimensionMismatchError,
    InvalidDimensionError,
    NonHermitianError,
    OQOError,
)
from .schemas import StateSpec

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10
FAITHFUL_TAIL = 1e-8
LOW_BLOCK_FRACTION = 0.8
TAIL_FRACTION = 0.1
RESCALE_LIMIT = 1e100

Scalar = Union[int, float, complex]


def low_block(dim: int) -> int:
    """Size of the low 80% sub-block on which cutoff-polluted results are validated."""
    return max(1, int(math.ceil(LOW_BLOCK_FRACTION * dim)))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Complex D x D matrix in the Fock basis (immutable)."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidDimensionError(f"operator must be square, got shape {entries.shape}")
        if entries.shape[0] < 2:
            raise InvalidDimensionError(f"dimension must be >= 2, got {entries.shape[0]}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "FockOperator":
        return cls(np.eye(dim, dtype=complex))

    @classmethod
    def zeros(cls, dim: int) -> "FockOperator":
        return cls(np.zeros((dim, dim), dtype=complex))

    def adjoint(self) -> "FockOperator":
        return FockOperator(self.entries.conj().T)

    dag = adjoint

    def _check(self, other: "FockOperator"):
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimensions differ: {self.dim} vs {other.dim}")

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return FockOperator(self.entries @ other.entries)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return FockOperator(self.entries + other.entries)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._check(other)
        return FockOperator(self.entries - other.entries)

    def __mul__(self, scalar: Scalar) -> "FockOperator":
        return FockOperator(self.entries * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: Scalar) -> "FockOperator":
        return FockOperator(self.entries / scalar)

    def __neg__(self) -> "FockOperator":
        return FockOperator(-self.entries)

    def commutator(self, other: "FockOperator") -> "FockOperator":
        return self @ other - other @ self

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries)))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return self.hermiticity_residual() <= tol * max(1.0, self.max_abs())

    def block(self, levels: int) -> np.ndarray:
        return self.entries[:levels, :levels]

    def max_abs_diff(self, other: "FockOperator", levels: Optional[int] = None) -> float:
        """Entrywise max deviation, optionally restricted to the first `levels` levels."""
        self._check(other)
        levels = self.dim if levels is None else levels
        return float(np.max(np.abs(self.block(levels) - other.block(levels))))


@dataclass(frozen=True, eq=False)
class DensityState:
    """Hermitean, positive, unit-trace matrix on a D-level cutoff."""

    entries: np.ndarray
    tail_mass: float = field(init=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidDimensionError(f"density matrix must be square, got shape {entries.shape}")
        dim = entries.shape[0]
        if dim < 2:
            raise InvalidDimensionError(f"dimension must be >= 2, got {dim}")
        herm = float(np.max(np.abs(entries - entries.conj().T)))
        if herm > HERMITIAN_TOL:
            raise NonHermitianError(f"density matrix not hermitean (residual {herm:.3e})")
        trace = np.trace(entries).real
        if abs(trace - 1.0) > HERMITIAN_TOL:
            raise OQOError(f"density matrix trace is {trace!r}, expected 1")
        lowest = float(linalg.eigvalsh(entries)[0])
        if lowest < -POSITIVITY_TOL:
            raise OQOError(f"density matrix has negative eigenvalue {lowest:.3e}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

        cut = dim - max(1, int(math.ceil(TAIL_FRACTION * dim)))
        object.__setattr__(self, "tail_mass", float(np.sum(np.diag(entries).real[cut:])))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "DensityState":
        """Symmetrize and renormalize a (nearly) valid density matrix."""
        matrix = np.asarray(matrix, dtype=complex)
        matrix = 0.5 * (matrix + matrix.conj().T)
        return cls(matrix / np.trace(matrix).real)

    @classmethod
    def from_ket(cls, psi: np.ndarray) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def faithful(self) -> bool:
        return self.tail_mass < FAITHFUL_TAIL

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.entries, self.entries)))

    def as_operator(self) -> FockOperator:
        return FockOperator(self.entries)

    def mix(self, other: "DensityState", weight: float) -> "DensityState":
        """weight * self + (1 - weight) * other."""
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimensions differ: {self.dim} vs {other.dim}")
        return DensityState.from_matrix(weight * self.entries + (1.0 - weight) * other.entries)

    def rotated(self, theta: float) -> "DensityState":
        """exp(i theta n) rho exp(-i theta n)."""
        phases = np.exp(1j * theta * np.arange(self.dim))
        return DensityState.from_matrix(phases[:, None] * self.entries * phases.conj()[None, :])

    def support(self, tol: float = 1e-15) -> int:
        """Number of low levels outside of which all entries are below `tol`."""
        mags = np.abs(self.entries)
        active = np.nonzero((mags.max(axis=0) > tol) | (mags.max(axis=1) > tol))[0]
        return int(active[-1]) + 1 if active.size else 1


@dataclass(frozen=True, eq=False)
class LadderOperators:
    b: FockOperator
    b_dag: FockOperator
    num: FockOperator
    Q: FockOperator
    P: FockOperator

    @property
    def dim(self) -> int:
        return self.b.dim


@lru_cache(maxsize=32)
def build_operators(dim: int) -> LadderOperators:
    """Annihilation, creation, number and quadrature operators on a dim-level cutoff."""
    if dim < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {dim}")
    b = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    b_dag = b.conj().T
    ops = LadderOperators(
        b=FockOperator(b),
        b_dag=FockOperator(b_dag),
        num=FockOperator(b_dag @ b),
        Q=FockOperator((b + b_dag) / math.sqrt(2.0)),
        P=FockOperator((b - b_dag) / (1j * math.sqrt(2.0))),
    )
    logger.debug(f"Built ladder operators for dim={dim}")
    return ops


def coherent_amplitudes(alphas: np.ndarray, rows: int) -> np.ndarray:
    """
    Analytic coherent-state amplitudes exp(-|a|^2/2) a^m / sqrt(m!) for m < rows.

    Args:
        alphas: complex amplitudes, shape (G,)
        rows: number of Fock levels to return

    Returns:
        complex array of shape (G, rows)
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    m = np.arange(rows)
    radius = np.abs(alphas)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_powers = np.where(m[None, :] == 0, 0.0, m[None, :] * np.log(radius))
    log_mag = -0.5 * radius ** 2 + log_powers - 0.5 * gammaln(m + 1.0)[None, :]
    phase = np.exp(1j * m[None, :] * np.angle(alphas)[:, None])
    return np.exp(log_mag) * phase


def coherent_vector(alpha: complex, dim: int) -> np.ndarray:
    return coherent_amplitudes(np.array([alpha]), dim)[0]


def _laguerre_amplitudes(x: np.ndarray, count: int, offsets: int) -> np.ndarray:
    """
    f[g, a, n] = exp(-x/2) x^(a/2) sqrt(n!/(n+a)!) L_n^(a)(x) for a < offsets, n < count.

    The three-term Laguerre recurrence runs forward in n on the normalized values. Each
    (g, a) lane carries its own log scale so the start value exp(-x/2) x^(a/2)/sqrt(a!)
    never underflows before the recurrence lifts it.
    """
    a = np.arange(offsets, dtype=float)[None, :]
    x = np.asarray(x, dtype=float)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_powers = np.where(a == 0, 0.0, 0.5 * a * np.log(x))
    log_start = -0.5 * x + log_powers - 0.5 * gammaln(a + 1.0)
    started = np.isfinite(log_start)
    scale = np.where(started, log_start, 0.0)
    previous = np.zeros_like(scale)
    current = started.astype(float)

    out = np.empty((x.shape[0], offsets, count))
    out[:, :, 0] = current * np.exp(scale)
    for n in range(count - 1):
        following = ((2 * n + 1 + a - x) * current - np.sqrt(n * (n + a)) * previous) / np.sqrt((n + 1) * (n + 1 + a))
        previous, current = current, following
        size = np.maximum(np.abs(previous), np.abs(current))
        large = size > RESCALE_LIMIT
        if large.any():
            factor = np.where(large, size, 1.0)
            previous = previous / factor
            current = current / factor
            scale = scale + np.log(factor)
        out[:, :, n + 1] = current * np.exp(scale)
    return out


def displaced_number_block(alphas: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """
    Matrix elements <k|D(alpha)|m> for k < rows and m < cols, one block per amplitude.

    For k >= m the element is sqrt(m!/k!) alpha^(k-m) exp(-|alpha|^2/2) L_m^(k-m)(|alpha|^2);
    for k < m the roles of k and m swap and alpha becomes -conj(alpha). The rows are
    exact for any cutoff, and every entry has modulus at most 1.

    Returns:
        complex array of shape (G, rows, cols)
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    amplitudes = _laguerre_amplitudes(np.abs(alphas) ** 2, min(rows, cols), max(rows, cols))
    k, m = np.indices((rows, cols))
    offset = np.abs(k - m)
    angle = np.angle(alphas)[:, None, None]
    phase = np.where(k >= m, np.exp(1j * offset * angle), (-1.0) ** offset * np.exp(-1j * offset * angle))
    return amplitudes[:, offset, np.minimum(k, m)] * phase


def displaced_number_columns(alpha: complex, rows: int, m_max: int) -> np.ndarray:
    """Matrix with columns D(alpha)|m>, m < m_max, restricted to the first `rows` levels."""
    return displaced_number_block(np.array([alpha]), rows, m_max)[0]


def thermal_populations(nbar: float, count: int) -> np.ndarray:
    """(1/(nbar+1)) (nbar/(nbar+1))^m for m < count."""
    if nbar < 0:
        raise OQOError(f"nbar must be >= 0, got {nbar}")
    ratio = nbar / (nbar + 1.0)
    return np.power(ratio, np.arange(count, dtype=float)) / (nbar + 1.0)


def thermal_term_count(nbar: float, tol: float = 1e-16) -> int:
    """Number of thermal populations needed before the remaining tail drops below `tol`."""
    if nbar <= 0:
        return 1
    ratio = nbar / (nbar + 1.0)
    return int(math.ceil(math.log(tol) / math.log(ratio))) + 1


def _alpha(q: float, p: float) -> complex:
    return complex(q, p) / math.sqrt(2.0)


def displacement_faithful_levels(q: float, p: float, dim: int) -> int:
    """Low levels whose columns of D(q, p) stay inside the cutoff (capped at 80% of dim)."""
    radius = abs(_alpha(q, p))
    cap = low_block(dim)
    if radius < 1e-14:
        return cap
    root = math.sqrt(dim) - radius - 2.5
    if root <= 0:
        return 0
    return min(cap, int(math.floor(root ** 2)) + 1)


def displacement(q: float, p: float, dim: int) -> FockOperator:
    """
    D(q, p) = exp(i p Q - i q P) via scaling-and-squaring on a padded cutoff, compressed to dim.

    Raises:
        CutoffError: when |alpha|^2 = (q^2 + p^2)/2 exceeds dim/4
    """
    if dim < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {dim}")
    if not (math.isfinite(q) and math.isfinite(p)):
        raise OQOError(f"displacement must be finite, got q={q}, p={p}")
    alpha = _alpha(q, p)
    if abs(alpha) ** 2 > dim / 4.0:
        raise CutoffError(f"displacement |alpha|^2={abs(alpha) ** 2:.3g} too large for dim={dim}")
    if abs(alpha) == 0.0:
        return FockOperator.identity(dim)

    padded = int(math.ceil((math.sqrt(dim) + abs(alpha) + 6.0) ** 2))
    ops = build_operators(padded)
    generator = alpha * ops.b_dag.entries - np.conj(alpha) * ops.b.entries
    full = linalg.expm(generator)
    logger.debug(f"Displacement alpha={alpha:.4g} computed at padded dim {padded}")
    return FockOperator(full[:dim, :dim])


def displacement_alpha(alpha: complex, dim: int) -> FockOperator:
    return displacement(math.sqrt(2.0) * alpha.real, math.sqrt(2.0) * alpha.imag, dim)


def expectation(rho: DensityState, op: FockOperator) -> complex:
    """Tr(rho A)."""
    if rho.dim != op.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} differs from operator dim {op.dim}")
    return complex(np.einsum("ij,ji->", rho.entries, op.entries))


def expectation_real(rho: DensityState, op: FockOperator) -> float:
    value = expectation(rho, op)
    if abs(value.imag) > HERMITIAN_TOL * max(1.0, op.max_abs()):
        raise NonHermitianError(f"expectation has imaginary part {value.imag:.3e}")
    return value.real


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def residual(self, op: FockOperator) -> float:
        """max_k || A v_k - lambda_k v_k ||."""
        diff = op.entries @ self.eigenvectors - self.eigenvectors * self.eigenvalues[None, :]
        return float(np.max(np.linalg.norm(diff, axis=0)))


def hermitian_spectrum(op: FockOperator) -> SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors of a hermitean operator."""
    if not op.is_hermitian(1e-10):
        raise NonHermitianError(f"operator not hermitean (residual {op.hermiticity_residual():.3e})")
    values, vectors = linalg.eigh(0.5 * (op.entries + op.entries.conj().T))
    return SpectralDecomposition(eigenvalues=values, eigenvectors=vectors)


def _check_amplitude(alpha: complex, dim: int):
    if abs(alpha) ** 2 > dim / 4.0:
        raise CutoffError(f"|alpha|^2={abs(alpha) ** 2:.3g} exceeds dim/4={dim / 4.0:.3g}")


def _squeezed_vacuum(r: float, theta: float, dim: int) -> np.ndarray:
    """Amplitudes of exp((conj(z) b^2 - z b^dag^2)/2)|0>, z = r exp(i theta)."""
    psi = np.zeros(dim, dtype=complex)
    if r == 0.0:
        psi[0] = 1.0
        return psi
    m = np.arange((dim + 1) // 2)
    log_mag = (0.5 * gammaln(2 * m + 1.0) - m * math.log(2.0) - gammaln(m + 1.0)
               + m * math.log(math.tanh(r)) - 0.5 * math.log(math.cosh(r)))
    psi[2 * m] = np.exp(log_mag) * (-np.exp(1j * theta)) ** m
    return psi


def make_state(spec: StateSpec) -> DensityState:
    """
    Build a DensityState from a StateSpec.

    Raises:
        CutoffError: coherent/displaced amplitudes with |alpha|^2 > dim/4, or squeezing with
            sinh(r)^2 > dim/4
    """
    dim = spec.dim
    if spec.kind == "fock":
        matrix = np.zeros((dim, dim), dtype=complex)
        matrix[spec.n, spec.n] = 1.0
        state = DensityState(matrix)
    elif spec.kind == "coherent":
        _check_amplitude(spec.alpha, dim)
        state = DensityState.from_ket(coherent_vector(spec.alpha, dim))
    elif spec.kind == "thermal":
        state = DensityState.from_matrix(np.diag(thermal_populations(spec.nbar, dim)))
    elif spec.kind == "displaced_thermal":
        _check_amplitude(spec.alpha, dim)
        count = thermal_term_count(spec.nbar)
        weights = thermal_populations(spec.nbar, count)
        columns = displaced_number_columns(spec.alpha, dim, count)
        state = DensityState.from_matrix((columns * weights[None, :]) @ columns.conj().T)
    elif spec.kind == "random_mixed":
        support = spec.support or min(6, dim // 2)
        rng = np.random.default_rng(spec.seed)
        ginibre = rng.standard_normal((support, support)) + 1j * rng.standard_normal((support, support))
        matrix = np.zeros((dim, dim), dtype=complex)
        matrix[:support, :support] = ginibre @ ginibre.conj().T
        state = DensityState.from_matrix(matrix)
    elif spec.kind == "squeezed":
        if math.sinh(spec.r) ** 2 > dim / 4.0:
            raise CutoffError(f"squeezing r={spec.r} too strong for dim={dim}")
        state = DensityState.from_ket(_squeezed_vacuum(spec.r, spec.theta, dim))
    else:
        raise OQOError(f"unknown state kind {spec.kind!r}")

    if not state.faithful:
        logger.warning(f"⚠️  State {spec.kind} has tail mass {state.tail_mass:.3e} at dim={dim}")
    logger.debug(f"Built {spec.kind} state, dim={dim}, tail_mass={state.tail_mass:.3e}")
    return state
