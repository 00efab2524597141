"""
Operational phase from the radially integrated Q function.

Phasors E^(n) reproduce the circular moments of the phase propensity; every other
periodic OQO, including the windowed phase operator Phi_F, is a Fourier series in them.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import mpmath
import numpy as np

from .errors import CutoffError, OQOError, SeriesConvergenceError
from .fock_core import (
    DensityState,
    FockOperator,
    SpectralDecomposition,
    expectation_real,
    hermitian_spectrum,
    low_block,
)
from .measurement_core import PropensityGrid, phase_filter, phase_grid, propensity
from .schemas import PhaseOpConfig, SpectrumReport
from .special_fn import confluent_M, fourier_coefficients, gamma_ratio, gauss_laguerre_rule, ln_gamma

logger = logging.getLogger(__name__)

MAX_HYPERGEOMETRIC_ORDER = 8
MAX_HYPERGEOMETRIC_DIM = 120
SERIES_DPS = (60, 90)
SERIES_AGREEMENT = 1e-13
HISTOGRAM_BINS = 16
COEFFICIENT_SYMMETRY_TOL = 1e-12


def phase_propensity(rho: DensityState, n_phi: int = 512, phi0: float = -math.pi) -> PropensityGrid:
    """
    Pr(phi) = (1/2pi) sum_mn rho_mn Gamma((m+n)/2 + 1) / sqrt(m! n!) e^{i(n-m) phi}.

    The radial integral of the Q function is done analytically through the phase filter.
    """
    return propensity(rho, phase_filter(rho.dim, n_phi, phi0))


def phase_propensity_quadrature(rho: DensityState, n_phi: int = 512, phi0: float = -math.pi,
                                nodes: int = 128) -> PropensityGrid:
    """
    Pr(phi) from Gauss-Laguerre quadrature of <beta|rho|beta> along the ray beta = sqrt(t) e^{i phi}.

    The unnormalized Q function q(r) is split into its even part in r (integer powers of t,
    standard rule) and its odd part divided by sqrt(t) (generalized rule with weight t^(1/2)).
    """
    if not rho.faithful:
        raise CutoffError(f"state tail mass {rho.tail_mass:.3e} too large for dim={rho.dim}")
    phis, weights = phase_grid(n_phi, phi0)
    t_even, w_even = gauss_laguerre_rule(nodes, 0.0)
    t_odd, w_odd = gauss_laguerre_rule(nodes, 0.5)
    level = np.arange(rho.dim)

    def radial(t: np.ndarray) -> np.ndarray:
        # r^m / sqrt(m!) for r = sqrt(t), in log space
        return np.exp(0.5 * np.log(t)[:, None] * level[None, :] - 0.5 * ln_gamma(level + 1.0)[None, :])

    amp_even = radial(t_even)
    amp_odd = radial(t_odd)
    sign = (-1.0) ** level
    rho_t = rho.entries.T

    def q_value(amplitudes: np.ndarray) -> np.ndarray:
        return np.sum(amplitudes.conj() * (amplitudes @ rho_t), axis=1).real

    values = np.empty(n_phi)
    for j, phi in enumerate(phis):
        turn = np.exp(1j * level * phi)[None, :]
        plus = q_value(amp_even * turn)
        minus = q_value(amp_even * turn * sign)
        even = 0.5 * (plus + minus)
        plus_o = q_value(amp_odd * turn)
        minus_o = q_value(amp_odd * turn * sign)
        odd = 0.5 * (plus_o - minus_o) / np.sqrt(t_odd)
        values[j] = (np.sum(w_even * even) + np.sum(w_odd * odd)) / (2.0 * math.pi)
    return PropensityGrid(points=phis, weights=weights, values=values, axes=("phi",),
                          periodic=True, phi0=phi0)


def phasor(n: int, dim: int) -> FockOperator:
    """
    E^(n) = (N + n/2)! / (N + n)! b^n, i.e. <m|E^(n)|m+n> = Gamma(m + n/2 + 1) / sqrt(m! (m+n)!).

    Negative n gives the adjoint of E^(|n|).
    """
    if abs(n) >= dim:
        raise OQOError(f"phasor order |n|={abs(n)} needs dim > {abs(n)}, got {dim}")
    if n < 0:
        return phasor(-n, dim).adjoint()
    m = np.arange(dim - n, dtype=float)
    log_entries = ln_gamma(m + 0.5 * n + 1.0) - 0.5 * (ln_gamma(m + 1.0) + ln_gamma(m + n + 1.0))
    return FockOperator(np.diag(np.exp(log_entries), k=n))


def _normal_ordered_diagonal(n: int, dim: int, dps: int):
    """sum_k (n/2)_k / ((n+1)_k k!) (-1)^k m!/(m-k)! for m < dim - n, at `dps` digits."""
    diagonal = []
    with mpmath.workdps(dps):
        a = mpmath.mpf(n) / 2
        b = mpmath.mpf(n + 1)
        for m in range(dim - n):
            term = mpmath.mpf(1)
            total = mpmath.mpf(1)
            for k in range(1, m + 1):
                term *= -(m - k + 1) * (a + k - 1) / (k * (b + k - 1))
                total += term
            diagonal.append(total)
    return diagonal


def phasor_hypergeometric(n: int, dim: int) -> FockOperator:
    """
    E^(n) from its normally ordered form (n/2)!/n! :M(n/2, n+1, -N): b^n.

    :N^k: acts as the falling factorial m!/(m-k)! on |m>; the alternating series is summed
    at two working precisions which must agree.
    """
    if n < 0 or n > MAX_HYPERGEOMETRIC_ORDER:
        raise OQOError(f"hypergeometric phasor order must be in [0, {MAX_HYPERGEOMETRIC_ORDER}], got {n}")
    if dim > MAX_HYPERGEOMETRIC_DIM:
        raise OQOError(f"hypergeometric phasor needs dim <= {MAX_HYPERGEOMETRIC_DIM}, got {dim}")
    if n >= dim:
        raise OQOError(f"phasor order {n} needs dim > {n}, got {dim}")
    coarse, fine = (_normal_ordered_diagonal(n, dim, dps) for dps in SERIES_DPS)
    for m, (lo, hi) in enumerate(zip(coarse, fine)):
        if abs(lo - hi) > SERIES_AGREEMENT * max(abs(hi), mpmath.mpf("1e-300")):
            raise SeriesConvergenceError(f"normal-ordered series for n={n}, m={m} did not settle")

    m = np.arange(dim - n, dtype=float)
    lowering = np.exp(0.5 * (ln_gamma(m + n + 1.0) - ln_gamma(m + 1.0)))
    prefactor = gamma_ratio(0.5 * n + 1.0, n + 1.0)
    entries = prefactor * np.array([float(v) for v in fine]) * lowering
    return FockOperator(np.diag(entries, k=n))


@dataclass(frozen=True, eq=False)
class PhasorSet:
    dim: int
    n_max: int
    ops: Dict[int, FockOperator]

    def __getitem__(self, n: int) -> FockOperator:
        return self.ops[n]


def phasor_set(n_max: int, dim: int) -> PhasorSet:
    if n_max < 0 or n_max >= dim:
        raise OQOError(f"n_max must be in [0, {dim - 1}], got {n_max}")
    ops = {0: FockOperator.identity(dim)}
    for n in range(1, n_max + 1):
        ops[n] = phasor(n, dim)
        ops[-n] = ops[n].adjoint()
    return PhasorSet(dim=dim, n_max=n_max, ops=ops)


def susskind_glogower(dim: int) -> FockOperator:
    """Intrinsic exponential-of-phase operator sum_m |m><m+1|."""
    return FockOperator(np.diag(np.ones(dim - 1), k=1))


def coherent_phasor_expectation(alpha: complex, n: int) -> complex:
    """<alpha|E^(n)|alpha> = (n/2)!/n! M(n/2, n+1, -|alpha|^2) alpha^n (conjugated for n < 0)."""
    order = abs(n)
    value = gamma_ratio(0.5 * order + 1.0, order + 1.0) * confluent_M(0.5 * order, order + 1.0, -abs(alpha) ** 2)
    value = value * complex(alpha) ** order
    return value.conjugate() if n < 0 else complex(value)


def periodic_oqo(coeffs: Mapping[int, complex], n_max: int, dim: int, hermitian: bool = True) -> FockOperator:
    """
    G_F = sum_{|n| <= n_max} c_n E^(n) with c_n = (1/2pi) integral e^{-i n phi} g(phi) dphi.

    Orders at or beyond dim vanish in the cutoff and are skipped.
    """
    if hermitian:
        for n, c in coeffs.items():
            partner = coeffs.get(-n, 0.0)
            if abs(partner - complex(c).conjugate()) > COEFFICIENT_SYMMETRY_TOL * max(1.0, abs(c)):
                raise OQOError(f"coefficients c_{n} and c_{-n} are not conjugate")
    total = np.zeros((dim, dim), dtype=complex)
    for n, c in coeffs.items():
        if abs(n) <= n_max and abs(n) < dim and c != 0:
            total += c * phasor(n, dim).entries
    return FockOperator(total)


def periodic_oqo_from_samples(samples: np.ndarray, n_max: int, dim: int,
                              phi_start: float = -math.pi) -> FockOperator:
    """G_F for g sampled on phi_j = phi_start + 2 pi j / N, keeping the orders |n| <= n_max."""
    samples = np.asarray(samples)
    coeffs = fourier_coefficients(samples, n_max, phi_start)
    logger.debug(f"Periodic OQO from {samples.shape[0]} samples, n_max={n_max}, dim={dim}")
    return periodic_oqo(coeffs, n_max, dim, hermitian=bool(np.isrealobj(samples)))


def cosine_operator(dim: int) -> FockOperator:
    return periodic_oqo({1: 0.5, -1: 0.5}, 1, dim)


def sine_operator(dim: int) -> FockOperator:
    return periodic_oqo({1: -0.5j, -1: 0.5j}, 1, dim)


def cosine_squared_operator(dim: int) -> FockOperator:
    return periodic_oqo({0: 0.5, 2: 0.25, -2: 0.25}, 2, dim)


def sawtooth_weights(n_max: int, smoothing: str = "none") -> np.ndarray:
    """Damping sigma_n for n = 1..n_max: ones, or Fejer 1 - n/(n_max + 1)."""
    n = np.arange(1, n_max + 1, dtype=float)
    if smoothing == "none":
        return np.ones_like(n)
    if smoothing == "cesaro":
        return 1.0 - n / (n_max + 1.0)
    raise OQOError(f"unknown smoothing {smoothing!r}")


def phase_operator(cfg: PhaseOpConfig, dim: int) -> FockOperator:
    """
    Phi_F = (phi0 + pi) + sum_n sigma_n (i/n)(e^{-i n phi0} E^(n) - e^{i n phi0} E^(-n)).
    """
    sigma = sawtooth_weights(cfg.n_max, cfg.smoothing)
    total = (cfg.phi0 + math.pi) * np.eye(dim, dtype=complex)
    for n in range(1, min(cfg.n_max, dim - 1) + 1):
        raised = phasor(n, dim).entries
        coeff = sigma[n - 1] * (1j / n) * np.exp(-1j * n * cfg.phi0)
        total += coeff * raised + np.conj(coeff) * raised.conj().T
    logger.debug(f"Phase operator: dim={dim}, n_max={cfg.n_max}, smoothing={cfg.smoothing}")
    return FockOperator(total)


def phase_expectation(rho: DensityState, cfg: PhaseOpConfig) -> float:
    return expectation_real(rho, phase_operator(cfg, rho.dim))


@dataclass(frozen=True, eq=False)
class PhaseSpectrum:
    report: SpectrumReport
    decomposition: SpectralDecomposition


def phase_spectrum_report(cfg: PhaseOpConfig, dim: int) -> PhaseSpectrum:
    """Eigenvalues of Phi_F, their excess over the window, and an eigenvalue histogram."""
    op = phase_operator(cfg, dim)
    decomposition = hermitian_spectrum(op)
    values = decomposition.eigenvalues
    lower, upper = cfg.phi0, cfg.phi0 + 2.0 * math.pi
    excess = max(0.0, lower - float(values[0]), float(values[-1]) - upper)
    counts, edges = np.histogram(values, bins=HISTOGRAM_BINS, range=(lower, upper))
    report = SpectrumReport(
        eigenvalues=[float(v) for v in values],
        excess=excess,
        n_max=cfg.n_max,
        smoothing=cfg.smoothing,
        phi0=cfg.phi0,
        dim=dim,
        max_residual=decomposition.residual(op),
        histogram=[int(c) for c in counts],
        bin_edges=[float(e) for e in edges],
    )
    if excess > 0:
        logger.info(f"Phase operator spectrum leaves the window by {excess:.3e}")
    return PhaseSpectrum(report=report, decomposition=decomposition)


def non_unitarity(op: FockOperator, levels: Optional[int] = None) -> float:
    """max |(A A^dag - 1)_ij| on the low block (the top level is truncation-polluted)."""
    levels = low_block(op.dim) if levels is None else levels
    product = (op @ op.adjoint()).block(levels)
    return float(np.max(np.abs(product - np.eye(levels))))

