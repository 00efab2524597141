"""
Special functions and quadrature rules used by the measurement models.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple, Union

import numpy as np
from numpy.polynomial import hermite as np_hermite
from numpy.polynomial import polynomial as np_poly
from scipy.special import gammaln, hyp1f1, roots_genlaguerre, roots_laguerre

from .errors import OQOError, SeriesConvergenceError
from .fock_core import FockOperator

logger = logging.getLogger(__name__)

MAX_HERMITE_DEGREE = 30
MAX_KUMMER_ARGUMENT = 500.0

ArrayLike = Union[float, np.ndarray]


def ln_gamma(x: ArrayLike) -> ArrayLike:
    """ln Gamma(x) for x > 0 (scalar or array)."""
    values = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise OQOError(f"ln_gamma needs finite x > 0, got {x!r}")
    result = gammaln(values)
    return float(result) if result.ndim == 0 else result


def gamma_ratio(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Gamma(a) / Gamma(b), evaluated in log space."""
    return np.exp(np.asarray(ln_gamma(a)) - np.asarray(ln_gamma(b)))[()]


@dataclass(frozen=True, eq=False)
class PolyCoeffs:
    """Real polynomial coefficients, index = power."""

    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float)
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def degree(self) -> int:
        nonzero = np.nonzero(self.coefficients)[0]
        return int(nonzero[-1]) if nonzero.size else 0

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return np_poly.polyval(x, self.coefficients)


def hermite_mod_coeffs(n: int, s: float) -> PolyCoeffs:
    """
    Coefficients of x -> (s/(2i))^n H_n(i x / s).

    The parity of H_n makes every surviving term real:
    c_j = h_j (s/2)^n s^-j (-1)^((n-j)/2) for n - j even.

    Args:
        n: degree, 0 <= n <= 30
        s: noise scale sqrt(2 nbar + 1)

    Returns:
        PolyCoeffs of degree n with unit leading coefficient
    """
    if n < 0 or n > MAX_HERMITE_DEGREE:
        raise OQOError(f"Hermite degree must be in [0, {MAX_HERMITE_DEGREE}], got {n}")
    if not s > 0:
        raise OQOError(f"noise scale must be > 0, got {s}")
    basis = np.zeros(n + 1)
    basis[n] = 1.0
    physicists = np_hermite.herm2poly(basis)

    coefficients = np.zeros(n + 1)
    for j in range(n % 2, n + 1, 2):
        sign = -1.0 if ((n - j) // 2) % 2 else 1.0
        coefficients[j] = sign * physicists[j] * (0.5 * s) ** n * s ** (-j)
    return PolyCoeffs(coefficients)


def hermite_operator(coeffs: PolyCoeffs, op: FockOperator) -> FockOperator:
    """Horner evaluation of a real polynomial on an operator."""
    identity = np.eye(op.dim, dtype=complex)
    result = coeffs.coefficients[-1] * identity
    for c in coeffs.coefficients[-2::-1]:
        result = result @ op.entries + c * identity
    return FockOperator(result)


def confluent_M(a: float, b: float, x: float) -> float:
    """
    Kummer's function M(a, b, x) for real arguments.

    Negative x goes through M(a, b, x) = e^x M(b - a, b, -x) so the series stays positive.
    """
    if b <= 0 and float(b).is_integer():
        raise OQOError(f"M(a, b, x) undefined for b={b}")
    if abs(x) > MAX_KUMMER_ARGUMENT:
        raise OQOError(f"|x|={abs(x)} exceeds {MAX_KUMMER_ARGUMENT}")
    if x < 0:
        value = math.exp(x) * hyp1f1(b - a, b, -x)
    else:
        value = hyp1f1(a, b, x)
    if not np.isfinite(value):
        raise SeriesConvergenceError(f"M({a}, {b}, {x}) did not converge")
    return float(value)


def periodic_quadrature(samples: np.ndarray) -> complex:
    """
    Integral over one period from N uniform samples: (2 pi / N) sum samples.

    Exact for trigonometric polynomials of degree < N/2. Higher frequencies alias onto
    lower ones (cos(33 phi) on 64 points reads as cos(31 phi)).
    """
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < 4:
        raise OQOError(f"periodic quadrature needs at least 4 samples, got {n}")
    total = (2.0 * math.pi / n) * np.sum(samples)
    return float(total) if np.isrealobj(samples) else complex(total)


@lru_cache(maxsize=16)
def gauss_laguerre_rule(nodes: int, alpha: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for integral_0^inf t^alpha e^-t f(t) dt."""
    if nodes < 1:
        raise OQOError(f"need at least one node, got {nodes}")
    if alpha == 0.0:
        t, w = roots_laguerre(nodes)
    else:
        t, w = roots_genlaguerre(nodes, alpha)
    t.setflags(write=False)
    w.setflags(write=False)
    logger.debug(f"Gauss-Laguerre rule: {nodes} nodes, alpha={alpha}")
    return t, w


def fourier_coefficients(samples: np.ndarray, n_max: int, phi_start: float = 0.0) -> Dict[int, complex]:
    """
    c_n = (1/2pi) * integral e^{-i n phi} g(phi) dphi from samples on phi_j = phi_start + 2 pi j / N.
    """
    samples = np.asarray(samples, dtype=complex)
    count = samples.shape[0]
    if 2 * n_max >= count:
        raise OQOError(f"n_max={n_max} needs more than {2 * n_max} samples, got {count}")
    spectrum = np.fft.fft(samples) / count
    coeffs = {}
    for n in range(-n_max, n_max + 1):
        coeffs[n] = complex(spectrum[n % count] * np.exp(-1j * n * phi_start))
    return coeffs
