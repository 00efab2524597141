"""
Invariant suite behind `verify`: every closed form is checked against its brute-force
oracle on seeded random states, one group per engine module.
"""

import logging
import math
from typing import Callable, List, Tuple

import mpmath
import numpy as np

from .errors import ConfigError
from .fock_core import (
    DensityState,
    build_operators,
    displaced_number_columns,
    displacement,
    displacement_faithful_levels,
    expectation_real,
    hermitian_spectrum,
    make_state,
)
from .measurement_core import generating_ZF, oqo_moment, phase_filter, propensity
from .phase_nfm import (
    cosine_operator,
    cosine_squared_operator,
    non_unitarity,
    periodic_oqo_from_samples,
    phase_operator,
    phase_propensity,
    phase_propensity_quadrature,
    phase_spectrum_report,
    phasor,
    phasor_hypergeometric,
    phasor_set,
)
from .qp_measurement import (
    QpFilterFamily,
    hermite_oqo,
    intrinsic_from_operational,
    operational_from_intrinsic,
    qp_filter,
    spreads_and_bound,
    zf_closed_form,
)
from .schemas import CheckResult, PhaseOpConfig, QpGridSpec, QpModel, StateSpec, VerificationSummary
from .special_fn import confluent_M, gamma_ratio, hermite_mod_coeffs, periodic_quadrature

logger = logging.getLogger(__name__)

MIN_VERIFY_DIM = 30
QP_NBARS = (0.0, 0.5, 2.0)
ORACLE_LEVELS = 8


class CheckRecorder:
    def __init__(self):
        self.checks: List[CheckResult] = []

    def record(self, group: str, name: str, residual: float, tolerance: float, mode: str = "max"):
        residual = float(residual)
        passed = residual < tolerance if mode == "max" else residual > tolerance
        self.checks.append(CheckResult(group=group, name=name, residual=residual,
                                       tolerance=tolerance, mode=mode, passed=passed))
        if not passed:
            logger.warning(f"❌ {group}/{name}: residual {residual:.3e} vs {tolerance:.1e} ({mode})")


def random_states(dim: int, seed: int, count: int) -> List[DensityState]:
    support = min(6, dim // 2)
    return [make_state(StateSpec(kind="random_mixed", dim=dim, seed=seed * 1000 + i, support=support))
            for i in range(count)]


def check_fock_core(rec: CheckRecorder, dim: int, seed: int, states: List[DensityState]):
    group = "fock_core"
    ops = build_operators(dim)
    commutator = ops.Q.commutator(ops.P).block(dim - 2) - 1j * np.eye(dim - 2)
    rec.record(group, "canonical commutator", np.max(np.abs(commutator)), 1e-12)

    kinds = [StateSpec(kind="fock", dim=dim, n=3), StateSpec(kind="coherent", dim=dim, alpha_re=1.0),
             StateSpec(kind="thermal", dim=dim, nbar=0.5),
             StateSpec(kind="displaced_thermal", dim=dim, alpha_re=0.5, alpha_im=-0.5, nbar=0.3),
             StateSpec(kind="squeezed", dim=dim, r=0.4)]
    built = [make_state(spec) for spec in kinds] + states
    worst = max(float(np.max(np.abs(s.entries - s.entries.conj().T))) + abs(np.trace(s.entries).real - 1.0)
                for s in built)
    rec.record(group, "state hermiticity and trace", worst, 1e-12)

    rng = np.random.default_rng(seed)
    (q1, p1), (q2, p2) = rng.uniform(-1.0, 1.0, size=(2, 2))
    levels = min(displacement_faithful_levels(q2, p2, dim), displacement_faithful_levels(q1 + q2, p1 + p2, dim))
    alpha1, alpha2 = complex(q1, p1) / math.sqrt(2), complex(q2, p2) / math.sqrt(2)
    phase = np.exp(1j * (alpha1 * alpha2.conjugate()).imag)
    product = displacement(q1, p1, dim) @ displacement(q2, p2, dim)
    combined = displacement(q1 + q2, p1 + p2, dim)
    residual = np.max(np.abs(product.entries[:, :levels] - phase * combined.entries[:, :levels]))
    rec.record(group, "displacement composition", residual, 1e-7)

    own = displacement_faithful_levels(q1, p1, dim)
    exact = displaced_number_columns(alpha1, dim, own)
    residual = np.max(np.abs(displacement(q1, p1, dim).entries[:, :own] - exact))
    rec.record(group, "displacement vs displaced number states", residual, 1e-8)

    for name, op in (("Q", ops.Q), ("num", ops.num)):
        rec.record(group, f"eigen residual {name}", hermitian_spectrum(op).residual(op), 1e-9)


def check_special_fn(rec: CheckRecorder, dim: int, seed: int, states: List[DensityState]):
    group = "special_fn"
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for a, b in rng.uniform(0.5, 50.0, size=(20, 2)):
        ratio = gamma_ratio(a + 1.0, b) / gamma_ratio(a, b)
        worst = max(worst, abs(ratio - a) / a)
    rec.record(group, "gamma recurrence", worst, 1e-12)

    s = math.sqrt(2.0)
    worst = 0.0
    for n in range(1, 20):
        lower = np.pad(hermite_mod_coeffs(n - 1, s).coefficients, (0, 2))
        current = np.pad(hermite_mod_coeffs(n, s).coefficients, (0, 1))
        expected = np.roll(current, 1) + 0.5 * n * s * s * lower
        actual = hermite_mod_coeffs(n + 1, s).coefficients
        worst = max(worst, float(np.max(np.abs(actual - expected)) / np.max(np.abs(actual))))
    rec.record(group, "Hermite recurrence", worst, 1e-12)

    phis = 2.0 * math.pi * np.arange(64) / 64
    worst = max(abs(periodic_quadrature(np.exp(1j * k * phis)) - (2.0 * math.pi if k == 0 else 0.0))
                for k in range(-31, 32))
    rec.record(group, "periodic quadrature exactness", worst, 1e-12)

    worst = 0.0
    for a, b, x in ((0.5, 2.0, -1.0), (1.5, 4.0, -30.0), (3.0, 7.0, 12.0), (2.0, 3.0, -250.0)):
        oracle = float(mpmath.hyp1f1(a, b, x))
        worst = max(worst, abs(confluent_M(a, b, x) - oracle) / abs(oracle))
    rec.record(group, "confluent M vs extended precision", worst, 1e-10)


def check_measurement_core(rec: CheckRecorder, dim: int, seed: int, states: List[DensityState]):
    group = "measurement_core"
    support = states[0].support()
    model = QpModel(nbar=0.5, dim=dim)
    family = QpFilterFamily(model, QpGridSpec.for_state(support, model.nbar))
    rec.record(group, "qp normalization k", abs(family.k - 1.0 / (2.0 * math.pi)), 1e-6)
    phase_family = phase_filter(dim, 512)

    worst_norm, worst_neg, worst_oqo = 0.0, 0.0, 0.0
    for rho in states:
        for fam in (family, phase_family):
            grid = propensity(rho, fam)
            worst_norm = max(worst_norm, abs(grid.total() - 1.0))
            worst_neg = max(worst_neg, -float(np.min(grid.values)))
            for n in range(4):
                levels = rho.support() if fam is family else None
                op = oqo_moment(fam, n, 0, levels)
                worst_oqo = max(worst_oqo, abs(grid.moment(n) - expectation_real(rho, op)))
    rec.record(group, "propensity normalization", worst_norm, 1e-6)
    rec.record(group, "propensity nonnegativity", max(worst_neg, 0.0), 1e-12)
    rec.record(group, "OQO defining property", worst_oqo, 1e-7)

    mixed = states[0].mix(states[1], 0.3)
    lin = 0.3 * propensity(states[0], family).values + 0.7 * propensity(states[1], family).values
    rec.record(group, "propensity linearity", np.max(np.abs(propensity(mixed, family).values - lin)), 1e-12)

    nearest = np.argsort(np.abs(family.alphas))[:3]
    lowest = min(hermitian_spectrum(family.op_at(g)).eigenvalues[0] for g in nearest)
    rec.record(group, "filter positivity", max(0.0, -lowest), 1e-10)


def check_qp_measurement(rec: CheckRecorder, dim: int, seed: int, states: List[DensityState]):
    group = "qp_measurement"
    support = max(rho.support() for rho in states)
    lams = np.linspace(-2.0, 2.0, 5)
    worst_zf, worst_shift, worst_bound, worst_floor, worst_oracle = 0.0, 0.0, 0.0, 0.0, 0.0
    for nbar in QP_NBARS:
        model = QpModel(nbar=nbar, dim=dim)
        family = QpFilterFamily(model, QpGridSpec.for_state(support, nbar))
        for rho in states[:3]:
            grid = propensity(rho, family)
            for lam in lams:
                for mu in lams:
                    numeric = generating_ZF(grid, (1j * lam, -1j * mu))
                    worst_zf = max(worst_zf, abs(numeric - zf_closed_form(rho, model, lam, mu)))
        for rho in states:
            report = spreads_and_bound(rho, model, family.grid)
            worst_shift = max(worst_shift, abs(report.dq ** 2 - report.DQ ** 2 - (nbar + 0.5)))
            worst_bound = max(worst_bound, -report.margin)
            worst_floor = max(worst_floor, 0.5 - report.DQ * report.DP)

        levels = ORACLE_LEVELS
        oracle_family = QpFilterFamily(model, QpGridSpec.for_levels(nbar, levels))
        for n in range(5):
            brute = oqo_moment(oracle_family, n, 0, levels).block(levels)
            closed = hermite_oqo(model, "q", n).block(levels)
            worst_oracle = max(worst_oracle, float(np.max(np.abs(brute - closed))))
    rec.record(group, "noise factorization", worst_zf, 1e-6)
    rec.record(group, "variance shift nbar + 1/2", worst_shift, 1e-6)
    rec.record(group, "operational bound", max(worst_bound, 0.0), 1e-6)
    rec.record(group, "intrinsic Heisenberg floor", max(worst_floor, 0.0), 1e-8)
    rec.record(group, "Hermite OQO vs quadrature", worst_oracle, 1e-7)

    warm = qp_filter(QpModel(nbar=QP_NBARS[-1], dim=dim))
    levels = warm.operator_levels
    identity = oqo_moment(warm, 0).block(levels)
    rec.record(group, "completeness on resolved block", np.max(np.abs(identity - np.eye(levels))), 1e-8)
    brute = oqo_moment(warm, 2, 0).block(levels)
    closed = hermite_oqo(warm.model, "q", 2).block(levels)
    rec.record(group, "second-order OQO on resolved block", np.max(np.abs(brute - closed)), 1e-7)

    coherent = make_state(StateSpec(kind="coherent", dim=dim, alpha_re=1.0))
    report = spreads_and_bound(coherent, QpModel(nbar=0.5, dim=dim))
    rec.record(group, "coherent equality case", abs(report.lhs - report.rhs), 1e-6)

    rng = np.random.default_rng(seed + 2)
    worst = 0.0
    for nbar in QP_NBARS:
        intrinsic = rng.uniform(-2.0, 2.0, size=6)
        back = intrinsic_from_operational(operational_from_intrinsic(intrinsic, nbar), nbar)
        worst = max(worst, float(np.max(np.abs(np.array(back) - intrinsic))))
    rec.record(group, "moment inversion round trip", worst, 1e-10)


def check_phase_nfm(rec: CheckRecorder, dim: int, seed: int, states: List[DensityState]):
    group = "phase_nfm"
    worst_oracle, worst_phasor = 0.0, 0.0
    phasors = phasor_set(6, dim)
    for rho in states:
        closed = phase_propensity(rho, 64)
        numeric = phase_propensity_quadrature(rho, 64)
        worst_oracle = max(worst_oracle, float(np.max(np.abs(closed.values - numeric.values))))
        grid = phase_propensity(rho, 512)
        for n in range(7):
            moment = grid.circular_moment(n)
            value = complex(np.einsum("ij,ji->", rho.entries, phasors[n].entries))
            worst_phasor = max(worst_phasor, abs(value - moment))
    rec.record(group, "closed propensity vs Gauss-Laguerre", worst_oracle, 1e-7)
    rec.record(group, "phasor defining property", worst_phasor, 1e-8)

    hyper_dim = min(dim, 120)
    block = int(math.ceil(0.8 * hyper_dim))
    worst = max(phasor(n, hyper_dim).max_abs_diff(phasor_hypergeometric(n, hyper_dim), block) for n in range(7))
    rec.record(group, "phasor form equivalence", worst, 1e-9)
    worst = max(phasors[-n].max_abs_diff(phasors[n].adjoint()) for n in range(7))
    rec.record(group, "phasor adjoint symmetry", worst, 1e-12)

    rec.record(group, "phasor non-unitarity", non_unitarity(phasor(1, 40)), 0.1, mode="min")
    c1 = cosine_operator(40)
    rec.record(group, "no factorization of cos^2", (cosine_squared_operator(40) - c1 @ c1).max_abs(), 0.01, mode="min")

    phis = -math.pi + 2.0 * math.pi * np.arange(32) / 32
    sampled = periodic_oqo_from_samples(np.cos(phis) ** 2 + 0.5 * np.sin(3.0 * phis), 3, dim)
    worst = 0.0
    for rho in states:
        grid = phase_propensity(rho, 256)
        direct = grid.integrate(lambda pts: np.cos(pts[:, 0]) ** 2 + 0.5 * np.sin(3.0 * pts[:, 0])).real
        worst = max(worst, abs(expectation_real(rho, sampled) - direct))
    rec.record(group, "sampled periodic OQO vs propensity", worst, 1e-10)

    rho = states[0]
    theta = 0.37
    shifted = phase_propensity(rho, 128, -math.pi - theta)
    rotated = phase_propensity(rho.rotated(theta), 128, -math.pi)
    rec.record(group, "rotation covariance", np.max(np.abs(shifted.values - rotated.values)), 1e-10)

    cfg = PhaseOpConfig(n_max=400)
    op = phase_operator(cfg, dim)
    rec.record(group, "phase operator hermiticity", op.hermiticity_residual(), 1e-10)
    vacuum = make_state(StateSpec(kind="fock", dim=dim, n=0))
    rec.record(group, "vacuum phase expectation", abs(expectation_real(vacuum, op) - (cfg.phi0 + math.pi)), 1e-12)
    coherent = make_state(StateSpec(kind="coherent", dim=dim, alpha_re=1.0, alpha_im=math.sqrt(3.0)))
    window = phase_propensity(coherent, 512).windowed_mean()
    rec.record(group, "phase operator vs windowed mean", abs(expectation_real(coherent, op) - window), 5e-3)

    spectrum = phase_spectrum_report(PhaseOpConfig(n_max=400, smoothing="cesaro"), dim).report
    rec.record(group, "smoothed spectrum window excess", spectrum.excess, 1e-6)
    rec.record(group, "phase eigen residual", spectrum.max_residual, 1e-9)


GROUPS: List[Tuple[str, Callable]] = [
    ("fock_core", check_fock_core),
    ("special_fn", check_special_fn),
    ("measurement_core", check_measurement_core),
    ("qp_measurement", check_qp_measurement),
    ("phase_nfm", check_phase_nfm),
]


def run_verification(dim: int, seed: int, states: int = 5) -> VerificationSummary:
    """Run every invariant group; a crashing group is recorded as a failed check."""
    if dim < MIN_VERIFY_DIM:
        raise ConfigError(f"verify needs dim >= {MIN_VERIFY_DIM}, got {dim}")
    if states < 2:
        raise ConfigError(f"verify needs at least 2 random states, got {states}")
    rec = CheckRecorder()
    sample = random_states(dim, seed, states)
    for group, func in GROUPS:
        logger.info(f"🔍 Checking {group}...")
        try:
            func(rec, dim, seed, sample)
        except Exception as e:
            logger.error(f"❌ {group} crashed: {e}")
            rec.checks.append(CheckResult(group=group, name="crashed", residual=float("inf"),
                                          tolerance=0.0, passed=False))
    return VerificationSummary(dim=dim, seed=seed, checks=rec.checks,
                               passed=all(check.passed for check in rec.checks))


def format_summary(summary: VerificationSummary) -> str:
    lines = [f"Verification summary (dim={summary.dim}, seed={summary.seed})", "=" * 50]
    for group, checks in summary.groups().items():
        ok = all(check.passed for check in checks)
        bounded = [check.residual for check in checks if check.mode == "max"]
        worst = max(bounded) if bounded else 0.0
        status = "✅ PASS" if ok else "❌ FAIL"
        lines.append(f"  {group}: {status}  max residual {worst:.3e} ({len(checks)} checks)")
        for check in checks:
            mark = "✅" if check.passed else "❌"
            relation = "<" if check.mode == "max" else ">"
            lines.append(f"    {mark} {check.name}: {check.residual:.3e} {relation} {check.tolerance:.1e}")
    lines.append("=" * 50)
    lines.append("✅ All invariants hold." if summary.passed else "⚠️ Some invariants failed.")
    return "\n".join(lines) + "\n"
