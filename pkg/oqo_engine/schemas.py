import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

StateKind = Literal["fock", "coherent", "thermal", "displaced_thermal", "random_mixed", "squeezed"]


class StateSpec(BaseModel):
    """Recipe for a density state on a D-level Fock cutoff."""

    kind: StateKind
    dim: int = Field(ge=2)
    n: Optional[int] = None
    alpha_re: float = 0.0
    alpha_im: float = 0.0
    nbar: float = Field(default=0.0, ge=0.0)
    seed: int = 0
    support: Optional[int] = Field(default=None, ge=1)
    r: float = Field(default=0.0, ge=0.0)
    theta: float = 0.0

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_kind_params(self):
        if self.kind == "fock":
            if self.n is None:
                raise ValueError("fock state needs a level n")
            if not 0 <= self.n < self.dim:
                raise ValueError(f"fock level n={self.n} must satisfy 0 <= n < dim={self.dim}")
        if self.kind == "random_mixed" and self.support is not None and self.support > self.dim:
            raise ValueError(f"support {self.support} exceeds dim {self.dim}")
        return self

    @property
    def alpha(self) -> complex:
        return complex(self.alpha_re, self.alpha_im)

    @classmethod
    def from_compact(cls, text: str, dim: int) -> "StateSpec":
        """
        Parse `kind:params` strings.

        fock:N | coherent:RE[,IM] | thermal:NBAR | displaced_thermal:RE,IM,NBAR |
        random_mixed:SEED[,SUPPORT] | squeezed:R[,THETA]
        """
        kind, _, params = text.strip().partition(":")
        try:
            values = [float(v) for v in params.split(",")] if params else []
        except ValueError:
            raise ValueError(f"state parameters must be numbers: {text!r}")

        def arg(i, default=None):
            if i < len(values):
                return values[i]
            if default is None:
                raise ValueError(f"state {text!r} is missing parameter #{i + 1}")
            return default

        if kind == "fock":
            return cls(kind=kind, dim=dim, n=int(arg(0)))
        if kind == "coherent":
            return cls(kind=kind, dim=dim, alpha_re=arg(0), alpha_im=arg(1, 0.0))
        if kind == "thermal":
            return cls(kind=kind, dim=dim, nbar=arg(0))
        if kind == "displaced_thermal":
            return cls(kind=kind, dim=dim, alpha_re=arg(0), alpha_im=arg(1), nbar=arg(2))
        if kind == "random_mixed":
            support = values[1] if len(values) > 1 else None
            return cls(kind=kind, dim=dim, seed=int(arg(0)),
                       support=int(support) if support is not None else None)
        if kind == "squeezed":
            return cls(kind=kind, dim=dim, r=arg(0), theta=arg(1, 0.0))
        raise ValueError(f"unknown state kind {kind!r}")


class QpGridSpec(BaseModel):
    """Square (q, p) grid [-L, L]^2 with `points` nodes per axis."""

    half_width: float = Field(gt=0.0)
    points: int = Field(default=129, ge=5)
    # Low Fock levels whose operator entries the grid resolves (None: all of them).
    resolved_levels: Optional[int] = Field(default=None, ge=1)

    class Config:
        frozen = True

    @classmethod
    def for_state(cls, mean_number: float, nbar: float, points: int = 129) -> "QpGridSpec":
        rms_radius = math.sqrt(2.0 * mean_number + 2.0 * nbar + 2.0)
        return cls(half_width=max(8.0, 4.5 * rms_radius), points=points)

    @classmethod
    def for_levels(cls, nbar: float, levels: int, points: int = 129) -> "QpGridSpec":
        half_width = math.sqrt(2.0 * levels + 1.0) + 8.0 * math.sqrt(nbar + 1.0)
        return cls(half_width=half_width, points=points, resolved_levels=levels)


class QpModel(BaseModel):
    nbar: float = Field(ge=0.0)
    dim: int = Field(default=80, ge=2)
    grid: Optional[QpGridSpec] = None

    class Config:
        frozen = True

    @property
    def noise_scale(self) -> float:
        """s = sqrt(2 nbar + 1), the width entering the Hermite OQOs."""
        return math.sqrt(2.0 * self.nbar + 1.0)


class PhaseOpConfig(BaseModel):
    phi0: float = -math.pi
    n_max: int = Field(default=400, ge=1)
    smoothing: Literal["none", "cesaro"] = "none"

    class Config:
        frozen = True


class SpreadReport(BaseModel):
    dq: float = Field(gt=0.0)
    dp: float = Field(gt=0.0)
    DQ: float
    DP: float
    lhs: float
    rhs: float
    margin: float
    equality_case: bool = False

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_bound(self):
        if self.lhs < self.rhs - 1e-6:
            raise ValueError(f"operational bound violated: dq*dp={self.lhs} < nbar+1={self.rhs}")
        return self


class SpectrumReport(BaseModel):
    eigenvalues: List[float]
    excess: float
    n_max: int
    smoothing: str
    phi0: float
    dim: int
    max_residual: float
    histogram: List[int]
    bin_edges: List[float]

    class Config:
        frozen = True


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run; echoed into every output."""

    command: str
    dim: int = Field(ge=2)
    state: Optional[StateSpec] = None
    nbar: Optional[float] = Field(default=None, ge=0.0)
    points: Optional[int] = None
    half_width: Optional[float] = None
    nphi: Optional[int] = None
    phi0: Optional[float] = None
    n_max: Optional[int] = None
    smoothing: Optional[str] = None
    order: Optional[int] = None
    seed: Optional[int] = None
    states: Optional[int] = None
    format: Literal["csv", "json", "text"] = "json"

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_state_dim(self):
        if self.state is not None and self.state.dim != self.dim:
            raise ValueError(f"state dim {self.state.dim} differs from run dim {self.dim}")
        return self


class OutputEnvelope(BaseModel):
    tool: str
    version: str
    config: RunConfig
    result: Any = None


class CheckResult(BaseModel):
    group: str
    name: str
    residual: float
    tolerance: float
    # "max": residual must stay below tolerance; "min": residual must exceed it.
    mode: Literal["max", "min"] = "max"
    passed: bool


class VerificationSummary(BaseModel):
    dim: int
    seed: int
    checks: List[CheckResult]
    passed: bool

    def groups(self) -> Dict[str, List[CheckResult]]:
        grouped: Dict[str, List[CheckResult]] = {}
        for check in self.checks:
            grouped.setdefault(check.group, []).append(check)
        return grouped
