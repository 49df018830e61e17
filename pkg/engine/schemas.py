from enum import Enum
from typing import Iterator, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Parameters(BaseModel):
    """Constants of the wild mosquito model."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    """Maximum emergence rate from larvae to adults."""
    beta: float
    """Oviposition (birth) rate of adults."""
    mu: float
    """Per-capita death rate of adults."""
    d0: float = 0.0
    """Density-independent larvae death rate."""
    d1: float = 0.0
    """Density-dependent larvae death coefficient."""

    @property
    def is_case_W0(self) -> bool:
        return self.d0 == 0 and self.d1 == 0 and self.beta != self.mu

    @property
    def beta_gt_mu(self) -> bool:
        return self.beta > self.mu

    @property
    def adult_limit(self) -> float:
        """Limit of the adult count when the population survives."""
        return self.alpha / self.mu


class State(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    """Larvae: eggs, larvae and pupae taken together."""
    y: float
    """Adults."""

    def as_tuple(self) -> tuple[float, float]:
        return self.x, self.y


class ValidationReport(BaseModel):
    mode: Literal["general", "quadrant", "W0"]
    valid: bool
    finite: bool
    alpha_in_range: bool
    beta_positive: bool
    mu_in_range: bool
    d0_nonnegative: bool
    d1_nonnegative: bool
    no_larval_death: bool
    distinct_rates: bool
    messages: list[str] = []

    @property
    def keeps_quadrant(self) -> bool:
        """True when the zero-larval-death map sends the quadrant into itself."""
        return self.alpha_in_range and self.beta_positive and self.mu_in_range

    def summary(self) -> str:
        return "; ".join(self.messages) if self.messages else "ok"


class Classification(str, Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    SADDLE = "saddle"
    NONHYPERBOLIC = "nonhyperbolic"


class SpectralReport(BaseModel):
    jacobian: list[list[float]]
    lambda1: float
    lambda2: float
    classification: Classification
    tol: float = 1e-9

    @model_validator(mode="after")
    def check_ordering(self):
        if self.lambda1 < self.lambda2:
            raise ValueError("lambda1 must not be smaller than lambda2")
        return self

    @property
    def hyperbolic(self) -> bool:
        return self.classification != Classification.NONHYPERBOLIC


class Verdict(str, Enum):
    EXTINCTION = "extinction"
    SURVIVAL = "survival"
    EXHAUSTED = "exhausted"
    EQUILIBRIUM = "equilibrium"


class OrbitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(default=1_000_000, ge=1)
    conv_tol: float = Field(default=1e-8, gt=0)
    """Radius around the target used by both verdicts."""
    div_threshold: float = Field(default=1e3, gt=1)
    """Larvae count beyond which x counts as escaping."""
    record_every: int = Field(default=1, ge=1)
    survival_window: int = Field(default=100, ge=1)
    """Consecutive increasing steps required before a survival verdict."""
    max_records: int = Field(default=1_000_000, ge=2)
    """Stored states before the series is thinned by two."""


class DeltaSummary(BaseModel):
    """Sign patterns of the per-step differences of an orbit."""

    both_up: int = 0
    x_up_y_down: int = 0
    x_down_y_up: int = 0
    both_down: int = 0
    ties: int = 0
    larvae_gain_not_decreasing: int = 0
    """Steps of a larvae-up/adults-down run whose larvae gain did not shrink."""
    adult_loss_not_increasing: int = 0
    """Steps of a larvae-up/adults-down run whose adult loss did not grow."""


class MonitorLog(BaseModel):
    y_bound_violations: int = 0
    pattern_violations: int = 0
    sum_identity_max_err: float = 0.0
    n0_estimate: int = 0
    growth_violations: int = 0
    """Steps after n0_estimate whose larvae fall below the linear growth bound."""
    contraction_violations: int = 0
    delta_sequence: DeltaSummary = Field(default_factory=DeltaSummary)


class PatternReport(BaseModel):
    """Breakdown of the monotone pattern scan of an orbit."""

    steps_scanned: int = 0
    both_decreasing: int = 0
    growth_broken: int = 0
    persistent_x_down_y_up: bool = False
    persistent_x_up_y_down: bool = False
    persistent_alternation: bool = False

    @property
    def total(self) -> int:
        flags = (
            self.persistent_x_down_y_up,
            self.persistent_x_up_y_down,
            self.persistent_alternation,
        )
        return self.both_decreasing + self.growth_broken + sum(flags)


class Orbit(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    parameters: Parameters
    steps: np.ndarray
    """Step index of every stored state."""
    xs: np.ndarray
    ys: np.ndarray
    verdict: Verdict
    n_steps: int
    y_limit_estimate: float
    record_every: int = 1
    monitors: MonitorLog = Field(default_factory=MonitorLog)

    @property
    def states(self) -> list[State]:
        return [State(x=float(x), y=float(y)) for x, y in zip(self.xs, self.ys)]

    @property
    def final_state(self) -> State:
        return State(x=float(self.xs[-1]), y=float(self.ys[-1]))

    @property
    def full_resolution(self) -> bool:
        return self.record_every == 1


class PeriodCertificate(BaseModel):
    A: float
    B: float
    C: float
    signs_ok: bool
    scanned_periods: tuple[int, int] = (2, 2)
    roots_by_period: dict[int, list[float]] = {}
    spurious_roots: list[float] = []
    reduction_residual: float | None = None
    """Deviation of the period-two factorisation, None when not checked."""


class OdeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: float = Field(default=0.01, gt=0)
    t_end: float = Field(default=500.0, gt=0)
    conv_tol: float = Field(default=1e-6, gt=0)

    @model_validator(mode="after")
    def check_step(self):
        if self.step > self.t_end:
            raise ValueError(f"step {self.step} exceeds t_end {self.t_end}")
        return self


class OdeTrajectory(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    parameters: Parameters
    t: np.ndarray
    xs: np.ndarray
    ys: np.ndarray

    def points(self) -> Iterator[tuple[float, State]]:
        for t, x, y in zip(self.t, self.xs, self.ys):
            yield float(t), State(x=float(x), y=float(y))

    @property
    def final_state(self) -> State:
        return State(x=float(self.xs[-1]), y=float(self.ys[-1]))

    def distance_to(self, target: State) -> float:
        final = self.final_state
        return max(abs(final.x - target.x), abs(final.y - target.y))


class EquilibriumReport(BaseModel):
    r0: float
    trivial_stable: bool
    positive_equilibrium: State | None = None
    origin_eigenvalues: tuple[float, float]
    """Eigenvalues of the continuous Jacobian at the origin, larger first."""


RangeSpec = tuple[float, float, int]


class SweepSpec(BaseModel):
    alpha_range: RangeSpec
    beta_range: RangeSpec
    mu_range: RangeSpec
    d0: float = 0.0
    d1: float = 0.0
    x0: float = 1.0
    y0: float = 1.0
    orbit: OrbitConfig = Field(default_factory=OrbitConfig)

    @model_validator(mode="after")
    def check_ranges(self):
        for name in ("alpha_range", "beta_range", "mu_range"):
            lo, hi, steps = getattr(self, name)
            if steps < 1 or lo > hi:
                raise ValueError(f"{name} ({lo}, {hi}, {steps}) is empty")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("initial state must lie in the positive quadrant")
        return self

    @staticmethod
    def _axis(bounds: RangeSpec) -> np.ndarray:
        lo, hi, steps = bounds
        return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])

    def grid(self) -> list[Parameters]:
        """Cells in row-major order over alpha, beta, mu."""
        cells = []
        for alpha in self._axis(self.alpha_range):
            for beta in self._axis(self.beta_range):
                for mu in self._axis(self.mu_range):
                    cells.append(
                        Parameters(
                            alpha=float(alpha),
                            beta=float(beta),
                            mu=float(mu),
                            d0=self.d0,
                            d1=self.d1,
                        )
                    )
        return cells
