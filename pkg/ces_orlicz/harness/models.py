from enum import Enum

from pydantic import BaseModel, Field, root_validator

from ces_orlicz.orlicz.models import OrliczFunction


class Suite(str, Enum):
    koethe = "koethe"
    fatou = "fatou"
    order_continuity = "order_continuity"
    norm_modular = "norm_modular"
    monotonicity = "monotonicity"


class SequenceGenConfig(BaseModel):
    support_min: int = Field(1, ge=1)
    support_max: int = Field(8, ge=1)
    magnitude_min: float = Field(0.0, ge=0)
    magnitude_max: float = Field(1.0, gt=0)
    tail_probability: float = Field(0.3, ge=0, le=1)
    gamma_min: float = Field(0.1, gt=0, lt=1)
    gamma_max: float = Field(0.7, gt=0, lt=1)

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def ordered_ranges(cls, values: dict) -> dict:
        for low, high in (
            ("support_min", "support_max"),
            ("magnitude_min", "magnitude_max"),
            ("gamma_min", "gamma_max"),
        ):
            if values[low] > values[high]:
                raise ValueError(f"{low} must not exceed {high}")
        return values


class SuiteConfig(BaseModel):
    seed: int = Field(0, ge=0, lt=2**64)
    trials: int = Field(200, ge=1)
    tol: float = Field(1e-6, gt=0)
    phi_pool: list[OrliczFunction]
    sequence_gen: SequenceGenConfig = SequenceGenConfig()
    # worker processes for the trials; 0 keeps them on the default thread executor
    processes: int = Field(0, ge=0)

    # truncation and head-drop ladders
    fatou_depth: int = Field(60, ge=1)
    order_depth: int = Field(64, ge=1)

    # x / 2^n and x * 2^n ladders
    ladder_length: int = Field(10, ge=1)
    small_threshold: float = Field(1e-2, gt=0)
    large_threshold: float = Field(1e2, gt=0)

    epsilons: tuple[float, ...] = (0.1, 0.5, 1.0)
    continuity_eps: float = Field(0.1, gt=0)
    continuity_steps: int = Field(40, ge=1)

    # mutation switch: inverts the superadditivity check
    corrupt_superadditivity: bool = False

    class Config:
        allow_mutation = False


class TrialFailure(BaseModel):
    suite: Suite
    phi: int
    trial: int
    seed: int
    check: str
    lhs: float
    rhs: float


class TrialOutcome(BaseModel):
    phi: int
    trial: int
    failures: list[TrialFailure] = []
    # keys prefixed "max_" merge by maximum, the rest by minimum
    estimates: dict[str, float] = {}


class SuiteReport(BaseModel):
    suite: Suite
    trials: int = 0
    failures: list[TrialFailure] = []
    skipped: list[str] = []
    expected: list[str] = []
    estimates: dict[str, float] = {}

    @property
    def passed(self) -> bool:
        return not self.failures
