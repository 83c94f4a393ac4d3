import math
from typing import Optional

from pydantic import BaseModel, Field, root_validator, validator


class GeometricTail(BaseModel):
    """x(i) = c * gamma ** (i - m) for every i past the head of length m."""

    c: float
    gamma: float = Field(gt=0, lt=1)

    class Config:
        allow_mutation = False

    @validator("c")
    def finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("tail coefficient must be finite")
        return value


class Sequence(BaseModel):
    head: tuple[float, ...] = ()
    tail: Optional[GeometricTail] = None

    class Config:
        allow_mutation = False

    @validator("head", each_item=True)
    def finite_entries(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("sequence entries must be finite")
        return value

    @validator("tail")
    def drop_zero_tail(cls, value: Optional[GeometricTail]) -> Optional[GeometricTail]:
        if value is not None and value.c == 0:
            return None
        return value


class CertifiedValue(BaseModel):
    """
    Closed interval [lo, hi] containing an exact real quantity. Both ends equal
    to +inf is the proven-divergent value INFINITE; hi = +inf alone is an
    unbounded bracket.
    """

    lo: float
    hi: float

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def ordered(cls, values: dict) -> dict:
        lo, hi = values["lo"], values["hi"]
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval bounds must not be NaN")
        if lo > hi:
            raise ValueError(f"empty interval [{lo!r}, {hi!r}]")
        return values

    @classmethod
    def exact(cls, value: float) -> "CertifiedValue":
        return cls(lo=value, hi=value)

    @classmethod
    def infinite(cls) -> "CertifiedValue":
        return cls(lo=math.inf, hi=math.inf)

    @property
    def is_infinite(self) -> bool:
        return self.lo == math.inf

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return (self.lo + self.hi) / 2

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def within(self, target: float, tol: float) -> bool:
        """True when the whole interval lies in [target - tol, target + tol]."""
        return target - tol <= self.lo and self.hi <= target + tol

    def __str__(self) -> str:
        if self.is_infinite:
            return "inf"
        return f"[{self.lo:.9g}, {self.hi:.9g}]"


class NormModularGap(BaseModel):
    modular: CertifiedValue
    norm: CertifiedValue
    regime: str
    ordered: bool
    gap_bounded: bool

    @property
    def passed(self) -> bool:
        return self.ordered and self.gap_bounded
