from enum import Enum

from pydantic import BaseModel

from ces_orlicz.modular.models import CertifiedValue, Sequence


class WitnessKind(str, Enum):
    sm_failure = "SM_FAILURE"
    rotundity_failure = "ROTUNDITY_FAILURE"


class WitnessCheck(BaseModel):
    name: str
    target: float
    achieved: CertifiedValue
    passed: bool


class WitnessPair(BaseModel):
    x: Sequence
    y: Sequence
    kind: WitnessKind
    checks: list[WitnessCheck] = []
    constants: dict[str, float] = {}
    branch: str = ""

    class Config:
        allow_mutation = False


class WitnessReport(BaseModel):
    kind: WitnessKind
    checks: list[WitnessCheck] = []

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[WitnessCheck]:
        return [check for check in self.checks if not check.passed]
