from enum import Enum
from typing import Optional

from pydantic import BaseModel

from ces_orlicz.modular.models import CertifiedValue
from ces_orlicz.witness.models import WitnessPair


class Property(str, Enum):
    nontrivial = "NONTRIVIAL"
    sufficient_chain = "SUFFICIENT_CHAIN"
    order_continuous = "ORDER_CONTINUOUS"
    strict_monotone = "STRICT_MONOTONE"
    uniform_monotone = "UNIFORM_MONOTONE"
    rotund = "ROTUND"
    delta2_at_zero = "DELTA2_AT_ZERO"
    lower_index = "LOWER_INDEX"


class Verdict(str, Enum):
    holds = "HOLDS"
    fails = "FAILS"
    unknown = "UNKNOWN"
    unknown_boundary = "UNKNOWN_BOUNDARY"
    not_applicable = "NOT_APPLICABLE"
    trivial_space = "TRIVIAL_SPACE"
    delta2_required = "DELTA2_REQUIRED"


class Certificate(BaseModel):
    property: Property
    verdict: Verdict
    constants: dict[str, float] = {}
    intervals: dict[str, CertifiedValue] = {}
    sai: Optional[tuple[float, float]] = None
    witness: Optional[WitnessPair] = None
    note: str = ""

    class Config:
        allow_mutation = False


class ChainLink(BaseModel):
    name: str
    verdict: Verdict
    constants: dict[str, float] = {}


class SufficientChain(BaseModel):
    """Status of the chain lower index > 1 => power bound => nontriviality."""

    index: ChainLink
    power_bound: ChainLink
    nontrivial: ChainLink

    @property
    def consistent(self) -> bool:
        if self.index.verdict == Verdict.holds:
            return (
                self.power_bound.verdict == Verdict.holds
                and self.nontrivial.verdict == Verdict.holds
            )
        if self.power_bound.verdict == Verdict.holds:
            return self.nontrivial.verdict == Verdict.holds
        return True
