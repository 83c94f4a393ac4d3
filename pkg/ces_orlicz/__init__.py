from ces_orlicz.certifier.certifier import certify_all, solve_alpha
from ces_orlicz.harness.suites import run_all_suites
from ces_orlicz.modular.evaluator import luxemburg_norm, modular
from ces_orlicz.modular.sequences import parse_sequence
from ces_orlicz.orlicz.function import parse_phi
from ces_orlicz.witness.builder import rotundity_failure_witness, sm_failure_witness

__version__ = "0.1.0"
__all__ = [
    "certify_all",
    "luxemburg_norm",
    "modular",
    "parse_phi",
    "parse_sequence",
    "rotundity_failure_witness",
    "run_all_suites",
    "sm_failure_witness",
    "solve_alpha",
]
