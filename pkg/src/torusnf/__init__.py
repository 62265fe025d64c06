"""Newton-type normal forms for Hamiltonians near a torus of zero frequency."""
from .engine import (DegreeBudgetExceeded, HamiltonianState, NewtonStepReport, RunOptions, RunResult,
                     ScheduleHypothesisFailed, classical_oracle, newton_step, run)
from .factory import factory_suite, make_instance, random_generator
from .homology import ObstructionDetected, QuadraticForm, solve_homological
from .lie import CoordinateMap, lie_pullback, substitute
from .normal_form import A3Violation, NormalFormProfile, verify_A3
from .schedule import ConstantsSchedule, build as build_schedule, check_convergence_chain
from .series import DomainBox, TFSeries, majorant_norm, poisson_bracket

__all__ = [
    "A3Violation", "ConstantsSchedule", "CoordinateMap", "DegreeBudgetExceeded", "DomainBox",
    "HamiltonianState", "NewtonStepReport", "NormalFormProfile", "ObstructionDetected", "QuadraticForm",
    "RunOptions", "RunResult", "ScheduleHypothesisFailed", "TFSeries", "build_schedule",
    "check_convergence_chain", "classical_oracle", "factory_suite", "lie_pullback", "majorant_norm",
    "make_instance", "newton_step", "poisson_bracket", "random_generator", "run", "solve_homological",
    "substitute", "verify_A3",
]
