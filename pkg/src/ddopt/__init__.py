"""ddopt: dynamical-decoupling sequence simulation and optimization.

Simulates equal-interval (and sin^2-spaced) pulse sequences on a single
qubit coupled to a random 4- or 6-spin bath, scores them with a
state-independent distance measure, extracts effective-Hamiltonian channel
norms and log-log scaling exponents, and searches for optimal sequences
with an annealed genetic algorithm under four pulse-error models.
"""

__version__ = "0.1.0"

from .model import BathSpec, PulseModel, SystemModel, build_model, pulse_set, pulse_unitary
from .sequences import Sequence, make_named, propagate, cyclic_ok, concatenate
from .metrics import (
    DistanceReport,
    EffHamReport,
    ScalingFit,
    distance,
    distance_report,
    effective_error_hamiltonian,
    fit_scaling,
    fitness,
)
from .ga import GAConfig, GAResult, run_ga
from .sweep import SweepPlan, sweep_1d, landscape_2d, compare

__all__ = [
    "__version__",
    "BathSpec",
    "PulseModel",
    "SystemModel",
    "build_model",
    "pulse_set",
    "pulse_unitary",
    "Sequence",
    "make_named",
    "propagate",
    "cyclic_ok",
    "concatenate",
    "DistanceReport",
    "EffHamReport",
    "ScalingFit",
    "distance",
    "distance_report",
    "effective_error_hamiltonian",
    "fit_scaling",
    "fitness",
    "GAConfig",
    "GAResult",
    "run_ga",
    "SweepPlan",
    "sweep_1d",
    "landscape_2d",
    "compare",
]
