"""Steady states, basin criteria and simulators for the 1-D granular media equation
with a double-well confinement and quadratic attraction to the mean."""
from .condition import ConditionReport, DeltaSearchSpec, check_condition, mirror_check, search_delta
from .estimators import BasinCriterion, LimitSimulator, SteadyStateAnalyzer
from .exceptions import GranularError, NumericalError, PotentialError
from .fokker_planck import FPConfig, fp_evolve
from .measures import GridMeasure, GridSpec, l2_distance, wasserstein2, wasserstein2_samples
from .particles import SimConfig, run_coupled, run_frozen, simulate
from .potential import PolynomialPotential, validate
from .steady_state import (
    QuadratureSpec,
    SteadyStateReport,
    analyze,
    chi,
    find_m_sigma,
    find_sigma_c,
    find_t_sigma,
    poincare_gap,
    steady_density,
)

__version__ = "0.1.0"
