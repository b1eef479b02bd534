"""Selective admissions with region-specific Gamma log-score distributions."""

from .errors import (
    AdmitFairError,
    CapacityError,
    DomainError,
    InfeasibleQuotaError,
    ParseError,
    StructureError,
    UnsupportedSettingError,
    ValidationError,
)
from .fitter import FitParameters, FitProblem, FitSolution, QuantilePoint, SummaryStats, fit, objective
from .gamma import GammaParams, ScoreScale, from_log_score, gamma_cdf, gamma_pdf, gamma_quantile, to_log_score
from .montecarlo import SimulationResult, sample_cohort, simulate
from .population import Capacity, DemographicTable, Population, validate_theorem_setting
from .procedures import ProcedureOutcome, solve
from .theorems import TheoremReport, check_theorem

__all__ = [
    "AdmitFairError",
    "Capacity",
    "CapacityError",
    "DemographicTable",
    "DomainError",
    "FitParameters",
    "FitProblem",
    "FitSolution",
    "GammaParams",
    "InfeasibleQuotaError",
    "ParseError",
    "Population",
    "ProcedureOutcome",
    "QuantilePoint",
    "ScoreScale",
    "SimulationResult",
    "StructureError",
    "SummaryStats",
    "TheoremReport",
    "UnsupportedSettingError",
    "ValidationError",
    "check_theorem",
    "fit",
    "from_log_score",
    "gamma_cdf",
    "gamma_pdf",
    "gamma_quantile",
    "objective",
    "sample_cohort",
    "simulate",
    "solve",
    "to_log_score",
    "validate_theorem_setting",
]
