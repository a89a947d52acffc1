"""Sublinear expectations on finite ambiguity sets: capacities, Choquet moments,
exact small-scale inequality checks and complete-convergence series probes."""

__version__ = "0.1.0"

from .ambiguity import (
    AmbiguitySet,
    FiniteDistribution,
    Payoff,
    PengSequenceModel,
    check_axioms,
    max_partial_sum_capacity,
    sequence_upper_expectation,
    upper_capacity,
    upper_expectation,
)
from .choquet import MomentQuery, ParetoCurve, StepCurve, choquet_moment, lemma1_check
from .errors import ConfigError, ContractError, EvaluationError, HypothesisError, ResourceError
from .experiments import ExperimentConfig, HeavyTailMarginal, equivalence_report, load_config, run_series
from .truncation import TruncationParams, decompose
from .weights import RegimeParams, WeightScheme, cesaro_coeff, regime_classify, weight_row
