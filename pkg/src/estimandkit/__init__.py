"""Estimand-first causal effect estimation: matching, weighting, diagnostics and simulation oracles."""

from .core import (Dataset, Estimand, MatchStructure, PotentialOutcomeTable, Unit, WeightVector,
                   observed_from_potential, validate)
from .diagnostics import balance_table, overlap_report, smd
from .errors import (EstimandKitError, EstimandRelabelWarning, IncompatibleEstimandError,
                     PerfectSeparationError, RankDeficiencyError, SolverError, ValidationError)
from .estimation import (EffectEstimate, Pipeline, bootstrap, g_computation, hajek_contrast,
                         ratio_measures, stratified_estimate, subgroup_estimate)
from .matching import (MatchSpec, cardinality_matching, cem, fine_stratification, full_matching,
                       greedy_nn, match_to_weights, optimal_pair)
from .propensity import PropensityModel, fit_logistic, logit
from .simulation import DGPConfig, evaluate_bias, generate, table1, true_estimands
from .weighting import TrimSpec, ess, ipw_ate, matching_weights, overlap_ato, smr, trim

__version__ = "0.1.0"
