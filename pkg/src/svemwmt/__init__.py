"""Self-validated ensemble models and a permutation whole-model test.

Typical use::

    from svemwmt import load_config, whole_model_test
    specs, terms = load_config(open("study.yaml").read())
    result = whole_model_test(table, table["y"], specs, terms, learner="fs")
    result.p_value
"""

from ._errors import (ConvergenceError, DegenerateReferenceError, DegenerateSampleError,
                      DomainError, EvaluationError, FitError, InfeasibleBoundsError,
                      IngestionError, SingularSystemError, SpecError, SvemError)
from .distributions import (ShashParams, anova_whole_model_f, fit_reference,
                            p_value_from_distances, shash_cdf, shash_fit_mle)
from .ensemble import EnsembleModel, PredictionSummary, svem_fit, svem_predict
from .factors import (FactorSpec, ModelMatrix, Term, expand_terms, load_config,
                      parse_factor_spec, parse_terms)
from .learners import (FitResult, forward_selection_fit, lasso_path_fit,
                       weighted_least_squares)
from .points import sample_points
from .weights import WeightPair, draw_weight_pair
from .whole_model import (TestResult, TestSettings, build_observed_matrix,
                          build_reference_matrix, reduced_rank_mahalanobis,
                          standardized_prediction_row, whole_model_test)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegenerateReferenceError", "DegenerateSampleError", "DomainError",
    "EnsembleModel", "EvaluationError", "FactorSpec", "FitError", "FitResult",
    "InfeasibleBoundsError", "IngestionError", "ModelMatrix", "PredictionSummary",
    "ShashParams", "SingularSystemError", "SpecError", "SvemError", "Term", "TestResult",
    "TestSettings", "WeightPair", "anova_whole_model_f", "build_observed_matrix",
    "build_reference_matrix", "draw_weight_pair", "expand_terms", "fit_reference",
    "forward_selection_fit", "lasso_path_fit", "load_config", "p_value_from_distances",
    "parse_factor_spec", "parse_terms", "reduced_rank_mahalanobis", "sample_points",
    "shash_cdf", "shash_fit_mle", "standardized_prediction_row", "svem_fit", "svem_predict",
    "weighted_least_squares", "whole_model_test",
]
