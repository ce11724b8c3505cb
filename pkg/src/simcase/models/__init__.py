from .forest import DecisionTree, Forest, train_random_forest
from .linear import (
    LinearModel,
    hinge_gradient,
    hinge_objective,
    logistic_gradient,
    logistic_objective,
    train_linear_svm,
    train_logistic,
)
from .scoring import (
    DEFAULT_THRESHOLDS,
    ExternalScores,
    RegexMatcher,
    Scorer,
    ScoringError,
    load_external_scores,
    load_scorer,
    regex_match,
    save_scorer,
)

__all__ = [
    "DEFAULT_THRESHOLDS",
    "DecisionTree",
    "ExternalScores",
    "Forest",
    "LinearModel",
    "RegexMatcher",
    "Scorer",
    "ScoringError",
    "hinge_gradient",
    "hinge_objective",
    "load_external_scores",
    "load_scorer",
    "logistic_gradient",
    "logistic_objective",
    "regex_match",
    "save_scorer",
    "train_linear_svm",
    "train_logistic",
    "train_random_forest",
]
