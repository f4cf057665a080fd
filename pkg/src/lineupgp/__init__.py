"""Win/draw/loss match prediction with a Gaussian process over lineups."""

from __future__ import annotations

__version__ = "0.1.0"

from .data import (
    Dataset,
    HomeSide,
    MatchRecord,
    Outcome,
    parse_dataset,
    serialize_dataset,
    split_by_cutoff,
)
from .errors import DataError, LineupGpError, NumericalError, UsageError
from .kernel import (
    KernelParams,
    MatchVector,
    build_match_vector,
    export_heatmap,
    kernel_eval,
    kernel_matrix,
)
from .likelihood import (
    DrawParam,
    PredictiveDistribution,
    log_likelihood,
    log_likelihood_derivs,
    outcome_probs,
)
from .gp import (
    GPModel,
    Hyperparams,
    LaplacePosterior,
    fit,
    load_model,
    log_marginal,
    optimize_hyperparams,
    predict_latent,
    predict_outcomes,
    quadrature_outcome_probs,
    save_model,
    train_model,
)
from .baselines import (
    EloModel,
    EloState,
    OddsModel,
    UniformModel,
    elo_expected,
    elo_rk_predict,
    elo_update,
    odds_to_probs,
    primal_laplace_fit,
    uniform_probs,
)
from .evaluation import EvalReport, evaluate, log_loss
from .simulate import SimConfig, SimResult, bayes_log_loss, simulate_dataset

__all__ = [
    "__version__",
    "Dataset",
    "HomeSide",
    "MatchRecord",
    "Outcome",
    "parse_dataset",
    "serialize_dataset",
    "split_by_cutoff",
    "DataError",
    "LineupGpError",
    "NumericalError",
    "UsageError",
    "KernelParams",
    "MatchVector",
    "build_match_vector",
    "export_heatmap",
    "kernel_eval",
    "kernel_matrix",
    "DrawParam",
    "PredictiveDistribution",
    "log_likelihood",
    "log_likelihood_derivs",
    "outcome_probs",
    "GPModel",
    "Hyperparams",
    "LaplacePosterior",
    "fit",
    "load_model",
    "log_marginal",
    "optimize_hyperparams",
    "predict_latent",
    "predict_outcomes",
    "quadrature_outcome_probs",
    "save_model",
    "train_model",
    "EloModel",
    "EloState",
    "OddsModel",
    "UniformModel",
    "elo_expected",
    "elo_rk_predict",
    "elo_update",
    "odds_to_probs",
    "primal_laplace_fit",
    "uniform_probs",
    "EvalReport",
    "evaluate",
    "log_loss",
    "SimConfig",
    "SimResult",
    "bayes_log_loss",
    "simulate_dataset",
]
