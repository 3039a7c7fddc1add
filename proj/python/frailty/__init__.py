"""Spatio-temporal frailty models for loan default prediction."""

from ._frailty import (
    Model,
    NumericalError,
    Panel,
    ParseError,
    ValidationError,
    auc,
    brier,
    crps,
    ece,
    fit_boosted,
    fit_linear,
    h_measure,
    log_loss,
    matern_correlation,
    quantile_loss,
    response_probability,
    run_cli,
    simulate_independent_losses,
    synthetic,
)

__all__ = [
    "Model",
    "NumericalError",
    "Panel",
    "ParseError",
    "ValidationError",
    "auc",
    "brier",
    "crps",
    "ece",
    "fit_boosted",
    "fit_linear",
    "h_measure",
    "log_loss",
    "matern_correlation",
    "quantile_loss",
    "response_probability",
    "run_cli",
    "simulate_independent_losses",
    "synthetic",
]
