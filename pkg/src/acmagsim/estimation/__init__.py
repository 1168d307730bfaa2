"""Nonlinear least-squares estimation of field and coherence parameters."""

from acmagsim.estimation.fitting import (
    Dataset,
    fit_coherence,
    fit_curve,
    fit_magnetometry,
    synthesize_coherence,
    synthesize_magnetometry,
)
from acmagsim.estimation.levenberg import (
    LevenbergMarquardt,
    covariance_from_jacobian,
    numerical_jacobian,
)

__all__ = [
    "Dataset",
    "fit_coherence",
    "fit_curve",
    "fit_magnetometry",
    "synthesize_coherence",
    "synthesize_magnetometry",
    "LevenbergMarquardt",
    "covariance_from_jacobian",
    "numerical_jacobian",
]
