"""Levenberg-Marquardt minimization of weighted residuals.

The solver works on parameters divided by a fixed scale vector (the
magnitude of the starting point), so a field amplitude near 1e-6 T and a
phase near 1 rad take comparable steps. Damping follows the classic
schedule: multiply by 10 on a rejected step, divide by 10 on an accepted
one, starting from 1e-3 times the largest diagonal entry of J^T J.
"""

from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

import numpy as np

from acmagsim.constants import (
    JACOBIAN_MIN_STEP,
    JACOBIAN_REL_STEP,
    LM_DAMPING_FACTOR,
    LM_GRADIENT_TOL,
    LM_INITIAL_DAMPING,
    LM_MAX_DAMPING,
    LM_MAX_ITERATIONS,
    LM_STEP_TOL,
)
from acmagsim.errors import NonFiniteModelError, SingularJacobianError
from acmagsim.logging_config import LogTags, logger

Model = Callable[[np.ndarray, np.ndarray], np.ndarray]


def numerical_jacobian(model: Model, params: np.ndarray, x: np.ndarray,
                       rel_step: float = JACOBIAN_REL_STEP,
                       min_step: float = JACOBIAN_MIN_STEP) -> np.ndarray:
    """Centered-difference Jacobian d model(params, x) / d params.

    Args:
        model: Callable returning model values at x for a parameter vector.
        params: Parameter vector, length n.
        x: Sweep values, length m.
        rel_step: Step relative to each parameter's magnitude.
        min_step: Lower bound on the absolute step.

    Returns:
        (m, n) matrix.

    Raises:
        NonFiniteModelError: If any evaluation is NaN or infinite.
    """
    params = np.asarray(params, dtype=float)
    columns = []
    for j in range(params.size):
        h = max(rel_step * abs(params[j]), min_step)
        up = params.copy()
        down = params.copy()
        up[j] += h
        down[j] -= h
        f_up = np.asarray(model(up, x), dtype=float)
        f_down = np.asarray(model(down, x), dtype=float)
        if not (np.all(np.isfinite(f_up)) and np.all(np.isfinite(f_down))):
            raise NonFiniteModelError(f"model is not finite around parameter {j} = {params[j]!r}")
        columns.append((f_up - f_down) / (up[j] - down[j]))
    return np.column_stack(columns)


@dataclass
class LmState:
    """Where the minimizer stopped."""
    params: np.ndarray
    cost: float             # 0.5 * sum of squared weighted residuals
    jacobian: np.ndarray    # weighted residual Jacobian at params
    iterations: int
    converged: bool
    reason: str


class LevenbergMarquardt:
    """Minimize 0.5 |r(p)|^2 for weighted residuals r = (model - y) / sigma."""

    def __init__(self, model: Model, x: np.ndarray, y: np.ndarray, sigma: np.ndarray,
                 max_iterations: int = LM_MAX_ITERATIONS,
                 gradient_tol: float = LM_GRADIENT_TOL,
                 step_tol: float = LM_STEP_TOL):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.weights = 1.0 / np.asarray(sigma, dtype=float)
        self.max_iterations = max_iterations
        self.gradient_tol = gradient_tol
        self.step_tol = step_tol

    def residuals(self, params: np.ndarray) -> np.ndarray:
        values = np.asarray(self.model(params, self.x), dtype=float)
        if not np.all(np.isfinite(values)):
            raise NonFiniteModelError(f"model is not finite at parameters {params!r}")
        return (values - self.y) * self.weights

    def jacobian(self, params: np.ndarray) -> np.ndarray:
        return numerical_jacobian(self.model, params, self.x) * self.weights[:, None]

    def minimize(self, start: np.ndarray, scale: Optional[np.ndarray] = None) -> LmState:
        """Iterate from ``start`` until a convergence test passes or iterations run out."""
        p = np.asarray(start, dtype=float).copy()
        if scale is None:
            scale = np.where(np.abs(p) > 0, np.abs(p), 1.0)
        scale = np.asarray(scale, dtype=float)

        r = self.residuals(p)
        cost = 0.5 * float(r @ r)
        jac = self.jacobian(p)
        damping = None

        for iteration in range(1, self.max_iterations + 1):
            js = jac * scale  # Jacobian in scaled coordinates
            gradient = js.T @ r
            if np.max(np.abs(gradient)) < self.gradient_tol:
                return LmState(p, cost, jac, iteration - 1, True, "gradient")
            jtj = js.T @ js
            if damping is None:
                damping = LM_INITIAL_DAMPING * float(np.max(np.diag(jtj)))
                if damping <= 0:
                    raise SingularJacobianError("Jacobian is identically zero at the start point")

            while True:
                try:
                    step = -np.linalg.solve(jtj + damping * np.eye(p.size), gradient)
                except np.linalg.LinAlgError:
                    damping *= LM_DAMPING_FACTOR
                    if damping > LM_MAX_DAMPING:
                        raise SingularJacobianError("damped normal equations stay singular")
                    continue
                scaled_p = p / scale
                if np.linalg.norm(step) < self.step_tol * (np.linalg.norm(scaled_p) + self.step_tol):
                    return LmState(p, cost, jac, iteration, True, "step")
                trial = (scaled_p + step) * scale
                try:
                    trial_r = self.residuals(trial)
                    trial_cost = 0.5 * float(trial_r @ trial_r)
                except NonFiniteModelError:
                    trial_cost = np.inf
                if trial_cost < cost:
                    p, r, cost = trial, trial_r, trial_cost
                    jac = self.jacobian(p)
                    damping /= LM_DAMPING_FACTOR
                    break
                damping *= LM_DAMPING_FACTOR
                if not np.isfinite(damping) or damping > LM_MAX_DAMPING:
                    return LmState(p, cost, jac, iteration, False, "damping")

            logger.debug(LogTags.ESTIMATION, "LM iteration %d: cost=%.10g damping=%.3g",
                         iteration, cost, damping)

        return LmState(p, cost, jac, self.max_iterations, False, "max_iterations")


def covariance_from_jacobian(jac: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """(J^T J)^-1 for a weighted residual Jacobian, inverted in scaled coordinates.

    Raises:
        SingularJacobianError: If J^T J is singular.
    """
    js = jac * scale
    jtj = js.T @ js
    try:
        inv = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError("J^T W J is singular at the optimum") from exc
    if not np.all(np.isfinite(inv)) or np.linalg.cond(jtj) > 1e15:
        raise SingularJacobianError("J^T W J is numerically singular at the optimum")
    cov = inv * np.outer(scale, scale)
    return 0.5 * (cov + cov.T)
