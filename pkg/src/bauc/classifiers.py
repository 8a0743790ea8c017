"""Linear classifiers: L2-regularized logistic regression and a ridge LDA direction."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .bayes import ClassMoments, LinearModel
from .data import Dataset
from .numerics import ShapeError

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


class SingularSystemError(ValueError):
    pass


@dataclass(frozen=True)
class LogRegConfig:
    """``lam`` penalizes ``||w||^2 / 2``; the intercept is unpenalized."""

    lam: float = 1.0
    max_iters: int = 100
    tol: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


def _signed_labels(labels: np.ndarray) -> np.ndarray:
    return np.where(labels == 2, 1.0, -1.0)


def logreg_objective(theta: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    """``lam/2 ||w||^2 + sum log(1 + exp(-y (x'w + b)))`` with ``theta = [w, b]``."""
    margin = y * (x @ theta[:-1] + theta[-1])
    return 0.5 * lam * float(theta[:-1] @ theta[:-1]) - float(np.sum(log_expit(margin)))


def logreg_gradient(theta: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    margin = y * (x @ theta[:-1] + theta[-1])
    r = -y * expit(-margin)
    g = np.empty_like(theta)
    g[:-1] = x.T @ r + lam * theta[:-1]
    g[-1] = r.sum()
    return g


def _hessian(theta, x, y, lam):
    p = expit(x @ theta[:-1] + theta[-1])
    d = p * (1.0 - p)
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    h = (xa * d[:, None]).T @ xa
    h[np.arange(x.shape[1]), np.arange(x.shape[1])] += lam
    return h


def train_logreg_l2(dataset: Dataset, config: LogRegConfig = LogRegConfig(), trace=None) -> LinearModel:
    """Newton's method with Armijo backtracking, started from zero.

    Falls back to a gradient step when the Newton system cannot be solved.
    ``trace``, if a list, receives the objective value at every iterate.

    Raises
    ------
    ConvergenceError
        If ``||grad|| <= tol * max(1, |J|)`` is not reached in ``max_iters``.
    """
    dataset.require_both_classes()
    x = dataset.features
    y = _signed_labels(dataset.labels)
    lam = config.lam
    theta = np.zeros(x.shape[1] + 1)
    f = logreg_objective(theta, x, y, lam)
    for it in range(config.max_iters + 1):
        if trace is not None:
            trace.append(f)
        g = logreg_gradient(theta, x, y, lam)
        if np.linalg.norm(g) <= config.tol * max(1.0, abs(f)):
            if lam == 0 and np.all(y * (x @ theta[:-1] + theta[-1]) > 0):
                # separating iterate: the unpenalized objective has no minimizer
                break
            return LinearModel(theta[:-1].copy(), float(theta[-1]))
        if it == config.max_iters:
            break
        try:
            step = -np.linalg.solve(_hessian(theta, x, y, lam), g)
            if not np.all(np.isfinite(step)) or step @ g >= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -g
        slope = float(step @ g)
        alpha = 1.0
        while True:
            cand = theta + alpha * step
            f_new = logreg_objective(cand, x, y, lam)
            if f_new <= f + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
            if alpha < 1e-20:
                # no representable decrease left; accept only if already at tolerance
                break
        if f_new > f:
            break
        theta, f = cand, f_new
    logger.debug("logistic regression stalled at objective %.6g", f)
    raise ConvergenceError(
        f"logistic regression did not converge in {config.max_iters} iterations "
        f"(lambda={lam}); separable data needs lambda > 0"
    )


def lda_direction(moments: ClassMoments, ridge: float = 0.0) -> LinearModel:
    """``w = (pooled + ridge I)^{-1} (mu2 - mu1)`` with a midpoint intercept.

    Equal class means give ``w = 0``; callers computing AUCs will see
    ``UndefinedDirectionError`` downstream.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    cov = moments.pooled_covariance() + ridge * np.eye(moments.P)
    diff = moments.mu_hat2 - moments.mu_hat1
    try:
        w = np.linalg.solve(cov, diff)
    except np.linalg.LinAlgError:
        raise SingularSystemError("pooled covariance is singular; use ridge > 0") from None
    if np.linalg.cond(cov) > 1e14:
        raise SingularSystemError("pooled covariance is numerically singular; use ridge > 0")
    b = -float(w @ (moments.mu_hat1 + moments.mu_hat2)) / 2.0
    return LinearModel(w, b)


def predict_scores(model: LinearModel, dataset: Dataset) -> np.ndarray:
    if model.w.size != dataset.dim:
        raise ShapeError(f"model has {model.w.size} weights, data has {dataset.dim} features")
    return dataset.features @ model.w + model.b
