"""Normal-inverse-Wishart posterior and the Bayesian AUC estimators.

The model: two Gaussian classes sharing one covariance, a normal prior on
each class mean given the covariance and an inverse-Wishart prior on the
covariance. ``cbauc`` is the posterior expectation of the binormal AUC of a
fixed linear direction, in closed form via the regularized incomplete beta
function. ``ebauc`` reaches a comparable number by integrating a
threshold-swept ROC of Bayesian TPR/FPR estimates, and ``mc_cbauc_oracle``
integrates the same expectation by brute-force sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, MissingClassError
from .numerics import (
    RngStream,
    ShapeError,
    cholesky,
    quadratic_form,
    regularized_incomplete_beta,
    inverse_wishart_root,
    std_normal_cdf,
)


class UndefinedDirectionError(ValueError):
    """The weight vector is zero, so no ranking (and no AUC) is defined."""


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class PriorHyperparams:
    m1: np.ndarray
    m2: np.ndarray
    S: np.ndarray
    nu1: float
    nu2: float
    kappa: float

    def __post_init__(self):
        for name in ("m1", "m2", "S"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        p = self.m1.size
        if self.m2.shape != (p,) or self.S.shape != (p, p):
            raise ShapeError("prior dimensions disagree")
        if not (self.nu1 > 0 and self.nu2 > 0):
            raise ConfigurationError("nu1 and nu2 must be positive")
        cholesky(self.S)

    @property
    def P(self) -> int:
        return self.m1.size

    @classmethod
    def default_for(cls, p: int) -> "PriorHyperparams":
        """m1 = m2 = 0, S = I, nu1 = nu2 = 0.5, kappa = P + 2."""
        return cls(np.zeros(p), np.zeros(p), np.eye(p), 0.5, 0.5, p + 2.0)


@dataclass(frozen=True)
class ClassMoments:
    n1: int
    n2: int
    mu_hat1: np.ndarray
    mu_hat2: np.ndarray
    sigma_hat1: np.ndarray
    sigma_hat2: np.ndarray

    @property
    def P(self) -> int:
        return self.mu_hat1.size

    def pooled_covariance(self) -> np.ndarray:
        dof = self.n1 + self.n2 - 2
        if dof < 1:
            raise ValueError("pooled covariance needs at least 3 samples")
        return ((self.n1 - 1) * self.sigma_hat1 + (self.n2 - 1) * self.sigma_hat2) / dof


@dataclass(frozen=True)
class PosteriorHyperparams:
    m1_star: np.ndarray
    m2_star: np.ndarray
    S_star: np.ndarray
    nu1_star: float
    nu2_star: float
    kappa_star: float

    @property
    def P(self) -> int:
        return self.m1_star.size

    @property
    def t_dof(self) -> float:
        """Second incomplete-beta shape times two: ``kappa* - P + 1``."""
        return self.kappa_star - self.P + 1.0


@dataclass(frozen=True)
class LinearModel:
    """Scores ``w @ x + b``; class 2 is predicted for positive scores."""

    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).ravel())
        object.__setattr__(self, "b", float(self.b))


@dataclass(frozen=True)
class GaussianPopulation:
    mu1: np.ndarray
    mu2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        for name in ("mu1", "mu2", "sigma1", "sigma2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        p = self.mu1.size
        if self.mu2.shape != (p,) or self.sigma1.shape != (p, p) or self.sigma2.shape != (p, p):
            raise ShapeError("population dimensions disagree")
        cholesky(self.sigma1)
        cholesky(self.sigma2)

    @property
    def P(self) -> int:
        return self.mu1.size

    @property
    def equal_covariance(self) -> bool:
        return bool(np.array_equal(self.sigma1, self.sigma2))

    @classmethod
    def shared(cls, mu1, mu2, sigma) -> "GaussianPopulation":
        return cls(mu1, mu2, sigma, sigma)


def _direction(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if not np.any(w):
        raise UndefinedDirectionError("AUC is undefined for a zero weight vector")
    return w


def sample_moments(dataset: Dataset) -> ClassMoments:
    """Per-class means and unbiased covariances (zero matrix for a single sample)."""
    n1, n2 = dataset.class_counts()
    if n1 == 0 or n2 == 0:
        raise MissingClassError(f"class {1 if n1 == 0 else 2} has no samples")
    stats = []
    for c in (1, 2):
        x = dataset.class_rows(c)
        mu = x.mean(axis=0)
        if len(x) > 1:
            d = x - mu
            cov = d.T @ d / (len(x) - 1)
            cov = 0.5 * (cov + cov.T)
        else:
            cov = np.zeros((x.shape[1], x.shape[1]))
        stats.append((mu, cov))
    return ClassMoments(n1, n2, stats[0][0], stats[1][0], stats[0][1], stats[1][1])


def posterior_update(prior: PriorHyperparams, moments: ClassMoments) -> PosteriorHyperparams:
    """Conjugate normal-inverse-Wishart update from class sample moments."""
    p = prior.P
    if moments.P != p:
        raise ShapeError(f"prior has dimension {p}, data has {moments.P}")
    s_star = prior.S.copy()
    m_star = []
    nu_star = []
    for n_c, mu_hat, sig_hat, m_c, nu_c in (
        (moments.n1, moments.mu_hat1, moments.sigma_hat1, prior.m1, prior.nu1),
        (moments.n2, moments.mu_hat2, moments.sigma_hat2, prior.m2, prior.nu2),
    ):
        d = mu_hat - m_c
        s_star += (n_c - 1) * sig_hat + (n_c * nu_c / (n_c + nu_c)) * np.outer(d, d)
        m_star.append((n_c * mu_hat + nu_c * m_c) / (n_c + nu_c))
        nu_star.append(nu_c + n_c)
    s_star = 0.5 * (s_star + s_star.T)
    post = PosteriorHyperparams(
        m_star[0], m_star[1], s_star, nu_star[0], nu_star[1],
        prior.kappa + moments.n1 + moments.n2,
    )
    assert post.nu1_star == prior.nu1 + moments.n1
    assert post.nu2_star == prior.nu2 + moments.n2
    return post


def _check_beta_params(post: PosteriorHyperparams) -> None:
    if not post.t_dof > 0:
        raise ConfigurationError(
            f"kappa* - P + 1 must be positive, got {post.t_dof} (kappa*={post.kappa_star}, P={post.P})"
        )


def _t_cdf_via_beta(a, q: float, dof: float):
    # 1/2 + sgn(a)/2 * I(a^2 / (a^2 + q); 1/2, dof/2), with sgn(0) = 0
    if np.ndim(a) == 0:
        a = float(a)
        if a == 0.0:
            return 0.5
        a2 = a * a
        return 0.5 + math.copysign(0.5, a) * regularized_incomplete_beta(a2 / (a2 + q), 0.5, 0.5 * dof)
    a = np.asarray(a, dtype=float)
    a2 = a * a
    x = np.where(a2 > 0, a2 / (a2 + q), 0.0)
    return 0.5 + 0.5 * np.sign(a) * regularized_incomplete_beta(x, 0.5, 0.5 * dof)


def cbauc(model: LinearModel, post: PosteriorHyperparams) -> float:
    """Closed-form posterior expectation of the binormal AUC of ``model.w``.

    The intercept plays no role.
    """
    w = _direction(model.w)
    if w.size != post.P:
        raise ShapeError(f"w has length {w.size}, posterior has dimension {post.P}")
    _check_beta_params(post)
    nu1, nu2 = post.nu1_star, post.nu2_star
    shift = float(w @ (post.m2_star - post.m1_star))
    a_star = shift * math.sqrt(nu1 * nu2) / math.sqrt(nu1 + nu2 + 2.0 * nu1 * nu2)
    q = quadratic_form(w, post.S_star)
    return float(_t_cdf_via_beta(a_star, q, post.t_dof))


def population_auc(model: LinearModel, pop: GaussianPopulation) -> float:
    """Binormal AUC ``Phi(w'(mu2 - mu1) / sqrt(w'S1w + w'S2w))`` at known parameters."""
    w = _direction(model.w)
    spread = quadratic_form(w, pop.sigma1) + quadratic_form(w, pop.sigma2)
    return float(std_normal_cdf(float(w @ (pop.mu2 - pop.mu1)) / math.sqrt(spread)))


def bayes_optimal_auc(pop: GaussianPopulation) -> float:
    """``Phi(delta / sqrt(2))`` with ``delta`` the Mahalanobis distance between the means."""
    if not pop.equal_covariance:
        raise ConfigurationError("Bayes-optimal AUC of a linear rule needs equal covariances")
    d = pop.mu2 - pop.mu1
    low = cholesky(pop.sigma1)
    z = np.linalg.solve(low, d)
    delta = math.sqrt(float(z @ z))
    return float(std_normal_cdf(delta / math.sqrt(2.0)))


def bayes_direction(pop: GaussianPopulation) -> LinearModel:
    """``Sigma^{-1}(mu2 - mu1)`` with the midpoint threshold."""
    w = np.linalg.solve(pop.sigma1, pop.mu2 - pop.mu1)
    return LinearModel(w, -float(w @ (pop.mu1 + pop.mu2)) / 2.0)


POOLED_RIDGE = 1e-8


def sample_binormal_auc(model: LinearModel, moments: ClassMoments) -> float:
    """Binormal AUC with sample means and pooled sample covariance plugged in."""
    w = _direction(model.w)
    if moments.n1 + moments.n2 < 3:
        raise ValueError("sample-binormal AUC needs at least 3 samples")
    pooled = moments.pooled_covariance()
    q = quadratic_form(w, pooled)
    if q <= 1e-12 * float(w @ w):
        q = quadratic_form(w, pooled + POOLED_RIDGE * np.eye(w.size))
    return float(std_normal_cdf(float(w @ (moments.mu_hat2 - moments.mu_hat1)) / math.sqrt(2.0 * q)))


def bayes_exceedance(post: PosteriorHyperparams, class_index: int, w, t):
    """Posterior expectation of ``P(w'x > t)`` for a fresh sample of one class.

    Vectorized over ``t``. With class 2 this is the Bayesian TPR at threshold
    ``t``, with class 1 the FPR.
    """
    w = _direction(w)
    if class_index not in (1, 2):
        raise ValueError("class_index must be 1 or 2")
    _check_beta_params(post)
    m, nu = (post.m1_star, post.nu1_star) if class_index == 1 else (post.m2_star, post.nu2_star)
    a = (float(w @ m) - np.asarray(t, dtype=float)) * math.sqrt(nu / (nu + 1.0))
    out = _t_cdf_via_beta(a, quadratic_form(w, post.S_star), post.t_dof)
    return float(out) if np.ndim(out) == 0 else out


def ebauc_thresholds(w, post: PosteriorHyperparams, grid_size: int) -> np.ndarray:
    """Uniform threshold grid spanning 8 score spreads either side of the class midpoint."""
    w = _direction(w)
    s1, s2 = float(w @ post.m1_star), float(w @ post.m2_star)
    # kappa* - P - 1 <= 0 only for non-default priors; fall back to a unit denominator
    denom = post.kappa_star - post.P - 1.0
    spread = math.sqrt(quadratic_form(w, post.S_star) / (denom if denom > 0 else 1.0))
    spread += abs(s2 - s1) / 2.0
    centre = 0.5 * (s1 + s2)
    return np.linspace(centre - 8.0 * spread, centre + 8.0 * spread, grid_size)


def ebauc(w, post: PosteriorHyperparams, grid_size: int = 2001) -> float:
    """Trapezoidal area under the ROC traced by Bayesian TPR/FPR over a threshold grid."""
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    t = ebauc_thresholds(w, post, grid_size)
    tpr = np.concatenate([[1.0], bayes_exceedance(post, 2, w, t), [0.0]])
    fpr = np.concatenate([[1.0], bayes_exceedance(post, 1, w, t), [0.0]])
    area = np.sum((fpr[:-1] - fpr[1:]) * (tpr[:-1] + tpr[1:])) / 2.0
    return float(min(max(area, 0.0), 1.0))


_ORACLE_CHUNK = 50_000


def mc_cbauc_oracle(
    model: LinearModel, post: PosteriorHyperparams, stream: RngStream, draws: int
) -> tuple[float, float]:
    """Monte-Carlo posterior mean of the binormal AUC, with its standard error.

    Each draw samples the shared covariance from its inverse-Wishart posterior,
    both class means from their conditional normals, and evaluates the
    binormal AUC exactly.
    """
    w = _direction(model.w)
    if draws < 100:
        raise ValueError("oracle needs at least 100 draws")
    p = post.P
    if not post.kappa_star > p + 1:
        raise ConfigurationError("oracle needs kappa* > P + 1")
    values = np.empty(draws)
    done = 0
    while done < draws:
        k = min(_ORACLE_CHUNK, draws - done)
        # sigma = R^T R, so R^T is a square root for drawing the means
        root = inverse_wishart_root(stream, post.S_star, post.kappa_star, k)
        z = stream.normal((2, k, p))
        mu1 = post.m1_star + np.einsum("kji,kj->ki", root, z[0]) / math.sqrt(post.nu1_star)
        mu2 = post.m2_star + np.einsum("kji,kj->ki", root, z[1]) / math.sqrt(post.nu2_star)
        rw = root @ w
        spread = np.einsum("ki,ki->k", rw, rw)
        values[done:done + k] = std_normal_cdf((mu2 - mu1) @ w / np.sqrt(2.0 * spread))
        done += k
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(draws))
