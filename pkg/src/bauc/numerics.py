"""Special functions, small dense linear algebra and seeded random streams.

Vectors and matrices are plain ``numpy`` arrays throughout the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

MAX_DIM = 4096
_SQRT1_2 = 1.0 / math.sqrt(2.0)


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky pivot falls below tolerance."""


class ShapeError(ValueError):
    """Raised on incompatible array dimensions."""


def std_normal_cdf(z):
    """Standard normal CDF.

    Scalars go through ``math.erfc``; arrays through ``scipy.special.ndtr``.
    Both are accurate to full double precision in the tails, which matters
    when an AUC sits close to 1.
    """
    if np.ndim(z) == 0:
        z = float(z)
        if not math.isfinite(z):
            raise ValueError(f"std_normal_cdf needs a finite argument, got {z}")
        return 0.5 * math.erfc(-z * _SQRT1_2)
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("std_normal_cdf needs finite arguments")
    return special.ndtr(z)


def log_gamma(x: float) -> float:
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise ValueError(f"log_gamma is defined here for finite x > 0, got {x}")
    return math.lgamma(x)


# Modified Lentz iteration parameters.
_TINY = 1e-300
_EPS = 1e-16
_MAX_ITER = 20000


def _betacf(x, a, b):
    """Continued fraction for I(x; a, b), evaluated elementwise in lockstep.

    Valid (fast) for x < (a + 1) / (a + b + 2). All inputs are 1-d arrays
    of equal length.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _betacf_scalar(x: float, a: float, b: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _betainc_scalar(x: float, a: float, b: float) -> float:
    if not (math.isfinite(x) and 0.0 <= x <= 1.0):
        raise ValueError("incomplete beta needs 0 <= x <= 1")
    if not (a > 0.0 and b > 0.0 and math.isfinite(a + b)):
        raise ValueError("incomplete beta needs finite a > 0 and b > 0")
    if x == 0.0 or x == 1.0:
        return x
    swap = x >= (a + 1.0) / (a + b + 2.0)
    if swap:
        x, a, b = 1.0 - x, b, a
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    val = math.exp(log_front) * _betacf_scalar(x, a, b) / a
    val = 1.0 - val if swap else val
    return min(max(val, 0.0), 1.0)


def regularized_incomplete_beta(x, a, b):
    """Regularized incomplete beta function ``I(x; a, b)``.

    Broadcasts over array arguments. Uses the continued fraction directly when
    ``x < (a + 1) / (a + b + 2)`` and the complement ``1 - I(1 - x; b, a)``
    otherwise.

    Parameters
    ----------
    x : float or array_like
        Evaluation point(s) in ``[0, 1]``.
    a, b : float or array_like
        Shape parameters, strictly positive.
    """
    if np.ndim(x) == 0 and np.ndim(a) == 0 and np.ndim(b) == 0:
        return _betainc_scalar(float(x), float(a), float(b))
    x, a, b = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(x, a, b))
    if np.any(~np.isfinite(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("incomplete beta needs 0 <= x <= 1")
    if np.any(~(a > 0.0)) or np.any(~(b > 0.0)) or np.any(~np.isfinite(a + b)):
        raise ValueError("incomplete beta needs finite a > 0 and b > 0")
    shape = x.shape
    x, a, b = x.ravel(), a.ravel(), b.ravel()
    out = np.empty_like(x)
    out[x == 0.0] = 0.0
    out[x == 1.0] = 1.0
    interior = (x > 0.0) & (x < 1.0)
    flip = interior & (x >= (a + 1.0) / (a + b + 2.0))
    direct = interior & ~flip
    for mask, swap in ((direct, False), (flip, True)):
        if not mask.any():
            continue
        xs, as_, bs = x[mask], a[mask], b[mask]
        if swap:
            xs, as_, bs = 1.0 - xs, bs, as_
        log_front = (
            special.gammaln(as_ + bs) - special.gammaln(as_) - special.gammaln(bs)
            + as_ * np.log(xs) + bs * np.log1p(-xs)
        )
        val = np.exp(log_front) * _betacf(xs, as_, bs) / as_
        out[mask] = 1.0 - val if swap else val
    np.clip(out, 0.0, 1.0, out=out)
    return out.reshape(shape)


def is_symmetric(m: np.ndarray) -> bool:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    tol = 1e-12 * np.maximum(1.0, np.abs(m))
    return bool(np.all(np.abs(m - m.T) <= tol))


def cholesky(m: np.ndarray, max_dim: int = MAX_DIM) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == m``.

    Raises
    ------
    ShapeError
        If ``m`` is not square, not symmetric, or larger than ``max_dim``.
    NotPositiveDefiniteError
        If any pivot is at or below ``1e-12 * trace(m) / P``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ShapeError(f"cholesky needs a non-empty square matrix, got shape {m.shape}")
    if m.shape[0] > max_dim:
        raise ShapeError(f"matrix dimension {m.shape[0]} exceeds cap {max_dim}")
    if not np.all(np.isfinite(m)):
        raise ShapeError("matrix has non-finite entries")
    if not is_symmetric(m):
        raise ShapeError("cholesky needs a symmetric matrix")
    p = m.shape[0]
    tol = 1e-12 * max(np.trace(m), 0.0) / p
    try:
        low = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    pivots = np.diag(low) ** 2
    if np.trace(m) <= 0.0 or np.any(pivots <= tol):
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (smallest pivot {pivots.min():.3e})"
        )
    return low


def quadratic_form(w: np.ndarray, m: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    m = np.asarray(m, dtype=float)
    if w.ndim != 1 or m.shape != (w.size, w.size):
        raise ShapeError(f"cannot form w'Mw with w {w.shape} and M {m.shape}")
    return float(w @ m @ w)


@dataclass
class RngStream:
    """Single-owner random stream keyed by ``(master_seed, stream_id, *sub)``.

    Backed by the counter-based Philox generator so a key maps to the same
    sequence on every platform.
    """

    master_seed: int
    stream_id: int
    sub: tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(
            entropy=self.master_seed & 0xFFFFFFFFFFFFFFFF,
            spawn_key=(self.stream_id, *self.sub),
        )
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child(self, *key: int) -> "RngStream":
        """Independent stream nested under this one."""
        return RngStream(self.master_seed, self.stream_id, self.sub + tuple(key))

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def chisquare(self, df, size=None):
        return self.generator.chisquare(df, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)


def derive_stream(master_seed: int, stream_id: int, *sub: int) -> RngStream:
    if stream_id < 0 or any(s < 0 for s in sub):
        raise ValueError("stream ids must be non-negative")
    return RngStream(int(master_seed), int(stream_id), tuple(int(s) for s in sub))


def sample_mvn(stream: RngStream, mean: np.ndarray, cov_chol: np.ndarray, n: int) -> np.ndarray:
    """Draw ``n`` rows ``mean + L z`` with ``z`` standard normal; shape ``(n, P)``."""
    mean = np.asarray(mean, dtype=float)
    cov_chol = np.asarray(cov_chol, dtype=float)
    if mean.ndim != 1 or cov_chol.shape != (mean.size, mean.size):
        raise ShapeError(f"mean {mean.shape} and factor {cov_chol.shape} are incompatible")
    z = stream.normal((n, mean.size))
    return mean + z @ cov_chol.T


def _bartlett_factors(stream: RngStream, p: int, df: float, n: int) -> np.ndarray:
    """Batch of Bartlett lower-triangular factors for Wishart(I, df); shape (n, p, p)."""
    a = np.zeros((n, p, p))
    rows, cols = np.tril_indices(p, -1)
    a[:, rows, cols] = stream.normal((n, rows.size))
    idx = np.arange(p)
    a[:, idx, idx] = np.sqrt(stream.chisquare(df - idx, (n, p)))
    return a


def _lower_triangular_inverse(b: np.ndarray) -> np.ndarray:
    """Row-by-row forward substitution over a batch of lower-triangular matrices."""
    p = b.shape[-1]
    x = np.zeros_like(b)
    d = 1.0 / np.diagonal(b, axis1=-2, axis2=-1)
    for i in range(p):
        x[:, i, i] = d[:, i]
        if i:
            x[:, i, :i] = -np.einsum("nk,nkj->nj", b[:, i, :i], x[:, :i, :i]) * d[:, i, None]
    return x


def inverse_wishart_root(stream: RngStream, scale: np.ndarray, kappa: float, n: int) -> np.ndarray:
    """Lower-triangular ``R`` per draw with ``R.T @ R`` inverse-Wishart distributed.

    A Wishart(scale^{-1}, kappa) draw ``W = B B^T`` is built by Bartlett
    decomposition, ``B = chol(scale^{-1}) A``; then ``W^{-1} = R^T R`` with
    ``R = B^{-1}``. ``R^T`` is therefore a square root of the draw.
    """
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if kappa <= p - 1:
        raise ValueError(f"inverse Wishart needs kappa > P - 1 = {p - 1}, got {kappa}")
    c_inv = np.linalg.inv(cholesky(scale))
    prec = c_inv.T @ c_inv
    low = np.linalg.cholesky(0.5 * (prec + prec.T))
    return _lower_triangular_inverse(low @ _bartlett_factors(stream, p, kappa, n))


def sample_inverse_wishart(stream: RngStream, scale: np.ndarray, kappa: float, n: int) -> np.ndarray:
    """Draw ``n`` matrices from the inverse Wishart with density
    ``det(X)^{-(kappa+P+1)/2} exp(-tr(scale X^{-1}) / 2)``.

    The mean is ``scale / (kappa - P - 1)`` when ``kappa > P + 1``.

    Returns
    -------
    np.ndarray
        Array of shape ``(n, P, P)``.
    """
    root = inverse_wishart_root(stream, scale, kappa, n)
    sigma = np.swapaxes(root, 1, 2) @ root
    return 0.5 * (sigma + np.swapaxes(sigma, 1, 2))
