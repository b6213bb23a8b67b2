"""Frechet distance between Gaussian fits of two feature sets."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonFiniteInput

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-6


@dataclass(frozen=True)
class FidResult:
    value: float
    dim: int
    n_a: int
    n_b: int
    clamped: int = 0


def _psd_sqrt(mat: np.ndarray) -> tuple[np.ndarray, int]:
    w, v = np.linalg.eigh((mat + mat.T) / 2)
    clamped = int((w < -CLAMP_TOL).sum())
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T, clamped


def frechet_distance(mu_a, cov_a, mu_b, cov_b) -> tuple[float, int]:
    """``|mu_a - mu_b|^2 + Tr(cov_a + cov_b - 2 (cov_a cov_b)^(1/2))``.

    The trace of ``(cov_a cov_b)^(1/2)`` equals that of the symmetric matrix
    ``(A^(1/2) cov_b A^(1/2))^(1/2)`` with ``A = cov_a``, whose square root
    comes from a symmetric eigendecomposition. Eigenvalues below ``-1e-6``
    are counted as clamp events; all negatives are clamped to zero.
    """
    diff = mu_a - mu_b
    sqrt_a, c1 = _psd_sqrt(cov_a)
    inner = sqrt_a @ cov_b @ sqrt_a
    w = np.linalg.eigvalsh((inner + inner.T) / 2)
    c2 = int((w < -CLAMP_TOL).sum())
    tr_covmean = np.sqrt(np.clip(w, 0.0, None)).sum()
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_covmean)
    return max(value, 0.0), c1 + c2


def fid(features_a, features_b) -> FidResult:
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"feature shapes {a.shape} and {b.shape} are incompatible")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise NonFiniteInput("features contain NaN or Inf")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise DimensionMismatch("each side needs at least two samples")
    d = a.shape[1]
    n_a, n_b = a.shape[0], b.shape[0]
    if min(a.shape[0], b.shape[0]) < d + 1:
        warnings.warn(f"fewer samples than feature dimension + 1 ({d + 1}); covariance is singular", stacklevel=2)
    # evaluate in a fixed order so fid(A, B) and fid(B, A) run the same arithmetic
    if _order_key(b) < _order_key(a):
        a, b = b, a
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False, ddof=1))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False, ddof=1))
    value, clamped = frechet_distance(mu_a, cov_a, mu_b, cov_b)
    if clamped:
        log.warning("fid: clamped %d negative eigenvalue(s) below -%g", clamped, CLAMP_TOL)
    return FidResult(value, d, n_a, n_b, clamped)


def _order_key(x: np.ndarray) -> tuple:
    return (x.shape[0], float(x.sum()), x.tobytes())
