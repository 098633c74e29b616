"""Gaussian Wasserstein distance between ellipse estimates and its RMS aggregate."""
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import DomainError
from .matstat import is_spd, symmetrize

__all__ = [
    "EllipseEstimate",
    "gwd",
    "gwd_squared",
    "gwd_squared_arrays",
    "rgwe",
    "confidence_ellipse",
]


@dataclass(frozen=True)
class EllipseEstimate:
    """A ``(center, shape)`` Gaussian pair; for filter output ``shape = s E[X]``."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        S = np.asarray(self.shape, dtype=float)
        if S.shape != (c.size, c.size):
            raise DomainError(f"shape {S.shape} does not match center of length {c.size}")
        if not is_spd(S):
            raise DomainError("ellipse shape must be SPD")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", S)


def _sqrtm_psd(S):
    w, Q = np.linalg.eigh(symmetrize(S))
    return (Q * np.sqrt(np.maximum(w, 0.0))[..., None, :]) @ np.swapaxes(Q, -1, -2)


def gwd_squared_arrays(mu_a, S_a, mu_b, S_b):
    """Squared GWD for stacked inputs ``(..., d)`` and ``(..., d, d)``.

    No SPD check; trace residues with ``|r| < 1e-10`` are clamped to zero.
    """
    mu_a, mu_b = np.asarray(mu_a, dtype=float), np.asarray(mu_b, dtype=float)
    S_a, S_b = np.asarray(S_a, dtype=float), np.asarray(S_b, dtype=float)
    ra = _sqrtm_psd(S_a)
    cross = _sqrtm_psd(ra @ S_b @ ra)
    tr = np.trace(S_a + S_b - 2.0 * cross, axis1=-2, axis2=-1)
    scale = np.maximum(1.0, np.trace(S_a, axis1=-2, axis2=-1) + np.trace(S_b, axis1=-2, axis2=-1))
    tr = np.where(np.abs(tr) < 1e-10 * scale, 0.0, tr)
    tr = np.maximum(tr, 0.0)
    return np.sum((mu_a - mu_b) ** 2, axis=-1) + tr


def gwd_squared(a, b):
    if a.center.size != b.center.size:
        raise DomainError("ellipse dimensions differ")
    return float(gwd_squared_arrays(a.center, a.shape, b.center, b.shape))


def gwd(a, b):
    """Gaussian Wasserstein (L2) distance between two ellipse estimates."""
    return float(np.sqrt(gwd_squared(a, b)))


def rgwe(squared):
    """Root of the mean squared GWD.

    ``squared`` is a sequence of squared distances, one per Monte-Carlo
    run, or a 2-D array ``(runs, nodes)``; in the latter case squared
    distances are first averaged over nodes, then over runs.
    """
    arr = np.asarray(squared, dtype=float)
    if arr.size == 0:
        raise DomainError("rgwe of an empty sequence")
    if np.any(arr < 0):
        raise DomainError("squared distances must be non-negative")
    if arr.ndim == 2:
        arr = arr.mean(axis=1)
    return float(np.sqrt(arr.mean()))


def confidence_ellipse(center, cov, coverage=0.9, n_points=64):
    """Boundary points ``(n_points, 2)`` of the ``coverage`` region of N(center, cov)."""
    center = np.asarray(center, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if center.shape != (2,) or cov.shape != (2, 2):
        raise DomainError("confidence_ellipse is two-dimensional")
    if not 0 < coverage < 1:
        raise DomainError("coverage must lie in (0, 1)")
    radius = np.sqrt(chi2.ppf(coverage, df=2))
    theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return center + radius * circle @ _sqrtm_psd(cov).T
