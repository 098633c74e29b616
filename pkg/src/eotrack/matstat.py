"""SPD matrix helpers and Wishart / inverse-Wishart distributions.

All routines accept a single ``(d, d)`` matrix; the linear-algebra helpers
(:func:`cholesky`, :func:`spd_inv`, :func:`logdet`) also accept stacks
``(..., d, d)`` so the filters can treat every node in one call.

Densities follow the usual parameterisation:

* ``W(X; n, W)`` has mean ``n W``;
* ``IW(S; n, W)`` has mean ``W / (n - d - 1)`` and is the law of ``X^{-1}``
  when ``X ~ W(n, W^{-1})``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import multigammaln

from .errors import DomainError, ParameterError, UndefinedMomentError

__all__ = [
    "WishartParams",
    "InverseWishartParams",
    "symmetrize",
    "is_spd",
    "check_spd",
    "cholesky",
    "spd_inv",
    "logdet",
    "wishart_logpdf",
    "invwishart_logpdf",
    "wishart_mean",
    "invwishart_mean",
    "sample_wishart",
    "sample_invwishart",
]

SYMMETRY_RTOL = 1e-10
JITTER_FACTOR = 1e-9


def symmetrize(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _asymmetry(A):
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    return np.max(np.abs(A - np.swapaxes(A, -1, -2))) / scale


def is_spd(A):
    """True if ``A`` is symmetric (to 1e-10 relative) and Cholesky-factorable."""
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2] or not np.all(np.isfinite(A)):
        return False
    if _asymmetry(A) > SYMMETRY_RTOL:
        return False
    try:
        np.linalg.cholesky(symmetrize(A))
    except np.linalg.LinAlgError:
        return False
    return True


def check_spd(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if not is_spd(A):
        raise DomainError(f"{name} is not symmetric positive definite")
    return symmetrize(A)


def cholesky(A):
    """Lower Cholesky factor with one jittered retry.

    On failure the diagonal is loaded with ``1e-9 * tr(A) / d`` and the
    factorisation is attempted once more. Works on stacks; only the
    stack as a whole is retried.
    """
    A = symmetrize(A)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    d = A.shape[-1]
    eps = JITTER_FACTOR * np.abs(np.trace(A, axis1=-2, axis2=-1)) / d
    eps = np.maximum(eps, np.finfo(float).tiny)
    jittered = A + eps[..., None, None] * np.eye(d)
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError as exc:
        raise DomainError("matrix is not positive definite (jitter retry failed)") from exc


def spd_inv(A):
    """Inverse of an SPD matrix (or stack) through its Cholesky factor."""
    L = cholesky(A)
    Linv = np.linalg.inv(L)
    return np.swapaxes(Linv, -1, -2) @ Linv


def logdet(A):
    L = cholesky(A)
    return 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)


@dataclass(frozen=True)
class WishartParams:
    dof: float
    scale: np.ndarray

    def __post_init__(self):
        scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        object.__setattr__(self, "scale", check_spd(scale, "Wishart scale"))
        if not self.dof > self.dim - 1:
            raise ParameterError(f"dof={self.dof} must exceed d-1={self.dim - 1}")

    @property
    def dim(self):
        return self.scale.shape[0]


@dataclass(frozen=True)
class InverseWishartParams:
    dof: float
    scale: np.ndarray

    def __post_init__(self):
        scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        object.__setattr__(self, "scale", check_spd(scale, "inverse-Wishart scale"))
        if not self.dof > self.dim - 1:
            raise ParameterError(f"dof={self.dof} must exceed d-1={self.dim - 1}")

    @property
    def dim(self):
        return self.scale.shape[0]


def _check_arg(X, d, name):
    X = check_spd(np.atleast_2d(X), name)
    if X.shape != (d, d):
        raise DomainError(f"{name} has shape {X.shape}, expected {(d, d)}")
    return X


def wishart_logpdf(X, p):
    """Log density of ``W(X; p.dof, p.scale)``."""
    d, n = p.dim, p.dof
    X = _check_arg(X, d, "X")
    W = p.scale
    quad = np.trace(np.linalg.solve(W, X))
    return float(
        -0.5 * n * logdet(W)
        + 0.5 * (n - d - 1) * logdet(X)
        - 0.5 * n * d * np.log(2.0)
        - multigammaln(0.5 * n, d)
        - 0.5 * quad
    )


def invwishart_logpdf(S, p):
    """Log density of ``IW(S; p.dof, p.scale)``."""
    d, n = p.dim, p.dof
    S = _check_arg(S, d, "S")
    W = p.scale
    quad = np.trace(np.linalg.solve(S, W))
    return float(
        0.5 * n * logdet(W)
        - 0.5 * (n + d + 1) * logdet(S)
        - 0.5 * n * d * np.log(2.0)
        - multigammaln(0.5 * n, d)
        - 0.5 * quad
    )


def wishart_mean(p):
    return p.dof * p.scale


def invwishart_mean(p):
    d = p.dim
    if not p.dof > d + 1:
        raise UndefinedMomentError(f"inverse-Wishart mean needs dof > d+1={d + 1}, got {p.dof}")
    return p.scale / (p.dof - d - 1)


def _bartlett(dof, d, rng, size):
    # Real-valued dof: diagonal entries are sqrt of Gamma((dof - i)/2, scale 2).
    shape = (size, d, d)
    A = np.tril(rng.standard_normal(shape), -1)
    shapes = 0.5 * (dof - np.arange(d))
    diag = np.sqrt(rng.gamma(shapes, 2.0, size=(size, d)))
    A[:, np.arange(d), np.arange(d)] = diag
    return A


def sample_wishart(p, rng, size=None):
    """Draw from ``W(p.dof, p.scale)`` by the Bartlett decomposition.

    Returns a ``(d, d)`` matrix, or ``(size, d, d)`` when ``size`` is given.
    """
    n = 1 if size is None else int(size)
    L = np.linalg.cholesky(p.scale)
    LA = L @ _bartlett(p.dof, p.dim, rng, n)
    X = symmetrize(LA @ np.swapaxes(LA, -1, -2))
    return X[0] if size is None else X


def sample_invwishart(p, rng, size=None):
    """Draw from ``IW(p.dof, p.scale)`` as inverses of ``W(p.dof, p.scale^{-1})`` draws."""
    n = 1 if size is None else int(size)
    L = np.linalg.cholesky(p.scale)
    A = _bartlett(p.dof, p.dim, rng, n)
    # W^{-1} = L^{-T} L^{-1}; X = L^{-T} A A^T L^{-1}; X^{-1} = L A^{-T} A^{-1} L^T.
    B = L @ np.swapaxes(np.linalg.inv(A), -1, -2)
    S = symmetrize(B @ np.swapaxes(B, -1, -2))
    return S[0] if size is None else S
