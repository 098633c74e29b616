"""Centralized Gaussian-inverse-Wishart filter with a variational-Bayes update.

The belief over kinematic state ``x`` and extension ``X`` is
``N(x; m, P (x) X) IW(X; nu, V)``; the unknown measurement-noise covariance
``R`` has its own ``IW(R; upsilon, U)`` belief. Each measurement ``y`` is
``z + noise`` with the noise-free point ``z ~ N(H x, s X)`` and noise
``N(0, R)``.

Functions ending in ``_arrays`` work on raw arrays with arbitrary leading
batch dimensions; :mod:`eotrack.dfilter` uses them to update all nodes at
once. The dataclass-level functions wrap them for a single belief.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError
from .matstat import check_spd, spd_inv, symmetrize
from .model import build_F, build_Q, kron_apply

__all__ = [
    "NOISE_MODES",
    "GIWState",
    "NoiseBelief",
    "LatentPosterior",
    "SufficientStats",
    "VBOptions",
    "VBDiagnostics",
    "predict",
    "predict_arrays",
    "gain",
    "update_state",
    "update_state_arrays",
    "update_noise",
    "update_latents",
    "stats_from_sums",
    "vb_measurement_update",
    "relative_change",
]

NOISE_MODES = ("estimate", "known", "none")


@dataclass(frozen=True)
class GIWState:
    m: np.ndarray
    P: np.ndarray
    nu: float
    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def d(self):
        return self.V.shape[-1]

    @property
    def position(self):
        return self.m[: self.d]

    @property
    def extension_mean(self):
        """``E[X] = V / (nu - d - 1)``."""
        if not self.nu > self.d + 1:
            raise ParameterError(f"E[X] undefined for nu={self.nu} <= d+1")
        return self.V / (self.nu - self.d - 1)

    @property
    def extension_precision(self):
        """``E[X^-1] = nu V^-1``, defined for any valid nu."""
        return self.nu * spd_inv(self.V)


@dataclass(frozen=True)
class NoiseBelief:
    upsilon: float
    U: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", np.asarray(self.U, dtype=float))
        object.__setattr__(self, "upsilon", float(self.upsilon))

    @property
    def d(self):
        return self.U.shape[-1]

    @property
    def mean(self):
        if not self.upsilon > self.d + 1:
            raise ParameterError(f"E[R] undefined for upsilon={self.upsilon} <= d+1")
        return self.U / (self.upsilon - self.d - 1)

    @property
    def precision(self):
        return self.upsilon * spd_inv(self.U)


@dataclass(frozen=True)
class LatentPosterior:
    """Gaussian posteriors of the noise-free points of one batch.

    ``mu`` holds one row per measurement; the covariance ``Sigma`` does not
    depend on the measurement and is shared.
    """

    mu: np.ndarray
    Sigma: np.ndarray


@dataclass(frozen=True)
class SufficientStats:
    """Expected statistics of the latent points entering the VBM step.

    ``S`` is the spread ``mean <z z^T> - zbar zbar^T`` and ``residual`` the
    sum ``sum <(y - z)(y - z)^T>``.
    """

    count: int
    zbar: np.ndarray
    S: np.ndarray
    residual: np.ndarray

    @classmethod
    def empty(cls, d):
        return cls(0, np.zeros(d), np.zeros((d, d)), np.zeros((d, d)))


@dataclass(frozen=True)
class VBOptions:
    """Knobs of the VB measurement update.

    noise_mode
        ``"estimate"`` infers R; ``"known"`` uses ``R_true``; ``"none"``
        neglects sensor noise (latent points equal the measurements).
    init_extension_scale
        ``V`` of the per-scan VB initialisation is this times the identity;
        ``nu`` is ``d + 1 + init_extension_dof``. The default is 0.1 km^2
        written in metres^2.
    """

    max_iters: int = 20
    tol: float = 1e-6
    noise_mode: str = "estimate"
    R_true: np.ndarray = None
    warm_start: bool = False
    keep_trace: bool = False
    init_extension_scale: float = 1e5
    init_extension_dof: float = 0.1

    def __post_init__(self):
        if self.noise_mode not in NOISE_MODES:
            raise ParameterError(f"noise_mode must be one of {NOISE_MODES}")
        if self.noise_mode == "known":
            if self.R_true is None:
                raise ParameterError("noise_mode='known' requires R_true")
            object.__setattr__(self, "R_true", check_spd(self.R_true, "R_true"))
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")


@dataclass
class VBDiagnostics:
    iterations: int = 0
    converged: bool = False
    deltas: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def predict_arrays(m, P, nu, V, F, Q, decay, d):
    """Kinematic Kalman-style prediction and dof-decay of the extension belief."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= d + 1):
        raise ParameterError("prediction needs nu > d+1")
    m_pred = kron_apply(F, m, d)
    P_pred = F @ P @ F.T + Q
    nu_pred = d + 3.0 + decay * (nu - d - 3.0)
    ratio = (nu_pred - d - 1.0) / (nu - d - 1.0)
    V_pred = np.asarray(ratio)[..., None, None] * V
    return m_pred, P_pred, nu_pred, V_pred


def predict(prior, cfg):
    mp = cfg.motion
    decay = np.exp(-mp.scan_time / mp.extension_decay)
    m, P, nu, V = predict_arrays(prior.m, prior.P, prior.nu, prior.V, build_F(mp), build_Q(mp), decay, cfg.d)
    return GIWState(m, P, float(nu), V)


def gain(P, count, s):
    """Innovation factor ``b = s/N + H P H^T`` and gain vector ``w = P H^T / b``."""
    b = s / np.asarray(count, dtype=float) + P[..., 0, 0]
    w = P[..., :, 0] / b[..., None]
    return b, w


def update_state_arrays(m, P, nu, V, count, zbar, S, s, d):
    """Closed-form q(x, X) given the latent statistics; ``count`` must be >= 1."""
    b, w = gain(P, count, s)
    e = zbar - m[..., :d]
    m_new = m + (w[..., :, None] * e[..., None, :]).reshape(m.shape)
    P_new = P - b[..., None, None] * w[..., :, None] * w[..., None, :]
    nu_new = nu + count
    K = e[..., :, None] * e[..., None, :] / b[..., None, None]
    V_new = V + (np.asarray(count, dtype=float) / s)[..., None, None] * S + K
    return m_new, symmetrize(P_new), nu_new, symmetrize(V_new)


def update_state(prior_pred, stats, cfg):
    if stats.count == 0:
        return prior_pred
    m, P, nu, V = update_state_arrays(
        prior_pred.m, prior_pred.P, prior_pred.nu, prior_pred.V,
        stats.count, stats.zbar, stats.S, cfg.s, cfg.d,
    )
    return GIWState(m, P, float(nu), V)


def update_noise(prior, stats):
    return NoiseBelief(prior.upsilon + stats.count, symmetrize(prior.U + stats.residual))


def stats_from_sums(count, sum_z, sum_zz, sum_res, ref):
    """Rebuild ``zbar``, spread ``S`` and residual from reference-centred sums."""
    mean_dz = sum_z / count
    zbar = ref + mean_dz
    S = symmetrize(sum_zz / count - mean_dz[:, None] * mean_dz[None, :])
    return SufficientStats(int(round(count)), zbar, S, symmetrize(sum_res))


def _noise_precision(noise, opts):
    if opts.noise_mode == "known":
        return spd_inv(opts.R_true)
    if opts.noise_mode == "none":
        return np.zeros_like(noise.U)
    return noise.precision


def update_latents(batch, state, noise, cfg, opts=VBOptions()):
    """q(z) for every measurement of ``batch`` and the resulting statistics.

    ``state`` and ``noise`` are the current VB iterates (not the prediction).
    """
    d = cfg.d
    Y = np.asarray(batch, dtype=float).reshape(-1, d)
    n = Y.shape[0]
    if n == 0:
        return LatentPosterior(np.zeros((0, d)), np.zeros((d, d))), SufficientStats.empty(d)
    hm = state.m[:d]
    A = _noise_precision(noise, opts)
    B = state.extension_precision / cfg.s
    no_noise = opts.noise_mode == "none"
    sum_z, sum_zz, sum_res, Sigma = kernels.latent_sums(
        Y, np.array([0, n]), A[None], B[None], hm[None], hm[None], no_noise
    )
    stats = stats_from_sums(n, sum_z[0], sum_zz[0], sum_res[0], hm)
    if no_noise:
        mu = Y.copy()
    else:
        mu = (Sigma[0] @ (A @ Y.T + (B @ hm)[:, None])).T
    return LatentPosterior(mu, Sigma[0]), stats


def relative_change(new, old):
    scale = max(np.linalg.norm(old), np.finfo(float).tiny)
    return float(np.linalg.norm(np.asarray(new) - np.asarray(old)) / scale)


def initial_iterate(pred, noise_prior, batch, cfg, opts):
    """Starting point of the VB loop for one scan."""
    d = cfg.d
    if opts.warm_start:
        return pred, noise_prior
    ybar = np.asarray(batch, dtype=float).reshape(-1, d).mean(axis=0)
    m0 = np.zeros(3 * d)
    m0[:d] = ybar
    V0 = opts.init_extension_scale * np.eye(d)
    return GIWState(m0, pred.P, d + 1.0 + opts.init_extension_dof, V0), noise_prior


def _monitored(state, noise, d, opts):
    out = [state.m, state.V / (state.nu - d - 1)]
    if opts.noise_mode == "estimate":
        out.append(noise.U / (noise.upsilon - d - 1))
    return out


def vb_measurement_update(pred, noise_prior, batch, cfg, opts=VBOptions()):
    """Alternate q(z), q(x, X) and q(R) until the iterates settle.

    Returns ``(state, noise, diagnostics)``. An empty batch returns the
    inputs untouched. Convergence: the largest relative change in the
    kinematic mean, ``E[X]`` and (when estimated) ``E[R]`` drops below
    ``opts.tol``.
    """
    d = cfg.d
    Y = np.asarray(batch, dtype=float).reshape(-1, d)
    diag = VBDiagnostics()
    if Y.shape[0] == 0:
        diag.converged = True
        return pred, noise_prior, diag

    state, noise = initial_iterate(pred, noise_prior, Y, cfg, opts)
    max_iters = 1 if opts.noise_mode == "none" else opts.max_iters
    prev = None
    for it in range(1, max_iters + 1):
        _, stats = update_latents(Y, state, noise, cfg, opts)
        state = update_state(pred, stats, cfg)
        if opts.noise_mode == "estimate":
            noise = update_noise(noise_prior, stats)
        diag.iterations = it
        cur = _monitored(state, noise, d, opts)
        if opts.keep_trace:
            diag.trace.append((state, noise))
        if prev is not None:
            delta = max(relative_change(a, b) for a, b in zip(cur, prev))
            diag.deltas.append(delta)
            if delta < opts.tol:
                diag.converged = True
                break
        prev = cur
    if opts.noise_mode == "none":
        diag.converged = True
    return state, noise, diag
