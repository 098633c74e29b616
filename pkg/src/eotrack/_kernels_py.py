"""Pure numpy implementations of the hot kernels.

These are the reference for the compiled versions in ``_ckernels.pyx``;
both must agree to rounding error.
"""
import numpy as np

from .matstat import spd_inv


def _segment_sum(values, offsets):
    # Exclusive prefix sums; safe for empty segments (unlike np.add.reduceat).
    csum = np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(values, axis=0)])
    return csum[offsets[1:]] - csum[offsets[:-1]]


def latent_sums(Y, offsets, A, B, hm, ref, no_noise=False):
    """Per-node sums of latent-point statistics.

    Parameters
    ----------
    Y : (M, d) array
        Measurements of all nodes, node ``k`` owning rows
        ``offsets[k]:offsets[k+1]``.
    offsets : (N+1,) int array
    A : (N, d, d) array
        Expected noise precision per node.
    B : (N, d, d) array
        Expected extension precision divided by ``s`` per node.
    hm : (N, d) array
        Predicted measurement centre (position part of the state).
    ref : (N, d) array
        Reference point subtracted before forming first and second moments.
    no_noise : bool
        Treat the noise precision as infinite: latent points equal the
        measurements and their covariance is zero.

    Returns
    -------
    sum_z, sum_zz, sum_res, Sigma
        ``sum (mu - ref)``, ``sum [(mu - ref)(mu - ref)^T + Sigma]``,
        ``sum [(y - mu)(y - mu)^T + Sigma]`` and the shared latent covariance.
    """
    Y = np.asarray(Y, dtype=float)
    offsets = np.asarray(offsets, dtype=np.int64)
    n_nodes = offsets.size - 1
    d = Y.shape[1] if Y.ndim == 2 else hm.shape[1]
    Y = Y.reshape(-1, d)
    counts = np.diff(offsets).astype(float)
    owner = np.repeat(np.arange(n_nodes), np.diff(offsets))

    if no_noise:
        Sigma = np.zeros((n_nodes, d, d))
        mu = Y
    else:
        Sigma = spd_inv(A + B)
        rhs = np.einsum("mij,mj->mi", A[owner], Y) + (B @ hm[..., None])[owner, :, 0]
        mu = np.einsum("mij,mj->mi", Sigma[owner], rhs)

    dz = mu - ref[owner]
    res = Y - mu
    sum_z = _segment_sum(dz, offsets)
    sum_zz = _segment_sum(dz[:, :, None] * dz[:, None, :], offsets)
    sum_res = _segment_sum(res[:, :, None] * res[:, None, :], offsets)
    sum_zz = sum_zz + counts[:, None, None] * Sigma
    sum_res = sum_res + counts[:, None, None] * Sigma
    return sum_z, sum_zz, sum_res, Sigma


def admm_consensus(omega, indptr, indices, rho, rounds, phi=None, lam=None):
    """Run ``rounds`` synchronous ADMM averaging rounds.

    Returns the final ``(phi, lam)``. ``phi`` defaults to ``omega`` and
    ``lam`` to zero.
    """
    omega = np.asarray(omega, dtype=float)
    n = omega.shape[0]
    adj = np.zeros((n, n))
    for k in range(n):
        adj[k, indices[indptr[k]:indptr[k + 1]]] = 1.0
    deg = adj.sum(axis=1)[:, None]
    phi = omega.copy() if phi is None else np.array(phi, dtype=float)
    lam = np.zeros_like(omega) if lam is None else np.array(lam, dtype=float)
    denom = 1.0 + 2.0 * rho * deg
    for _ in range(int(rounds)):
        phi = (omega - 2.0 * lam + rho * (deg * phi + adj @ phi)) / denom
        lam = lam + 0.5 * rho * (deg * phi - adj @ phi)
    return phi, lam
