"""Distributed VB extended-object tracker and its baselines.

Each node runs the GIW prediction locally. The measurement update alternates

1. VBE: every node forms the latent-point posteriors of its own batch and
   packs reference-centred sums ``[sum z, sum z z^T, sum res, n_k]``;
2. consensus: ``L`` ADMM rounds average the packed sums over the network;
3. VBM: every node rebuilds the pooled statistics from its consensus value
   (pooled count ``N * avg n``) and updates q(x, X) and q(R).

Variants:

``dVBEOT``
    the above, with q(R) inferred.
``dVBEOT_known_R``
    the noise precision is fixed to ``R_true^-1``; no q(R).
``dVBEOT_no_R``
    sensor noise neglected; latent points equal the measurements and a
    single VB pass is made.
``non_cooperative``
    no consensus; each node uses only its own batch.
``centralized``
    one filter on the pooled measurements (all nodes report the same belief).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .consensus import SensorNetwork, pack_stats, run_consensus, unpack_stats
from .errors import DomainError, ParameterError
from .matstat import check_spd, spd_inv, symmetrize
from .model import build_F, build_Q
from .vbcore import (
    GIWState,
    NoiseBelief,
    VBOptions,
    predict_arrays,
    update_state_arrays,
    vb_measurement_update,
)
from . import kernels
from ._kernels_py import _segment_sum

__all__ = [
    "VARIANTS",
    "AlgorithmVariant",
    "NodeBelief",
    "FilterOptions",
    "TrackResult",
    "initial_beliefs",
    "local_predict",
    "distributed_vb_update",
    "track",
]

VARIANTS = ("dVBEOT", "dVBEOT_known_R", "dVBEOT_no_R", "non_cooperative", "centralized")


@dataclass(frozen=True)
class AlgorithmVariant:
    name: str = "dVBEOT"
    R_true: np.ndarray = None

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise ParameterError(f"unknown variant {self.name!r}; choose from {VARIANTS}")
        if self.name == "dVBEOT_known_R":
            if self.R_true is None:
                raise ParameterError("dVBEOT_known_R needs R_true")
            object.__setattr__(self, "R_true", check_spd(self.R_true, "R_true"))

    @property
    def noise_mode(self):
        return {"dVBEOT_known_R": "known", "dVBEOT_no_R": "none"}.get(self.name, "estimate")

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class NodeBelief:
    state: GIWState
    noise: NoiseBelief


@dataclass(frozen=True)
class FilterOptions:
    """Settings shared by all variants.

    The ``init_*`` / ``prior_*`` fields give the initial beliefs and the
    per-scan VB starting point as multiples of the identity (metres^2):
    ``V = init_extension_scale I``, ``nu = d + 1 + init_extension_dof``,
    ``U = prior_noise_scale I``, ``upsilon = d + 1 + prior_noise_dof``.
    The defaults are ``0.1 I`` and ``1e-4 I`` in km^2 (so ``E[X]`` starts
    as a circle of radius 1 km), written in metres^2.
    ``center_stats`` first averages the nodes' starting positions over the
    network and subtracts that point from the latent points before they
    are summed. Second moments then stay small, so the residual error of
    a finite number of consensus rounds does not swamp the spread estimate.
    """

    vb_iters: int = 20
    L: int = 30
    rho: float = 0.5
    tol: float = 1e-6
    center_stats: bool = True
    warm_start: bool = False
    keep_trace: bool = False
    init_extension_scale: float = 1e5
    init_extension_dof: float = 0.1
    prior_noise_scale: float = 100.0
    prior_noise_dof: float = 0.0

    def vb_options(self, variant):
        return VBOptions(
            max_iters=self.vb_iters,
            tol=self.tol,
            noise_mode=variant.noise_mode,
            R_true=variant.R_true,
            warm_start=self.warm_start,
            keep_trace=self.keep_trace,
            init_extension_scale=self.init_extension_scale,
            init_extension_dof=self.init_extension_dof,
        )


@dataclass
class _Batch:
    """Beliefs of all nodes as stacked arrays."""

    m: np.ndarray
    P: np.ndarray
    nu: np.ndarray
    V: np.ndarray
    upsilon: np.ndarray
    U: np.ndarray

    @classmethod
    def stack(cls, beliefs):
        return cls(
            np.stack([b.state.m for b in beliefs]),
            np.stack([b.state.P for b in beliefs]),
            np.array([b.state.nu for b in beliefs]),
            np.stack([b.state.V for b in beliefs]),
            np.array([b.noise.upsilon for b in beliefs]),
            np.stack([b.noise.U for b in beliefs]),
        )

    def unstack(self):
        return [
            NodeBelief(GIWState(self.m[k], self.P[k], self.nu[k], self.V[k]), NoiseBelief(self.upsilon[k], self.U[k]))
            for k in range(self.m.shape[0])
        ]

    def copy(self):
        return _Batch(*(np.array(a, copy=True) for a in (self.m, self.P, self.nu, self.V, self.upsilon, self.U)))


def initial_beliefs(first_batches, cfg, opts=FilterOptions()):
    """Per-node beliefs before the first scan.

    The position part of each mean is the node's first-scan measurement
    mean; nodes without first-scan measurements use the mean over all
    first-scan measurements instead.
    """
    d = cfg.d
    batches = [np.asarray(b, dtype=float).reshape(-1, d) for b in first_batches]
    pooled = np.concatenate(batches) if batches else np.zeros((0, d))
    fallback = pooled.mean(axis=0) if len(pooled) else np.zeros(d)
    out = []
    for Y in batches:
        m = np.zeros(3 * d)
        m[:d] = Y.mean(axis=0) if len(Y) else fallback
        state = GIWState(m, np.eye(3), d + 1.0 + opts.init_extension_dof, opts.init_extension_scale * np.eye(d))
        noise = NoiseBelief(d + 1.0 + opts.prior_noise_dof, opts.prior_noise_scale * np.eye(d))
        out.append(NodeBelief(state, noise))
    return out


def _predict_batch(B, cfg):
    mp = cfg.motion
    decay = np.exp(-mp.scan_time / mp.extension_decay)
    m, P, nu, V = predict_arrays(B.m, B.P, B.nu, B.V, build_F(mp), build_Q(mp), decay, cfg.d)
    return _Batch(m, P, nu, V, B.upsilon.copy(), B.U.copy())


def local_predict(belief, cfg):
    """Prediction at one node; the noise belief is carried over unchanged."""
    out = _predict_batch(_Batch.stack([belief]), cfg)
    return out.unstack()[0]


def _psd_clip(M):
    w, Q = np.linalg.eigh(symmetrize(M))
    return (Q * np.maximum(w, 0.0)[..., None, :]) @ np.swapaxes(Q, -1, -2)


def _relative_change(new, old):
    axes = tuple(range(1, new.ndim))
    num = np.sqrt(np.sum((new - old) ** 2, axis=axes))
    den = np.maximum(np.sqrt(np.sum(old**2, axis=axes)), np.finfo(float).tiny)
    return num / den


def _concat(batches, d):
    arrays = [np.asarray(b, dtype=float).reshape(-1, d) for b in batches]
    counts = np.array([len(a) for a in arrays], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    Y = np.concatenate(arrays) if arrays else np.zeros((0, d))
    return Y, counts, offsets


@dataclass
class UpdateDiagnostics:
    iterations: int = 0
    converged: bool = False
    deltas: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def distributed_vb_update(beliefs, batches, net, cfg, opts=FilterOptions(), variant=AlgorithmVariant()):
    """One distributed VB measurement update for all nodes.

    ``beliefs`` are the per-node predictions, ``batches`` the per-node
    ``(n_k, d)`` measurement arrays. Returns ``(posteriors, diagnostics)``.
    """
    if not isinstance(net, SensorNetwork):
        raise DomainError("net must be a SensorNetwork")
    n_nodes = net.n_nodes
    if len(beliefs) != n_nodes or len(batches) != n_nodes:
        raise DomainError("need one belief and one batch per node")
    if variant.name == "centralized":
        raise ParameterError("use track() or vbcore for the centralized variant")
    pred = _Batch.stack(beliefs)
    post, diag = _update_batch(pred, batches, net, cfg, opts, variant)
    return post.unstack(), diag


def _update_batch(pred, batches, net, cfg, opts, variant):
    d, s = cfg.d, cfg.s
    n_nodes = pred.m.shape[0]
    Y, counts, offsets = _concat(batches, d)
    diag = UpdateDiagnostics()
    cooperative = variant.name != "non_cooperative"
    if cooperative and counts.sum() == 0:
        diag.converged = True
        return pred.copy(), diag

    # Per-scan starting point of the VB iterations.
    cur = pred.copy()
    if not opts.warm_start:
        sums = _segment_sum(Y, offsets)
        has = counts > 0
        cur.m = np.zeros_like(pred.m)
        cur.m[:, :d] = pred.m[:, :d]
        cur.m[has, :d] = sums[has] / counts[has, None]
        cur.nu = np.full(n_nodes, d + 1.0 + opts.init_extension_dof)
        cur.V = np.broadcast_to(opts.init_extension_scale * np.eye(d), (n_nodes, d, d)).copy()

    mode = variant.noise_mode
    no_noise = mode == "none"
    if mode == "known":
        A_fixed = np.broadcast_to(spd_inv(variant.R_true), (n_nodes, d, d)).copy()
    elif no_noise:
        A_fixed = np.zeros((n_nodes, d, d))
    n_iters = 1 if no_noise else opts.vb_iters
    scale = n_nodes if cooperative else 1

    # Common centring point: nodes agree on it before the VB loop, so the
    # centred sums of different nodes refer to (nearly) the same origin.
    if opts.center_stats:
        ref = cur.m[:, :d].copy()
        if cooperative and opts.L > 0:
            ref = run_consensus(net, ref, opts.rho, opts.L)
    else:
        ref = np.zeros((n_nodes, d))

    prev = None
    for it in range(1, n_iters + 1):
        A = A_fixed if mode != "estimate" else cur.upsilon[:, None, None] * spd_inv(cur.U)
        B = (cur.nu / s)[:, None, None] * spd_inv(cur.V)
        hm = cur.m[:, :d]
        sum_z, sum_zz, sum_res, _ = kernels.latent_sums(Y, offsets, A, B, hm, ref, no_noise)
        payload = pack_stats(sum_z, sum_zz, sum_res, counts.astype(float))
        if cooperative and opts.L > 0:
            payload = run_consensus(net, payload, opts.rho, opts.L)
        pz, pzz, pres, pn = unpack_stats(payload, d)

        total = np.rint(scale * pn)
        ok = total >= 1
        safe_pn = np.where(ok, pn, 1.0)
        mean_dz = pz / safe_pn[:, None]
        zbar = ref + mean_dz
        S = _psd_clip(pzz / safe_pn[:, None, None] - mean_dz[:, :, None] * mean_dz[:, None, :])
        residual = _psd_clip(scale * pres)
        cnt = np.where(ok, total, 1.0)

        m, P, nu, V = update_state_arrays(pred.m, pred.P, pred.nu, pred.V, cnt, zbar, S, s, d)
        nxt = pred.copy()
        nxt.m[ok], nxt.P[ok], nxt.nu[ok], nxt.V[ok] = m[ok], P[ok], nu[ok], V[ok]
        if mode == "estimate":
            nxt.upsilon[ok] = pred.upsilon[ok] + total[ok]
            nxt.U[ok] = symmetrize(pred.U[ok] + residual[ok])
        cur = nxt

        diag.iterations = it
        if opts.keep_trace:
            diag.trace.append(cur.copy())
        monitored = [cur.m, cur.V / (cur.nu - d - 1)[:, None, None]]
        if mode == "estimate":
            monitored.append(cur.U / (cur.upsilon - d - 1)[:, None, None])
        if prev is not None:
            delta = float(max(np.max(_relative_change(a, b)) for a, b in zip(monitored, prev)))
            diag.deltas.append(delta)
            if delta < opts.tol:
                diag.converged = True
                break
        prev = monitored
    if no_noise:
        diag.converged = True
    return cur, diag


def _centralized_update(pred, batches, cfg, opts, variant):
    d = cfg.d
    Y, _, _ = _concat(batches, d)
    node = pred.unstack()[0]
    state, noise, vbdiag = vb_measurement_update(node.state, node.noise, Y, cfg, opts.vb_options(variant))
    diag = UpdateDiagnostics(vbdiag.iterations, vbdiag.converged, list(vbdiag.deltas))
    if opts.keep_trace:
        diag.trace = [_Batch.stack([NodeBelief(st, nz)] * pred.m.shape[0]) for st, nz in vbdiag.trace]
    return _Batch.stack([NodeBelief(state, noise)] * pred.m.shape[0]), diag


@dataclass
class TrackResult:
    """Per-scan, per-node posterior summaries.

    Arrays are indexed ``[scan, node, ...]``: ``position`` ``(T, N, d)``,
    ``velocity`` ``(T, N, d)``, ``extension`` ``E[X]`` ``(T, N, d, d)``,
    ``noise`` ``E[R]`` ``(T, N, d, d)`` (NaN where undefined),
    ``iterations`` ``(T,)``.
    """

    position: np.ndarray
    velocity: np.ndarray
    extension: np.ndarray
    noise: np.ndarray
    iterations: np.ndarray
    beliefs: list = None
    traces: list = None


def _noise_mean(B, d):
    out = np.full(B.U.shape, np.nan)
    ok = B.upsilon > d + 1
    out[ok] = B.U[ok] / (B.upsilon[ok] - d - 1)[:, None, None]
    return out


def track(stream, net, cfg, opts=FilterOptions(), variant=AlgorithmVariant(), keep_beliefs=False):
    """Run the tracker over a measurement stream.

    ``stream`` is a sequence over scans of per-node batch lists. Scans
    alternate the measurement update and the local prediction; the
    posterior after each update is recorded.
    """
    stream = list(stream)
    d = cfg.d
    T, n_nodes = len(stream), net.n_nodes
    position = np.zeros((T, n_nodes, d))
    velocity = np.zeros((T, n_nodes, d))
    extension = np.zeros((T, n_nodes, d, d))
    noise = np.zeros((T, n_nodes, d, d))
    iterations = np.zeros(T, dtype=int)
    beliefs_log = [] if keep_beliefs else None
    traces = [] if opts.keep_trace else None
    if T == 0:
        return TrackResult(position, velocity, extension, noise, iterations, beliefs_log, traces)

    centralized = variant.name == "centralized"
    first = stream[0]
    if centralized:
        pooled = [np.concatenate([np.asarray(b, dtype=float).reshape(-1, d) for b in first])]
        pred = _Batch.stack(initial_beliefs(pooled, cfg, opts) * n_nodes)
    else:
        pred = _Batch.stack(initial_beliefs(first, cfg, opts))

    for t, batches in enumerate(stream):
        if len(batches) != n_nodes:
            raise DomainError(f"scan {t}: {len(batches)} batches for {n_nodes} nodes")
        if centralized:
            post, diag = _centralized_update(pred, batches, cfg, opts, variant)
        else:
            post, diag = _update_batch(pred, batches, net, cfg, opts, variant)
        position[t] = post.m[:, :d]
        velocity[t] = post.m[:, d:2 * d]
        extension[t] = post.V / (post.nu - d - 1)[:, None, None]
        noise[t] = _noise_mean(post, d)
        iterations[t] = diag.iterations
        if keep_beliefs:
            beliefs_log.append(post.unstack())
        if traces is not None:
            traces.append([(b.m[:, :d].copy(), b.V / (b.nu - d - 1)[:, None, None]) for b in diag.trace])
        pred = _predict_batch(post, cfg)
    return TrackResult(position, velocity, extension, noise, iterations, beliefs_log, traces)
