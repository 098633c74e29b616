"""Sensor-network graphs and ADMM distributed averaging.

Every node ``k`` holds a vector ``omega_k``; the synchronous iteration

    phi_k <- (omega_k - 2 lam_k + rho * sum_{j in N_k} (phi_k + phi_j)) / (1 + 2 rho |N_k|)
    lam_k <- lam_k + rho / 2 * sum_{j in N_k} (phi_k - phi_j)

drives all ``phi_k`` to the network average of the ``omega_k``, using only
one-hop exchanges.

Edge-list text format (1-indexed)::

    # optional comments
    4            <- node count
    1 2          <- one undirected edge per line
    2 3
    3 4
    1 0.25 1.5   <- optional "node x y" position lines
"""
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import DomainError, NetworkError

__all__ = [
    "SensorNetwork",
    "AdmmState",
    "generate_network",
    "admm_round",
    "run_consensus",
    "stat_length",
    "pack_stats",
    "unpack_stats",
    "read_edge_list",
    "write_edge_list",
]


def _component_count(n, neighbors):
    seen = np.zeros(n, dtype=bool)
    components = 0
    for start in range(n):
        if seen[start]:
            continue
        components += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            k = queue.popleft()
            for j in neighbors[k]:
                if not seen[j]:
                    seen[j] = True
                    queue.append(j)
    return components


@dataclass(frozen=True, eq=False)
class SensorNetwork:
    """Undirected, loop-free, connected graph; nodes are ``0..n_nodes-1``."""

    n_nodes: int
    neighbors: tuple
    positions: np.ndarray = field(default=None)

    def __post_init__(self):
        nbrs = tuple(tuple(sorted(set(int(j) for j in row))) for row in self.neighbors)
        if len(nbrs) != self.n_nodes:
            raise NetworkError("neighbor list length differs from n_nodes")
        for k, row in enumerate(nbrs):
            for j in row:
                if j == k:
                    raise NetworkError(f"self-loop at node {k}")
                if not 0 <= j < self.n_nodes:
                    raise NetworkError(f"node {k} lists unknown neighbor {j}")
                if k not in nbrs[j]:
                    raise NetworkError(f"edge ({k}, {j}) is not symmetric")
        if self.n_nodes < 1 or _component_count(self.n_nodes, nbrs) != 1:
            raise NetworkError("network is not connected")
        object.__setattr__(self, "neighbors", nbrs)
        if self.positions is not None:
            object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))

    @classmethod
    def from_edges(cls, n_nodes, edges, positions=None):
        nbrs = [[] for _ in range(n_nodes)]
        for k, j in edges:
            nbrs[k].append(j)
            nbrs[j].append(k)
        return cls(n_nodes, nbrs, positions)

    @classmethod
    def complete(cls, n_nodes):
        return cls(n_nodes, [[j for j in range(n_nodes) if j != k] for k in range(n_nodes)])

    @property
    def edges(self):
        return [(k, j) for k in range(self.n_nodes) for j in self.neighbors[k] if k < j]

    @property
    def degrees(self):
        return np.array([len(row) for row in self.neighbors])

    def adjacency(self):
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=int)
        for k, row in enumerate(self.neighbors):
            A[k, list(row)] = 1
        return A

    @cached_property
    def csr(self):
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(self.degrees)
        indices = np.array([j for row in self.neighbors for j in row], dtype=np.int64)
        return indptr, indices

    def __eq__(self, other):
        if not isinstance(other, SensorNetwork):
            return NotImplemented
        return self.n_nodes == other.n_nodes and self.neighbors == other.neighbors

    __hash__ = None


def generate_network(n, side, radius, rng, max_retries=1000):
    """Random geometric graph on ``[0, side]^2``, redrawn until connected."""
    if n < 1:
        raise NetworkError("need at least one node")
    if not radius > 0:
        raise NetworkError("radius must be positive")
    for _ in range(max_retries):
        pos = rng.uniform(0.0, side, size=(n, 2))
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        adj = (dist <= radius) & ~np.eye(n, dtype=bool)
        nbrs = [np.flatnonzero(row).tolist() for row in adj]
        if _component_count(n, nbrs) == 1:
            return SensorNetwork(n, nbrs, pos)
    raise NetworkError(f"no connected graph after {max_retries} draws (n={n}, radius={radius})")


def read_edge_list(path):
    n = None
    edges, positions = [], {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if n is None:
                if len(tok) != 1:
                    raise NetworkError(f"{path}:{lineno}: expected node count header")
                n = int(tok[0])
            elif len(tok) == 2:
                edges.append((int(tok[0]) - 1, int(tok[1]) - 1))
            elif len(tok) == 3:
                positions[int(tok[0]) - 1] = (float(tok[1]), float(tok[2]))
            else:
                raise NetworkError(f"{path}:{lineno}: cannot parse {line!r}")
    if n is None:
        raise NetworkError(f"{path}: empty edge list")
    pos = None
    if positions:
        if len(positions) != n:
            raise NetworkError(f"{path}: positions given for {len(positions)} of {n} nodes")
        pos = np.array([positions[k] for k in range(n)])
    return SensorNetwork.from_edges(n, edges, pos)


def write_edge_list(net, path):
    with open(path, "w") as fh:
        fh.write(f"{net.n_nodes}\n")
        for k, j in net.edges:
            fh.write(f"{k + 1} {j + 1}\n")
        if net.positions is not None:
            for k, (x, y) in enumerate(net.positions):
                fh.write(f"{k + 1} {float(x)!r} {float(y)!r}\n")


def stat_length(d):
    return d + 2 * d * d + 1


def pack_stats(sum_z, sum_zz, sum_res, counts):
    """Flatten per-node sums into ``(N, d + 2 d^2 + 1)`` consensus payloads."""
    n, d = sum_z.shape
    return np.concatenate(
        [sum_z, sum_zz.reshape(n, d * d), sum_res.reshape(n, d * d), np.reshape(counts, (n, 1))],
        axis=1,
    )


def unpack_stats(payload, d):
    """Inverse of :func:`pack_stats`; matrix blocks are symmetrised."""
    payload = np.atleast_2d(payload)
    n = payload.shape[0]
    if payload.shape[1] != stat_length(d):
        raise DomainError(f"payload length {payload.shape[1]} does not match d={d}")
    z = payload[:, :d]
    zz = payload[:, d:d + d * d].reshape(n, d, d)
    res = payload[:, d + d * d:d + 2 * d * d].reshape(n, d, d)
    zz = 0.5 * (zz + np.swapaxes(zz, 1, 2))
    res = 0.5 * (res + np.swapaxes(res, 1, 2))
    return z, zz, res, payload[:, -1]


@dataclass(frozen=True)
class AdmmState:
    phi: np.ndarray
    lam: np.ndarray
    rho: float = 0.5

    @classmethod
    def start(cls, omega, rho=0.5):
        omega = np.asarray(omega, dtype=float)
        return cls(omega.copy(), np.zeros_like(omega), rho)


def _check_payload(net, omega):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1:
        omega = omega[:, None]
    if omega.shape[0] != net.n_nodes:
        raise DomainError(f"{omega.shape[0]} payloads for {net.n_nodes} nodes")
    return omega


def admm_round(state, net, omega):
    """One synchronous round for all nodes (Jacobi order)."""
    omega = _check_payload(net, omega)
    if state.phi.shape != omega.shape or state.lam.shape != omega.shape:
        raise DomainError("state and payload shapes differ")
    indptr, indices = net.csr
    phi, lam = kernels.admm_consensus(omega, indptr, indices, state.rho, 1, state.phi, state.lam)
    return AdmmState(phi, lam, state.rho)


def run_consensus(net, omega, rho=0.5, L=30):
    """``L`` rounds from ``phi = omega``, ``lam = 0``; returns per-node ``phi``."""
    if L < 0:
        raise DomainError("L must be >= 0")
    raw = np.asarray(omega, dtype=float)
    omega = _check_payload(net, raw)
    indptr, indices = net.csr
    phi, _ = kernels.admm_consensus(omega, indptr, indices, rho, L)
    return phi.reshape(raw.shape)
