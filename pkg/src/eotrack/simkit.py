"""Ground truth and measurement synthesis for the two benchmark scenarios.

Trajectories are built from a list of :class:`Segment` s, each a constant
turn rate held for a given duration (zero rate = straight leg), integrated
in closed form. ``S1`` is a single large ellipse-shaped object (a ship)
whose major axis follows the heading. ``S2`` is a rigid line of point
targets (aircraft) whose group extension is the scatter of the targets.

Measurement file format (one measurement per line, ``#`` comments)::

    # eotrack-measurements d=2 nodes=20 scans=147
    <scan> <node> <y_1> ... <y_d>

Scans and nodes are 0-indexed; floats are written with ``repr`` and
therefore round-trip exactly.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .matstat import check_spd, cholesky, symmetrize
from .model import G0

__all__ = [
    "KNOT",
    "Segment",
    "ScenarioConfig",
    "GroundTruth",
    "scenario_defaults",
    "gen_trajectory",
    "gen_trajectory_s1",
    "gen_trajectory_s2",
    "sample_uniform_ellipse",
    "sample_scan",
    "node_rngs",
    "simulate_measurements",
    "write_measurements",
    "read_measurements",
]

KNOT = 1852.0 / 3600.0


@dataclass(frozen=True)
class Segment:
    """Constant-rate turn of ``angle`` degrees (0 = straight) lasting ``duration`` seconds."""

    duration: float
    angle: float = 0.0

    @classmethod
    def turn_at(cls, angle, speed, accel):
        """Turn whose duration follows from the radial acceleration ``accel``."""
        return cls(abs(np.deg2rad(angle)) * speed / accel, angle)


_S1_SEGMENTS = (
    Segment(350.0), Segment(100.0, 45.0),
    Segment(300.0), Segment(100.0, -90.0),
    Segment(200.0), Segment(100.0, -90.0),
    Segment(320.0),
)


def _s2_segments(speed=300.0):
    return (
        Segment(300.0), Segment.turn_at(45.0, speed, 2 * G0),
        Segment(300.0), Segment.turn_at(90.0, speed, 2 * G0),
        Segment(300.0), Segment.turn_at(-90.0, speed, G0),
        Segment(200.0),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to synthesise one scenario.

    ``n_scans = None`` covers the whole segment list. S2 fields
    (``n_targets``, ``spacing``, ``split_*``, ``extension_floor``) are
    ignored for S1 and vice versa for ``semi_axes``.
    """

    scenario: str = "S1"
    segments: tuple = _S1_SEGMENTS
    speed: float = 27 * KNOT
    scan_time: float = 10.0
    n_scans: int = None
    start: tuple = (0.0, 0.0)
    heading: float = 0.0
    rate: float = 20.0
    R_true: np.ndarray = field(default_factory=lambda: np.diag([50.0**2, 50.0**2]))
    P_d: float = 1.0
    scatter: str = "uniform-ellipse"
    s: float = 0.25
    semi_axes: tuple = (170.0, 40.0)
    n_targets: int = 5
    spacing: float = 500.0
    split_angle: float = 15.0
    split_duration: float = 300.0
    extension_floor: float = 1.0

    def __post_init__(self):
        if self.scenario not in ("S1", "S2", "custom"):
            raise ParameterError(f"unknown scenario id {self.scenario!r}")
        if not self.rate > 0:
            raise ParameterError("measurement rate must be positive")
        if not 0 < self.P_d <= 1:
            raise ParameterError("P_d must lie in (0, 1]")
        if self.scatter not in ("uniform-ellipse", "gaussian"):
            raise ParameterError(f"unknown scatter model {self.scatter!r}")
        if not self.scan_time > 0 or not self.s > 0 or not self.speed > 0:
            raise ParameterError("scan_time, s and speed must be positive")
        object.__setattr__(self, "R_true", check_spd(self.R_true, "R_true"))
        object.__setattr__(self, "segments", tuple(Segment(*sg) if not isinstance(sg, Segment) else sg for sg in self.segments))

    @property
    def d(self):
        return self.R_true.shape[0]

    @property
    def group(self):
        """True for point-target formations (S2-type)."""
        return self.scenario == "S2"

    @property
    def duration(self):
        total = sum(sg.duration for sg in self.segments)
        return total + (self.split_duration if self.group else 0.0)

    @property
    def scans(self):
        if self.n_scans is not None:
            return int(self.n_scans)
        return int(np.floor(self.duration / self.scan_time + 1e-9))


def scenario_defaults(scenario_id):
    if scenario_id == "S1":
        return ScenarioConfig()
    if scenario_id == "S2":
        return ScenarioConfig(
            scenario="S2",
            segments=_s2_segments(300.0),
            speed=300.0,
            R_true=np.diag([500.0**2, 100.0**2]),
            P_d=0.8,
            start=(0.0, 0.0),
        )
    raise ParameterError(f"unknown scenario id {scenario_id!r}")


@dataclass(frozen=True)
class GroundTruth:
    """Per-scan truth; scan ``t`` is at time ``(t + 1) * scan_time``.

    ``targets`` is ``(T, n_targets, d)`` for formations and ``None`` otherwise.
    """

    times: np.ndarray
    center: np.ndarray
    velocity: np.ndarray
    heading: np.ndarray
    extension: np.ndarray
    targets: np.ndarray = None

    def __len__(self):
        return len(self.times)


def _rot(h):
    c, s = np.cos(h), np.sin(h)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _integrate(segments, speed, start, heading0, times):
    """Closed-form position and heading of a constant-speed path at ``times``."""
    times = np.asarray(times, dtype=float)
    pos = np.zeros((len(times), 2))
    head = np.zeros(len(times))
    p0 = np.asarray(start, dtype=float)
    h0 = np.deg2rad(heading0)
    t0 = 0.0
    bounds = []
    for sg in segments:
        bounds.append((t0, t0 + sg.duration, np.deg2rad(sg.angle) / sg.duration if sg.duration > 0 else 0.0))
        t0 += sg.duration
    # Extend the last leg as a straight line beyond the segment list.
    bounds.append((t0, np.inf, 0.0))
    state_p, state_h = p0.copy(), h0
    starts = []
    for a, b, w in bounds:
        starts.append((state_p.copy(), state_h))
        if np.isfinite(b):
            state_p, state_h = _advance(state_p, state_h, w, speed, b - a)
    for i, t in enumerate(times):
        for (a, b, w), (pp, hh) in zip(bounds, starts):
            if a <= t < b:
                pos[i], head[i] = _advance(pp, hh, w, speed, t - a)
                break
    return pos, head


def _advance(p, h, w, v, dt):
    if abs(w) < 1e-15:
        return p + v * dt * np.array([np.cos(h), np.sin(h)]), h
    h1 = h + w * dt
    r = v / w
    return p + r * np.array([np.sin(h1) - np.sin(h), np.cos(h) - np.cos(h1)]), h1


def _check_planar(cfg):
    if cfg.d != 2:
        raise ParameterError("trajectory generators are planar (d = 2)")


def gen_trajectory_s1(cfg):
    _check_planar(cfg)
    times = cfg.scan_time * np.arange(1, cfg.scans + 1)
    pos, head = _integrate(cfg.segments, cfg.speed, cfg.start, cfg.heading, times)
    vel = cfg.speed * np.stack([np.cos(head), np.sin(head)], axis=1)
    a, b = cfg.semi_axes
    R = _rot(head)
    ext = symmetrize(R @ np.diag([a * a, b * b]) @ np.swapaxes(R, 1, 2))
    return GroundTruth(times, pos, vel, head, ext)


def gen_trajectory_s2(cfg):
    _check_planar(cfg)
    times = cfg.scan_time * np.arange(1, cfg.scans + 1)
    pos, head = _integrate(cfg.segments, cfg.speed, cfg.start, cfg.heading, times)
    n = cfg.n_targets
    # Line abreast: offsets perpendicular to the heading, centred on the path.
    lateral = cfg.spacing * (np.arange(n) - (n - 1) / 2.0)
    normal = np.stack([-np.sin(head), np.cos(head)], axis=1)
    targets = pos[:, None, :] + lateral[None, :, None] * normal[:, None, :]
    tvel = np.repeat((cfg.speed * np.stack([np.cos(head), np.sin(head)], axis=1))[:, None, :], n, axis=1)

    t_split = sum(sg.duration for sg in cfg.segments)
    after = times >= t_split
    if np.any(after) and n >= 2:
        split_pos, split_head = _integrate(cfg.segments, cfg.speed, cfg.start, cfg.heading, [t_split])
        base = split_pos[0] + lateral[:, None] * np.array([-np.sin(split_head[0]), np.cos(split_head[0])])
        dt = times[after] - t_split
        for i, sign in ((0, -1.0), (n - 1, 1.0)):
            h = split_head[0] + sign * np.deg2rad(cfg.split_angle)
            u = np.array([np.cos(h), np.sin(h)])
            targets[after, i] = base[i] + cfg.speed * dt[:, None] * u
            tvel[after, i] = cfg.speed * u

    center = targets.mean(axis=1)
    dev = targets - center[:, None, :]
    cov = np.einsum("tni,tnj->tij", dev, dev) / n
    ext = symmetrize(cov / cfg.s + cfg.extension_floor * np.eye(2))
    return GroundTruth(times, center, tvel.mean(axis=1), head, ext, targets)


def gen_trajectory(cfg):
    return gen_trajectory_s2(cfg) if cfg.group else gen_trajectory_s1(cfg)


def sample_uniform_ellipse(center, X, n, rng, s=0.25):
    """``n`` points uniform over an ellipse, rescaled so the covariance is ``s X``.

    Uses the radius transform (direction times ``U^(1/d)``), no rejection.
    """
    center = np.asarray(center, dtype=float)
    d = center.size
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.uniform(size=(n, 1)) ** (1.0 / d)
    # Uniform on the unit ball has covariance I / (d + 2).
    scale = np.sqrt(s * (d + 2))
    return center + scale * (r * g) @ cholesky(X).T


def _scatter(center, X, n, rng, cfg):
    if cfg.scatter == "gaussian":
        return rng.multivariate_normal(center, cfg.s * X, size=n, method="cholesky")
    return sample_uniform_ellipse(center, X, n, rng, cfg.s)


def sample_scan(gt, t, n_nodes, cfg, rng):
    """Per-node measurement batches for scan ``t``.

    ``rng`` is one Generator per node (or a single Generator shared by all).
    Extended objects: ``n ~ Poisson(rate)`` points scattered over the
    extension plus ``N(0, R_true)``. Formations: each target is detected
    with probability ``P_d`` and reported with ``N(0, R_true)`` noise.
    """
    rngs = rng if isinstance(rng, (list, tuple)) else [rng] * n_nodes
    if len(rngs) != n_nodes:
        raise DomainError(f"{len(rngs)} generators for {n_nodes} nodes")
    d = cfg.d
    L_R = cholesky(cfg.R_true)
    out = []
    for g in rngs:
        if gt.targets is not None:
            hit = g.uniform(size=gt.targets.shape[1]) < cfg.P_d
            z = gt.targets[t][hit]
        else:
            z = _scatter(gt.center[t], gt.extension[t], int(g.poisson(cfg.rate)), g, cfg)
        out.append(z + g.standard_normal((len(z), d)) @ L_R.T)
    return out


def node_rngs(seed, run, n_nodes):
    """Independent generators keyed by ``(seed, run, node)``."""
    return [np.random.default_rng(np.random.SeedSequence([int(seed), int(run), k])) for k in range(n_nodes)]


def simulate_measurements(gt, n_nodes, cfg, seed=0, run=0):
    rngs = node_rngs(seed, run, n_nodes)
    return [sample_scan(gt, t, n_nodes, cfg, rngs) for t in range(len(gt))]


def write_measurements(stream, path):
    n_nodes = len(stream[0]) if stream else 0
    d = next((np.shape(b)[1] for scan in stream for b in scan if len(b)), 2)
    with open(path, "w") as fh:
        fh.write(f"# eotrack-measurements d={d} nodes={n_nodes} scans={len(stream)}\n")
        for t, scan in enumerate(stream):
            for k, batch in enumerate(scan):
                for y in np.asarray(batch, dtype=float).reshape(-1, d):
                    fh.write(f"{t} {k} " + " ".join(repr(float(v)) for v in y) + "\n")


def read_measurements(path):
    header = None
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if line.startswith("# eotrack-measurements"):
                header = dict(tok.split("=") for tok in line.split()[2:])
                continue
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append(line.split())
    if header is None:
        raise DomainError(f"{path}: missing measurement header")
    d, n_nodes, n_scans = int(header["d"]), int(header["nodes"]), int(header["scans"])
    stream = [[[] for _ in range(n_nodes)] for _ in range(n_scans)]
    for tok in rows:
        if len(tok) != d + 2:
            raise DomainError(f"{path}: malformed line {' '.join(tok)!r}")
        stream[int(tok[0])][int(tok[1])].append([float(v) for v in tok[2:]])
    return [[np.array(b, dtype=float).reshape(-1, d) for b in scan] for scan in stream]
