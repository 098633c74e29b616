"""Motion and measurement model matrices.

The kinematic state of a ``d``-dimensional object is stacked as
``[p_1..p_d, v_1..v_d, a_1..a_d]``. With that ordering every lifted
operator ``A (x) I_d`` acts on ``x.reshape(3, d)`` as a plain left
multiplication, so the 3d x 3d matrices are never formed.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

G0 = 9.80665  # m/s^2

__all__ = [
    "G0",
    "MotionParams",
    "ModelConfig",
    "build_F",
    "build_Q",
    "H",
    "measurement_projection",
    "kron_apply",
    "position",
]

H = np.array([[1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class MotionParams:
    """Parameters of the kinematic and extension dynamics.

    ``accel_rms`` is in m/s^2; use ``accel_rms=1 * G0`` for "1 g".
    ``extension_dof`` is only consumed by the ground-truth generator.
    """

    scan_time: float = 10.0
    maneuver_correlation: float = 40.0
    accel_rms: float = G0
    extension_decay: float = 10.0
    extension_dof: float = 50.0

    def __post_init__(self):
        if self.scan_time < 0:
            raise ParameterError("scan_time must be >= 0")
        if self.maneuver_correlation <= 0:
            raise ParameterError("maneuver_correlation must be > 0")
        if self.accel_rms < 0:
            raise ParameterError("accel_rms must be >= 0")
        if self.extension_decay <= 0:
            raise ParameterError("extension_decay must be > 0")
        if self.extension_dof <= 0:
            raise ParameterError("extension_dof must be > 0")


@dataclass(frozen=True)
class ModelConfig:
    d: int = 2
    s: float = 0.25
    motion: MotionParams = field(default_factory=MotionParams)

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError("d must be >= 1")
        if not self.s > 0:
            raise ParameterError("s must be > 0")


def build_F(p):
    dt, theta = p.scan_time, p.maneuver_correlation
    return np.array(
        [
            [1.0, dt, 0.5 * dt * dt],
            [0.0, 1.0, dt],
            [0.0, 0.0, np.exp(-dt / theta)],
        ]
    )


def build_Q(p):
    dt, theta = p.scan_time, p.maneuver_correlation
    Q = np.zeros((3, 3))
    Q[2, 2] = p.accel_rms**2 * (1.0 - np.exp(-2.0 * dt / theta))
    return Q


def measurement_projection(d):
    """The ``d x 3d`` matrix ``H (x) I_d`` selecting the position block."""
    return np.kron(H, np.eye(d))


def kron_apply(A, x, d):
    """Apply ``A (x) I_d`` to ``x`` (shape ``(..., k*d)``) without forming the Kronecker product."""
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    blocks = x.reshape(*lead, -1, d)
    return (A @ blocks).reshape(*lead, A.shape[-2] * d)


def position(x, d):
    """First ``d`` entries of a stacked state, i.e. ``(H (x) I_d) x``."""
    return np.asarray(x)[..., :d]
