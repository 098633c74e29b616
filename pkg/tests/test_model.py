import numpy as np
import pytest

from eotrack.errors import ParameterError
from eotrack.model import G0, H, MotionParams, ModelConfig, build_F, build_Q, kron_apply, measurement_projection, position


def test_F_zero_scan_time_is_identity():
    np.testing.assert_array_equal(build_F(MotionParams(scan_time=0.0)), np.eye(3))


def test_F_reference_values():
    F = build_F(MotionParams(scan_time=10.0, maneuver_correlation=40.0))
    expected = np.array([[1.0, 10.0, 50.0], [0.0, 1.0, 10.0], [0.0, 0.0, np.exp(-0.25)]])
    np.testing.assert_allclose(F, expected, rtol=0, atol=1e-15)
    assert F[2, 2] == pytest.approx(0.778801, abs=1e-6)


def test_F_constant_velocity_semigroup():
    F1 = build_F(MotionParams(scan_time=3.0))
    F2 = build_F(MotionParams(scan_time=7.0))
    F12 = build_F(MotionParams(scan_time=10.0))
    np.testing.assert_allclose((F1 @ F2)[:2, :2], F12[:2, :2], atol=1e-12)


def test_Q_values():
    np.testing.assert_array_equal(build_Q(MotionParams(scan_time=0.0)), np.zeros((3, 3)))
    Q = build_Q(MotionParams(scan_time=10.0, maneuver_correlation=40.0, accel_rms=9.81))
    np.testing.assert_allclose(Q, 9.81**2 * (1 - np.exp(-0.5)) * np.diag([0.0, 0.0, 1.0]), rtol=1e-14)
    assert np.linalg.matrix_rank(Q) <= 1
    assert np.all(np.linalg.eigvalsh(Q) >= 0)


def test_default_accel_is_one_g():
    assert MotionParams().accel_rms == G0 == 9.80665


def test_projection():
    Hd = measurement_projection(2)
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    np.testing.assert_array_equal(Hd @ x, [1.0, 2.0])
    np.testing.assert_array_equal(position(x, 2), [1.0, 2.0])
    np.testing.assert_array_equal(Hd @ Hd.T, np.eye(2))
    F = build_F(MotionParams(scan_time=10.0))
    np.testing.assert_allclose(H @ F, [[1.0, 10.0, 50.0]])


@pytest.mark.parametrize("d", [1, 2, 3])
def test_kron_apply_matches_materialised(rng, d):
    F = build_F(MotionParams())
    x = rng.normal(size=3 * d)
    np.testing.assert_allclose(kron_apply(F, x, d), np.kron(F, np.eye(d)) @ x, atol=1e-12)


def test_acceleration_channel_contracts():
    for dt in (0.0, 1.0, 10.0, 100.0):
        f = build_F(MotionParams(scan_time=dt))[2, 2]
        assert 0 < f <= 1


@pytest.mark.parametrize("kwargs", [
    {"scan_time": -1.0}, {"maneuver_correlation": 0.0}, {"accel_rms": -1.0},
    {"extension_decay": 0.0}, {"extension_dof": 0.0},
])
def test_motion_validation(kwargs):
    with pytest.raises(ParameterError):
        MotionParams(**kwargs)


def test_model_config_validation():
    with pytest.raises(ParameterError):
        ModelConfig(d=0)
    with pytest.raises(ParameterError):
        ModelConfig(s=0.0)
