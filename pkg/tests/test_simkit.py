import numpy as np
import pytest

from eotrack.errors import ParameterError
from eotrack.model import G0
from eotrack.simkit import (
    KNOT,
    ScenarioConfig,
    Segment,
    gen_trajectory,
    gen_trajectory_s1,
    gen_trajectory_s2,
    read_measurements,
    sample_scan,
    sample_uniform_ellipse,
    scenario_defaults,
    simulate_measurements,
    write_measurements,
)


def test_defaults():
    s1 = scenario_defaults("S1")
    np.testing.assert_array_equal(s1.R_true, np.diag([2500.0, 2500.0]))
    assert s1.rate == 20 and s1.scan_time == 10 and s1.s == 0.25
    s2 = scenario_defaults("S2")
    assert s2.P_d == 0.8 and s2.n_targets == 5
    np.testing.assert_array_equal(s2.R_true, np.diag([500.0**2, 100.0**2]))
    with pytest.raises(ParameterError):
        scenario_defaults("S3")


@pytest.mark.parametrize("kwargs", [{"rate": 0.0}, {"P_d": 0.0}, {"P_d": 1.5}, {"scatter": "x"}, {"R_true": -np.eye(2)}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ScenarioConfig(**kwargs)


def test_s1_geometry():
    gt = gen_trajectory_s1(scenario_defaults("S1"))
    assert len(gt) == 147
    np.testing.assert_allclose(np.linalg.norm(gt.velocity, axis=1), 27 * KNOT, atol=1e-9)
    assert 27 * KNOT == pytest.approx(13.89, abs=5e-3)
    # Heading change over the first turn (scans 35..45) is 45 degrees.
    assert np.rad2deg(gt.heading[45] - gt.heading[34]) == pytest.approx(45.0, abs=1e-9)
    assert np.rad2deg(gt.heading[-1] - gt.heading[0]) == pytest.approx(-135.0, abs=1e-9)
    eig = np.linalg.eigvalsh(gt.extension)
    np.testing.assert_allclose(eig, np.tile([40.0**2, 170.0**2], (len(gt), 1)), rtol=1e-12)
    # Major axis aligned with heading.
    major = np.linalg.eigh(gt.extension)[1][:, :, 1]
    heading = np.stack([np.cos(gt.heading), np.sin(gt.heading)], axis=1)
    np.testing.assert_allclose(np.abs(np.sum(major * heading, axis=1)), 1.0, atol=1e-12)
    # Positions consistent with speed: distance between scans never exceeds v * dt.
    step = np.linalg.norm(np.diff(gt.center, axis=0), axis=1)
    assert np.all(step <= 27 * KNOT * 10 + 1e-9)


def test_straight_and_turn_closed_form():
    cfg = ScenarioConfig(segments=(Segment(50.0, 90.0),), speed=10.0, n_scans=5, scan_time=10.0)
    gt = gen_trajectory_s1(cfg)
    r = 10.0 / (np.pi / 2 / 50.0)
    np.testing.assert_allclose(gt.center[4], [r, r], atol=1e-9)
    np.testing.assert_allclose(gt.heading[4], np.pi / 2, atol=1e-12)


def test_s2_geometry():
    cfg = scenario_defaults("S2")
    gt = gen_trajectory_s2(cfg)
    t_split = sum(sg.duration for sg in cfg.segments)
    pre = gt.times < t_split
    gaps = np.linalg.norm(np.diff(gt.targets[pre], axis=1), axis=2)
    np.testing.assert_allclose(gaps, 500.0, atol=1e-6)
    np.testing.assert_allclose(np.linalg.norm(gt.velocity[pre], axis=1), 300.0, atol=1e-9)
    assert 300.0**2 / (2 * G0) == pytest.approx(4588.7, abs=0.05)
    assert cfg.segments[1].duration == pytest.approx(np.pi / 4 * 300.0 / (2 * G0), rel=1e-5)
    post = ~pre
    assert post.sum() > 10
    # Outer targets diverge after the split.
    assert np.all(np.diff(np.linalg.norm(gt.targets[post, 0] - gt.targets[post, 4], axis=1)) > 0)
    assert np.all(np.linalg.eigvalsh(gt.extension) > 0)


def test_uniform_ellipse_covariance():
    rng = np.random.default_rng(0)
    X = np.array([[170.0**2, 3000.0], [3000.0, 40.0**2 + 500]])
    z = sample_uniform_ellipse(np.zeros(2), X, 10**6, rng, s=0.25)
    np.testing.assert_allclose(np.cov(z.T), X / 4, rtol=0.01, atol=0.01 * np.abs(X).max() / 4)


def test_uniform_ellipse_support():
    rng = np.random.default_rng(1)
    X = np.diag([9.0, 1.0])
    z = sample_uniform_ellipse([1.0, 2.0], X, 5000, rng, s=0.25)
    q = np.einsum("ni,ij,nj->n", z - [1.0, 2.0], np.linalg.inv(X), z - [1.0, 2.0])
    assert q.max() <= 1.0 + 1e-12


def test_zero_noise_measurements_inside_ellipse():
    cfg = ScenarioConfig(R_true=1e-300 * np.eye(2), n_scans=3)
    gt = gen_trajectory(cfg)
    batch = sample_scan(gt, 1, 4, cfg, np.random.default_rng(2))
    for Y in batch:
        d = Y - gt.center[1]
        assert np.all(np.einsum("ni,ij,nj->n", d, np.linalg.inv(gt.extension[1]), d) <= 1 + 1e-9)


def test_poisson_batch_sizes():
    cfg = ScenarioConfig(n_scans=1)
    gt = gen_trajectory(cfg)
    rng = np.random.default_rng(3)
    sizes = [len(sample_scan(gt, 0, 1, cfg, [rng])[0]) for _ in range(10**4)]
    assert abs(np.mean(sizes) - 20) < 0.02 * 20


def test_s2_detection_rate():
    cfg = scenario_defaults("S2")
    gt = gen_trajectory(cfg)
    rng = np.random.default_rng(4)
    sizes = [len(sample_scan(gt, 0, 1, cfg, [rng])[0]) for _ in range(10**4)]
    assert abs(np.mean(sizes) - 4.0) < 0.1


def test_streams_deterministic_and_node_keyed():
    cfg = ScenarioConfig(n_scans=5)
    gt = gen_trajectory(cfg)
    a = simulate_measurements(gt, 4, cfg, seed=9)
    b = simulate_measurements(gt, 4, cfg, seed=9)
    c = simulate_measurements(gt, 6, cfg, seed=9)
    for sa, sb, sc in zip(a, b, c):
        for k in range(4):
            np.testing.assert_array_equal(sa[k], sb[k])
            np.testing.assert_array_equal(sa[k], sc[k])
    assert not np.array_equal(a[0][0][:1], a[0][1][:1])


def test_measurement_file_round_trip(tmp_path):
    cfg = scenario_defaults("S2")
    gt = gen_trajectory(cfg)
    stream = simulate_measurements(gt, 3, cfg, seed=1)[:6]
    path = tmp_path / "meas.txt"
    write_measurements(stream, path)
    back = read_measurements(path)
    assert len(back) == 6
    for sa, sb in zip(stream, back):
        for ya, yb in zip(sa, sb):
            np.testing.assert_array_equal(ya, yb)
