import numpy as np
import pytest
from dataclasses import replace

from eotrack.consensus import SensorNetwork, generate_network
from eotrack.dfilter import (
    AlgorithmVariant,
    FilterOptions,
    NodeBelief,
    distributed_vb_update,
    initial_beliefs,
    local_predict,
    track,
)
from eotrack.errors import DomainError, ParameterError
from eotrack.metrics import gwd_squared_arrays
from eotrack.simkit import ScenarioConfig, gen_trajectory, simulate_measurements
from eotrack.vbcore import GIWState, NoiseBelief, VBOptions, predict, vb_measurement_update


def _belief(m=(1000.0, 2000.0, 10.0, 0.0, 0.0, 0.0)):
    return NodeBelief(GIWState(np.array(m), np.eye(3), 8.0, np.diag([1e4, 2e3])), NoiseBelief(5.0, 3000.0 * np.eye(2)))


def _batches(rng, n_nodes, lo=3, hi=12):
    cov = np.diag([4000.0, 900.0])
    return [rng.multivariate_normal([1000.0, 2000.0], cov, size=int(rng.integers(lo, hi))) for _ in range(n_nodes)]


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_local_predict_matches_vbcore(cfg):
    b = _belief()
    out = local_predict(b, cfg)
    ref = predict(b.state, cfg)
    np.testing.assert_array_equal(out.state.m, ref.m)
    np.testing.assert_array_equal(out.state.P, ref.P)
    np.testing.assert_array_equal(out.state.V, ref.V)
    assert out.state.nu == ref.nu
    np.testing.assert_array_equal(out.noise.U, b.noise.U)
    nu5 = NodeBelief(GIWState(b.state.m, b.state.P, 5.0, b.state.V), b.noise)
    assert local_predict(nu5, cfg).state.nu == 5.0


def test_complete_graph_matches_centralized(rng, cfg):
    n = 6
    net = SensorNetwork.complete(n)
    batches = _batches(rng, n)
    pooled = np.concatenate(batches)
    b = _belief(tuple(list(pooled.mean(axis=0)) + [10.0, 0.0, 0.0, 0.0]))
    opts = FilterOptions(L=100, warm_start=True)
    post, _ = distributed_vb_update([b] * n, batches, net, cfg, opts)
    state, noise, _ = vb_measurement_update(b.state, b.noise, pooled, cfg, opts.vb_options(AlgorithmVariant()))
    for p in post:
        assert _rel(p.state.m, state.m) < 1e-6
        assert _rel(p.state.V, state.V) < 1e-6
        assert p.state.nu == pytest.approx(state.nu, rel=1e-12)
        assert _rel(p.noise.U, noise.U) < 1e-6
        assert p.noise.upsilon == pytest.approx(noise.upsilon, rel=1e-12)


def test_default_initialisation_close_to_centralized(rng, cfg):
    # Each node starts VB from its own measurement mean, so agreement is approximate.
    n = 6
    net = SensorNetwork.complete(n)
    batches = _batches(rng, n)
    pooled = np.concatenate(batches)
    b = _belief()
    post, _ = distributed_vb_update([b] * n, batches, net, cfg, FilterOptions(L=100))
    state, noise, _ = vb_measurement_update(b.state, b.noise, pooled, cfg, VBOptions())
    for p in post:
        assert _rel(p.state.m, state.m) < 1e-3
        assert _rel(p.state.V, state.V) < 2e-2
        assert _rel(p.noise.U, noise.U) < 2e-2


def test_no_R_single_pass_is_koch(rng, cfg):
    n = 8
    net = generate_network(n, 2.0, 1.0, np.random.default_rng(1))
    batches = _batches(rng, n)
    pooled = np.concatenate(batches)
    pred = _belief()
    post, diag = distributed_vb_update([pred] * n, batches, net, cfg, FilterOptions(L=600), AlgorithmVariant("dVBEOT_no_R"))
    assert diag.iterations == 1
    N = len(pooled)
    ybar = pooled.mean(axis=0)
    S = (pooled - ybar).T @ (pooled - ybar) / N
    P, m = pred.state.P, pred.state.m
    b = cfg.s / N + P[0, 0]
    w = P[:, 0] / b
    e = ybar - m[:2]
    for p in post:
        np.testing.assert_allclose(p.state.m, m + np.kron(w, e), rtol=1e-9)
        np.testing.assert_allclose(p.state.V, pred.state.V + N / cfg.s * S + np.outer(e, e) / b, rtol=1e-8)
        np.testing.assert_allclose(p.state.P, P - b * np.outer(w, w), rtol=1e-12)
        assert p.state.nu == pred.state.nu + N


def test_non_cooperative_single_node_equals_dvbeot(rng, cfg):
    net = SensorNetwork(1, [[]])
    batches = _batches(rng, 1)
    a, _ = distributed_vb_update([_belief()], batches, net, cfg, FilterOptions(), AlgorithmVariant("non_cooperative"))
    b, _ = distributed_vb_update([_belief()], batches, net, cfg, FilterOptions(), AlgorithmVariant("dVBEOT"))
    np.testing.assert_array_equal(a[0].state.m, b[0].state.m)
    np.testing.assert_array_equal(a[0].state.V, b[0].state.V)
    np.testing.assert_array_equal(a[0].noise.U, b[0].noise.U)


def test_non_cooperative_uses_own_batch(rng, cfg):
    n = 4
    net = SensorNetwork.complete(n)
    batches = _batches(rng, n)
    post, _ = distributed_vb_update([_belief()] * n, batches, net, cfg, FilterOptions(), AlgorithmVariant("non_cooperative"))
    for k in range(n):
        state, noise, _ = vb_measurement_update(_belief().state, _belief().noise, batches[k], cfg, VBOptions())
        assert post[k].state.nu == state.nu
        assert _rel(post[k].state.m, state.m) < 1e-9
        assert _rel(post[k].state.V, state.V) < 1e-9


def test_empty_batches(rng, cfg):
    n = 5
    net = SensorNetwork.complete(n)
    batches = _batches(rng, n)
    batches[2] = np.zeros((0, 2))
    post, _ = distributed_vb_update([_belief()] * n, batches, net, cfg, FilterOptions(L=100))
    assert post[2].state.nu == post[0].state.nu == 8.0 + sum(len(b) for b in batches)
    none, diag = distributed_vb_update([_belief()] * n, [np.zeros((0, 2))] * n, net, cfg)
    assert diag.iterations == 0
    for p in none:
        np.testing.assert_array_equal(p.state.m, _belief().state.m)


def test_known_R_keeps_noise_belief(rng, cfg):
    n = 3
    net = SensorNetwork.complete(n)
    v = AlgorithmVariant("dVBEOT_known_R", 2500.0 * np.eye(2))
    post, _ = distributed_vb_update([_belief()] * n, _batches(rng, n), net, cfg, FilterOptions(L=50), v)
    for p in post:
        np.testing.assert_array_equal(p.noise.U, _belief().noise.U)


def test_variant_validation(cfg):
    with pytest.raises(ParameterError):
        AlgorithmVariant("bogus")
    with pytest.raises(ParameterError):
        AlgorithmVariant("dVBEOT_known_R")
    with pytest.raises(DomainError):
        distributed_vb_update([_belief()] * 2, [np.zeros((1, 2))], SensorNetwork.complete(2), cfg)


def test_initial_beliefs(cfg):
    batches = [np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros((0, 2))]
    b = initial_beliefs(batches, cfg)
    np.testing.assert_array_equal(b[0].state.m, [2.0, 3.0, 0, 0, 0, 0])
    np.testing.assert_array_equal(b[1].state.m[:2], [2.0, 3.0])
    np.testing.assert_array_equal(b[0].state.P, np.eye(3))
    assert b[0].state.nu == pytest.approx(3.1)
    assert b[0].noise.upsilon == 3.0
    np.testing.assert_array_equal(b[0].state.V, 1e5 * np.eye(2))
    np.testing.assert_array_equal(b[0].noise.U, 100.0 * np.eye(2))


@pytest.fixture(scope="module")
def small_s1():
    sc = ScenarioConfig(n_scans=40, rate=10.0)
    gt = gen_trajectory(sc)
    net = generate_network(8, 2.0, 0.9, np.random.default_rng(4))
    stream = simulate_measurements(gt, net.n_nodes, sc, seed=3)
    return sc, gt, net, stream


def test_track_centralized_dispatch(small_s1, cfg):
    sc, gt, net, stream = small_s1
    res = track(stream, net, cfg, FilterOptions(), AlgorithmVariant("centralized"))
    pooled = [np.concatenate(scan) for scan in stream]
    b = initial_beliefs([pooled[0]], cfg)[0]
    state, noise = b.state, b.noise
    for t, Y in enumerate(pooled):
        state, noise, _ = vb_measurement_update(state, noise, Y, cfg, VBOptions())
        np.testing.assert_array_equal(res.position[t, 3], state.m[:2])
        np.testing.assert_array_equal(res.extension[t, 5], state.V / (state.nu - 3))
        state = predict(state, cfg)


def test_track_consensus_agreement_and_accuracy(small_s1, cfg):
    sc, gt, net, stream = small_s1
    res = track(stream, net, cfg, FilterOptions(L=30))
    ext = res.extension
    spread = np.max(np.linalg.norm(ext[:, :, None] - ext[:, None, :], axis=(-2, -1)), axis=(1, 2))
    assert np.all(spread < 0.01 * np.linalg.norm(ext.mean(axis=1), axis=(-2, -1)))
    err = gwd_squared_arrays(res.position, sc.s * ext, gt.center[:, None], sc.s * gt.extension[:, None])
    assert np.all(np.isfinite(err))
    assert np.sqrt(err[10:].mean()) < 100.0


def test_track_deterministic(small_s1, cfg):
    sc, gt, net, stream = small_s1
    a = track(stream, net, cfg)
    b = track(stream, net, cfg)
    np.testing.assert_array_equal(a.position, b.position)
    np.testing.assert_array_equal(a.extension, b.extension)
    np.testing.assert_array_equal(a.noise, b.noise)


def test_stationary_noise_free_object_converges(cfg):
    sc = ScenarioConfig(n_scans=30, rate=50.0, speed=1e-9, R_true=1e-9 * np.eye(2), scatter="gaussian")
    gt = gen_trajectory(sc)
    net = SensorNetwork.complete(4)
    stream = simulate_measurements(gt, 4, sc, seed=1)
    res = track(stream, net, cfg, FilterOptions(L=50), AlgorithmVariant("dVBEOT"))
    # Standard error of the pooled centroid at the last scan is sqrt(s X / 200).
    se = np.sqrt(np.linalg.eigvalsh(sc.s * gt.extension[-1]).max() / 200.0)
    assert np.linalg.norm(res.position[-1, 0] - gt.center[-1]) < 3 * se
    assert np.all(np.isfinite(res.extension))


@pytest.mark.slow
def test_s1_smoke_full_size(cfg):
    sc = ScenarioConfig()
    gt = gen_trajectory(sc)
    net = generate_network(20, 2.5, 0.8, np.random.default_rng(0))
    stream = simulate_measurements(gt, net.n_nodes, sc, seed=0)
    res = track(stream, net, cfg)
    err = gwd_squared_arrays(res.position, sc.s * res.extension, gt.center[:, None], sc.s * gt.extension[:, None])
    assert len(gt) == 147 and np.all(np.isfinite(err))
