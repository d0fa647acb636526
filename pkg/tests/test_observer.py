import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_observer.config import load_config
from adaptive_observer.estimator import EstimatorConfig
from adaptive_observer.excitation import generate_input
from adaptive_observer.filter_bank import build_F
from adaptive_observer.lti_model import (DimensionError, pack_parameters,
                                         realization_from_matrices, simulate_step)
from adaptive_observer.observer import OverflowGuardTripped, observer_init, observer_step

SISO = dict(a=[1.52, -0.6], B=np.array([[0.43], [-0.35]]), f=[1.49, -0.55])


def drive(sys, f, cfg, x0, x_hat0, inputs, guard=1e150):
    """Run plant + observer; yields (record, true x_t)."""
    obs = observer_init(sys.dims, f, sys.C, cfg, x_hat0, guard=guard)
    x = np.asarray(x0, dtype=float)
    x_next, y = simulate_step(sys, x, inputs[0])
    for t in range(1, len(inputs)):
        x = x_next
        x_next, y_new = simulate_step(sys, x, inputs[t])
        obs, rec = observer_step(obs, y, inputs[t - 1], y_new)
        yield rec, x, obs
        y = y_new


def test_init_x_hat_exact():
    sys = realization_from_matrices(SISO["a"], SISO["B"])
    obs = observer_init(sys.dims, SISO["f"], None, EstimatorConfig(), [0.25, -1.5])
    assert np.array_equal(obs.x_hat, [0.25, -1.5]) and obs.t == 0


def test_mimo_initial_estimates_packed():
    cfg = load_config("mimo_pe")
    want = pack_parameters([1, 0.51, 0.6], [0.4, 0.21, 0.2], np.full((6, 2), 0.5)).p
    assert np.allclose(cfg.estimator.p_hat0, want, atol=1e-15)
    assert np.allclose(want[:3], [0.6, 0.3, 0.4], atol=1e-15)


def test_unstable_F_rejected():
    sys = realization_from_matrices(SISO["a"], SISO["B"])
    with pytest.raises(ValueError):
        observer_init(sys.dims, [1.0, 0.1], None, EstimatorConfig(), [0, 0])
    with pytest.raises(DimensionError):
        observer_init(sys.dims, SISO["f"], None, EstimatorConfig(), [0, 0, 0])


def test_exact_knowledge_fixed_point():
    sys = realization_from_matrices(SISO["a"], SISO["B"])
    p = pack_parameters(SISO["a"], SISO["f"], SISO["B"]).p
    cfg = EstimatorConfig(k0=1e4, k_min=1e-4, p_hat0=p)
    x0 = np.array([0.3, -0.7])
    inputs = [[np.sin(0.2 * t)] for t in range(200)]
    for rec, x, _ in drive(sys, SISO["f"], cfg, x0, x0, inputs):
        # z - phi'p_hat is zero only up to rounding
        assert np.abs(rec.p_hat - p).max() <= 1e-12
        assert np.abs(rec.x_hat - x).max() <= 1e-12 * (1 + np.abs(x).max())
        assert np.abs(rec.y - rec.y_hat).max() <= 1e-12 * (1 + np.abs(rec.y).max())


def test_initial_state_error_decays_as_F_power():
    sys = realization_from_matrices(SISO["a"], SISO["B"])
    p = pack_parameters(SISO["a"], SISO["f"], SISO["B"]).p
    # a negligible covariance pins p_hat at p while x_til_0 != 0
    cfg = EstimatorConfig(k0=1e-30, k_min=0.0, p_hat0=p, variant="ordinary")
    x0, xh0 = np.array([1.0, 2.0]), np.zeros(2)
    F = build_F(SISO["f"], 1)
    xi = x0 - xh0
    inputs = [[np.sin(0.2 * t)] for t in range(150)]
    for rec, x, _ in drive(sys, SISO["f"], cfg, x0, xh0, inputs):
        xi = F @ xi
        assert np.allclose(x - rec.x_hat, xi, rtol=0, atol=1e-12)
    assert np.linalg.norm(xi) < 1e-10


def test_siso_identity_replay_50_steps():
    cfg = load_config("siso")
    sys, p = cfg.plant, cfg.true_p
    F = build_F(cfg.f_vec, 1)
    x0 = np.array([0.5, -0.25])  # nonzero so the F^t term is exercised
    xt0 = x0 - cfg.x_hat0
    inputs = [generate_input(cfg.input, t) for t in range(51)]
    Ft = np.eye(2)
    for rec, x, _ in drive(sys, cfg.f_vec, cfg.estimator, x0, cfg.x_hat0, inputs):
        Ft = F @ Ft
        p_til = p - rec.p_hat
        y_til = rec.y - rec.y_hat
        assert np.abs(y_til - (rec.phi.T @ p_til + sys.C @ Ft @ xt0)).max() <= 1e-10
        x_til = x - rec.x_hat
        assert np.abs(x_til - (rec.S @ p_til + Ft @ xt0)).max() <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(1, 2), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_decompositions_random(q, m, r, seed):
    rng = np.random.default_rng(seed)
    a = 0.8 * rng.uniform(-1, 1, size=r) / r
    f = 0.8 * rng.uniform(-1, 1, size=r) / r
    B = rng.normal(size=(q * r, m))
    sys = realization_from_matrices(a, B)
    p = pack_parameters(a, f, B).p
    cfg = EstimatorConfig(k0=100.0, k_min=1e-3, R=np.eye(q), p_hat0=rng.normal(size=p.size))
    x0, xh0 = rng.normal(size=(2, q * r))
    F = build_F(f, q)
    Ft = np.eye(q * r)
    for rec, x, _ in drive(sys, f, cfg, x0, xh0, list(rng.normal(size=(80, m)))):
        Ft = F @ Ft
        p_til = p - rec.p_hat
        ey = (rec.y - rec.y_hat) - (rec.phi.T @ p_til + sys.C @ Ft @ (x0 - xh0))
        ex = (x - rec.x_hat) - (rec.S @ p_til + Ft @ (x0 - xh0))
        scale = 1 + np.abs(x).max() + np.abs(rec.S).max() * np.abs(p_til).max()
        assert np.abs(ey).max() <= 1e-9 * scale and np.abs(ex).max() <= 1e-9 * scale


def test_pe_convergence_siso():
    cfg = load_config("siso_rich")
    sys = cfg.plant
    x0 = np.array([1.0, -1.0])
    inputs = [generate_input(cfg.input, t) for t in range(3000)]
    p0 = np.linalg.norm(cfg.true_p - cfg.estimator.p_hat0)
    for rec, x, _ in drive(sys, cfg.f_vec, cfg.estimator, x0, cfg.x_hat0, inputs):
        pass
    assert np.linalg.norm(cfg.true_p - rec.p_hat) < 1e-3 * (1 + p0)
    assert np.linalg.norm(x - rec.x_hat) < 1e-3 * (1 + np.linalg.norm(x0))


def test_boundedness_non_pe():
    cfg = load_config("siso")
    inputs = [generate_input(cfg.input, t) for t in range(5000)]
    peak = 0.0
    for rec, x, _ in drive(cfg.plant, cfg.f_vec, cfg.estimator, cfg.x0, cfg.x_hat0, inputs):
        peak = max(peak, np.linalg.norm(rec.p_hat), np.linalg.norm(rec.x_hat))
    assert np.isfinite(peak) and peak < 10.0


def test_guard_trips_on_unstable_plant():
    cfg = load_config("mimo_pe")
    inputs = [generate_input(cfg.input, t) for t in range(400)]
    with pytest.raises(OverflowGuardTripped) as info:
        for _ in drive(cfg.plant, cfg.f_vec, cfg.estimator.__class__(
                k0=1000.0, k_min=0.0, R=np.eye(2), p_hat0=cfg.estimator.p_hat0,
                variant="ordinary"), cfg.x0, cfg.x_hat0, inputs, guard=1e6):
            pass
    assert info.value.value >= 1e6
