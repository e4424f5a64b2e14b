import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from flatcam import optics, seq, sim
from flatcam.errors import DimensionMismatch, ValidationError
from flatcam.optics import OpticsConfig
from flatcam.recon import SeparableSystem

from oracles import kron_by_loops, vec


def random_system(n=8, m=8, seed=0):
    rng = np.random.default_rng(seed)
    return SeparableSystem(rng.normal(size=(m, n)), rng.normal(size=(m, n)))


def toy_cfg(n=8):
    return OpticsConfig(d_um=100.0, delta_um=10.0, pixel_um=12.0, n_scene=n, m_sensor=n)


def test_rank1_scene_gives_rank1_capture():
    s = random_system()
    a, b = np.arange(1.0, 9.0), np.linspace(-1, 2, 8)
    y = sim.capture(s, np.outer(a, b)).values
    assert np.allclose(y, np.outer(s.phi_l @ a, s.phi_r @ b))
    assert sim.numerical_rank(y) == 1


def test_zero_scene_is_pure_noise():
    s = random_system()
    y = sim.capture(s, np.zeros((8, 8)), noise_sigma=0.5, rng_seed=3).values
    e = np.random.default_rng(3).normal(0.0, 0.5, size=(8, 8))
    assert np.array_equal(y, e)


def test_capture_matches_kronecker():
    s = random_system()
    x = np.random.default_rng(9).random((8, 8))
    y = sim.capture(s, x).values
    ref = kron_by_loops(s.phi_r, s.phi_l) @ vec(x)
    assert np.linalg.norm(vec(y) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_capture_is_seeded_and_validates():
    s = random_system()
    x = np.ones((8, 8))
    a = sim.capture(s, x, 0.1, rng_seed=5).values
    assert np.array_equal(a, sim.capture(s, x, 0.1, rng_seed=5).values)
    assert not np.array_equal(a, sim.capture(s, x, 0.1, rng_seed=6).values)
    with pytest.raises(DimensionMismatch):
        sim.capture(s, np.ones((7, 8)))
    with pytest.raises(ValidationError):
        sim.capture(s, x, noise_sigma=-1.0)
    with pytest.raises(ValidationError):
        sim.capture(s, x, frames=0)


def test_frame_averaging_divides_variance():
    s = random_system(n=4, m=64)
    z = np.zeros((4, 4))
    one = sim.capture(s, z, 1.0, rng_seed=1).values.var()
    twenty = sim.capture(s, z, 1.0, rng_seed=1, frames=20).values.var()
    assert twenty == pytest.approx(one / 20, rel=1e-12)


def test_dense_capture():
    cfg = toy_cfg()
    L = cfg.required_features()
    mask = seq.outer_mask(seq.gen_random_binary(L, 0.5, 1), seq.gen_random_binary(L, 0.5, 2))
    dense = optics.build_dense_transfer(mask, cfg)
    s = optics.system_from_mask(mask, cfg)
    x = np.random.default_rng(4).random((8, 8))
    a, b = sim.capture_dense(dense, x).values, sim.capture(s, x).values
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)
    z = sim.capture_dense(dense, np.zeros((8, 8)), 0.2, rng_seed=1).values
    assert np.array_equal(z, np.random.default_rng(1).normal(0, 0.2, (8, 8)))
    point = np.zeros((8, 8))
    point[2, 5] = 1.0
    col = dense.phi[:, 2 + 8 * 5].reshape(8, 8, order="F")
    assert np.array_equal(sim.capture_dense(dense, point).values, col)
    with pytest.raises(DimensionMismatch):
        sim.capture_dense(dense, np.zeros((4, 4)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 16))
def test_separable_and_dense_capture_agree(seed, n):
    cfg = OpticsConfig(d_um=60.0, delta_um=9.0, pixel_um=11.0, n_scene=n, m_sensor=n)
    L = cfg.required_features()
    rng = np.random.default_rng(seed)
    a = rng.choice([-1.0, 1.0], L)
    b = rng.choice([-1.0, 1.0], L)
    mask = seq.outer_mask(a, b)
    x = rng.random((n, n))
    ys = sim.capture(optics.system_from_mask(mask, cfg), x).values
    yd = sim.capture_dense(optics.build_dense_transfer(mask, cfg), x).values
    assert np.linalg.norm(ys - yd) <= 1e-10 * max(np.linalg.norm(yd), 1e-300)


def test_mean_correct_examples():
    assert np.allclose(sim.mean_correct(np.full((5, 5), 3.3)).values, 0)
    y = np.random.default_rng(0).normal(size=(6, 6))
    c = sim.mean_correct(y)
    assert c.corrected
    assert np.abs(c.values.sum(axis=0)).max() <= 1e-9 * np.linalg.norm(y)
    assert np.abs(c.values.sum(axis=1)).max() <= 1e-9 * np.linalg.norm(y)
    assert np.allclose(sim.mean_correct(c).values, c.values, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(a=arrays(np.float64, (5, 7), elements=st.floats(-1e3, 1e3)),
       b=arrays(np.float64, (5, 7), elements=st.floats(-1e3, 1e3)),
       alpha=st.floats(-10, 10), beta=st.floats(-10, 10))
def test_mean_correct_is_linear_and_idempotent(a, b, alpha, beta):
    lhs = sim.mean_correct(alpha * a + beta * b).values
    rhs = alpha * sim.mean_correct(a).values + beta * sim.mean_correct(b).values
    scale = 1 + np.abs(a).max() + np.abs(b).max()
    assert np.allclose(lhs, rhs, atol=1e-9 * scale * (1 + abs(alpha) + abs(beta)))
    once = sim.mean_correct(a).values
    assert np.allclose(sim.mean_correct(once).values, once, atol=1e-9 * scale)


def point_source_through_printed_mask(n=32):
    cfg = OpticsConfig(d_um=500.0, delta_um=30.0, pixel_um=25.0, n_scene=n, m_sensor=n)
    a = optics.cover(seq.gen_m_sequence(8).values, cfg)
    system = optics.build_optical_system(a, a, cfg)
    x = np.zeros((n, n))
    x[n // 3, n // 2] = 1.0
    return system, x


def test_point_source_rank_two_then_one():
    system, x = point_source_through_printed_mask()
    y = sim.capture(system, x)
    assert sim.numerical_rank(y.values, 1e-8) == 2
    assert sim.numerical_rank(sim.mean_correct(y).values, 1e-8) == 1


def test_corrected_printed_capture_is_proportional_to_signed_capture():
    system, _ = point_source_through_printed_mask(16)
    x = np.random.default_rng(2).random((16, 16))
    printed = sim.mean_correct(sim.capture(system, x)).values
    signed = sim.mean_correct(sim.capture(system.signed, x)).values
    assert np.allclose(printed, 0.5 * signed, rtol=0, atol=1e-9 * np.abs(signed).max())
    truth = system.corrected_system()
    assert np.allclose(truth.forward(x), printed, atol=1e-9 * np.abs(printed).max())


def test_numerical_rank_examples():
    assert sim.numerical_rank(np.eye(4), 1e-6) == 4
    rng = np.random.default_rng(1)
    a, b, c = rng.normal(size=(3, 9))
    assert sim.numerical_rank(np.outer(a, b)) == 1
    assert sim.numerical_rank(np.outer(a, b) + np.outer(c, np.ones(9))) == 2
    assert sim.numerical_rank(np.zeros((3, 3))) == 0
    with pytest.raises(ValidationError):
        sim.numerical_rank(np.eye(2), 0)


def test_phantom_is_piecewise_constant():
    x = sim.phantom(32, rng_seed=1)
    assert x.shape == (32, 32)
    assert 0 <= x.min() and x.max() <= 1
    assert len(np.unique(x)) <= 7
    assert np.array_equal(x, sim.phantom(32, rng_seed=1))
