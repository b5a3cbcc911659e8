import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from rlcekf.errors import ConfigurationError, DataError
from rlcekf.imu_sim import (GRAVITY_N, ConstantProfile, EpisodeRecord, NoiseModel, PiecewiseConstantProfile,
                            ScaleInterval, SimConfig, SinusoidProfile, ZeroProfile, integrate_truth,
                            magnetic_direction, sample_initial_quaternion, simulate_episode,
                            synthesize_measurements, training_profile)
from rlcekf.rotation import canonical, quat_exp, quat_multiply, quat_to_rotmat

from helpers import random_quats


def test_zero_rate_keeps_attitude(rng):
    q0 = random_quats(rng, 1)[0]
    truth = integrate_truth(q0, ZeroProfile(), 0.01, 50)
    assert_allclose(truth, np.tile(q0, (51, 1)), atol=1e-15)


def test_constant_rate_half_turn(rng):
    q0 = random_quats(rng, 1)[0]
    truth = integrate_truth(q0, ConstantProfile((0.0, 0.0, math.pi)), 0.01, 100)
    expected = quat_multiply(q0, quat_exp(np.array([0.0, 0.0, math.pi])))
    assert_allclose(canonical(truth[-1]), canonical(expected), atol=1e-12)
    assert_allclose(np.linalg.norm(truth, axis=1), 1.0, atol=1e-9)


def test_piecewise_profile():
    p = PiecewiseConstantProfile(times=(0.0, 1.0), rates=((1.0, 0.0, 0.0), (0.0, 2.0, 0.0)))
    assert_array_equal(p(0.5), [1.0, 0.0, 0.0])
    assert_array_equal(p(1.5), [0.0, 2.0, 0.0])


@pytest.mark.parametrize("make", [
    lambda: ConstantProfile((11.0, 0.0, 0.0)),
    lambda: SinusoidProfile(amplitude=(8.0, 8.0, 0.0), frequency=(1.0, 1.0, 1.0)),
])
def test_rate_bound_enforced(make):
    with pytest.raises(ConfigurationError):
        make()


def test_noiseless_measurements_follow_model(rng):
    truth = integrate_truth(random_quats(rng, 1)[0], training_profile(), 0.01, 99)
    rec = synthesize_measurements(truth, training_profile(), NoiseModel(), seed=1)
    m_n = magnetic_direction()
    for k in range(len(rec)):
        R = quat_to_rotmat(truth[k])
        assert np.abs(rec.acc[k] + R.T @ GRAVITY_N).max() < 1e-12
        assert np.abs(rec.mag[k] - R.T @ m_n).max() < 1e-12
    assert_allclose(rec.gyro, [training_profile()(t) for t in rec.t], atol=0)


def test_standard_noise_values():
    n = NoiseModel.standard()
    assert_array_equal(n.gyro_cov, 0.0003 * np.eye(3))
    assert_array_equal(n.acc_cov, 0.0005 * np.eye(3))
    assert_array_equal(n.mag_cov, 0.0003 * np.eye(3))


def test_sample_covariance_matches():
    cov = np.array([[5e-4, 1e-4, 0.0], [1e-4, 4e-4, 0.0], [0.0, 0.0, 6e-4]])
    truth = np.tile([1.0, 0.0, 0.0, 0.0], (100_000, 1))
    rec = synthesize_measurements(truth, ZeroProfile(), NoiseModel(acc_cov=cov), seed=3)
    e = rec.acc + GRAVITY_N
    assert np.abs(np.cov(e.T) - cov).max() < 0.05 * np.abs(cov).max()


def test_non_psd_rejected():
    with pytest.raises(ConfigurationError):
        NoiseModel(acc_cov=np.diag([1e-3, -1e-3, 1e-3]))


def test_bias_mean():
    n = 20_000
    truth = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    bias = np.array([0.02, -0.01, 0.0])
    rec = synthesize_measurements(truth, ZeroProfile(), NoiseModel.standard(bias), seed=4)
    sigma = math.sqrt(0.0003)
    assert np.all(np.abs(rec.gyro.mean(axis=0) - bias) < 3 * sigma / math.sqrt(n))


def test_scale_schedule_applies():
    truth = np.tile([1.0, 0.0, 0.0, 0.0], (20_000, 1))
    sched = (ScaleInterval(0.0, 100.0, acc=100.0),)
    base = synthesize_measurements(truth, ZeroProfile(), NoiseModel.standard(), seed=5)
    loud = synthesize_measurements(truth, ZeroProfile(), NoiseModel(
        0.0003 * np.eye(3), 0.0005 * np.eye(3), 0.0003 * np.eye(3), schedule=sched), seed=5)
    # same draws, scaled by 10 in the first 100 s only
    e0, e1 = base.acc + GRAVITY_N, loud.acc + GRAVITY_N
    assert_allclose(e1[:10_000], 10.0 * e0[:10_000], rtol=1e-9, atol=1e-15)
    assert_array_equal(e1[10_000:], e0[10_000:])
    assert_array_equal(loud.mag, base.mag)


def test_initial_quaternion_determinism_and_symmetry():
    assert_array_equal(sample_initial_quaternion(7), sample_initial_quaternion(7))
    rng = np.random.default_rng(0)
    qs = np.array([sample_initial_quaternion(rng) for _ in range(10_000)])
    assert_allclose(np.linalg.norm(qs, axis=1), 1.0, atol=1e-12)
    assert np.all(np.abs(qs.mean(axis=0)) < 0.05)


def test_episode_determinism():
    a = simulate_episode(SimConfig(n_samples=200), 11)
    b = simulate_episode(SimConfig(n_samples=200), 11)
    for k in ("t", "gyro", "acc", "mag", "truth"):
        assert_array_equal(getattr(a, k), getattr(b, k))


def test_fixed_initial_attitude_keeps_noise():
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    a = simulate_episode(SimConfig(n_samples=100), 11)
    b = simulate_episode(SimConfig(n_samples=100), 11, q0=q0)
    assert_array_equal(a.gyro, b.gyro)
    assert_array_equal(b.truth[0], q0)


def test_bias_does_not_change_other_draws():
    a = simulate_episode(SimConfig(n_samples=100), 2)
    b = simulate_episode(SimConfig(noise=NoiseModel.standard((0.02, 0.02, 0.02)), n_samples=100), 2)
    assert_allclose(b.gyro - a.gyro, 0.02, atol=1e-15)
    assert_array_equal(a.acc, b.acc)


def test_record_validation_and_split():
    t = np.arange(10) * 0.01
    z = np.zeros((10, 3))
    with pytest.raises(DataError):
        EpisodeRecord(0.01, t[:1], z[:1], z[:1], z[:1])
    with pytest.raises(DataError):
        EpisodeRecord(0.01, t, z, z, np.full((10, 3), np.nan))
    rec = EpisodeRecord(0.01, t, z, z, z)
    first, second = rec.split()
    assert len(first) == len(second) == 5
    assert_array_equal(second.t, t[5:])
    frames = list(rec.frames())
    assert len(frames) == 10 and frames[3].y.shape == (6,)
