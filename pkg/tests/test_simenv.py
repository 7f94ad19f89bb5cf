import numpy as np
import pytest

from framepick.episode import EpisodeConfig
from framepick.errors import CalibrationError, EpisodeStateError
from framepick.simenv import (
    INITIAL_QUALITY_BASE,
    ObservationMode,
    SimEnv,
    calibrate_noise,
    quality_population,
)


def plain_config(**overrides):
    base = dict(
        n_frames=5,
        horizon=4,
        difficulty=(0.3, 0.3, 0.3, 0.3, 0.3),
        info_value=(0.4, 0.9, 0.5, 0.6, 0.2),
        propagation_scale=2.0,
        env_gain=0.4,
        novelty_decay=0.7,
        cross_segment_attenuation=0.8,
        obs_noise_sigma=0.0,
        seed=7,
        transition_noise=False,
    )
    base.update(overrides)
    return EpisodeConfig(**base)


def test_reset_picks_highest_info_value_frame():
    env = SimEnv(plain_config(info_value=(0.1, 0.9, 0.2, 0.3, 0.4)))
    env.reset()
    assert env.initial_action == 1
    assert env.history.tolist() == [0, 1, 0, 0, 0]
    assert env.round == 0


def test_reset_difficulty_free_profile_is_base():
    env = SimEnv(plain_config(difficulty=(0.0,) * 5))
    env.reset()
    assert np.allclose(env.true_quality, INITIAL_QUALITY_BASE)


def test_reset_initial_profile_formula():
    config = plain_config(
        difficulty=(1.0, 0.5, 0.0, 1.0, 0.25),
        info_value=(0.2, 0.2, 0.9, 0.2, 0.2),
        segment_boundaries=(3,),
    )
    env = SimEnv(config)
    env.reset()
    a0 = 2
    lam = config.propagation_scale
    beta = config.cross_segment_attenuation
    n = config.n_frames
    for i in range(n):
        crossings = 1 if i >= 3 else 0
        dist = abs(i - a0) + n * beta * crossings
        kernel = np.exp(-dist / lam)
        d = config.difficulty[i]
        expected = (1 - d) * INITIAL_QUALITY_BASE + d * INITIAL_QUALITY_BASE * kernel
        assert env.true_quality[i] == pytest.approx(expected, abs=1e-12)


def test_reset_is_deterministic_under_fixed_seed():
    a, b = SimEnv(plain_config()), SimEnv(plain_config())
    sa, sb = a.reset(), b.reset()
    assert np.array_equal(sa.quality, sb.quality)
    assert np.array_equal(sa.history, sb.history)


def test_step_hand_derived_example():
    # N=3, uniform q=0.5, v_a=1, rho^0=1, eta=0.4, lam=1, no segments, noise off.
    config = EpisodeConfig(
        n_frames=3,
        horizon=5,
        difficulty=(0.0, 0.0, 0.0),
        info_value=(1.0, 1.0, 1.0),
        propagation_scale=1.0,
        env_gain=0.4,
        novelty_decay=1.0,
        cross_segment_attenuation=0.0,
        seed=1,
        transition_noise=False,
    )
    env = SimEnv(config)
    env.reset()
    env.true_quality = np.array([0.5, 0.5, 0.5])
    env.step(1)
    # Independent scalar evaluation of the stated update rule.
    expected = [0.5 + 0.4 * np.exp(-1.0) * 0.5, 0.5 + 0.4 * 0.5, 0.5 + 0.4 * np.exp(-1.0) * 0.5]
    assert np.allclose(env.true_quality, expected, atol=1e-12)


def test_step_zero_gain_limit_leaves_quality_unchanged():
    env = SimEnv(plain_config(env_gain=1e-12))
    env.reset()
    before = env.true_quality.copy()
    env.step(2)
    assert np.allclose(env.true_quality, before, atol=1e-10)


def test_step_kernel_localizes_as_scale_vanishes():
    env = SimEnv(plain_config(propagation_scale=1e-9))
    env.reset()
    before = env.true_quality.copy()
    env.step(3)
    changed = env.true_quality != before
    assert changed.tolist() == [False, False, False, True, False]


def test_step_rejects_out_of_range_action():
    env = SimEnv(plain_config())
    env.reset()
    with pytest.raises(IndexError):
        env.step(5)


def test_step_after_horizon_rejected():
    env = SimEnv(plain_config(horizon=1))
    env.reset()
    _, done = env.step(0)
    assert done
    with pytest.raises(EpisodeStateError):
        env.step(0)


def test_step_before_reset_rejected():
    env = SimEnv(plain_config())
    with pytest.raises(EpisodeStateError):
        env.step(0)


def test_monotone_refinement_noise_off():
    env = SimEnv(plain_config())
    env.reset()
    rng = np.random.default_rng(0)
    for _ in range(4):
        before = env.true_quality.copy()
        env.step(int(rng.integers(env.n_frames)))
        assert (env.true_quality >= before - 1e-15).all()


def test_diminishing_returns_on_repeat_annotation():
    env = SimEnv(plain_config(horizon=2, novelty_decay=0.6))
    env.reset()
    base = env.true_quality.mean()
    env.step(2)
    gain1 = env.true_quality.mean() - base
    mid = env.true_quality.mean()
    env.step(2)
    gain2 = env.true_quality.mean() - mid
    assert gain2 < gain1


def test_saturation_is_fixed_point():
    env = SimEnv(plain_config())
    env.reset()
    env.true_quality = np.ones(env.n_frames)
    env.step(1)
    assert np.array_equal(env.true_quality, np.ones(env.n_frames))


def test_segment_attenuation_bounds_cross_segment_gain():
    config = plain_config(
        difficulty=(0.0,) * 5,
        segment_boundaries=(3,),
        info_value=(0.2, 0.2, 0.9, 0.2, 0.2),
    )
    env = SimEnv(config)
    env.reset()
    before = env.true_quality.copy()
    env.step(2)
    gains = env.true_quality - before
    # frames 1 and 3 are both one frame from the action, but 3 crosses a boundary
    assert gains[3] < gains[1]


def test_full_sequence_determinism_with_noise():
    config = plain_config(transition_noise=True, obs_noise_sigma=0.08)
    seqs = []
    for _ in range(2):
        env = SimEnv(config)
        env.reset()
        trace = []
        for action in (1, 1, 4, 0):
            env.step(action)
            trace.append(env.observe(ObservationMode.WILD).copy())
        seqs.append(np.stack(trace))
    assert np.array_equal(seqs[0], seqs[1])


def test_observe_wild_equals_oracle_at_zero_sigma():
    env = SimEnv(plain_config(obs_noise_sigma=0.0))
    env.reset()
    assert np.array_equal(
        env.observe(ObservationMode.WILD), env.observe(ObservationMode.ORACLE)
    )


def test_observe_same_round_substream_agrees():
    env = SimEnv(plain_config(obs_noise_sigma=0.1))
    env.reset()
    first = env.observe(ObservationMode.WILD)
    second = env.observe(ObservationMode.WILD)
    assert np.array_equal(first, second)
    env.step(0)
    third = env.observe(ObservationMode.WILD)
    assert not np.array_equal(first, third)


def test_oracle_observation_is_a_copy():
    env = SimEnv(plain_config())
    env.reset()
    obs = env.observe(ObservationMode.ORACLE)
    obs[0] = -1.0
    assert env.true_quality[0] >= 0.0


def big_config(sigma=0.0):
    rng = np.random.default_rng(3)
    n = 60
    return EpisodeConfig(
        n_frames=n,
        horizon=8,
        difficulty=tuple(rng.beta(2, 2, n)),
        info_value=tuple(np.clip(rng.beta(2, 2, n), 1e-6, 1)),
        segment_boundaries=(20, 41),
        propagation_scale=10.0,
        env_gain=0.4,
        novelty_decay=0.7,
        cross_segment_attenuation=0.8,
        obs_noise_sigma=sigma,
        seed=123,
    )


def test_calibration_monotone_in_target():
    config = big_config()
    sigma_99 = calibrate_noise(0.99, config, n_samples=20_000)
    sigma_51 = calibrate_noise(0.51, config, n_samples=20_000)
    sigma_42 = calibrate_noise(0.42, config, n_samples=20_000)
    assert sigma_99 < sigma_51 < sigma_42


def test_calibrated_sigma_reaches_target_pcc_on_fresh_population():
    config = big_config()
    sigma = calibrate_noise(0.51, config, n_samples=50_000, seed=11)
    q = quality_population(config, 50_000, seed=77)
    noisy = np.clip(q + np.random.default_rng(5).normal(0, sigma, q.size), 0, 1)
    pcc = np.corrcoef(q, noisy)[0, 1]
    assert pcc == pytest.approx(0.51, abs=0.02)


def test_monte_carlo_pcc_through_observe_channel():
    base = big_config()
    sigma = calibrate_noise(0.51, base, n_samples=50_000, seed=1)
    config = EpisodeConfig(**{**base.to_dict(), "obs_noise_sigma": sigma})
    rng = np.random.default_rng(9)
    true_vals, obs_vals = [], []
    while len(true_vals) < 10_000:
        env = SimEnv(config)
        env.reset()
        true_vals.extend(env.true_quality.tolist())
        obs_vals.extend(env.observe(ObservationMode.WILD).tolist())
        for _ in range(config.horizon):
            env.step(int(rng.integers(env.n_frames)))
            true_vals.extend(env.true_quality.tolist())
            obs_vals.extend(env.observe(ObservationMode.WILD).tolist())
    pcc = np.corrcoef(true_vals, obs_vals)[0, 1]
    assert pcc == pytest.approx(0.51, abs=0.03)


def test_calibration_rejects_bad_targets():
    with pytest.raises(CalibrationError):
        calibrate_noise(1.5, big_config(), n_samples=5_000)
