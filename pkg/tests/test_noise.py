import numpy as np
import pytest

import spikesim.noise as noise_mod
from spikesim.config import NoiseConfig, SensorConfig
from spikesim.exceptions import ConfigurationError, DegenerateConfigError
from spikesim.noise import (NoiseParams, sample_photon_luminance, sample_spatial_noise,
                            sample_thermal_threshold, simulate_noisy, threshold_floor)
from spikesim.rng import SOURCE_SHOT, SOURCE_THERMAL, KeyedStream
from spikesim.sensor import AccumulatorState, simulate_ideal, step_accumulator
from spikesim.stream import FLAG_NOISY, LuminanceSequence

CFG = SensorConfig(height=6, width=7)


def test_zero_sigma_maps_are_means():
    ncfg = NoiseConfig(sigma_alpha=0, sigma_dark=0, sigma_C=0, sigma_V=0, mu_alpha=1.3,
                       mu_dark=2e-3)
    p = sample_spatial_noise(CFG, ncfg)
    assert (p.alpha_map == 1.3).all() and (p.dark_map == 2e-3).all()
    assert (p.cap_map == 0).all() and (p.bias_map == 0).all()


def test_maps_deterministic_per_seed():
    a = sample_spatial_noise(CFG, NoiseConfig(rng_seed=5))
    assert a == sample_spatial_noise(CFG, NoiseConfig(rng_seed=5))
    assert not a == sample_spatial_noise(CFG, NoiseConfig(rng_seed=6))


def test_alpha_map_statistics():
    cfg = SensorConfig(height=256, width=256)
    ncfg = NoiseConfig(mu_alpha=1.0, sigma_alpha=0.05, rng_seed=1)
    a = sample_spatial_noise(cfg, ncfg).alpha_map
    assert abs(a.mean() - 1.0) <= 3 * 0.05 / 256
    assert a.std() == pytest.approx(0.05, rel=0.05)


def test_rejection_keeps_maps_physical():
    ncfg = NoiseConfig(mu_alpha=0.1, sigma_alpha=0.2, mu_dark=1e-4, sigma_dark=1e-3,
                       sigma_C=1e-5, sigma_V=1.0, rng_seed=3)
    cfg = SensorConfig(height=64, width=64)
    p = sample_spatial_noise(cfg, ncfg)
    p.validate(cfg)
    assert (p.alpha_map > 0).all() and (p.dark_map >= 0).all() and (p.theta(cfg) > 0).all()


def test_rejection_cap_raises(monkeypatch):
    monkeypatch.setattr(noise_mod, "MAX_REDRAWS", 2)
    ncfg = NoiseConfig(mu_alpha=1e-3, sigma_alpha=1.0, rng_seed=0)
    with pytest.raises(DegenerateConfigError):
        sample_spatial_noise(SensorConfig(height=64, width=64), ncfg)


def test_redraw_is_local_to_pixel():
    # a pixel's maps do not depend on how many other pixels needed redraws
    ncfg = NoiseConfig(mu_alpha=0.05, sigma_alpha=0.05, rng_seed=8)
    small = sample_spatial_noise(SensorConfig(height=1, width=40), ncfg)
    large = sample_spatial_noise(SensorConfig(height=2, width=40), ncfg)
    assert np.array_equal(small.alpha_map[0], large.alpha_map[0])


def test_photon_luminance_zero_and_negative():
    rng = KeyedStream(0, SOURCE_SHOT, 0)
    assert (sample_photon_luminance(np.zeros((3, 3)), CFG, rng) == 0).all()
    with pytest.raises(ConfigurationError):
        sample_photon_luminance(-np.ones((2, 2)), CFG, rng)


def test_photon_luminance_statistics():
    mu = 1e4 / CFG.photon_gain
    L = sample_photon_luminance(np.full(100_000, mu), CFG, KeyedStream(4, SOURCE_SHOT, 0))
    assert L.mean() == pytest.approx(mu, rel=0.01)
    assert L.var() == pytest.approx(mu / CFG.photon_gain, rel=0.05)


def test_photon_luminance_unbiased_small_mean():
    mu = 0.037
    n = 1_000_000
    L = sample_photon_luminance(np.full(n, mu), CFG, KeyedStream(9, SOURCE_SHOT, 1))
    sem = np.sqrt(mu / CFG.photon_gain / n)
    assert abs(L.mean() - mu) < 3 * sem


def test_thermal_threshold_zero_temperature():
    cfg = CFG.replace(temperature=0.0)
    p = sample_spatial_noise(cfg, NoiseConfig(rng_seed=2))
    phi = sample_thermal_threshold(p, cfg, KeyedStream(0, SOURCE_THERMAL, 0))
    assert np.array_equal(phi, p.theta(cfg))


def test_thermal_threshold_std():
    cfg = SensorConfig(height=1, width=100_000)
    p = NoiseParams.uniform(cfg)
    phi = sample_thermal_threshold(p, cfg, KeyedStream(1, SOURCE_THERMAL, 0))
    expected = cfg.capacitance * np.sqrt(cfg.boltzmann_k * cfg.temperature / cfg.capacitance)
    assert phi.std() == pytest.approx(expected, rel=0.02)


def test_thermal_threshold_floor_and_reproducible():
    cfg = SensorConfig(height=20, width=20, boltzmann_k=1.0)  # sigma far above the swing
    p = NoiseParams.uniform(cfg)
    rng = KeyedStream(3, SOURCE_THERMAL, 7)
    phi = sample_thermal_threshold(p, cfg, rng)
    assert phi.min() == threshold_floor(cfg)
    assert np.array_equal(phi, sample_thermal_threshold(p, cfg, rng))


def _composed(lum, cfg, ncfg, params):
    """simulate_noisy spelled out with the public per-step samplers."""
    steps = lum.steps_per_frame(cfg.delta_t)
    state = AccumulatorState.zeros(cfg.shape)
    out = []
    n = 0
    for frame in lum.frames:
        for _ in range(steps):
            L = sample_photon_luminance(frame, cfg, KeyedStream(ncfg.rng_seed, SOURCE_SHOT, n))
            phi = sample_thermal_threshold(params, cfg,
                                           KeyedStream(ncfg.rng_seed, SOURCE_THERMAL, n))
            state, spikes = step_accumulator(state, params.alpha_map * L + params.dark_map,
                                             phi, cfg)
            out.append(spikes)
            n += 1
    return np.array(out)


def test_fused_kernel_matches_component_composition(rng):
    cfg = SensorConfig(height=5, width=6, boltzmann_k=1e-9)
    ncfg = NoiseConfig(rng_seed=21)
    params = sample_spatial_noise(cfg, ncfg)
    # photon means on both sides of the inversion/PTRS switch
    frames = rng.uniform(0.02, 0.3, size=(3, 5, 6)) * cfg.phi / cfg.delta_t
    lum = LuminanceSequence(frames, 7 * cfg.delta_t)
    got = simulate_noisy(lum, cfg, ncfg, params)
    assert got.flags == FLAG_NOISY
    assert np.array_equal(got.to_array(), _composed(lum, cfg, ncfg, params))


def test_degenerate_reduction_small(rng):
    frames = rng.uniform(0, 1.5, size=(4, 6, 7)) * CFG.phi / CFG.delta_t
    lum = LuminanceSequence(frames, 5 * CFG.delta_t)
    ncfg = NoiseConfig.noiseless()
    noisy = simulate_noisy(lum, CFG, ncfg)
    assert np.array_equal(noisy.packed, simulate_ideal(lum, CFG).packed)


def test_dark_current_rate():
    cfg = SensorConfig(height=100, width=100)
    ncfg = NoiseConfig(sigma_alpha=0, sigma_dark=0, sigma_C=0, sigma_V=0, mu_dark=2e-3,
                       rng_seed=1)
    n = 2000
    lum = LuminanceSequence.constant(0.0, 100, 100, n, cfg.delta_t)
    s = simulate_noisy(lum, cfg, ncfg)
    expected = ncfg.mu_dark * n * cfg.delta_t / cfg.phi
    counts = s.spike_counts()
    assert counts.mean() == pytest.approx(expected, rel=0.02)
    assert (counts > 0).all()


def test_monotone_in_gray_level():
    cfg = SensorConfig(height=16, width=16)
    means = []
    for level in (0.05, 0.1, 0.2, 0.4, 0.8):
        lum = LuminanceSequence.constant(level * cfg.phi / cfg.delta_t, 16, 16, 500, cfg.delta_t)
        means.append(simulate_noisy(lum, cfg, NoiseConfig(rng_seed=3)).spike_counts().mean())
    assert all(a < b for a, b in zip(means, means[1:]))


def test_seed_determinism():
    lum = LuminanceSequence.constant(0.1, 6, 7, 100, CFG.delta_t)
    a = simulate_noisy(lum, CFG, NoiseConfig(rng_seed=4))
    assert a == simulate_noisy(lum, CFG, NoiseConfig(rng_seed=4))
    assert not a == simulate_noisy(lum, CFG, NoiseConfig(rng_seed=5))


def test_shot_noise_broadens_isi():
    cfg = SensorConfig(height=8, width=8)
    lum = LuminanceSequence.constant(0.07 * cfg.phi / cfg.delta_t, 8, 8, 5000, cfg.delta_t)
    base = NoiseConfig.noiseless(rng_seed=2)

    def isi_var(ncfg):
        bits = simulate_noisy(lum, cfg, ncfg).to_array()
        gaps = np.concatenate([np.diff(np.flatnonzero(bits[:, y, x]))
                               for y in range(8) for x in range(8)])
        return gaps.mean(), gaps.var()

    m0, v0 = isi_var(base)
    m1, v1 = isi_var(base.replace(enable_shot_noise=True))
    assert m1 == pytest.approx(m0, rel=0.02)
    assert v1 > v0


def test_scaled_params_leave_stream_unchanged():
    ncfg = NoiseConfig(rng_seed=6, enable_thermal_noise=False)
    params = sample_spatial_noise(CFG, ncfg)
    lum = LuminanceSequence.constant(0.1, 6, 7, 300, CFG.delta_t)
    a = simulate_noisy(lum, CFG, ncfg, params)
    # factor 2 keeps the products exact in binary floating point
    cfg2 = CFG.replace(capacitance=2 * CFG.capacitance)
    b = simulate_noisy(lum, cfg2, ncfg, params.scaled(2.0, CFG))
    assert a == b


def test_params_validation():
    p = NoiseParams.uniform(CFG)
    p.alpha_map[0, 0] = -1
    with pytest.raises(ConfigurationError):
        p.validate(CFG)
    with pytest.raises(ConfigurationError):
        NoiseParams.uniform(CFG.replace(height=2)).validate(CFG)
