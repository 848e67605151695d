import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from oracles import all_intervals, psnr_ref
from spikesim.config import NoiseConfig, SensorConfig
from spikesim.evaluation import compare_streams, compute_stats, psnr, ssim, tfp_reconstruct
from spikesim.exceptions import ConfigurationError
from spikesim.noise import simulate_noisy
from spikesim.sensor import simulate_ideal
from spikesim.stream import LuminanceSequence, SpikeStream

CFG = SensorConfig(height=16, width=16)


def test_stats_all_ones_and_zeros():
    n, h, w = 12, 3, 4
    s = compute_stats(SpikeStream.from_array(np.ones((n, h, w)), 1e-3), 5)
    assert s.mean_spikes_per_frame == 1.0
    assert s.isi_histogram == {1: (n - 1) * h * w}
    assert (s.spike_pattern == 5).all()
    z = compute_stats(SpikeStream.from_array(np.zeros((n, h, w)), 1e-3), 5)
    assert z.mean_spikes_per_frame == 0.0 and z.isi_histogram == {}
    assert np.isnan(z.isi_moments()[0])


@given(arrays(np.bool_, st.tuples(st.integers(1, 40), st.integers(1, 3), st.integers(1, 4))))
def test_histogram_matches_interval_oracle(bits):
    stats = compute_stats(SpikeStream.from_array(bits, 1e-3), 1)
    expected = {}
    for y in range(bits.shape[1]):
        for x in range(bits.shape[2]):
            for gap in all_intervals(bits[:, y, x].tolist()):
                expected[gap] = expected.get(gap, 0) + 1
    assert stats.isi_histogram == expected
    assert 0 <= stats.mean_spikes_per_frame <= 1


def test_ideal_histogram_concentrated():
    ratio = 7.3
    s = simulate_ideal(LuminanceSequence.constant(CFG.phi / (ratio * CFG.delta_t), 16, 16, 500,
                                                  CFG.delta_t), CFG)
    stats = compute_stats(s, 10)
    assert set(stats.isi_histogram) <= {math.floor(ratio), math.ceil(ratio)}


def test_pattern_shape_convention():
    s = SpikeStream.from_array(np.zeros((10, 250, 400)), 25e-6)
    assert compute_stats(s, 10).spike_pattern.shape == (250, 400)
    with pytest.raises(ConfigurationError):
        compute_stats(s, 11)


def test_tfp_all_ones():
    s = SpikeStream.from_array(np.ones((20, 3, 3)), CFG.delta_t)
    img = tfp_reconstruct(s, 10, 8, CFG.phi)
    assert np.allclose(img, CFG.phi / CFG.delta_t)


def test_tfp_constant_scene_within_one_quantum():
    L = 0.137 * CFG.phi / CFG.delta_t
    s = simulate_ideal(LuminanceSequence.constant(L, 16, 16, 1000, CFG.delta_t), CFG)
    window = 400
    img = tfp_reconstruct(s, 500, window, CFG.phi)
    assert np.abs(img - L).max() <= CFG.phi / (window * CFG.delta_t)


def test_tfp_two_level_scene():
    frame = np.full((16, 16), 0.1 * CFG.phi / CFG.delta_t)
    frame[:, 8:] *= 3
    s = simulate_ideal(LuminanceSequence(frame, 1000 * CFG.delta_t), CFG)
    img = tfp_reconstruct(s, 500, 600, CFG.phi)
    left, right = img[:, :8], img[:, 8:]
    quantum = CFG.phi / (600 * CFG.delta_t)
    assert np.ptp(left) <= quantum and np.ptp(right) <= quantum
    assert right.mean() / left.mean() == pytest.approx(3.0, abs=3 * quantum / left.mean())


def test_tfp_window_bounds():
    s = SpikeStream.from_array(np.ones((20, 2, 2)), 1e-3)
    with pytest.raises(IndexError):
        tfp_reconstruct(s, 2, 8, 1.0)
    with pytest.raises(IndexError):
        tfp_reconstruct(s, 17, 8, 1.0)
    tfp_reconstruct(s, 4, 8, 1.0)


def test_psnr_closed_forms():
    a = np.random.default_rng(0).uniform(0, 200, (20, 20))
    assert psnr(a, a, 255) == math.inf
    assert psnr(a, a + 10, 255) == pytest.approx(20 * math.log10(255 / 10), abs=1e-9)
    assert ssim(a, a, 255) == pytest.approx(1.0)


@given(st.integers(0, 2**31))
def test_metrics_against_reference(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 255, (24, 31))
    b = np.clip(a + rng.normal(0, 25, a.shape), 0, 255)
    assert psnr(a, b, 255) == pytest.approx(peak_signal_noise_ratio(a, b, data_range=255), abs=1e-6)
    assert psnr(a, b, 255) == pytest.approx(psnr_ref(a, b, 255), abs=1e-6)
    ref = structural_similarity(a, b, data_range=255, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert ssim(a, b, 255) == pytest.approx(ref, abs=1e-6)


def test_metric_input_checks():
    with pytest.raises(ConfigurationError):
        psnr(np.zeros((3, 3)), np.zeros((3, 4)), 1)
    with pytest.raises(ConfigurationError):
        psnr(np.zeros((3, 3)), np.zeros((3, 3)), 0)
    with pytest.raises(ConfigurationError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)), 1)


def _pair():
    frame = np.tile(np.linspace(0.05, 0.4, 16), (16, 1)) * CFG.phi / CFG.delta_t
    lum = LuminanceSequence(frame, 400 * CFG.delta_t)
    return simulate_ideal(lum, CFG), simulate_noisy(lum, CFG, NoiseConfig(rng_seed=1))


def test_compare_denoised_equal_clean():
    clean, noisy = _pair()
    rows = compare_streams(noisy, clean, clean, [200, 300], 64, CFG.phi)
    by = {(r["frame"], r["kind"]): r for r in rows}
    for t in (200, 300):
        assert by[t, "denoised"]["psnr"] == math.inf
        assert by[t, "denoised"]["psnr"] >= by[t, "noisy"]["psnr"]
        assert by[t, "denoised"]["ssim"] == pytest.approx(1.0)


def test_compare_denoised_equal_noisy():
    clean, noisy = _pair()
    rows = compare_streams(noisy, noisy, clean, [200], 64, CFG.phi)
    a, b = rows
    assert (a["psnr"], a["ssim"]) == (b["psnr"], b["ssim"])
