"""Firing statistics, texture-from-playback reconstruction and image metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy.ndimage import gaussian_filter

from .exceptions import ConfigurationError
from .stream import SpikeStream

SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # radius 5, an 11x11 window
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class StreamStats:
    """Summary of a stream's firing behaviour.

    Attributes
    ----------
    mean_spikes_per_frame : float
        Fraction of pixel-frames holding a spike.
    isi_histogram : dict
        Interval in frames -> number of consecutive spike pairs that far apart.
    spike_pattern : ndarray, shape (H, W)
        Per-pixel spike count over the first ``pattern_window`` frames.
    """

    mean_spikes_per_frame: float
    isi_histogram: dict
    spike_pattern: np.ndarray

    def isi_moments(self):
        """Mean and variance of the interval distribution (nan when empty)."""
        if not self.isi_histogram:
            return float("nan"), float("nan")
        k = np.fromiter(self.isi_histogram.keys(), dtype=np.float64)
        c = np.fromiter(self.isi_histogram.values(), dtype=np.float64)
        mean = np.sum(k * c) / c.sum()
        return float(mean), float(np.sum(c * (k - mean) ** 2) / c.sum())


@nb.njit(cache=True)
def _interval_counts(packed, n_pix, hist):
    last = np.full(n_pix, -1, dtype=np.int64)
    total = 0
    for n in range(packed.shape[0]):
        for j in range(packed.shape[1]):
            v = packed[n, j]
            if v == 0:
                continue
            for bit in range(8):
                if v & (0x80 >> bit):
                    p = j * 8 + bit
                    if p < n_pix:
                        total += 1
                        if last[p] >= 0:
                            hist[n - last[p]] += 1
                        last[p] = n
    return total


def compute_stats(stream: SpikeStream, pattern_window: int) -> StreamStats:
    if not 1 <= pattern_window <= stream.n_frames:
        raise ConfigurationError(
            f"pattern_window must be in [1, {stream.n_frames}], got {pattern_window}")
    n_pix = stream.height * stream.width
    hist = np.zeros(max(stream.n_frames, 1), dtype=np.int64)
    total = _interval_counts(stream.packed, n_pix, hist)
    nz = np.flatnonzero(hist)
    return StreamStats(
        mean_spikes_per_frame=total / (stream.n_frames * n_pix),
        isi_histogram={int(k): int(hist[k]) for k in nz},
        spike_pattern=stream.spike_counts(0, pattern_window).astype(np.float64),
    )


def tfp_reconstruct(stream: SpikeStream, t: int, window: int, phi: float):
    """Windowed firing rate around frame ``t`` in intensity units.

    Counts spikes in frames ``[t - window // 2, t - window // 2 + window)``
    and returns ``count * phi / (window * delta_t)``.

    Raises
    ------
    IndexError
        If the window does not fit inside the stream.
    """
    if window < 1:
        raise ConfigurationError("window must be positive")
    lo = t - window // 2
    hi = lo + window
    if lo < 0 or hi > stream.n_frames:
        raise IndexError(
            f"window [{lo}, {hi}) outside stream of {stream.n_frames} frames")
    counts = stream.spike_counts(lo, hi)
    return counts * (phi / (window * stream.delta_t))


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    a, b = _check_pair(a, b)
    if not peak > 0:
        raise ConfigurationError("peak must be positive")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(peak ** 2 / mse))


def ssim(a, b, data_range: float) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Local statistics use the Gaussian weights without sample-size correction;
    borders are reflected and the 5-pixel margin is left out of the mean.
    """
    a, b = _check_pair(a, b)
    if a.ndim != 2 or min(a.shape) < 11:
        raise ConfigurationError("SSIM needs 2-D images of at least 11x11 pixels")
    if not data_range > 0:
        raise ConfigurationError("data_range must be positive")

    def blur(x):
        return gaussian_filter(x, SSIM_SIGMA, mode="reflect", truncate=SSIM_TRUNCATE)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)
         / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(s[5:-5, 5:-5].mean())


def compare_streams(noisy: SpikeStream, denoised: SpikeStream, clean: SpikeStream,
                    eval_frames, window: int, phi: float):
    """PSNR and SSIM of noisy and denoised reconstructions against the clean one.

    Every stream is reconstructed with :func:`tfp_reconstruct`; the peak is
    the all-spike intensity ``phi / delta_t``.

    Returns
    -------
    list of dict
        One row per (frame, kind) with keys ``frame``, ``kind``
        (``"noisy"`` or ``"denoised"``), ``psnr`` and ``ssim``.
    """
    for s in (noisy, denoised):
        if s.shape[1:] != clean.shape[1:]:
            raise ConfigurationError("streams must share their frame dimensions")
    peak = phi / clean.delta_t
    rows = []
    for t in eval_frames:
        ref = tfp_reconstruct(clean, t, window, phi)
        for kind, s in (("noisy", noisy), ("denoised", denoised)):
            img = tfp_reconstruct(s, t, window, phi)
            rows.append({"frame": int(t), "kind": kind,
                         "psnr": psnr(img, ref, peak), "ssim": ssim(img, ref, peak)})
    return rows
