"""Per-pixel noise calibration from static-scene spike streams.

Over a static scene every spike consumes one threshold's worth of charge, so
spikes counted over a window times the pixel threshold equal the integrated
input ``(alpha * mu + I_dark) * T``. Dividing by the threshold, each pixel
obeys the linear law ``count = (a * mu + b) * T`` with ``a = alpha / theta``
and ``b = I_dark / theta``, fitted by least squares over the scenes.

Only the ratios are identifiable. The absolute scale is pinned by a gauge
(mean threshold equals ``gauge_phi``); how the spread of ``a`` is shared
between conversion rate and threshold, and the threshold between capacitor
and bias mismatch, follow the prior variances of a :class:`NoiseConfig`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .config import NoiseConfig, SensorConfig
from .exceptions import CalibrationDesignError, ConfigurationError
from .noise import NoiseParams
from .stream import SpikeStream

MIN_SPIKES = 10


@dataclass
class CalibrationSet:
    """Static scenes of known luminance and the streams captured from them."""

    luminances: np.ndarray
    streams: list
    cfg: SensorConfig

    def __post_init__(self):
        self.luminances = np.asarray(self.luminances, dtype=np.float64).ravel()
        self.streams = list(self.streams)
        if len(self.streams) != self.luminances.size:
            raise ConfigurationError("one luminance level is needed per stream")
        if self.luminances.size < 3:
            raise CalibrationDesignError(
                f"at least 3 scenes are required, got {self.luminances.size}")
        if not (self.luminances > 0).all():
            raise ConfigurationError("scene luminances must be positive")
        for s in self.streams:
            if (s.height, s.width) != self.cfg.shape:
                raise ConfigurationError(
                    f"stream is {s.height}x{s.width}, sensor is {self.cfg.height}x{self.cfg.width}")
            if not np.isclose(s.delta_t, self.cfg.delta_t, rtol=1e-9, atol=0):
                raise ConfigurationError("all streams must share the sensor delta_t")

    @property
    def n_scenes(self):
        return self.luminances.size


@dataclass
class CalibrationResult:
    """Output of :func:`solve_snee`.

    ``a_map`` and ``b_map`` are the gauge-free fitted ratios (spikes per
    second per unit luminance, and spikes per second). ``dead_mask`` marks
    pixels that never fired or could not be fitted; they carry zero
    conversion rate and are excluded from ``stats``.
    """

    params: NoiseParams
    theta_map: np.ndarray
    residual_map: np.ndarray
    a_map: np.ndarray
    b_map: np.ndarray
    dead_mask: np.ndarray
    stats: dict = field(default_factory=dict)


def spike_counts(cset: CalibrationSet):
    """Number of spiking frames per pixel in each scene, shape (K, H, W)."""
    return np.stack([s.spike_counts() for s in cset.streams])


@nb.njit(cache=True)
def _scan_packed(packed, n_pix, count, first, last):
    for n in range(packed.shape[0]):
        for j in range(packed.shape[1]):
            v = packed[n, j]
            if v == 0:
                continue
            for bit in range(8):
                if v & (0x80 >> bit):
                    p = j * 8 + bit
                    if p < n_pix:
                        count[p] += 1
                        if first[p] < 0:
                            first[p] = n
                        last[p] = n


def _spike_span(stream: SpikeStream):
    """Per-pixel spike count, first and last spike frame (-1 when silent)."""
    n_pix = stream.height * stream.width
    count = np.zeros(n_pix, dtype=np.int64)
    first = np.full(n_pix, -1, dtype=np.int64)
    last = np.full(n_pix, -1, dtype=np.int64)
    _scan_packed(stream.packed, n_pix, count, first, last)
    shape = (stream.height, stream.width)
    return count.reshape(shape), first.reshape(shape), last.reshape(shape)


def _split_log(ratio, w_first, w_second):
    """Split ``log(ratio)`` between two factors in proportion to the weights."""
    total = w_first + w_second
    f = 0.5 if total == 0 else w_first / total
    log_r = np.log(ratio)
    return np.exp(f * log_r), np.exp((1.0 - f) * log_r)


def solve_snee(cset: CalibrationSet, gauge_phi: float | None = None,
               prior: NoiseConfig | None = None, min_spikes: int = MIN_SPIKES
               ) -> CalibrationResult:
    """Estimate per-pixel conversion rate, dark current and threshold.

    Parameters
    ----------
    cset : CalibrationSet
    gauge_phi : float, optional
        Mean threshold over live pixels. Defaults to the nominal
        ``C * (V_D - V_ref)``.
    prior : NoiseConfig, optional
        Supplies the relative variances used to apportion the spread of the
        fitted ``a = alpha / theta`` between ``alpha`` and ``theta`` and then
        ``theta`` between capacitor and bias mismatch. Without a prior all
        spread goes to ``alpha`` (uniform threshold).
    min_spikes : int
        A warning is issued when any live pixel fires fewer spikes than
        this in the brightest scene (thermal noise then does not average out).

    Notes
    -----
    Each scene contributes the window between a pixel's first and last spike:
    ``count - 1`` spikes over ``(last - first) * delta_t`` seconds. The
    window starts and ends right after a firing, so the unknown residual
    charge at both ends is below one period's input rather than up to a full
    threshold. Scenes where the pixel fires fewer than twice are skipped.

    The 2x2 normal equations are accumulated in extended precision.
    """
    cfg = cset.cfg
    mu = cset.luminances
    if np.ptp(mu) == 0:
        raise CalibrationDesignError("all scenes share one luminance; slope is unidentifiable")
    gauge_phi = cfg.phi if gauge_phi is None else float(gauge_phi)
    if not gauge_phi > 0:
        raise ConfigurationError("gauge_phi must be positive")

    shape = cfg.shape
    acc = {k: np.zeros(shape, dtype=np.longdouble) for k in ("xx", "xt", "tt", "xy", "ty")}
    n_valid = np.zeros(shape, dtype=np.int64)
    total = np.zeros(shape, dtype=np.int64)
    brightest = int(np.argmax(mu))
    brightest_counts = None
    spans = []
    for k, stream in enumerate(cset.streams):
        count, first, last = _spike_span(stream)
        total += count
        if k == brightest:
            brightest_counts = count
        ok = count >= 2
        y = np.where(ok, count - 1, 0).astype(np.longdouble)
        t = np.where(ok, (last - first) * np.longdouble(stream.delta_t), 0)
        x = np.longdouble(mu[k]) * t
        acc["xx"] += x * x
        acc["xt"] += x * t
        acc["tt"] += t * t
        acc["xy"] += x * y
        acc["ty"] += t * y
        n_valid += ok
        spans.append((ok, x, t, y))

    det = acc["xx"] * acc["tt"] - acc["xt"] ** 2
    scale = acc["xx"] * acc["tt"]
    solvable = (n_valid >= 2) & (det > 1e-12 * scale) & (scale > 0)
    safe_det = np.where(solvable, det, 1)
    a = np.where(solvable, (acc["tt"] * acc["xy"] - acc["xt"] * acc["ty"]) / safe_det, 0)
    b = np.where(solvable, (acc["xx"] * acc["ty"] - acc["xt"] * acc["xy"]) / safe_det, 0)

    # relative residual: RMS count misfit over the mean count
    sq = np.zeros(shape, dtype=np.longdouble)
    sum_y = np.zeros(shape, dtype=np.longdouble)
    for ok, x, t, y in spans:
        sq += np.where(ok, (y - a * x - b * t) ** 2, 0)
        sum_y += y
    n = np.maximum(n_valid, 1)
    mean_y = sum_y / n
    residual = np.where(solvable & (mean_y > 0),
                        np.sqrt(sq / n) / np.where(mean_y > 0, mean_y, 1), 0)

    a = a.astype(np.float64)
    b = b.astype(np.float64)
    dead = (total == 0) | ~solvable | ~(a > 0)
    live = ~dead
    if not live.any():
        raise CalibrationDesignError("no pixel could be calibrated")
    if (brightest_counts[live] < min_spikes).any():
        warnings.warn(
            f"{int((brightest_counts[live] < min_spikes).sum())} pixels fire fewer than "
            f"{min_spikes} spikes in the brightest scene; lengthen the captures",
            RuntimeWarning, stacklevel=2)

    # gauge: split deviations of log(a) between alpha and theta by prior variance
    rel_alpha = rel_theta = 0.0
    if prior is not None:
        rel_alpha = (prior.sigma_alpha / prior.mu_alpha) ** 2
        rel_theta = (prior.sigma_C / cfg.capacitance) ** 2 + (prior.sigma_V / cfg.swing) ** 2
    w_theta = 0.0 if rel_alpha + rel_theta == 0 else rel_theta / (rel_alpha + rel_theta)
    log_a = np.log(np.where(live, a, 1.0))
    z = np.exp(-w_theta * (log_a - log_a[live].mean()))
    theta = np.where(live, gauge_phi * z / z[live].mean(), gauge_phi)

    alpha = np.where(live, a * theta, 0.0)
    dark = np.where(live, np.maximum(b * theta, 0.0), 0.0)
    if prior is None:
        w_cap = w_bias = 0.0
    else:
        w_cap = (prior.sigma_C / cfg.capacitance) ** 2
        w_bias = (prior.sigma_V / cfg.swing) ** 2
    cap_factor, bias_factor = _split_log(theta / (cfg.capacitance * cfg.swing), w_cap, w_bias)
    cap = np.where(live, cfg.capacitance * (cap_factor - 1.0), 0.0)
    bias = np.where(live, cfg.swing * (bias_factor - 1.0), 0.0)

    result = CalibrationResult(
        params=NoiseParams(alpha, dark, cap, bias),
        theta_map=theta,
        residual_map=residual.astype(np.float64),
        a_map=np.where(live, a, 0.0),
        b_map=np.where(live, b, 0.0),
        dead_mask=dead,
    )
    result.stats = summarize_noise(result)
    return result


def summarize_noise(result: CalibrationResult):
    """Mean and standard deviation of every map over live pixels.

    Returns a dict mapping ``alpha``, ``dark``, ``cap``, ``bias`` and
    ``theta`` to ``(mean, std)`` tuples (population std). The values are the
    statistics a :class:`NoiseConfig` needs for new simulations.
    """
    live = ~result.dead_mask
    maps = {"alpha": result.params.alpha_map, "dark": result.params.dark_map,
            "cap": result.params.cap_map, "bias": result.params.bias_map,
            "theta": result.theta_map}
    return {name: (float(np.mean(m[live])), float(np.std(m[live]))) for name, m in maps.items()}


def noise_config_from_stats(stats, base: NoiseConfig | None = None) -> NoiseConfig:
    """A :class:`NoiseConfig` whose map statistics come from ``stats``."""
    base = NoiseConfig() if base is None else base
    return base.replace(mu_alpha=stats["alpha"][0], sigma_alpha=stats["alpha"][1],
                        mu_dark=stats["dark"][0], sigma_dark=stats["dark"][1],
                        sigma_C=stats["cap"][1], sigma_V=stats["bias"][1])
