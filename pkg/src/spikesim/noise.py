"""Temporal and fixed-pattern noise of the spike camera pixel circuit.

Per readout period a pixel integrates ``alpha * L + I_dark`` and compares it
with ``(C + C_s) * (V_d + V_thermal + V_s)``:

* ``L`` is the photon-sampled luminance, ``ph / q`` with ``ph ~ Poisson(q mu_L)``;
* ``V_thermal ~ N(0, k T0 / C)`` is drawn afresh every period;
* ``alpha``, ``I_dark``, ``C_s`` and ``V_s`` are per-pixel Gaussian maps fixed
  for the lifetime of a sensor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .config import NoiseConfig, SensorConfig
from .exceptions import ConfigurationError, DegenerateConfigError
from .rng import (POISSON_EXACT_LIMIT, SOURCE_ALPHA, SOURCE_BIAS, SOURCE_CAP, SOURCE_DARK,
                  SOURCE_SHOT, SOURCE_THERMAL, KeyedStream, normal_pair, poisson_inversion,
                  poisson_ptrs, poisson_variate, ptrs_constants)
from .sensor import _FIRE_FRACTION, check_dimensions
from .stream import FLAG_NOISY, LuminanceSequence, SpikeStream, packed_frame_bytes

#: Thresholds are floored at this fraction of the nominal threshold.
THRESHOLD_FLOOR_FRACTION = 1e-3
MAX_REDRAWS = 100


@dataclass
class NoiseParams:
    """Per-pixel fixed-pattern noise maps, each of shape (H, W)."""

    alpha_map: np.ndarray
    dark_map: np.ndarray
    cap_map: np.ndarray
    bias_map: np.ndarray

    def __post_init__(self):
        maps = [np.asarray(m, dtype=np.float64) for m in
                (self.alpha_map, self.dark_map, self.cap_map, self.bias_map)]
        shapes = {m.shape for m in maps}
        if len(shapes) != 1 or maps[0].ndim != 2:
            raise ConfigurationError(f"noise maps must share one 2-D shape, got {shapes}")
        self.alpha_map, self.dark_map, self.cap_map, self.bias_map = maps

    @property
    def shape(self):
        return self.alpha_map.shape

    @classmethod
    def uniform(cls, cfg: SensorConfig, ncfg: NoiseConfig | None = None) -> "NoiseParams":
        """Maps with every pixel at the configured mean (no fixed-pattern noise)."""
        ncfg = NoiseConfig.noiseless() if ncfg is None else ncfg
        shape = cfg.shape
        return cls(np.full(shape, ncfg.mu_alpha), np.full(shape, ncfg.mu_dark),
                   np.zeros(shape), np.zeros(shape))

    def theta(self, cfg: SensorConfig):
        """Static threshold ``(C + C_s) * (V_d + V_s)`` of every pixel."""
        return (cfg.capacitance + self.cap_map) * (cfg.swing + self.bias_map)

    def validate(self, cfg: SensorConfig):
        if self.shape != cfg.shape:
            raise ConfigurationError(
                f"noise maps are {self.shape} but the sensor is {cfg.shape}")
        if not all(np.isfinite(m).all() for m in
                   (self.alpha_map, self.dark_map, self.cap_map, self.bias_map)):
            raise ConfigurationError("noise maps contain non-finite values")
        if (self.alpha_map < 0).any():
            raise ConfigurationError("conversion rate map has negative entries")
        if (self.dark_map < 0).any():
            raise ConfigurationError("dark current map has negative entries")
        if not (self.theta(cfg) > 0).all():
            raise ConfigurationError("static threshold map has non-positive entries")

    def scaled(self, factor, cfg: SensorConfig) -> "NoiseParams":
        """Maps for a sensor whose capacitance is multiplied by ``factor``.

        Multiplying threshold, conversion rate and dark current jointly leaves
        every spike stream unchanged; pair with ``cfg.replace(capacitance=...)``.
        """
        return NoiseParams(self.alpha_map * factor, self.dark_map * factor,
                           self.cap_map * factor,
                           self.bias_map.copy())

    def __eq__(self, other):
        if not isinstance(other, NoiseParams):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(
            (self.alpha_map, self.dark_map, self.cap_map, self.bias_map),
            (other.alpha_map, other.dark_map, other.cap_map, other.bias_map)))


def sample_spatial_noise(cfg: SensorConfig, ncfg: NoiseConfig) -> NoiseParams:
    """Draw the four fixed-pattern maps for a sensor.

    Pixels whose draw is unphysical (``alpha <= 0``, ``I_dark < 0`` or a
    non-positive static threshold) get their whole tuple re-drawn, up to
    ``MAX_REDRAWS`` rounds; this conditions the joint Gaussian on validity.
    Each map has its own random source and round ``r`` uses frame index
    ``r``, so a pixel's values do not depend on any other pixel.

    Raises
    ------
    DegenerateConfigError
        If some pixel is still invalid after the last round.
    """
    shape = cfg.shape
    seed = ncfg.rng_seed
    specs = ((SOURCE_ALPHA, ncfg.mu_alpha, ncfg.sigma_alpha),
             (SOURCE_DARK, ncfg.mu_dark, ncfg.sigma_dark),
             (SOURCE_CAP, 0.0, ncfg.sigma_C),
             (SOURCE_BIAS, 0.0, ncfg.sigma_V))
    maps = [mu + sigma * KeyedStream(seed, source, 0).standard_normal(shape)
            for source, mu, sigma in specs]
    alpha, dark, cap, bias = maps

    def invalid():
        theta = (cfg.capacitance + cap) * (cfg.swing + bias)
        return (alpha <= 0) | (dark < 0) | ~(theta > 0)

    bad = invalid()
    for rounds in range(1, MAX_REDRAWS + 2):
        if not bad.any():
            return NoiseParams(alpha, dark, cap, bias)
        if rounds > MAX_REDRAWS:
            break
        pixels = np.flatnonzero(bad)
        for target, (source, mu, sigma) in zip(maps, specs):
            draws = KeyedStream(seed, source, rounds).standard_normal(None, pixels)
            target.ravel()[pixels] = mu + sigma * draws
        bad = invalid()
    raise DegenerateConfigError(
        f"{int(bad.sum())} pixels still unphysical after {MAX_REDRAWS} redraws; "
        "noise sigmas are too large for the configured means")


def sample_photon_luminance(mu_L, cfg: SensorConfig, rng: KeyedStream):
    """Shot-noise sample of the luminance seen during one readout period.

    Draws ``ph ~ Poisson(q * mu_L)`` and returns ``ph / q``, an unbiased
    rescaling of ``mu_L``. Photon means above ``POISSON_EXACT_LIMIT`` use
    ``round(N(lam, lam))`` clamped at zero.
    """
    mu_L = np.asarray(mu_L, dtype=np.float64)
    if (mu_L < 0).any():
        raise ConfigurationError("mean luminance must be nonnegative")
    return rng.poisson(cfg.photon_gain * mu_L) / cfg.photon_gain


def threshold_floor(cfg: SensorConfig):
    return THRESHOLD_FLOOR_FRACTION * cfg.capacitance * cfg.swing


def sample_thermal_threshold(params: NoiseParams, cfg: SensorConfig, rng: KeyedStream):
    """Threshold of every pixel for one readout period.

    ``(C + C_s) * (V_d + V_thermal + V_s)`` with a fresh ``V_thermal`` per
    pixel, floored at ``1e-3 * C * V_d``. The thermal sigma uses the nominal
    capacitance.
    """
    v_thermal = cfg.thermal_sigma * rng.standard_normal(params.shape)
    phi = (cfg.capacitance + params.cap_map) * (cfg.swing + v_thermal + params.bias_map)
    return np.maximum(phi, threshold_floor(cfg))


@nb.njit(cache=True)
def _noisy_steps(accum, mu, alpha, dark, cap, bias, theta, consts, seed, frame0,
                 shot, thermal, packed):
    # consts: capacitance, swing, thermal sigma, threshold floor, q, delta_t
    capacitance, swing, sigma_t, floor, q, dt = (consts[0], consts[1], consts[2],
                                                 consts[3], consts[4], consts[5])
    n_pix = accum.shape[0]
    lam = q * mu
    # sampler constants depend only on the photon mean, which is fixed per frame
    ptrs = np.zeros((n_pix, 6))
    exp_neg = np.exp(-lam)
    use_ptrs = (lam >= 10.0) & (lam <= POISSON_EXACT_LIMIT)
    use_inv = (lam > 0.0) & (lam < 10.0)
    if shot:
        for p in range(n_pix):
            if use_ptrs[p]:
                ptrs[p, 0], ptrs[p, 1], ptrs[p, 2], ptrs[p, 3], ptrs[p, 4], ptrs[p, 5] = \
                    ptrs_constants(lam[p])
    z_odd = np.zeros(n_pix)
    for s in range(packed.shape[0]):
        frame = frame0 + s
        for p in range(n_pix):
            if not shot:
                lum = mu[p]
            elif use_inv[p]:
                lum = poisson_inversion(lam[p], exp_neg[p], seed, p, frame, SOURCE_SHOT) / q
            elif use_ptrs[p]:
                lum = poisson_ptrs(lam[p], ptrs[p, 0], ptrs[p, 1], ptrs[p, 2], ptrs[p, 3],
                                   ptrs[p, 4], ptrs[p, 5], seed, p, frame, SOURCE_SHOT) / q
            else:
                lum = poisson_variate(lam[p], seed, p, frame, SOURCE_SHOT) / q
            if thermal:
                # odd frames reuse the sine half of the pair drawn on the even frame
                if frame & 1 == 0 or s == 0:
                    z_even, z_odd[p] = normal_pair(seed, p, frame >> 1, SOURCE_THERMAL)
                    z = z_even if frame & 1 == 0 else z_odd[p]
                else:
                    z = z_odd[p]
                v_t = sigma_t * z
                thr = max((capacitance + cap[p]) * (swing + v_t + bias[p]), floor)
            else:
                thr = theta[p]
            a = accum[p] + (alpha[p] * lum + dark[p]) * dt
            limit = thr * _FIRE_FRACTION
            if a >= limit:
                resid = a - thr
                if resid >= limit:
                    resid = np.fmod(a, thr)
                if resid < 0.0 or resid >= limit:
                    resid = 0.0
                a = resid
                packed[s, p >> 3] |= np.uint8(0x80 >> (p & 7))
            accum[p] = a


def simulate_noisy(lum: LuminanceSequence, cfg: SensorConfig, ncfg: NoiseConfig,
                   params: NoiseParams | None = None) -> SpikeStream:
    """Spike stream of the camera with shot, thermal and fixed-pattern noise.

    Parameters
    ----------
    lum : LuminanceSequence
    cfg : SensorConfig
    ncfg : NoiseConfig
        Supplies the seed and the temporal-noise switches; also the map
        statistics when ``params`` is omitted.
    params : NoiseParams, optional
        Fixed-pattern maps. Sampled from ``ncfg`` when not given.

    Notes
    -----
    Every step draws ``L`` with :func:`sample_photon_luminance` and the
    threshold with :func:`sample_thermal_threshold` (streams keyed on the
    step index), then fires as :func:`~spikesim.sensor.step_accumulator`.
    The loop is fused for speed. With uniform maps (``alpha = 1``, zero dark
    current and mismatch) and both temporal sources disabled the output is
    bit-identical to :func:`~spikesim.sensor.simulate_ideal`.
    """
    steps = check_dimensions(lum, cfg)
    if params is None:
        params = sample_spatial_noise(cfg, ncfg)
    params.validate(cfg)

    n_total = lum.n_frames * steps
    packed = np.zeros((n_total, packed_frame_bytes(cfg.height, cfg.width)), dtype=np.uint8)
    accum = np.zeros(cfg.height * cfg.width)
    flat = [np.ascontiguousarray(m.ravel()) for m in
            (params.alpha_map, params.dark_map, params.cap_map, params.bias_map)]
    theta = np.maximum(params.theta(cfg), threshold_floor(cfg)).ravel()
    consts = np.array([cfg.capacitance, cfg.swing, cfg.thermal_sigma,
                       threshold_floor(cfg), cfg.photon_gain, cfg.delta_t])
    for i, frame in enumerate(lum.frames):
        _noisy_steps(accum, np.ascontiguousarray(frame.ravel()), *flat, theta, consts,
                     np.uint64(ncfg.rng_seed), i * steps, ncfg.enable_shot_noise,
                     ncfg.enable_thermal_noise, packed[i * steps:(i + 1) * steps])
    return SpikeStream(packed, cfg.height, cfg.width, cfg.delta_t, FLAG_NOISY)
