"""scikit-learn style wrappers over the functional API."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_luminance, check_positive_int, check_same_geometry, check_stream
from .calibration import CalibrationSet, solve_snee
from .config import NoiseConfig, SensorConfig
from .isi import compute_isi_sequence, decode_isi_to_stream
from .noise import sample_spatial_noise, simulate_noisy
from .sensor import simulate_ideal


class SpikeCameraSimulator(BaseEstimator, TransformerMixin):
    """Turn luminance sequences into spike streams.

    ``fit`` fixes the sensor: it resolves the frame size from ``X`` when
    ``sensor`` is omitted and draws the fixed-pattern maps (``params_``).
    ``transform`` then simulates any number of scenes on that sensor.

    Parameters
    ----------
    sensor : SensorConfig, optional
    noise : NoiseConfig, optional
        Defaults to ``NoiseConfig()``.
    ideal : bool
        Use the noise-free model.
    params : NoiseParams, optional
        Fixed-pattern maps to use instead of sampling.
    frame_duration : float, optional
        Needed when ``X`` is a bare array.
    """

    def __init__(self, sensor=None, noise=None, ideal=False, params=None, frame_duration=None):
        self.sensor = sensor
        self.noise = noise
        self.ideal = ideal
        self.params = params
        self.frame_duration = frame_duration

    def fit(self, X, y=None):
        lum = check_luminance(X, self.frame_duration)
        h, w = lum.shape
        cfg = self.sensor or SensorConfig(height=h, width=w)
        self.sensor_ = cfg
        self.noise_ = self.noise or NoiseConfig()
        if self.ideal:
            self.params_ = None
        elif self.params is not None:
            self.params.validate(cfg)
            self.params_ = self.params
        else:
            self.params_ = sample_spatial_noise(cfg, self.noise_)
        return self

    def transform(self, X):
        check_is_fitted(self, "sensor_")
        lum = check_luminance(X, self.frame_duration)
        if self.ideal:
            return simulate_ideal(lum, self.sensor_)
        return simulate_noisy(lum, self.sensor_, self.noise_, self.params_)


class SneeCalibrator(BaseEstimator):
    """Per-pixel noise calibration from static scenes.

    ``fit(streams, luminances)`` solves the per-pixel linear model;
    ``predict(luminances)`` returns the expected spikes per frame of every
    pixel at each luminance, shape (K, H, W).
    """

    def __init__(self, sensor=None, gauge_phi=None, prior=None, min_spikes=10):
        self.sensor = sensor
        self.gauge_phi = gauge_phi
        self.prior = prior
        self.min_spikes = min_spikes

    def fit(self, X, y):
        streams = check_same_geometry(X)
        first = streams[0]
        cfg = self.sensor or SensorConfig(height=first.height, width=first.width,
                                          delta_t=first.delta_t)
        check_positive_int(self.min_spikes, "min_spikes")
        self.result_ = solve_snee(CalibrationSet(y, streams, cfg), self.gauge_phi,
                                  self.prior, self.min_spikes)
        self.params_ = self.result_.params
        self.dead_mask_ = self.result_.dead_mask
        self.delta_t_ = cfg.delta_t
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        mu = np.atleast_1d(np.asarray(X, dtype=np.float64))
        r = self.result_
        return (r.a_map[None] * mu[:, None, None] + r.b_map[None]) * self.delta_t_


class IsiTransformer(BaseEstimator, TransformerMixin):
    """Spike stream <-> sequence of ISI planes.

    ``transform`` returns the (N, H, W) uint16 planes of every frame;
    ``inverse_transform`` decodes planes back into a stream with the
    ``delta_t`` seen during ``fit``.
    """

    def __init__(self, window=32, use_mus=False):
        self.window = window
        self.use_mus = use_mus

    def fit(self, X, y=None):
        check_stream(X)
        check_positive_int(self.window, "window")
        self.delta_t_ = X.delta_t
        return self

    def transform(self, X):
        check_is_fitted(self, "delta_t_")
        return compute_isi_sequence(check_stream(X), self.window)

    def inverse_transform(self, X):
        check_is_fitted(self, "delta_t_")
        return decode_isi_to_stream(X, self.delta_t_, use_mus=self.use_mus)
