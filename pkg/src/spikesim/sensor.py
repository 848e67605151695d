"""Noise-free integrate-and-fire spike camera.

Each pixel integrates its input; whenever the accumulated value reaches the
threshold the pixel fires and its accumulator restarts from zero *at the
crossing instant*. Because input is piecewise constant over one readout
period, the charge gathered between the crossing and the end of the period
is kept, which is the same as subtracting the threshold at the end of the
period. Readout is synchronous: a frame carries a 1 when at least one
crossing happened during that period, so at most one spike per pixel per
frame is reported.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SensorConfig
from .exceptions import ConfigurationError, InvalidThresholdError
from .stream import FLAG_IDEAL, LuminanceSequence, SpikeStream, packed_frame_bytes

# Accumulations within this relative distance below the threshold still fire;
# absorbs rounding when L * delta_t is meant to equal the threshold exactly.
_FIRE_FRACTION = 1.0 - 1e-12


@dataclass
class AccumulatorState:
    """Per-pixel integrator state after ``frame`` completed readout steps."""

    accum: np.ndarray
    last_spike_index: np.ndarray
    frame: int = 0

    @classmethod
    def zeros(cls, shape) -> "AccumulatorState":
        return cls(np.zeros(shape, dtype=np.float64),
                   np.full(shape, -1, dtype=np.int64), 0)


def _fire(accum, threshold):
    """Fire pixels of the (already incremented) flat ``accum`` in place.

    Returns the boolean spike mask. Residual charge after the last crossing
    in the period is kept; crossings beyond the first are merged into one flag.
    """
    limit = threshold * _FIRE_FRACTION
    spikes = accum >= limit
    if not spikes.any():
        return spikes
    fired = accum[spikes]
    if np.ndim(threshold):
        thr = threshold[spikes]
        lim = limit[spikes]
    else:
        thr, lim = threshold, limit
    resid = fired - thr
    multi = resid >= lim
    if multi.any():
        resid[multi] = np.fmod(fired[multi], thr[multi] if np.ndim(thr) else thr)
    resid[(resid < 0) | (resid >= lim)] = 0.0
    accum[spikes] = resid
    return spikes


def step_accumulator(state: AccumulatorState, intensity_frame, threshold_frame,
                     cfg: SensorConfig):
    """Advance every pixel by one readout period.

    Parameters
    ----------
    state : AccumulatorState
    intensity_frame : array_like, shape (H, W)
        Input intensity (accumulation units per second) during this period.
    threshold_frame : array_like or float
        Strictly positive firing threshold for this period.
    cfg : SensorConfig

    Returns
    -------
    new_state : AccumulatorState
    spikes : ndarray of bool, shape (H, W)
    """
    accum = np.array(state.accum, dtype=np.float64)
    shape = accum.shape
    intensity = np.broadcast_to(np.asarray(intensity_frame, dtype=np.float64), shape)
    threshold = np.broadcast_to(np.asarray(threshold_frame, dtype=np.float64), shape)
    if not (threshold > 0).all():
        raise InvalidThresholdError("threshold frame has non-positive entries")
    flat = accum.ravel()
    flat += (intensity * cfg.delta_t).ravel()
    spikes = _fire(flat, threshold.ravel().copy()).reshape(shape)
    last = np.where(spikes, state.frame, state.last_spike_index)
    return AccumulatorState(flat.reshape(shape), last, state.frame + 1), spikes


def check_dimensions(lum: LuminanceSequence, cfg: SensorConfig):
    if tuple(lum.shape) != cfg.shape:
        raise ConfigurationError(
            f"luminance frames are {lum.shape[0]}x{lum.shape[1]} but the sensor "
            f"is {cfg.height}x{cfg.width}")
    return lum.steps_per_frame(cfg.delta_t)


def simulate_ideal(lum: LuminanceSequence, cfg: SensorConfig) -> SpikeStream:
    """Deterministic spike stream of the noise-free camera.

    The output has ``M * frame_duration / delta_t`` frames; each luminance
    frame is held for the readout steps it spans.
    """
    steps = check_dimensions(lum, cfg)
    n_total = lum.n_frames * steps
    packed = np.empty((n_total, packed_frame_bytes(cfg.height, cfg.width)), dtype=np.uint8)
    accum = np.zeros(cfg.height * cfg.width)
    phi = cfg.phi
    n = 0
    for frame in lum.frames:
        increment = (frame * cfg.delta_t).ravel()
        for _ in range(steps):
            accum += increment
            packed[n] = np.packbits(_fire(accum, phi), bitorder="big")
            n += 1
    return SpikeStream(packed, cfg.height, cfg.width, cfg.delta_t, FLAG_IDEAL)
