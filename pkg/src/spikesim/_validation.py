"""Input checks shared by the estimator wrappers and the CLI."""
from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigurationError
from .stream import LuminanceSequence, SpikeStream


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_stream(stream, name="stream"):
    if not isinstance(stream, SpikeStream):
        raise ConfigurationError(f"{name} must be a SpikeStream, got {type(stream).__name__}")
    return stream


def check_luminance(X, frame_duration=None):
    """Accept a LuminanceSequence, or an array plus ``frame_duration``."""
    if isinstance(X, LuminanceSequence):
        return X
    if frame_duration is None:
        raise ConfigurationError("frame_duration is required for array input")
    return LuminanceSequence(np.asarray(X, dtype=np.float64), frame_duration)


def check_same_geometry(streams):
    streams = [check_stream(s) for s in streams]
    if not streams:
        raise ConfigurationError("at least one stream is required")
    first = streams[0]
    for s in streams[1:]:
        if (s.height, s.width) != (first.height, first.width) or s.delta_t != first.delta_t:
            raise ConfigurationError("streams differ in frame size or delta_t")
    return streams
