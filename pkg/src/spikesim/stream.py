"""Container types for luminance input and binary spike streams."""
from __future__ import annotations

import math

import numpy as np

from .exceptions import ConfigurationError

FLAG_NOISY = 1
FLAG_IDEAL = 2


def packed_frame_bytes(height, width):
    return (int(height) * int(width) + 7) // 8


class SpikeStream:
    """A bit-packed ``N x H x W`` binary spike stream.

    Frames are stored frame-major, each frame flattened row-major and packed
    MSB-first into ``ceil(H*W/8)`` bytes (the same layout as the on-disk
    payload). Use :meth:`to_array` for a dense boolean view.

    Parameters
    ----------
    packed : ndarray of uint8, shape (N, ceil(H*W/8))
    height, width : int
    delta_t : float
        Readout period in seconds.
    flags : int
        Provenance bits (``FLAG_NOISY``, ``FLAG_IDEAL``).
    """

    __slots__ = ("packed", "height", "width", "delta_t", "flags")

    def __init__(self, packed, height, width, delta_t, flags=0):
        packed = np.asarray(packed, dtype=np.uint8)
        nbytes = packed_frame_bytes(height, width)
        if packed.ndim != 2 or packed.shape[1] != nbytes:
            raise ConfigurationError(
                f"packed payload must have shape (N, {nbytes}), got {packed.shape}")
        if not (delta_t > 0 and math.isfinite(delta_t)):
            raise ConfigurationError(f"delta_t must be positive, got {delta_t}")
        self.packed = packed
        self.height = int(height)
        self.width = int(width)
        self.delta_t = float(delta_t)
        self.flags = int(flags)

    @classmethod
    def from_array(cls, bits, delta_t, flags=0) -> "SpikeStream":
        """Pack a dense ``(N, H, W)`` array of zeros and ones."""
        bits = np.asarray(bits)
        if bits.ndim != 3:
            raise ConfigurationError(f"expected an (N, H, W) array, got shape {bits.shape}")
        if bits.dtype != bool and not np.isin(bits, (0, 1)).all():
            raise ConfigurationError("spike arrays may only contain 0 and 1")
        n, h, w = bits.shape
        flat = bits.reshape(n, h * w).astype(bool)
        packed = np.packbits(flat, axis=1, bitorder="big")
        if n == 0:
            packed = np.zeros((0, packed_frame_bytes(h, w)), dtype=np.uint8)
        return cls(packed, h, w, delta_t, flags)

    @property
    def n_frames(self):
        return self.packed.shape[0]

    @property
    def shape(self):
        return (self.n_frames, self.height, self.width)

    @property
    def duration(self):
        return self.n_frames * self.delta_t

    def to_array(self, start=0, stop=None):
        """Dense boolean array of frames ``start:stop`` with shape (n, H, W)."""
        chunk = self.packed[start:stop]
        hw = self.height * self.width
        bits = np.unpackbits(chunk, axis=1, count=hw, bitorder="big")
        return bits.reshape(chunk.shape[0], self.height, self.width).view(bool)

    def frame(self, index):
        return self.to_array(index, index + 1)[0]

    def spike_counts(self, start=0, stop=None, chunk=4096):
        """Per-pixel number of spikes in frames ``start:stop``."""
        stop = self.n_frames if stop is None else stop
        counts = np.zeros((self.height, self.width), dtype=np.int64)
        for lo in range(start, stop, chunk):
            counts += self.to_array(lo, min(lo + chunk, stop)).sum(axis=0)
        return counts

    def __eq__(self, other):
        if not isinstance(other, SpikeStream):
            return NotImplemented
        return (self.shape == other.shape and self.delta_t == other.delta_t
                and np.array_equal(self.packed, other.packed))

    def __repr__(self):
        return (f"SpikeStream(N={self.n_frames}, H={self.height}, W={self.width}, "
                f"delta_t={self.delta_t!r}, flags={self.flags})")


class LuminanceSequence:
    """Nonnegative ideal luminance frames held for ``frame_duration`` seconds each.

    Parameters
    ----------
    frames : array_like, shape (M, H, W) or (H, W)
        Intensity in accumulation units per second. A 2-D array is a single
        static frame.
    frame_duration : float
        Seconds each frame is held; must be an integer multiple of the
        sensor's readout period.
    """

    def __init__(self, frames, frame_duration):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3:
            raise ConfigurationError(f"luminance must be (M, H, W), got shape {frames.shape}")
        if not np.isfinite(frames).all():
            raise ConfigurationError("luminance contains non-finite values")
        if (frames < 0).any():
            raise ConfigurationError("luminance must be nonnegative")
        if not (frame_duration > 0 and math.isfinite(frame_duration)):
            raise ConfigurationError(f"frame_duration must be positive, got {frame_duration}")
        self.frames = frames
        self.frame_duration = float(frame_duration)

    @classmethod
    def constant(cls, value, height, width, n_steps, delta_t) -> "LuminanceSequence":
        """A static scene of ``n_steps`` readout periods, stored as one frame."""
        frame = np.broadcast_to(np.asarray(value, dtype=np.float64), (height, width))
        return cls(frame.copy(), n_steps * delta_t)

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def shape(self):
        return self.frames.shape[1:]

    def steps_per_frame(self, delta_t):
        ratio = self.frame_duration / delta_t
        steps = int(round(ratio))
        if steps < 1 or abs(ratio - steps) > 1e-6 * max(1.0, ratio):
            raise ConfigurationError(
                f"frame_duration {self.frame_duration} is not an integer multiple "
                f"of delta_t {delta_t}")
        return steps

    def iter_steps(self, delta_t):
        """Yield the luminance frame of every readout step (zero-order hold)."""
        steps = self.steps_per_frame(delta_t)
        for frame in self.frames:
            for _ in range(steps):
                yield frame
