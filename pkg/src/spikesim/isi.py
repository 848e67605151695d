"""Inter-spike-interval planes, the multi-stage update and ISI decoding.

An ISI plane summarizes a stream around reference frame ``t``: for every
pixel, the distance between the last spike at or before ``t`` and the first
spike after ``t``, both searched within ``window`` frames. Pixels lacking
either spike hold ``SENTINEL``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .exceptions import ConfigurationError, InsufficientHorizonError
from .stream import SpikeStream

SENTINEL = 0xFFFF
#: Largest window whose intervals (at most ``2 * window``) stay below the sentinel.
MAX_WINDOW = 32767


def _check_window(window):
    window = int(window)
    if not 1 <= window <= MAX_WINDOW:
        raise ConfigurationError(f"window must be in [1, {MAX_WINDOW}], got {window}")
    return window


@dataclass
class IsiPlane:
    """Per-pixel interval in frames around ``ref_frame`` (uint16, ``SENTINEL`` if unknown)."""

    values: np.ndarray
    ref_frame: int = 0
    window: int = MAX_WINDOW

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ConfigurationError(f"ISI plane must be 2-D, got shape {self.values.shape}")
        if self.values.dtype != np.uint16:
            if (self.values < 1).any() or (self.values > SENTINEL).any():
                raise ConfigurationError("ISI values must lie in [1, 0xFFFF]")
            self.values = self.values.astype(np.uint16)
        self.window = _check_window(self.window)
        if (self.values == 0).any():
            raise ConfigurationError("ISI values must be positive")

    @property
    def shape(self):
        return self.values.shape

    @property
    def valid(self):
        return self.values != SENTINEL

    def __eq__(self, other):
        if not isinstance(other, IsiPlane):
            return NotImplemented
        return self.ref_frame == other.ref_frame and np.array_equal(self.values, other.values)


@dataclass
class NormalizedIsiPlane:
    """Reciprocal ISI in [0, 1]; 0 marks pixels with no measured interval."""

    values: np.ndarray
    ref_frame: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not ((self.values >= 0) & (self.values <= 1)).all():
            raise ConfigurationError("normalized ISI values must lie in [0, 1]")


def compute_isi_plane(stream: SpikeStream, t: int, window: int) -> IsiPlane:
    """ISI plane of ``stream`` at frame ``t``.

    The previous spike is the last one in ``[t - window, t]`` and the next
    the first one in ``(t, t + window]``.

    Raises
    ------
    IndexError
        If ``t`` is outside ``[0, N)``.
    """
    window = _check_window(window)
    if not 0 <= t < stream.n_frames:
        raise IndexError(f"frame {t} outside stream of {stream.n_frames} frames")
    lo = max(0, t - window)
    hi = min(stream.n_frames, t + window + 1)
    before = stream.to_array(lo, t + 1)[::-1]
    after = stream.to_array(t + 1, hi)
    has_prev = before.any(axis=0)
    has_next = after.any(axis=0)
    d_prev = before.argmax(axis=0)
    d_next = after.argmax(axis=0) + 1 if after.shape[0] else 0
    values = np.where(has_prev & has_next, d_prev + d_next, SENTINEL).astype(np.uint16)
    return IsiPlane(values, t, window)


@nb.njit(cache=True)
def _isi_sequence(packed, n_pix, window, out):
    n_frames = packed.shape[0]
    # backward pass: distance to the next spike (> n), SENTINEL if beyond the window
    nxt = np.full(n_pix, -1, dtype=np.int64)
    for n in range(n_frames - 1, -1, -1):
        for p in range(n_pix):
            d = nxt[p] - n
            out[n, p] = d if nxt[p] >= 0 and d <= window else 0xFFFF
            if (packed[n, p >> 3] >> (7 - (p & 7))) & 1:
                nxt[p] = n
    # forward pass: add the distance to the previous spike (<= n)
    prev = np.full(n_pix, -1, dtype=np.int64)
    for n in range(n_frames):
        for p in range(n_pix):
            if (packed[n, p >> 3] >> (7 - (p & 7))) & 1:
                prev[p] = n
            if out[n, p] != 0xFFFF:
                if prev[p] >= 0 and n - prev[p] <= window:
                    out[n, p] += n - prev[p]
                else:
                    out[n, p] = 0xFFFF


def compute_isi_sequence(stream: SpikeStream, window: int) -> np.ndarray:
    """ISI planes at every frame, as a ``(N, H, W)`` uint16 array.

    Plane ``n`` equals ``compute_isi_plane(stream, n, window).values``.
    """
    window = _check_window(window)
    n_pix = stream.height * stream.width
    out = np.empty((stream.n_frames, n_pix), dtype=np.uint16)
    _isi_sequence(stream.packed, n_pix, window, out)
    return out.reshape(stream.shape)


def normalize_isi(plane: IsiPlane) -> NormalizedIsiPlane:
    """Elementwise reciprocal; the sentinel maps to 0."""
    v = plane.values.astype(np.float64)
    return NormalizedIsiPlane(np.where(plane.valid, 1.0 / v, 0.0), plane.ref_frame)


def denormalize_isi(plane: NormalizedIsiPlane, window: int = MAX_WINDOW) -> IsiPlane:
    """Inverse of :func:`normalize_isi`: ``round(1 / v)``, with 0 back to the sentinel.

    Nonzero inputs (for instance network outputs) round to an interval in
    ``[1, 0xFFFE]``.
    """
    v = plane.values
    live = v > 0
    interval = np.ones_like(v)
    np.divide(1.0, v, out=interval, where=live)
    interval = np.clip(np.rint(interval), 1, SENTINEL - 1)
    return IsiPlane(np.where(live, interval, SENTINEL).astype(np.uint16), plane.ref_frame, window)


@nb.njit(cache=True)
def _mus_pixel(col, n_avail, best_len, best_end):
    """Refined endpoint offset of the chain rooted at ``col[0]``.

    ``best_len``/``best_end`` are scratch arrays of length >= ``col[0]``.
    Nodes are later planes whose interval nests strictly inside the root's;
    for each node (scanned backwards) keep the longest chain beneath it and,
    among equally long ones, the earliest final endpoint.
    """
    root = np.int64(col[0])
    if root == 0xFFFF:
        return root
    hi = min(root - 1, n_avail - 1)
    for r in range(hi, 0, -1):
        v = np.int64(col[r])
        best_len[r] = -1
        if v == 0xFFFF or r + v >= root:
            continue
        end = r + v
        length = 1
        final = end
        for r2 in range(r + 1, min(end, hi + 1)):
            if best_len[r2] >= 0 and r2 + np.int64(col[r2]) < end:
                cand = best_len[r2] + 1
                if cand > length or (cand == length and best_end[r2] < final):
                    length = cand
                    final = best_end[r2]
        best_len[r] = length
        best_end[r] = final
    length = 0
    final = root
    for r in range(1, hi + 1):
        if best_len[r] >= 0:
            if best_len[r] > length or (best_len[r] == length and best_end[r] < final):
                length = best_len[r]
                final = best_end[r]
    return final


@nb.njit(cache=True)
def _mus_planes(planes, out):
    n_avail = planes.shape[0]
    scratch_len = np.empty(0x10000, dtype=np.int64)
    scratch_end = np.empty(0x10000, dtype=np.int64)
    for p in range(planes.shape[1]):
        out[p] = _mus_pixel(planes[:, p], n_avail, scratch_len, scratch_end)


def _as_plane_array(planes):
    if isinstance(planes, np.ndarray):
        arr = planes
        ref = 0
    else:
        planes = list(planes)
        if not planes:
            raise ConfigurationError("at least one ISI plane is required")
        refs = [p.ref_frame for p in planes]
        if refs != list(range(refs[0], refs[0] + len(refs))):
            raise ConfigurationError("ISI planes must cover consecutive frames")
        arr = np.stack([p.values for p in planes])
        ref = refs[0]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ConfigurationError(f"expected planes of shape (L, H, W), got {arr.shape}")
    return np.ascontiguousarray(arr, dtype=np.uint16), ref


def mus_update(planes, truncate: bool = False) -> IsiPlane:
    """Multi-stage update of the interval at the first plane's frame ``t0``.

    Parameters
    ----------
    planes : sequence of IsiPlane or ndarray, shape (L + 1, H, W)
        ISI planes at frames ``t0 .. t0 + L``.
    truncate : bool
        Use only the available planes when the chain could reach past them
        instead of raising.

    Returns
    -------
    IsiPlane
        For every pixel, the endpoint of the longest chain of strictly nested
        later intervals, measured from ``t0``. Never exceeds the input
        interval; the sentinel is passed through.

    Raises
    ------
    InsufficientHorizonError
        If some pixel's interval ``ISI_t0`` needs planes up to
        ``t0 + ISI_t0 - 1`` and fewer were given.
    """
    arr, ref = _as_plane_array(planes)
    n, h, w = arr.shape
    root = arr[0]
    needed = np.where(root == SENTINEL, 0, root.astype(np.int64))
    if not truncate and needed.max(initial=0) > n:
        raise InsufficientHorizonError(
            f"intervals up to {needed.max()} frames need that many planes, got {n}")
    out = np.empty(h * w, dtype=np.uint16)
    _mus_planes(arr.reshape(n, h * w), out)
    return IsiPlane(out.reshape(h, w), ref)


@nb.njit(cache=True)
def _decode(planes, use_mus, out):
    n_frames = planes.shape[0]
    best_len = np.empty(0x10000, dtype=np.int64)
    best_end = np.empty(0x10000, dtype=np.int64)
    for p in range(planes.shape[1]):
        col = planes[:, p]
        c = 0
        while c < n_frames:
            v = np.int64(col[c])
            if v == 0xFFFF:
                c += 1
                continue
            if use_mus:
                v = _mus_pixel(col[c:], n_frames - c, best_len, best_end)
            c += v
            if c < n_frames:
                out[c, p] = True


def decode_isi_to_stream(planes, delta_t: float, use_mus: bool = False) -> SpikeStream:
    """Greedy spike placement from ISI planes at frames ``0 .. T``.

    Per pixel, a cursor starts at frame 0; a spike is placed ``ISI_c``
    frames after the cursor ``c`` and the cursor moves there. A sentinel at
    the cursor advances it by one frame without placing a spike, so a pixel
    that is sentinel everywhere stays silent. Spikes past frame ``T`` are
    dropped.

    Parameters
    ----------
    planes : sequence of IsiPlane or ndarray, shape (T + 1, H, W)
    delta_t : float
    use_mus : bool
        Refine every interval with :func:`mus_update` (truncated at the end
        of the sequence) before stepping.
    """
    arr, ref = _as_plane_array(planes)
    if ref != 0:
        raise InsufficientHorizonError(f"decoding needs planes from frame 0, got {ref}")
    n, h, w = arr.shape
    out = np.zeros((n, h * w), dtype=np.bool_)
    _decode(arr.reshape(n, h * w), use_mus, out)
    return SpikeStream.from_array(out.reshape(n, h, w), delta_t)
