"""On-disk formats: spike files, ISI planes, noise maps, configs, luminance and CSV.

Spike file (``SPK1``), all fields little-endian::

    magic   4s   b"SPK1"
    version u16  1
    H, W    u32
    N       u64  frames
    dt_ns   u64  readout period in nanoseconds
    flags   u32  bit 0 noisy, bit 1 ideal
    payload N * ceil(H*W/8) bytes, frames row-major, MSB first

ISI plane file (``ISI1``): a 16-byte header ``magic, H, W, ref_frame`` (u32
each after the magic) followed by ``H*W`` little-endian u16 values, with
``0xFFFF`` for pixels without a measured interval.
"""
from __future__ import annotations

import csv
import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .config import RunConfig
from .exceptions import (BadMagicError, ConfigurationError, FormatError, TruncatedFileError,
                         VersionMismatchError)
from .isi import IsiPlane
from .noise import NoiseParams
from .stream import FLAG_IDEAL, FLAG_NOISY, LuminanceSequence, SpikeStream, packed_frame_bytes

SPIKE_MAGIC = b"SPK1"
SPIKE_VERSION = 1
SPIKE_HEADER = struct.Struct("<4sHIIQQI")
KNOWN_FLAGS = FLAG_NOISY | FLAG_IDEAL
ISI_MAGIC = b"ISI1"
ISI_HEADER = struct.Struct("<4sIII")
SIDECAR_NAME = "luminance.txt"


def _delta_t_ns(delta_t):
    ns = round(delta_t * 1e9)
    if ns < 1 or abs(ns - delta_t * 1e9) > 1e-6 * ns:
        raise ConfigurationError(f"delta_t {delta_t} is not a whole number of nanoseconds")
    return ns


def write_stream(stream: SpikeStream, path):
    header = SPIKE_HEADER.pack(SPIKE_MAGIC, SPIKE_VERSION, stream.height, stream.width,
                               stream.n_frames, _delta_t_ns(stream.delta_t), stream.flags)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(stream.packed).tobytes())


def parse_stream(data: bytes) -> SpikeStream:
    """Decode the bytes of a spike file; raises a :class:`FormatError` subclass."""
    if len(data) < SPIKE_HEADER.size:
        raise TruncatedFileError(
            f"file holds {len(data)} bytes, shorter than the {SPIKE_HEADER.size}-byte header")
    magic, version, h, w, n, dt_ns, flags = SPIKE_HEADER.unpack_from(data)
    if magic != SPIKE_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {SPIKE_MAGIC!r}")
    if version != SPIKE_VERSION:
        raise VersionMismatchError(f"unsupported spike file version {version}")
    if dt_ns == 0:
        raise FormatError("header has zero delta_t")
    if flags & ~KNOWN_FLAGS:
        raise FormatError(f"reserved flag bits set: {flags:#x}")
    nbytes = packed_frame_bytes(h, w)
    expected = n * nbytes
    payload = len(data) - SPIKE_HEADER.size
    if payload < expected:
        raise TruncatedFileError(f"payload has {payload} bytes, header promises {expected}")
    if payload > expected:
        raise FormatError(f"{payload - expected} trailing bytes after the payload")
    packed = np.frombuffer(data, dtype=np.uint8, offset=SPIKE_HEADER.size).reshape(n, nbytes)
    return SpikeStream(packed.copy(), h, w, dt_ns / 1e9, flags)


def read_stream(path) -> SpikeStream:
    with open(path, "rb") as f:
        return parse_stream(f.read())


def write_isi_plane(plane: IsiPlane, path):
    h, w = plane.shape
    with open(path, "wb") as f:
        f.write(ISI_HEADER.pack(ISI_MAGIC, h, w, plane.ref_frame))
        f.write(plane.values.astype("<u2").tobytes())


def read_isi_plane(path) -> IsiPlane:
    data = Path(path).read_bytes()
    if len(data) < ISI_HEADER.size:
        raise TruncatedFileError(f"{path}: shorter than the ISI header")
    magic, h, w, ref = ISI_HEADER.unpack_from(data)
    if magic != ISI_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {ISI_MAGIC!r}")
    if len(data) != ISI_HEADER.size + 2 * h * w:
        raise TruncatedFileError(f"{path}: payload size does not match {h}x{w}")
    values = np.frombuffer(data, dtype="<u2", offset=ISI_HEADER.size).reshape(h, w)
    return IsiPlane(values.astype(np.uint16), ref)


def isi_plane_name(ref_frame):
    return f"isi_{ref_frame:06d}.isi"


def read_isi_dir(directory):
    """All ``*.isi`` planes of a directory, ordered by reference frame."""
    planes = [read_isi_plane(p) for p in Path(directory).glob("*.isi")]
    if not planes:
        raise FileNotFoundError(f"no .isi files in {directory}")
    return sorted(planes, key=lambda p: p.ref_frame)


def save_noise_params(params: NoiseParams, path):
    with open(path, "wb") as f:
        np.savez(f, alpha=params.alpha_map, dark=params.dark_map,
                 cap=params.cap_map, bias=params.bias_map)


def load_noise_params(path) -> NoiseParams:
    with np.load(path) as z:
        missing = {"alpha", "dark", "cap", "bias"} - set(z.files)
        if missing:
            raise FormatError(f"{path}: missing maps {sorted(missing)}")
        return NoiseParams(z["alpha"], z["dark"], z["cap"], z["bias"])


def load_config(path) -> RunConfig:
    with open(path) as f:
        return RunConfig.from_dict(json.load(f))


def save_config(cfg: RunConfig, path):
    with open(path, "w") as f:
        json.dump(cfg.to_dict(), f, indent=2)
        f.write("\n")


def read_sidecar(path):
    """``key = value`` lines as floats; blank lines and ``#`` comments are skipped."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}:{lineno}: expected key=value")
        try:
            values[key.strip()] = float(value)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: {value.strip()!r} is not a number") from None
    return values


def read_luminance_dir(directory) -> LuminanceSequence:
    """PGM frames (8 or 16 bit, sorted by file name) plus the ``luminance.txt`` sidecar.

    The sidecar must give ``frame_duration`` in seconds and may give
    ``intensity_scale`` (default 1), the intensity of one grey level.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"luminance directory {directory} does not exist")
    meta = read_sidecar(directory / SIDECAR_NAME)
    if "frame_duration" not in meta:
        raise FormatError(f"{directory / SIDECAR_NAME}: frame_duration is required")
    files = sorted(directory.glob("*.pgm"))
    if not files:
        raise FileNotFoundError(f"no .pgm frames in {directory}")
    frames = []
    for p in files:
        with Image.open(p) as im:
            frames.append(np.asarray(im, dtype=np.float64))
    if len({f.shape for f in frames}) != 1:
        raise ConfigurationError(f"frames in {directory} differ in size")
    return LuminanceSequence(np.stack(frames) * meta.get("intensity_scale", 1.0),
                             meta["frame_duration"])


def write_luminance_dir(frames, directory, frame_duration, bits=8):
    """Write frames as PGMs scaled to the full grey range, plus the sidecar.

    Returns the intensity per grey level, which the sidecar records so that
    :func:`read_luminance_dir` restores the frames up to quantization.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    if bits not in (8, 16):
        raise ConfigurationError("PGM depth must be 8 or 16 bits")
    top = 255 if bits == 8 else 65535
    peak = frames.max(initial=0.0)
    scale = peak / top if peak > 0 else 1.0
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dtype = np.uint8 if bits == 8 else np.uint16
    for i, frame in enumerate(frames):
        grey = np.clip(np.rint(frame / scale), 0, top).astype(dtype)
        Image.fromarray(grey).save(directory / f"frame_{i:06d}.pgm")
    (directory / SIDECAR_NAME).write_text(
        f"frame_duration = {float(frame_duration)!r}\nintensity_scale = {float(scale)!r}\n")
    return float(scale)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        if header:
            writer.writerow(header)
        writer.writerows(rows)


def read_calibration_manifest(path):
    """``luminance,stream`` CSV rows; stream paths are relative to the manifest."""
    base = Path(path).parent
    luminances, paths = [], []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"luminance", "stream"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: header must contain 'luminance' and 'stream'")
        for row in reader:
            try:
                luminances.append(float(row["luminance"]))
            except ValueError:
                raise FormatError(f"{path}: bad luminance {row['luminance']!r}") from None
            paths.append(base / row["stream"])
    return np.array(luminances), paths


def resolve(base, path):
    path = Path(os.path.expanduser(str(path)))
    return path if path.is_absolute() else Path(base) / path
