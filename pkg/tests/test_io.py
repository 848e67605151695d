import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import spk1_bytes
from spikesim.config import NoiseConfig, RunConfig, SensorConfig
from spikesim.exceptions import (BadMagicError, ConfigurationError, FormatError,
                                 TruncatedFileError, VersionMismatchError)
from spikesim.io import (load_config, load_noise_params, parse_stream, read_calibration_manifest,
                         read_isi_plane, read_luminance_dir, read_sidecar, read_stream,
                         save_config, save_noise_params, write_isi_plane, write_luminance_dir,
                         write_stream)
from spikesim.isi import SENTINEL, IsiPlane
from spikesim.noise import sample_spatial_noise
from spikesim.stream import FLAG_NOISY, SpikeStream


def test_round_trip_7x5x33(tmp_path, rng):
    bits = rng.random((33, 7, 5)) < 0.5
    s = SpikeStream.from_array(bits, 25e-6, FLAG_NOISY)
    write_stream(s, tmp_path / "a.spk")
    back = read_stream(tmp_path / "a.spk")
    assert back == s and back.flags == FLAG_NOISY
    assert np.array_equal(back.to_array(), bits)


def test_bytes_match_bitwise_oracle(tmp_path, rng):
    bits = rng.random((4, 3, 5)) < 0.5
    write_stream(SpikeStream.from_array(bits, 25e-6, 2), tmp_path / "a.spk")
    assert (tmp_path / "a.spk").read_bytes() == spk1_bytes(bits, 25000, 2)


def test_empty_stream(tmp_path):
    s = SpikeStream.from_array(np.zeros((0, 3, 3)), 1e-3)
    write_stream(s, tmp_path / "e.spk")
    assert (tmp_path / "e.spk").stat().st_size == 34
    assert read_stream(tmp_path / "e.spk").n_frames == 0


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(arrays(np.bool_, st.tuples(st.integers(0, 5), st.integers(1, 6), st.integers(1, 6))),
       st.integers(1, 10**7), st.integers(0, 3))
def test_read_of_written_bytes_is_identity(tmp_path, bits, dt_ns, flags):
    data = spk1_bytes(bits, dt_ns, flags)
    s = parse_stream(data)
    assert np.array_equal(s.to_array(), bits)
    path = tmp_path / "x.spk"
    write_stream(s, path)
    assert path.read_bytes() == data


def _valid():
    return spk1_bytes(np.ones((3, 2, 5), dtype=bool), 1000, 1)


@pytest.mark.parametrize("mutate,err", [
    (lambda d: b"SPK2" + d[4:], BadMagicError),
    (lambda d: d[:4] + struct.pack("<H", 2) + d[6:], VersionMismatchError),
    (lambda d: d[:20], TruncatedFileError),
    (lambda d: d[:-1], TruncatedFileError),
    (lambda d: d + b"\0", FormatError),
    (lambda d: d[:22] + struct.pack("<Q", 0) + d[30:], FormatError),
    (lambda d: d[:30] + struct.pack("<I", 8) + d[34:], FormatError),
])
def test_corruption_raises(mutate, err):
    with pytest.raises(err):
        parse_stream(mutate(_valid()))


def test_delta_t_must_be_whole_nanoseconds(tmp_path):
    s = SpikeStream.from_array(np.ones((1, 1, 1)), 1.5e-10)
    with pytest.raises(ConfigurationError):
        write_stream(s, tmp_path / "x.spk")


def test_isi_plane_file(tmp_path):
    plane = IsiPlane(np.array([[1, 7, SENTINEL], [300, 2, 5]]), 42)
    write_isi_plane(plane, tmp_path / "p.isi")
    data = (tmp_path / "p.isi").read_bytes()
    assert data[:16] == struct.pack("<4sIII", b"ISI1", 2, 3, 42)
    assert data[16:18] == b"\x01\x00" and data[20:22] == b"\xff\xff"
    assert read_isi_plane(tmp_path / "p.isi") == plane
    (tmp_path / "bad.isi").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(BadMagicError):
        read_isi_plane(tmp_path / "bad.isi")
    (tmp_path / "short.isi").write_bytes(data[:-2])
    with pytest.raises(TruncatedFileError):
        read_isi_plane(tmp_path / "short.isi")


def test_noise_params_and_config(tmp_path):
    cfg = SensorConfig(height=3, width=4)
    p = sample_spatial_noise(cfg, NoiseConfig(rng_seed=2))
    save_noise_params(p, tmp_path / "m.npz")
    assert load_noise_params(tmp_path / "m.npz") == p
    run = RunConfig(cfg, NoiseConfig(sigma_V=0.1))
    save_config(run, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == run


@pytest.mark.parametrize("bits", [8, 16])
def test_luminance_dir_round_trip(tmp_path, rng, bits):
    frames = rng.uniform(0, 3.0, (3, 5, 6))
    scale = write_luminance_dir(frames, tmp_path / "lum", 1e-3, bits=bits)
    lum = read_luminance_dir(tmp_path / "lum")
    assert lum.frame_duration == 1e-3 and lum.n_frames == 3
    assert np.abs(lum.frames - frames).max() <= scale / 2 + 1e-12


def test_sidecar_parsing(tmp_path):
    (tmp_path / "s.txt").write_text("# comment\nframe_duration = 0.5\n\nintensity_scale=2 # two\n")
    assert read_sidecar(tmp_path / "s.txt") == {"frame_duration": 0.5, "intensity_scale": 2.0}
    (tmp_path / "bad.txt").write_text("frame_duration 0.5\n")
    with pytest.raises(FormatError):
        read_sidecar(tmp_path / "bad.txt")


def test_missing_luminance_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_luminance_dir(tmp_path / "nope")


def test_calibration_manifest(tmp_path):
    (tmp_path / "m.csv").write_text("luminance,stream\n0.5,a.spk\n1.5,sub/b.spk\n")
    mu, paths = read_calibration_manifest(tmp_path / "m.csv")
    assert mu.tolist() == [0.5, 1.5]
    assert paths == [tmp_path / "a.spk", tmp_path / "sub/b.spk"]
    (tmp_path / "bad.csv").write_text("mu,path\n1,a\n")
    with pytest.raises(FormatError):
        read_calibration_manifest(tmp_path / "bad.csv")
