"""Spike camera simulation, noise calibration and ISI coding."""
from .calibration import (CalibrationResult, CalibrationSet, noise_config_from_stats,
                          solve_snee, spike_counts, summarize_noise)
from .config import NoiseConfig, RunConfig, SensorConfig
from .estimators import IsiTransformer, SneeCalibrator, SpikeCameraSimulator
from .evaluation import StreamStats, compare_streams, compute_stats, psnr, ssim, tfp_reconstruct
from .exceptions import (BadMagicError, CalibrationDesignError, ConfigurationError,
                         DegenerateConfigError, FormatError, InsufficientHorizonError,
                         InvalidThresholdError, SpikeSimError, TruncatedFileError,
                         VersionMismatchError)
from .io import read_stream, write_stream
from .isi import (SENTINEL, IsiPlane, NormalizedIsiPlane, compute_isi_plane,
                  compute_isi_sequence, decode_isi_to_stream, denormalize_isi, mus_update,
                  normalize_isi)
from .noise import (NoiseParams, sample_photon_luminance, sample_spatial_noise,
                    sample_thermal_threshold, simulate_noisy)
from .rng import KeyedStream
from .sensor import AccumulatorState, simulate_ideal, step_accumulator
from .stream import LuminanceSequence, SpikeStream

__version__ = "0.1.0"
