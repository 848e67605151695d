"""Command-line interface: ``spikesim <command> ...``.

Exit status is 0 on success, 2 for usage errors and missing input files,
and 1 for any other failure; errors print a single ``spikesim: ...`` line.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .calibration import CalibrationSet, solve_snee
from .config import RunConfig, SensorConfig
from .dataset import generate_pair, load_manifest
from .evaluation import compare_streams, compute_stats, tfp_reconstruct
from .exceptions import SpikeSimError
from .io import (isi_plane_name, load_config, load_noise_params, read_calibration_manifest,
                 read_isi_dir, read_luminance_dir, read_stream, save_noise_params, write_csv,
                 write_isi_plane, write_luminance_dir, write_stream)
from .isi import IsiPlane, compute_isi_sequence, decode_isi_to_stream
from .noise import sample_spatial_noise, simulate_noisy
from .sensor import simulate_ideal

log = logging.getLogger("spikesim")


class UsageError(Exception):
    pass


def _run_config(path):
    return load_config(path) if path else RunConfig()


def _require(path):
    if not Path(path).exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    return path


def cmd_simulate(args):
    run = _run_config(args.config)
    lum = read_luminance_dir(_require(args.luminance))
    h, w = lum.shape
    sensor = run.sensor if args.config else SensorConfig()
    cfg = sensor.replace(height=h, width=w)
    if args.ideal:
        stream = simulate_ideal(lum, cfg)
    else:
        noise = run.noise if args.seed is None else run.noise.replace(rng_seed=args.seed)
        if args.params:
            params = load_noise_params(_require(args.params))
        else:
            params = sample_spatial_noise(cfg, noise)
        stream = simulate_noisy(lum, cfg, noise, params)
        if args.save_params:
            save_noise_params(params, args.save_params)
    write_stream(stream, args.output)
    log.info("wrote %s (%d frames)", args.output, stream.n_frames)


def cmd_calibrate(args):
    luminances, paths = read_calibration_manifest(_require(args.manifest))
    streams = [read_stream(_require(p)) for p in paths]
    first = streams[0]
    run = _run_config(args.config)
    cfg = run.sensor.replace(height=first.height, width=first.width, delta_t=first.delta_t)
    prior = None if args.no_prior else run.noise
    result = solve_snee(CalibrationSet(luminances, streams, cfg), args.gauge_phi, prior)
    save_noise_params(result.params, args.output)
    rows = [(name, mean, std) for name, (mean, std) in result.stats.items()]
    rows.append(("dead_pixels", int(result.dead_mask.sum()), 0))
    rows.append(("max_residual", float(result.residual_map.max()), 0))
    write_csv(args.stats, ("map", "mean", "std"), rows)


def cmd_isi(args):
    stream = read_stream(_require(args.stream))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    planes = compute_isi_sequence(stream, args.window)
    frames = args.frame if args.frame else range(stream.n_frames)
    for t in frames:
        if not 0 <= t < stream.n_frames:
            raise IndexError(f"frame {t} outside stream of {stream.n_frames} frames")
        write_isi_plane(IsiPlane(planes[t], t, args.window), out / isi_plane_name(t))


def cmd_mus_decode(args):
    planes = read_isi_dir(_require(args.planes))
    stream = decode_isi_to_stream(planes, args.delta_t, use_mus=not args.no_mus)
    write_stream(stream, args.output)


def cmd_stats(args):
    stream = read_stream(_require(args.stream))
    stats = compute_stats(stream, min(args.pattern_window, stream.n_frames))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    mean_isi, var_isi = stats.isi_moments()
    write_csv(out / "summary.csv", ("quantity", "value"), [
        ("frames", stream.n_frames), ("height", stream.height), ("width", stream.width),
        ("mean_spikes_per_frame", stats.mean_spikes_per_frame),
        ("isi_mean", mean_isi), ("isi_variance", var_isi)])
    write_csv(out / "isi_histogram.csv", ("interval", "count"),
              sorted(stats.isi_histogram.items()))
    write_csv(out / "spike_pattern.csv", None,
              [[int(v) for v in row] for row in stats.spike_pattern])


def cmd_compare(args):
    clean, noisy, denoised = (read_stream(_require(p)) for p in
                              (args.clean, args.noisy, args.denoised))
    phi = args.phi if args.phi is not None else _run_config(args.config).sensor.phi
    rows = compare_streams(noisy, denoised, clean, args.frames, args.window, phi)
    write_csv(args.output, ("frame", "kind", "psnr", "ssim"),
              [(r["frame"], r["kind"], r["psnr"], r["ssim"]) for r in rows])
    if args.recon_dir:
        for kind, s in (("clean", clean), ("noisy", noisy), ("denoised", denoised)):
            images = [tfp_reconstruct(s, t, args.window, phi) for t in args.frames]
            write_luminance_dir(images, Path(args.recon_dir) / kind, args.window * s.delta_t)


def cmd_gen_dataset(args):
    entries = load_manifest(_require(args.manifest))
    if args.only:
        entries = [e for e in entries if e.name in set(args.only)]
        if not entries:
            raise UsageError(f"no scene named {', '.join(args.only)}")
    for e in entries:
        generate_pair(e)
        log.info("scene %s: %s, %s", e.name, e.clean, e.noisy)


def build_parser():
    parser = argparse.ArgumentParser(prog="spikesim", description="Spike camera simulation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="luminance frames -> spike file")
    p.add_argument("luminance", help="directory of PGM frames with luminance.txt")
    p.add_argument("output")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--ideal", action="store_true")
    mode.add_argument("--noisy", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON with 'sensor' and 'noise' sections")
    p.add_argument("--params", help="fixed-pattern maps (.npz) to use instead of sampling")
    p.add_argument("--save-params", help="write the fixed-pattern maps used")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="static-scene streams -> noise maps and stats")
    p.add_argument("manifest", help="CSV with columns luminance,stream")
    p.add_argument("output", help="noise map file (.npz)")
    p.add_argument("--stats", required=True, help="statistics CSV")
    p.add_argument("--config")
    p.add_argument("--gauge-phi", type=float)
    p.add_argument("--no-prior", action="store_true",
                   help="attribute all gain spread to the conversion rate")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("isi", help="spike file -> ISI plane files")
    p.add_argument("stream")
    p.add_argument("output", help="directory for isi_NNNNNN.isi files")
    p.add_argument("--frame", type=int, action="append", help="reference frame (repeatable)")
    p.add_argument("--window", type=int, default=32)
    p.set_defaults(func=cmd_isi)

    p = sub.add_parser("mus-decode", help="ISI plane directory -> spike file")
    p.add_argument("planes")
    p.add_argument("output")
    p.add_argument("--delta-t", type=float, default=SensorConfig().delta_t)
    p.add_argument("--no-mus", action="store_true", help="decode without the multi-stage update")
    p.set_defaults(func=cmd_mus_decode)

    p = sub.add_parser("stats", help="spike file -> firing statistics CSVs")
    p.add_argument("stream")
    p.add_argument("output", help="directory for the CSV files")
    p.add_argument("--pattern-window", type=int, default=10)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", help="clean/noisy/denoised spike files -> metrics CSV")
    p.add_argument("clean")
    p.add_argument("noisy")
    p.add_argument("denoised")
    p.add_argument("output")
    p.add_argument("--frames", type=int, nargs="+", required=True)
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--phi", type=float, help="nominal threshold (default from --config)")
    p.add_argument("--config")
    p.add_argument("--recon-dir", help="also write TFP reconstructions as PGM")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-dataset", help="manifest -> clean/noisy stream pairs")
    p.add_argument("manifest")
    p.add_argument("--only", nargs="+", help="scene names to generate")
    p.set_defaults(func=cmd_gen_dataset)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except (UsageError, FileNotFoundError) as e:
        print(f"spikesim: {e}", file=sys.stderr)
        return 2
    except (SpikeSimError, ValueError, IndexError, OSError) as e:
        print(f"spikesim: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
