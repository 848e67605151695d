"""Throughput of the noisy simulator in pixel-steps per second.

Usage: python benchmarks/bench_simulate.py [--height H] [--width W] [--steps N] [--level F]
"""
import argparse
import logging
import tempfile
import time
from pathlib import Path

import numpy as np

from spikesim.cli import main as cli_main
from spikesim.config import NoiseConfig, SensorConfig
from spikesim.io import write_luminance_dir
from spikesim.noise import simulate_noisy
from spikesim.stream import LuminanceSequence

log = logging.getLogger("bench")


def bench_kernel(cfg, steps, level, repeats):
    lum = LuminanceSequence.constant(level * cfg.phi / cfg.delta_t, cfg.height, cfg.width,
                                     steps, cfg.delta_t)
    simulate_noisy(LuminanceSequence.constant(0.1, cfg.height, cfg.width, 2, cfg.delta_t),
                   cfg, NoiseConfig())  # compile
    best = np.inf
    for r in range(repeats):
        start = time.perf_counter()
        simulate_noisy(lum, cfg, NoiseConfig(rng_seed=r))
        best = min(best, time.perf_counter() - start)
    return cfg.height * cfg.width * steps / best


def bench_cli(cfg, steps, level):
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        write_luminance_dir(np.full((1, cfg.height, cfg.width), level * cfg.phi / cfg.delta_t),
                            tmp / "lum", steps * cfg.delta_t)
        cli_main(["simulate", str(tmp / "lum"), str(tmp / "warm.spk"), "--noisy"])
        start = time.perf_counter()
        cli_main(["simulate", str(tmp / "lum"), str(tmp / "out.spk"), "--noisy"])
        return cfg.height * cfg.width * steps / (time.perf_counter() - start)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--height", type=int, default=250)
    parser.add_argument("--width", type=int, default=400)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--level", type=float, default=0.2,
                        help="intensity as a fraction of the one-spike-per-frame level")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    logging.getLogger("spikesim").setLevel(logging.WARNING)
    cfg = SensorConfig(height=args.height, width=args.width)
    log.info("kernel: %.1f M pixel-steps/s",
             bench_kernel(cfg, args.steps, args.level, args.repeats) / 1e6)
    log.info("simulate --noisy (CLI, incl. I/O): %.1f M pixel-steps/s",
             bench_cli(cfg, args.steps, args.level) / 1e6)


if __name__ == "__main__":
    main()
