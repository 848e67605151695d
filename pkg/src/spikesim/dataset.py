"""Clean/noisy stream pairs from a JSON manifest.

A manifest looks like::

    {"scenes": [
        {"name": "gray",
         "luminance": "scenes/gray",         # directory read by read_luminance_dir
         "sensor": {"delta_t": 2.5e-05},     # optional SensorConfig overrides
         "noise": {"sigma_alpha": 0.05},     # optional NoiseConfig overrides
         "rng_seed": 3,                      # optional, overrides noise.rng_seed
         "noise_params": "maps.npz",         # optional fixed-pattern maps to reuse
         "clean": "out/gray_clean.spk",
         "noisy": "out/gray_noisy.spk",
         "params": "out/gray_params.npz"}    # optional, defaults next to the noisy file
    ]}

Relative paths resolve against the manifest's directory. Height and width
default to the luminance frame size.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .config import NoiseConfig, SensorConfig
from .exceptions import ConfigurationError
from .io import load_noise_params, read_luminance_dir, resolve, save_noise_params, write_stream
from .noise import sample_spatial_noise, simulate_noisy
from .sensor import simulate_ideal

_KEYS = {"name", "luminance", "sensor", "noise", "rng_seed", "noise_params", "clean", "noisy",
         "params"}


@dataclass
class DatasetEntry:
    name: str
    luminance: Path
    sensor: dict
    noise: NoiseConfig
    clean: Path
    noisy: Path
    params: Path
    noise_params: Path | None = None


def load_manifest(path):
    """Parse a dataset manifest into a list of :class:`DatasetEntry`."""
    path = Path(path)
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict) or not isinstance(data.get("scenes"), list):
        raise ConfigurationError(f"{path}: manifest needs a 'scenes' list")
    base = path.parent
    entries = []
    for i, scene in enumerate(data["scenes"]):
        unknown = set(scene) - _KEYS
        if unknown:
            raise ConfigurationError(f"{path}: scene {i} has unknown keys {sorted(unknown)}")
        for key in ("luminance", "clean", "noisy"):
            if key not in scene:
                raise ConfigurationError(f"{path}: scene {i} lacks '{key}'")
        noise = NoiseConfig.from_dict(scene.get("noise", {}))
        if "rng_seed" in scene:
            noise = noise.replace(rng_seed=int(scene["rng_seed"]))
        noisy = resolve(base, scene["noisy"])
        entries.append(DatasetEntry(
            name=scene.get("name", f"scene{i}"),
            luminance=resolve(base, scene["luminance"]),
            sensor=dict(scene.get("sensor", {})),
            noise=noise,
            clean=resolve(base, scene["clean"]),
            noisy=noisy,
            params=resolve(base, scene.get("params", noisy.with_suffix(".npz"))),
            noise_params=(resolve(base, scene["noise_params"])
                          if "noise_params" in scene else None),
        ))
    return entries


def generate_pair(entry: DatasetEntry):
    """Simulate, write and return the ``(clean, noisy)`` streams of one scene.

    The fixed-pattern maps used for the noisy stream are saved to
    ``entry.params`` so the pair can be regenerated exactly.
    """
    lum = read_luminance_dir(entry.luminance)
    h, w = lum.shape
    cfg = SensorConfig.from_dict({"height": h, "width": w, **entry.sensor})
    if entry.noise_params is not None:
        params = load_noise_params(entry.noise_params)
    else:
        params = sample_spatial_noise(cfg, entry.noise)
    clean = simulate_ideal(lum, cfg)
    noisy = simulate_noisy(lum, cfg, entry.noise, params)
    for p in (entry.clean, entry.noisy, entry.params):
        p.parent.mkdir(parents=True, exist_ok=True)
    write_stream(clean, entry.clean)
    write_stream(noisy, entry.noisy)
    save_noise_params(params, entry.params)
    return clean, noisy
