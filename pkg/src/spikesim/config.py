"""Sensor and noise configuration.

Units follow one convention throughout the package: luminance and dark
current are *accumulation units per second*, so a pixel integrating a
constant intensity ``L`` for one readout period gains ``L * delta_t``
accumulation units, and fires once the running total reaches the threshold
``capacitance * (reset_voltage - reference_voltage)``.

None of the noise defaults are measured hardware values; they are chosen to
give visible but moderate fixed-pattern and shot noise for the default
sensor (nominal threshold 1.1e-5, i.e. an intensity of 0.44 fires every
frame at 40 kHz).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from .exceptions import ConfigurationError

BOLTZMANN = 1.380649e-23


def _fields_from_dict(cls, data):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(
            f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
    return cls(**data)


@dataclass(frozen=True)
class SensorConfig:
    """Geometry, readout period and pixel circuit constants of the camera.

    Parameters
    ----------
    height, width : int
        Sensor size in pixels.
    delta_t : float
        Readout period in seconds (25 us, i.e. 40 kHz, by default).
    capacitance : float
        Integration capacitance ``C``.
    reset_voltage, reference_voltage : float
        ``V_D`` and ``V_ref``; the comparator swing is ``V_d = V_D - V_ref``.
    photon_gain : float
        Expected photons per unit intensity per readout period. Controls the
        strength of shot noise (relative noise ~ 1/sqrt(q * mu_L)).
    boltzmann_k, temperature : float
        Constants of the reset (kTC) noise, ``sigma = sqrt(k T0 / C)``.
    """

    height: int = 250
    width: int = 400
    delta_t: float = 25e-6
    capacitance: float = 1e-5
    reset_voltage: float = 3.3
    reference_voltage: float = 2.2
    photon_gain: float = 100.0
    boltzmann_k: float = BOLTZMANN
    temperature: float = 300.0

    def __post_init__(self):
        if int(self.height) != self.height or self.height < 1:
            raise ConfigurationError(f"height must be a positive integer, got {self.height}")
        if int(self.width) != self.width or self.width < 1:
            raise ConfigurationError(f"width must be a positive integer, got {self.width}")
        for name in ("delta_t", "capacitance", "reset_voltage", "photon_gain", "boltzmann_k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if not (math.isfinite(self.temperature) and self.temperature >= 0):
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")
        if not self.reference_voltage < self.reset_voltage:
            raise ConfigurationError("reference_voltage must be below reset_voltage")

    @property
    def shape(self):
        return (int(self.height), int(self.width))

    @property
    def swing(self):
        """Comparator swing ``V_d = V_D - V_ref``."""
        return self.reset_voltage - self.reference_voltage

    @property
    def phi(self):
        """Ideal threshold ``C * (V_D - V_ref)``."""
        return self.capacitance * (self.reset_voltage - self.reference_voltage)

    @property
    def thermal_sigma(self):
        """Standard deviation of the reset voltage fluctuation, sqrt(kT0/C)."""
        return math.sqrt(self.boltzmann_k * self.temperature / self.capacitance)

    def replace(self, **changes) -> "SensorConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data) -> "SensorConfig":
        return _fields_from_dict(cls, dict(data))


@dataclass(frozen=True)
class NoiseConfig:
    """Statistics of the temporal and fixed-pattern noise sources.

    Setting every sigma and ``mu_dark`` to zero, ``mu_alpha`` to one and both
    temporal flags off reduces the noisy simulator to the ideal one exactly
    (see :meth:`noiseless`).
    """

    mu_alpha: float = 1.0
    sigma_alpha: float = 0.05
    mu_dark: float = 1.1e-3
    sigma_dark: float = 4e-4
    sigma_C: float = 1e-7
    sigma_V: float = 0.05
    enable_shot_noise: bool = True
    enable_thermal_noise: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.mu_alpha) and self.mu_alpha > 0):
            raise ConfigurationError(f"mu_alpha must be positive, got {self.mu_alpha}")
        for name in ("sigma_alpha", "mu_dark", "sigma_dark", "sigma_C", "sigma_V"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigurationError(f"{name} must be >= 0, got {value}")
        if int(self.rng_seed) != self.rng_seed or not 0 <= self.rng_seed < 2**64:
            raise ConfigurationError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed}")

    @classmethod
    def noiseless(cls, rng_seed: int = 0) -> "NoiseConfig":
        return cls(mu_alpha=1.0, sigma_alpha=0.0, mu_dark=0.0, sigma_dark=0.0,
                   sigma_C=0.0, sigma_V=0.0, enable_shot_noise=False,
                   enable_thermal_noise=False, rng_seed=rng_seed)

    def replace(self, **changes) -> "NoiseConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data) -> "NoiseConfig":
        return _fields_from_dict(cls, dict(data))


@dataclass(frozen=True)
class RunConfig:
    """The pair of configs stored in a JSON config file."""

    sensor: SensorConfig = field(default_factory=SensorConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def to_dict(self):
        return {"sensor": self.sensor.to_dict(), "noise": self.noise.to_dict()}

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        unknown = set(data) - {"sensor", "noise"}
        if unknown:
            raise ConfigurationError(f"unknown config sections: {', '.join(sorted(unknown))}")
        return cls(SensorConfig.from_dict(data.get("sensor", {})),
                   NoiseConfig.from_dict(data.get("noise", {})))
