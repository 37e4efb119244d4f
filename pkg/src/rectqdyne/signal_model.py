"""Target RF signal, undersampling, and the noiseless photon-rate trace.

A readout at index ``j`` of trace ``i`` is treated as an instantaneous
sample at ``t_j = j * sample_interval``.  The detected frequency is the
applied one folded into the first Nyquist zone of the readout rate.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


class NoiseMode(str, enum.Enum):
    POISSON = "poisson"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class TargetSignal:
    """Artificial RF target.

    ``fixed_phase=None`` draws a fresh uniform phase for every trace;
    a float pins the initial phase of every trace to that value.
    """

    frequency: float
    amplitude: float = 0.0
    fixed_phase: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            raise ConfigError("must be a positive finite frequency", "signal.frequency")
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ConfigError("must be >= 0", "signal.amplitude")
        if self.fixed_phase is not None and not math.isfinite(self.fixed_phase):
            raise ConfigError("must be finite or null", "signal.fixed_phase")

    @property
    def random_phase(self) -> bool:
        return self.fixed_phase is None


@dataclass(frozen=True)
class TraceGeometry:
    """Sequential-block timing.

    ``pulse_spacing`` and ``pulse_count`` describe one dynamical-decoupling
    sensing block; its sensing time is ``pulse_count * pulse_spacing``
    (8 pulses at 3 us give 24 us).
    """

    points_per_trace: int
    sample_interval: float
    pulse_spacing: float = 3e-6
    pulse_count: int = 8

    def __post_init__(self):
        if int(self.points_per_trace) != self.points_per_trace or self.points_per_trace < 2:
            raise ConfigError("must be an integer >= 2", "geometry.points_per_trace")
        if not (math.isfinite(self.sample_interval) and self.sample_interval > 0):
            raise ConfigError("must be > 0", "geometry.sample_interval")
        if not self.pulse_spacing > 0:
            raise ConfigError("must be > 0", "geometry.pulse_spacing")
        if int(self.pulse_count) != self.pulse_count or self.pulse_count < 1:
            raise ConfigError("must be a positive integer", "geometry.pulse_count")

    @property
    def sensing_time(self) -> float:
        return self.pulse_count * self.pulse_spacing

    @property
    def sampling_rate(self) -> float:
        return 1.0 / self.sample_interval

    @property
    def frequency_resolution(self) -> float:
        return 1.0 / (self.points_per_trace * self.sample_interval)


@dataclass(frozen=True)
class PhotonReadoutModel:
    mean_photons: float
    contrast: float
    noise_mode: NoiseMode = NoiseMode.POISSON

    def __post_init__(self):
        if not (math.isfinite(self.mean_photons) and self.mean_photons > 0):
            raise ConfigError("must be > 0", "readout.mean_photons")
        # contrast 0 is allowed for pure-noise runs
        if not (0.0 <= self.contrast <= 1.0):
            raise ConfigError("must lie in [0, 1]", "readout.contrast")
        object.__setattr__(self, "noise_mode", NoiseMode(self.noise_mode))


class Alias(NamedTuple):
    """Result of folding a frequency into ``[0, f_s/2]``.

    The applied frequency is recovered as
    ``fold_index * f_s + (f_s - detected if mirrored else detected)``.
    """

    detected: float
    fold_index: int
    mirrored: bool

    def unfold(self, sampling_rate: float) -> float:
        offset = sampling_rate - self.detected if self.mirrored else self.detected
        return self.fold_index * sampling_rate + offset


def fold_frequency(frequency: float, sample_interval: float) -> Alias:
    if not sample_interval > 0:
        raise ValueError("sample_interval must be positive")
    if frequency < 0:
        raise ValueError("frequency must be non-negative")
    fs = 1.0 / sample_interval
    fold_index = math.floor(frequency / fs)
    r = frequency - fold_index * fs
    if r > fs / 2:
        return Alias(fs - r, fold_index, True)
    return Alias(r, fold_index, False)


def alias_frequency(frequency: float, sample_interval: float) -> float:
    """Frequency seen after sampling every ``sample_interval`` seconds."""
    return fold_frequency(frequency, sample_interval).detected


def expected_rate(model: PhotonReadoutModel, signal: TargetSignal,
                  geometry: TraceGeometry, phase: float, j):
    """Noiseless mean photon number of readout ``j`` (scalar or array).

    ``n * (1 + c/2 * cos(2 pi f0 j dt + phase))`` with ``f0`` the aliased
    frequency.
    """
    j_arr = np.asarray(j)
    m = geometry.points_per_trace
    if np.any(j_arr < 0) or np.any(j_arr >= m):
        raise ValueError(f"readout index out of range [0, {m})")
    f0 = alias_frequency(signal.frequency, geometry.sample_interval)
    arg = TWO_PI * f0 * geometry.sample_interval * j_arr + phase
    out = model.mean_photons * (1.0 + 0.5 * model.contrast * np.cos(arg))
    return float(out) if out.ndim == 0 else out


def expected_trace(model, signal, geometry, phase):
    return expected_rate(model, signal, geometry, phase, np.arange(geometry.points_per_trace))


def sample_phase(signal: TargetSignal, rng: np.random.Generator) -> float:
    """Initial phase for one trace; uniform on [0, 2 pi) unless fixed."""
    u = rng.random()
    if signal.fixed_phase is not None:
        return float(signal.fixed_phase)
    return TWO_PI * u


def signal_bin(signal: TargetSignal, geometry: TraceGeometry) -> float:
    """Fractional one-sided DFT bin of the aliased target frequency."""
    f0 = alias_frequency(signal.frequency, geometry.sample_interval)
    return f0 * geometry.points_per_trace * geometry.sample_interval


def bin_aligned_frequency(target: float, geometry: TraceGeometry) -> float:
    """Applied frequency closest to ``target`` whose alias falls on an exact bin."""
    alias = fold_frequency(target, geometry.sample_interval)
    df = geometry.frequency_resolution
    detected = round(alias.detected / df) * df
    return Alias(detected, alias.fold_index, alias.mirrored).unfold(geometry.sampling_rate)
