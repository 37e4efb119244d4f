"""Monte Carlo engines for plain QDyne and the two rectification protocols.

Every trace is a pure function of ``(config, trace index)``: it draws from
its own stream ``SeedSequence(master_seed, spawn_key=(index,))`` in a fixed
order (alpha, init, charge, memory, phase, then the m readouts).  Traces can
therefore be produced in any order or in parallel without changing a bit.

Photon models
-------------
rate
    Counts are drawn around ``n (1 + c/2 cos(2 pi f0 j dt + phi))``.  For the
    in situ protocol the modulation is inverted when the memory holds |1>,
    which is what the controlled-pi before each readout does.
projective
    Each readout first projects the sensor with ``p0_y(alpha, phi_ij)`` and
    then draws photons from the bright/dark mean ``n (1 +/- c/2)``.  The
    fundamental of the resulting trace has amplitude ``n c J1(alpha)``
    rather than ``n c / 2``.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import ConfigError
from .physics import InteractionParams, alpha_from_field, filter_factor, p0_y_readout
from .signal_model import (NoiseMode, PhotonReadoutModel, TargetSignal, TraceGeometry,
                           alias_frequency, bin_aligned_frequency, sample_phase)

TWO_PI = 2.0 * math.pi


class Protocol(str, enum.Enum):
    QDYNE = "qdyne"
    EX_SITU = "ex_situ"
    IN_SITU = "in_situ"


class PhotonModel(str, enum.Enum):
    RATE = "rate"
    PROJECTIVE = "projective"


class MemoryOutcome(enum.IntEnum):
    ZERO = 0
    ONE = 1


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything needed to reproduce one simulated experiment."""

    protocol: Protocol
    interaction: InteractionParams
    readout: PhotonReadoutModel
    signal: TargetSignal
    geometry: TraceGeometry
    n_traces: int
    charge_infidelity: float = 0.0
    init_success_prob: float = 1.0
    alpha_sigma: float = 0.0
    master_seed: int = 0
    photon_model: PhotonModel = PhotonModel.RATE
    sequence_duration: float | None = None
    ssr_repetitions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "photon_model", PhotonModel(self.photon_model))
        object.__setattr__(self, "ssr_repetitions", tuple(int(n) for n in self.ssr_repetitions))
        if int(self.n_traces) != self.n_traces or self.n_traces < 1:
            raise ConfigError("must be an integer >= 1", "n_traces")
        if not 0.0 <= self.charge_infidelity < 1.0:
            raise ConfigError("must lie in [0, 1)", "charge_infidelity")
        if not 0.0 < self.init_success_prob <= 1.0:
            raise ConfigError("must lie in (0, 1]", "init_success_prob")
        if not (math.isfinite(self.alpha_sigma) and self.alpha_sigma >= 0):
            raise ConfigError("must be >= 0", "alpha_sigma")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise ConfigError("must be an unsigned 64-bit integer", "master_seed")
        if self.sequence_duration is not None and not self.sequence_duration > 0:
            raise ConfigError("must be > 0 or null", "sequence_duration")

    @property
    def alpha(self) -> float:
        """Mean interaction strength, from the config or from the field amplitude."""
        if self.interaction.alpha is not None:
            return self.interaction.alpha
        return alpha_from_field(self.signal.amplitude, self.geometry.sensing_time,
                                self.interaction.gyromagnetic_ratio)

    @property
    def detuning_factor(self) -> float:
        return float(filter_factor(self.geometry.pulse_count, self.interaction.detuning,
                                   self.geometry.pulse_spacing))

    @property
    def rectified(self) -> bool:
        return self.protocol is not Protocol.QDYNE

    @property
    def trace_duration(self) -> float:
        """Model time per repetition, ``t_seq`` when given."""
        if self.sequence_duration is not None:
            return self.sequence_duration
        return self.geometry.points_per_trace * self.geometry.sample_interval


@dataclass
class PhotonTrace:
    """One repetition.

    ``counts`` are raw photon counts.  In situ traces are already inverted at
    acquisition (``sign_applied``), so averaging must not apply
    ``rectify_sign`` again.
    """

    index: int
    counts: np.ndarray
    initial_phase: float
    alpha: float
    memory_outcome: MemoryOutcome | None
    charge_ok: bool
    kept: bool
    rectify_sign: int = 1
    sign_applied: bool = False

    @property
    def averaging_sign(self) -> int:
        return 1 if self.sign_applied else self.rectify_sign


@dataclass(frozen=True)
class RunSummary:
    traces_generated: int
    traces_kept: int
    wall_model_time: float
    config: ProtocolConfig = field(repr=False)

    @property
    def kept_fraction(self) -> float:
        return self.traces_kept / self.traces_generated if self.traces_generated else 0.0


def rectification_decision(memory_outcome, protocol):
    """Sign applied to a trace: |0> keeps it, |1> inverts it."""
    if Protocol(protocol) is Protocol.QDYNE:
        raise ValueError("QDyne traces are not rectified")
    return 1 if MemoryOutcome(memory_outcome) is MemoryOutcome.ZERO else -1


def trace_rng(master_seed, index):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _draw_alpha(mean, sigma, u):
    if sigma == 0:
        return mean
    lower = special.ndtr(-mean / sigma)
    q = min(lower + u * (1.0 - lower), np.nextafter(1.0, 0.0))
    return max(0.0, mean + sigma * float(special.ndtri(q)))


@lru_cache(maxsize=32)
def _phase_basis(f0, dt, m):
    omega_j = TWO_PI * f0 * dt * np.arange(m)
    cos_j, sin_j = np.cos(omega_j), np.sin(omega_j)
    cos_j.flags.writeable = False
    sin_j.flags.writeable = False
    return cos_j, sin_j


def _phase_cosine(config, phase):
    g = config.geometry
    f0 = alias_frequency(config.signal.frequency, g.sample_interval)
    cos_j, sin_j = _phase_basis(f0, g.sample_interval, g.points_per_trace)
    return cos_j * math.cos(phase) - sin_j * math.sin(phase)


def _draw_counts(readout, mean, rng):
    if readout.noise_mode is NoiseMode.POISSON:
        return rng.poisson(mean)
    return mean + np.sqrt(mean) * rng.standard_normal(mean.shape)


def _sequential_block(config, rng, phase, alpha_eff, charge_ok, inverted):
    readout = config.readout
    n_ph, half_c = readout.mean_photons, 0.5 * readout.contrast
    cos_ij = _phase_cosine(config, phase)
    if config.photon_model is PhotonModel.RATE:
        mod = -half_c if inverted else half_c
        mean = n_ph * (1.0 + mod * cos_ij)
    else:
        m = config.geometry.points_per_trace
        if charge_ok:
            p_bright = (np.sin(alpha_eff * cos_ij) + 1.0) / 2.0
        else:
            p_bright = np.full(m, 0.5)
        bright = rng.random(m) < p_bright
        if inverted:
            bright = ~bright
        mean = np.where(bright, n_ph * (1.0 + half_c), n_ph * (1.0 - half_c))
    return _draw_counts(readout, mean, rng)


def generate_trace(config: ProtocolConfig, index: int) -> PhotonTrace:
    """Simulate repetition ``index`` of ``config``."""
    rng = trace_rng(config.master_seed, index)
    u_alpha, u_init, u_charge, u_memory = rng.random(4)
    alpha_i = _draw_alpha(config.alpha, config.alpha_sigma, u_alpha)
    kept = bool(u_init < config.init_success_prob)
    charge_ok = bool(u_charge >= config.charge_infidelity)
    phase = sample_phase(config.signal, rng)
    alpha_eff = alpha_i * config.detuning_factor

    memory = None
    sign = 1
    if config.rectified:
        # a neutral sensor does not rotate, so the memory stays in |0>
        p_zero = float(p0_y_readout(alpha_eff, phase)) if charge_ok else 1.0
        memory = MemoryOutcome.ZERO if u_memory < p_zero else MemoryOutcome.ONE
        sign = rectification_decision(memory, config.protocol)
    in_situ = config.protocol is Protocol.IN_SITU
    counts = _sequential_block(config, rng, phase, alpha_eff, charge_ok, in_situ and sign < 0)
    return PhotonTrace(index=index, counts=counts, initial_phase=phase, alpha=alpha_i,
                       memory_outcome=memory, charge_ok=charge_ok, kept=kept,
                       rectify_sign=sign, sign_applied=in_situ)


def iter_traces(config, start=0, stop=None, threads=1, chunk=64):
    """Yield traces ``start..stop-1`` in index order.

    With ``threads > 1`` traces are generated concurrently; the output is
    identical to the serial stream.
    """
    stop = config.n_traces if stop is None else stop
    if threads <= 1:
        for i in range(start, stop):
            yield generate_trace(config, i)
        return
    window = threads * chunk
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for lo in range(start, stop, window):
            idx = range(lo, min(lo + window, stop))
            yield from pool.map(lambda i: generate_trace(config, i), idx)


class ProtocolRun:
    """Iterable over all traces of a config, tallying a :class:`RunSummary`.

    >>> run = run_protocol(cfg)                      # doctest: +SKIP
    >>> spectrum = average_coherent(run)             # doctest: +SKIP
    >>> run.summary().traces_kept                    # doctest: +SKIP
    """

    def __init__(self, config, threads=1):
        self.config = config
        self.threads = threads
        self.generated = 0
        self.kept = 0

    def __iter__(self):
        self.generated = self.kept = 0
        for tr in iter_traces(self.config, threads=self.threads):
            self.generated += 1
            self.kept += tr.kept
            yield tr

    def summary(self) -> RunSummary:
        return RunSummary(self.generated, self.kept,
                          self.generated * self.config.trace_duration, self.config)


def run_protocol(config: ProtocolConfig, threads: int = 1) -> ProtocolRun:
    return ProtocolRun(config, threads)


# repetition numbers and sequence durations of the reference experiments
REFERENCE_SEQUENCE = {
    Protocol.QDYNE: dict(sequence_duration=0.110, ssr_repetitions=()),
    Protocol.EX_SITU: dict(sequence_duration=0.137, ssr_repetitions=(3000, 3000)),
    Protocol.IN_SITU: dict(sequence_duration=0.118, ssr_repetitions=(3000,)),
}
REFERENCE_TARGET_FREQUENCY = 166.666e3


def reference_config(protocol=Protocol.IN_SITU, **overrides) -> ProtocolConfig:
    """Reference single-NV experiment: c = 0.30, n = 0.057, m = 4000, N = 25000.

    Readouts are spaced by 110 ms / 4000 and the target frequency is nudged
    to the nearest value whose alias sits on an exact DFT bin.  Rectified
    protocols get 60 % initialisation success and 30 % charge infidelity.
    """
    protocol = Protocol(protocol)
    geometry = TraceGeometry(points_per_trace=4000, sample_interval=0.110 / 4000,
                             pulse_spacing=3e-6, pulse_count=8)
    signal = TargetSignal(frequency=bin_aligned_frequency(REFERENCE_TARGET_FREQUENCY, geometry),
                          amplitude=664e-9)
    rectified = protocol is not Protocol.QDYNE
    cfg = ProtocolConfig(
        protocol=protocol,
        interaction=InteractionParams(alpha=0.57 * math.pi),
        readout=PhotonReadoutModel(mean_photons=0.057, contrast=0.30),
        signal=signal,
        geometry=geometry,
        n_traces=25000,
        charge_infidelity=0.30 if rectified else 0.0,
        init_success_prob=0.6 if rectified else 1.0,
        master_seed=0,
        **REFERENCE_SEQUENCE[protocol],
    )
    return replace(cfg, **overrides) if overrides else cfg
