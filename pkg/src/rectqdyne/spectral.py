"""Trace averaging, |DFT|^2 power spectra and NMR-style SNR.

Conventions
-----------
* Unnormalised DFT, one-sided output of ``m//2 + 1`` bins, no doubling:
  a cosine of amplitude ``A`` on an exact bin has power ``(m A / 2)**2``.
* White noise of variance ``s2`` gives a mean non-DC bin power ``m * s2``.
* SNR = (peak power - baseline mean) / baseline RMS, the baseline being
  every non-DC bin outside ``peak +/- exclusion_halfwidth``.

Averagers are streaming accumulators.  Integer photon counts are summed in
int64 so merging partial accumulators is exact and order independent.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError

SNR_CAP = 1e15
DEFAULT_EXCLUSION = 3


class AveragingMode(str, enum.Enum):
    SINGLE = "single"
    COHERENT = "coherent_time_average"
    INCOHERENT = "incoherent_power_average"


@dataclass
class PSDSpectrum:
    """One-sided power spectrum.  ``n_points`` is the time-trace length."""

    frequencies: np.ndarray
    power: np.ndarray
    n_averaged: int = 1
    mode: AveragingMode = AveragingMode.SINGLE
    n_points: int | None = None

    def __post_init__(self):
        if self.n_points is None:
            self.n_points = 2 * (len(self.power) - 1)

    def to_dict(self):
        return {
            "mode": self.mode.value,
            "n_averaged": int(self.n_averaged),
            "frequency": self.frequencies.tolist(),
            "power": self.power.tolist(),
        }


def _as_trace(trace):
    x = np.asarray(trace)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("trace must be one-dimensional with at least 2 points")
    return x


def _power(x):
    spec = np.fft.rfft(x)
    return spec.real ** 2 + spec.imag ** 2


def dft_power(trace, sample_interval=1.0, subtract_mean=False):
    """One-sided ``|DFT|^2`` of a single trace.

    Any length is supported (pocketfft handles mixed radix and prime sizes).
    """
    x = _as_trace(trace).astype(float)
    if subtract_mean:
        x = x - x.mean()
    m = x.size
    return PSDSpectrum(np.fft.rfftfreq(m, sample_interval), _power(x), 1, AveragingMode.SINGLE, m)


def two_sided_energy(spectrum):
    """``(1/m) * sum over all m bins of |X_k|^2`` reconstructed from the one-sided power.

    Equals ``sum(trace**2)`` by Parseval.
    """
    p = spectrum.power
    m = spectrum.n_points
    inner = p[1:-1] if m % 2 == 0 else p[1:]
    total = p[0] + 2.0 * inner.sum()
    if m % 2 == 0:
        total += p[-1]
    return total / m


def _trace_weight(trace):
    # in situ traces are inverted at acquisition time
    return 1 if trace.sign_applied else trace.rectify_sign


class CoherentAverager:
    """Running time-domain average of ``sign * (counts - baseline)``.

    Feed :class:`~rectqdyne.protocols.PhotonTrace` objects with :meth:`add`
    (discarded traces are skipped) or raw arrays with :meth:`add_array`.
    """

    def __init__(self, n_points, sample_interval=1.0, baseline=0.0, subtract_mean=True):
        self.n_points = int(n_points)
        self.sample_interval = sample_interval
        self.baseline = baseline
        self.subtract_mean = subtract_mean
        self._sum = None
        self._sign_sum = 0
        self.count = 0

    def add_array(self, values, sign=1):
        values = np.asarray(values)
        if values.shape != (self.n_points,):
            raise ValueError(f"expected {self.n_points} points, got {values.shape}")
        if np.issubdtype(values.dtype, np.integer):
            contrib = values.astype(np.int64) * int(sign)
        else:
            contrib = values.astype(float) * sign
        if self._sum is None:
            self._sum = contrib.copy()
        else:
            if self._sum.dtype != contrib.dtype:
                self._sum = self._sum.astype(float)
            self._sum = self._sum + contrib
        self._sign_sum += int(sign)
        self.count += 1

    def add(self, trace):
        if trace.kept:
            self.add_array(trace.counts, _trace_weight(trace))

    def extend(self, traces):
        for tr in traces:
            self.add(tr)
        return self

    def merge(self, other):
        """Combine with another accumulator; equals accumulating the concatenation."""
        if other.count == 0:
            return self
        if self.count == 0:
            self._sum = other._sum.copy()
        else:
            self._sum = self._sum + other._sum
        self._sign_sum += other._sign_sum
        self.count += other.count
        return self

    def mean_trace(self):
        if self.count == 0:
            raise EmptyInputError("no kept traces to average")
        return (self._sum - self.baseline * self._sign_sum) / self.count

    def spectrum(self):
        x = self.mean_trace()
        if self.subtract_mean:
            x = x - x.mean()
        m = self.n_points
        return PSDSpectrum(np.fft.rfftfreq(m, self.sample_interval), _power(x), self.count,
                           AveragingMode.COHERENT, m)


class IncoherentAverager:
    """Running mean of per-trace power spectra (each trace mean-subtracted by default)."""

    def __init__(self, n_points, sample_interval=1.0, subtract_mean=True):
        self.n_points = int(n_points)
        self.sample_interval = sample_interval
        self.subtract_mean = subtract_mean
        self._sum = np.zeros(self.n_points // 2 + 1)
        self.count = 0

    def add_array(self, values):
        x = np.asarray(values, dtype=float)
        if x.shape != (self.n_points,):
            raise ValueError(f"expected {self.n_points} points, got {x.shape}")
        if self.subtract_mean:
            x = x - x.mean()
        self._sum += _power(x)
        self.count += 1

    def add(self, trace):
        if trace.kept:
            self.add_array(trace.counts)

    def extend(self, traces):
        for tr in traces:
            self.add(tr)
        return self

    def merge(self, other):
        self._sum = self._sum + other._sum
        self.count += other.count
        return self

    def spectrum(self):
        if self.count == 0:
            raise EmptyInputError("no kept traces to average")
        m = self.n_points
        return PSDSpectrum(np.fft.rfftfreq(m, self.sample_interval), self._sum / self.count,
                           self.count, AveragingMode.INCOHERENT, m)


def _first_kept(traces):
    it = iter(traces)
    for tr in it:
        if tr.kept:
            return tr, it
    raise EmptyInputError("no kept traces to average")


def average_coherent(traces, sample_interval=1.0, baseline=0.0, subtract_mean=True):
    """Time-domain average of rectified traces followed by :func:`dft_power`."""
    first, rest = _first_kept(traces)
    acc = CoherentAverager(len(first.counts), sample_interval, baseline, subtract_mean)
    acc.add(first)
    acc.extend(rest)
    return acc.spectrum()


def average_incoherent(traces, sample_interval=1.0, subtract_mean=True):
    """Mean of per-trace power spectra."""
    first, rest = _first_kept(traces)
    acc = IncoherentAverager(len(first.counts), sample_interval, subtract_mean)
    acc.add(first)
    acc.extend(rest)
    return acc.spectrum()


@dataclass(frozen=True)
class SNREstimate:
    peak_bin: int
    peak_power: float
    baseline_mean: float
    baseline_rms: float
    snr: float
    degenerate: bool = False

    def to_dict(self):
        return {
            "peak_bin": self.peak_bin,
            "peak_power": self.peak_power,
            "baseline_mean": self.baseline_mean,
            "baseline_rms": self.baseline_rms,
            "snr": self.snr,
            "degenerate": self.degenerate,
        }


def estimate_snr(spectrum, expected_bin=None, exclusion_halfwidth=DEFAULT_EXCLUSION):
    """SNR of the peak against the noise floor.

    The peak is ``expected_bin`` if given, else the largest non-DC bin.  When
    the baseline has zero spread the result is flagged ``degenerate`` and the
    SNR is 0 (no excess) or :data:`SNR_CAP`.
    """
    p = np.asarray(spectrum.power, dtype=float)
    if p.size < 2:
        raise ValueError("spectrum needs at least one non-DC bin")
    if expected_bin is None:
        peak = int(np.argmax(p[1:])) + 1
    else:
        peak = int(expected_bin)
        if not 0 < peak < p.size:
            raise ValueError(f"expected_bin {peak} outside non-DC range")
    mask = np.ones(p.size, dtype=bool)
    mask[0] = False
    mask[max(0, peak - exclusion_halfwidth):peak + exclusion_halfwidth + 1] = False
    if not mask.any():
        raise ValueError("exclusion window leaves no baseline bins")
    base = p[mask]
    mean = float(base.mean())
    rms = float(base.std())
    excess = float(p[peak]) - mean
    if rms == 0.0:
        snr = 0.0 if excess == 0.0 else float(np.sign(excess)) * SNR_CAP
        return SNREstimate(peak, float(p[peak]), mean, rms, snr, True)
    return SNREstimate(peak, float(p[peak]), mean, rms, excess / rms)
