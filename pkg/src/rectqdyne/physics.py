"""Analytic sensing physics for a single dynamical-decoupling block.

Accumulated phase, readout probabilities for x- and y-phase final pulses,
the phase-averaged noise-spectroscopy lineshape, and the field to
interaction-strength conversion.  Bessel functions of order 0 and 1 are
computed here directly (series for small arguments, Miller's backward
recurrence otherwise) so the lineshape has no special-function dependency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

GAMMA_E = 28.04e9  # Hz/T, electron spin

_SERIES_LIMIT = 4.0
_SERIES_TERMS = 30
_RESCALE = 1e250


@dataclass(frozen=True)
class InteractionParams:
    """Sensor-target coupling.

    alpha : interaction strength in radians; ``None`` derives it from the
        signal amplitude and sensing time.
    gyromagnetic_ratio : Hz/T.
    detuning : target detuning from the filter resonance, Hz.
    """

    alpha: float | None = None
    gyromagnetic_ratio: float = GAMMA_E
    detuning: float = 0.0

    def __post_init__(self):
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError("must be >= 0", "interaction.alpha")
        if not self.gyromagnetic_ratio > 0:
            raise ConfigError("must be > 0", "interaction.gyromagnetic_ratio")
        if not math.isfinite(self.detuning):
            raise ConfigError("must be finite", "interaction.detuning")


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise ValueError("Bessel function argument must be finite")


def _series_j01(x):
    # J0 = sum (-1)^k (x/2)^{2k} / (k!)^2 ; J1 = sum (-1)^k (x/2)^{2k+1} / (k! (k+1)!)
    q = -0.25 * x * x
    t0 = np.ones_like(x)
    t1 = 0.5 * x
    j0 = t0.copy()
    j1 = t1.copy()
    for k in range(1, _SERIES_TERMS):
        t0 = t0 * q / (k * k)
        t1 = t1 * q / (k * (k + 1))
        j0 += t0
        j1 += t1
    return j0, j1


def _miller_j01(x):
    """J0, J1 for x > 0 by downward recurrence normalised with J0 + 2 sum J_2k = 1."""
    start = int(x.max() + 10.0 * np.cbrt(x.max()) + 30)
    start += start % 2
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    even_sum = np.zeros_like(x)
    j1 = np.zeros_like(x)
    two_over_x = 2.0 / x
    for n in range(start, 0, -1):
        j_prev = n * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        order = n - 1
        if order == 1:
            j1 = j_cur.copy()
        elif order > 0 and order % 2 == 0:
            even_sum += 2.0 * j_cur
        big = np.abs(j_cur) > _RESCALE
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            j_cur *= scale
            j_next *= scale
            even_sum *= scale
            j1 *= scale
    norm = j_cur + even_sum
    return j_cur / norm, j1 / norm


def _bessel_j01(x):
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    ax = np.abs(x).ravel()
    j0 = np.empty_like(ax)
    j1 = np.empty_like(ax)
    small = ax <= _SERIES_LIMIT
    if small.any():
        j0[small], j1[small] = _series_j01(ax[small])
    if (~small).any():
        j0[~small], j1[~small] = _miller_j01(ax[~small])
    j1 = np.where(x.ravel() < 0, -j1, j1)
    return j0.reshape(x.shape), j1.reshape(x.shape)


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def bessel_j0(x):
    """Bessel function of the first kind, order 0 (absolute error ~1e-15 on |x| <= 50)."""
    return _scalar_or_array(_bessel_j01(x)[0], x)


def bessel_j1(x):
    """Bessel function of the first kind, order 1."""
    return _scalar_or_array(_bessel_j01(x)[1], x)


def sinc_pi(x):
    """Unnormalised sinc, ``sin(x)/x``; pass the full argument, e.g. ``N_p*pi*delta*tau``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    x2 = x * x
    out = np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)
    return _scalar_or_array(out, x)


def alpha_from_field(b_signal, sensing_time, gyromagnetic_ratio=GAMMA_E):
    """Interaction strength ``2 pi (2/pi) B gamma tau_sens = 4 B gamma tau_sens``.

    ``b_signal`` is the field amplitude in tesla.
    """
    if np.any(np.asarray(b_signal) < 0):
        raise ValueError("b_signal must be non-negative")
    if not (sensing_time > 0 and gyromagnetic_ratio > 0):
        raise ValueError("sensing_time and gyromagnetic_ratio must be positive")
    return 4.0 * b_signal * gyromagnetic_ratio * sensing_time


def field_from_alpha(alpha, sensing_time, gyromagnetic_ratio=GAMMA_E):
    if not (sensing_time > 0 and gyromagnetic_ratio > 0):
        raise ValueError("sensing_time and gyromagnetic_ratio must be positive")
    return alpha / (4.0 * gyromagnetic_ratio * sensing_time)


def filter_factor(n_pulses, detuning, pulse_spacing):
    """Amplitude weight ``sinc(N_p pi delta tau)`` of an off-resonant target."""
    return sinc_pi(n_pulses * math.pi * np.asarray(detuning) * pulse_spacing)


def accumulated_phase(alpha, phase, n_pulses=8, detuning=0.0, pulse_spacing=3e-6):
    """Sensor phase ``alpha cos(phase) sinc(N_p pi delta tau)`` after one block."""
    if np.any(np.asarray(alpha) < 0):
        raise ValueError("alpha must be non-negative")
    return alpha * np.cos(phase) * filter_factor(n_pulses, detuning, pulse_spacing)


def p0_x_readout(theta):
    """P(|0>) with the final pi/2 pulse along x."""
    return (np.cos(theta) + 1.0) / 2.0


def p0_y_readout(alpha, phase):
    """P(|0>) with the final pi/2 pulse along y (phase sensitive)."""
    return (np.sin(alpha * np.cos(phase)) + 1.0) / 2.0


def dd_lineshape(alpha, n_pulses, tau, f_target):
    """Phase-averaged DD noise-spectroscopy signal ``(1 - J0(alpha sinc))/2``.

    Parameters
    ----------
    alpha : float
        Interaction strength (rad).
    n_pulses : int
        Number of pi pulses in the block.
    tau : array_like
        Pulse spacings (s), all positive.
    f_target : float
        Target frequency (Hz); detuning is ``1/(2 tau) - f_target``.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("pulse spacings must be positive")
    detuning = 1.0 / (2.0 * tau) - f_target
    arg = alpha * filter_factor(n_pulses, detuning, tau)
    return (1.0 - bessel_j0(arg)) / 2.0
