"""Rectification fidelity and the resulting signal reduction.

The memory bit is a noisy estimate of ``sign(cos(phi))``.  Its quality is
summarised by a fidelity ``F`` (shot-noise limited, then degraded by the
charge state), and the amplitude penalty on the coherently averaged trace
by ``k = (2/pi)(2F - 1)``.

:func:`rectified_amplitude_factor` gives the exact expectation of
``sign * cos(phi)`` under the same memory model, ``(1 - F_cs) J1(alpha)``,
which is what a Monte Carlo of the protocol converges to.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, optimize, special

from .physics import bessel_j1

HALF_PI = 0.5 * math.pi

QUAD_EPSABS = 1e-12


def _p0(phi, alpha):
    return (np.sin(alpha * np.cos(phi)) + 1.0) / 2.0


def _shot_noise_quad(alpha):
    # integrand is even in phi
    val, _ = integrate.quad(_p0, 0.0, HALF_PI, args=(alpha,), epsabs=QUAD_EPSABS, epsrel=1e-12)
    return 2.0 * val / math.pi


def _shot_noise_simpson(alpha, panels=10_000):
    phi = np.linspace(-HALF_PI, HALF_PI, 2 * panels + 1)
    return integrate.simpson(_p0(phi, alpha), x=phi) / math.pi


def fidelity_shot_noise(alpha, method="quad"):
    """Shot-noise limited rectification fidelity.

    ``(1/pi) * integral over [-pi/2, pi/2] of (sin(alpha cos phi) + 1)/2``.

    Parameters
    ----------
    alpha : float
        Interaction strength (rad), >= 0.
    method : {"quad", "simpson"}
        Adaptive Gauss-Kronrod (default) or composite Simpson with 10^4 panels.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if method == "quad":
        return _shot_noise_quad(alpha)
    if method == "simpson":
        return _shot_noise_simpson(alpha)
    raise ValueError(f"unknown method {method!r}")


def optimal_alpha(xatol=1e-8):
    """Interaction strength maximising :func:`fidelity_shot_noise` on (0, 2 pi]."""
    res = optimize.minimize_scalar(lambda a: -fidelity_shot_noise(a), bounds=(1e-9, 2 * math.pi),
                                   method="bounded", options={"xatol": xatol})
    return float(res.x)


def fidelity_with_charge(alpha, charge_infidelity):
    """``F_cs/2 + (1 - F_cs) F_SN``; a blind (neutral) sensor leaves the memory in |0>."""
    if not 0.0 <= charge_infidelity <= 1.0:
        raise ValueError("charge_infidelity must lie in [0, 1]")
    return charge_infidelity / 2.0 + (1.0 - charge_infidelity) * fidelity_shot_noise(alpha)


def _truncated_normal_mean(func, mean, sigma):
    """E[func(a)] for a ~ Normal(mean, sigma) truncated to a >= 0."""
    lo = max(0.0, mean - 12.0 * sigma)
    hi = mean + 12.0 * sigma
    if hi <= 0:
        raise ValueError("alpha distribution has no mass above zero")
    mass = special.ndtr((hi - mean) / sigma) - special.ndtr((lo - mean) / sigma)

    def weighted(a):
        return func(a) * math.exp(-0.5 * ((a - mean) / sigma) ** 2)

    val, _ = integrate.quad(weighted, lo, hi, epsabs=1e-11, epsrel=1e-11, limit=200)
    return float(val / (sigma * math.sqrt(2 * math.pi) * mass))


def fidelity_alpha_ensemble(mean_alpha, alpha_sigma, charge_infidelity=0.0):
    """Fidelity averaged over a truncated-normal spread of interaction strengths."""
    if alpha_sigma < 0:
        raise ValueError("alpha_sigma must be non-negative")
    if alpha_sigma == 0:
        return fidelity_with_charge(mean_alpha, charge_infidelity)
    return _truncated_normal_mean(lambda a: fidelity_with_charge(a, charge_infidelity),
                                  mean_alpha, alpha_sigma)


def binary_factor(fidelity):
    """``2F - 1``: amplitude penalty for a signal that is either fully on or fully inverted."""
    return 2.0 * fidelity - 1.0


def reduction_factor(fidelity):
    """``(2/pi)(2F - 1)``; negative below F = 0.5 (anti-rectification)."""
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError("fidelity must lie in [0, 1]")
    return 2.0 / math.pi * binary_factor(fidelity)


def rectified_amplitude_factor(alpha, charge_infidelity=0.0, alpha_sigma=0.0):
    """Exact mean of ``sign * cos(phi)`` for the memory model, ``(1 - F_cs) J1(alpha)``.

    Multiplying by ``n_ph * c / 2`` gives the oscillation amplitude of the
    rectified average.  For a deterministic sign this would be ``2/pi``.
    """
    if alpha_sigma > 0:
        j1 = _truncated_normal_mean(bessel_j1, alpha, alpha_sigma)
    else:
        j1 = bessel_j1(alpha)
    return float((1.0 - charge_infidelity) * j1)


@dataclass(frozen=True)
class FidelityReport:
    alpha: float
    charge_infidelity: float
    alpha_sigma: float
    fidelity_shot_noise: float
    fidelity: float
    binary_factor: float
    reduction_factor: float
    psd_signal_loss: float
    psd_signal_loss_total: float
    rectified_amplitude_factor: float

    def to_dict(self):
        return asdict(self)


def fidelity_report(alpha, charge_infidelity=0.0, alpha_sigma=0.0):
    """Collect all fidelity figures for one operating point.

    ``psd_signal_loss`` is ``1 - (2F-1)^2`` (relative to deterministic
    rectification); ``psd_signal_loss_total`` also includes the 2/pi
    geometric factor, ``1 - k^2``.
    """
    f_sn = (fidelity_shot_noise(alpha) if alpha_sigma == 0
            else _truncated_normal_mean(fidelity_shot_noise, alpha, alpha_sigma))
    f_total = fidelity_alpha_ensemble(alpha, alpha_sigma, charge_infidelity)
    b = binary_factor(f_total)
    k = reduction_factor(f_total)
    return FidelityReport(
        alpha=float(alpha),
        charge_infidelity=float(charge_infidelity),
        alpha_sigma=float(alpha_sigma),
        fidelity_shot_noise=f_sn,
        fidelity=f_total,
        binary_factor=b,
        reduction_factor=k,
        psd_signal_loss=1.0 - b * b,
        psd_signal_loss_total=1.0 - k * k,
        rectified_amplitude_factor=rectified_amplitude_factor(alpha, charge_infidelity,
                                                              alpha_sigma),
    )
