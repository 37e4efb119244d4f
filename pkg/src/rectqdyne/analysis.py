"""Scaling laws, lineshape fitting and the protocol comparison calculator."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants, optimize

from .errors import ConfigError, FitError
from .fidelity import fidelity_alpha_ensemble, reduction_factor
from .physics import bessel_j0, dd_lineshape
from .protocols import iter_traces, run_protocol
from .signal_model import signal_bin
from .spectral import CoherentAverager, IncoherentAverager, estimate_snr

PROTON_GAMMA = constants.physical_constants["proton gyromag. ratio"][0]  # rad s^-1 T^-1


# ---------------------------------------------------------------- SNR theory

def snr_slope(coherent, mean_photons, n_points, contrast, k=1.0):
    """Leading-order SNR per N (coherent) or per sqrt(N) (incoherent)."""
    base = mean_photons * n_points * contrast ** 2 / 16.0
    return base * k * k if coherent else base


def predict_snr(coherent, mean_photons, n_points, contrast, k, n, leading_order=False):
    """Shot-noise limited PSD SNR after averaging ``n`` traces.

    coherent: ``n m c^2 k^2 / 16 * N - 1``; incoherent: ``n m c^2 / 16 * sqrt(N) - 1``
    (``k`` is ignored).  The ``-1`` is dropped with ``leading_order=True``.
    """
    for name, v in (("mean_photons", mean_photons), ("n_points", n_points),
                    ("contrast", contrast), ("n", n)):
        if np.any(np.asarray(v) <= 0):
            raise ValueError(f"{name} must be positive")
    n = np.asarray(n, dtype=float)
    growth = n if coherent else np.sqrt(n)
    value = snr_slope(coherent, mean_photons, n_points, contrast, k if coherent else 1.0) * growth
    if not leading_order:
        value = value - 1.0
    return float(value) if value.ndim == 0 else value


# ---------------------------------------------------------------- power laws

@dataclass(frozen=True)
class ScalingFit:
    """``value = prefactor * N**exponent``.

    ``covariance`` is over ``(exponent, prefactor)``; the exponent row and
    column are zero for a pinned fit.
    """

    exponent: float
    prefactor: float
    covariance: np.ndarray
    n_points: int
    pinned: bool = False

    @property
    def exponent_err(self):
        return float(math.sqrt(self.covariance[0, 0]))

    @property
    def prefactor_err(self):
        return float(math.sqrt(self.covariance[1, 1]))

    def to_dict(self):
        return {"exponent": self.exponent, "prefactor": self.prefactor,
                "covariance": self.covariance.tolist(), "n_points": self.n_points,
                "pinned": self.pinned}


def fit_power_law(n, values, exponent=None):
    """Least squares of ``log(value)`` on ``log(N)``.

    Pass ``exponent`` to pin it and fit the prefactor only.
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(values, dtype=float)
    if n.shape != y.shape or n.size < 3:
        raise ValueError("need at least 3 (N, value) pairs")
    if np.any(n <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive N and values")
    lx, ly = np.log(n), np.log(y)
    if exponent is not None:
        resid = ly - exponent * lx
        log_pref = resid.mean()
        dof = n.size - 1
        var = ((resid - log_pref) ** 2).sum() / dof / n.size
        pref = math.exp(log_pref)
        cov = np.array([[0.0, 0.0], [0.0, pref * pref * var]])
        return ScalingFit(float(exponent), pref, cov, n.size, pinned=True)
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    s2 = (resid ** 2).sum() / (n.size - 2)
    cov_log = s2 * np.linalg.inv(design.T @ design)
    pref = math.exp(coef[1])
    jac = np.diag([1.0, pref])
    return ScalingFit(float(coef[0]), pref, jac @ cov_log @ jac.T, n.size)


# ---------------------------------------------------------------- DD lineshape

@dataclass(frozen=True)
class DDFit:
    alpha: float
    f_target: float
    covariance: np.ndarray
    cost: float
    start_alpha: float
    diagnostics: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"alpha": self.alpha, "alpha_over_pi": self.alpha / math.pi,
                "f_target": self.f_target, "covariance": self.covariance.tolist(),
                "cost": self.cost, "start_alpha": self.start_alpha,
                "starts": self.diagnostics}


DEFAULT_ALPHA_STARTS = (0.2 * math.pi, 0.5 * math.pi, 0.8 * math.pi)


def fit_dd_lineshape(tau, signal, n_pulses, f_target_guess, alpha_guess=None, max_nfev=2000):
    """Levenberg-Marquardt fit of :func:`~rectqdyne.physics.dd_lineshape`.

    Starts from every value in ``alpha_guess`` (default 0.2, 0.5, 0.8 pi) and
    keeps the lowest cost; J0 is even so the sign of alpha is dropped.

    Returns
    -------
    DDFit
        ``covariance`` is over ``(alpha, f_target)``, scaled by the residual
        variance.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(signal, dtype=float)
    if tau.size < 5 or tau.shape != y.shape:
        raise ValueError("need at least 5 (tau, signal) points")
    if alpha_guess is None:
        starts = DEFAULT_ALPHA_STARTS
    else:
        starts = tuple(np.atleast_1d(alpha_guess).astype(float))
    f_scale = float(f_target_guess)

    def residual(p):
        return dd_lineshape(p[0], n_pulses, tau, p[1] * f_scale) - y

    best = None
    diags = []
    for a0 in starts:
        try:
            res = optimize.least_squares(residual, [a0, 1.0], method="lm", max_nfev=max_nfev,
                                         xtol=1e-14, ftol=1e-14, gtol=1e-14)
        except (ValueError, np.linalg.LinAlgError) as exc:
            diags.append({"start_alpha": a0, "success": False, "message": str(exc)})
            continue
        diags.append({"start_alpha": a0, "success": bool(res.success), "cost": float(res.cost),
                      "alpha": float(abs(res.x[0])), "message": res.message})
        if res.success and (best is None or res.cost < best[0].cost):
            best = (res, a0)
    if best is None:
        raise FitError("DD lineshape fit did not converge from any start", {"starts": diags})
    res, a0 = best
    dof = max(1, y.size - 2)
    s2 = 2.0 * res.cost / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * s2
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.inf)
    scale = np.diag([1.0, f_scale])
    cov = scale @ cov @ scale
    return DDFit(float(abs(res.x[0])), float(res.x[1] * f_scale), cov, float(res.cost), a0, diags)


def alpha_from_contrast(peak_signal):
    """Invert the on-resonance signal ``(1 - J0(alpha))/2`` on the first lobe.

    Valid for ``0 <= peak_signal <= 0.5`` (alpha up to the first zero of J0).
    """
    if not 0.0 <= peak_signal <= 0.5:
        raise ValueError("peak signal must lie in [0, 0.5]")
    if peak_signal == 0.0:
        return 0.0
    target = 1.0 - 2.0 * peak_signal
    return optimize.brentq(lambda a: bessel_j0(a) - target, 0.0, 2.404825557695773, xtol=1e-15)


def synthetic_dd_sweep(alpha, f_target=166e3, n_pulses=8, n_points=61, span=100e3,
                       noise=0.0, rng=None):
    """Pulse spacings whose filter frequencies ``1/(2 tau)`` cover ``f_target +/- span``."""
    freqs = np.linspace(f_target - span, f_target + span, n_points)
    tau = 1.0 / (2.0 * freqs)
    clean = dd_lineshape(alpha, n_pulses, tau, f_target)
    if noise:
        rng = np.random.default_rng(rng)
        clean = clean + noise * rng.standard_normal(tau.size)
    return tau, clean


# ---------------------------------------------------------------- comparison

class ProtocolLabel(str, enum.Enum):
    SINGLE_NO_RECT = "single_no_rect"
    SINGLE_RECT = "single_rect"
    ENSEMBLE_NO_RECT = "ensemble_no_rect"
    ENSEMBLE_RECT = "ensemble_rect"
    CORRELATION = "correlation"
    CASR = "casr"


@dataclass(frozen=True)
class ComparisonParams:
    """Constants of the relative-SNR comparison after a fixed measurement time.

    contrast_ratio : single/ensemble contrast (0.30 / 0.05 = 6)
    rectification_gain : single-NV SNR gain from rectification
    k : reduction factor of the rectified protocols
    n_points : points per trace; correlation sampling is ``(m + 1)/2`` times slower
    polarization_ratio : statistical / thermal polarization
    rounded_slowdown : use 2000 instead of ``(m + 1)/2``
    """

    contrast_ratio: float = 6.0
    rectification_gain: float = 4.0
    k: float = 0.4
    n_points: int = 4000
    polarization_ratio: float = 300.0
    rounded_slowdown: bool = False

    @property
    def correlation_slowdown(self):
        if self.rounded_slowdown:
            return float(round(self.n_points / 2))
        return (self.n_points + 1) / 2.0


@dataclass(frozen=True)
class ComparisonCurve:
    protocol_label: ProtocolLabel
    n_nv: np.ndarray
    relative_snr: np.ndarray


def comparison_curves(n_nv, params=None):
    """Relative PSD SNR of each protocol versus the single-NV QDyne reference."""
    p = params or ComparisonParams()
    n = np.asarray(n_nv, dtype=float)
    if np.any(n <= 0):
        raise ValueError("n_nv must be positive")
    contrast_penalty = p.contrast_ratio ** 2
    per_nv = {
        ProtocolLabel.SINGLE_NO_RECT: np.ones_like(n),
        ProtocolLabel.SINGLE_RECT: np.full_like(n, p.rectification_gain),
        ProtocolLabel.ENSEMBLE_NO_RECT: np.full_like(n, 1.0 / contrast_penalty),
        ProtocolLabel.ENSEMBLE_RECT: p.rectification_gain / contrast_penalty * n,
        ProtocolLabel.CORRELATION: p.rectification_gain
        / (contrast_penalty * p.k ** 2 * p.correlation_slowdown) * n,
        ProtocolLabel.CASR: p.rectification_gain
        / (contrast_penalty * p.k ** 2 * p.polarization_ratio ** 2) * n,
    }
    return [ComparisonCurve(label, n.copy(), values) for label, values in per_nv.items()]


# ---------------------------------------------------------------- polarization

def molar_to_number_density(mol_per_litre):
    """Spins per m^3 from a molar concentration."""
    return mol_per_litre * 1e3 * constants.N_A


def proton_larmor(b0):
    """Proton Larmor angular frequency (rad/s) at field ``b0`` (T)."""
    return PROTON_GAMMA * b0


def polarization_ratio(density, depth, omega, temperature):
    """Statistical and thermal relative polarization.

    Statistical: ``1/sqrt(density * V)`` with V a hemisphere of radius
    ``depth``.  Thermal: ``tanh(hbar omega / 2 k_B T)``.

    Returns
    -------
    (statistical, thermal)
    """
    for name, v in (("density", density), ("depth", depth), ("omega", omega),
                    ("temperature", temperature)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    volume = 2.0 / 3.0 * math.pi * depth ** 3
    statistical = 1.0 / math.sqrt(density * volume)
    if math.isinf(temperature):
        return statistical, 0.0
    thermal = math.tanh(constants.hbar * omega / (2.0 * constants.k * temperature))
    return statistical, thermal


# ---------------------------------------------------------------- Monte Carlo bridge

def rectified_amplitude(config, threads=1):
    """Oscillation amplitude of the rectified average, in units of ``n_ph c / 2``.

    The coherent average of all kept traces is projected onto the target
    bin: ``A = 2 |X_k| / m``.  Requires the alias to sit on an exact bin.
    """
    g = config.geometry
    k_bin = signal_bin(config.signal, g)
    if abs(k_bin - round(k_bin)) > 1e-6:
        raise ValueError("target alias is not on an exact DFT bin")
    acc = CoherentAverager(g.points_per_trace, g.sample_interval)
    acc.extend(run_protocol(config, threads))
    x = acc.mean_trace()
    spec = np.fft.rfft(x - x.mean())
    amplitude = 2.0 * abs(spec[int(round(k_bin))]) / g.points_per_trace
    return amplitude / (0.5 * config.readout.mean_photons * config.readout.contrast), acc.count


# ---------------------------------------------------------------- SNR versus N

def config_reduction_factor(config):
    """``k`` for a config's mean alpha, spread and charge infidelity (1 for QDyne)."""
    if not config.rectified:
        return 1.0
    return reduction_factor(fidelity_alpha_ensemble(config.alpha, config.alpha_sigma,
                                                    config.charge_infidelity))


def new_averager(config):
    """Coherent averager for rectified protocols, incoherent for QDyne."""
    g = config.geometry
    if config.rectified:
        return CoherentAverager(g.points_per_trace, g.sample_interval,
                                config.readout.mean_photons)
    return IncoherentAverager(g.points_per_trace, g.sample_interval)


def snr_versus_n(config, n_grid, threads=1, exclusion_halfwidth=3):
    """SNR estimates after the first ``N`` kept traces, for each ``N`` in ``n_grid``.

    All points come from one trace pool, so larger ``N`` extend smaller ones.

    Returns
    -------
    list of (N, SNREstimate)

    Raises
    ------
    ConfigError
        If ``config.n_traces`` does not yield ``max(n_grid)`` kept traces.
    """
    grid = [int(n) for n in n_grid]
    if not grid or grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("N grid must be strictly ascending positive integers", "n_grid")
    peak = int(round(signal_bin(config.signal, config.geometry)))
    peak = min(max(peak, 1), config.geometry.points_per_trace // 2)
    acc = new_averager(config)
    out = []
    targets = iter(grid)
    target = next(targets)
    for tr in iter_traces(config, threads=threads):
        acc.add(tr)
        if acc.count == target:
            out.append((target, estimate_snr(acc.spectrum(), peak, exclusion_halfwidth)))
            target = next(targets, None)
            if target is None:
                return out
    raise ConfigError(f"pool of {config.n_traces} traces yields only {acc.count} kept traces; "
                      f"N grid needs {grid[-1]}", "n_traces")
