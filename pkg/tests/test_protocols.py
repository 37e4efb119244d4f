from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from rectqdyne.analysis import rectified_amplitude
from rectqdyne.errors import ConfigError
from rectqdyne.physics import InteractionParams
from rectqdyne.protocols import (MemoryOutcome, PhotonModel, Protocol, ProtocolConfig,
                                 generate_trace, iter_traces, reference_config,
                                 rectification_decision, run_protocol)
from rectqdyne.signal_model import NoiseMode, PhotonReadoutModel, TargetSignal, TraceGeometry
from rectqdyne.spectral import CoherentAverager

PI = math.pi


def small_config(protocol="ex_situ", m=200, bin_=17, alpha=0.63 * PI, n_traces=2000, **kw):
    geom = TraceGeometry(points_per_trace=m, sample_interval=1e-4)
    # alias on an exact bin, folded a few times
    freq = 7 * geom.sampling_rate + bin_ * geom.frequency_resolution
    readout = kw.pop("readout", PhotonReadoutModel(mean_photons=0.5, contrast=0.3))
    signal = kw.pop("signal", TargetSignal(frequency=freq))
    return ProtocolConfig(protocol=protocol, interaction=InteractionParams(alpha=alpha),
                          readout=readout, signal=signal, geometry=geom, n_traces=n_traces, **kw)


def _counts(traces):
    return np.stack([t.counts for t in traces])


@pytest.mark.parametrize("protocol", list(Protocol))
def test_thread_count_does_not_change_the_stream(protocol):
    cfg = small_config(protocol, n_traces=300, charge_infidelity=0.2, init_success_prob=0.7,
                       alpha_sigma=0.1, master_seed=99)
    serial = list(iter_traces(cfg))
    for threads in (2, 5):
        par = list(iter_traces(cfg, threads=threads, chunk=7))
        assert np.array_equal(_counts(serial), _counts(par))
        assert [t.initial_phase for t in serial] == [t.initial_phase for t in par]
        assert [t.memory_outcome for t in serial] == [t.memory_outcome for t in par]


@given(st.integers(0, 2**63), st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_trace_depends_only_on_seed_and_index(seed, index):
    cfg = small_config("in_situ", m=16, master_seed=seed, n_traces=1)
    a, b = generate_trace(cfg, index), generate_trace(cfg, index)
    assert np.array_equal(a.counts, b.counts) and a.initial_phase == b.initial_phase


def test_slices_concatenate():
    cfg = small_config(n_traces=50)
    whole = _counts(iter_traces(cfg))
    parts = np.concatenate([_counts(iter_traces(cfg, 0, 20)), _counts(iter_traces(cfg, 20, 50))])
    assert np.array_equal(whole, parts)


@pytest.mark.parametrize("fcs", [0.0, 0.3])
def test_memory_zero_marginal(fcs):
    n = 20000
    cfg = small_config(m=2, n_traces=n, charge_infidelity=fcs, master_seed=5)
    zeros = sum(t.memory_outcome is MemoryOutcome.ZERO for t in iter_traces(cfg))
    expected = fcs + (1 - fcs) / 2
    assert abs(zeros / n - expected) < 4 * math.sqrt(expected * (1 - expected) / n)


def test_kept_fraction():
    n = 20000
    cfg = small_config(m=2, n_traces=n, init_success_prob=0.6, master_seed=6)
    run = run_protocol(cfg)
    for _ in run:
        pass
    s = run.summary()
    assert s.traces_generated == n
    assert abs(s.kept_fraction - 0.6) < 4 * math.sqrt(0.24 / n)


def test_deterministic_readout_at_quarter_turn():
    # alpha = pi/2 and phase 0 rotate the sensor fully onto |0>
    cfg = small_config(alpha=PI / 2, n_traces=200, signal=TargetSignal(frequency=1e3,
                                                                        fixed_phase=0.0))
    assert all(t.memory_outcome is MemoryOutcome.ZERO for t in iter_traces(cfg))
    cfg = dataclasses.replace(cfg, signal=TargetSignal(frequency=1e3, fixed_phase=PI))
    assert all(t.memory_outcome is MemoryOutcome.ONE for t in iter_traces(cfg))


def test_neutral_sensor_keeps_memory_in_zero():
    cfg = small_config(n_traces=400, charge_infidelity=0.5, master_seed=1)
    for t in iter_traces(cfg):
        if not t.charge_ok:
            assert t.memory_outcome is MemoryOutcome.ZERO and t.rectify_sign == 1


def test_rectification_decision():
    assert rectification_decision(MemoryOutcome.ZERO, "ex_situ") == 1
    assert rectification_decision(1, Protocol.IN_SITU) == -1
    with pytest.raises(ValueError):
        rectification_decision(0, Protocol.QDYNE)


def test_qdyne_traces_carry_no_memory():
    t = generate_trace(small_config("qdyne"), 0)
    assert t.memory_outcome is None and t.rectify_sign == 1 and t.averaging_sign == 1


def test_in_situ_inverts_at_acquisition():
    cfg = small_config("in_situ", n_traces=3000, readout=PhotonReadoutModel(50.0, 0.3),
                       signal=TargetSignal(frequency=1e3, fixed_phase=0.0), alpha=0.4,
                       master_seed=2)
    ones = [t for t in iter_traces(cfg) if t.memory_outcome is MemoryOutcome.ONE]
    zeros = [t for t in iter_traces(cfg) if t.memory_outcome is MemoryOutcome.ZERO]
    assert ones and zeros
    assert all(t.sign_applied and t.averaging_sign == 1 for t in ones)
    # first sample sits at the cosine maximum; ONE traces are recorded dimmed there
    assert _counts(ones)[:, 0].mean() < 50 < _counts(zeros)[:, 0].mean()


def test_ex_situ_stores_sign_for_later():
    cfg = small_config("ex_situ", n_traces=200, master_seed=4)
    for t in iter_traces(cfg):
        assert not t.sign_applied and t.averaging_sign == t.rectify_sign


@pytest.mark.parametrize("protocol", ["ex_situ", "in_situ"])
@pytest.mark.parametrize("alpha,fcs", [(0.63 * PI, 0.0), (0.3 * PI, 0.3)])
def test_rectified_amplitude_follows_j1(protocol, alpha, fcs):
    n = 20000
    cfg = small_config(protocol, m=100, bin_=9, alpha=alpha, n_traces=n, charge_infidelity=fcs,
                       readout=PhotonReadoutModel(0.057, 0.3), master_seed=12)
    ratio, kept = rectified_amplitude(cfg)
    expected = (1 - fcs) * special.j1(alpha)
    # per-trace amplitude noise: sqrt(2 n / m) / (n c / 2), plus the sign variance
    sigma = math.sqrt((2 / 0.057 / 100) / (0.15 ** 2) / 4 + 0.5) / math.sqrt(kept)
    assert abs(ratio - expected) < 4 * sigma


def test_qdyne_average_flattens_as_inverse_sqrt_n():
    cfg = small_config("qdyne", m=200, n_traces=6400, readout=PhotonReadoutModel(2.0, 0.3),
                       master_seed=3)
    acc = CoherentAverager(200, subtract_mean=False)
    grid = (100, 400, 1600, 6400)
    dev = []
    for t in iter_traces(cfg):
        acc.add(t)
        if acc.count in grid:
            dev.append(np.abs(acc.mean_trace() - 2.0).max())
    slope = np.polyfit(np.log(grid), np.log(dev), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_gaussian_noise_mode():
    cfg = small_config(readout=PhotonReadoutModel(5.0, 0.3, NoiseMode.GAUSSIAN), n_traces=3)
    t = generate_trace(cfg, 0)
    assert t.counts.dtype == np.float64


def test_alpha_spread_is_truncated_at_zero():
    cfg = small_config(m=2, alpha=0.2, alpha_sigma=0.5, n_traces=4000)
    alphas = np.array([t.alpha for t in iter_traces(cfg)])
    assert alphas.min() >= 0
    # mean of a normal truncated below at zero: mu + sigma * pdf(z) / (1 - cdf(z))
    z = -0.2 / 0.5
    pdf = math.exp(-z * z / 2) / math.sqrt(2 * PI)
    mean = 0.2 + 0.5 * pdf / (1 - special.ndtr(z))
    assert abs(alphas.mean() - mean) < 4 * alphas.std() / math.sqrt(alphas.size)


def test_projective_model_fundamental_amplitude():
    # bright/dark per readout: the fundamental of sin(alpha cos) is 2 J1(alpha)
    alpha, n_ph, c = 0.57 * PI, 0.5, 0.3
    cfg = small_config("qdyne", m=100, bin_=9, alpha=alpha, n_traces=4000,
                       readout=PhotonReadoutModel(n_ph, c), photon_model=PhotonModel.PROJECTIVE,
                       signal=TargetSignal(frequency=9 / (100 * 1e-4), fixed_phase=0.0))
    acc = CoherentAverager(100)
    acc.extend(iter_traces(cfg))
    amp = 2 * abs(np.fft.rfft(acc.mean_trace())[9]) / 100
    assert amp == pytest.approx(n_ph * c * special.j1(alpha), rel=0.05)


def test_alpha_from_field_when_unset():
    cfg = dataclasses.replace(reference_config("qdyne"), interaction=InteractionParams())
    assert cfg.alpha == pytest.approx(4 * 664e-9 * 28.04e9 * 24e-6)


def test_reference_config_defaults():
    cfg = reference_config("in_situ")
    assert cfg.geometry.points_per_trace == 4000
    assert cfg.readout.mean_photons == 0.057 and cfg.readout.contrast == 0.30
    assert cfg.alpha == pytest.approx(0.57 * PI)
    assert cfg.trace_duration == 0.118
    assert reference_config("qdyne").charge_infidelity == 0.0


@pytest.mark.parametrize("kw,field", [
    (dict(n_traces=0), "n_traces"),
    (dict(charge_infidelity=1.0), "charge_infidelity"),
    (dict(init_success_prob=0.0), "init_success_prob"),
    (dict(alpha_sigma=-1.0), "alpha_sigma"),
    (dict(master_seed=-1), "master_seed"),
    (dict(sequence_duration=0.0), "sequence_duration"),
])
def test_config_validation(kw, field):
    with pytest.raises(ConfigError) as exc:
        reference_config("ex_situ", **kw)
    assert exc.value.field == field
