"""Command-line front end.

    rectqdyne simulate --config run.json --out-dir out/
    rectqdyne scaling  --config run.json --n-grid 100,300,1000,3000,10000
    rectqdyne fidelity --alpha-pi 0.63 --charge-infidelity 0.3 [--sweep]
    rectqdyne ddfit    --synth --alpha-pi 0.57 --noise 0.01 --seed 3
    rectqdyne compare  [--config params.json] [--n-nv-grid 1,10,100]

Every command writes plot-ready data plus ``manifest.json`` into
``--out-dir`` (default ``$RECTQDYNE_OUT_DIR`` or ``./rectqdyne_out``).
Outputs depend only on the parameters and seed, never on ``--threads``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (ComparisonParams, comparison_curves, config_reduction_factor,
                       fit_dd_lineshape, fit_power_law, new_averager, predict_snr,
                       rectified_amplitude, snr_slope, snr_versus_n, synthetic_dd_sweep)
from .config import canonical_json, config_to_dict, load_config
from .errors import ConfigError, EmptyInputError, FitError
from .fidelity import (fidelity_alpha_ensemble, fidelity_report, fidelity_shot_noise,
                       fidelity_with_charge, rectified_amplitude_factor, reduction_factor)
from .protocols import reference_config, run_protocol
from .signal_model import alias_frequency, signal_bin
from .spectral import estimate_snr
from .traceio import TraceWriter, write_traces_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUT_DIR_ENV = "RECTQDYNE_OUT_DIR"
DEFAULT_N_GRID = (100, 300, 1000, 3000, 10000)


class _Outputs:
    """Collects written files for the manifest."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.dir / name

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def table(self, stem, fmt, header, rows):
        rows = [list(r) for r in rows]
        if fmt == "json":
            self.json(f"{stem}.json", {h: [_num(r[i]) for r in rows] for i, h in enumerate(header)})
        else:
            self.csv(f"{stem}.csv", header, rows)


def _num(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _fmt(v):
    v = _num(v)
    return repr(v) if isinstance(v, float) else v


def _manifest(out, command, params, seed):
    digest = hashlib.sha256(canonical_json({"command": command, "params": params}).encode())
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    created = (datetime.fromtimestamp(int(epoch), timezone.utc).isoformat()
               if epoch else None)
    files = list(out.files)
    out.json("manifest.json", {
        "command": command,
        "config_hash": digest.hexdigest(),
        "tool_version": __version__,
        "master_seed": seed,
        "outputs": files,
        "timestamps": {"created": created},
    })


def _load_protocol_config(args):
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg


def _load_params(args):
    if not args.config:
        return {}
    try:
        data = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("parameter file must hold a JSON object")
    return data


def _take(params, allowed, where):
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", where)
    return params


def _expected_bin(cfg):
    b = signal_bin(cfg.signal, cfg.geometry)
    if abs(b - round(b)) > 1e-6:
        print(f"warning: target alias falls between bins (bin {b:.3f}); expect scalloping loss",
              file=sys.stderr)
    k = int(round(b))
    return min(max(k, 1), cfg.geometry.points_per_trace // 2)


# ----------------------------------------------------------------- commands

def cmd_simulate(args):
    cfg = _load_protocol_config(args)
    out = _Outputs(args.out_dir)
    g = cfg.geometry
    coherent = cfg.rectified
    acc = new_averager(cfg)
    run = run_protocol(cfg, args.threads)

    if args.traces == "binary":
        with TraceWriter(out.path("traces.rqt"), cfg) as writer:
            for tr in run:
                writer.write(tr)
                acc.add(tr)
    elif args.traces == "csv":
        def tee():
            for tr in run:
                acc.add(tr)
                yield tr
        write_traces_csv(out.path("traces.csv"), tee(), g.points_per_trace)
    else:
        acc.extend(run)

    summary = run.summary()
    spectrum = acc.spectrum()
    peak = _expected_bin(cfg)
    snr = estimate_snr(spectrum, peak, args.exclusion)
    out.table("spectrum", args.format, ["frequency_hz", "power"],
              zip(spectrum.frequencies, spectrum.power))
    if coherent:
        mean = acc.mean_trace()
        t = np.arange(g.points_per_trace) * g.sample_interval
        out.table("averaged_trace", args.format, ["index", "time_s", "mean_counts_minus_baseline"],
                  zip(range(len(mean)), t, mean))
    k = config_reduction_factor(cfg)
    n = max(summary.traces_kept, 1)
    out.json("snr.json", {
        "protocol": cfg.protocol.value,
        "averaging": spectrum.mode.value,
        "n_averaged": spectrum.n_averaged,
        "traces_generated": summary.traces_generated,
        "traces_kept": summary.traces_kept,
        "wall_model_time_s": summary.wall_model_time,
        "detected_frequency_hz": alias_frequency(cfg.signal.frequency, g.sample_interval),
        "exclusion_halfwidth": args.exclusion,
        "estimate": snr.to_dict(),
        "theory": {
            "reduction_factor": k,
            "snr_leading_order": predict_snr(coherent, cfg.readout.mean_photons, g.points_per_trace,
                                             cfg.readout.contrast, k, n, leading_order=True),
        },
    })
    _manifest(out, "simulate", config_to_dict(cfg), cfg.master_seed)
    return EXIT_OK


def _parse_grid(text, cast=int):
    try:
        values = [cast(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if not values:
        raise ConfigError("grid is empty")
    return values


def cmd_scaling(args):
    cfg = _load_protocol_config(args)
    grid = _parse_grid(args.n_grid)
    _expected_bin(cfg)
    points = snr_versus_n(cfg, grid, args.threads, args.exclusion)
    out = _Outputs(args.out_dir)
    g = cfg.geometry
    coherent = cfg.rectified
    k = config_reduction_factor(cfg)
    rows = [(n, est.snr, est.peak_power, est.baseline_mean, est.baseline_rms,
             predict_snr(coherent, cfg.readout.mean_photons, g.points_per_trace,
                         cfg.readout.contrast, k, n)) for n, est in points]
    out.table("scaling", args.format,
              ["n", "snr", "peak_power", "baseline_mean", "baseline_rms", "theory_snr"], rows)

    n = [r[0] for r in rows]
    pinned = 1.0 if coherent else 0.5
    fits = {"snr_free": None, "snr_pinned": None, "noise_free": None, "noise_pinned": None}
    if len(rows) >= 3:
        snr = [r[1] for r in rows]
        noise = [r[4] for r in rows]
        if min(snr) > 0:
            fits["snr_free"] = fit_power_law(n, snr).to_dict()
            fits["snr_pinned"] = fit_power_law(n, snr, exponent=pinned).to_dict()
        fits["noise_free"] = fit_power_law(n, noise).to_dict()
        fits["noise_pinned"] = fit_power_law(n, noise, exponent=-pinned).to_dict()
    out.json("scaling_fit.json", {
        "protocol": cfg.protocol.value,
        "averaging": "coherent" if coherent else "incoherent",
        "prefix_semantics": "SNR(N) uses the first N kept traces of one pool",
        "pinned_exponent": pinned,
        "fits": fits,
        "theory": {"reduction_factor": k,
                   "slope": snr_slope(coherent, cfg.readout.mean_photons, g.points_per_trace,
                                      cfg.readout.contrast, k),
                   "rectified_amplitude_factor": (rectified_amplitude_factor(
                       cfg.alpha, cfg.charge_infidelity, cfg.alpha_sigma) if coherent else 1.0)},
    })
    params = config_to_dict(cfg)
    params["n_grid"] = grid
    _manifest(out, "scaling", params, cfg.master_seed)
    return EXIT_OK


FIDELITY_KEYS = ("alpha", "charge_infidelity", "alpha_sigma")


def cmd_fidelity(args):
    params = _take(_load_params(args), FIDELITY_KEYS, "fidelity")
    alpha = params.get("alpha", 0.63 * math.pi)
    if args.alpha_pi is not None:
        alpha = args.alpha_pi * math.pi
    fcs = args.charge_infidelity if args.charge_infidelity is not None else \
        params.get("charge_infidelity", 0.0)
    sigma = args.alpha_sigma_pi * math.pi if args.alpha_sigma_pi is not None else \
        params.get("alpha_sigma", 0.0)
    if alpha < 0 or sigma < 0 or not 0 <= fcs <= 1:
        raise ConfigError("need alpha >= 0, alpha_sigma >= 0, 0 <= charge_infidelity <= 1")
    out = _Outputs(args.out_dir)
    out.json("fidelity.json", fidelity_report(alpha, fcs, sigma).to_dict())
    record = {"alpha": alpha, "charge_infidelity": fcs, "alpha_sigma": sigma,
              "sweep": bool(args.sweep), "mc_traces": args.mc_traces}

    if args.sweep:
        alphas = np.linspace(0.0, 2 * math.pi, 201)
        sigmas = (0.0, 0.1 * math.pi, 0.2 * math.pi, 0.3 * math.pi)
        header = ["alpha", "alpha_over_pi", "fidelity_shot_noise"] + \
                 [f"fidelity_sigma_{s / math.pi:.1f}pi" for s in sigmas[1:]]
        rows = []
        for a in alphas:
            rows.append([a, a / math.pi, fidelity_shot_noise(a)]
                        + [fidelity_alpha_ensemble(a, s, 0.0) for s in sigmas[1:]])
        out.table("fidelity_alpha_sweep", args.format, header, rows)
        fcs_grid = np.linspace(0.0, 0.9, 91)
        rows = []
        for f in fcs_grid:
            F = fidelity_with_charge(alpha, f)
            rows.append([f, F, 2 * F - 1, reduction_factor(F),
                         rectified_amplitude_factor(alpha, f)])
        out.table("fidelity_charge_sweep", args.format,
                  ["charge_infidelity", "fidelity", "binary_factor", "reduction_factor",
                   "exact_amplitude_factor"], rows)
    if args.mc_traces:
        seed = args.seed if args.seed is not None else 0
        rows = []
        for a_pi in (0.3, 0.57, 0.63):
            for f in (0.0, 0.15, 0.30):
                cfg = reference_config("ex_situ", n_traces=args.mc_traces, master_seed=seed,
                                       charge_infidelity=f, init_success_prob=1.0)
                cfg = dataclasses.replace(cfg, interaction=dataclasses.replace(
                    cfg.interaction, alpha=a_pi * math.pi))
                ratio, kept = rectified_amplitude(cfg, args.threads)
                F = fidelity_with_charge(a_pi * math.pi, f)
                rows.append([a_pi * math.pi, f, F, reduction_factor(F),
                             rectified_amplitude_factor(a_pi * math.pi, f), ratio, kept])
        out.table("rectification_mc", args.format,
                  ["alpha", "charge_infidelity", "fidelity", "reduction_factor",
                   "exact_amplitude_factor", "simulated_amplitude_factor", "n_traces"], rows)
        record["seed"] = seed
    _manifest(out, "fidelity", record, args.seed)
    return EXIT_OK


DDFIT_KEYS = ("alpha", "f_target", "n_pulses", "noise", "n_points", "span", "f_target_guess")


def _read_sweep_csv(path):
    tau, sig = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"tau", "signal"} <= set(reader.fieldnames):
            raise ConfigError("sweep CSV needs 'tau' and 'signal' columns", str(path))
        for row in reader:
            try:
                tau.append(float(row["tau"]))
                sig.append(float(row["signal"]))
            except ValueError:
                raise ConfigError(f"non-numeric row {row}", str(path)) from None
    if len(tau) < 5:
        raise ConfigError("sweep needs at least 5 rows", str(path))
    return np.array(tau), np.array(sig)


def cmd_ddfit(args):
    params = _take(_load_params(args), DDFIT_KEYS, "ddfit")
    n_pulses = args.n_pulses or params.get("n_pulses", 8)
    f_target = args.f_target or params.get("f_target", 166e3)
    out = _Outputs(args.out_dir)
    record = {"n_pulses": n_pulses}
    if args.sweep_csv:
        tau, sig = _read_sweep_csv(args.sweep_csv)
        record["sweep_csv_sha256"] = hashlib.sha256(Path(args.sweep_csv).read_bytes()).hexdigest()
    elif args.synth or params:
        alpha = args.alpha_pi * math.pi if args.alpha_pi is not None else \
            params.get("alpha", 0.57 * math.pi)
        noise = args.noise if args.noise is not None else params.get("noise", 0.01)
        seed = args.seed if args.seed is not None else 0
        tau, sig = synthetic_dd_sweep(alpha, f_target, n_pulses, params.get("n_points", 61),
                                      params.get("span", 100e3), noise, seed)
        out.table("sweep", "csv", ["tau", "signal"], zip(tau, sig))
        record.update(alpha=alpha, f_target=f_target, noise=noise, seed=seed)
    else:
        raise ConfigError("give --sweep-csv FILE or --synth")
    guess = params.get("f_target_guess", f_target)
    fit = fit_dd_lineshape(tau, sig, n_pulses, guess)
    out.json("ddfit.json", fit.to_dict())
    _manifest(out, "ddfit", record, args.seed)
    return EXIT_OK


def cmd_compare(args):
    fields = {f.name for f in dataclasses.fields(ComparisonParams)}
    params = ComparisonParams(**_take(_load_params(args), fields, "compare"))
    if args.n_nv_grid:
        grid = _parse_grid(args.n_nv_grid, float)
    else:
        grid = np.logspace(0, 6, 61)
    out = _Outputs(args.out_dir)
    for curve in comparison_curves(grid, params):
        out.table(f"compare_{curve.protocol_label.value}", args.format, ["n_nv", "relative_snr"],
                  zip(curve.n_nv, curve.relative_snr))
    record = dataclasses.asdict(params)
    record["n_nv_grid"] = [float(x) for x in grid]
    _manifest(out, "compare", record, None)
    return EXIT_OK


# ----------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter file")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out-dir", default=os.environ.get(OUT_DIR_ENV, "rectqdyne_out"))
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of tabular outputs")
    common.add_argument("--threads", type=int, default=1)

    p = argparse.ArgumentParser(prog="rectqdyne", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one protocol and its PSD")
    s.add_argument("--traces", choices=("binary", "csv", "none"), default="binary")
    s.add_argument("--exclusion", type=int, default=3, help="baseline exclusion half-width (bins)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("scaling", parents=[common], help="SNR and noise floor versus N")
    s.add_argument("--n-grid", default=",".join(map(str, DEFAULT_N_GRID)))
    s.add_argument("--exclusion", type=int, default=3)
    s.set_defaults(func=cmd_scaling)

    s = sub.add_parser("fidelity", parents=[common], help="rectification fidelity report")
    s.add_argument("--alpha-pi", type=float, help="interaction strength in units of pi")
    s.add_argument("--charge-infidelity", type=float)
    s.add_argument("--alpha-sigma-pi", type=float)
    s.add_argument("--sweep", action="store_true", help="write alpha and charge sweeps")
    s.add_argument("--mc-traces", type=int, default=0,
                   help="also simulate the rectified amplitude with this many traces per point")
    s.set_defaults(func=cmd_fidelity)

    s = sub.add_parser("ddfit", parents=[common], help="fit a DD noise-spectroscopy sweep")
    s.add_argument("--sweep-csv", help="CSV with columns tau, signal")
    s.add_argument("--synth", action="store_true", help="fit a synthetic sweep")
    s.add_argument("--alpha-pi", type=float)
    s.add_argument("--f-target", type=float)
    s.add_argument("--n-pulses", type=int)
    s.add_argument("--noise", type=float)
    s.set_defaults(func=cmd_ddfit)

    s = sub.add_parser("compare", parents=[common], help="relative SNR of sensing protocols")
    s.add_argument("--n-nv-grid", help="comma-separated NV numbers")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitError, EmptyInputError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if isinstance(exc, FitError) and exc.diagnostics:
            print(json.dumps(exc.diagnostics, default=str, indent=2), file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
