"""From square-root to linear SNR growth.

Without rectification each trace starts at a random phase, so traces can
only be combined in power and the SNR grows as sqrt(N).  With the memory
bit the traces are sign-corrected and averaged in time; the noise floor
then keeps falling and the SNR grows linearly, at the price of the
reduction factor.  The crossover is where the rectified run overtakes.

    python demos/03_scaling_transition.py [--quick]
"""
from __future__ import annotations

import argparse

from rectqdyne import (config_reduction_factor, fit_power_law, reference_config, predict_snr,
                       snr_versus_n)


def run(protocol, grid, pool, threads):
    cfg = reference_config(protocol, n_traces=pool)
    points = snr_versus_n(cfg, grid, threads=threads)
    return cfg, [n for n, _ in points], [e.snr for _, e in points]


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--quick", action="store_true", help="stop at N = 1000")
    p.add_argument("--threads", type=int, default=4)
    args = p.parse_args(argv)
    grid = (100, 300, 1000) if args.quick else (100, 300, 1000, 3000, 10000)
    pool = int(grid[-1] / 0.6 * 1.2) + 100

    q_cfg, n, q_snr = run("qdyne", grid, grid[-1], args.threads)
    r_cfg, _, r_snr = run("in_situ", grid, pool, args.threads)

    print("     N    QDyne SNR   in situ SNR")
    for row in zip(n, q_snr, r_snr):
        print(f"{row[0]:6d}  {row[1]:10.1f}  {row[2]:12.1f}")

    q_fit, r_fit = fit_power_law(n, q_snr), fit_power_law(n, r_snr)
    print(f"\nexponents: QDyne {q_fit.exponent:.3f}, in situ {r_fit.exponent:.3f}")
    k = config_reduction_factor(r_cfg)
    ro, m = r_cfg.readout, r_cfg.geometry.points_per_trace
    q_slope = predict_snr(False, ro.mean_photons, m, ro.contrast, 1.0, 1, leading_order=True)
    r_slope = predict_snr(True, ro.mean_photons, m, ro.contrast, k, 1, leading_order=True)
    print(f"theory slopes: QDyne {q_slope:.3f} per sqrt(N), in situ {r_slope:.3f} per N "
          f"(k = {k:.3f})")
    pinned = fit_power_law(n, r_snr, exponent=1.0).prefactor
    print(f"measured in situ prefactor: {pinned:.3f}")


if __name__ == "__main__":
    main()
