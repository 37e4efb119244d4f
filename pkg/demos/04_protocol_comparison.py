"""Where does each protocol win?

Relative SNR after a fixed measurement time, normalised to a single NV
without rectification.  Ensembles lose contrast, correlation sequences
lose sampling speed, and coherent averaging of thermal polarization
loses signal size; rectified ensembles grow linearly in the NV number.

    python demos/04_protocol_comparison.py
"""
from __future__ import annotations

import numpy as np

from rectqdyne import ComparisonParams, comparison_curves, polarization_ratio
from rectqdyne.analysis import molar_to_number_density, proton_larmor


def main():
    stat, thermal = polarization_ratio(molar_to_number_density(100.0), 10e-9,
                                       proton_larmor(2.7), 300.0)
    print(f"proton polarization at 10 nm depth, 2.7 T, 300 K: statistical {stat:.2e}, "
          f"thermal {thermal:.2e} (ratio {stat / thermal:.0f})\n")

    n_nv = np.array([1, 9, 100, 1e3, 1e4, 1e5, 1e6])
    curves = comparison_curves(n_nv, ComparisonParams())
    print("n_NV      " + "".join(f"{c.protocol_label.value:>18s}" for c in curves))
    for i, n in enumerate(n_nv):
        print(f"{n:8.0f}  " + "".join(f"{c.relative_snr[i]:18.4g}" for c in curves))


if __name__ == "__main__":
    main()
