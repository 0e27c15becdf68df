"""Array nulls, CSI overhead and the capacity turnover, with no system simulation.

Run: python3 demos/link_budget.py
"""

import numpy as np

from fdmimo.array import ArrayConfig, ElementPattern, array_factor, build_array, first_null
from fdmimo.cli import capacity_rows
from fdmimo.feedback import feedback_bits, pilot_overhead_fraction

# A 4-element half-wavelength ULA with uniform weights nulls at 30 degrees.
g = build_array(ArrayConfig(1, 4, 1, 0.5, 0.5, element=ElementPattern("isotropic")))
w = np.ones(4) / 2
for az in (0.0, 15.0, 30.0, 45.0):
    print(f"4-element ULA, azimuth {az:5.1f} deg: |AF| = {abs(array_factor(g, w, (az, 0.0))):.3e}")
print(f"first null: 4 x 0.5 -> {first_null(4, 0.5):.2f} deg, 8 x 0.8 -> {first_null(8, 0.8):.2f} deg")

# Class A feedback grows with the port count while class B stays at log2(N_B).
print("\n N_T  class-A bits  class-B bits  pilot fraction")
for nt in (2, 8, 16, 32, 64):
    print(f"{nt:4d}  {feedback_bits('A', nt):12d}  {feedback_bits('B', nt, n_b=4):12d}"
          f"  {pilot_overhead_fraction('NonPrecoded', nt):14.3f}")

# Pilot cost eventually outweighs the array gain for non-precoded CSI-RS.
print("\n N_T  ideal  non-precoded  beamformed (bit/s/Hz, 10 users, 10 dB)")
for nt, base, npc, bf, *_ in capacity_rows([8, 16, 32, 64], draws=500):
    print(f"{nt:4d}  {base:5.1f}  {npc:12.1f}  {bf:10.1f}")
