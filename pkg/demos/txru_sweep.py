"""Cell spectral efficiency versus TXRU count with ideal feedback.

Run: python3 demos/txru_sweep.py [n_subframes]

The 256-element panel keeps its aperture while the number of vertical
TXRU rows grows, so each extra row adds a controllable vertical degree
of freedom.
"""

import sys

from fdmimo.config import load_config
from fdmimo.sim.engine import run_drop

n_sub = int(sys.argv[1]) if len(sys.argv) > 1 else 150
print(" TXRUs  cell SE  edge SE  MU share")
for nv in (1, 2, 4):
    cfg = load_config({"array": {"M": 32, "N": 4, "P": 2, "dv_lambda": 3.2, "dh_lambda": 2.0},
                       "txru": {"L": 8 * nv, "grid": {"NV": nv, "NH": 8}},
                       "feedback": {"feedback_class": "ideal"},
                       "sim": {"ues_per_cell": 4, "n_subframes": n_sub, "ideal_channel_estimation": True}})
    m = run_drop(cfg, seed=1)
    print(f"{8 * nv:6d}  {m.cell_avg_se:7.3f}  {m.edge_se:7.3f}  {m.mu_fraction:8.2f}")
