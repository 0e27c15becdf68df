"""Class A, class B and adaptive class B feedback under FTP traffic.

Run: python3 demos/feedback_classes.py [n_subframes]

The default of 400 subframes takes about a minute per class on one core.
The acceptance suite uses 2000 subframes and two seeds.
"""

import sys

from fdmimo.config import load_config
from fdmimo.sim.engine import run_drop

n_sub = int(sys.argv[1]) if len(sys.argv) > 1 else 400
print(f"19 sites, wraparound, 4 UEs per cell, FTP at 3 packets/s/cell, {n_sub} subframes")
print("class  mean Mbps  5%-ile Mbps  cell SE  rank")
for cls in ("A", "B", "B2"):
    cfg = load_config({"feedback": {"feedback_class": cls},
                       "traffic": {"kind": "ftp", "arrival_rate": 3.0},
                       "sim": {"ues_per_cell": 4, "n_subframes": n_sub}})
    m = run_drop(cfg, seed=1)
    print(f"{cls:>5}  {m.mean_user_tput_mbps:9.2f}  {m.edge_user_tput_mbps:11.2f}  "
          f"{m.cell_avg_se:7.3f}  {m.mean_rank:4.2f}")
