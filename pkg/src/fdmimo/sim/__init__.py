"""Multi-cell system simulation."""

from .engine import OverheadLedger, SimMetrics, overhead_ledger, run_drop
from .layout import NetworkLayout, UeDrop, build_layout, drop_ues

__all__ = ["OverheadLedger", "SimMetrics", "overhead_ledger", "run_drop",
           "NetworkLayout", "UeDrop", "build_layout", "drop_ues"]
