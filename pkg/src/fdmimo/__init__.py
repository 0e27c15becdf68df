"""FD-MIMO downlink toolkit.

Building blocks for 2D active antenna arrays (:mod:`fdmimo.array`), TXRU
virtualization (:mod:`fdmimo.txru`), a simplified 3D channel
(:mod:`fdmimo.channel`), class-A / class-B CSI feedback
(:mod:`fdmimo.feedback`), MU-MIMO precoding and PF scheduling
(:mod:`fdmimo.precoding`, :mod:`fdmimo.scheduling`) and a multi-cell
system simulator (:mod:`fdmimo.sim`).
"""

from .array import ArrayConfig, ArrayGeometry, array_factor, build_array, first_null, steering_vector
from .channel import Scenario, UePosition, generate_channel
from .feedback import (build_dft_codebook, compute_cqi, feedback_bits, kronecker_codebook,
                       pilot_overhead_fraction, select_beam, select_co_phase, select_pmi)
from .precoding import effective_sum_capacity, slnr_precoder, zf_precoder
from .txru import TxruGrid, build_connected, build_partitioned, compose_precoder

__version__ = "0.1.0"
