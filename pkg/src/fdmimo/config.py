"""Strict JSON configuration for system simulations.

Every block maps onto a frozen dataclass.  Unknown keys anywhere abort with
:class:`ConfigError`, as do out-of-range values, before any simulation work
starts.  Defaults reproduce the usual FD-MIMO evaluation assumptions
(10 MHz FDD, 19 sites x 3 sectors, 10 UEs per cell, (8, 4, 2) array, 5 ms
CSI period with 6 ms delay, up to 3 HARQ retransmissions 8 ms apart).
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from .array import ArrayConfig, ElementPattern
from .channel import Scenario

__all__ = [
    "ConfigError", "TxruConfig", "FeedbackConfig", "TrafficConfig", "SimParams",
    "SimConfig", "load_config", "config_hash",
]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _from_block(cls, d, where):
    names = [f.name for f in fields(cls)]
    _check_keys(d, names, where)
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class TxruConfig:
    """TXRU block: ``{"kind", "L", "L_prime", "grid": {"NV", "NH"}, "tilt_deg"}``."""

    kind: str = "partitioned"
    L: int = 16
    L_prime: int = 1
    NV: int = 2
    NH: int = 8
    tilt_deg: float | None = None

    def __post_init__(self):
        if self.kind not in ("partitioned", "connected"):
            raise ValueError(f"kind must be 'partitioned' or 'connected', got {self.kind!r}")
        if self.kind == "partitioned" and self.NV * self.NH != self.L:
            raise ValueError(f"grid {self.NV}x{self.NH} does not give L={self.L}")
        if self.L_prime < 1 or self.L_prime > self.L:
            raise ValueError("need 1 <= L_prime <= L")

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, ["kind", "L", "L_prime", "grid", "tilt_deg"], "txru")
        d = dict(d)
        grid = d.pop("grid", {"NV": cls.NV, "NH": cls.NH})
        _check_keys(grid, ["NV", "NH"], "txru.grid")
        d.update(grid)
        return _from_block(cls, d, "txru")

    def to_dict(self):
        out = {"kind": self.kind, "L": self.L, "L_prime": self.L_prime,
               "grid": {"NV": self.NV, "NH": self.NH}}
        if self.tilt_deg is not None:
            out["tilt_deg"] = self.tilt_deg
        return out


@dataclass(frozen=True)
class FeedbackConfig:
    """CSI acquisition scheme.

    ``feedback_class``: ``"A"`` non-precoded CSI-RS with a composite
    codebook, ``"B"`` beamformed CSI-RS scheme I (fixed vertical beams),
    ``"B2"`` scheme II (beams re-centered on the long-term PMI) or
    ``"ideal"`` (instantaneous, unquantized channel knowledge).
    """

    feedback_class: str = "A"
    N_B: int = 4
    report_period_ms: int = 5
    delay_ms: int = 6
    v_beams: int = 2
    v_oversampling: int = 1
    h_beams: int = 1
    h_oversampling: int = 1
    co_phases: int = 2
    beam_elevations_deg: tuple | None = None
    beam_span_deg: float = 8.0
    long_term_period_ms: int = 50
    max_rank: int = 2

    def __post_init__(self):
        if self.feedback_class not in ("A", "B", "B2", "ideal"):
            raise ValueError(f"feedback_class must be A, B, B2 or ideal, got {self.feedback_class!r}")
        if self.feedback_class in ("B", "B2") and self.N_B < 1:
            raise ValueError("class-B feedback needs N_B >= 1")
        if self.report_period_ms < 1 or self.delay_ms < 0 or self.long_term_period_ms < 1:
            raise ValueError("report period must be >= 1 ms and delay >= 0")
        if self.co_phases not in (1, 2, 4):
            raise ValueError("co_phases must be 1, 2 or 4")
        if self.max_rank not in (1, 2):
            raise ValueError("max_rank must be 1 or 2")
        if min(self.v_beams, self.h_beams, self.v_oversampling, self.h_oversampling) < 1:
            raise ValueError("codebook sizes must be >= 1")
        if self.beam_elevations_deg is not None:
            object.__setattr__(self, "beam_elevations_deg", tuple(float(e) for e in self.beam_elevations_deg))
            if len(self.beam_elevations_deg) != self.N_B:
                raise ValueError("beam_elevations_deg must list N_B angles")


@dataclass(frozen=True)
class TrafficConfig:
    kind: str = "full_buffer"
    packet_bytes: int = 500_000
    arrival_rate: float = 2.0  # packets / s / cell

    def __post_init__(self):
        if self.kind not in ("full_buffer", "ftp"):
            raise ValueError(f"traffic kind must be 'full_buffer' or 'ftp', got {self.kind!r}")
        if self.packet_bytes <= 0:
            raise ValueError("packet size must be positive")
        if self.kind == "ftp" and not self.arrival_rate > 0:
            raise ValueError("FTP arrival rate must be positive")


@dataclass(frozen=True)
class SimParams:
    n_sites: int = 19
    ues_per_cell: int = 10
    n_subframes: int = 2000
    n_subbands: int = 6
    n_rb: int = 50
    n_rx: int = 2
    max_layers: int = 4
    max_ues_per_group: int = 2
    wraparound: bool = True
    ideal_channel_estimation: bool = False
    harq_max_retx: int = 3
    harq_delay_ms: int = 8
    pf_window: float = 100.0
    control_symbols: int = 3
    dmrs_re: int = 12
    crs_ports: int = 2
    csi_rs_max_re: int = 16
    se_cap: float = 6.0
    element_pattern: str = "parabolic"
    single_cell: bool = False
    record_traces: bool = False

    def __post_init__(self):
        if self.n_sites not in (1, 7, 19):
            raise ValueError("n_sites must be 1, 7 or 19")
        if self.ues_per_cell < 1 or self.n_subframes < 1:
            raise ValueError("need at least one UE per cell and one subframe")
        if not 1 <= self.n_subbands <= self.n_rb:
            raise ValueError("need 1 <= n_subbands <= n_rb")
        if self.n_rx not in (1, 2):
            raise ValueError("n_rx must be 1 or 2")
        if not 1 <= self.max_layers <= 4 or self.max_ues_per_group not in (1, 2):
            raise ValueError("at most 4 layers and 2 co-scheduled UEs")
        if self.harq_max_retx < 0 or self.harq_delay_ms < 1:
            raise ValueError("invalid HARQ parameters")
        if self.pf_window <= 1.0:
            raise ValueError("pf_window must exceed 1")
        if self.element_pattern not in ("isotropic", "parabolic"):
            raise ValueError("element_pattern must be 'isotropic' or 'parabolic'")
        if self.wraparound and self.n_sites != 19:
            raise ValueError("wraparound needs the 19-site layout")


_SCENARIO_KEYS = [f.name for f in fields(Scenario)]


@dataclass(frozen=True)
class SimConfig:
    array: ArrayConfig = field(default_factory=ArrayConfig)
    txru: TxruConfig = field(default_factory=TxruConfig)
    scenario: Scenario = field(default_factory=Scenario.defaults)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    sim: SimParams = field(default_factory=SimParams)

    def __post_init__(self):
        a, t = self.array, self.txru
        if self.array.carrier_freq != self.scenario.carrier_freq:
            raise ConfigError("array carrier_hz and scenario carrier_freq differ")
        if t.kind == "partitioned":
            if t.NH % a.polarization or a.m_vertical % t.NV or a.n_horizontal % (t.NH // a.polarization):
                raise ConfigError(f"TXRU grid {t.NV}x{t.NH} does not partition the "
                                  f"({a.m_vertical},{a.n_horizontal},{a.polarization}) array")
        if self.feedback.feedback_class == "A" and t.kind != "partitioned":
            raise ConfigError("class-A feedback needs the partitioned TXRU architecture")
        if self.feedback.feedback_class in ("B", "B2") and a.polarization != 2:
            raise ConfigError("beamformed schemes assume a dual-polarized array")

    @property
    def element(self) -> ElementPattern:
        return ElementPattern(kind=self.sim.element_pattern)

    @property
    def geometry_config(self) -> ArrayConfig:
        return replace(self.array, element=self.element)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        _check_keys(d, ["array", "txru", "scenario", "feedback", "traffic", "sim"], "config")
        try:
            arr = d.get("array")
            if arr is None:
                array = ArrayConfig()
            else:
                _check_keys(arr, ["M", "N", "P", "dv_lambda", "dh_lambda", "carrier_hz"], "array")
                array = ArrayConfig.from_dict({**ArrayConfig().to_dict(), **arr})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"array: {exc}") from exc
        txru = TxruConfig.from_dict(d.get("txru", {}))
        sc = dict(d.get("scenario", {}))
        _check_keys(sc, _SCENARIO_KEYS, "scenario")
        kind = sc.pop("kind", "UMa3D")
        for key in ("pl_los", "pl_nlos"):
            if key in sc:
                sc[key] = tuple(sc[key])
        sc.setdefault("carrier_freq", array.carrier_freq)
        try:
            scenario = Scenario.defaults(kind, **sc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario: {exc}") from exc
        feedback = _from_block(FeedbackConfig, d.get("feedback", {}), "feedback")
        traffic = _from_block(TrafficConfig, d.get("traffic", {}), "traffic")
        sim = _from_block(SimParams, d.get("sim", {}), "sim")
        return cls(array, txru, scenario, feedback, traffic, sim)

    def to_dict(self) -> dict:
        sc = asdict(self.scenario)
        return {
            "array": self.array.to_dict(),
            "txru": self.txru.to_dict(),
            "scenario": {k: (list(v) if isinstance(v, tuple) else v) for k, v in sc.items()},
            "feedback": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.feedback).items()},
            "traffic": asdict(self.traffic),
            "sim": asdict(self.sim),
        }


def load_config(path_or_dict) -> SimConfig:
    """Read a JSON file (or an already parsed dict) into a validated :class:`SimConfig`."""
    if isinstance(path_or_dict, dict):
        return SimConfig.from_dict(path_or_dict)
    with open(path_or_dict) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path_or_dict}: invalid JSON ({exc})") from exc
    return SimConfig.from_dict(d)


def config_hash(cfg: SimConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
