"""Simplified parametric 3D channel.

The model keeps the features that matter for elevation beamforming:

* LOS probability that falls with distance and rises with UE height,
* log-distance pathloss with a per-metre height gain,
* an elevation spread of departure that shrinks with distance and with UE
  height (while the UE is below the BS),
* a small number of clusters (12 by default), each a single plane wave with
  its own azimuth / elevation and per-subband Rayleigh gain, coupled across
  polarizations by a cross-polar ratio.

The coefficient for receive antenna ``r`` and element ``e`` on subband ``s``
is ``sum_k alpha[s, k, r, pol(e)] * g_k * conj(e_t(theta_k, phi_k))[e]``,
scaled by the square root of the large-scale gain.  Mean Frobenius energy
is ``N_T * N_R`` for unit large-scale gain and isotropic elements.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .array import ArrayGeometry, array_response

__all__ = [
    "Scenario", "UePosition", "ChannelRealization", "los_probability",
    "pathloss_db", "elevation_spread_deg", "generate_channel", "draw_link",
    "LinkParams", "cluster_steering", "polarization_weights", "write_channel_csv",
]


@dataclass(frozen=True)
class Scenario:
    """Deployment scenario and the constants of the propagation model.

    Only ``kind`` is needed; every other field has a per-kind default taken
    from :meth:`defaults`.
    """

    kind: str = "UMa3D"
    isd: float = 500.0
    bs_height: float = 25.0
    height_gain_db_per_m: float = 0.6
    carrier_freq: float = 2.0e9
    tx_power_dbm: float = 46.0
    noise_figure_db: float = 9.0
    bandwidth_hz: float = 10e6
    min_distance: float = 35.0
    indoor_fraction: float = 0.8
    n_floors: int = 8
    floor_height: float = 3.0
    indoor_loss_db: float = 0.0
    # LOS probability: min(d1/d, 1)(1 - exp(-d/d2)) + exp(-d/d2), raised to
    # the power 1 / (1 + los_height_slope * (h - 1.5)).
    los_d1: float = 18.0
    los_d2: float = 63.0
    los_height_slope: float = 0.05
    # Pathloss: a + b log10(d3d) + c log10(f_GHz)
    pl_los: tuple = (28.0, 22.0, 20.0)
    pl_nlos: tuple = (13.54, 39.08, 20.0)
    shadowing_los_db: float = 4.0
    shadowing_nlos_db: float = 6.0
    # ESD = esd_anchor_deg (d / esd_d0)^-esd_alpha * 10^(-esd_height_slope (h - 1.5))
    esd_anchor_deg: float = 8.0
    esd_d0: float = 50.0
    esd_alpha: float = 0.6
    esd_height_slope: float = 0.01
    esd_min_deg: float = 0.3
    esd_max_deg: float = 40.0
    asd_deg: float = 12.0
    k_factor_db: float = 9.0
    xpr_db: float = 8.0
    n_clusters: int = 12
    cluster_decay: float = 4.0

    def __post_init__(self):
        if self.kind not in ("UMa3D", "UMi3D"):
            raise ValueError(f"unknown scenario {self.kind!r}")
        if self.isd <= 0 or self.bs_height <= 0:
            raise ValueError("ISD and BS height must be positive")
        if self.n_clusters < 1:
            raise ValueError("need at least one cluster")

    @classmethod
    def defaults(cls, kind: str = "UMa3D", **overrides) -> "Scenario":
        if kind == "UMa3D":
            base = cls(kind="UMa3D")
        elif kind == "UMi3D":
            base = cls(kind="UMi3D", isd=200.0, bs_height=10.0, height_gain_db_per_m=0.3,
                       tx_power_dbm=41.0, min_distance=10.0, los_d2=36.0,
                       pl_los=(32.4, 21.0, 20.0), pl_nlos=(22.4, 35.3, 21.3),
                       shadowing_los_db=4.0, shadowing_nlos_db=7.82,
                       esd_anchor_deg=10.0, esd_d0=30.0, asd_deg=15.0)
        else:
            raise ValueError(f"unknown scenario {kind!r}")
        return replace(base, **overrides) if overrides else base

    @property
    def noise_power_dbm(self) -> float:
        return -174.0 + 10.0 * np.log10(self.bandwidth_hz) + self.noise_figure_db


@dataclass(frozen=True)
class UePosition:
    x: float
    y: float
    height: float = 1.5
    indoor: bool = False

    def __post_init__(self):
        if self.height < 1.5:
            raise ValueError("UE height must be >= 1.5 m")


def los_probability(scenario: Scenario, distance_2d, ue_height):
    """Probability of a line-of-sight link.

    Equals 1 at zero distance, decreases with distance and increases with UE
    height.  At ``h = 1.5`` m it is the classic
    ``min(d1/d, 1) (1 - exp(-d/d2)) + exp(-d/d2)``.
    """
    d = np.asarray(distance_2d, dtype=float)
    h = np.asarray(ue_height, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    if np.any(h < 1.5):
        raise ValueError("UE height must be >= 1.5 m")
    near = np.minimum(scenario.los_d1 / np.maximum(d, scenario.los_d1), 1.0)
    e = np.exp(-d / scenario.los_d2)
    base = near * (1.0 - e) + e
    expo = 1.0 / (1.0 + scenario.los_height_slope * (h - 1.5))
    out = base ** expo
    return float(out) if out.ndim == 0 else out


def pathloss_db(scenario: Scenario, distance_3d, ue_height, los):
    """Log-distance pathloss minus the height gain ``slope * (h - 1.5)``.

    NLOS pathloss is never below the LOS value at the same distance.
    """
    d = np.asarray(distance_3d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    f = scenario.carrier_freq / 1e9
    a, b, c = scenario.pl_los
    pl = a + b * np.log10(d) + c * np.log10(f)
    a, b, c = scenario.pl_nlos
    pl_n = np.maximum(pl, a + b * np.log10(d) + c * np.log10(f))
    pl = np.where(np.asarray(los, dtype=bool), pl, pl_n)
    pl = pl - scenario.height_gain_db_per_m * (np.asarray(ue_height, dtype=float) - 1.5)
    return float(pl) if pl.ndim == 0 else pl


def elevation_spread_deg(scenario: Scenario, distance_2d, ue_height):
    d = np.asarray(distance_2d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    # height only narrows the spread while the UE is below the BS
    dh = np.clip(np.asarray(ue_height, dtype=float), 1.5, max(scenario.bs_height, 1.5)) - 1.5
    esd = (scenario.esd_anchor_deg * (d / scenario.esd_d0) ** (-scenario.esd_alpha)
           * 10.0 ** (-scenario.esd_height_slope * dh))
    esd = np.clip(esd, scenario.esd_min_deg, scenario.esd_max_deg)
    return float(esd) if esd.ndim == 0 else esd


def polarization_weights(n_rx: int, n_pol: int, xpr_db: float) -> np.ndarray:
    """Mean power coupling ``(n_rx, n_pol)`` between receive antennas and
    transmit polarizations; each row averages to one."""
    if n_pol == 1:
        return np.ones((n_rx, 1))
    xpr = 10.0 ** (xpr_db / 10.0)
    co, cross = 2.0 * xpr / (1.0 + xpr), 2.0 / (1.0 + xpr)
    w = np.full((n_rx, 2), cross)
    for r in range(n_rx):
        w[r, r % 2] = co
    return w


@dataclass(frozen=True, eq=False)
class LinkParams:
    """Everything drawn for one BS-UE link, before synthesis."""

    los: bool
    gain: float  # linear large-scale power gain (pathloss, shadowing, element pattern excluded)
    az_deg: np.ndarray  # (K,) relative to array boresight
    el_deg: np.ndarray  # (K,)
    powers: np.ndarray  # (K,) sum to 1
    alpha: np.ndarray  # (S, K, n_rx, P)
    pathloss_db: float = 0.0
    shadowing_db: float = 0.0
    esd_deg: float = 0.0


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    params: LinkParams
    coefficients: np.ndarray  # (S, n_rx, N_T)
    e_r: complex = 1.0

    @property
    def los(self) -> bool:
        return self.params.los

    @property
    def clusters(self):
        """``(azimuth, elevation, gains[S, n_rx, P])`` per cluster."""
        p = self.params
        return [(float(p.az_deg[k]), float(p.el_deg[k]), p.alpha[:, k]) for k in range(len(p.az_deg))]

    @property
    def h(self) -> np.ndarray:
        """Coefficient matrix of the first subband, ``(n_rx, N_T)``."""
        return self.coefficients[0]


def _wrap_deg(a):
    return (np.asarray(a) + 180.0) % 360.0 - 180.0


def draw_link(scenario: Scenario, rng: np.random.Generator, distance_2d: float, ue_height: float,
              az_los_deg: float, n_subbands: int = 1, n_rx: int = 2, n_pol: int = 2,
              unit_gain: bool = False, esd_deg: float | None = None, indoor: bool = False,
              large_scale=None) -> LinkParams:
    """Draw LOS state, large-scale gain, cluster angles and per-subband gains.

    ``az_los_deg`` is the LOS azimuth relative to the array boresight.  With
    ``unit_gain=True`` the large-scale gain is fixed to 1 (no pathloss or
    shadowing); small-scale statistics are unchanged.  ``large_scale`` is an
    optional ``(uniform, normal)`` pair replacing the LOS and shadowing draws,
    so that co-sited sectors can share them.
    """
    sc = scenario
    d2 = max(float(distance_2d), 1e-3)
    d3 = float(np.hypot(d2, sc.bs_height - ue_height))
    el_los = float(np.degrees(np.arctan2(ue_height - sc.bs_height, d2)))
    # fixed draw order keeps streams aligned whatever the options
    u_los = rng.random()
    shadow_n = rng.standard_normal()
    if large_scale is not None:
        u_los, shadow_n = large_scale
    los = bool(u_los < los_probability(sc, d2, ue_height))
    K = sc.n_clusters
    az_off = rng.standard_normal(K)
    el_off = rng.standard_normal(K)
    pw_jitter = rng.standard_normal(K)
    alpha_n = rng.standard_normal((n_subbands, K, n_rx, n_pol, 2))
    los_phase = rng.random((n_subbands, n_rx, n_pol))

    pl = pathloss_db(sc, d3, ue_height, los)
    sh = shadow_n * (sc.shadowing_los_db if los else sc.shadowing_nlos_db)
    loss = pl + sh + (sc.indoor_loss_db if indoor else 0.0)
    gain = 1.0 if unit_gain else 10.0 ** (-loss / 10.0)

    esd = elevation_spread_deg(sc, d2, ue_height) if esd_deg is None else float(esd_deg)
    az = _wrap_deg(az_los_deg + sc.asd_deg * az_off)
    el = np.clip(el_los + esd * el_off, -90.0, 90.0)
    powers = np.exp(-np.arange(K) / sc.cluster_decay) * 10.0 ** (0.3 * pw_jitter)
    powers = powers / powers.sum()
    kf = 10.0 ** (sc.k_factor_db / 10.0)
    if los:
        az[0], el[0] = _wrap_deg(az_los_deg), el_los
        powers = powers / (kf + 1.0)
    pol_w = polarization_weights(n_rx, n_pol, sc.xpr_db)
    scale = np.sqrt(powers[None, :, None, None] * pol_w[None, None] / 2.0)
    alpha = scale * (alpha_n[..., 0] + 1j * alpha_n[..., 1])
    if los:
        spec = np.sqrt(kf / (kf + 1.0) * pol_w[None]) * np.exp(2j * np.pi * los_phase)
        alpha[:, 0] += spec
        powers = powers.copy()
        powers[0] += kf / (kf + 1.0)
    return LinkParams(los, float(gain), az, el, powers, alpha, float(pl), float(sh), float(esd))


def cluster_steering(geometry: ArrayGeometry, az_deg, el_deg) -> np.ndarray:
    """Per-cluster channel rows ``g_k * conj(e_t)`` over all elements, ``(K, N_T)``.

    Includes the element-pattern amplitude of the array configuration.
    """
    resp = array_response(geometry, az_deg, el_deg)
    amp = 10.0 ** (geometry.config.element.gain_db(az_deg, el_deg) / 20.0)
    return np.conj(resp) * np.asarray(amp)[..., None]


def synthesize(geometry: ArrayGeometry, params: LinkParams) -> np.ndarray:
    """Coefficient matrices ``(S, n_rx, N_T)`` for drawn link parameters."""
    steer = cluster_steering(geometry, params.az_deg, params.el_deg)  # (K, N_T)
    n_pol = params.alpha.shape[-1]
    cfg = geometry.config
    pol_of = np.arange(geometry.n_elements) // (cfg.m_vertical * cfg.n_horizontal)
    if n_pol == 1:
        pol_of = np.zeros_like(pol_of)
    a = params.alpha[..., pol_of]  # (S, K, R, N_T)
    h = np.einsum("skre,ke->sre", a, steer)
    return np.sqrt(params.gain) * h


def generate_channel(geometry: ArrayGeometry, scenario: Scenario, ue: UePosition,
                     rng: np.random.Generator, bs_xy=(0.0, 0.0), bearing_deg: float = 0.0,
                     n_subbands: int = 1, n_rx: int = 2, unit_gain: bool = False,
                     esd_deg: float | None = None) -> ChannelRealization:
    """Draw one BS-UE channel.

    Parameters
    ----------
    geometry : ArrayGeometry
        BS array; its element pattern is applied per cluster.
    scenario : Scenario
    ue : UePosition
        Absolute position; the BS sits at ``bs_xy`` facing ``bearing_deg``
        (degrees counter-clockwise from +x).
    rng : numpy.random.Generator
        Stream for this link, e.g. ``fdmimo.rng.stream(seed, "channel", cell, ue)``.
    n_subbands, n_rx : int
        Independent small-scale draws per subband; receive antennas.
    unit_gain : bool
        Skip pathloss and shadowing (large-scale gain 1).
    esd_deg : float, optional
        Override the elevation spread (e.g. 0 for a single elevation).
    """
    dx, dy = ue.x - bs_xy[0], ue.y - bs_xy[1]
    d2 = float(np.hypot(dx, dy))
    az = float(_wrap_deg(np.degrees(np.arctan2(dy, dx)) - bearing_deg))
    params = draw_link(scenario, rng, d2, ue.height, az, n_subbands=n_subbands, n_rx=n_rx,
                       n_pol=geometry.config.polarization, unit_gain=unit_gain,
                       esd_deg=esd_deg, indoor=ue.indoor)
    return ChannelRealization(params, synthesize(geometry, params))


def write_channel_csv(path, rows) -> None:
    """Dump channels as ``drop,cell,ue,subband,coefficients``.

    ``rows`` yields ``(drop, cell, ue, subband, matrix)``; the matrix is
    flattened row-major and written as ``re;im`` pairs separated by spaces.
    """
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["drop", "cell", "ue", "subband", "coefficients"])
        for drop, cell, ue, sb, mat in rows:
            flat = np.asarray(mat).ravel()
            w.writerow([drop, cell, ue, sb,
                        " ".join(f"{float(z.real)!r};{float(z.imag)!r}" for z in flat)])
