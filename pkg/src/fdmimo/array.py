"""2D dual-polarized antenna arrays, steering vectors and beam patterns.

Conventions
-----------
* The array lies in the local y-z plane and faces +x.  Azimuth is measured
  from boresight towards +y, elevation from the horizontal plane, positive
  upwards.  Angles are degrees at the API boundary; internally everything is
  expressed with directional cosines ``u = cos(el) sin(az)`` (horizontal)
  and ``w = sin(el)`` (vertical).
* Elements are ordered polarization-major, then row (vertical index ``m``),
  then column (horizontal index ``n``)::

      e = p * (M * N) + m * N + n

  so a per-polarization weight is ``kron(vertical, horizontal)``.
* Steering entry ``k`` is ``exp(-j 2 pi k gamma phi)``; the downlink channel
  row towards a path is the conjugate of the steering vector, and a transmit
  weight ``v`` yields the gain ``conj(e_t) @ v``.
"""

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

__all__ = [
    "ArrayConfig", "ArrayGeometry", "ElementPattern", "SteeringVector",
    "build_array", "steering_vector", "direction_cosines", "array_response",
    "array_factor", "first_null", "upa_weight", "SPEED_OF_LIGHT",
]


@dataclass(frozen=True)
class ElementPattern:
    """Radiation pattern of a single element.

    ``kind="isotropic"`` gives 0 dBi everywhere.  ``kind="parabolic"`` is the
    usual 3GPP sector element: 12 (angle / hpbw)^2 attenuation per plane,
    clipped at the front-to-back ratio, plus ``max_gain_dbi``.
    """

    kind: str = "isotropic"
    hpbw_az_deg: float = 65.0
    hpbw_el_deg: float = 65.0
    front_to_back_db: float = 30.0
    side_lobe_el_db: float = 30.0
    max_gain_dbi: float = 8.0

    def __post_init__(self):
        if self.kind not in ("isotropic", "parabolic"):
            raise ValueError(f"unknown element pattern kind {self.kind!r}")

    def gain_db(self, az_deg, el_deg):
        az = np.asarray(az_deg, dtype=float)
        el = np.asarray(el_deg, dtype=float)
        if self.kind == "isotropic":
            return np.zeros(np.broadcast(az, el).shape)
        az = (az + 180.0) % 360.0 - 180.0
        a_h = -np.minimum(12.0 * (az / self.hpbw_az_deg) ** 2, self.front_to_back_db)
        a_v = -np.minimum(12.0 * (el / self.hpbw_el_deg) ** 2, self.side_lobe_el_db)
        return self.max_gain_dbi - np.minimum(-(a_h + a_v), self.front_to_back_db)


@dataclass(frozen=True)
class ArrayConfig:
    """(M, N, P) element grid.

    Parameters
    ----------
    m_vertical, n_horizontal : int
        Number of rows and columns.
    polarization : int
        1 for co-polarized, 2 for +/-45 degree dual-polarized elements.
    dv, dh : float
        Vertical and horizontal spacing in wavelengths.
    carrier_freq : float
        Carrier frequency in Hz.
    """

    m_vertical: int = 8
    n_horizontal: int = 4
    polarization: int = 2
    dv: float = 0.8
    dh: float = 0.5
    carrier_freq: float = 2.0e9
    element: ElementPattern = field(default_factory=ElementPattern)

    def __post_init__(self):
        if self.m_vertical < 1 or self.n_horizontal < 1:
            raise ValueError("M and N must be >= 1")
        if self.polarization not in (1, 2):
            raise ValueError("polarization degree P must be 1 or 2")
        if not (self.dv > 0 and self.dh > 0):
            raise ValueError("element spacing must be positive")
        if not self.carrier_freq > 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def n_elements(self) -> int:
        return self.m_vertical * self.n_horizontal * self.polarization

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayConfig":
        """Build from the ``{"M","N","P","dv_lambda","dh_lambda","carrier_hz"}`` block."""
        return cls(m_vertical=int(d["M"]), n_horizontal=int(d["N"]),
                   polarization=int(d["P"]), dv=float(d["dv_lambda"]),
                   dh=float(d["dh_lambda"]), carrier_freq=float(d["carrier_hz"]))

    def to_dict(self) -> dict:
        return {"M": self.m_vertical, "N": self.n_horizontal, "P": self.polarization,
                "dv_lambda": self.dv, "dh_lambda": self.dh, "carrier_hz": self.carrier_freq}


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Physical placement of every element of an :class:`ArrayConfig`."""

    config: ArrayConfig
    rows: np.ndarray
    cols: np.ndarray
    slants_deg: np.ndarray
    positions: np.ndarray  # (K, 3) metres

    @property
    def n_elements(self) -> int:
        return len(self.rows)

    @property
    def elements(self):
        """List of ``(row, col, slant_deg, position_m)`` tuples."""
        return [(int(r), int(c), float(s), p.copy())
                for r, c, s, p in zip(self.rows, self.cols, self.slants_deg, self.positions)]

    @property
    def bounding_box(self) -> tuple[float, float]:
        """(height, width) in metres."""
        cfg = self.config
        lam = cfg.wavelength
        return ((cfg.m_vertical - 1) * cfg.dv * lam, (cfg.n_horizontal - 1) * cfg.dh * lam)

    def polarization_mask(self, p: int) -> np.ndarray:
        """Boolean mask selecting the elements of polarization index ``p``."""
        return self.slants_deg == (45.0 if p == 0 else -45.0) if self.config.polarization == 2 \
            else np.ones(self.n_elements, dtype=bool)


def build_array(config: ArrayConfig) -> ArrayGeometry:
    """Lay the (M, N, P) elements on a regular grid.

    Dual-polarized elements share a position and carry +45 / -45 degree
    slants.  Positions are ``(0, n dh lambda, m dv lambda)``.
    """
    cfg = config
    if cfg.n_elements == 0:
        raise ValueError("array must contain at least one element")
    lam = cfg.wavelength
    p, m, n = np.meshgrid(np.arange(cfg.polarization), np.arange(cfg.m_vertical),
                          np.arange(cfg.n_horizontal), indexing="ij")
    p, m, n = p.ravel(), m.ravel(), n.ravel()
    if cfg.polarization == 2:
        slants = np.where(p == 0, 45.0, -45.0)
    else:
        slants = np.zeros(p.shape)
    pos = np.stack([np.zeros(m.shape), n * cfg.dh * lam, m * cfg.dv * lam], axis=1)
    return ArrayGeometry(cfg, m, n, slants, pos)


@dataclass(frozen=True, eq=False)
class SteeringVector:
    entries: np.ndarray
    gamma: float
    phi: float

    def __len__(self):
        return len(self.entries)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def steering_vector(phi: float, gamma: float, n: int) -> SteeringVector:
    """Uniform linear array signature ``exp(-j 2 pi k gamma phi)``, k = 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n)
    return SteeringVector(np.exp(-2j * np.pi * k * gamma * phi), float(gamma), float(phi))


def direction_cosines(az_deg, el_deg):
    """Horizontal and vertical directional cosines for (azimuth, elevation)."""
    az = np.deg2rad(np.asarray(az_deg, dtype=float))
    el = np.deg2rad(np.asarray(el_deg, dtype=float))
    return np.cos(el) * np.sin(az), np.sin(el)


def array_response(geometry: ArrayGeometry, az_deg, el_deg, single_pol=False) -> np.ndarray:
    """Steering entries of every element towards the given direction(s).

    Returns an array of shape ``broadcast(az, el).shape + (K,)`` where ``K``
    is the element count (or ``M*N`` with ``single_pol=True``).  No element
    pattern is applied.
    """
    cfg = geometry.config
    u, w = direction_cosines(az_deg, el_deg)
    u = np.asarray(u)[..., None]
    w = np.asarray(w)[..., None]
    rows, cols = geometry.rows, geometry.cols
    if single_pol:
        k = cfg.m_vertical * cfg.n_horizontal
        rows, cols = rows[:k], cols[:k]
    return np.exp(-2j * np.pi * (cols * cfg.dh * u + rows * cfg.dv * w))


def array_factor(geometry: ArrayGeometry, weights, direction) -> complex:
    """Coherent weighted sum of element responses towards ``(az_deg, el_deg)``.

    ``weights`` may cover all ``M*N*P`` elements or a single polarization
    (``M*N``).  The element pattern of the configuration is applied as an
    amplitude factor.  With uniform weights at broadside the magnitude is the
    number of driven elements; weights equal to the conjugate steering vector
    of a direction peak there.
    """
    w = np.asarray(weights, dtype=complex).ravel()
    n_el = geometry.n_elements
    n_single = geometry.config.m_vertical * geometry.config.n_horizontal
    if len(w) == n_el:
        single = False
    elif len(w) == n_single:
        single = True
    else:
        raise ValueError(f"weight length {len(w)} does not match {n_el} or {n_single} elements")
    az, el = direction
    a = array_response(geometry, az, el, single_pol=single)
    amp = 10.0 ** (geometry.config.element.gain_db(az, el) / 20.0)
    return complex(amp * (a @ w))


def first_null(n: int, spacing: float) -> float:
    """First null of a uniformly weighted ULA, in degrees off broadside.

    Raises
    ------
    ValueError
        If ``n * spacing < 1``: the pattern has no null in visible space.
        At exactly 1 the null sits at endfire (90 degrees).
    """
    aperture = n * spacing
    if aperture < 1.0:
        raise ValueError(f"no null in visible space for n*spacing = {aperture:g} < 1")
    return float(np.degrees(np.arcsin(1.0 / aperture)))


def upa_weight(m: int, n: int, dv: float, dh: float, az_deg: float, el_deg: float,
               normalize: bool = True) -> np.ndarray:
    """Single-polarization 3D beam weight ``kron(vertical, horizontal)``.

    The weight steers the main lobe of an ``m x n`` array to (az, el),
    i.e. it equals the steering vector of that direction (the matching
    channel row is its conjugate).
    """
    u, w = direction_cosines(az_deg, el_deg)
    v = steering_vector(float(w), dv, m).entries
    h = steering_vector(float(u), dh, n).entries
    out = np.kron(v, h)
    return out / np.sqrt(m * n) if normalize else out
