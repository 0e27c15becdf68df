"""TXRU virtualization and the data / CSI-RS precoder chain.

The downlink data precoder factors as ``W_data = W_T @ W_rs`` with
``W_rs = W_P @ W_U``: ``W_T`` (N_T x L) maps TXRUs to elements, ``W_P``
(L x N_P) maps CSI-RS ports to TXRUs and ``W_U`` (N_P x r) maps layers to
ports.

TXRU (port) ordering for the partitioned architecture is vertical-major,
then polarization, then horizontal column, so that a composite codeword
``kron(w_vertical, w_horizontal)`` with a dual-polarized horizontal part
``[b; c b]`` lines up with the ports directly.
"""

from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, direction_cosines, steering_vector

__all__ = [
    "TxruGrid", "TxruArchitecture", "PrecoderStack", "build_partitioned",
    "build_connected", "compose_precoder", "normalize_power", "tilt_weight",
]


@dataclass(frozen=True)
class TxruGrid:
    """Number of TXRUs (CSI-RS ports) along the vertical and horizontal axes.

    ``n_h`` counts horizontal ports *including* polarization, as in the usual
    ``N_V x N_H = 2 x 8`` notation for a (8, 4, 2) array, so ``L = n_v * n_h``.
    """

    n_v: int
    n_h: int

    def __post_init__(self):
        if self.n_v < 1 or self.n_h < 1:
            raise ValueError("TXRU grid dimensions must be >= 1")

    @property
    def l_txru(self) -> int:
        return self.n_v * self.n_h


@dataclass(frozen=True, eq=False)
class TxruArchitecture:
    kind: str  # "partitioned" | "connected"
    l_txru: int
    w_t: np.ndarray
    nc: int
    l_prime: int = 1
    grid: TxruGrid | None = None

    @property
    def n_t(self) -> int:
        return self.w_t.shape[0]

    def port_channel(self, h: np.ndarray) -> np.ndarray:
        """Channel seen on the TXRU ports, ``h @ W_T``."""
        return np.asarray(h) @ self.w_t


def tilt_weight(n: int, spacing: float, tilt_deg: float) -> np.ndarray:
    """Unit-modulus vertical weight steering ``n`` elements to ``tilt_deg`` below horizon."""
    _, w = direction_cosines(0.0, -tilt_deg)
    return steering_vector(float(w), spacing, n).entries


def build_partitioned(geometry: ArrayGeometry, grid: TxruGrid, subarray_weight=None) -> TxruArchitecture:
    """Array-partitioning architecture: each TXRU drives a disjoint sub-array.

    Parameters
    ----------
    geometry : ArrayGeometry
    grid : TxruGrid
        ``n_v`` must divide M and ``n_h / P`` must divide N.
    subarray_weight : array_like, optional
        Identical weight ``v`` applied inside every sub-array, ordered
        ``kron(vertical, horizontal)`` over the sub-array's rows and columns.
        Defaults to all-ones (broadside).

    Returns
    -------
    TxruArchitecture
        With ``W_T`` of shape ``(N_T, L)`` and ``W_P = I`` implied.
    """
    cfg = geometry.config
    P = cfg.polarization
    if grid.n_h % P:
        raise ValueError(f"n_h={grid.n_h} must be a multiple of the polarization degree {P}")
    n_hp = grid.n_h // P
    if cfg.m_vertical % grid.n_v or cfg.n_horizontal % n_hp:
        raise ValueError(f"({cfg.m_vertical}x{cfg.n_horizontal}) array cannot be partitioned "
                         f"into a {grid.n_v}x{n_hp} grid per polarization")
    rows_per = cfg.m_vertical // grid.n_v
    cols_per = cfg.n_horizontal // n_hp
    nc = rows_per * cols_per
    if subarray_weight is None:
        v = np.ones(nc, dtype=complex)
    else:
        v = np.asarray(subarray_weight, dtype=complex).ravel()
        if len(v) != nc:
            raise ValueError(f"sub-array weight needs {nc} entries, got {len(v)}")

    L = grid.l_txru
    w_t = np.zeros((geometry.n_elements, L), dtype=complex)
    for e in range(geometry.n_elements):
        m, n = geometry.rows[e], geometry.cols[e]
        p = e // (cfg.m_vertical * cfg.n_horizontal)
        iv, ih = m // rows_per, n // cols_per
        port = iv * grid.n_h + p * n_hp + ih
        local = (m % rows_per) * cols_per + (n % cols_per)
        w_t[e, port] = v[local]
    return TxruArchitecture("partitioned", L, w_t, nc, 1, grid)


def build_connected(geometry: ArrayGeometry, l_txru: int, l_prime: int,
                    beam_directions) -> TxruArchitecture:
    """Array-connected architecture carrying one beamformed CSI-RS per TXRU.

    Elements are split into ``L / L'`` equal groups (contiguous in element
    order, so polarizations are never mixed when the group fits in one
    polarization).  TXRU ``j`` drives group ``j // L'`` with the steering
    weight of ``beam_directions[j]``; every element is therefore fed by
    exactly ``L'`` TXRUs and each TXRU by ``N_c = N_T L' / L`` elements.

    Weights are unit-modulus (not normalized); see :func:`normalize_power`.
    """
    if l_prime < 1 or l_txru < 1:
        raise ValueError("L and L' must be >= 1")
    if l_prime > l_txru:
        raise ValueError(f"L'={l_prime} cannot exceed L={l_txru}")
    if l_txru % l_prime:
        raise ValueError("L must be a multiple of L'")
    beam_directions = list(beam_directions)
    if len(beam_directions) != l_txru:
        raise ValueError(f"need {l_txru} beam directions, got {len(beam_directions)}")
    n_t = geometry.n_elements
    n_groups = l_txru // l_prime
    if n_t % n_groups:
        raise ValueError(f"{n_t} elements cannot be split into {n_groups} groups")
    nc = n_t // n_groups
    cfg = geometry.config
    w_t = np.zeros((n_t, l_txru), dtype=complex)
    for j, (az, el) in enumerate(beam_directions):
        g = j // l_prime
        idx = np.arange(g * nc, (g + 1) * nc)
        u, w = direction_cosines(az, el)
        r0, c0 = geometry.rows[idx[0]], geometry.cols[idx[0]]
        phase = (geometry.cols[idx] - c0) * cfg.dh * u + (geometry.rows[idx] - r0) * cfg.dv * w
        w_t[idx, j] = np.exp(-2j * np.pi * phase)
    return TxruArchitecture("connected", l_txru, w_t, nc, l_prime, None)


@dataclass(frozen=True, eq=False)
class PrecoderStack:
    w_t: np.ndarray
    w_p: np.ndarray
    w_u: np.ndarray

    def __post_init__(self):
        w_t, w_p, w_u = (np.atleast_2d(np.asarray(a, dtype=complex)) for a in (self.w_t, self.w_p, self.w_u))
        if w_t.shape[1] != w_p.shape[0] or w_p.shape[1] != w_u.shape[0]:
            raise ValueError(f"non-conformable chain {w_t.shape} x {w_p.shape} x {w_u.shape}")
        norms = np.linalg.norm(w_u, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("columns of W_U must be unit-norm")
        object.__setattr__(self, "w_t", w_t)
        object.__setattr__(self, "w_p", w_p)
        object.__setattr__(self, "w_u", w_u)

    @property
    def rank(self) -> int:
        return self.w_u.shape[1]

    @property
    def n_ports(self) -> int:
        return self.w_p.shape[1]

    @property
    def w_rs(self) -> np.ndarray:
        return self.w_p @ self.w_u


def compose_precoder(stack: PrecoderStack) -> np.ndarray:
    """``W_data = W_T @ (W_P @ W_U)``, shape ``(N_T, r)``."""
    return stack.w_t @ stack.w_rs


def normalize_power(w: np.ndarray, total_power: float = 1.0, per_pa_limit: float | None = None) -> np.ndarray:
    """Scale a precoder to ``total_power`` (Frobenius norm squared).

    If ``per_pa_limit`` is given and some antenna row would exceed it, the
    whole matrix is scaled down uniformly so the hottest PA sits at the limit.
    """
    w = np.asarray(w, dtype=complex)
    fro2 = float(np.sum(np.abs(w) ** 2))
    if fro2 == 0.0:
        raise ValueError("cannot normalize an all-zero precoder")
    out = w * np.sqrt(total_power / fro2)
    if per_pa_limit is not None:
        peak = float(np.max(np.sum(np.abs(out.reshape(out.shape[0], -1)) ** 2, axis=1)))
        if peak > per_pa_limit:
            out = out * np.sqrt(per_pa_limit / peak)
    return out
