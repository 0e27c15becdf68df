"""Multi-user linear precoders, rank adaptation and the overhead-aware ZF capacity.

Channels are given as rows: user ``k`` contributes an ``(n_rx_k, N_T)``
matrix (or a length-``N_T`` vector), and a precoder is an ``(N_T, layers)``
matrix whose columns are applied as ``H @ W``.
"""

import numpy as np
import scipy.linalg

from .rng import stream

__all__ = [
    "zf_precoder", "slnr_precoder", "slnr_value", "rank_adapt",
    "rank_efficiencies", "effective_sum_capacity", "zf_sinr",
]


def zf_precoder(channel_rows, power: float = 1.0, return_kept: bool = False, rcond: float = 1e-10):
    """Zero-forcing precoder with an equal power split across users.

    Columns are ``pinv(H)`` columns scaled to norm ``sqrt(power / K)``.  If the
    rows are (numerically) linearly dependent, the user with the weakest
    channel is dropped and the inversion retried; dropped users get an
    all-zero column.

    Parameters
    ----------
    channel_rows : array_like, shape (K, N_T)
    power : float
        Total transmit power.
    return_kept : bool
        Also return the indices of the users that were served.
    """
    h = np.atleast_2d(np.asarray(channel_rows, dtype=complex))
    k_all = h.shape[0]
    kept = list(range(k_all))
    while kept:
        sub = h[kept]
        s = np.linalg.svd(sub, compute_uv=False)
        if len(kept) <= h.shape[1] and s[-1] > rcond * s[0]:
            break
        weakest = kept[int(np.argmin(np.linalg.norm(sub, axis=1)))]
        kept.remove(weakest)
    w = np.zeros((h.shape[1], k_all), dtype=complex)
    if kept:
        p = np.linalg.pinv(h[kept])
        p = p / np.linalg.norm(p, axis=0, keepdims=True)
        w[:, kept] = p * np.sqrt(power / len(kept))
    return (w, kept) if return_kept else w


def _as_blocks(channels):
    return [np.atleast_2d(np.asarray(c, dtype=complex)) for c in channels]


def slnr_precoder(channels, noise_power: float, power: float = 1.0, ranks=None) -> np.ndarray:
    """Signal-to-leakage-plus-noise maximizing precoder.

    User ``k`` gets the ``r_k`` dominant generalized eigenvectors of
    ``(H_k^H H_k, noise_power I + sum_{j != k} H_j^H H_j)``.  Every layer is
    unit-norm before the equal split of ``power``.

    Returns
    -------
    numpy.ndarray
        ``(N_T, sum(ranks))``, user blocks in input order.
    """
    blocks = _as_blocks(channels)
    if noise_power <= 0:
        raise ValueError("noise power must be positive")
    n_t = blocks[0].shape[1]
    ranks = [1] * len(blocks) if ranks is None else list(ranks)
    gram = [b.conj().T @ b for b in blocks]
    total = sum(gram)
    cols = []
    for k, (g, r) in enumerate(zip(gram, ranks)):
        leak = noise_power * np.eye(n_t) + (total - g)
        _, vec = scipy.linalg.eigh(g, leak)
        w = vec[:, ::-1][:, :r]
        cols.append(w / np.linalg.norm(w, axis=0, keepdims=True))
    w = np.concatenate(cols, axis=1)
    return w * np.sqrt(power / w.shape[1])


def slnr_value(channels, w_k, k: int, noise_power: float) -> float:
    """SLNR achieved by weight ``w_k`` (vector) for user ``k``."""
    blocks = _as_blocks(channels)
    w = np.asarray(w_k, dtype=complex).ravel()
    sig = np.sum(np.abs(blocks[k] @ w) ** 2)
    leak = sum(np.sum(np.abs(b @ w) ** 2) for j, b in enumerate(blocks) if j != k)
    return float(sig / (noise_power * np.vdot(w, w).real + leak))


def rank_efficiencies(h, snr: float, se_cap: float = 6.0) -> dict:
    """Estimated SU efficiency per rank with eigen-beamforming and equal power.

    ``h`` is ``(n_rx, N_T)``; ``snr`` is linear transmit SNR.
    """
    s = np.linalg.svd(np.atleast_2d(h), compute_uv=False)
    out = {}
    for r in range(1, min(2, len(s)) + 1):
        out[r] = float(np.sum(np.minimum(np.log2(1.0 + snr / r * s[:r] ** 2), se_cap)))
    return out


def rank_adapt(eff_by_rank, n_rx: int = 2) -> int:
    """Rank in {1, 2} with the larger estimated sum efficiency.

    ``eff_by_rank`` maps rank to the efficiency summed over layers (e.g. from
    CQI).  Rank 2 must be strictly better; a single receive antenna forces
    rank 1.
    """
    if n_rx < 2 or 2 not in eff_by_rank:
        return 1
    return 2 if eff_by_rank[2] > eff_by_rank[1] else 1


def zf_sinr(h, snr: float) -> np.ndarray:
    """Per-user ZF SINR for i.i.d. rows ``h`` of shape ``(..., K, N_T)``.

    Unit-norm ZF columns, power ``snr / K`` each, unit noise:
    ``SINR_k = (snr / K) / [(H H^H)^-1]_kk``.
    """
    k = h.shape[-2]
    g = h @ np.conj(np.swapaxes(h, -1, -2))
    inv_diag = np.real(np.diagonal(np.linalg.inv(g), axis1=-2, axis2=-1))
    return (snr / k) / inv_diag


def effective_sum_capacity(n_t: int, n_users: int = 10, snr_db: float = 10.0,
                           pilot_overhead_fraction: float = 0.0, n_draws: int = 2000,
                           seed: int = 0) -> float:
    """Monte Carlo ``(1 - overhead) * E[sum_k log2(1 + SINR_k)]`` under ZF.

    Channels are i.i.d. CN(0, 1).  When ``n_users > n_t`` the weakest users
    of each draw are dropped until ``n_t`` remain (the ZF rank policy).  The
    same seed gives the same channel draws for every overhead value.
    """
    if not 0.0 <= pilot_overhead_fraction < 1.0:
        raise ValueError("overhead must lie in [0, 1)")
    if n_t < 1 or n_users < 1:
        raise ValueError("n_t and n_users must be >= 1")
    rng = stream(seed, "capacity", n_t, n_users)
    h = (rng.standard_normal((n_draws, n_users, n_t)) + 1j * rng.standard_normal((n_draws, n_users, n_t))) / np.sqrt(2)
    if n_users > n_t:
        norms = np.linalg.norm(h, axis=2)
        keep = np.sort(np.argsort(-norms, axis=1, kind="stable")[:, :n_t], axis=1)
        h = np.take_along_axis(h, keep[:, :, None], axis=1)
    snr = 10.0 ** (snr_db / 10.0)
    rate = np.sum(np.log2(1.0 + zf_sinr(h, snr)), axis=1)
    return float((1.0 - pilot_overhead_fraction) * rate.mean())
