"""Batched small-matrix helpers used in the subframe loop."""

import numpy as np


def herm(a):
    return np.conj(np.swapaxes(a, -1, -2))


def mmse_sinr(a, r_tot, a_hat=None):
    """Per-layer SINR of an MMSE receiver.

    Parameters
    ----------
    a : (..., R, n) complex
        True effective channel of the layers of interest.
    r_tot : (..., R, R) complex
        Total received covariance (noise, all interference and the layers
        in ``a`` themselves).
    a_hat : (..., R, n) complex, optional
        Receiver's estimate of ``a``; the filter is ``r_tot^-1 a_hat``.
        Defaults to perfect knowledge.

    Returns
    -------
    (..., n) float
    """
    inv = np.linalg.inv(r_tot)
    if a_hat is None:
        x = np.real(np.einsum("...rn,...rq,...qn->...n", a.conj(), inv, a))
        x = np.clip(x, 0.0, 1.0 - 1e-15)
        return x / (1.0 - x)
    f = inv @ a_hat  # (..., R, n)
    sig = np.abs(np.einsum("...rn,...rn->...n", f.conj(), a)) ** 2
    tot = np.real(np.einsum("...rn,...rq,...qn->...n", f.conj(), r_tot, f))
    return sig / np.maximum(tot - sig, 1e-300)


def generalized_top(a, b, k_max):
    """Top generalized eigenvectors of Hermitian ``(a, b)`` with ``b`` positive definite.

    Returns ``x`` of shape ``(..., m, k_max)`` sorted by decreasing eigenvalue.
    """
    l = np.linalg.cholesky(b)
    li = np.linalg.inv(l)
    m = li @ a @ herm(li)
    m = 0.5 * (m + herm(m))
    _, y = np.linalg.eigh(m)
    y = y[..., ::-1][..., :k_max]
    return herm(li) @ y
