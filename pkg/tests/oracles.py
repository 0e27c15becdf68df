"""Slow, loop-based reference implementations used to check the library.

Nothing here imports the code under test except plain data containers.
"""

import cmath
import itertools
import math

import numpy as np


def ula_gain(n, spacing, weights, angle_deg):
    """Array factor of a ULA, element by element."""
    s = math.sin(math.radians(angle_deg))
    return sum(weights[k] * cmath.exp(-2j * math.pi * k * spacing * s) for k in range(n))


def brute_pmi(h, codewords):
    """Exhaustive argmax_i ||h^H w_i||^2, first index on exact ties (pure Python)."""
    h = np.atleast_2d(np.asarray(h, dtype=complex).T).T  # (n_ports, n_rx)
    best, best_val = None, -1.0
    for i, w in enumerate(codewords):
        val = 0.0
        for r in range(h.shape[1]):
            acc = 0j
            for p in range(len(w)):
                acc += h[p, r].conjugate() * w[p]
            val += abs(acc) ** 2
        if val > best_val * (1 + 1e-12) or best is None:
            best, best_val = i, val
    return best


def brute_co_phase(h1, h2, v):
    phases = [1, 1j, -1, -1j]
    a = sum(x.conjugate() * y for x, y in zip(h1, v))
    b = sum(x.conjugate() * y for x, y in zip(h2, v))
    vals = [abs(a + c * b) ** 2 for c in phases]
    return phases[int(np.argmax(vals))]


def pf_fixed_point_shares(rates, iters=20000, window=100.0):
    """Long-run share of slots for single-subband PF with stationary rates (plain loop)."""
    n = len(rates)
    avg = [1e-6] * n
    count = [0] * n
    a = 1.0 / window
    for _ in range(iters):
        metric = [rates[k] / avg[k] for k in range(n)]
        k = max(range(n), key=lambda i: (metric[i], -i))
        count[k] += 1
        for i in range(n):
            avg[i] = max((1 - a) * avg[i] + a * (rates[i] if i == k else 0.0), 1e-6)
    return [c / iters for c in count]


def zf_columns(h):
    """ZF via explicit H^H (H H^H)^-1 with equal-norm columns."""
    h = np.asarray(h, dtype=complex)
    w = h.conj().T @ np.linalg.inv(h @ h.conj().T)
    return w / np.linalg.norm(w, axis=0, keepdims=True) / math.sqrt(h.shape[0])


def exhaustive_kron(h, v_book, h_book):
    """Joint search over (iv, ih) pairs of a product codebook."""
    best, best_val = None, -1.0
    for iv, ih in itertools.product(range(len(v_book)), range(len(h_book))):
        w = np.kron(v_book[iv], h_book[ih])
        val = abs(np.vdot(h, w)) ** 2
        if val > best_val * (1 + 1e-12):
            best, best_val = (iv, ih), val
    return best
