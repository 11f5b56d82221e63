"""Associated Laguerre polynomials and oscillator eigenfunctions by recurrence."""
from __future__ import annotations

import numpy as np


def laguerre(n: int, alpha: int, x):
    """Associated Laguerre polynomial ``L_n^alpha(x)`` by forward recurrence.

    ``alpha`` may be negative as long as ``alpha >= -n``.
    """
    n = int(n)
    alpha = int(alpha)
    if n < 0:
        raise ValueError("n must be >= 0")
    if alpha < -n:
        raise ValueError("alpha must be >= -n")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if np.ndim(cur) else float(cur)


def laguerre_table(nmax: int, alpha: int, x) -> np.ndarray:
    """All ``L_k^alpha(x)`` for ``k = 0..nmax-1`` stacked on a leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax,) + x.shape)
    if nmax == 0:
        return out
    out[0] = 1.0
    if nmax > 1:
        out[1] = 1.0 + alpha - x
    for k in range(1, nmax - 1):
        out[k + 1] = ((2 * k + 1 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def hermite_functions(nmax: int, x) -> np.ndarray:
    """Normalised oscillator eigenfunctions ``psi_n(x)``, ``n < nmax``, unit length.

    Uses the three-term recurrence on the normalised functions, which stays
    bounded for large ``n``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, nmax - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out
