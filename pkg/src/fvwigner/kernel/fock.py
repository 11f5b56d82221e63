"""Oscillator Fock-basis matrix elements: displacement operator and Wigner kernels.

Conventions (oscillator of mass m and frequency omega_c, length a):

* ``beta = (Q/a + i a P/hbar)/sqrt(2)`` and ``D = exp(beta a^+ - beta^* a)``,
  equivalently ``D = exp(i (P q - Q p)/hbar)``.
* ``T[m, n](p, q)`` is the Wigner function of ``|m><n|``, so a state
  ``sum_n C_n |n>`` has ``W = sum_{m,n} C_m C_n^* T[m, n]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .grid import PhaseField, PhaseGrid, PhysicalScales
from .special import laguerre_table


@dataclass(frozen=True, eq=False)
class FockMatrix:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("FockMatrix must be square")
        if arr.shape[0] < 2:
            raise ValueError("truncation N must be >= 2")
        object.__setattr__(self, "entries", arr)

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def adjoint(self) -> "FockMatrix":
        return FockMatrix(self.entries.conj().T)

    def unitarity_defect(self, guard: int = 0) -> float:
        """``max|D^+ D - 1|`` on the leading ``N - guard`` block."""
        m = self.N - guard
        prod = self.entries.conj().T @ self.entries
        return float(np.max(np.abs(prod[:m, :m] - np.eye(m))))


def oscillator_coords(p, q, scales: PhysicalScales):
    """Dimensionless ``x = q/a`` and ``y = a p/hbar``."""
    return np.asarray(q) / scales.a, np.asarray(p) / scales.p_unit


def _check_n(N):
    if int(N) != N or N < 2:
        raise ValueError("truncation N must be an integer >= 2")


def displacement_elements(P: float, Q: float, N: int, scales: PhysicalScales) -> FockMatrix:
    """``<m|D(P, Q)|n>`` for ``m, n < N`` via the Laguerre closed form."""
    _check_n(N)
    x, y = oscillator_coords(P, Q, scales)
    beta = (x + 1j * y) / np.sqrt(2.0)
    s = abs(beta) ** 2
    out = np.zeros((N, N), complex)
    for k in range(N):
        lag = laguerre_table(N - k, k, s)
        n = np.arange(N - k)
        norm = np.exp(0.5 * (gammaln(n + 1) - gammaln(n + k + 1)) - 0.5 * s)
        lower = norm * beta**k * lag  # m = n + k >= n
        out[n + k, n] = lower
        if k:
            out[n, n + k] = norm * (-np.conj(beta)) ** k * lag
    return FockMatrix(out)


def _wigner_blocks(N: int, x, y):
    """Yield ``(k, n, T_{n+k, n} * pi*hbar)`` blocks on the sample points."""
    rho2 = x * x + y * y
    zbar = np.sqrt(2.0) * (x - 1j * y)
    gauss = np.exp(-rho2)
    for k in range(N):
        lag = laguerre_table(N - k, k, 2.0 * rho2)
        zk = zbar**k * gauss
        for n in range(N - k):
            coef = (-1.0) ** n * np.exp(0.5 * (gammaln(n + 1) - gammaln(n + k + 1)))
            yield k, n, coef * zk * lag[n]


def quasiprob_elements(p: float, q: float, N: int, scales: PhysicalScales) -> FockMatrix:
    """``T[m, n](p, q)`` for ``m, n < N`` at a single phase-space point."""
    _check_n(N)
    x, y = oscillator_coords(p, q, scales)
    out = np.zeros((N, N), complex)
    pref = 1.0 / (np.pi * scales.hbar)
    for k, n, val in _wigner_blocks(N, np.float64(x), np.float64(y)):
        out[n + k, n] = pref * val
        if k:
            out[n, n + k] = np.conj(pref * val)
    return FockMatrix(out)


def fock_to_wigner(rho: np.ndarray, grid: PhaseGrid, scales: PhysicalScales) -> PhaseField:
    """``sum_{m,n} rho[m, n] T[m, n]`` sampled on ``grid``.

    ``rho`` is any complex N x N coefficient matrix (for a pure state,
    ``rho[m, n] = C_m C_n^*``).
    """
    rho = np.asarray(rho, dtype=complex)
    N = rho.shape[0]
    P, Q = grid.mesh()
    x, y = oscillator_coords(P, Q, scales)
    x, y = np.broadcast_arrays(x, y)
    acc = np.zeros(grid.shape, complex)
    active = np.abs(rho) > 0
    for k, n, val in _wigner_blocks(N, x, y):
        lo = rho[n + k, n] if active[n + k, n] else 0.0
        hi = rho[n, n + k] if (k and active[n, n + k]) else 0.0
        if lo:
            acc += lo * val
        if hi:
            acc += hi * np.conj(val)
    return PhaseField(grid, acc / (np.pi * scales.hbar))


def fock_projection(field: PhaseField, N: int, scales: PhysicalScales,
                    diagonals: int | None = None) -> np.ndarray:
    """Fock matrix elements ``<m|A|n>`` of the operator with Weyl symbol ``field``.

    Uses the trace formula ``<m|A|n> = int A T[n, m] dp dq`` with
    the grid trapezoid rule.  Only ``|m - n| < diagonals`` is filled.
    """
    grid = field.grid
    A = field.to_direct().values
    P, Q = grid.mesh()
    x, y = oscillator_coords(P, Q, scales)
    x, y = np.broadcast_arrays(x, y)
    kmax = N if diagonals is None else min(N, diagonals)
    out = np.zeros((N, N), complex)
    weight = grid.cell / (np.pi * scales.hbar)
    rho2 = x * x + y * y
    zbar = np.sqrt(2.0) * (x - 1j * y)
    gauss = np.exp(-rho2)
    for k in range(kmax):
        lag = laguerre_table(N - k, k, 2.0 * rho2)
        zk = zbar**k * gauss
        for n in range(N - k):
            coef = (-1.0) ** n * np.exp(0.5 * (gammaln(n + 1) - gammaln(n + k + 1)))
            t = coef * zk * lag[n]  # pi*hbar*T[n+k, n]
            # <n+k|A|n> pairs with T[n, n+k] = conj(T[n+k, n])
            out[n + k, n] = weight * np.sum(A * np.conj(t))
            if k:
                out[n, n + k] = weight * np.sum(A * t)
    return out
