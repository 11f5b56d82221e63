"""Independent reference computations.

Nothing here calls the routines it checks: oscillator eigenfunctions come from
``numpy.polynomial.hermite`` with Gauss-Hermite quadrature, the star product is
the Fourier-space twisted convolution, and dynamics use dense matrix
exponentials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite as H
from scipy.integrate import quad
from scipy.linalg import expm, sqrtm
from scipy.special import gammaln

from .kernel.grid import PhaseField, PhysicalScales

MAX_QUAD_LEVEL = 60
MAX_TWISTED_N = 64


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Truncated operator in the oscillator Fock basis."""

    entries: np.ndarray
    basis: str = "fock"

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("DenseOperator must be square")
        object.__setattr__(self, "entries", arr)

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def expectation(self, c: np.ndarray) -> complex:
        c = np.asarray(c, dtype=complex)
        return complex(c.conj() @ self.entries[: len(c), : len(c)] @ c)


def lowering(N: int) -> DenseOperator:
    return DenseOperator(np.diag(np.sqrt(np.arange(1, N)), 1))


def dense_radius2(N: int, scales: PhysicalScales) -> DenseOperator:
    """``R^2 = a^2 (x^2 + y^2)`` built from ladder matrices of size ``2N`` and cropped."""
    a = lowering(2 * N).entries
    ad = a.conj().T
    x = (a + ad) / np.sqrt(2.0)
    y = (a - ad) / (1j * np.sqrt(2.0))
    full = scales.a2 * (x @ x + y @ y)
    return DenseOperator(full[:N, :N])


def dense_sqrt_spectrum(b: float, N: int) -> np.ndarray:
    """Eigenvalues of the matrix square root of ``1 + b (x^2 + y^2)``, ascending."""
    a = lowering(2 * N).entries
    ad = a.conj().T
    x = (a + ad) / np.sqrt(2.0)
    y = (a - ad) / (1j * np.sqrt(2.0))
    A = (np.eye(2 * N) + b * (x @ x + y @ y))[:N, :N]
    root = sqrtm(A)
    return np.sort(np.linalg.eigvalsh(0.5 * (root + root.conj().T)))


# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature of oscillator eigenfunctions

def _poly_part(n: int, x) -> np.ndarray:
    """``H_n(x) / sqrt(2^n n! sqrt(pi))``; the Gaussian factor is left out."""
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    lognorm = -0.5 * (n * math.log(2.0) + gammaln(n + 1) + 0.5 * math.log(math.pi))
    return H.hermval(x, coef) * math.exp(lognorm)


def _quad_order(m: int, n: int, extra: float) -> int:
    return int(4 * max(m, n) + 20 + math.ceil(extra))


def _converged(func, order: int, what: str):
    a = func(order)
    b = func(order + 40)
    scale = max(1.0, float(np.max(np.abs(b))))
    if np.max(np.abs(a - b)) > 1e-11 * scale:
        raise QuadratureError(f"{what}: Gauss-Hermite orders {order} and {order + 40} differ "
                              f"by {np.max(np.abs(a - b)):.2e}")
    return b


def quad_displacement(m: int, n: int, P: float, Q: float, scales: PhysicalScales) -> complex:
    """``<m| exp(i (P q - Q p)/hbar) |n>`` by quadrature of the displaced eigenfunction."""
    for k in (m, n):
        if int(k) != k or not 0 <= k <= MAX_QUAD_LEVEL:
            raise ValueError(f"levels must lie in [0, {MAX_QUAD_LEVEL}]")
    X = Q / scales.a
    Y = P * scales.a / scales.hbar

    def integral(order):
        u, w = H.hermgauss(order)
        # x = u + X/2 and the Gaussians combine to exp(-u^2 - X^2/4)
        g = _poly_part(m, u + X / 2) * _poly_part(n, u - X / 2) * np.exp(1j * Y * (u + X / 2))
        return np.sum(w * g) * np.exp(-X * X / 4.0 - 0.5j * X * Y)

    return complex(_converged(integral, _quad_order(m, n, 2.0 * Y * Y + X * X),
                              "quad_displacement"))


def quad_quasiprob(m: int, n: int, p, q, scales: PhysicalScales) -> np.ndarray:
    """Wigner function of ``|m><n|`` at the points ``(p, q)`` by quadrature."""
    for k in (m, n):
        if int(k) != k or not 0 <= k <= MAX_QUAD_LEVEL:
            raise ValueError(f"levels must lie in [0, {MAX_QUAD_LEVEL}]")
    x = np.asarray(q, dtype=float) / scales.a
    y = np.asarray(p, dtype=float) * scales.a / scales.hbar
    x, y = np.broadcast_arrays(x, y)

    def integral(order):
        u, w = H.hermgauss(order)
        U = u.reshape((-1,) + (1,) * x.ndim)
        g = _poly_part(m, x + U) * _poly_part(n, x - U) * np.exp(-2j * y * U)
        return np.tensordot(w, g, axes=(0, 0)) * np.exp(-x * x) / (np.pi * scales.hbar)

    extra = 4.0 * float(np.max(y * y, initial=0.0)) + float(np.max(x * x, initial=0.0))
    return _converged(integral, _quad_order(m, n, extra), "quad_quasiprob")


def quad_wigner(C: np.ndarray, p, q, scales: PhysicalScales, order: int | None = None):
    """Wigner function of ``sum_n C_n |n>`` by direct quadrature of the position amplitude."""
    C = np.asarray(C, dtype=complex)
    x = np.asarray(q, dtype=float) / scales.a
    y = np.asarray(p, dtype=float) * scales.a / scales.hbar
    x, y = np.broadcast_arrays(x, y)
    extra = 4.0 * float(np.max(y * y, initial=0.0)) + float(np.max(x * x, initial=0.0))
    base = order or _quad_order(len(C), len(C), extra)

    def amplitude(z):
        return sum(c * _poly_part(k, z) for k, c in enumerate(C) if c != 0)

    def integral(order_):
        u, w = H.hermgauss(order_)
        U = u.reshape((-1,) + (1,) * x.ndim)
        g = amplitude(x + U) * np.conj(amplitude(x - U)) * np.exp(-2j * y * U)
        return np.tensordot(w, g, axes=(0, 0)) * np.exp(-x * x) / (np.pi * scales.hbar)

    return _converged(integral, base, "quad_wigner")


# ---------------------------------------------------------------------------
# dynamics

def dense_evolution(C_plus, C_minus, energies, t: float, hbar: float = 1.0):
    """``exp(-i tau_3 diag(E) t/hbar)`` applied to the stacked charge components."""
    E = np.asarray(energies, dtype=float)
    N = len(np.asarray(C_plus))
    Hm = np.diag(np.concatenate([E[:N], -E[:N]])).astype(complex)
    U = expm(-1j * Hm * t / hbar)
    v = U @ np.concatenate([np.asarray(C_plus, complex), np.asarray(C_minus, complex)])
    return v[:N], v[N:]


def wavefunction_evolution_free(psi_plus, psi_minus, p, t: float, scales: PhysicalScales):
    """``psi_a(p, t) = exp(-i a E(p) t/hbar) psi_a(p)``."""
    p = np.asarray(p, dtype=float)
    E = np.sqrt((scales.mass * scales.c**2) ** 2 + (p * scales.c) ** 2)
    ph = np.exp(-1j * E * t / scales.hbar)
    return np.asarray(psi_plus) * ph, np.asarray(psi_minus) * ph.conj()


def packet_q2(p0: float, sigma_p: float, q0: float, t: float, scales: PhysicalScales, *,
              relativistic: bool = True) -> float:
    """``<q^2>`` of the even component of a unit Gaussian packet, from the wavefunction.

    With ``psi = g(p) exp(-i (p q0 + E(p) t)/hbar)`` the even-component moment is
    ``int hbar^2 |psi'|^2 - (hbar^2/4) |psi|^2 (E'/E)^2 dp``; the second term
    comes from the curvature of ``eps`` across the pair and is absent in the
    non-relativistic (standard Wigner) value.
    """
    hbar, m, c = scales.hbar, scales.mass, scales.c

    def integrand(p):
        g2 = np.exp(-((p - p0) ** 2) / (2 * sigma_p**2)) / np.sqrt(2 * np.pi * sigma_p**2)
        dlog = -(p - p0) / (2 * sigma_p**2)  # g'/g
        if relativistic:
            E = math.hypot(m * c * c, p * c)
            dE = p * c * c / E
        else:
            dE = p / m
        val = hbar**2 * dlog**2 + (q0 + dE * t) ** 2
        if relativistic:
            val -= 0.25 * hbar**2 * (dE / E) ** 2
        return g2 * val

    w = 12.0 * sigma_p
    val, err = quad(integrand, p0 - w, p0 + w, epsabs=1e-14, epsrel=1e-13, limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# star product as a twisted convolution

def star_product_integral(A: PhaseField, B: PhaseField, scales: PhysicalScales) -> PhaseField:
    """``A * B`` from the Fourier integral representation.

    With ``A(z) = sum a(k) exp(i k z)`` the product is
    ``sum_{k,l} a(k) b(l) exp(-i hbar/2 (k_q l_p - k_p l_q)) exp(i (k + l) z)``;
    wave vectors outside the sampled band are dropped.
    """
    grid = A.grid
    if B.grid != grid:
        raise ValueError("operands live on different grids")
    if max(grid.n_p, grid.n_q) > MAX_TWISTED_N:
        raise ValueError(f"twisted convolution limited to n <= {MAX_TWISTED_N} per axis "
                         f"(cost grows as n^4)")
    n_p, n_q = grid.shape
    norm = n_p * n_q
    Ah = np.fft.fft2(np.fft.ifftshift(A.to_direct().values)) / norm
    Bh = np.fft.fft2(np.fft.ifftshift(B.to_direct().values)) / norm
    ip = np.round(np.fft.fftfreq(n_p, 1.0 / n_p)).astype(int)
    iq = np.round(np.fft.fftfreq(n_q, 1.0 / n_q)).astype(int)
    kp0 = 2.0 * np.pi / (n_p * grid.dp)
    kq0 = 2.0 * np.pi / (n_q * grid.dq)
    MP = ip[:, None]
    MQ = iq[None, :]
    out = np.zeros((n_p, n_q), complex)
    for ap in range(n_p):
        kp = ip[ap]
        for aq in range(n_q):
            a = Ah[ap, aq]
            if a == 0:
                continue
            kq = iq[aq]
            lp = MP - kp
            lq = MQ - kq
            valid = (lp >= -(n_p // 2)) & (lp < n_p // 2) & (lq >= -(n_q // 2)) & (lq < n_q // 2)
            b = Bh[lp % n_p, lq % n_q]
            phase = np.exp(-0.5j * scales.hbar * (kq * kq0 * MP * kp0 - kp * kp0 * MQ * kq0))
            out += a * np.where(valid, b, 0.0) * phase
    return PhaseField(grid, np.fft.fftshift(np.fft.ifft2(out * norm)))


def gaussian_star_gaussian(alpha: float, beta: float, p, q, hbar: float = 1.0):
    """Closed form of ``exp(-alpha s) * exp(-beta s)`` with ``s = (p^2 + q^2)/hbar``."""
    s = (np.asarray(p) ** 2 + np.asarray(q) ** 2) / hbar
    return np.exp(-(alpha + beta) / (1.0 + alpha * beta) * s) / (1.0 + alpha * beta)
