"""Groenewold-Moyal star product on phase-space grids.

Three symbol types meet here:

* :class:`PhaseField` -- sampled, decayed symbols.  Their product goes through
  the exact discrete Weyl correspondence: each symbol is mapped to its
  position-space operator kernel (FFT along p, then a Fourier shear along q),
  the kernels are multiplied as matrices and the result is mapped back.  This
  needs a commensurate grid, ``dp*dq = 2 pi hbar/n``.
* :class:`PolySymbol` -- polynomials in (p, q).  The bidifferential series
  terminates, so products with other polynomials are exact and products with
  fields use spectral derivatives of the field.
* :class:`FockDiagonalSymbol` -- symbols of operators ``sum_n f_n |n><n|``.
  Grid values come from the forward-difference (Newton) expansion in
  Laguerre polynomials; products with fields use the rank-N kernel built from
  oscillator eigenfunctions, which is exact where the grid values are not.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import gammaln

from .fock import fock_projection, oscillator_coords
from .grid import (DIRECT, BoundaryDecayWarning, GridMismatchError, PhaseField,
                   PhaseGrid, PhysicalScales, check_decay)
from .special import hermite_functions, laguerre_table


class ConvergenceError(RuntimeError):
    """An expansion did not reach the requested tolerance."""

    def __init__(self, message: str, tail: float):
        super().__init__(message)
        self.tail = tail


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# discrete Weyl correspondence

def _require_commensurate(grid: PhaseGrid, scales: PhysicalScales):
    if not grid.is_commensurate(scales.hbar):
        raise GridMismatchError(
            "kernel star product needs a square grid with dp*dq = 2*pi*hbar/n "
            f"(got n_p={grid.n_p}, n_q={grid.n_q}, dp*dq={grid.cell:.6g}, "
            f"target={2 * np.pi * scales.hbar / grid.n_q:.6g}); use commensurate_grid()"
        )


def _shear(arr: np.ndarray, grid: PhaseGrid, sign: float) -> np.ndarray:
    """Row ``k`` of ``arr`` (a function of q) is shifted by ``sign*sigma_k/2``."""
    n = grid.n_q
    sigma = (np.arange(n) - n // 2) * grid.dq
    kappa = 2.0 * np.pi * np.fft.fftfreq(n, grid.dq)
    # arr[k] -> arr[k](q - sign*sigma_k/2)
    phase = np.exp(-1j * np.outer(sign * sigma / 2.0, kappa))
    return np.fft.ifft(np.fft.fft(arr, axis=1) * phase, axis=1)


def _pair_index(n: int):
    i = np.arange(n)[:, None]
    l = np.arange(n)[None, :]
    return (i - l + n // 2) % n, np.broadcast_to(i, (n, n))


def symbol_to_kernel(A: PhaseField, scales: PhysicalScales) -> np.ndarray:
    """Position kernel ``K[i, l] = <q_i|A|q_l>`` of the Weyl symbol ``A``."""
    grid = A.grid
    _require_commensurate(grid, scales)
    vals = A.to_direct().values
    sig = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(vals, axes=0), axis=0), axes=0)
    sig /= grid.dq
    R = _shear(sig, grid, +1.0)
    kidx, iidx = _pair_index(grid.n_q)
    return R[kidx, iidx]


def kernel_to_symbol(K: np.ndarray, grid: PhaseGrid, scales: PhysicalScales) -> PhaseField:
    """Inverse of :func:`symbol_to_kernel`."""
    _require_commensurate(grid, scales)
    n = grid.n_q
    K = np.asarray(K, dtype=complex)
    kidx, iidx = _pair_index(n)
    R = np.empty((n, n), complex)
    R[kidx, iidx] = K
    sig = _shear(R, grid, -1.0)
    vals = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(sig, axes=0), axis=0), axes=0)
    return PhaseField(grid, vals * grid.dq)


# ---------------------------------------------------------------------------
# symbol types

@dataclass(frozen=True, eq=False)
class PolySymbol:
    """Polynomial ``sum c[i, j] p**i q**j``."""

    coef: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coef, dtype=complex))
        object.__setattr__(self, "coef", c)

    @classmethod
    def monomial(cls, p_power: int = 0, q_power: int = 0, scale: complex = 1.0):
        c = np.zeros((p_power + 1, q_power + 1), complex)
        c[p_power, q_power] = scale
        return cls(c)

    @classmethod
    def p(cls):
        return cls.monomial(1, 0)

    @classmethod
    def q(cls):
        return cls.monomial(0, 1)

    @classmethod
    def constant(cls, value: complex):
        return cls.monomial(0, 0, value)

    def derivative(self, dp: int, dq: int) -> "PolySymbol":
        c = self.coef
        if dp:
            c = npoly.polyder(c, dp, axis=0) if c.shape[0] > dp else np.zeros((1, c.shape[1]))
        if dq:
            c = npoly.polyder(c, dq, axis=1) if c.shape[1] > dq else np.zeros((c.shape[0], 1))
        return PolySymbol(c)

    @property
    def degree(self) -> tuple[int, int]:
        return self.coef.shape[0] - 1, self.coef.shape[1] - 1

    def __call__(self, p, q):
        p, q = np.broadcast_arrays(np.asarray(p, float), np.asarray(q, float))
        return npoly.polyval2d(p, q, self.coef)

    def on(self, grid: PhaseGrid) -> PhaseField:
        return PhaseField.from_function(grid, self)

    def __add__(self, other: "PolySymbol") -> "PolySymbol":
        a, b = self.coef, other.coef
        shape = (max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1]))
        out = np.zeros(shape, complex)
        out[: a.shape[0], : a.shape[1]] += a
        out[: b.shape[0], : b.shape[1]] += b
        return PolySymbol(out)

    def __mul__(self, other) -> "PolySymbol":
        if isinstance(other, PolySymbol):
            from scipy.signal import convolve2d

            return PolySymbol(convolve2d(self.coef, other.coef))
        return PolySymbol(self.coef * other)

    __rmul__ = __mul__


class FockDiagonalSymbol(PhaseField):
    """Grid symbol of ``sum_n f_n |n><n|`` that remembers its Fock diagonal."""

    @property
    def diagonal(self) -> np.ndarray:
        return self._meta["diagonal"]

    @property
    def scales(self) -> PhysicalScales:
        return self._meta["scales"]

    @property
    def tail_estimate(self) -> float:
        return self._meta.get("tail_estimate", 0.0)

    def kernel(self) -> np.ndarray:
        """Rank-N position kernel ``sum_n f_n phi_n(q_i) phi_n(q_l)``."""
        cache = self._meta.setdefault("_kernel", None)
        if cache is None:
            sc = self.scales
            phi = hermite_functions(len(self.diagonal), self.grid.q / sc.a) / np.sqrt(sc.a)
            cache = (phi.T * self.diagonal) @ phi
            self._meta["_kernel"] = cache
        return cache


# ---------------------------------------------------------------------------
# Newton-series symbols of Fock-diagonal operators

def newton_coefficients(f) -> np.ndarray:
    """Forward differences ``Delta^k f_0`` for ``k < len(f)``.

    The trailing run of differences below their rounding level
    (``eps sqrt(C(2k, k)) max|f|``, times a safety factor) is set to zero, so
    polynomial ``f`` gives an exactly terminating series.
    """
    f = np.asarray(f, dtype=float)
    out = np.empty(len(f))
    cur = f.copy()
    for k in range(len(f)):
        out[k] = cur[0]
        cur = np.diff(cur)
    k = np.arange(len(f))
    rms = np.exp(0.5 * (gammaln(2 * k + 1) - 2 * gammaln(k + 1)))
    noise = 4.0 * np.finfo(float).eps * np.max(np.abs(f)) * rms
    signal = np.flatnonzero(np.abs(out) > noise)
    last = signal[-1] if signal.size else -1
    out[last + 1:] = 0.0
    return out


def _newton_sum(d: np.ndarray, rho2: np.ndarray) -> np.ndarray:
    lag = laguerre_table(len(d), 0, rho2)
    w = d * (-0.5) ** np.arange(len(d))
    return np.tensordot(w, lag, axes=(0, 0))


def _newton_error(d: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Pointwise bound on truncation plus rounding error of the Newton sum."""
    bounds = np.abs(d) * 0.5 ** np.arange(len(d))
    tail = bounds[-2:].max() if len(d) > 1 else 0.0
    rounding = np.finfo(float).eps * len(d) * bounds.sum()
    return (tail + rounding) * np.exp(h)


def fock_diagonal_to_symbol(f, grid: PhaseGrid, scales: PhysicalScales, *,
                            method: str = "newton", h_max: float = 4.0,
                            tol: float = 1e-8) -> FockDiagonalSymbol:
    """Weyl symbol of ``sum_n f[n] |n><n|`` on ``grid``.

    ``method="newton"`` expands ``f`` in forward differences; the expansion is
    exact for polynomial ``f`` and converges geometrically for slowly varying
    ``f``.  ``method="truncated"`` is the literal partial sum
    ``sum_{n<N} f_n (2 pi hbar) T[n, n]``, which converges only weakly.

    The accuracy is asserted inside ``H/(hbar omega_c) <= h_max``; if the
    error estimate there exceeds ``tol`` a :class:`BoundaryDecayWarning`-style
    tail warning is issued.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or len(f) < 1:
        raise ValueError("f must be a non-empty 1-D array")
    P, Q = grid.mesh()
    x, y = oscillator_coords(P, Q, scales)
    rho2 = np.broadcast_to(x * x + y * y, grid.shape)
    if method == "newton":
        d = newton_coefficients(f)
        vals = _newton_sum(d, rho2)
        err = _newton_error(d, rho2 / 2.0)
        inside = rho2 / 2.0 <= h_max
        tail = float(err[inside].max()) if inside.any() else 0.0
    elif method == "truncated":
        lag = laguerre_table(len(f), 0, 2.0 * rho2)
        signs = (-1.0) ** np.arange(len(f))
        vals = 2.0 * np.exp(-rho2) * np.tensordot(f * signs, lag, axes=(0, 0))
        tail = float(abs(f[-1]))
    else:
        raise ValueError(f"unknown method {method!r}")
    if tail > tol:
        warnings.warn(f"Fock-diagonal symbol: truncation tail estimate {tail:.3e} exceeds "
                      f"{tol:.1e} inside H <= {h_max} hbar*omega_c", RuntimeWarning,
                      stacklevel=2)
    meta = {"diagonal": f.copy(), "scales": scales, "tail_estimate": tail,
            "method": method}
    return FockDiagonalSymbol(grid, np.asarray(vals, complex), DIRECT, meta)


# ---------------------------------------------------------------------------
# star product

def _spectral_derivative(vals: np.ndarray, grid: PhaseGrid, dp: int, dq: int) -> np.ndarray:
    if dp == 0 and dq == 0:
        return vals
    out = np.fft.fft2(np.fft.ifftshift(vals))
    kp = 2.0 * np.pi * np.fft.fftfreq(grid.n_p, grid.dp)
    kq = 2.0 * np.pi * np.fft.fftfreq(grid.n_q, grid.dq)
    fp = (1j * kp) ** dp
    fq = (1j * kq) ** dq
    if dp % 2:
        fp[grid.n_p // 2] = 0.0
    if dq % 2:
        fq[grid.n_q // 2] = 0.0
    out *= fp[:, None] * fq[None, :]
    return np.fft.fftshift(np.fft.ifft2(out))


def _bidifferential(A, B, hbar: float, order: int, deriv_a, deriv_b):
    """Terminating Moyal series ``sum_n (i hbar/2)^n/n! Lambda^n``."""
    total = None
    for n in range(order + 1):
        pref = (0.5j * hbar) ** n / math.factorial(n)
        for r in range(n + 1):
            c = pref * math.comb(n, r) * (-1) ** r
            term = deriv_a(A, r, n - r) * deriv_b(B, n - r, r)  # (dp, dq) orders
            term = term * c
            total = term if total is None else total + term
    return total


def _poly_star_poly(A: PolySymbol, B: PolySymbol, hbar: float) -> PolySymbol:
    order = min(max(A.degree), max(B.degree)) * 2
    total = PolySymbol.constant(0.0)
    for n in range(order + 1):
        pref = (0.5j * hbar) ** n / math.factorial(n)
        for r in range(n + 1):
            c = pref * math.comb(n, r) * (-1) ** r
            total = total + A.derivative(r, n - r) * B.derivative(n - r, r) * c
    return total


def star_product(A, B, scales: PhysicalScales, *, check: bool = True):
    """``A * B`` for :class:`PhaseField`, :class:`PolySymbol` or
    :class:`FockDiagonalSymbol` operands."""
    hbar = scales.hbar
    if isinstance(A, PolySymbol) and isinstance(B, PolySymbol):
        return _poly_star_poly(A, B, hbar)

    if isinstance(A, PolySymbol) or isinstance(B, PolySymbol):
        poly, fld = (A, B) if isinstance(A, PolySymbol) else (B, A)
        if isinstance(fld, FockDiagonalSymbol):
            raise TypeError("polynomial * Fock-diagonal symbol is not supported; "
                            "fold the polynomial into the Fock diagonal")
        fld = fld.to_direct()
        grid = fld.grid
        if check:
            check_decay(fld, "star_product operand")
        P, Q = grid.mesh()
        order = sum(poly.degree)

        def d_poly(s, i, j):
            return np.broadcast_to(s.derivative(i, j)(P, Q), grid.shape)

        def d_field(s, i, j):
            return _spectral_derivative(s.values, grid, i, j)

        if poly is A:
            vals = _bidifferential(poly, fld, hbar, order, d_poly, d_field)
        else:
            vals = _bidifferential(fld, poly, hbar, order, d_field, d_poly)
        return PhaseField(grid, vals)

    if A.grid != B.grid:
        raise GridMismatchError("operands live on different grids")
    grid = A.grid

    if isinstance(A, FockDiagonalSymbol) and isinstance(B, FockDiagonalSymbol):
        n = min(len(A.diagonal), len(B.diagonal))
        return fock_diagonal_to_symbol(A.diagonal[:n] * B.diagonal[:n], grid, scales)

    kernels = []
    for name, X in (("left", A), ("right", B)):
        if isinstance(X, FockDiagonalSymbol):
            kernels.append(X.kernel())
        else:
            if check:
                check_decay(X, f"star_product {name} operand")
            kernels.append(symbol_to_kernel(X, scales))
    return kernel_to_symbol(kernels[0] @ kernels[1] * grid.dq, grid, scales)


# ---------------------------------------------------------------------------
# star square root

def star_sqrt(A, scales: PhysicalScales, tol: float = 1e-8, *, N: int = 24,
              h_max: float = 4.0) -> FockDiagonalSymbol:
    """Star square root of a positive symbol diagonal in the oscillator Fock basis.

    ``A`` is projected on the diagonal Wigner kernels ``T[n, n]`` (``n < N``);
    the square roots of those eigenvalues are resummed into a symbol.  The
    returned symbol carries ``residual`` (``|X*X - A|/|A|`` inside
    ``H <= h_max hbar omega_c``) and ``eigenvalues_in``.
    """
    if isinstance(A, FockDiagonalSymbol):
        eig = np.asarray(A.diagonal, float)
        grid = A.grid
        target = A.values
    else:
        if isinstance(A, PolySymbol):
            raise TypeError("sample a polynomial symbol on a grid first")
        grid = A.grid
        target = A.to_direct().values
        proj = fock_projection(A, N, scales, diagonals=3)
        diag = proj.diagonal()
        scale = np.max(np.abs(diag))
        off = max(np.max(np.abs(np.diagonal(proj, 1))), np.max(np.abs(np.diagonal(proj, 2))))
        if off > max(tol, 1e-10) * scale:
            raise ValueError(f"symbol is not Fock diagonal (off-diagonal {off / scale:.2e})")
        if np.max(np.abs(diag.imag)) > max(tol, 1e-10) * scale:
            raise ValueError("symbol is not Hermitian")
        eig = diag.real
    if np.any(eig < 0):
        bad = int(np.flatnonzero(eig < 0)[0])
        raise DomainError(f"negative induced eigenvalue {eig[bad]:.3e} at n = {bad}")
    root = np.sqrt(eig)
    d = newton_coefficients(root)
    P, Q = grid.mesh()
    x, y = oscillator_coords(P, Q, scales)
    h = np.broadcast_to((x * x + y * y) / 2.0, grid.shape)
    inside = h <= h_max
    tail = float(_newton_error(d, h)[inside].max()) if inside.any() else 0.0
    if tail > tol * max(root.max(), 1e-300):
        raise ConvergenceError(
            f"star_sqrt expansion tail {tail:.3e} exceeds tolerance {tol:.1e}; "
            f"increase N (now {len(root)}) or reduce h_max", tail)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        X = fock_diagonal_to_symbol(root, grid, scales, h_max=h_max, tol=np.inf)
        XX = fock_diagonal_to_symbol(root * root, grid, scales, h_max=h_max, tol=np.inf)
    ref = np.abs(target[inside]).max()
    residual = float(np.abs(XX.values[inside] - target[inside]).max() / ref)
    X._meta.update(residual=residual, eigenvalues_in=eig, tail_estimate=tail)
    if residual > tol:
        raise ConvergenceError(f"star_sqrt residual {residual:.3e} exceeds {tol:.1e}", residual)
    return X


__all__ = [
    "BoundaryDecayWarning", "ConvergenceError", "DomainError", "FockDiagonalSymbol",
    "PolySymbol", "fock_diagonal_to_symbol", "kernel_to_symbol", "newton_coefficients",
    "star_product", "star_sqrt", "symbol_to_kernel",
]
