"""Even and odd Wigner components of free scalar particles.

A state is a pair of momentum-space amplitudes ``psi_plus``, ``psi_minus``
sampled on the p-axis of a :class:`PhaseGrid`.  The components are built in
the mixed (p, k) representation, where with ``P = hbar k``

    F_a^a(p, k)  = eps(p + P/2, p - P/2) conj(psi_a(p + P/2)) psi_a(p - P/2)
    F_a^-a(p, k) = chi(p + P/2, p - P/2) conj(psi_a(p + P/2)) psi_-a(p - P/2)

and ``W(p, q)`` follows by the inverse Fourier transform along k.  Free
evolution is a pure phase per (p, k) sample.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kernel.grid import (BOUNDARY_DECAY, MIXED, BoundaryDecayWarning, PhaseField,
                          PhaseGrid, PhysicalScales, relative_error)

MAX_MOMENT_ORDER = 4
DISPERSIONS = ("relativistic", "nonrelativistic")


def energy_free(p, scales: PhysicalScales):
    """Relativistic energy ``sqrt(m^2 c^4 + p^2 c^2)``."""
    p = np.asarray(p, dtype=float)
    return np.hypot(scales.rest_energy, p * scales.c)


def _energy(p, scales, dispersion):
    if dispersion == "relativistic":
        return energy_free(p, scales)
    if dispersion == "nonrelativistic":
        p = np.asarray(p, dtype=float)
        return scales.rest_energy + p * p / (2.0 * scales.mass)
    raise ValueError(f"dispersion must be one of {DISPERSIONS}, got {dispersion!r}")


def eps_chi_from_energies(E1, E2):
    """``eps = (E1+E2)/(2 sqrt(E1 E2))`` and ``chi = (E1-E2)/(2 sqrt(E1 E2))``."""
    E1 = np.asarray(E1, dtype=float)
    E2 = np.asarray(E2, dtype=float)
    s1, s2 = np.sqrt(E1), np.sqrt(E2)
    den = 2.0 * s1 * s2
    # eps - 1 = (s1 - s2)^2 / den keeps eps^2 - chi^2 = 1 at rounding level
    eps = 1.0 + (s1 - s2) ** 2 / den
    chi = (E1 - E2) / den
    return eps, chi


def epsilon_chi(p1, p2, scales: PhysicalScales):
    """``(eps, chi)`` for the momentum pair ``(p1, p2)``."""
    return eps_chi_from_energies(energy_free(p1, scales), energy_free(p2, scales))


@dataclass(frozen=True, eq=False)
class FVState:
    """Two-component momentum amplitude on the p-axis of ``grid``."""

    grid: PhaseGrid
    psi_plus: np.ndarray
    psi_minus: np.ndarray

    def __post_init__(self):
        for name in ("psi_plus", "psi_minus"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (self.grid.n_p,):
                raise ValueError(f"{name} must have shape ({self.grid.n_p},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)

    @classmethod
    def gaussian(cls, grid: PhaseGrid, p0: float, sigma_p: float, q0: float = 0.0,
                 charge: int = +1, scales: PhysicalScales | None = None) -> "FVState":
        """Normalised Gaussian packet centred at ``(p0, q0)`` in one charge component."""
        psi = gaussian_amplitude(grid.p, p0, sigma_p, q0, scales)
        zero = np.zeros_like(psi)
        return cls(grid, psi, zero) if charge > 0 else cls(grid, zero, psi)

    def norms(self) -> tuple[float, float]:
        dp = self.grid.dp
        return (float(np.sum(np.abs(self.psi_plus) ** 2) * dp),
                float(np.sum(np.abs(self.psi_minus) ** 2) * dp))

    def charge_norm(self) -> float:
        n_plus, n_minus = self.norms()
        return n_plus - n_minus

    def boundary_ratio(self) -> float:
        both = np.abs(np.concatenate([self.psi_plus, self.psi_minus]))
        peak = both.max()
        if peak == 0:
            return 0.0
        edge = max(abs(self.psi_plus[0]), abs(self.psi_plus[-1]),
                   abs(self.psi_minus[0]), abs(self.psi_minus[-1]))
        return float(edge / peak)


def gaussian_amplitude(p, p0, sigma_p, q0=0.0, scales: PhysicalScales | None = None):
    """``|psi|^2`` is a unit-norm normal density of width ``sigma_p`` in p."""
    hbar = 1.0 if scales is None else scales.hbar
    p = np.asarray(p, dtype=float)
    amp = (2.0 * np.pi * sigma_p**2) ** -0.25 * np.exp(-((p - p0) ** 2) / (4.0 * sigma_p**2))
    return amp * np.exp(-1j * p * q0 / hbar)


@dataclass(frozen=True, eq=False)
class WignerComponents:
    """``W_+^+``, ``W_-^-`` (even) and ``W_+^-``, ``W_-^+`` (odd)."""

    even_plus: PhaseField
    even_minus: PhaseField
    odd_plus: PhaseField
    odd_minus: PhaseField

    def __post_init__(self):
        grids = {f.grid for f in self.fields()}
        if len(grids) != 1:
            raise ValueError("all components must share one grid")

    def fields(self) -> tuple[PhaseField, PhaseField, PhaseField, PhaseField]:
        """Storage order ``W_+^+, W_-^-, W_+^-, W_-^+``."""
        return (self.even_plus, self.even_minus, self.odd_plus, self.odd_minus)

    @property
    def grid(self) -> PhaseGrid:
        return self.even_plus.grid

    def map(self, func) -> "WignerComponents":
        return WignerComponents(*(func(f) for f in self.fields()))

    def to_direct(self) -> "WignerComponents":
        return self.map(lambda f: f.to_direct())

    def to_mixed(self) -> "WignerComponents":
        return self.map(lambda f: f.to_mixed())

    def charge_norm(self) -> float:
        return float((self.even_plus.integrate() - self.even_minus.integrate()).real)

    def structure_defects(self) -> dict[str, float]:
        """Deviations from the reality and antisymmetry invariants, relative to peak."""
        d = self.to_direct()
        peak = max(f.max_abs() for f in d.fields()) or 1.0
        return {
            "even_imag": max(np.max(np.abs(d.even_plus.values.imag)),
                             np.max(np.abs(d.even_minus.values.imag))) / peak,
            "odd_antisymmetry": float(np.max(np.abs(d.odd_plus.values.conj()
                                                    + d.odd_minus.values))) / peak,
        }

    def max_deviation(self, other: "WignerComponents") -> float:
        """Largest absolute pointwise difference over all four components."""
        a, b = self.to_direct(), other.to_direct()
        return float(max(np.max(np.abs(x.values - y.values))
                         for x, y in zip(a.fields(), b.fields())))

    def relative_deviation(self, other: "WignerComponents") -> float:
        a, b = self.to_direct(), other.to_direct()
        return max(relative_error(x.values, y.values) for x, y in zip(a.fields(), b.fields())
                   if np.any(y.values))


# ---------------------------------------------------------------------------
# component construction

def _shifted_samples(psi: np.ndarray, grid: PhaseGrid, shifts: np.ndarray) -> np.ndarray:
    """``psi(p_j + s)`` for every shift ``s``, shape (len(shifts), n_p).

    Band-limited interpolation on a zero-padded copy, so values that leave the
    grid are zero instead of wrapping around.
    """
    n = grid.n_p
    padded = np.zeros(2 * n, complex)
    padded[n // 2: n // 2 + n] = psi
    spec = np.fft.fft(np.fft.ifftshift(padded))
    kappa = 2.0 * np.pi * np.fft.fftfreq(2 * n, grid.dp)
    nyq = n  # the unpaired Nyquist mode of the padded array
    spec[nyq] = 0.0
    out = np.fft.fftshift(np.fft.ifft(spec[None, :] * np.exp(1j * np.outer(shifts, kappa)),
                                      axis=1), axes=1)[:, n // 2: n // 2 + n]
    p = grid.p
    outside = np.abs(p[None, :] + shifts[:, None]) > grid.p_extent
    out[outside] = 0.0
    return out


def _mixed_kernels(state: FVState, scales: PhysicalScales):
    grid = state.grid
    P = scales.hbar * grid.k  # one momentum difference per mixed column
    half = P / 2.0
    up = {a: _shifted_samples(psi, grid, half)
          for a, psi in ((+1, state.psi_plus), (-1, state.psi_minus))}
    down = {a: _shifted_samples(psi, grid, -half)
            for a, psi in ((+1, state.psi_plus), (-1, state.psi_minus))}
    p = grid.p
    eps, chi = epsilon_chi(p[None, :] + half[:, None], p[None, :] - half[:, None], scales)
    return up, down, eps, chi


def wigner_components(state: FVState, scales: PhysicalScales, *,
                      check: bool = True) -> WignerComponents:
    """All four Wigner components of ``state``, returned in the mixed representation."""
    if check:
        ratio = state.boundary_ratio()
        if ratio > BOUNDARY_DECAY:
            warnings.warn(BoundaryDecayWarning(
                f"FVState: boundary amplitude {ratio:.3e} of peak exceeds {BOUNDARY_DECAY:.1e}",
                ratio), stacklevel=2)
    grid = state.grid
    up, down, eps, chi = _mixed_kernels(state, scales)
    # arrays are (k, p); fields are (p, k)

    def field(weight, a, b):
        return PhaseField(grid, (weight * up[a].conj() * down[b]).T, MIXED)

    return WignerComponents(
        even_plus=field(eps, +1, +1),
        even_minus=field(eps, -1, -1),
        odd_plus=field(chi, +1, -1),
        odd_minus=field(chi, -1, +1),
    )


# ---------------------------------------------------------------------------
# evolution

def free_phases(grid: PhaseGrid, t: float, scales: PhysicalScales,
                dispersion: str = "relativistic") -> tuple[np.ndarray, np.ndarray]:
    """Mixed-representation propagators ``(even, odd)`` for ``alpha = +1``.

    ``even = exp(i t (E(p+P/2) - E(p-P/2))/hbar)`` and
    ``odd = exp(i t (E(p+P/2) + E(p-P/2))/hbar)``; ``alpha = -1`` uses the
    complex conjugates.
    """
    P, K = grid.mesh()[0], grid.k[None, :]
    half = scales.hbar * K / 2.0
    E_up = _energy(P + half, scales, dispersion)
    E_dn = _energy(P - half, scales, dispersion)
    w = t / scales.hbar
    return np.exp(1j * w * (E_up - E_dn)), np.exp(1j * w * (E_up + E_dn))


def evolve_free(W: WignerComponents, t: float, scales: PhysicalScales, *,
                dispersion: str = "relativistic") -> WignerComponents:
    """Exact free evolution by mixed-representation phases."""
    if t == 0:
        return W
    mixed = W.to_mixed()
    even, odd = free_phases(W.grid, t, scales, dispersion)

    def advance(f, phase):
        return PhaseField(f.grid, f.values * phase, MIXED)

    return WignerComponents(
        even_plus=advance(mixed.even_plus, even),
        even_minus=advance(mixed.even_minus, even.conj()),
        odd_plus=advance(mixed.odd_plus, odd),
        odd_minus=advance(mixed.odd_minus, odd.conj()),
    )


# ---------------------------------------------------------------------------
# moments

def moments(W: WignerComponents, k_p: int, k_q: int, *, decay_tol: float = 1e-8) -> dict:
    """``int p^k_p q^k_q W dp dq`` for every component and their sum.

    Keys are ``"++"``, ``"--"``, ``"+-"``, ``"-+"`` and ``"total"``.
    """
    for name, k in (("k_p", k_p), ("k_q", k_q)):
        if int(k) != k or k < 0:
            raise ValueError(f"{name} must be a non-negative integer")
        if k > MAX_MOMENT_ORDER:
            raise ValueError(f"{name} = {k} exceeds the grid-resolution guard "
                             f"{MAX_MOMENT_ORDER}")
    grid = W.grid
    P, Q = grid.mesh()
    weight = P**k_p * Q**k_q
    out = {}
    for key, f in zip(("++", "--", "+-", "-+"), W.to_direct().fields()):
        integrand = np.abs(weight * f.values)
        peak = integrand.max()
        if peak > 0:
            edge = max(integrand[0].max(), integrand[-1].max(),
                       integrand[:, 0].max(), integrand[:, -1].max())
            if edge > decay_tol * peak:
                raise ValueError(f"moment ({k_p}, {k_q}) of W{key}: integrand at the boundary "
                                 f"is {edge / peak:.2e} of peak; enlarge the grid")
        out[key] = complex(np.sum(weight * f.values) * grid.cell)
    out["total"] = sum(out.values())
    return out
