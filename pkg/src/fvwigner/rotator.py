"""Relativistic rotator in a homogeneous magnetic field, energy representation.

The spectrum is ``E_n = m c^2 sqrt(1 + (2n + 1) b)`` with ``b = hbar omega_c/(m c^2)``,
the Fock eigenvalues of ``m c^2`` times the star square root of
``1 + (2/(m c^2)) H_osc``.  Wigner components are built from Fock coefficients
``C[n, alpha]`` as

    W_a^a  = sum_{m,n} eps[m, n] conj(C[n, a]) C[m, a]  T[m, n]
    W_a^-a = sum_{m,n} chi[m, n] conj(C[n, a]) C[m, -a] T[m, n]

and evolve either by exact phases or by numerical integration of the Moyal
sine and cosine flows generated by the symbol ``E(p, q)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .free_particle import WignerComponents, eps_chi_from_energies
from .kernel.fock import fock_to_wigner
from .kernel.grid import PhaseField, PhaseGrid, PhysicalScales
from .kernel.star import (FockDiagonalSymbol, fock_diagonal_to_symbol, kernel_to_symbol,
                          symbol_to_kernel)

TAIL_TOL = 1e-12
RK4_STABILITY = 2.5  # margin below the RK4 imaginary-axis limit 2*sqrt(2)


@dataclass(frozen=True, eq=False)
class RotatorSpectrum:
    N: int
    b: float
    E: np.ndarray
    scales: PhysicalScales

    @property
    def second_difference(self) -> np.ndarray:
        """``E[n+1] - 2 E[n] + E[n-1]`` for ``n = 1..N-2``."""
        return np.diff(self.E, 2)


def landau_spectrum(N: int, scales: PhysicalScales, b: float | None = None) -> RotatorSpectrum:
    """``E_n = m c^2 sqrt(1 + (2n+1) b)``; ``b`` defaults to ``scales.b``."""
    if int(N) != N or N < 2:
        raise ValueError("N must be an integer >= 2")
    b = scales.b if b is None else float(b)
    if not np.isfinite(b) or b < 0:
        raise ValueError(f"b must be >= 0, got {b!r}")
    n = np.arange(int(N))
    E = scales.rest_energy * np.sqrt(1.0 + (2 * n + 1) * b)
    return RotatorSpectrum(int(N), b, E, scales)


def harmonic_spectrum(N: int, scales: PhysicalScales) -> RotatorSpectrum:
    """``m c^2 + hbar omega_c (n + 1/2)``: the small-``b`` expansion of the rotator levels."""
    n = np.arange(int(N))
    E = scales.rest_energy + scales.hbar * scales.omega_c * (n + 0.5)
    return RotatorSpectrum(int(N), scales.b, E, scales)


@dataclass(frozen=True, eq=False)
class EpsilonChiMatrix:
    N: int
    eps: np.ndarray
    chi: np.ndarray

    def defects(self) -> dict[str, float]:
        return {
            "eps_symmetry": float(np.max(np.abs(self.eps - self.eps.T))),
            "chi_antisymmetry": float(np.max(np.abs(self.chi + self.chi.T))),
            "eps_diagonal": float(np.max(np.abs(np.diag(self.eps) - 1.0))),
            "chi_diagonal": float(np.max(np.abs(np.diag(self.chi)))),
            "hyperbolic": float(np.max(np.abs(self.eps**2 - self.chi**2 - 1.0))),
        }


def eps_chi_matrix(spec: RotatorSpectrum) -> EpsilonChiMatrix:
    eps, chi = eps_chi_from_energies(spec.E[:, None], spec.E[None, :])
    return EpsilonChiMatrix(spec.N, eps, chi)


@dataclass(frozen=True, eq=False)
class EnergyRepState:
    """Fock coefficients ``C[n; +]`` and ``C[n; -]``."""

    C_plus: np.ndarray
    C_minus: np.ndarray
    tail_tol: float = field(default=TAIL_TOL, repr=False)

    def __post_init__(self):
        cp = np.asarray(self.C_plus, dtype=complex)
        cm = np.asarray(self.C_minus, dtype=complex)
        if cp.ndim != 1 or cp.shape != cm.shape or len(cp) < 2:
            raise ValueError("C_plus and C_minus must be 1-D arrays of equal length >= 2")
        if not (np.all(np.isfinite(cp)) and np.all(np.isfinite(cm))):
            raise ValueError("coefficients must be finite")
        total = np.sum(np.abs(cp) ** 2 + np.abs(cm) ** 2)
        if total == 0:
            raise ValueError("state has zero norm")
        tail = (abs(cp[-1]) ** 2 + abs(cm[-1]) ** 2) / total
        if tail > self.tail_tol:
            raise ValueError(f"truncation tail |C_(N-1)|^2 = {tail:.3e} of total exceeds "
                             f"{self.tail_tol:.1e}; increase N")
        object.__setattr__(self, "C_plus", cp)
        object.__setattr__(self, "C_minus", cm)

    @classmethod
    def from_levels(cls, N: int, plus: dict | None = None,
                    minus: dict | None = None) -> "EnergyRepState":
        """Build from sparse ``{level: amplitude}`` maps."""
        cp = np.zeros(N, complex)
        cm = np.zeros(N, complex)
        for arr, spec in ((cp, plus or {}), (cm, minus or {})):
            for n, amp in spec.items():
                arr[int(n)] = amp
        return cls(cp, cm)

    @property
    def N(self) -> int:
        return len(self.C_plus)

    def coefficients(self, alpha: int) -> np.ndarray:
        return self.C_plus if alpha > 0 else self.C_minus

    def charge_norm(self) -> float:
        return float(np.sum(np.abs(self.C_plus) ** 2 - np.abs(self.C_minus) ** 2))

    def normalized(self) -> "EnergyRepState":
        s = np.sqrt(np.sum(np.abs(self.C_plus) ** 2 + np.abs(self.C_minus) ** 2))
        return EnergyRepState(self.C_plus / s, self.C_minus / s, self.tail_tol)


def required_extent(N: int) -> float:
    """Minimum half-width, in oscillator units, that resolves levels below ``N``."""
    return 1.5 * np.sqrt(2.0 * N)


def check_resolution(grid: PhaseGrid, N: int, scales: PhysicalScales):
    need = required_extent(N)
    have_q = grid.q_extent / scales.a
    have_p = grid.p_extent / scales.p_unit
    if min(have_q, have_p) < need:
        raise ValueError(
            f"grid under-resolves Fock levels below N={N}: needs half-widths >= {need:.3f} "
            f"in oscillator units (q_extent >= {need * scales.a:.6g}, "
            f"p_extent >= {need * scales.p_unit:.6g}); has q {have_q:.3f}, p {have_p:.3f}")


def wigner_energy_rep(state: EnergyRepState, em: EpsilonChiMatrix, grid: PhaseGrid,
                      scales: PhysicalScales) -> WignerComponents:
    """Even and odd components from Fock coefficients."""
    if em.N < state.N:
        raise ValueError("eps/chi matrix smaller than the state truncation")
    N = state.N
    check_resolution(grid, N, scales)
    eps = em.eps[:N, :N]
    chi = em.chi[:N, :N]
    out = {}
    for a, key_even, key_odd in ((+1, "even_plus", "odd_plus"), (-1, "even_minus", "odd_minus")):
        ca = state.coefficients(a)
        cb = state.coefficients(-a)
        # rho[m, n] multiplies T[m, n]
        out[key_even] = fock_to_wigner(eps * np.outer(ca, ca.conj()), grid, scales)
        out[key_odd] = fock_to_wigner(chi * np.outer(cb, ca.conj()), grid, scales)
    return WignerComponents(**out)


def evolve_energy_rep(state: EnergyRepState, spec: RotatorSpectrum, t: float) -> EnergyRepState:
    """``C[n; a](t) = exp(-i a E_n t/hbar) C[n; a](0)``."""
    if spec.N < state.N:
        raise ValueError("spectrum shorter than the state truncation")
    E = spec.E[: state.N]
    w = E * t / spec.scales.hbar
    return EnergyRepState(np.exp(-1j * w) * state.C_plus, np.exp(1j * w) * state.C_minus,
                          state.tail_tol)


# ---------------------------------------------------------------------------
# Moyal flows

@dataclass(frozen=True, eq=False)
class MoyalResult:
    W: WignerComponents
    steps: int
    dt: float
    step_bound: float
    error_estimate: float


def hamiltonian_symbol(spec: RotatorSpectrum, grid: PhaseGrid, *, h_max: float = 4.0,
                       tol: float = 1e-8) -> FockDiagonalSymbol:
    """Grid symbol ``E(p, q)`` of the rotator Hamiltonian."""
    return fock_diagonal_to_symbol(spec.E, grid, spec.scales, h_max=h_max, tol=tol)


def _rk4(K0: np.ndarray, gen, dt: float, steps: int) -> np.ndarray:
    K = K0
    for _ in range(steps):
        k1 = gen(K)
        k2 = gen(K + 0.5 * dt * k1)
        k3 = gen(K + 0.5 * dt * k2)
        k4 = gen(K + dt * k3)
        K = K + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return K


def _generator_matrix(symbol_E: FockDiagonalSymbol, scales: PhysicalScales) -> np.ndarray:
    """Kernel of ``E - m c^2`` scaled to act as a matrix on position kernels."""
    grid = symbol_E.grid
    return (symbol_E.kernel() - scales.rest_energy * np.eye(grid.n_q) / grid.dq) * grid.dq


def min_moyal_steps(symbol_E: FockDiagonalSymbol, t: float, scales: PhysicalScales) -> int:
    """Fewest RK4 steps over ``t`` that respect the stability bound."""
    norm = np.linalg.norm(_generator_matrix(symbol_E, scales), 2)
    return max(1, int(np.ceil(2.0 * norm * abs(t) / scales.hbar / RK4_STABILITY)))


def kernel_hermiticity_defect(W: WignerComponents, scales: PhysicalScales) -> float:
    """Anti-Hermitian part of the even-component kernels, relative to their peak.

    Real symbols map to Hermitian kernels only when the kernel has decayed at
    the half-box separation where the periodic grid wraps; otherwise the
    Moyal flow leaks this defect into the imaginary part of the even components.
    """
    worst = 0.0
    for f in (W.even_plus, W.even_minus):
        K = symbol_to_kernel(f, scales)
        peak = np.max(np.abs(K))
        if peak > 0:
            worst = max(worst, float(np.max(np.abs(K - K.conj().T)) / peak))
    return worst


def evolve_moyal_rotator(W: WignerComponents, symbol_E: FockDiagonalSymbol, t: float,
                         steps: int, scales: PhysicalScales, *,
                         estimate_error: bool = True) -> MoyalResult:
    """Integrate the Moyal sine (even) and cosine (odd) flows with fixed-step RK4.

    Fields are advanced as position kernels, where the star product is a
    matrix product.  The rest-energy carrier ``exp(2 i a m c^2 t/hbar)`` of the
    odd flow is split off and applied exactly, so the integrator only sees
    ``E - m c^2``.  With ``estimate_error`` a half-step-count run gives the
    Richardson estimate ``|W_n - W_(n/2)|/15``.
    """
    if not isinstance(symbol_E, FockDiagonalSymbol):
        raise TypeError("symbol_E must come from fock_diagonal_to_symbol")
    if int(steps) != steps or steps < 1:
        raise ValueError("steps must be a positive integer")
    grid = W.grid
    if symbol_E.grid != grid:
        raise ValueError("symbol and components live on different grids")
    hbar = scales.hbar
    mc2 = scales.rest_energy
    KE = _generator_matrix(symbol_E, scales)
    norm = np.linalg.norm(KE, 2)
    dt = t / steps
    bound = 2.0 * norm * abs(dt) / hbar
    if bound > RK4_STABILITY:
        need = min_moyal_steps(symbol_E, t, scales)
        raise ValueError(f"step bound {bound:.3f} exceeds {RK4_STABILITY}; use steps >= {need}")
    if t == 0:
        return MoyalResult(W, int(steps), 0.0, 0.0, 0.0)

    def run(n_steps):
        h = t / n_steps
        out = []
        for f, alpha, odd in ((W.even_plus, +1, False), (W.even_minus, -1, False),
                              (W.odd_plus, +1, True), (W.odd_minus, -1, True)):
            K0 = symbol_to_kernel(f, scales)
            if odd:
                def gen(K, a=alpha):
                    return (1j * a / hbar) * (KE @ K + K @ KE)
                carrier = np.exp(2j * alpha * mc2 * t / hbar)
            else:
                def gen(K, a=alpha):
                    return (-1j * a / hbar) * (KE @ K - K @ KE)
                carrier = 1.0
            K = _rk4(K0, gen, h, n_steps) * carrier
            out.append(kernel_to_symbol(K, grid, scales))
        return WignerComponents(*out)

    result = run(int(steps))
    err = 0.0
    if estimate_error and steps >= 2 and steps % 2 == 0:
        if 2.0 * bound > RK4_STABILITY:
            err = float("nan")  # the half-step run would be unstable
        else:
            coarse = run(int(steps) // 2)
            err = result.max_deviation(coarse) / 15.0
    return MoyalResult(result, int(steps), dt, bound, err)


# ---------------------------------------------------------------------------
# observables

def radius_symbol(grid: PhaseGrid, scales: PhysicalScales) -> np.ndarray:
    """``R^2 = q^2 + p^2/(m omega_c)^2`` sampled on ``grid``."""
    P, Q = grid.mesh()
    return Q**2 + (P / (scales.mass * scales.omega_c)) ** 2


def radius_observable(obj, scales: PhysicalScales, *, decay_tol: float = 1e-8) -> float:
    """``<R^2>`` from Wigner components or from an :class:`EnergyRepState`.

    For components the phase-space integral runs over both even parts; for a
    state the Fock sum ``a^2 sum (2n+1)(|C_n+|^2 + |C_n-|^2)`` is used.
    """
    if isinstance(obj, EnergyRepState):
        n = np.arange(obj.N)
        w = np.abs(obj.C_plus) ** 2 + np.abs(obj.C_minus) ** 2
        return float(scales.a2 * np.sum((2 * n + 1) * w))
    if isinstance(obj, WignerComponents):
        d = obj.to_direct()
        grid = d.grid
        R2 = radius_symbol(grid, scales)
        total = 0.0
        for f in (d.even_plus, d.even_minus):
            integrand = np.abs(R2 * f.values)
            peak = integrand.max()
            if peak > 0:
                edge = max(integrand[0].max(), integrand[-1].max(),
                           integrand[:, 0].max(), integrand[:, -1].max())
                if edge > decay_tol * peak:
                    raise ValueError(f"R^2 integrand at the boundary is {edge / peak:.2e} "
                                     "of peak; enlarge the grid")
            total += float(np.sum(R2 * f.values).real * grid.cell)
        return total
    raise TypeError("expected WignerComponents or EnergyRepState")


def trajectory_observable(state: EnergyRepState, em: EpsilonChiMatrix,
                          scales: PhysicalScales) -> tuple[float, float]:
    """Mean position and momentum ``(<q>, <p>)`` of the even components.

    Uses the phase-space weights of the even components, so every Fock pair
    ``(n, n+1)`` carries its ``eps`` factor.
    """
    N = state.N
    eps = em.eps[:N, :N]
    amp = 0.0 + 0.0j  # sum_n eps sqrt(n+1) conj(C_n) C_(n+1), the mean of the lowering operator
    for a in (+1, -1):
        c = state.coefficients(a)
        n = np.arange(N - 1)
        amp += np.sum(np.diag(eps, 1) * np.sqrt(n + 1) * c[:-1].conj() * c[1:])
    q = np.sqrt(2.0) * scales.a * amp.real
    p = np.sqrt(2.0) * scales.p_unit * amp.imag
    return float(q), float(p)


def trajectory_radius2(q: np.ndarray, p: np.ndarray, scales: PhysicalScales) -> np.ndarray:
    """Squared radius ``<q>^2 + <p>^2/(m omega_c)^2`` of the mean trajectory."""
    return np.asarray(q) ** 2 + (np.asarray(p) / (scales.mass * scales.omega_c)) ** 2
