"""Nonlinear coherent states of the rotator, orbit-radius dispersion and the slow modulation.

The state is ``C_n = C0 lam^n / sqrt(n! F_n)`` with ``lam = Rbar/(sqrt(2) a)`` and a
deformed factorial ``F_n`` built from squared ``eps`` factors of neighbouring levels:

* ``"adjacent"``: ``F_n = prod_{k=1..n} eps[k, k-1]^2``
* ``"shifted"``:  ``F_n = prod_{k=0..n-1} eps[k+1, k+2]^2``

For either choice the orbit-radius dispersion ``<R^2> - Rbar^2`` equals
``a^2 - Rbar^2 (1 - |C0|^2 sum_n lam^(2n)/(n! F_(n+1)))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .kernel.grid import PhysicalScales
from .rotator import (EnergyRepState, EpsilonChiMatrix, RotatorSpectrum, eps_chi_matrix,
                      evolve_energy_rep, harmonic_spectrum, landau_spectrum, radius_observable,
                      trajectory_observable, trajectory_radius2)

CONVENTIONS = ("adjacent", "shifted")
TAIL_TOL = 1e-12
FLAG_MARGIN = 1e-10
FLAT_LEVEL = 1e-6  # relative envelope variation treated as no modulation


@dataclass(frozen=True)
class NonlinearCoherentSpec:
    R_bar: float
    N: int = 48
    convention: str = "adjacent"

    def __post_init__(self):
        if not np.isfinite(self.R_bar) or self.R_bar < 0:
            raise ValueError(f"R_bar must be >= 0, got {self.R_bar!r}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("N must be an integer >= 2")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")

    def lam(self, scales: PhysicalScales) -> float:
        return self.R_bar / (np.sqrt(2.0) * scales.a)


def matrix_for(spec: NonlinearCoherentSpec, scales: PhysicalScales,
               b: float | None = None) -> EpsilonChiMatrix:
    """``eps``/``chi`` matrix large enough for either convention at truncation ``spec.N``."""
    return eps_chi_matrix(landau_spectrum(spec.N + 2, scales, b))


def deformed_factorial(em: EpsilonChiMatrix, n_max: int, convention: str) -> np.ndarray:
    """``log F_n`` for ``n = 0..n_max``."""
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    k = np.arange(1, n_max + 1)
    need = n_max + 1 if convention == "adjacent" else n_max + 2
    if em.N < need:
        raise ValueError(f"eps matrix of size {em.N} too small; need {need}")
    if convention == "adjacent":
        factors = em.eps[k, k - 1]
    else:
        factors = em.eps[k, k + 1]  # k-th factor is eps[k, k+1] for k = 1..n
    return np.concatenate([[0.0], np.cumsum(2.0 * np.log(factors))])


def _log_weights(spec: NonlinearCoherentSpec, em: EpsilonChiMatrix, scales: PhysicalScales,
                 shift: int = 0) -> np.ndarray:
    """``log(lam^(2n)/(n! F_(n+shift)))`` for ``n < N``."""
    lam = spec.lam(scales)
    n = np.arange(spec.N)
    logF = deformed_factorial(em, spec.N - 1 + shift, spec.convention)[shift:]
    with np.errstate(divide="ignore"):
        two_n_log = np.where(n == 0, 0.0, 2.0 * n * np.log(lam)) if lam > 0 else \
            np.where(n == 0, 0.0, -np.inf)
    return two_n_log - gammaln(n + 1) - logF


def nlcs_coefficients(spec: NonlinearCoherentSpec, em: EpsilonChiMatrix,
                      scales: PhysicalScales) -> EnergyRepState:
    """Normalised single-charge coefficients of the nonlinear coherent state."""
    logw = _log_weights(spec, em, scales)
    logw -= logsumexp(logw)
    weights = np.exp(logw)
    tail = weights[-1]
    if tail > TAIL_TOL:
        raise ValueError(f"NLCS truncation tail {tail:.3e} exceeds {TAIL_TOL:.0e} at "
                         f"N={spec.N}; use N >= {suggest_truncation(spec, scales)}")
    return EnergyRepState(np.sqrt(weights).astype(complex), np.zeros(spec.N, complex))


def suggest_truncation(spec: NonlinearCoherentSpec, scales: PhysicalScales) -> int:
    """Smallest ``N`` whose undeformed Poisson tail is below the tolerance."""
    lam2 = spec.lam(scales) ** 2
    n = np.arange(2, 4000)
    if lam2 == 0:
        return 2
    logp = -lam2 + n * np.log(lam2) - gammaln(n + 1)
    return int(n[np.argmax((logp < np.log(TAIL_TOL)) & (n > lam2))] + 1)


def nlcs_normalization(spec: NonlinearCoherentSpec, em: EpsilonChiMatrix,
                       scales: PhysicalScales) -> float:
    """``|C0|^2``."""
    return float(np.exp(-logsumexp(_log_weights(spec, em, scales))))


def deltaR2_closed_form(spec: NonlinearCoherentSpec, em: EpsilonChiMatrix,
                        scales: PhysicalScales) -> float:
    """``a^2 - Rbar^2 (1 - |C0|^2 sum_n lam^(2n)/(n! F_(n+1)))``."""
    c0 = nlcs_normalization(spec, em, scales)
    terms = np.exp(_log_weights(spec, em, scales, shift=1))
    total = terms.sum()
    if total > 0 and terms[-1] > TAIL_TOL * total:
        raise ValueError(f"closed-form series tail {terms[-1] / total:.3e} exceeds "
                         f"{TAIL_TOL:.0e}; increase N")
    # the final term pairs with level N, which the truncated state does not hold
    series = terms[:-1].sum()
    return float(scales.a2 - spec.R_bar**2 * (1.0 - c0 * series))


def deltaR2_direct(state: EnergyRepState, scales: PhysicalScales, R_bar: float | None = None,
                   *, variant: str = "design") -> float:
    """Orbit-radius dispersion from Fock expectations.

    ``variant="design"`` gives ``<R^2> - Rbar^2``; ``variant="variance"`` gives
    ``<R^2> - <R>^2`` with ``R = a sqrt(2n + 1)``, the spectral square root of
    ``R^2`` in the Fock basis.
    """
    R2 = radius_observable(state, scales)
    if variant == "design":
        if R_bar is None:
            raise ValueError("the design variant needs R_bar")
        return float(R2 - R_bar**2)
    if variant == "variance":
        n = np.arange(state.N)
        w = np.abs(state.C_plus) ** 2 + np.abs(state.C_minus) ** 2
        norm = w.sum()
        R = scales.a * np.sum(np.sqrt(2 * n + 1) * w) / norm
        return float(R2 / norm - R**2)
    raise ValueError("variant must be 'design' or 'variance'")


def quadrature_uncertainty(state: EnergyRepState, scales: PhysicalScales) -> float:
    """``Dq Dp / (hbar/2)`` of the state (at least 1 for any physical state)."""
    total = 0.0
    moments = np.zeros(3, complex)  # <a>, <a a>, <a^+ a>
    for c in (state.C_plus, state.C_minus):
        n = np.arange(len(c))
        moments[0] += np.sum(np.sqrt(n[1:]) * c[:-1].conj() * c[1:])
        moments[1] += np.sum(np.sqrt(n[2:] * n[1:-1]) * c[:-2].conj() * c[2:])
        moments[2] += np.sum(n * np.abs(c) ** 2)
        total += np.sum(np.abs(c) ** 2)
    a1, a2, nn = moments[0] / total, moments[1] / total, moments[2].real / total
    x_mean = np.sqrt(2.0) * a1.real
    y_mean = np.sqrt(2.0) * a1.imag
    var_x = nn + 0.5 + a2.real - x_mean**2
    var_y = nn + 0.5 - a2.real - y_mean**2
    return float(2.0 * np.sqrt(var_x * var_y))


@dataclass(frozen=True)
class AuditEntry:
    R_bar: float
    dR2_closed: float
    dR2_direct: float
    dR2_variance: float
    reference: float
    uncertainty_ratio: float
    flag_radius: bool
    flag_quadrature: bool


@dataclass(frozen=True)
class AuditReport:
    b: float
    convention: str
    entries: tuple[AuditEntry, ...]

    @property
    def flags(self) -> tuple[float, ...]:
        """``R_bar`` values where the radius dispersion falls below ``a^2``."""
        return tuple(e.R_bar for e in self.entries if e.flag_radius)

    @property
    def flag_window(self) -> tuple[float, float] | None:
        f = self.flags
        return (min(f), max(f)) if f else None

    @property
    def max_route_mismatch(self) -> float:
        return max(abs(e.dR2_closed - e.dR2_direct) / abs(e.dR2_direct) for e in self.entries)


def uncertainty_audit(b: float, R_bar_values, scales: PhysicalScales, *, N: int = 48,
                      convention: str = "adjacent") -> AuditReport:
    """Dispersion audit over ``R_bar_values`` with the deformation set by ``b``.

    The oscillator length ``a`` comes from ``scales``; ``b`` only enters the
    ``eps`` factors, so ``b = 0`` is the undeformed limit at the same ``a``.
    """
    entries = []
    ref = scales.a2
    for R_bar in np.asarray(R_bar_values, dtype=float):
        spec = NonlinearCoherentSpec(float(R_bar), N, convention)
        em = matrix_for(spec, scales, b)
        state = nlcs_coefficients(spec, em, scales)
        closed = deltaR2_closed_form(spec, em, scales)
        direct = deltaR2_direct(state, scales, spec.R_bar)
        variance = deltaR2_direct(state, scales, variant="variance")
        ratio = quadrature_uncertainty(state, scales)
        entries.append(AuditEntry(
            R_bar=float(R_bar), dR2_closed=closed, dR2_direct=direct, dR2_variance=variance,
            reference=ref, uncertainty_ratio=ratio,
            flag_radius=bool(direct < ref * (1.0 - FLAG_MARGIN)),
            flag_quadrature=bool(ratio < 1.0 - FLAG_MARGIN)))
    return AuditReport(float(b), convention, tuple(entries))


# ---------------------------------------------------------------------------
# slow modulation of the mean orbit

@dataclass(frozen=True, eq=False)
class ModulationResult:
    t: np.ndarray
    mean_q: np.ndarray
    mean_p: np.ndarray
    traj_R2: np.ndarray
    mean_R2: np.ndarray
    charge_norm: np.ndarray
    envelope: np.ndarray
    carrier: float
    Omega_est: float
    Omega_pred: float
    Omega_nominal: float
    n_star: int
    flat: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def relative_error(self) -> float:
        return abs(self.Omega_est - self.Omega_pred) / self.Omega_pred


def _peak(signal: np.ndarray, dt: float, lo: float, hi: float, pad: int = 8) -> float:
    """Frequency of the largest Hann-windowed spectral peak in ``(lo, hi)``."""
    n = len(signal)
    nfft = 1 << int(np.ceil(np.log2(n * pad)))
    spec = np.abs(np.fft.rfft(signal * np.hanning(n), nfft))
    omega = 2.0 * np.pi * np.fft.rfftfreq(nfft, dt)
    band = np.flatnonzero((omega > lo) & (omega < hi))
    if band.size == 0:
        raise ValueError("empty search band; increase the duration or the sampling rate")
    j = band[np.argmax(spec[band])]
    if 0 < j < len(spec) - 1:
        y0, y1, y2 = np.log(spec[j - 1: j + 2] + 1e-300)
        den = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    else:
        shift = 0.0
    return float(omega[j] + shift * (omega[1] - omega[0]))


def predicted_modulation(state: EnergyRepState, spec: RotatorSpectrum,
                         em: EpsilonChiMatrix) -> tuple[int, float, float]:
    """``(n_star, second-difference rate, closed-form rate)``.

    The mean-orbit envelope beats lines ``E[n+1] - E[n]`` against their
    neighbours; the strongest beat is centred at ``n_star`` and runs at
    ``|E[n*+1] - 2 E[n*] + E[n*-1]|/hbar``.
    """
    c = state.C_plus
    n = np.arange(state.N - 1)
    w = np.abs(np.diag(em.eps, 1)[: state.N - 1] * np.sqrt(n + 1) * c[:-1] * c[1:])
    beat = w[:-1] * w[1:]
    n_star = int(np.argmax(beat)) + 1
    sc = spec.scales
    second = abs(spec.E[n_star + 1] - 2 * spec.E[n_star] + spec.E[n_star - 1]) / sc.hbar
    closed = sc.Omega * (1.0 + (2 * n_star + 1) * spec.b) ** -1.5
    return n_star, second, closed


@dataclass(frozen=True, eq=False)
class ModulationSetup:
    scales: PhysicalScales
    N: int
    levels: RotatorSpectrum
    em: EpsilonChiMatrix
    state: EnergyRepState
    n_star: int
    omega_second: float
    omega_pred: float

    @property
    def envelope_period(self) -> float:
        return 2.0 * np.pi / self.omega_pred

    def min_samples(self, T: float) -> int:
        """Smallest sample count that resolves the cyclotron carrier over ``T``."""
        return int(np.ceil(1.25 * T * self.scales.omega_c / np.pi)) + 1


def modulation_setup(b: float, R_bar: float, scales: PhysicalScales, *, N: int | None = None,
                     convention: str = "adjacent", harmonic: bool = False) -> ModulationSetup:
    """NLCS packet, levels and predicted envelope rate for :func:`modulation_experiment`."""
    if not b > 0:
        raise ValueError("b must be > 0; use harmonic=True for the undeformed reference")
    sc = PhysicalScales.from_b(b, hbar=scales.hbar, mass=scales.mass, c=scales.c)
    R = R_bar * sc.a
    N = N or max(24, suggest_truncation(NonlinearCoherentSpec(R, 2, convention), sc) + 8)
    nspec = NonlinearCoherentSpec(R, N, convention)
    levels = harmonic_spectrum(N + 2, sc) if harmonic else landau_spectrum(N + 2, sc)
    em = eps_chi_matrix(levels)
    state = nlcs_coefficients(nspec, em, sc)
    n_star, second, closed = predicted_modulation(state, levels, em)
    return ModulationSetup(sc, N, levels, em, state, n_star, second, closed)


def modulation_experiment(b: float, R_bar: float, T: float, samples: int,
                          scales: PhysicalScales, *, N: int | None = None,
                          convention: str = "adjacent",
                          harmonic: bool = False) -> ModulationResult:
    """Time series of the mean orbit and the demodulated envelope frequency.

    ``scales`` supplies ``hbar``, ``m`` and ``c``; ``omega_c`` follows from ``b``.
    ``R_bar`` is in units of the oscillator length ``a``.  With ``harmonic``
    the levels are ``m c^2 + hbar omega_c (n + 1/2)`` (no anharmonicity).
    """
    setup = modulation_setup(b, R_bar, scales, N=N, convention=convention, harmonic=harmonic)
    sc, N, levels, em, state = setup.scales, setup.N, setup.levels, setup.em, setup.state
    n_star, second, closed = setup.n_star, setup.omega_second, setup.omega_pred

    period = setup.envelope_period
    if not harmonic and T < 5.0 * period:
        raise ValueError(f"duration T={T:.6g} covers fewer than 5 envelope periods; "
                         f"need T >= {5.0 * period:.6g}")
    min_samples = setup.min_samples(T)
    if samples < min_samples:
        raise ValueError(f"{samples} samples undersample the carrier omega_c={sc.omega_c:.6g}; "
                         f"need samples >= {min_samples}")

    t = np.linspace(0.0, T, int(samples), endpoint=False)
    dt = t[1] - t[0]
    q = np.empty_like(t)
    p = np.empty_like(t)
    r2 = np.empty_like(t)
    charge = np.empty_like(t)
    for i, ti in enumerate(t):
        st = evolve_energy_rep(state, levels, ti)
        q[i], p[i] = trajectory_observable(st, em, sc)
        r2[i] = radius_observable(st, sc)
        charge[i] = st.charge_norm()

    carrier = _peak(q - q.mean(), dt, 0.25 * sc.omega_c, 4.0 * sc.omega_c)
    # quadrature demodulation: the orbit amplitude is exact at every sample,
    # so no low-pass filter (and no edge leakage) is involved
    traj = trajectory_radius2(q, p, sc)
    envelope = np.sqrt(traj)
    variation = float(np.std(envelope) / np.mean(envelope))
    flat = variation < FLAT_LEVEL
    if flat:
        omega_est = 0.0
    else:
        omega_est = _peak(envelope - envelope.mean(), dt, 2.0 * np.pi / T, 0.25 * sc.omega_c)
    diagnostics = {
        "envelope_variation": variation,
        "omega_second_difference": second,
        "mean_R2_drift": float(np.max(np.abs(r2 - r2[0])) / r2[0]),
        "charge_norm_drift": float(np.max(np.abs(charge - charge[0]))),
        "N": N,
    }
    return ModulationResult(t=t, mean_q=q, mean_p=p, traj_R2=traj, mean_R2=r2,
                            charge_norm=charge, envelope=envelope, carrier=carrier,
                            Omega_est=omega_est, Omega_pred=closed, Omega_nominal=sc.Omega,
                            n_star=n_star, flat=flat, diagnostics=diagnostics)
