"""Batteries of numerical invariants reported by the command-line driver."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import oracle
from .free_particle import FVState, evolve_free, gaussian_amplitude, wigner_components
from .kernel import (PhaseField, PhysicalScales, PolySymbol, commensurate_grid,
                     displacement_elements, fock_diagonal_to_symbol, fock_projection,
                     make_grid, oscillator_grid, quasiprob_elements, star_product, star_sqrt)
from .kernel.grid import q_to_k, k_to_q
from .rotator import (EnergyRepState, eps_chi_matrix, evolve_energy_rep, landau_spectrum,
                      radius_observable)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def as_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _rng():
    return np.random.default_rng(20240611)


def _smooth_field(grid, rng, width=1.2):
    c = rng.normal(size=2) * 0.8
    coef = rng.normal(size=3) + 1j * rng.normal(size=3)
    return PhaseField.from_function(grid, lambda p, q: (coef[0] + coef[1] * q + coef[2] * p)
                                    * np.exp(-((p - c[0]) ** 2 + (q - c[1]) ** 2)
                                             / (2 * width**2)))


def kernels_selftest() -> list[Check]:
    out = []
    rng = _rng()
    sc = PhysicalScales()
    g = make_grid(32, 64, 4.0, 8.0)
    F = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    out.append(Check("transform_round_trip", float(np.max(np.abs(
        k_to_q(q_to_k(F, g), g) - F)) / np.max(np.abs(F))), 1e-12))

    p, q = PolySymbol.p(), PolySymbol.q()
    qp = star_product(q, p, sc).coef
    out.append(Check("q_star_p", float(abs(qp[1, 1] - 1) + abs(qp[0, 0] - 0.5j)), 1e-12))
    pp = PolySymbol.monomial(2, 0)
    qq = PolySymbol.monomial(0, 2)
    r = star_product(pp, qq, sc).coef
    ref = np.zeros((3, 3), complex)
    ref[2, 2], ref[1, 1], ref[0, 0] = 1, -2j, -0.5
    out.append(Check("p2_star_q2", float(np.max(np.abs(r - ref))), 1e-12))

    cg = commensurate_grid(64, sc)
    A, B, C = (_smooth_field(cg, rng) for _ in range(3))
    left = star_product(star_product(A, B, sc), C, sc).values
    right = star_product(A, star_product(B, C, sc), sc).values
    out.append(Check("associativity", float(np.max(np.abs(left - right)) /
                                           np.max(np.abs(left))), 1e-9))
    AB = star_product(A, B, sc).values
    BcAc = star_product(B.conj(), A.conj(), sc).values
    out.append(Check("star_conjugation", float(np.max(np.abs(AB.conj() - BcAc)) /
                                              np.max(np.abs(AB))), 1e-10))
    ref_int = oracle.star_product_integral(A, B, sc).values
    out.append(Check("star_vs_integral_oracle", float(np.max(np.abs(AB - ref_int)) /
                                                     np.max(np.abs(ref_int))), 1e-8))

    for b in (0.01, 0.1):
        so = PhysicalScales.from_b(b)
        og = oscillator_grid(64, so)
        Hs = PhaseField.from_function(
            og, lambda p, q: 1 + (2 / so.rest_energy) * (p * p / (2 * so.mass)
                                                         + so.mass * so.omega_c**2 * q * q / 2))
        X = star_sqrt(Hs, so, tol=1e-8, N=24)
        eig = fock_projection(X, 17, so, diagonals=1).diagonal().real
        ref = np.sqrt(1 + (2 * np.arange(17) + 1) * b)
        out.append(Check(f"star_sqrt_spectrum_b{b}", float(np.max(np.abs(eig / ref - 1))), 1e-8))
        out.append(Check(f"star_sqrt_residual_b{b}", X._meta["residual"], 1e-8))

    so = PhysicalScales.from_b(0.1)
    og = oscillator_grid(64, so)
    ident = fock_diagonal_to_symbol(np.ones(32), og, so)
    out.append(Check("identity_symbol", float(np.max(np.abs(ident.values - 1))), 1e-8))
    osc = fock_diagonal_to_symbol(so.hbar * so.omega_c * (np.arange(32) + 0.5), og, so)
    P, Q = og.mesh()
    Hc = P**2 / (2 * so.mass) + so.mass * so.omega_c**2 * Q**2 / 2
    out.append(Check("oscillator_symbol", float(np.max(np.abs(osc.values - Hc))
                                                / np.max(np.abs(Hc))), 1e-8))

    D = displacement_elements(0.7 * so.p_unit, -1.1 * so.a, 64, so)
    out.append(Check("displacement_unitarity", D.unitarity_defect(guard=24), 1e-10))
    Dm = displacement_elements(-0.7 * so.p_unit, 1.1 * so.a, 64, so)
    out.append(Check("displacement_adjoint", float(np.max(np.abs(
        (Dm.entries - D.adjoint().entries)[:40, :40]))), 1e-10))
    T = quasiprob_elements(0.3 * so.p_unit, 0.8 * so.a, 12, so).entries
    out.append(Check("quasiprob_hermitian", float(np.max(np.abs(T - T.conj().T))), 1e-14))
    return out


def oracle_verify() -> list[Check]:
    out = []
    so = PhysicalScales.from_b(0.1)
    worst = 0.0
    for P, Q in ((0.3, -1.2), (1.1 * so.p_unit, 0.7 * so.a), (-0.5 * so.p_unit, 2 * so.a)):
        D = displacement_elements(P, Q, 10, so).entries
        for m in range(10):
            for n in range(10):
                worst = max(worst, abs(D[m, n] - oracle.quad_displacement(m, n, P, Q, so)))
    out.append(Check("displacement_vs_quadrature", worst, 1e-9))

    worst = 0.0
    pts = ((0.1, 0.4), (-0.7, 1.1), (1.3, -2.0))
    for y, x in pts:
        T = quasiprob_elements(y * so.p_unit, x * so.a, 8, so).entries
        for m in range(8):
            for n in range(8):
                ref = oracle.quad_quasiprob(m, n, y * so.p_unit, x * so.a, so)
                worst = max(worst, abs(T[m, n] - ref))
    out.append(Check("quasiprob_vs_quadrature", float(worst), 1e-9))

    spec = landau_spectrum(16, so)
    st = EnergyRepState.from_levels(16, {0: 0.6, 1: 0.5j, 3: 0.2}, {0: 0.4, 2: -0.3})
    t = 17.3
    ev = evolve_energy_rep(st, spec, t)
    cp, cm = oracle.dense_evolution(st.C_plus, st.C_minus, spec.E, t, so.hbar)
    out.append(Check("energy_rep_vs_dense_evolution",
                     float(max(np.max(np.abs(ev.C_plus - cp)), np.max(np.abs(ev.C_minus - cm)))),
                     1e-13))
    R2 = oracle.dense_radius2(16, so)
    dense = (R2.expectation(st.C_plus) + R2.expectation(st.C_minus)).real
    out.append(Check("radius_vs_dense", abs(radius_observable(st, so) - dense) / dense, 1e-12))

    sc = PhysicalScales()
    g = make_grid(128, 256, 6.0, 32.0)
    psi_p = gaussian_amplitude(g.p, 0.3, 0.5, -2.0)
    psi_m = 0.5 * gaussian_amplitude(g.p, -0.4, 0.4, 3.0)
    state = FVState(g, psi_p, psi_m)
    W0 = wigner_components(state, sc)
    for t in (1.0, 10.0):
        a, b = oracle.wavefunction_evolution_free(psi_p, psi_m, g.p, t, sc)
        lhs = wigner_components(FVState(g, a, b), sc)
        out.append(Check(f"free_commuting_square_t{t:g}", lhs.max_deviation(evolve_free(W0, t, sc)),
                         1e-10))

    cg = commensurate_grid(32, sc)
    A = PhaseField.from_function(cg, lambda p, q: np.exp(-0.3 * (p * p + q * q)))
    B = PhaseField.from_function(cg, lambda p, q: np.exp(-0.5 * (p * p + q * q)))
    P, Q = cg.mesh()
    ref = oracle.gaussian_star_gaussian(0.3, 0.5, P, Q)
    out.append(Check("gaussian_star_integral", float(np.max(np.abs(
        oracle.star_product_integral(A, B, sc).values - ref))), 1e-8))
    one = PhaseField.from_function(cg, lambda p, q: np.ones_like(p * q))
    out.append(Check("identity_star_integral", float(np.max(np.abs(
        oracle.star_product_integral(one, A, sc).values - A.values))), 1e-12))

    dense = oracle.dense_sqrt_spectrum(0.1, 34)[:17]
    out.append(Check("dense_sqrt_spectrum", float(np.max(np.abs(
        dense / landau_spectrum(17, so).E - 1))), 1e-10))
    em = eps_chi_matrix(landau_spectrum(64, so))
    out.append(Check("eps_chi_hyperbolic", em.defects()["hyperbolic"], 1e-13))
    return out
