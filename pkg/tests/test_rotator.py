"""Rotator spectrum, energy-representation components and Moyal flows."""
import numpy as np
import pytest

from fvwigner import oracle
from fvwigner.kernel import PhysicalScales, make_grid, oscillator_grid, quasiprob_elements
from fvwigner.rotator import (EnergyRepState, check_resolution, eps_chi_matrix,
                              evolve_energy_rep, evolve_moyal_rotator, hamiltonian_symbol,
                              harmonic_spectrum, kernel_hermiticity_defect, landau_spectrum,
                              min_moyal_steps, radius_observable, trajectory_observable,
                              wigner_energy_rep)

SC = PhysicalScales.from_b(0.1)

# b = 0.1, hbar = m = c = 1 (mpmath)
E0_FROZEN = 1.048808848170151547
EPS10_FROZEN = 1.0008722226159813166
CHI10_FROZEN = 0.041775662822443193702
# worst |d2 E / (-b^2 (1 + (2n+1) b)^(-3/2)) - 1| over 1 <= n <= 20 at b = 0.01
SECOND_DIFF_DEV_FROZEN = 1.1785e-4


def _mixed_state(N=16):
    return EnergyRepState.from_levels(N, {0: 0.6, 1: 0.5j}, {0: 0.4, 1: -0.3}).normalized()


def test_landau_ground_level():
    spec = landau_spectrum(4, SC)
    assert spec.E[0] == pytest.approx(E0_FROZEN, rel=1e-15)
    assert spec.E[1] == pytest.approx(np.sqrt(1.3), rel=1e-15)


def test_landau_rest_energy_scaling():
    sc = PhysicalScales(mass=2.0, c=3.0, omega_c=0.9)  # b = 0.05
    spec = landau_spectrum(3, sc)
    assert spec.b == pytest.approx(0.05)
    assert spec.E == pytest.approx(18.0 * np.sqrt(1 + 0.05 * np.array([1, 3, 5])), rel=1e-15)


@pytest.mark.parametrize("N, b", [(1, 0.1), (2.5, 0.1), (4, -0.1), (4, np.nan)])
def test_landau_guards(N, b):
    with pytest.raises(ValueError):
        landau_spectrum(N, SC, b)


def test_second_difference_approaches_harmonic_curvature():
    b = 0.01
    spec = landau_spectrum(22, PhysicalScales.from_b(b))
    n = np.arange(1, 21)
    approx = -b**2 * (1 + (2 * n + 1) * b) ** -1.5
    dev = np.max(np.abs(spec.second_difference / approx - 1))
    assert dev <= 2e-4
    assert dev == pytest.approx(SECOND_DIFF_DEV_FROZEN, rel=1e-4)


def test_harmonic_spectrum_is_linear():
    spec = harmonic_spectrum(10, SC)
    assert np.allclose(np.diff(spec.E), SC.hbar * SC.omega_c, rtol=0, atol=1e-15)


def test_eps_chi_matrix_values():
    em = eps_chi_matrix(landau_spectrum(12, SC))
    assert em.eps[1, 0] == pytest.approx(EPS10_FROZEN, rel=1e-15)
    assert em.chi[1, 0] == pytest.approx(CHI10_FROZEN, rel=1e-14)
    assert max(em.defects().values()) < 1e-14


def test_ground_state_is_quasiprob_kernel():
    grid = oscillator_grid(64, SC)
    state = EnergyRepState.from_levels(8, {0: 1.0})
    W = wigner_energy_rep(state, eps_chi_matrix(landau_spectrum(8, SC)), grid, SC).to_direct()
    i, j = 20, 37
    T00 = quasiprob_elements(grid.p[i], grid.q[j], 2, SC).entries[0, 0]
    assert W.even_plus.values[i, j] == pytest.approx(T00, rel=1e-13)
    assert not np.any(W.odd_plus.values) and not np.any(W.even_minus.values)


def test_undeformed_limit_matches_quadrature_wigner():
    """At b = 0 the pair weights are 1 and the even part is the standard Wigner function."""
    rng = np.random.default_rng(7)
    c = np.zeros(10, complex)
    c[:6] = rng.normal(size=6) + 1j * rng.normal(size=6)
    c /= np.linalg.norm(c)
    em = eps_chi_matrix(landau_spectrum(10, SC, b=0.0))
    assert np.all(em.eps == 1.0) and not np.any(em.chi)
    grid = oscillator_grid(32, SC)
    W = wigner_energy_rep(EnergyRepState(c, np.zeros(10)), em, grid, SC)
    for i, j in [(16, 16), (13, 20), (18, 9), (21, 15)]:
        ref = complex(oracle.quad_wigner(c, grid.p[i], grid.q[j], SC))
        assert W.even_plus.values[i, j] == pytest.approx(ref, abs=1e-12)
    assert not np.any(W.odd_plus.values)


def test_mixed_charge_structure():
    grid = oscillator_grid(64, SC)
    W = wigner_energy_rep(_mixed_state(), eps_chi_matrix(landau_spectrum(16, SC)), grid, SC)
    d = W.structure_defects()
    assert d["even_imag"] < 1e-14 and d["odd_antisymmetry"] < 1e-14
    assert W.charge_norm() == pytest.approx(_mixed_state().charge_norm(), abs=1e-12)


@pytest.mark.parametrize("t", [0.0, 3.0, 17.5])
def test_energy_rep_matches_dense_evolution(t):
    spec = landau_spectrum(16, SC)
    s0 = _mixed_state()
    s1 = evolve_energy_rep(s0, spec, t)
    cp, cm = oracle.dense_evolution(s0.C_plus, s0.C_minus, spec.E, t)
    assert np.max(np.abs(s1.C_plus - cp)) < 1e-13
    assert np.max(np.abs(s1.C_minus - cm)) < 1e-13


def test_trajectory_oscillates_at_level_spacing():
    spec = landau_spectrum(8, SC)
    em = eps_chi_matrix(spec)
    s0 = EnergyRepState.from_levels(8, {0: 0.8, 1: 0.6})
    w = (spec.E[1] - spec.E[0]) / SC.hbar
    amp = np.sqrt(2.0) * SC.a * EPS10_FROZEN * 0.48
    for t in np.linspace(0, 2 * np.pi / w, 7):
        q, p = trajectory_observable(evolve_energy_rep(s0, spec, t), em, SC)
        assert q == pytest.approx(amp * np.cos(w * t), abs=1e-12)
        assert p == pytest.approx(-amp * SC.p_unit / SC.a * np.sin(w * t), abs=1e-12)
        assert radius_observable(evolve_energy_rep(s0, spec, t), SC) == pytest.approx(
            SC.a2 * (0.64 + 3 * 0.36), rel=1e-14)


def test_harmonic_spectrum_rotates_rigidly():
    """A quarter period of the linear spectrum maps W(q, p) to W(-p/(m w), m w q)."""
    grid = oscillator_grid(64, SC)
    spec = harmonic_spectrum(16, SC)
    em = eps_chi_matrix(spec)
    rng = np.random.default_rng(3)
    c = np.zeros(16, complex)
    c[:5] = rng.normal(size=5) + 1j * rng.normal(size=5)
    s0 = EnergyRepState(c / np.linalg.norm(c), np.zeros(16))
    W0 = wigner_energy_rep(s0, em, grid, SC).even_plus.values
    quarter = 0.5 * np.pi / SC.omega_c
    Wt = wigner_energy_rep(evolve_energy_rep(s0, spec, quarter), em, grid, SC).even_plus.values
    # interior samples [1:, 1:] are symmetric about the origin; axes are (p, q)
    inner0, innert = W0[1:, 1:], Wt[1:, 1:]
    # Wt[p_i, q_j] = W0[p = m w q_j, q = -p_i/(m w)]
    expected = inner0.T[::-1]
    assert np.max(np.abs(innert - expected)) < 1e-13 * np.max(np.abs(inner0))


@pytest.mark.parametrize("n", [0, 1, 4])
def test_radius_of_fock_level(n):
    grid = oscillator_grid(64, SC)
    state = EnergyRepState.from_levels(8, {n: 1.0})
    W = wigner_energy_rep(state, eps_chi_matrix(landau_spectrum(8, SC)), grid, SC)
    assert radius_observable(W, SC) == pytest.approx(SC.a2 * (2 * n + 1), rel=1e-12)
    assert radius_observable(state, SC) == pytest.approx(SC.a2 * (2 * n + 1), rel=1e-15)


def test_radius_dense_oracle():
    s = _mixed_state()
    dense = oracle.dense_radius2(17, SC)
    v = np.concatenate([s.C_plus, [0]])
    w = np.concatenate([s.C_minus, [0]])
    ref = dense.expectation(v).real + dense.expectation(w).real
    assert radius_observable(s, SC) == pytest.approx(ref, rel=1e-14)


def test_moyal_flow_short_time():
    N = 8
    grid = oscillator_grid(80, SC)
    spec = landau_spectrum(N, SC)
    em = eps_chi_matrix(spec)
    s0 = EnergyRepState.from_levels(N, {0: 0.6, 1: 0.5j}, {0: 0.4, 1: -0.3}).normalized()
    W0 = wigner_energy_rep(s0, em, grid, SC)
    H = hamiltonian_symbol(landau_spectrum(24, SC), grid)
    t = 0.25 * 2 * np.pi / (spec.E[1] - spec.E[0])
    res = evolve_moyal_rotator(W0, H, t, 128, SC)
    ref = wigner_energy_rep(evolve_energy_rep(s0, spec, t), em, grid, SC)
    dev = res.W.relative_deviation(ref)
    assert dev <= 1e-6
    assert res.error_estimate <= 1e-6
    assert res.W.structure_defects()["even_imag"] < 1e-10


def test_moyal_step_bound_guard():
    grid = oscillator_grid(64, SC)
    spec = landau_spectrum(8, SC)
    W0 = wigner_energy_rep(EnergyRepState.from_levels(8, {0: 1.0}), eps_chi_matrix(spec),
                           grid, SC)
    H = hamiltonian_symbol(landau_spectrum(24, SC), grid)
    t = 2 * np.pi / (spec.E[1] - spec.E[0])
    need = min_moyal_steps(H, t, SC)
    with pytest.raises(ValueError, match=f"use steps >= {need}"):
        evolve_moyal_rotator(W0, H, t, need - 1, SC)
    res = evolve_moyal_rotator(W0, H, t, need, SC, estimate_error=False)
    assert res.step_bound <= 2.5
    with pytest.raises(ValueError):
        evolve_moyal_rotator(W0, H, t, 0, SC)
    with pytest.raises(TypeError):
        evolve_moyal_rotator(W0, W0.even_plus, t, need, SC)


def test_kernel_hermiticity_needs_room_to_decay():
    """Grid 64 wraps where the N = 16 kernels are still near 1e-9; 96 leaves rounding only."""
    spec = landau_spectrum(16, SC)
    em = eps_chi_matrix(spec)
    W64 = wigner_energy_rep(_mixed_state(), em, oscillator_grid(64, SC), SC)
    W96 = wigner_energy_rep(_mixed_state(), em, oscillator_grid(96, SC), SC)
    assert kernel_hermiticity_defect(W64, SC) > 1e-10
    assert kernel_hermiticity_defect(W96, SC) < 1e-13


def test_state_guards():
    with pytest.raises(ValueError, match="increase N"):
        EnergyRepState(np.ones(4), np.zeros(4))
    with pytest.raises(ValueError, match="zero norm"):
        EnergyRepState(np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        EnergyRepState(np.ones(4), np.zeros(3))


def test_resolution_guard():
    grid = make_grid(32, 32, 2.0 * SC.p_unit, 2.0 * SC.a)
    with pytest.raises(ValueError, match="under-resolves"):
        check_resolution(grid, 16, SC)
    with pytest.raises(ValueError, match="under-resolves"):
        wigner_energy_rep(_mixed_state(), eps_chi_matrix(landau_spectrum(16, SC)), grid, SC)
