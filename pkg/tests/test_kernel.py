"""Grid, special functions, Fock matrix elements and the star-product engine."""
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre

from fvwigner import oracle
from fvwigner.kernel import (BoundaryDecayWarning, ConvergenceError, DomainError,
                             GridMismatchError, PhaseField, PhysicalScales, PolySymbol,
                             commensurate_grid, displacement_elements, fock_diagonal_to_symbol,
                             fock_projection, fock_to_wigner, hermite_functions, laguerre,
                             laguerre_table, make_grid, newton_coefficients, oscillator_grid,
                             quasiprob_elements, star_product, star_sqrt)
from fvwigner.kernel.grid import k_to_q, q_to_k

# <0|D|0> at Q = -1.1 a, P = 0.7 hbar/a (mpmath quadrature of displaced ground states)
D00_FROZEN = 0.65376978512984727101


# ---------------------------------------------------------------------------
# grid

@pytest.mark.parametrize("args, attr, value", [
    ((8, 8, 1.0, 1.0), "dp", 0.25),
    ((8, 16, 1.0, 2.0), "dq", 0.25),
    ((8, 16, 1.0, 2.0), "dp", 0.25),
])
def test_grid_spacing(args, attr, value):
    assert getattr(make_grid(*args), attr) == pytest.approx(value, abs=0)


@pytest.mark.parametrize("args", [(7, 8, 1, 1), (8, 6, 1, 1), (8, 8, 0, 1), (8, 8, 1, -2)])
def test_grid_rejects_bad_shape(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_grid_axes_are_centred():
    g = make_grid(8, 16, 1.0, 2.0)
    assert g.p[g.n_p // 2] == 0.0 and g.q[g.n_q // 2] == 0.0
    assert g.q[0] == -2.0


def test_transform_round_trip(rng):
    g = make_grid(32, 64, 3.0, 7.0)
    F = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    assert np.max(np.abs(k_to_q(q_to_k(F, g), g) - F)) <= 1e-12 * np.max(np.abs(F))
    f = PhaseField(g, F)
    assert np.max(np.abs(f.to_mixed().to_direct().values - F)) <= 1e-12 * np.max(np.abs(F))


def test_commensurate_grid_cell(field_scales):
    g = oscillator_grid(48, field_scales)
    assert g.is_commensurate(field_scales.hbar)
    assert g.cell == pytest.approx(2 * np.pi * field_scales.hbar / 48, rel=1e-14)
    # isotropic in oscillator units
    assert g.q_extent / field_scales.a == pytest.approx(g.p_extent / field_scales.p_unit)
    assert not make_grid(48, 48, 1.0, 1.0).is_commensurate(1.0)


def test_scales_guards():
    with pytest.raises(ValueError, match="omega_c must be >= 0"):
        PhysicalScales(omega_c=-1.0)
    with pytest.raises(ValueError):
        PhysicalScales(hbar=0.0)
    with pytest.raises(ValueError, match="omega_c > 0"):
        PhysicalScales().a2
    sc = PhysicalScales(hbar=2.0, mass=0.5, c=3.0, omega_c=4.0)
    assert sc.a2 == pytest.approx(2.0 / (0.5 * 4.0))
    assert sc.b == pytest.approx(2.0 * 4.0 / (0.5 * 9.0))
    assert sc.Omega == pytest.approx(2.0 * 16.0 / (0.5 * 9.0))


# ---------------------------------------------------------------------------
# special functions

@pytest.mark.parametrize("alpha", [0, 1, 3])
def test_laguerre_low_orders(alpha):
    x = np.linspace(0, 5, 11)
    assert np.all(laguerre(0, alpha, x) == 1.0)
    assert np.allclose(laguerre(1, alpha, x), 1 + alpha - x, atol=0, rtol=1e-15)


def test_laguerre_value():
    assert laguerre(2, 0, 2.0) == pytest.approx(-1.0, abs=1e-15)


@given(n=st.integers(0, 40), alpha=st.integers(0, 12), x=st.floats(0.0, 30.0))
def test_laguerre_matches_scipy(n, alpha, x):
    ref = eval_genlaguerre(n, alpha, x)
    assert laguerre(n, alpha, x) == pytest.approx(ref, rel=1e-9, abs=1e-9 * (1 + abs(ref)))


def test_laguerre_table_rows():
    x = np.linspace(0, 8, 17)
    tab = laguerre_table(12, 2, x)
    for n in range(12):
        assert np.allclose(tab[n], laguerre(n, 2, x), rtol=1e-13, atol=1e-13)


def test_laguerre_domain():
    with pytest.raises(ValueError):
        laguerre(-1, 0, 1.0)
    with pytest.raises(ValueError):
        laguerre(2, -3, 1.0)


def test_hermite_functions_orthonormal():
    x = np.linspace(-20, 20, 4001)
    phi = hermite_functions(40, x)
    gram = phi @ phi.T * (x[1] - x[0])
    assert np.max(np.abs(gram - np.eye(40))) < 1e-12


# ---------------------------------------------------------------------------
# Fock matrix elements

def test_displacement_identity(field_scales):
    D = displacement_elements(0.0, 0.0, 12, field_scales).entries
    assert np.array_equal(D, np.eye(12))


def test_displacement_ground_element(field_scales):
    D = displacement_elements(0.7 * field_scales.p_unit, -1.1 * field_scales.a, 4, field_scales)
    assert D.entries[0, 0] == pytest.approx(D00_FROZEN, abs=1e-15)


@pytest.mark.parametrize("beta", [0.3, 1.0 + 0.5j, -1.2 + 1.4j, 2.0j])
def test_displacement_column_norms(field_scales, beta):
    """Columns well inside the truncation have unit norm at N = 64."""
    sc = field_scales
    Q = np.sqrt(2.0) * beta.real * sc.a
    P = np.sqrt(2.0) * np.imag(beta) * sc.p_unit
    D = displacement_elements(P, Q, 64, sc).entries
    norms = np.sum(np.abs(D) ** 2, axis=0)
    assert np.max(np.abs(norms[:20] - 1.0)) <= 1e-10


def test_displacement_adjoint(field_scales):
    sc = field_scales
    D = displacement_elements(0.4 * sc.p_unit, 0.9 * sc.a, 40, sc)
    Dm = displacement_elements(-0.4 * sc.p_unit, -0.9 * sc.a, 40, sc)
    assert np.max(np.abs(Dm.entries - D.adjoint().entries)) < 1e-14


@pytest.mark.parametrize("N", [1, 2.5])
def test_fock_truncation_guard(field_scales, N):
    with pytest.raises(ValueError):
        displacement_elements(0.0, 0.0, N, field_scales)


def test_quasiprob_ground_state(field_scales):
    sc = field_scales
    for p, q in [(0.0, 0.0), (0.3, -1.7), (-0.2, 4.0)]:
        T = quasiprob_elements(p, q, 3, sc).entries[0, 0]
        ref = np.exp(-q * q / sc.a2 - p * p * sc.a2 / sc.hbar**2) / (np.pi * sc.hbar)
        assert T == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("n", range(9))
def test_quasiprob_trace(field_scales, n):
    g = oscillator_grid(64, field_scales)
    rho = np.zeros((n + 1, n + 1))
    rho[n, n] = 1.0
    W = fock_to_wigner(rho, g, field_scales)
    assert W.integrate() == pytest.approx(1.0, abs=1e-12)


def test_quasiprob_orthogonality(field_scales):
    """``int T[m,n] conj(T[m',n']) = delta delta / (2 pi hbar)`` for ``m, n <= 4``.

    Grid 64 wraps at about 10 a, where ``T[4, 4]`` has not yet decayed; 80 is clean.
    """
    sc = field_scales
    g = oscillator_grid(80, sc)
    fields = {}
    for m in range(5):
        for n in range(5):
            rho = np.zeros((5, 5))
            rho[m, n] = 1.0
            fields[m, n] = fock_to_wigner(rho, g, sc).values
    keys = list(fields)
    gram = np.array([[np.sum(fields[i] * fields[j].conj()) * g.cell for j in keys] for i in keys])
    assert np.max(np.abs(gram * 2 * np.pi * sc.hbar - np.eye(len(keys)))) < 1e-12


def test_quasiprob_hermitian_pairs(field_scales):
    T = quasiprob_elements(0.4, -0.8, 10, field_scales).entries
    assert np.array_equal(T, T.conj().T)


def test_fock_projection_inverts_fock_to_wigner(field_scales, rng):
    sc = field_scales
    g = oscillator_grid(80, sc)
    rho = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    W = fock_to_wigner(rho, g, sc)
    # W is a density, so its operator is sum rho[m, n] |m><n| / (2 pi hbar)
    back = fock_projection(W, 6, sc) * 2 * np.pi * sc.hbar
    assert np.max(np.abs(back - rho)) < 1e-11


# ---------------------------------------------------------------------------
# Fock-diagonal symbols

def _inside(grid, sc, h_max):
    P, Q = grid.mesh()
    return (Q**2 / sc.a2 + P**2 / sc.p_unit**2) / 2.0 <= h_max


def test_identity_symbol(field_scales):
    g = oscillator_grid(64, field_scales)
    s = fock_diagonal_to_symbol(np.ones(32), g, field_scales)
    mask = np.broadcast_to(_inside(g, field_scales, 4.0), g.shape)
    assert np.max(np.abs(s.values[mask] - 1.0)) <= 1e-8


def test_oscillator_symbol(field_scales):
    sc = field_scales
    g = oscillator_grid(64, sc)
    f = sc.hbar * sc.omega_c * (np.arange(32) + 0.5)
    s = fock_diagonal_to_symbol(f, g, sc)
    P, Q = g.mesh()
    H = P**2 / (2 * sc.mass) + sc.mass * sc.omega_c**2 * Q**2 / 2
    assert np.max(np.abs(s.values - H)) <= 1e-8 * np.max(np.abs(H))


def test_parity_partial_sum_matches_quadrature(field_scales):
    """Truncated sum for ``f_n = (-1)^n`` against the quadrature Wigner kernels."""
    sc = field_scales
    N = 12
    g = oscillator_grid(32, sc)
    f = (-1.0) ** np.arange(N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s = fock_diagonal_to_symbol(f, g, sc, method="truncated")
    idx = [(16, 16), (18, 13), (20, 21), (11, 16)]
    for i, j in idx:
        p, q = g.p[i], g.q[j]
        ref = 2 * np.pi * sc.hbar * sum(f[n] * oracle.quad_quasiprob(n, n, p, q, sc)
                                        for n in range(N))
        assert s.values[i, j] == pytest.approx(complex(ref), abs=1e-10)


def test_newton_series_terminates_for_polynomials():
    n = np.arange(20.0)
    d = newton_coefficients(3 * n**2 - n + 2)
    assert d[:3] == pytest.approx([2.0, 2.0, 6.0])
    assert np.all(d[3:] == 0.0)


def test_unknown_symbol_method(field_scales):
    with pytest.raises(ValueError):
        fock_diagonal_to_symbol(np.ones(4), oscillator_grid(16, field_scales), field_scales,
                                method="nope")


# ---------------------------------------------------------------------------
# star product

@pytest.mark.parametrize("A, B, expected", [
    (PolySymbol.q(), PolySymbol.p(), {(1, 1): 1.0, (0, 0): 0.5j}),
    (PolySymbol.q(), PolySymbol.q(), {(0, 2): 1.0}),
    (PolySymbol.monomial(2, 0), PolySymbol.monomial(0, 2),
     {(2, 2): 1.0, (1, 1): -2j, (0, 0): -0.5}),
])
def test_polynomial_star_identities(unit_scales, A, B, expected):
    got = star_product(A, B, unit_scales).coef
    ref = np.zeros_like(got)
    for (i, j), v in expected.items():
        ref[i, j] = v
    assert np.max(np.abs(got - ref)) <= 1e-12


def test_polynomial_star_carries_hbar():
    sc = PhysicalScales(hbar=0.3)
    got = star_product(PolySymbol.p(), PolySymbol.q(), sc).coef
    assert got[0, 0] == pytest.approx(-0.15j) and got[1, 1] == 1.0


def _band_limited(grid, rng, width=1.0):
    """Gaussian times a linear polynomial, decayed well inside a 64-point unit-scale grid."""
    c = np.clip(rng.normal(size=2) * 0.8, -1.5, 1.5)
    coef = rng.normal(size=3) + 1j * rng.normal(size=3)
    return PhaseField.from_function(grid, lambda p, q: (coef[0] + coef[1] * q + coef[2] * p)
                                    * np.exp(-((p - c[0]) ** 2 + (q - c[1]) ** 2)
                                             / (2 * width**2)))


@given(seed=st.integers(0, 2**32 - 1))
def test_star_associativity(seed):
    sc = PhysicalScales()
    rng = np.random.default_rng(seed)
    g = commensurate_grid(64, sc)
    A, B, C = (_band_limited(g, rng) for _ in range(3))
    left = star_product(star_product(A, B, sc), C, sc).values
    right = star_product(A, star_product(B, C, sc), sc).values
    scale = A.max_abs() * B.max_abs() * C.max_abs()
    assert np.max(np.abs(left - right)) <= 1e-10 * scale


@given(seed=st.integers(0, 2**32 - 1))
def test_star_conjugation(seed):
    """``conj(A * B) = conj(B) * conj(A)``."""
    sc = PhysicalScales()
    rng = np.random.default_rng(seed)
    g = commensurate_grid(64, sc)
    A, B = _band_limited(g, rng), _band_limited(g, rng)
    lhs = star_product(A, B, sc).values.conj()
    rhs = star_product(B.conj(), A.conj(), sc).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * A.max_abs() * B.max_abs()


def test_star_poly_times_field_matches_kernel(unit_scales, rng):
    """``q * F`` through spectral derivatives equals ``qF + (i hbar/2) dF/dp``."""
    sc = unit_scales
    g = commensurate_grid(64, sc)
    w = 1.1
    F = PhaseField.from_function(g, lambda p, q: np.exp(-(p * p + q * q) / (2 * w * w)))
    got = star_product(PolySymbol.q(), F, sc).values
    P, Q = g.mesh()
    ref = Q * F.values + 0.5j * sc.hbar * (-P / w**2) * F.values
    assert np.max(np.abs(got - ref)) < 1e-12


def test_star_product_grid_mismatch(unit_scales):
    g1 = commensurate_grid(32, unit_scales)
    g2 = commensurate_grid(48, unit_scales)
    with pytest.raises(GridMismatchError):
        star_product(PhaseField.zeros(g1), PhaseField.zeros(g2), unit_scales)
    bad = make_grid(32, 32, 3.0, 3.0)
    F = PhaseField.from_function(bad, lambda p, q: np.exp(-(p * p + q * q)))
    with pytest.raises(GridMismatchError):
        star_product(F, F, unit_scales, check=False)


def test_star_product_warns_on_undecayed_operand(unit_scales):
    g = commensurate_grid(32, unit_scales)
    F = PhaseField.from_function(g, lambda p, q: np.ones_like(p * q))
    with pytest.warns(BoundaryDecayWarning):
        star_product(F, F, unit_scales)


# ---------------------------------------------------------------------------
# star square root

def _shifted_oscillator(grid, sc, b_scale):
    mc2 = sc.rest_energy
    return PhaseField.from_function(grid, lambda p, q: 1 + b_scale * (2 / mc2) * (
        p * p / (2 * sc.mass) + sc.mass * sc.omega_c**2 * q * q / 2))


def test_star_sqrt_constant(field_scales):
    g = oscillator_grid(64, field_scales)
    X = star_sqrt(PhaseField.from_function(g, lambda p, q: 4.0 + 0 * p * q), field_scales)
    mask = np.broadcast_to(_inside(g, field_scales, 4.0), g.shape)
    assert np.max(np.abs(X.values[mask] - 2.0)) <= 1e-8


def test_star_sqrt_identity(field_scales):
    g = oscillator_grid(64, field_scales)
    X = star_sqrt(fock_diagonal_to_symbol(np.ones(24), g, field_scales), field_scales)
    mask = np.broadcast_to(_inside(g, field_scales, 4.0), g.shape)
    assert np.max(np.abs(X.values[mask] - 1.0)) <= 1e-8


def test_star_sqrt_eigenvalues_against_dense_oracle(field_scales):
    """Fock eigenvalues of sqrt(1 + 2b H) against the dense matrix square root, n <= 10."""
    sc = field_scales
    g = oscillator_grid(64, sc)
    X = star_sqrt(_shifted_oscillator(g, sc, 1.0), sc)
    eig = fock_projection(X, 11, sc, diagonals=1).diagonal().real
    dense = oracle.dense_sqrt_spectrum(sc.b, 40)[:11]
    assert np.max(np.abs(eig / dense - 1)) <= 1e-8


def test_star_sqrt_squares_back(field_scales):
    sc = field_scales
    g = oscillator_grid(64, sc)
    A = _shifted_oscillator(g, sc, 1.0)
    X = star_sqrt(A, sc)
    XX = star_product(X, X, sc)
    mask = np.broadcast_to(_inside(g, sc, 4.0), g.shape)
    assert np.max(np.abs(XX.values[mask] - A.values[mask])) <= 1e-8 * np.max(np.abs(A.values))


def test_star_sqrt_domain_error(field_scales):
    g = oscillator_grid(64, field_scales)
    with pytest.raises(DomainError):
        star_sqrt(_shifted_oscillator(g, field_scales, -1.0), field_scales)


def test_star_sqrt_convergence_error(field_scales):
    g = oscillator_grid(64, field_scales)
    f = np.arange(24.0)  # sqrt(n) has a slowly decaying Newton series
    with pytest.raises(ConvergenceError) as info:
        star_sqrt(fock_diagonal_to_symbol(f, g, field_scales, tol=np.inf), field_scales)
    assert info.value.tail > 1e-8


def test_star_sqrt_rejects_off_diagonal(field_scales):
    g = oscillator_grid(64, field_scales)
    sc = field_scales
    A = PhaseField.from_function(g, lambda p, q: 2.0 + np.exp(-(q / sc.a - 1.0) ** 2
                                                           - (p / sc.p_unit) ** 2))
    with pytest.raises(ValueError, match="not Fock diagonal"):
        star_sqrt(A, sc)
