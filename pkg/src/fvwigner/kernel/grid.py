"""Physical scales, periodic phase-space grids and fields sampled on them.

Array layout is ``values[i_p, i_q]``: axis 0 runs over momentum, axis 1 over
position.  Grid coordinates are centred, ``x_j = (j - n/2) * dx``, so the
origin sits at index ``n/2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DIRECT = "direct"
MIXED = "mixed"

BOUNDARY_DECAY = 1e-10


class BoundaryDecayWarning(UserWarning):
    """A field does not decay to the required level at the grid boundary."""

    def __init__(self, message: str, tail_ratio: float):
        super().__init__(message)
        self.tail_ratio = tail_ratio


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalScales:
    """Physical constants of a run.

    ``omega_c`` is the cyclotron frequency; the charge and field strength only
    enter through it.  All other entries must be strictly positive.
    """

    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0
    omega_c: float = 0.0

    def __post_init__(self):
        for name in ("hbar", "mass", "c"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be > 0, got {val!r}")
        if not np.isfinite(self.omega_c) or self.omega_c < 0:
            raise ValueError(f"omega_c must be >= 0, got {self.omega_c!r}")

    @classmethod
    def from_b(cls, b: float, hbar=1.0, mass=1.0, c=1.0) -> "PhysicalScales":
        """Scales with the dimensionless field ``b = hbar*omega_c/(m c^2)``."""
        return cls(hbar=hbar, mass=mass, c=c, omega_c=b * mass * c**2 / hbar)

    @property
    def rest_energy(self) -> float:
        return self.mass * self.c**2

    @property
    def b(self) -> float:
        return self.hbar * self.omega_c / self.rest_energy

    @property
    def Omega(self) -> float:
        """Slow modulation frequency hbar*omega_c**2/(m c**2)."""
        return self.hbar * self.omega_c**2 / self.rest_energy

    def _need_field(self):
        if self.omega_c <= 0:
            raise ValueError("quantity requires omega_c > 0")

    @property
    def a2(self) -> float:
        """Squared magnetic length hbar/(m omega_c)."""
        self._need_field()
        return self.hbar / (self.mass * self.omega_c)

    @property
    def a(self) -> float:
        return float(np.sqrt(self.a2))

    @property
    def p_unit(self) -> float:
        """Momentum scale hbar/a of the oscillator."""
        return self.hbar / self.a

    def as_dict(self) -> dict:
        return {"hbar": self.hbar, "mass": self.mass, "c": self.c,
                "omega_c": self.omega_c, "b": self.b}


def _centered(n: int, step: float) -> np.ndarray:
    return (np.arange(n) - n // 2) * step


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform periodic (p, q) grid with ``d = 1``."""

    n_p: int
    n_q: int
    p_extent: float
    q_extent: float
    d: int = 1

    def __post_init__(self):
        for name in ("n_p", "n_q"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n!r}")
        for name in ("p_extent", "q_extent"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be > 0, got {val!r}")
        if self.d != 1:
            raise ValueError("only d = 1 grids are supported")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_p, self.n_q)

    @property
    def dp(self) -> float:
        return 2.0 * self.p_extent / self.n_p

    @property
    def dq(self) -> float:
        return 2.0 * self.q_extent / self.n_q

    @property
    def dk(self) -> float:
        """Wavenumber spacing dual to q (the mixed representation axis)."""
        return 2.0 * np.pi / (self.n_q * self.dq)

    @property
    def cell(self) -> float:
        return self.dp * self.dq

    @cached_property
    def p(self) -> np.ndarray:
        return _centered(self.n_p, self.dp)

    @cached_property
    def q(self) -> np.ndarray:
        return _centered(self.n_q, self.dq)

    @cached_property
    def k(self) -> np.ndarray:
        return _centered(self.n_q, self.dk)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(P, Q)`` coordinate arrays of shape (n_p, 1), (1, n_q)."""
        return self.p[:, None], self.q[None, :]

    def dual_momentum(self, hbar: float) -> np.ndarray:
        """Momentum differences ``P = hbar k`` conjugate to q."""
        return hbar * self.k

    def is_commensurate(self, hbar: float, rtol: float = 1e-12) -> bool:
        """True if the grid supports the exact kernel-based star product.

        Requires a square grid whose cell satisfies ``dp*dq = 2 pi hbar / n``.
        """
        if self.n_p != self.n_q:
            return False
        target = 2.0 * np.pi * hbar / self.n_q
        return abs(self.cell - target) <= rtol * target


def make_grid(n_p: int, n_q: int, p_extent: float, q_extent: float) -> PhaseGrid:
    return PhaseGrid(int(n_p), int(n_q), float(p_extent), float(q_extent))


def commensurate_grid(n: int, scales: PhysicalScales, aspect: float = 1.0) -> PhaseGrid:
    """Square grid with ``dp*dq = 2 pi hbar/n``.

    ``aspect`` is ``q_extent/p_extent`` in physical units; pass ``a**2/hbar`` to
    get a grid that is isotropic in oscillator units.
    """
    prod = np.pi * scales.hbar * n / 2.0
    p_ext = np.sqrt(prod / aspect)
    return make_grid(n, n, p_ext, prod / p_ext)


def oscillator_grid(n: int, scales: PhysicalScales) -> PhaseGrid:
    """Commensurate grid isotropic in the units q/a and a p/hbar."""
    return commensurate_grid(n, scales, aspect=scales.a2 / scales.hbar)


def _shift(arr, axis):
    return np.fft.ifftshift(arr, axes=axis)


def _unshift(arr, axis):
    return np.fft.fftshift(arr, axes=axis)


def q_to_k(values: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """``F(p, k) = sum_q W(p, q) exp(+i k q) dq`` along axis 1."""
    n = grid.n_q
    out = np.fft.ifft(_shift(values, 1), axis=1)
    return _unshift(out, 1) * (n * grid.dq)


def k_to_q(values: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Inverse of :func:`q_to_k`."""
    out = np.fft.fft(_shift(values, 1), axis=1)
    return _unshift(out, 1) / (grid.n_q * grid.dq)


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Complex field on a :class:`PhaseGrid`.

    ``representation`` is ``"direct"`` for (p, q) samples and ``"mixed"`` for
    the (p, k) samples obtained by Fourier transforming along q.
    """

    grid: PhaseGrid
    values: np.ndarray
    representation: str = DIRECT
    _meta: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.representation not in (DIRECT, MIXED):
            raise ValueError(f"unknown representation {self.representation!r}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: PhaseGrid, func) -> "PhaseField":
        """Sample ``func(p, q)`` on the grid (broadcast over a mesh)."""
        P, Q = grid.mesh()
        vals = np.broadcast_to(np.asarray(func(P, Q), dtype=complex), grid.shape)
        return cls(grid, vals.copy())

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "PhaseField":
        return cls(grid, np.zeros(grid.shape, complex))

    def to_mixed(self) -> "PhaseField":
        if self.representation == MIXED:
            return self
        return PhaseField(self.grid, q_to_k(self.values, self.grid), MIXED)

    def to_direct(self) -> "PhaseField":
        if self.representation == DIRECT:
            return self
        return PhaseField(self.grid, k_to_q(self.values, self.grid), DIRECT)

    def _check(self, other: "PhaseField"):
        if not isinstance(other, PhaseField):
            return
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")
        if other.representation != self.representation:
            raise ValueError("fields are in different representations")

    def __add__(self, other):
        if isinstance(other, PhaseField):
            self._check(other)
            return PhaseField(self.grid, self.values + other.values, self.representation)
        return PhaseField(self.grid, self.values + other, self.representation)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PhaseField):
            self._check(other)
            return PhaseField(self.grid, self.values - other.values, self.representation)
        return PhaseField(self.grid, self.values - other, self.representation)

    def __mul__(self, scalar):
        if isinstance(scalar, PhaseField):
            raise TypeError("use star_product or .values for field products")
        return PhaseField(self.grid, self.values * scalar, self.representation)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def conj(self) -> "PhaseField":
        if self.representation != DIRECT:
            return self.to_direct().conj()
        return PhaseField(self.grid, self.values.conj())

    def integrate(self) -> complex:
        """Phase-space integral by the periodic trapezoid rule."""
        f = self.to_direct()
        return complex(f.values.sum() * self.grid.cell)

    def q_marginal(self) -> np.ndarray:
        """``int W dq`` for every momentum sample."""
        return self.to_direct().values.sum(axis=1) * self.grid.dq

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def boundary_ratio(self) -> float:
        """Largest boundary magnitude relative to the field maximum."""
        v = np.abs(self.to_direct().values)
        peak = v.max()
        if peak == 0:
            return 0.0
        edge = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max())
        return float(edge / peak)


def check_decay(field_: PhaseField, name: str = "field", level: float = BOUNDARY_DECAY) -> float:
    """Warn (never raise) when ``field_`` is not decayed at the boundary."""
    ratio = field_.boundary_ratio()
    if ratio > level:
        warnings.warn(
            BoundaryDecayWarning(
                f"{name}: boundary magnitude {ratio:.3e} of peak exceeds {level:.1e}", ratio
            ),
            stacklevel=3,
        )
    return ratio


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``max|a - b| / max|b|`` (absolute when ``b`` vanishes)."""
    a = np.asarray(a)
    b = np.asarray(b)
    scale = np.max(np.abs(b))
    diff = np.max(np.abs(a - b))
    return float(diff / scale) if scale > 0 else float(diff)
