"""Phase-space engine: grids, transforms, star product, Fock matrix elements."""
from .fock import (FockMatrix, displacement_elements, fock_projection, fock_to_wigner,
                   oscillator_coords, quasiprob_elements)
from .grid import (DIRECT, MIXED, BoundaryDecayWarning, GridMismatchError, PhaseField,
                   PhaseGrid, PhysicalScales, check_decay, commensurate_grid, make_grid,
                   oscillator_grid, relative_error)
from .special import hermite_functions, laguerre, laguerre_table
from .star import (ConvergenceError, DomainError, FockDiagonalSymbol, PolySymbol,
                   fock_diagonal_to_symbol, kernel_to_symbol, newton_coefficients,
                   star_product, star_sqrt, symbol_to_kernel)
