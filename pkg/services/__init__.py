# -*- coding: utf-8 -*-
"""
Services package - lattice geometry, symbols, cell problem and fiber operators

The experiment drivers (experiments, evolution, threshold) are imported from
their own modules.
"""

from services.errors import HomogError
from services.lattice_geometry import build_lattice, truncate, truncate_shells
from services.symbols import build_symbol, make_coefficient
from services.cell_problem import solve_cell_problem, effective_matrix, germ, first_order_matrix
from services.fibers import FiberAssembler

__all__ = [
    "HomogError",
    "build_lattice", "truncate", "truncate_shells",
    "build_symbol", "make_coefficient",
    "solve_cell_problem", "effective_matrix", "germ", "first_order_matrix",
    "FiberAssembler",
]
