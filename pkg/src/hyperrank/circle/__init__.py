"""Circle-point arithmetic, Laurent polynomials and quadrature on the unit circle."""

from .angles import AngleArray, BinaryAngle, angle_pow2, chord, chord_exact, offsets
from .laurent import LaurentPoly, fejer_sum, negative_part
from .quadrature import (
    Grid,
    GridFunction,
    conjugate_integral,
    holder_ratio_sup,
    inner_product,
    panel_grid,
    uniform_grid,
)

__all__ = [
    "AngleArray",
    "BinaryAngle",
    "Grid",
    "GridFunction",
    "LaurentPoly",
    "angle_pow2",
    "chord",
    "chord_exact",
    "conjugate_integral",
    "fejer_sum",
    "holder_ratio_sup",
    "inner_product",
    "negative_part",
    "offsets",
    "panel_grid",
    "uniform_grid",
]
