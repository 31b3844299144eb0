"""Numerical laboratory for the complex Monge-Ampere equation on flat
Hermitian tori: spectral calculus, a Newton-Krylov solver for the
log-determinant equation, the Gauduchon conformal factor, and empirical
verification of the integral estimates behind unconditional solvability.
"""

from .calculus import (HermitianField, TorsionTensor, chern_laplacian, ddbar,
                       gradient_pairing, mixed_discriminant, ricci_form,
                       spectral_partial, torsion, volume_measure,
                       wedge_quotient)
from .forms import PointForm, point_exterior_product
from .gauduchon import (GauduchonResult, classify_metric, gauduchon_defect,
                        solve_gauduchon)
from .grid import (ComplexField, Measure, ScalarField, TorusGrid, build_grid,
                   flat_measure, integrate, lp_norm, sublevel_measure)
from .solver import (SolveOptions, SolveReport, ma_residual, manufacture,
                     newton_step, positivity_margin, solve)

__all__ = [
    "HermitianField", "TorsionTensor", "chern_laplacian", "ddbar",
    "gradient_pairing", "mixed_discriminant", "ricci_form",
    "spectral_partial", "torsion", "volume_measure", "wedge_quotient",
    "PointForm", "point_exterior_product",
    "GauduchonResult", "classify_metric", "gauduchon_defect",
    "solve_gauduchon",
    "ComplexField", "Measure", "ScalarField", "TorusGrid", "build_grid",
    "flat_measure", "integrate", "lp_norm", "sublevel_measure",
    "SolveOptions", "SolveReport", "ma_residual", "manufacture",
    "newton_step", "positivity_margin", "solve",
]
