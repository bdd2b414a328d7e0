"""Numerical laboratory for periodic homogenization in two dimensions."""

from .analysis import (DoublingProfile, Shape, ThreeSpheresProfile, doubling_constant, doubling_profile,
                       three_spheres_profile, vanishing_order_estimate)
from .cell import (CorrectorSet, FluxCorrector, HomogenizedTensor, TorusField, flux_corrector, flux_field,
                   homogenized, solve_cell)
from .coefficients import CoefficientField, Family, SymMatrix2, ValidationReport, evaluate, validate
from .errors import (ConfigurationError, DegenerateSolutionError, HomogLabError, PrecisionError,
                     PreconditionError, SolverFailure)
from .harness import ExperimentConfig, SweepReport, run_sweep
from .nodal import NodalCurve, NodalReport, extract_nodal, nodal_density, nodal_length_in_ball, singular_candidates
from .solver import (BoxGrid, DiscreteField, Ellipsoid, ball_average_sq, ellipsoid_average_sq,
                     ellipsoid_inclusion_check, gradient, solve_dirichlet)
from .twoscale import ApproximationReport, approximation_report, corrected_expansion, homogenized_solution, rate_fit

__version__ = "0.1.0"
