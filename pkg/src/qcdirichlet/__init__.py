"""Numerical toolkit for degenerate Beltrami equations and their Dirichlet problem."""

__version__ = "0.1.0"

from .errors import (EllipticityViolation, InvalidArgument, InvalidDomain, NoConvergence, ResolutionGuard,
                     StageError, SupportViolation, ToolkitError)
from .geometry import DashedLine, DomainSpec, Grid, annulus, circle_trace, domain_mask, make_grid, polygon, square, unit_disk
from .fields import ComplexField, RadialProfile, circle_average, circle_norm, dilatation, generate_mu, truncate_mu
from .modulus import (CurveFamily, connecting_modulus, dashed_line_bound, dashed_line_family, discrete_modulus,
                      modulus_inequality_check, radial_segments, ring_bound, weak_flatness_probe,
                      weighted_min_closed_form)
from .criteria import (CriterionReport, PhiFunction, bmo_norm, fmo_loglog_check, fmo_probe, phi_catalog,
                       phi_divergence, phi_equivalents, radial_divergence, theorem_applicability)
from .beltrami import SolutionBundle, beurling_transform, cauchy_transform, homeo_check, mrm_solve
from .dirichlet import (BoundaryData, SchwarzSeries, boundary_oscillation, schwarz_integral, solve_dirichlet,
                        stoilow_factor_check, szego_riemann, theodorsen_riemann, trace_check)
