"""Numerics for one-dimensional weighted Dirac operators ``tau f = R^{-1}(J f' + Q f)``.

Solutions and transfer matrices, boundary data and fundamental systems at
regular, limit-circle and radial endpoints, Weyl functions, spectra and
spectral measures, de Branges functions and kernels, and Liouville (gauge)
transformations with invariance checks.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .coefficients import (J, DiracExpression, HypothesisError, Interval, RadialSpec, as_matrix_field,
                           check_local_integrability, make_radial, named_field, validate_hypotheses)
from .expression import EvaluationDomainError, ParseError, ScalarField, parse_coefficient
from .ode import (IntegrationError, PropagationSettings, SolutionState, evolve, lagrange_residual, propagate,
                  transfer_matrix, wronskian)
from .boundary import (AnchoredFrame, BoundaryCondition, ConfigurationError, RadialFrame, ReferenceFrame,
                       RegularFrame, classify_endpoint, fundamental_system, left_frame, singular_phi)
from .weyl import (Realization, Spectrum, SpectralMeasure, WeylConvergenceError, WeylFunction, eigenvalues,
                   herglotz_check, set_distance, spectral_measure, stieltjes_mass, two_spectra_report, weyl_m)
from .debranges import (DeBrangesFunction, cartwright_diagnostics, e_function, kernel_integral, nesting_check,
                        parseval_residual, rep_identity_residual, structure_kernel)
from .gauge import (LiouvilleTransform, gauge_rotate, invariance_harness, kill_potential, normalize_det,
                    normalize_trace, normalize_weight, pullback, pushforward)
from .problems import Problem, load_problem, parse_problem
