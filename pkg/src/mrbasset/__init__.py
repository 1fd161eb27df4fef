"""Inertial particle transport with a half-order history force.

Simulation of the relative-velocity / position system driven by an
analytic carrier flow, including the square-root memory integral, plus
the machinery to verify its qualitative theory numerically: fractional
quadrature, flow-map sensitivities and their inverse evolution, series
a-priori bounds, and regularity/reversibility diagnostics.
"""

from .bounds import GronwallProblem, apriori_solution_bound, gronwall_bound
from .config import ConfigError, RunConfig, parse_config, render_config
from .diagnostics import (DiagnosticRecord, RegularityReport,
                          differentiability_test, holder_test,
                          reverse_roundtrip, run_default_suite,
                          scheme_agreement, write_report, zero_limit_test)
from .flowfield import (Coefficients, FlowField, LinearField, Params,
                        TaylorGreenField, ZeroField, coefficient_constants,
                        derive_params, derived_coefficients, make_field,
                        params_from_rates, variational_coefficients,
                        verify_field_derivatives)
from .fractional import (SampledPath, TimeGrid, basset_integral,
                         basset_weights, caputo_half_derivative,
                         rl_half_derivative, right_rl_half_derivative,
                         wallis, wallis_sequence)
from .sensitivity import (SensitivityTrajectory, SeparationBounds,
                          fd_jacobian, separation_bounds, solve_inverse,
                          solve_variational, spectral_norm)
from .solver import (PicardBox, SolverError, State, Trajectory, picard_local,
                     picard_radius, solve)

__version__ = "0.1.0"
