"""Positive solutions of singular fractional boundary value problems

.. math::

    D^\\alpha_{0+} u + h(t) f(u) = 0, \\quad 0 < t < 1, \\qquad u(0) = u(1) = 0,

with :math:`1 < \\alpha \\le 2`, a weight :math:`h` that may be singular at the
origin and a non-negative nonlinearity :math:`f`.
"""

from __future__ import annotations

from fracbvp.certify import (
    Certificate,
    certify_case1,
    certify_case2,
    classify_nonlinearity,
    verify_certificate_by_sampling,
)
from fracbvp.errors import FracBVPError
from fracbvp.fractional_core import (
    FractionalOrder,
    gamma_fn,
    green_value,
    kernel_bounds,
    rl_derivative,
    rl_integral,
)
from fracbvp.grid import Grid, SampledFunction, graded_grid
from fracbvp.operator import (
    OperatorWorkspace,
    apply_D_S,
    apply_S,
    differential_residual,
    integral_residual,
)
from fracbvp.problem import (
    NonlinearitySpec,
    ProblemSpec,
    SolverOptions,
    WeightSpec,
    cone_membership,
    e_alpha_norm,
    load_problem,
    parse_problem,
    serialize_problem,
)
from fracbvp.quadrature import SingularIntegrand, check_H1, check_H2, integrate
from fracbvp.solver import SolveReport, picard_solve

__all__ = [
    "Certificate",
    "FracBVPError",
    "FractionalOrder",
    "Grid",
    "NonlinearitySpec",
    "OperatorWorkspace",
    "ProblemSpec",
    "SampledFunction",
    "SingularIntegrand",
    "SolveReport",
    "SolverOptions",
    "WeightSpec",
    "apply_D_S",
    "apply_S",
    "certify_case1",
    "certify_case2",
    "check_H1",
    "check_H2",
    "classify_nonlinearity",
    "cone_membership",
    "differential_residual",
    "e_alpha_norm",
    "gamma_fn",
    "graded_grid",
    "green_value",
    "integral_residual",
    "integrate",
    "kernel_bounds",
    "load_problem",
    "parse_problem",
    "picard_solve",
    "rl_derivative",
    "rl_integral",
    "serialize_problem",
    "verify_certificate_by_sampling",
]
