r"""Damped Picard iteration for :math:`u = S u` on the cone.

The iteration

.. math::

    u_{k+1} = \max\{(1 - \lambda) u_k + \lambda S u_k, 0\}

stops when :math:`\|u_{k+1} - u_k\|_\infty \le` ``tol``. The reported
solution is :math:`S u_k` for the last iterate, which comes with its
fractional derivative channel. Its fixed-point defect and the differential
residual are measured independently of the stopping rule and reported in a
:class:`SolveReport`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from fracbvp.errors import FracBVPError, NonconvergenceError, QuadratureError
from fracbvp.grid import Grid, SampledFunction
from fracbvp.operator import OperatorWorkspace, apply_S, differential_residual
from fracbvp.problem import ProblemSpec, SolverOptions, cone_membership

logger = logging.getLogger(__name__)

__all__ = ["SolveReport", "SolverOptions", "cone_profile", "picard_solve"]

#: Below this sup-norm an iterate counts as collapsed onto ``u = 0``.
COLLAPSE_LEVEL = 1.0e-12
#: Small steps at sup-norms below this multiple of ``tol`` do not count as convergence.
NEAR_ZERO = 1.0e4
#: Above this sup-norm the iteration is declared divergent.
BLOWUP_LEVEL = 1.0e150
#: Interval ``[delta, 1 - delta]`` of the reported differential residual.
RESIDUAL_DELTA = 0.05


@dataclass(frozen=True)
class SolveReport:
    solution: SampledFunction
    iterations: int
    #: :math:`\|u_{k+1} - u_k\|_\infty` for every step.
    history: tuple[float, ...]
    integral_residual: float
    differential_residual: float
    cone_margin: float
    sup_norm: float
    #: ``"inside"``, ``"below r"`` or ``"above R"`` if a certificate was given.
    annulus_position: str | None = None
    converged: bool = True
    restarts: int = 0

    def summary(self) -> str:
        lines = [
            f"converged            {self.converged}",
            f"iterations           {self.iterations}",
            f"restarts             {self.restarts}",
            f"sup norm             {self.sup_norm:.12g}",
            f"integral residual    {self.integral_residual:.3e}",
            f"differential resid.  {self.differential_residual:.3e}",
            f"cone margin          {self.cone_margin:.3e}",
        ]
        if self.annulus_position is not None:
            lines.append(f"annulus position     {self.annulus_position}")
        return "\n".join(lines)


def cone_profile(grid: Grid, alpha: float, sup: float = 1.0) -> SampledFunction:
    r""":math:`c\,t^{\alpha-1}(1-t)` scaled to the given sup-norm."""
    p = alpha - 1.0
    peak = (p / alpha) ** p / alpha
    return SampledFunction(grid, sup / peak * grid.t**p * grid.tc, dirichlet=True)


def _initial(options: SolverOptions, grid: Grid, alpha: float, certificate) -> SampledFunction:
    init = options.initial
    if callable(init):
        return SampledFunction.from_function(grid, init, dirichlet=True)
    if init == "cone_profile":
        sup = 1.0
        if certificate is not None and certificate.valid:
            sup = math.sqrt(certificate.small_radius * certificate.large_radius)
        return cone_profile(grid, alpha, sup)
    values = np.full(grid.size, float(init))
    return SampledFunction(grid, values, dirichlet=True)


def _position(sup: float, certificate) -> str | None:
    if certificate is None:
        return None
    if sup < certificate.small_radius:
        return "below r"
    if sup > certificate.large_radius:
        return "above R"
    return "inside"


def picard_solve(
    problem: ProblemSpec,
    options: SolverOptions | None = None,
    certificate=None,
    *,
    workspace: OperatorWorkspace | None = None,
) -> SolveReport:
    """Iterate to a fixed point of :math:`S`.

    If the iterates collapse onto zero while :math:`f(0) = 0`, the iteration
    restarts once from the cone profile (scaled to the certificate's small
    radius when one is available).

    :raises NonconvergenceError: if ``max_iter`` steps do not reach ``tol``,
        if the iterates blow up, or if they collapse onto zero twice. The
        partial :class:`SolveReport` is attached as ``report``.
    """
    if options is None:
        options = problem.solver
    grid = Grid(options.n)
    if workspace is None or workspace.grid != grid:
        workspace = OperatorWorkspace(problem, grid)

    alpha = problem.alpha
    lam = options.damping
    f_at_zero = float(np.asarray(problem.f(np.array([0.0])))[0])

    u = _initial(options, grid, alpha, certificate)
    history: list[float] = []
    restarts = 0
    converged = False
    failure = None

    for _ in range(options.max_iter):
        try:
            su = apply_S(workspace, u)
        except QuadratureError as exc:
            if not u.node_max > 1.0:
                raise
            failure = f"iterates blow up ({exc})"
            break
        values = np.maximum((1.0 - lam) * u.values + lam * su.values, 0.0)
        step = float(np.max(np.abs(values - u.values)))
        history.append(step)
        u = SampledFunction(grid, values, dirichlet=True)

        size = u.node_max
        if not size < BLOWUP_LEVEL:
            failure = "iterates blow up"
            break
        if size < COLLAPSE_LEVEL and f_at_zero == 0.0:
            if restarts:
                failure = "iterates collapsed onto the trivial fixed point u = 0 twice"
                break
            restarts += 1
            sup = certificate.small_radius if certificate is not None and certificate.valid else 1.0
            logger.info("iterates collapsed onto zero; restarting from the cone profile")
            u = cone_profile(grid, alpha, sup)
            continue
        if step <= options.tol:
            if f_at_zero == 0.0 and size < NEAR_ZERO * options.tol:
                # a small step near zero is the approach to u = 0; keep going
                # so the collapse guard can act
                continue
            converged = True
            break
    else:
        failure = f"no convergence within {options.max_iter} iterations (last step {history[-1]:.3e})"

    report = _report(workspace, u, history, converged, restarts, certificate)
    if not converged:
        raise NonconvergenceError(failure, report)
    logger.info("converged after %d iterations", len(history))
    return report


def _report(workspace, u, history, converged, restarts, certificate) -> SolveReport:
    # one undamped step: S u carries its own derivative channel, and its
    # defect is at most the contraction factor times that of u
    try:
        solution = apply_S(workspace, u)
        defect = float(np.max(np.abs(solution.values - apply_S(workspace, solution).values)))
        diff = differential_residual(workspace, solution, RESIDUAL_DELTA)
    except FracBVPError as exc:  # report what can be reported for failed runs
        if converged:
            raise
        logger.debug("diagnostics unavailable: %s", exc)
        solution = u
        defect = diff = math.nan
    sup = solution.sup_norm()
    return SolveReport(
        solution=solution,
        iterations=len(history),
        history=tuple(history),
        integral_residual=defect,
        differential_residual=diff,
        cone_margin=cone_membership(solution, workspace.order).margin,
        sup_norm=sup,
        annulus_position=_position(sup, certificate),
        converged=converged,
        restarts=restarts,
    )
