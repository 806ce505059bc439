r"""The Hammerstein operator

.. math::

    S u(t) = \int_0^1 G(t, s) h(s) f(u(s))\,\mathrm{d}s

and its fractional-derivative channel

.. math::

    D^{\alpha-1}_{0+} S u(t)
    = \int_0^t \left((1-\tau)^{\alpha-1} - 1\right) g(\tau)\,\mathrm{d}\tau
    + \int_t^1 (1-\tau)^{\alpha-1} g(\tau)\,\mathrm{d}\tau,
    \qquad g = h \cdot f \circ u.

Integrals are computed with a Nyström scheme in the uniform coordinate
:math:`x` of the graded grid. Every grid interval is a panel. Smooth panels
use Gauss-Legendre, while the two end panels and, for each target
:math:`t_i`, the panel ending at :math:`t_i` (where :math:`(t_i - s)^{\alpha-1}`
is not smooth) use a fixed tanh-sinh rule with exact distances to the
singular end. The kernel tables depend on the order and the grid only and
are shared between workspaces.

:func:`apply_S_reference` evaluates the same integrals node by node with the
adaptive :func:`~fracbvp.quadrature.integrate`; it is slow and used as an
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from fracbvp.errors import DomainError, QuadratureBudgetError, QuadratureError
from fracbvp.fractional_core import FractionalOrder, green_kernel, rl_derivative
from fracbvp.grid import Grid, SampledFunction, grading, grading_derivative, grading_difference
from fracbvp.problem import ProblemSpec
from fracbvp.quadrature import SingularIntegrand, gauss_legendre, integrate, tanh_sinh_rule

__all__ = [
    "OperatorWorkspace",
    "apply_D_S",
    "apply_S",
    "apply_S_reference",
    "differential_residual",
    "integral_residual",
]

#: Gauss-Legendre points per smooth panel.
PANEL_POINTS = 10
#: Step ``2**-level`` and truncation of the tanh-sinh rule on singular panels.
SINGULAR_LEVEL = 4
SINGULAR_TAU = 4.5

#: Quadrature nodes closer than this to s = 0 are dropped.
UNDERFLOW_S = 1.0e-250

#: Tolerated negative excursion of an input iterate, relative to its size.
NEGATIVE_SLACK = 1.0e-12


# {{{ kernel tables


def _one_minus_pow(p: float, s: np.ndarray, sc: np.ndarray) -> np.ndarray:
    """:math:`(1 - s)^p - 1` without cancellation on either end."""
    small = s < 0.5
    log_sc = np.where(small, np.log1p(-np.where(small, s, 0.0)), np.log(np.where(small, 1.0, sc)))
    return np.expm1(p * log_sc)


@dataclass(frozen=True, eq=False)
class _KernelTables:
    # quadrature nodes shared by all targets
    x: np.ndarray
    s: np.ndarray
    sc: np.ndarray
    weights: np.ndarray
    panel_starts: np.ndarray

    # lower-branch kernel on panels left of the diagonal, one row per target
    lower: np.ndarray
    # diagonal panel nodes and kernel-weighted weights, one row per target
    diag_x: np.ndarray
    diag_s: np.ndarray
    diag_weights: np.ndarray

    # weights of (1 - s)^p and (1 - s)^p - 1
    upper: np.ndarray
    below: np.ndarray

    t_pow: np.ndarray


def _shared_nodes(n: int, q: float):
    gx, gw = gauss_legendre(PANEL_POINTS)
    ts = tanh_sinh_rule(SINGULAR_LEVEL, SINGULAR_TAU)
    keep = ts.weights > 0
    hw = 0.5 / n

    xs, xcs, ws, counts = [], [], [], []

    # first panel, measured from 0
    x0 = hw * ts.one_plus[keep]
    xs.append(x0)
    xcs.append(1.0 - x0)
    ws.append(hw * ts.weights[keep])
    counts.append(x0.size)

    j = np.arange(1, n - 1)[:, None]
    xg = ((j + 0.5) / n + hw * gx).ravel()
    xs.append(xg)
    xcs.append(1.0 - xg)
    ws.append(np.broadcast_to(hw * gw, (n - 2, gx.size)).ravel())
    counts.extend([gx.size] * (n - 2))

    # last panel, measured from 1
    xc1 = hw * ts.one_minus[keep]
    xs.append(1.0 - xc1)
    xcs.append(xc1)
    ws.append(hw * ts.weights[keep])
    counts.append(xc1.size)

    x = np.concatenate(xs)
    xc = np.concatenate(xcs)
    s = grading(x, q)
    sc = grading(xc, q)
    w = np.concatenate(ws) * grading_derivative(x, q)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return x, s, sc, w, starts


@lru_cache(maxsize=8)
def _kernel_tables(alpha: float, n: int, q: float) -> _KernelTables:
    p = alpha - 1.0
    grid = Grid(n, q)
    x, s, sc, w, starts = _shared_nodes(n, q)
    npanel = np.repeat(np.arange(n), np.diff(np.concatenate([starts, [x.size]])))

    i = np.arange(1, n)
    xi = grid.x[i][:, None]
    ti = grid.t[i][:, None]
    tci = grid.tc[i][:, None]

    # panels strictly left of the diagonal panel [x_{i-1}, x_i]
    active = npanel[None, :] <= (i[:, None] - 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.where(active, xi - x[None, :], 1.0)
        t_minus_s = grading_difference(xi, x[None, :], dist, q)
        kernel = green_kernel(p, ti, s[None, :], t_minus_s, one_minus_t=tci)
    lower = np.where(active, kernel, 0.0) * w[None, :]

    ts = tanh_sinh_rule(SINGULAR_LEVEL, SINGULAR_TAU)
    keep = ts.weights > 0
    hw = 0.5 / n
    left = grid.x[i - 1][:, None]
    d_right = hw * ts.one_minus[keep][None, :]
    from_left = ts.one_plus[keep] <= ts.one_minus[keep]
    dx = np.where(from_left[None, :], left + hw * ts.one_plus[keep][None, :], xi - d_right)
    dist = np.where(from_left[None, :], xi - dx, d_right)
    ds = grading(dx, q)
    t_minus_s = grading_difference(xi, dx, dist, q)
    dk = green_kernel(p, ti, ds, t_minus_s, one_minus_t=tci)
    dw = dk * hw * ts.weights[keep][None, :] * grading_derivative(dx, q)

    one_minus_pow = np.exp(p * np.log(sc))
    upper = one_minus_pow * w
    below = _one_minus_pow(p, s, sc) * w

    tables = _KernelTables(
        x=x, s=s, sc=sc, weights=w, panel_starts=starts,
        lower=lower, diag_x=dx, diag_s=ds, diag_weights=dw,
        upper=upper, below=below, t_pow=grid.t[i] ** p,
    )
    for name in tables.__dataclass_fields__:
        value = getattr(tables, name)
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
    return tables


# }}}


# {{{ workspace


@dataclass(frozen=True, eq=False)
class OperatorWorkspace:
    """A problem together with a grid and the quadrature tables for it."""

    problem: ProblemSpec
    grid: Grid = None

    _tables: _KernelTables = field(init=False, repr=False)
    _h: np.ndarray = field(init=False, repr=False)
    _h_diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.grid is None:
            object.__setattr__(self, "grid", Grid(self.problem.solver.n))
        tables = _kernel_tables(self.problem.alpha, self.grid.n, self.grid.q)
        object.__setattr__(self, "_tables", tables)

        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            h = np.asarray(self.problem.h(tables.s), dtype=float)
            h_diag = np.asarray(self.problem.h(tables.diag_s), dtype=float)
        # nodes pushed to s = 0 by underflow carry no weight in any integral
        h = np.where(tables.s > UNDERFLOW_S, h, 0.0)
        h_diag = np.where(tables.diag_s > UNDERFLOW_S, h_diag, 0.0)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(h_diag))):
            raise QuadratureError("weight is not finite at the quadrature nodes")
        object.__setattr__(self, "_h", h)
        object.__setattr__(self, "_h_diag", h_diag)

    @property
    def order(self) -> FractionalOrder:
        return self.problem.order

    def _check(self, u: SampledFunction) -> None:
        if u.grid != self.grid:
            raise DomainError(f"u lives on {u.grid}, the workspace on {self.grid}")
        scale = max(1.0, u.node_max)
        if np.min(u.values) < -NEGATIVE_SLACK * scale:
            raise DomainError("the operator is defined on non-negative functions")

    def forcing(self, u: SampledFunction) -> tuple[np.ndarray, np.ndarray]:
        r""":math:`h \cdot f(u)` at the shared and at the diagonal nodes."""
        self._check(u)
        t = self._tables
        f = self.problem.f
        uq = np.maximum(u.at_x(t.x), 0.0)
        ud = np.maximum(u.at_x(t.diag_x), 0.0)
        # overflow surfaces as a non-finite Su, reported by apply_S
        with np.errstate(over="ignore", invalid="ignore"):
            gq = self._h * np.asarray(f(uq), dtype=float)
            gd = self._h_diag * np.asarray(f(ud), dtype=float)
        return gq, gd


# }}}


# {{{ application


def _panel_sums(tables: _KernelTables, values: np.ndarray) -> np.ndarray:
    return np.add.reduceat(values, tables.panel_starts)


def _raise_if_not_finite(values: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise QuadratureError(f"{what} is not finite at interior node {bad[0] + 1}")


def apply_S(workspace: OperatorWorkspace, u: SampledFunction) -> SampledFunction:
    """Sample :math:`Su` on the workspace grid, with its derivative channel.

    The endpoint values are exactly zero.
    """
    tables = workspace._tables
    gq, gd = workspace.forcing(u)

    with np.errstate(over="ignore", invalid="ignore"):
        left = tables.lower @ gq + np.sum(tables.diag_weights * gd, axis=1)
        right_panels = _panel_sums(tables, tables.upper * gq)
        # panels i, i+1, ... for target i
        right = np.cumsum(right_panels[::-1])[::-1][1:]
        interior = (left + tables.t_pow * right) / workspace.order.gamma
    _raise_if_not_finite(interior, "Su")

    values = np.concatenate([[0.0], interior, [0.0]])
    return SampledFunction(workspace.grid, values, _d_channel(workspace, gq), dirichlet=True)


def _d_channel(workspace: OperatorWorkspace, gq: np.ndarray) -> np.ndarray:
    tables = workspace._tables
    below = _panel_sums(tables, tables.below * gq)
    upper = _panel_sums(tables, tables.upper * gq)
    prefix = np.concatenate([[0.0], np.cumsum(below)])
    suffix = np.concatenate([np.cumsum(upper[::-1])[::-1], [0.0]])
    d = prefix + suffix

    beta = workspace.problem.weight.beta
    if beta is None or beta >= 1.0:
        # the second integral need not converge at t = 0
        d[0] = np.nan
    _raise_if_not_finite(d[1:], "D^(alpha-1) Su")
    return d


def apply_D_S(workspace: OperatorWorkspace, u: SampledFunction) -> np.ndarray:
    r""":math:`D^{\alpha-1}_{0+} Su` at the grid nodes; NaN where undefined."""
    gq, _ = workspace.forcing(u)
    return _d_channel(workspace, gq)


def apply_S_reference(
    workspace: OperatorWorkspace, u: SampledFunction, indices=None, *, tol: float = 1.0e-12
) -> np.ndarray:
    """Node-by-node :math:`Su` from adaptive quadrature split at each target.

    :raises QuadratureError: naming the node whose integral failed.
    """
    workspace._check(u)
    grid = workspace.grid
    p = workspace.order.p
    h, f = workspace.problem.h, workspace.problem.f
    beta = workspace.problem.weight.beta or 0.0
    if indices is None:
        indices = range(1, grid.n)

    out = []
    for i in indices:
        ti = float(grid.t[i])
        tci = float(grid.tc[i])
        if not 0 < i < grid.n:
            out.append(0.0)
            continue

        def integrand(s, dl, dr, ti=ti, tci=tci):
            g = h(s) * f(np.maximum(u(s), 0.0))
            lower = green_kernel(p, ti, s, dr, one_minus_t=tci)
            upper = (ti * dr) ** p
            return np.where(s <= ti, lower, upper) * g

        try:
            result = integrate(
                SingularIntegrand(
                    integrand,
                    exponent_at_0=min(1.0 - beta, 0.0),
                    exponent_at_1=0.0,
                    kink=ti,
                    distances=True,
                ),
                tol,
            )
        except QuadratureBudgetError as exc:
            raise QuadratureBudgetError(
                f"node {i} (t = {ti:.6g}): {exc}", exc.estimate, exc.error_estimate
            ) from exc
        except QuadratureError as exc:
            raise QuadratureError(f"node {i} (t = {ti:.6g}): {exc}") from exc
        out.append(result.value / workspace.order.gamma)
    return np.array(out)


# }}}


# {{{ residuals


def integral_residual(workspace: OperatorWorkspace, u: SampledFunction) -> float:
    r""":math:`\max_i |u(t_i) - Su(t_i)|`."""
    su = apply_S(workspace, u)
    return float(np.max(np.abs(u.values - su.values)))


def differential_residual(workspace: OperatorWorkspace, u: SampledFunction, delta: float) -> float:
    r"""Largest :math:`|D^\alpha u(t_i) + h(t_i) f(u(t_i))|` over nodes in ``[delta, 1 - delta]``."""
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    t = u.grid.t
    nodes = t[(t >= delta) & (t <= 1.0 - delta)]
    if nodes.size == 0:
        return 0.0
    d = rl_derivative(workspace.order, u, nodes)
    values = np.maximum(u(nodes), 0.0)
    forcing = workspace.problem.h(nodes) * workspace.problem.f(values)
    return float(np.max(np.abs(d + forcing)))


# }}}
