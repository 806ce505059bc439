r"""Graded grids on :math:`[0, 1]` and functions sampled on them.

Nodes are :math:`t_i = w(i / N)` with the symmetric grading map

.. math::

    w(x) = \frac{x^q}{x^q + (1 - x)^q},

which clusters nodes algebraically at both ends. Interpolation between nodes
is done by a spline in the uniform coordinate :math:`x`. Solutions behave
like a fractional power :math:`t^\kappa` at the origin, with :math:`\kappa`
below :math:`\alpha - 1` for strongly singular weights, so the default
``q = 3`` is chosen to make :math:`x^{q\kappa}` smooth enough for the spline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import minimize_scalar

from fracbvp.errors import DomainError

DEFAULT_N = 512
DEFAULT_GRADING = 3.0
#: Degree of the interpolating spline in the graded coordinate.
INTERPOLATION_DEGREE = 5


# {{{ grading map


def grading(x, q: float = DEFAULT_GRADING):
    """The map :math:`w` from the uniform coordinate to the physical one."""
    x = np.asarray(x, dtype=float)
    a = x**q
    b = (1.0 - x) ** q
    return a / (a + b)


def grading_derivative(x, q: float = DEFAULT_GRADING):
    x = np.asarray(x, dtype=float)
    d = x**q + (1.0 - x) ** q
    return q * (x * (1.0 - x)) ** (q - 1.0) / d**2


def grading_inverse(t, q: float = DEFAULT_GRADING):
    t = np.asarray(t, dtype=float)
    a = t ** (1.0 / q)
    b = (1.0 - t) ** (1.0 / q)
    return a / (a + b)


def grading_difference(a, b, a_minus_b, q: float = DEFAULT_GRADING):
    r"""Compute :math:`w(a) - w(b)` given an accurate value of :math:`a - b`.

    Uses :math:`(a(1-b))^q - (b(1-a))^q` where the two bases differ by exactly
    :math:`a - b`, so nothing cancels when ``a`` and ``b`` are close.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    delta = np.asarray(a_minus_b, dtype=float)
    # 1 - b from the given difference keeps its accuracy when b rounds to 1
    bc = (1.0 - a) + delta
    da = a**q + (1.0 - a) ** q
    db = b**q + bc**q
    p = a * bc
    r = b * (1.0 - a)
    if q == 2.0:
        num = delta * (p + r)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            num = np.where(
                r > 0, r**q * np.expm1(q * np.log1p(delta / np.where(r > 0, r, 1.0))), p**q
            )
    return num / (da * db)


# }}}


# {{{ grid


@dataclass(frozen=True, eq=False)
class Grid:
    """Symmetric graded grid with ``n`` intervals."""

    n: int = DEFAULT_N
    q: float = DEFAULT_GRADING

    #: Uniform coordinates ``i / n``.
    x: np.ndarray = field(init=False, repr=False)
    #: Physical nodes ``t_i``.
    t: np.ndarray = field(init=False, repr=False)
    #: Complements ``1 - t_i`` computed without cancellation.
    tc: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"grid needs at least two intervals: n = {self.n}")
        if not self.q >= 1.0:
            raise DomainError(f"grading exponent must be >= 1: q = {self.q}")

        i = np.arange(self.n + 1)
        x = i / self.n
        xc = (self.n - i) / self.n
        t = grading(x, self.q)
        tc = grading(xc, self.q)
        for name, value in (("x", x), ("t", t), ("tc", tc)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.n == other.n and self.q == other.q

    def __hash__(self) -> int:
        return hash((self.n, self.q))

    @property
    def size(self) -> int:
        return self.n + 1

    @property
    def interior(self) -> slice:
        return slice(1, self.n)

    def to_x(self, t):
        return grading_inverse(t, self.q)

    def spacing_at(self, t: float) -> float:
        """Local node spacing in the physical coordinate."""
        return float(grading_derivative(self.to_x(t), self.q)) / self.n


def graded_grid(n: int = DEFAULT_N, q: float = DEFAULT_GRADING) -> Grid:
    return Grid(n, q)


# }}}


# {{{ sampled functions


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values on a :class:`Grid`, optionally with a fractional derivative channel.

    ``d_alpha_minus_1`` holds :math:`D^{\\alpha-1} u(t_i)`; entries where the
    derivative does not exist (typically :math:`t = 0`) are NaN.
    """

    grid: Grid
    values: np.ndarray
    d_alpha_minus_1: np.ndarray | None = None
    dirichlet: bool = False

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise DomainError(
                f"expected {self.grid.size} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("sampled values must be finite")
        if self.dirichlet:
            values[0] = values[-1] = 0.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        if self.d_alpha_minus_1 is not None:
            d = np.array(self.d_alpha_minus_1, dtype=float)
            if d.shape != values.shape:
                raise DomainError("derivative channel must match the grid")
            d.setflags(write=False)
            object.__setattr__(self, "d_alpha_minus_1", d)

    @classmethod
    def from_function(
        cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray], *, dirichlet: bool = False
    ) -> SampledFunction:
        values = np.broadcast_to(np.asarray(fn(grid.t), dtype=float), grid.t.shape)
        return cls(grid, values, dirichlet=dirichlet)

    def with_derivative(self, d_alpha_minus_1: np.ndarray) -> SampledFunction:
        return SampledFunction(self.grid, self.values, d_alpha_minus_1, self.dirichlet)

    @cached_property
    def spline(self):
        return make_interp_spline(self.grid.x, self.values, k=INTERPOLATION_DEGREE)

    def at_x(self, x) -> np.ndarray:
        return self.spline(x)

    def __call__(self, t) -> np.ndarray:
        return self.spline(self.grid.to_x(t))

    def __mul__(self, c: float) -> SampledFunction:
        return SampledFunction(self.grid, c * self.values, dirichlet=self.dirichlet)

    __rmul__ = __mul__

    @property
    def node_max(self) -> float:
        return float(np.max(np.abs(self.values)))

    def sup_norm(self) -> float:
        """Maximum of ``|u|`` over the interpolant, refined near the largest node."""
        v = np.abs(self.values)
        j = int(np.argmax(v))
        x = self.grid.x
        lo, hi = x[max(j - 1, 0)], x[min(j + 1, self.grid.n)]
        best = float(v[j])
        if hi > lo:
            res = minimize_scalar(
                lambda s: -abs(float(self.spline(s))),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1.0e-13},
            )
            best = max(best, -float(res.fun))
        return best


# }}}
