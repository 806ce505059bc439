r"""Gamma function, Green's function and Riemann-Liouville operators.

The Green's function of :math:`D^\alpha_{0+} u = 0`, :math:`u(0) = u(1) = 0`
is

.. math::

    G(t, s) = \frac{1}{\Gamma(\alpha)}
    \begin{cases}
        (t(1-s))^{\alpha-1} - (t-s)^{\alpha-1}, & 0 \le s \le t \le 1, \\
        (t(1-s))^{\alpha-1}, & 0 \le t \le s \le 1.
    \end{cases}

On the lower branch both terms are close for small :math:`s`, so the kernel
is evaluated in the cancellation-free form

.. math::

    (t-s)^{p} \operatorname{expm1}\left(p \log1p\frac{s(1-t)}{t-s}\right),
    \qquad p = \alpha - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from fracbvp.errors import DomainError, ResolutionError
from fracbvp.grid import SampledFunction, grading_derivative, grading_difference
from fracbvp.quadrature import SingularIntegrand, gauss_legendre, integrate, tanh_sinh_rule

Function = Union[SampledFunction, Callable[[np.ndarray], np.ndarray]]

#: Gauss-Legendre points per regular panel for sampled integrands.
PANEL_POINTS = 8
#: Refinement level of the fixed tanh-sinh rule on singular panels.
PANEL_TS_LEVEL = 4
#: Default accuracy target for the derivative; the stencil step is its cube root.
DERIVATIVE_TOL = 1.0e-12
MIN_GRID_INTERVALS = 32


# {{{ gamma function

# Lanczos approximation with g = 7 and nine terms
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


_SHIFT_TO = 10.0


def _gamma_lanczos(x: np.ndarray) -> np.ndarray:
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS[0])
    for k, c in enumerate(_LANCZOS[1:], start=1):
        acc = acc + c / (z + k)
    t = z + _LANCZOS_G + 0.5
    # t**(z + 1/2) exp(-t) = (t / e)**(z + 1/2) exp(-g); the power is split in
    # two so it cannot overflow before the final product
    half = (t / math.e) ** (0.5 * (z + 0.5))
    return math.sqrt(2.0 * math.pi) * math.exp(-_LANCZOS_G) * half * half * acc


def gamma_fn(x):
    """Gamma function for positive arguments.

    Uses the Lanczos approximation for ``x >= 1/2`` and the reflection formula
    :math:`\\Gamma(x)\\Gamma(1-x) = \\pi / \\sin(\\pi x)` below.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError(f"gamma_fn is only defined here for x > 0, got {x!r}")

    small = xa < 0.5
    out = np.empty_like(xa)
    if np.any(~small):
        xl = xa[~small]
        # large arguments: recur down to [_SHIFT_TO, _SHIFT_TO + 1), since the
        # power in the Lanczos form loses accuracy in proportion to x
        shift = np.where(xl > 2 * _SHIFT_TO, np.floor(xl) - _SHIFT_TO, 0.0)
        base = xl - shift
        value = _gamma_lanczos(base)
        for j in range(int(shift.max(initial=0.0))):
            active = j < shift
            value[active] *= base[active] + j
        out[~small] = value
    if np.any(small):
        xs = xa[small]
        out[small] = math.pi / (np.sin(math.pi * xs) * _gamma_lanczos(1.0 - xs))

    if out.ndim == 0:
        return float(out)
    return out


# }}}


# {{{ Green's function


@dataclass(frozen=True)
class FractionalOrder:
    """Order :math:`\\alpha \\in (1, 2]` of the boundary value problem."""

    alpha: float

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha <= 2.0:
            raise DomainError(f"order must lie in (1, 2]: alpha = {self.alpha}")

    @property
    def p(self) -> float:
        """The kernel exponent ``alpha - 1``."""
        return self.alpha - 1.0

    @property
    def gamma(self) -> float:
        return gamma_fn(self.alpha)


def _as_order(order) -> FractionalOrder:
    return order if isinstance(order, FractionalOrder) else FractionalOrder(float(order))


def green_kernel(p: float, t, s, t_minus_s, one_minus_s=None, *, one_minus_t=None):
    """Unnormalised kernel :math:`\\Gamma(\\alpha) G(t, s)` from accurate differences.

    The differences are passed in so that callers holding exact distances to
    the diagonal or to the right end keep full relative accuracy. Omitted
    complements are computed as ``1 - s`` and ``1 - t``.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    d = np.asarray(t_minus_s, dtype=float)
    sc = 1.0 - s if one_minus_s is None else np.asarray(one_minus_s, dtype=float)
    tc = 1.0 - t if one_minus_t is None else np.asarray(one_minus_t, dtype=float)
    upper = (t * sc) ** p

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = s * tc / d
        lower = d**p * np.expm1(p * np.log1p(ratio))
    return np.where(d > 0, lower, upper)


def green_value(order, t, s):
    """The Green's function :math:`G(t, s)` on the unit square."""
    order = _as_order(order)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any((t < 0) | (t > 1) | (s < 0) | (s > 1)):
        raise DomainError("green_value needs t, s in [0, 1]")

    g = green_kernel(order.p, t, s, t - s, 1.0 - s) / order.gamma
    if g.ndim == 0:
        return float(g)
    return g


@dataclass(frozen=True)
class KernelBounds:
    """Closed-form bounds on :math:`G(t, s)`.

    ``upper_a`` and ``upper_b`` are ``inf`` where their expression blows up;
    the matching ``*_infinite`` flag is then set.
    """

    lower: float
    upper_a: float
    upper_b: float
    upper_a_infinite: bool = False
    upper_b_infinite: bool = False

    @property
    def upper(self) -> float:
        return min(self.upper_a, self.upper_b)


def kernel_bounds(order, t: float, s: float) -> KernelBounds:
    r"""Evaluate

    .. math::

        \frac{\alpha-1}{\Gamma(\alpha)} t^{\alpha-1}(1-t)(1-s)^{\alpha-1}s
        \le G(t,s) \le
        \frac{1}{\Gamma(\alpha)} t^{\alpha-1}(1-t)(1-s)^{\alpha-2},
        \qquad
        G(t,s) \le \frac{1}{\Gamma(\alpha)} s(1-s)^{\alpha-1}t^{\alpha-2}.
    """
    order = _as_order(order)
    a, p, g = order.alpha, order.p, order.gamma
    t = float(t)
    s = float(s)
    if not (0.0 <= t <= 1.0 and 0.0 <= s <= 1.0):
        raise DomainError("kernel_bounds needs t, s in [0, 1]")

    lower = p / g * t**p * (1.0 - t) * (1.0 - s) ** p * s

    a_inf = s == 1.0 and a < 2.0
    upper_a = math.inf if a_inf else t**p * (1.0 - t) * (1.0 - s) ** (a - 2.0) / g

    b_inf = t == 0.0 and a < 2.0
    upper_b = math.inf if b_inf else s * (1.0 - s) ** p * t ** (a - 2.0) / g

    return KernelBounds(lower, upper_a, upper_b, a_inf, b_inf)


# }}}


# {{{ Riemann-Liouville integral


def _rl_integral_callable(order: float, f, t: float, exponent_at_0: float, tol: float) -> float:
    if t == 0.0:
        return 0.0
    if order >= 1.0:
        p = order - 1.0

        def integrand(s, dl, dr):
            return dr**p * f(s)

        result = integrate(
            SingularIntegrand(
                integrand,
                exponent_at_0=exponent_at_0,
                exponent_at_1=0.0,
                interval=(0.0, t),
                distances=True,
            ),
            tol,
        )
        return result.value / gamma_fn(order)

    # for small orders the kernel is nearly non-integrable; with
    # sigma = (t - s)^nu the weight becomes d(sigma) / nu
    inv = 1.0 / order
    top = t**order

    def substituted(sigma, dl, dr):
        near = t - dl**inv
        with np.errstate(divide="ignore"):
            far = -t * np.expm1(inv * np.log1p(-dr / top))
        return f(np.where(dl <= dr, near, far))

    result = integrate(
        SingularIntegrand(
            substituted,
            exponent_at_0=0.0,
            exponent_at_1=min(exponent_at_0, 0.0),
            interval=(0.0, top),
            distances=True,
        ),
        tol,
    )
    return result.value / gamma_fn(order + 1.0)


def _panels_towards(xt: float, n: int, order: float):
    """Nodes on ``[0, xt]`` in the uniform coordinate, graded towards ``xt``.

    Returns positions, distances to ``xt``, weights and a mask of nodes whose
    weight already contains the kernel factor in the uniform coordinate. Knots of the grid are
    panel ends; the panel touching ``xt`` gets a tanh-sinh rule and the one
    before it is split geometrically so every Gauss panel is at least its own
    width away from ``xt``.
    """
    width = 1.0 / n
    j = int(np.searchsorted(np.arange(n + 1) / n, xt, side="left"))
    last = (j - 1) / n
    d = xt - last

    gx, gw = gauss_legendre(PANEL_POINTS)
    ts = tanh_sinh_rule(PANEL_TS_LEVEL)

    # singular panel [last, xt]; below order one it is integrated in
    # sigma = (xt - x)^nu so the kernel factor is absorbed into the weights
    keep = ts.weights > 0
    absorbed = order < 1.0
    if absorbed:
        inv = 1.0 / order
        top = d**order
        hw = 0.5 * top
        sig_l = hw * ts.one_plus[keep]
        sig_r = hw * ts.one_minus[keep]
        near = sig_l**inv
        # distance from ``last`` for nodes close to it
        with np.errstate(divide="ignore"):
            far = -d * np.expm1(inv * np.log1p(-sig_r / top))
        close = sig_l <= sig_r
        dist_ts = np.where(close, near, d - far)
        x_ts = np.where(close, xt - near, last + far)
        w_ts = hw * ts.weights[keep] * inv
    else:
        hw = 0.5 * d
        dist_ts = hw * ts.one_minus[keep]
        left = ts.one_plus[keep] <= ts.one_minus[keep]
        x_ts = np.where(left, last + hw * ts.one_plus[keep], xt - dist_ts)
        w_ts = hw * ts.weights[keep]
    flag_ts = np.full(w_ts.shape, absorbed)

    # panels described by the distance of their right end to xt and their width
    right, widths = [], []
    if j >= 2:
        e = d
        stop = d + width
        while e < stop:
            e_next = min(2.0 * e, stop)
            right.append(e)
            widths.append(e_next - e)
            e = e_next
        k = np.arange(1, j - 1)
        right.extend(d + k * width)
        widths.extend(np.full(k.size, width))

    if right:
        right = np.asarray(right)[:, None]
        half = 0.5 * np.asarray(widths)[:, None]
        dist_gl = (right + half * (1.0 - gx)).ravel()
        w_gl = (half * gw).ravel()
        x_gl = xt - dist_gl
        x = np.concatenate([x_ts, x_gl])
        dist = np.concatenate([dist_ts, dist_gl])
        w = np.concatenate([w_ts, w_gl])
        flag = np.concatenate([flag_ts, np.zeros(w_gl.shape, dtype=bool)])
    else:
        x, dist, w, flag = x_ts, dist_ts, w_ts, flag_ts

    return np.clip(x, 0.0, 1.0), dist, w, flag


def _rl_integral_sampled(order: float, u: SampledFunction, t: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"sampled functions live on [0, 1]: t = {t}")
    if t == 0.0:
        return 0.0
    grid = u.grid
    xt = float(grid.to_x(t))
    x, dist, w, absorbed = _panels_towards(xt, grid.n, order)
    # nodes that round onto ``xt`` carry negligible weight
    live = dist > 0
    x, dist, w, absorbed = x[live], dist[live], w[live], absorbed[live]

    gap = grading_difference(xt, x, dist, grid.q)
    # gaps that underflow (t = 1, dist^q < tiny) carry weight o(dist^(q-1) nu)
    live = gap > 0
    x, dist, w, absorbed, gap = x[live], dist[live], w[live], absorbed[live], gap[live]
    # physical over uniform distance
    kernel = np.where(absorbed, gap / dist, gap) ** (order - 1.0)
    values = u.at_x(x) * grading_derivative(x, grid.q)
    return float(np.sum(w * kernel * values)) / gamma_fn(order)


def rl_integral(order: float, f: Function, t, *, exponent_at_0: float = 0.0, tol: float = 1.0e-15):
    r"""Riemann-Liouville integral

    .. math::

        I^\nu_{0+} f(t) = \frac{1}{\Gamma(\nu)} \int_0^t (t-s)^{\nu-1} f(s)\,\mathrm{d}s.

    ``f`` is either a vectorised callable or a :class:`SampledFunction`. For a
    callable, ``exponent_at_0`` may declare an algebraic singularity
    :math:`f(s) \sim s^{\lambda}` at the origin.
    """
    order = float(order)
    if not order > 0:
        raise DomainError(f"integration order must be positive: {order}")

    def one(ti: float) -> float:
        ti = float(ti)
        if ti < 0:
            raise DomainError(f"rl_integral needs t >= 0, got {ti}")
        if isinstance(f, SampledFunction):
            return _rl_integral_sampled(order, f, ti)
        return _rl_integral_callable(order, f, ti, exponent_at_0, tol)

    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        return one(t_arr)
    return np.array([one(ti) for ti in t_arr.ravel()]).reshape(t_arr.shape)


# }}}


# {{{ Riemann-Liouville derivative


def rl_derivative(order, u: Function, t, *, tol: float = DERIVATIVE_TOL):
    r"""Riemann-Liouville derivative of order :math:`\nu \in (0, 2]`.

    With :math:`n = \lceil \nu \rceil`, this is the :math:`n`-th centred divided
    difference of :math:`v = I^{n - \nu}_{0+} u` with step ``tol ** (1/3)``.
    Integer orders difference ``u`` itself.

    :raises DomainError: if the stencil leaves the domain of ``u``.
    :raises ResolutionError: if a sampled ``u`` lives on a grid that is too coarse.
    """
    nu = order.alpha if isinstance(order, FractionalOrder) else float(order)
    if not 0.0 < nu <= 2.0:
        raise DomainError(f"derivative order must lie in (0, 2]: {nu}")
    n = math.ceil(nu)
    h = tol ** (1.0 / 3.0)
    sampled = isinstance(u, SampledFunction)

    if sampled and u.grid.n < MIN_GRID_INTERVALS:
        raise ResolutionError(
            f"grid has {u.grid.n} intervals; at least {MIN_GRID_INTERVALS} are needed"
        )

    def v(points: np.ndarray) -> np.ndarray:
        if nu == n:
            return np.asarray(u(points), dtype=float)
        return np.array([rl_integral(n - nu, u, p) for p in points])

    def one(ti: float) -> float:
        if not ti - h > 0.0:
            raise DomainError(f"stencil around t = {ti} reaches t <= 0 (step {h:.2e})")
        if sampled and ti + h > 1.0:
            raise DomainError(f"stencil around t = {ti} leaves [0, 1] (step {h:.2e})")
        if n == 1:
            vm, vp = v(np.array([ti - h, ti + h]))
            return (vp - vm) / (2.0 * h)
        vm, v0, vp = v(np.array([ti - h, ti, ti + h]))
        return (vp - 2.0 * v0 + vm) / h**2

    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        return one(float(t_arr))
    return np.array([one(float(ti)) for ti in t_arr.ravel()]).reshape(t_arr.shape)


# }}}
