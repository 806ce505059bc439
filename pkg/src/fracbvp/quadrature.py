r"""Quadrature for integrands with algebraic endpoint singularities.

The workhorse is the double-exponential (tanh-sinh) rule

.. math::

    \int_a^b F(s)\,\mathrm{d}s \approx h \sum_k w_k F(s_k), \qquad
    s_k = \frac{a+b}{2} + \frac{b-a}{2}\tanh\left(\frac{\pi}{2}\sinh(kh)\right),

refined by halving :math:`h` until successive estimates agree. Node
distances to both ends of the interval are tabulated directly, so integrands
that need :math:`b - s` near a singular endpoint can get it without
cancellation (see :attr:`SingularIntegrand.distances`).

The module also hosts composite panel rules (Gauss-Legendre on smooth panels,
a fixed tanh-sinh rule on singular ones) and the admissibility checks for
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from fracbvp.errors import DomainError, QuadratureBudgetError, QuadratureError

HALF_PI = 0.5 * math.pi

#: Smallest and largest truncation points of the tanh-sinh abscissa.
TAU_MIN = 3.0
TAU_MAX = 6.1

#: Levels are ``h = 2**-level``; the budget stops at this level.
DEFAULT_MAX_LEVEL = 10
MIN_LEVEL = 3
ROUNDOFF = 4.0 * np.finfo(float).eps

#: Weights with values above this are treated as "escaped" by :func:`check_H2`.
OVERFLOW_GUARD = 1.0e12


# {{{ node tables


@dataclass(frozen=True)
class TanhSinhNodes:
    """Tanh-sinh nodes on :math:`[-1, 1]`, stored as distances to both ends."""

    #: :math:`1 + x_k`, distance to the left end.
    one_plus: np.ndarray
    #: :math:`1 - x_k`, distance to the right end.
    one_minus: np.ndarray
    #: Weights including the step :math:`h`.
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


def _ts_from_tau(tau: np.ndarray, h: float) -> TanhSinhNodes:
    y = HALF_PI * np.sinh(tau)
    # 1 - tanh(y) = 2 / (exp(2y) + 1), evaluated without cancellation
    e = np.exp(-2.0 * np.abs(y))
    far = 2.0 * e / (1.0 + e)
    near = 2.0 - far
    one_minus = np.where(y >= 0, far, near)
    one_plus = np.where(y >= 0, near, far)
    # sech^2(y) = 4 e / (1 + e)^2
    weights = h * HALF_PI * np.cosh(tau) * 4.0 * e / (1.0 + e) ** 2
    _freeze(one_plus, one_minus, weights)
    return TanhSinhNodes(one_plus, one_minus, weights)


@lru_cache(maxsize=256)
def tanh_sinh_level(level: int, tau_max: float) -> TanhSinhNodes:
    """Nodes that are *new* at refinement ``level`` (all nodes for level 0)."""
    h = 2.0**-level
    kmax = int(math.floor(tau_max / h))
    k = np.arange(-kmax, kmax + 1)
    if level > 0:
        k = k[k % 2 != 0]
    return _ts_from_tau(k * h, h)


@lru_cache(maxsize=64)
def tanh_sinh_rule(level: int, tau_max: float = 4.5) -> TanhSinhNodes:
    """The complete fixed rule with step ``2**-level``."""
    h = 2.0**-level
    kmax = int(math.floor(tau_max / h))
    return _ts_from_tau(np.arange(-kmax, kmax + 1) * h, h)


@lru_cache(maxsize=64)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on :math:`[-1, 1]`."""
    x, w = np.polynomial.legendre.leggauss(m)
    _freeze(x, w)
    return x, w


# }}}


# {{{ adaptive integration


@dataclass(frozen=True)
class SingularIntegrand:
    r"""An integrand with declared algebraic behaviour at the interval ends.

    The integrand behaves like :math:`(s - a)^{\lambda_0}` near the lower end
    and like :math:`(b - s)^{\lambda_1}` near the upper end. The exponents are
    only used to reject divergent integrals and to pick how far the tanh-sinh
    abscissae extend towards each end.
    """

    evaluator: Callable[..., np.ndarray]
    exponent_at_0: float = 0.0
    exponent_at_1: float = 0.0
    #: Interior point with a derivative discontinuity; the interval is split there.
    kink: float | None = None
    interval: tuple[float, float] = (0.0, 1.0)
    #: If true, the evaluator is called as ``F(s, s - lo, hi - s)`` where
    #: ``[lo, hi]`` is the current subinterval (split at the kink).
    distances: bool = False

    def __post_init__(self) -> None:
        a, b = self.interval
        if not a < b:
            raise DomainError(f"empty integration interval: [{a}, {b}]")
        if not (self.exponent_at_0 > -1 and self.exponent_at_1 > -1):
            raise DomainError(
                "integral diverges: endpoint exponents must exceed -1, got "
                f"{self.exponent_at_0} and {self.exponent_at_1}"
            )
        if self.kink is not None and not a < self.kink < b:
            raise DomainError(f"kink {self.kink} is not inside ({a}, {b})")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int
    levels: tuple[int, ...] = field(default=(), compare=False)


def _tau_for_exponent(lam: float, half_width: float, tol: float) -> float:
    # truncating at distance d drops roughly d**(lam + 1) / (lam + 1)
    lam1 = lam + 1.0
    log_d = math.log(0.01 * tol * lam1) / lam1
    log_rel = log_d - math.log(half_width) - math.log(2.0)
    if log_rel >= 0.0:
        return TAU_MIN
    return math.asinh(-log_rel / math.pi)


def _tau_max(lam0: float, lam1: float, half_width: float, tol: float) -> float:
    tau = max(
        _tau_for_exponent(lam0, half_width, tol),
        _tau_for_exponent(lam1, half_width, tol),
    )
    return round(min(max(tau, TAU_MIN), TAU_MAX), 2)


def _evaluate(integrand: SingularIntegrand, lo: float, hi: float, nodes: TanhSinhNodes):
    hw = 0.5 * (hi - lo)
    dl = hw * nodes.one_plus
    dr = hw * nodes.one_minus
    s = np.where(nodes.one_plus <= nodes.one_minus, lo + dl, hi - dr)
    if integrand.distances:
        fx = integrand.evaluator(s, dl, dr)
    else:
        fx = integrand.evaluator(s)
    fx = np.broadcast_to(np.asarray(fx, dtype=float), s.shape)

    w = hw * nodes.weights
    mask = w > 0.0
    if not np.all(np.isfinite(fx[mask])):
        bad = s[mask][~np.isfinite(fx[mask])]
        raise QuadratureError(f"non-finite integrand value at s = {bad[0]!r}")

    terms = w[mask] * fx[mask]
    return float(np.sum(terms)), float(np.sum(np.abs(terms)))


def _integrate_piece(
    integrand: SingularIntegrand,
    lo: float,
    hi: float,
    lam0: float,
    lam1: float,
    tol: float,
    max_level: int,
) -> tuple[float, float, int, int]:
    tau_max = _tau_max(lam0, lam1, 0.5 * (hi - lo), tol)

    nodes = tanh_sinh_level(0, tau_max)
    estimate, magnitude = _evaluate(integrand, lo, hi, nodes)
    evaluations = nodes.size
    error = math.inf

    for level in range(1, max_level + 1):
        nodes = tanh_sinh_level(level, tau_max)
        value, absolute = _evaluate(integrand, lo, hi, nodes)
        new = 0.5 * estimate + value
        magnitude = 0.5 * magnitude + absolute
        evaluations += nodes.size

        # the change between levels, floored at the rounding level of the sum
        floor = ROUNDOFF * magnitude
        error = float(max(abs(new - estimate), floor))
        estimate = new
        if level >= MIN_LEVEL and error <= max(tol, floor):
            return estimate, error, evaluations, level

    raise QuadratureBudgetError(
        f"tanh-sinh did not reach tolerance {tol:.3e} on [{lo}, {hi}] "
        f"after level {max_level} (best {estimate!r}, change {error:.3e})",
        estimate=estimate,
        error_estimate=error,
    )


def integrate(
    integrand: SingularIntegrand,
    tolerance: float = 1.0e-12,
    *,
    max_level: int = DEFAULT_MAX_LEVEL,
) -> QuadratureResult:
    """Integrate over ``integrand.interval`` to the requested absolute tolerance.

    The returned ``error_estimate`` is the change between the last two
    refinement levels, which is also the stopping statistic.

    :raises QuadratureBudgetError: if ``max_level`` is reached first; the
        exception carries the best estimate.
    """
    if not tolerance > 0:
        raise DomainError(f"tolerance must be positive: {tolerance}")

    a, b = integrand.interval
    if integrand.kink is None:
        pieces = [(a, b, integrand.exponent_at_0, integrand.exponent_at_1)]
    else:
        c = integrand.kink
        pieces = [
            (a, c, integrand.exponent_at_0, 0.0),
            (c, b, 0.0, integrand.exponent_at_1),
        ]

    value = error = 0.0
    evaluations = 0
    levels = []
    for lo, hi, lam0, lam1 in pieces:
        v, e, n, level = _integrate_piece(
            integrand, lo, hi, lam0, lam1, tolerance / len(pieces), max_level
        )
        value += v
        error += e
        evaluations += n
        levels.append(level)

    return QuadratureResult(value, error, evaluations, tuple(levels))


# }}}


# {{{ composite panel rules


@dataclass(frozen=True)
class PanelNodes:
    """Quadrature nodes for a union of panels.

    Positions are stored together with their distances to a reference point
    on each side so the caller can rebuild differences without cancellation.
    """

    x: np.ndarray
    weights: np.ndarray
    #: Index of the panel each node belongs to.
    panel: np.ndarray


def panel_rule(
    breaks: np.ndarray,
    *,
    m: int = 8,
    singular: Sequence[int] = (),
    ts_level: int = 3,
    ts_tau: float = 4.5,
) -> PanelNodes:
    """Composite rule over ``breaks``.

    Panels listed in ``singular`` get the fixed tanh-sinh rule (which tolerates
    algebraic end singularities); all others get ``m``-point Gauss-Legendre.
    Panel ``0`` nodes are placed as ``breaks[0] + distance`` and the last
    panel's as ``breaks[-1] - distance`` so both extreme ends keep full
    relative precision.
    """
    breaks = np.asarray(breaks, dtype=float)
    npanels = breaks.size - 1
    gx, gw = gauss_legendre(m)
    ts = tanh_sinh_rule(ts_level, ts_tau)
    singular = set(int(j) for j in singular)

    xs, ws, ps = [], [], []
    for j in range(npanels):
        lo, hi = breaks[j], breaks[j + 1]
        hw = 0.5 * (hi - lo)
        if j in singular:
            dl = hw * ts.one_plus
            dr = hw * ts.one_minus
            x = np.where(ts.one_plus <= ts.one_minus, lo + dl, hi - dr)
            w = hw * ts.weights
            keep = w > 0
            x, w = x[keep], w[keep]
        else:
            x = lo + hw * (1.0 + gx)
            w = hw * gw
        xs.append(x)
        ws.append(w)
        ps.append(np.full(x.size, j))

    return PanelNodes(np.concatenate(xs), np.concatenate(ws), np.concatenate(ps))


# }}}


# {{{ admissibility checks


@dataclass(frozen=True)
class CheckResult:
    status: str
    detail: str
    report: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return self.status == "Pass"


def check_H1(order, weight, *, kmin: int = 4, kmax: int = 20) -> CheckResult:
    r"""Integrability of :math:`s^{\alpha - 1} h(s)` on :math:`(0, 1)`.

    A weight with a declared exponent (``h ~ t**-beta`` at 0) is decided by the
    exact rule ``beta < alpha``. Otherwise the tail increments of
    :math:`F(\delta) = \int_\delta^1 s^{\alpha-1} h(s)\,\mathrm{d}s` over
    :math:`\delta = 2^{-k}` are examined; geometric decay gives a ``Pass``,
    anything else is ``Inconclusive``.
    """
    alpha = float(getattr(order, "alpha", order))
    beta = getattr(weight, "beta", None)

    if beta is not None:
        report = {"mode": "declared", "alpha": alpha, "beta": beta}
        if beta < alpha:
            return CheckResult("Pass", f"(H1) holds: beta={beta:g} < alpha={alpha:g}", report)
        return CheckResult(
            "Fail",
            f"(H1) violated: s^(alpha-1) h(s) ~ s^{alpha - 1 - beta:g} is not "
            f"integrable at 0 (beta={beta:g} >= alpha={alpha:g})",
            report,
        )

    def piece(lo: float, hi: float) -> float:
        integrand = SingularIntegrand(
            lambda s: s ** (alpha - 1) * weight(s), interval=(lo, hi)
        )
        return integrate(integrand, 1.0e-12 * (hi - lo)).value

    increments = np.array([piece(2.0 ** -(k + 1), 2.0**-k) for k in range(kmin, kmax)])
    body = piece(2.0**-kmin, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = increments[1:] / increments[:-1]
    tail = ratios[len(ratios) // 2 :]

    report = {
        "mode": "numerical",
        "alpha": alpha,
        "F_body": body,
        "increments": increments.tolist(),
        "ratios": ratios.tolist(),
    }
    if increments[-1] == 0.0 or (np.all(np.isfinite(tail)) and tail.max() < 0.95):
        rho = float(tail.max()) if increments[-1] > 0 else 0.0
        bound = increments[-1] * rho / (1.0 - rho)
        report["tail_bound"] = bound
        return CheckResult(
            "Pass",
            f"(H1) tail increments decay geometrically (ratio <= {rho:.3f}, "
            f"remaining tail <= {bound:.3e})",
            report,
        )
    return CheckResult(
        "Inconclusive",
        "(H1) tail increments do not decay geometrically on the sampled range",
        report,
    )


@dataclass(frozen=True)
class H2Result:
    status: str
    maxima: tuple[float, ...]
    detail: str

    @property
    def passed(self) -> bool:
        return self.status == "Pass"


def check_H2(weight, probe_intervals, *, samples: int = 2049) -> H2Result:
    """Boundedness of the weight on compact subintervals of ``(0, 1]``."""
    probe_intervals = list(probe_intervals)
    if not probe_intervals:
        raise DomainError("check_H2 needs at least one probe interval")

    maxima = []
    failed = []
    for lo, hi in probe_intervals:
        if not 0.0 < lo <= hi <= 1.0:
            raise DomainError(f"probe interval [{lo}, {hi}] is not inside (0, 1]")
        t = np.linspace(lo, hi, samples)
        with np.errstate(all="ignore"):
            values = np.broadcast_to(np.asarray(weight(t), dtype=float), t.shape)
        if np.all(np.isfinite(values)):
            vmax = float(np.max(np.abs(values)))
        else:
            vmax = math.inf
        maxima.append(vmax)
        if not vmax <= OVERFLOW_GUARD:
            failed.append((lo, hi))

    if failed:
        lo, hi = failed[0]
        return H2Result(
            "Fail", tuple(maxima), f"(H2) violated: weight is unbounded on [{lo:g}, {hi:g}]"
        )
    return H2Result("Pass", tuple(maxima), "(H2) holds on all probe intervals")


# }}}
