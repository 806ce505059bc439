r"""Numerical certificates for the existence of a positive solution.

A positive solution lies in an annulus :math:`r \le \|u\|_\infty \le R` of the
cone :math:`K` whenever :math:`S` pushes outwards on one boundary sphere and
inwards on the other. Both situations are driven by the behaviour of
:math:`f(u)/u` near zero and at infinity:

``A1`` (superlinear)
    :math:`f_0 = 0` and :math:`f_\infty = \infty`. Small spheres are compressed
    and large spheres expanded.
``A2`` (sublinear)
    :math:`f_0 = \infty` and :math:`f_\infty = 0`. Small spheres are expanded and
    large spheres compressed.

The radii follow from two weight integrals,

.. math::

    I_s = \frac{1}{\Gamma(\alpha)}\int_0^1 (s(1-s))^{\alpha-1} h(s)\,\mathrm{d}s,
    \qquad
    I_m = \int_{1/4}^{3/4} G(1/2, s) h(s)\,\mathrm{d}s,

and from logarithmic scans of :math:`f(u)/u`. A certificate is numerical
evidence, and :func:`verify_certificate_by_sampling` re-checks the boundary
inequalities on a family of cone functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from fracbvp.errors import AsymptoteNotDetected, ContractError, DomainError, PreconditionError
from fracbvp.fractional_core import green_kernel
from fracbvp.grid import SampledFunction
from fracbvp.problem import NonlinearitySpec, ProblemSpec

logger = logging.getLogger(__name__)

__all__ = [
    "Certificate",
    "Classification",
    "SamplingReport",
    "certify",
    "certify_case1",
    "certify_case2",
    "classify_nonlinearity",
    "verify_certificate_by_sampling",
    "weight_integrals",
]

#: Range and density of the scalar scans.
SCAN_LO = 1.0e-8
SCAN_HI = 1.0e9
SAMPLES_PER_DECADE = 400
#: Bisection steps in the logarithm after a crossing is bracketed.
BISECTION_STEPS = 60

EPSILON_CAP = 0.49
ZETA_FACTOR = 0.99
RADIUS_SLACK = 1.01
#: The constant of the lower estimate ``u >= (alpha - 1) ||u|| / 16`` on [1/4, 3/4].
MID_CONSTANT = 16.0

#: Classification scan of ``f(u)/u`` for expression nonlinearities.
CLASSIFY_RANGE = (1.0e-6, 1.0e6)
CLASSIFY_SAMPLES = 241
#: Log-slopes smaller than this in magnitude count as flat.
SLOPE_TOL = 1.0e-2

VERIFY_SLACK = 1.0e-9


# {{{ classification


@dataclass(frozen=True)
class Classification:
    """Growth class of ``f`` with estimates of the limits of ``f(u)/u``."""

    cls: str
    p: float | None
    f0: float
    f_inf: float
    detail: str = ""


def _scan_points(lo: float, hi: float, per_decade: int) -> np.ndarray:
    decades = math.log10(hi / lo)
    return np.logspace(math.log10(lo), math.log10(hi), int(round(decades * per_decade)) + 1)


def classify_nonlinearity(f: NonlinearitySpec) -> Classification:
    r"""Decide between ``A1``, ``A2`` and ``Neither``.

    Power nonlinearities :math:`u^\theta` are classified exactly: ``A2`` for
    :math:`\theta < 1`, ``A1`` with :math:`p = \theta + 1` for :math:`\theta > 1`.
    Expressions are scanned: the log-slope of :math:`f(u)/u` must keep one
    strict sign over the first and over the last decade of the scan, and it
    must agree with the declared class if one is given.

    :raises DomainError: if ``f`` is negative somewhere on the scan.
    """
    if f.kind == "power":
        theta = f.theta
        if theta < 1.0:
            return Classification("A2", None, math.inf, 0.0, f"u^{theta:g} is sublinear")
        if theta > 1.0:
            return Classification("A1", theta + 1.0, 0.0, math.inf, f"u^{theta:g} is superlinear")
        return Classification("Neither", None, 1.0, 1.0, "f(u) = u is linear")

    u = _scan_points(*CLASSIFY_RANGE, (CLASSIFY_SAMPLES - 1) // 12)
    values = np.asarray(f(u), dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("f is not finite on the classification scan")
    if np.any(values < 0):
        raise DomainError(f"f is negative at u = {u[np.argmax(values < 0)]:g}")

    ratio = values / u
    f0, f_inf = float(ratio[0]), float(ratio[-1])
    if np.any(ratio == 0):
        return Classification("Neither", None, f0, f_inf, "f vanishes on part of the scan")

    per_decade = (u.size - 1) // 12
    slopes = np.diff(np.log(ratio)) / np.diff(np.log(u))
    head, tail = slopes[:per_decade], slopes[-per_decade:]

    def trend(s: np.ndarray) -> int:
        if np.all(s > SLOPE_TOL):
            return 1
        if np.all(s < -SLOPE_TOL):
            return -1
        return 0

    at0, at_inf = trend(head), trend(tail)
    if at0 == 1 and at_inf == 1:
        found = "A1"
    elif at0 == -1 and at_inf == -1:
        found = "A2"
    else:
        found = "Neither"

    declared = f.declared_class
    if declared != "unknown" and found != declared:
        return Classification(
            "Neither", None, f0, f_inf,
            f"declared class {declared} is not supported by the scan (found {found})",
        )

    p = None
    if found == "A1":
        # f grows like u^(1 + slope) at infinity
        p = f.p if f.p is not None else float(2.0 + np.max(tail))
    detail = f"log-slope of f(u)/u: {np.mean(head):+.3f} near 0, {np.mean(tail):+.3f} at infinity"
    if found == "A1":
        return Classification("A1", p, 0.0, math.inf, detail)
    if found == "A2":
        return Classification("A2", None, math.inf, 0.0, detail)
    return Classification("Neither", None, f0, f_inf, detail)


# }}}


# {{{ weight integrals


def weight_integrals(problem: ProblemSpec, *, tol: float = 1.0e-12) -> tuple[float, float]:
    r"""Return :math:`(I_s, I_m)` for the weight of ``problem``."""
    from fracbvp.quadrature import SingularIntegrand, integrate

    order = problem.order
    p = order.p
    h = problem.h
    beta = problem.weight.beta or 0.0

    small = integrate(
        SingularIntegrand(
            lambda s, dl, dr: (dl * dr) ** p * h(s),
            exponent_at_0=p - beta,
            exponent_at_1=p,
            distances=True,
        ),
        tol,
    ).value / order.gamma

    def mid(s, dl, dr):
        # dr is 1/2 - s on the left piece and 3/4 - s on the right piece
        left = s <= 0.5
        kernel = green_kernel(p, 0.5, s, np.where(left, dr, -1.0), 1.0 - s, one_minus_t=0.5)
        return kernel * h(s)

    middle = integrate(
        SingularIntegrand(mid, kink=0.5, interval=(0.25, 0.75), distances=True), tol
    ).value / order.gamma
    return float(small), float(middle)


# }}}


# {{{ scalar scans


def _bisect(pred: Callable[[float], bool], good: float, bad: float) -> float:
    """Refine a bracket between a point where ``pred`` holds and one where it fails."""
    lg, lb = math.log(good), math.log(bad)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lg + lb)
        if pred(math.exp(mid)):
            lg = mid
        else:
            lb = mid
    return math.exp(lg)


def _largest_radius(holds: Callable[[np.ndarray], np.ndarray], what: str) -> float:
    """Largest ``r`` such that ``holds`` is true on every scan point in ``(0, r]``."""
    u = _scan_points(SCAN_LO, SCAN_HI, SAMPLES_PER_DECADE)
    ok = np.asarray(holds(u), dtype=bool)
    if not ok[0]:
        raise AsymptoteNotDetected(f"{what}: condition fails already at the bottom of the scan", SCAN_LO)
    if np.all(ok):
        return float(u[-1])
    k = int(np.argmin(ok))
    return _bisect(lambda v: bool(holds(np.array([v]))[0]), float(u[k - 1]), float(u[k]))


def _smallest_threshold(holds: Callable[[np.ndarray], np.ndarray], what: str) -> float:
    """Smallest ``M`` such that ``holds`` is true on every scan point above ``M``."""
    u = _scan_points(SCAN_LO, SCAN_HI, SAMPLES_PER_DECADE)
    ok = np.asarray(holds(u), dtype=bool)
    if not ok[-1]:
        raise AsymptoteNotDetected(f"{what}: tail condition not reached", SCAN_HI)
    if np.all(ok):
        return float(u[0])
    k = int(np.flatnonzero(~ok)[-1])
    return _bisect(lambda v: bool(holds(np.array([v]))[0]), float(u[k + 1]), float(u[k]))


# }}}


# {{{ certificates


@dataclass(frozen=True)
class Certificate:
    """Annulus constants. ``rate_small`` and ``rate_large`` are ``(eps, rho)``
    for ``A1`` and ``(L, zeta)`` for ``A2``; ``threshold`` is ``M*`` or ``L2``.
    """

    case: str
    small_radius: float
    large_radius: float
    rate_small: float
    rate_large: float
    threshold: float
    integral_small: float
    integral_mid: float
    valid: bool
    alpha: float = field(default=math.nan)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> Certificate:
        return cls(**data)


def _require(problem: ProblemSpec, wanted: str) -> Classification:
    c = classify_nonlinearity(problem.nonlinearity)
    if c.cls != wanted:
        raise PreconditionError(
            f"this certificate needs growth class {wanted}, the nonlinearity is {c.cls}"
            + (f" ({c.detail})" if c.detail else "")
        )
    return c


def _ratio(problem: ProblemSpec) -> Callable[[np.ndarray], np.ndarray]:
    def ratio(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.asarray(problem.f(u), dtype=float) / u

    return ratio


def certify_case1(problem: ProblemSpec) -> Certificate:
    r"""Superlinear case: compression on :math:`\|u\| = r`, expansion on :math:`\|u\| = R`.

    :raises PreconditionError: unless ``f`` is classified ``A1``.
    :raises AsymptoteNotDetected: if :math:`f(u)/u \ge \rho` is not reached by the scan cap.
    """
    _require(problem, "A1")
    alpha = problem.alpha
    i_small, i_mid = weight_integrals(problem)
    ratio = _ratio(problem)

    eps = min(EPSILON_CAP, 1.0 / i_small)
    r = _largest_radius(lambda u: ratio(u) <= eps, "radius r with f(u) <= eps u")
    rho = MID_CONSTANT / ((alpha - 1.0) * i_mid)
    m_star = _smallest_threshold(lambda u: ratio(u) >= rho, "threshold M* with f(u) >= rho u")
    big = RADIUS_SLACK * max(MID_CONSTANT * m_star / (alpha - 1.0), r)

    valid = 0.0 < r < big and math.isfinite(big)
    logger.info("case 1: eps=%.6g r=%.6g rho=%.6g M*=%.6g R=%.6g", eps, r, rho, m_star, big)
    return Certificate("A1", r, big, eps, rho, m_star, i_small, i_mid, valid, alpha)


def certify_case2(problem: ProblemSpec) -> Certificate:
    r"""Sublinear case: expansion on :math:`\|u\| = r_1`, compression on :math:`\|u\| = R_2`.

    :raises PreconditionError: unless ``f`` is classified ``A2``.
    :raises AsymptoteNotDetected: if :math:`f(u)/u \le \zeta` is not reached by the scan cap.
    """
    _require(problem, "A2")
    alpha = problem.alpha
    i_small, i_mid = weight_integrals(problem)
    ratio = _ratio(problem)

    rate = MID_CONSTANT / ((alpha - 1.0) * i_mid)
    r1 = _largest_radius(lambda u: ratio(u) >= rate, "radius r1 with f(u) >= L u")
    zeta = ZETA_FACTOR / i_small
    l2 = _smallest_threshold(lambda u: ratio(u) <= zeta, "threshold L2 with f(u) <= zeta u")

    u = np.concatenate([[0.0], _scan_points(SCAN_LO, max(l2, SCAN_LO), SAMPLES_PER_DECADE)])
    f_max = float(np.max(problem.f(u)))
    big = RADIUS_SLACK * max(l2, f_max * i_small / (1.0 - zeta * i_small))

    valid = 0.0 < r1 < big and math.isfinite(big)
    logger.info("case 2: L=%.6g r1=%.6g zeta=%.6g L2=%.6g R2=%.6g", rate, r1, zeta, l2, big)
    return Certificate("A2", r1, big, rate, zeta, l2, i_small, i_mid, valid, alpha)


def certify(problem: ProblemSpec) -> Certificate:
    """Classify ``f`` and build the matching certificate."""
    c = classify_nonlinearity(problem.nonlinearity)
    if c.cls == "A1":
        return certify_case1(problem)
    if c.cls == "A2":
        return certify_case2(problem)
    raise PreconditionError(f"no certificate for growth class {c.cls}: {c.detail}")


# }}}


# {{{ verification


@dataclass(frozen=True)
class SamplingReport:
    violations: int
    worst_margin: float
    #: One entry per family member with the margins on both spheres.
    samples: tuple[dict, ...]


def boundary_family(grid, alpha: float, size: int) -> list[SampledFunction]:
    r"""Cone functions of unit sup-norm.

    The first member is the normalised floor :math:`4t(1-t)`, the others are
    :math:`\max\{(\alpha-1)t(1-t), \mathrm{hat}_c(t)\}` with hat peaks
    at equispaced :math:`c \in (0, 1)`.
    """
    if size < 1:
        raise DomainError(f"family size must be positive, got {size}")
    t, tc = grid.t, grid.tc
    floor = (alpha - 1.0) * t * tc
    family = [SampledFunction(grid, 4.0 * t * tc, dirichlet=True)]
    if size > 1:
        width = 1.0 / size
        for c in np.arange(1, size) / size:
            hat = np.maximum(0.0, 1.0 - np.abs(t - c) / width)
            values = np.maximum(floor, hat)
            # peaks between nodes: rescale to unit norm over the nodes
            family.append(SampledFunction(grid, values / np.max(values), dirichlet=True))
    return family


def verify_certificate_by_sampling(
    problem: ProblemSpec, certificate: Certificate, family_size: int = 16, *, workspace=None
) -> SamplingReport:
    r"""Apply :math:`S` to scaled cone functions on both boundary spheres.

    For ``A1`` this checks :math:`\|S(r\psi)\|_\infty \le r` and
    :math:`S(R\psi)(1/2) \ge R`; for ``A2`` it checks
    :math:`S(r_1\psi)(1/2) \ge r_1` and :math:`\|S(R_2\psi)\|_\infty \le R_2`.

    :raises ContractError: if the certificate is not valid.
    """
    from fracbvp.operator import OperatorWorkspace, apply_S

    if not certificate.valid:
        raise ContractError("only valid certificates can be verified")
    if workspace is None:
        workspace = OperatorWorkspace(problem)
    grid = workspace.grid
    if grid.n % 2:
        raise DomainError("verification needs t = 1/2 on the grid (even n)")
    half = grid.n // 2

    r, big = certificate.small_radius, certificate.large_radius
    if certificate.case == "A1":
        checks = (("inner", r, "sup<="), ("outer", big, "mid>="))
    else:
        checks = (("inner", r, "mid>="), ("outer", big, "sup<="))

    samples = []
    worst = math.inf
    violations = 0
    for k, psi in enumerate(boundary_family(grid, problem.alpha, family_size)):
        entry = {"member": k}
        for boundary, radius, rule in checks:
            su = apply_S(workspace, radius * psi)
            if rule == "sup<=":
                margin = radius - su.sup_norm()
            else:
                margin = float(su.values[half]) - radius
            bad = margin < -VERIFY_SLACK * max(1.0, radius)
            violations += int(bad)
            worst = min(worst, margin)
            entry[f"{boundary}_margin"] = margin
            entry[f"{boundary}_violated"] = bool(bad)
        samples.append(entry)
    return SamplingReport(violations, worst, tuple(samples))


# }}}
