from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from fracbvp.certify import (
    Certificate,
    boundary_family,
    certify,
    certify_case1,
    certify_case2,
    classify_nonlinearity,
    verify_certificate_by_sampling,
    weight_integrals,
)
from fracbvp.errors import AsymptoteNotDetected, ContractError, DomainError, PreconditionError
from fracbvp.fractional_core import green_value
from fracbvp.grid import Grid
from fracbvp.operator import OperatorWorkspace
from fracbvp.problem import NonlinearitySpec, cone_membership, parse_problem


def unit_weight_problem(f: dict, alpha: float = 1.5, n: int = 256):
    return parse_problem({
        "alpha": alpha,
        "weight": {"kind": "power", "c": 1.0, "beta": 0.0},
        "nonlinearity": f,
        "solver": {"n": n},
    })


def power(theta: float) -> dict:
    return {"kind": "power", "theta": theta}


def expression(expr: str, cls: str = "unknown") -> dict:
    return {"kind": "expression", "expr": expr, "class": cls}


# {{{ classification


def test_classify_powers():
    assert classify_nonlinearity(NonlinearitySpec("power", theta=0.3)).cls == "A2"
    c = classify_nonlinearity(NonlinearitySpec("power", theta=2.0))
    assert c.cls == "A1" and c.p == 3.0
    assert classify_nonlinearity(NonlinearitySpec("power", theta=1.0)).cls == "Neither"


@pytest.mark.parametrize(
    ("expr", "declared", "expected"),
    [
        ("u**2 + u**3", "unknown", "A1"),
        ("sqrt(u) + u**0.2", "unknown", "A2"),
        ("u**2", "A1", "A1"),
        ("u**2", "A2", "Neither"),
        ("u", "unknown", "Neither"),
        ("2*u + 1", "unknown", "Neither"),
        ("0*u", "unknown", "Neither"),
    ],
)
def test_classify_expressions(expr, declared, expected):
    spec = NonlinearitySpec("expression", declared_class=declared, expr=expr)
    assert classify_nonlinearity(spec).cls == expected


def test_classify_rejects_negative_values():
    with pytest.raises(DomainError):
        classify_nonlinearity(NonlinearitySpec("expression", expr="u - 1"))


# }}}


# {{{ weight integrals


def test_integral_small_for_unit_weight():
    i_small, _ = weight_integrals(unit_weight_problem(power(0.5)))
    # B(3/2, 3/2) / Gamma(3/2) = (pi / 8) / Gamma(3/2)
    assert i_small == pytest.approx(0.4431135, abs=1.0e-7)
    assert i_small == pytest.approx(math.pi / 8 / math.gamma(1.5), rel=1.0e-12)


def test_integral_mid_against_adaptive_reference():
    _, i_mid = weight_integrals(unit_weight_problem(power(0.5)))
    ref = sum(
        sp_integrate.quad(lambda s: green_value(1.5, 0.5, s), a, b, epsabs=1.0e-14, epsrel=1.0e-14)[0]
        for a, b in ((0.25, 0.5), (0.5, 0.75))
    )
    assert i_mid == pytest.approx(ref, abs=1.0e-12)
    assert i_mid == pytest.approx(0.18497217, abs=1.0e-8)


def test_integrals_for_singular_weight(flagship):
    i_small, i_mid = weight_integrals(flagship)
    # B(alpha - beta, alpha) / Gamma(alpha) with alpha = 1.5, beta = 1.2
    ref_small = math.gamma(0.3) / math.gamma(1.8)
    assert i_small == pytest.approx(ref_small, rel=1.0e-11)
    ref_mid = sum(
        sp_integrate.quad(lambda s: green_value(1.5, 0.5, s) * s**-1.2, a, b, epsabs=1.0e-14)[0]
        for a, b in ((0.25, 0.5), (0.5, 0.75))
    )
    assert i_mid == pytest.approx(ref_mid, rel=1.0e-11)


# }}}


# {{{ case 1


def test_case1_square():
    problem = unit_weight_problem(power(2.0))
    cert = certify_case1(problem)
    eps = min(0.49, 1.0 / cert.integral_small)
    assert cert.rate_small == eps
    # u^2 <= eps u  iff  u <= eps
    assert cert.small_radius == pytest.approx(eps, rel=1.0e-12)
    rho = 16.0 / (0.5 * cert.integral_mid)
    assert cert.rate_large == pytest.approx(rho, rel=1.0e-14)
    assert cert.threshold == pytest.approx(rho, rel=1.0e-12)
    assert cert.large_radius == pytest.approx(1.01 * 16.0 * rho / 0.5, rel=1.0e-12)
    assert cert.valid and cert.case == "A1"


@pytest.mark.parametrize("c", [0.5, 2.0])
@pytest.mark.parametrize("theta", [2.0, 3.5])
def test_case1_scale_covariance(c, theta):
    problem = unit_weight_problem(expression(f"{c!r} * u**{theta!r}", "A1"))
    cert = certify_case1(problem)
    eps = cert.rate_small
    assert cert.small_radius == pytest.approx((eps / c) ** (1.0 / (theta - 1.0)), rel=1.0e-10)
    rho = cert.rate_large
    assert cert.threshold == pytest.approx((rho / c) ** (1.0 / (theta - 1.0)), rel=1.0e-10)


def test_case1_certificate_passes_sampling():
    problem = unit_weight_problem(power(2.0), n=256)
    report = verify_certificate_by_sampling(problem, certify_case1(problem), 8)
    assert report.violations == 0
    assert len(report.samples) == 8


def test_case1_slow_growth_hits_scan_cap():
    problem = unit_weight_problem(expression("u*log(1 + u)"))
    with pytest.raises(AsymptoteNotDetected) as info:
        certify_case1(problem)
    assert info.value.cap == 1.0e9


# }}}


# {{{ case 2


def test_case2_flagship_closed_form(flagship, flagship_certificate):
    cert = flagship_certificate
    assert cert.case == "A2" and cert.valid
    assert cert.small_radius == pytest.approx(cert.rate_small ** (-10.0 / 7.0), rel=1.0e-10)
    assert cert.rate_small == pytest.approx(16.0 / (0.5 * cert.integral_mid), rel=1.0e-14)
    assert cert.rate_large == pytest.approx(0.99 / cert.integral_small, rel=1.0e-14)
    # u^0.3 <= zeta u  iff  u >= zeta^(-1/0.7)
    assert cert.threshold == pytest.approx(cert.rate_large ** (-1.0 / 0.7), rel=1.0e-10)
    assert math.isfinite(cert.large_radius) and cert.small_radius < cert.large_radius


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_case2_scale_covariance(c):
    problem = unit_weight_problem(expression(f"{c!r} * u**0.5"))
    cert = certify_case2(problem)
    assert cert.small_radius == pytest.approx((cert.rate_small / c) ** -2.0, rel=1.0e-10)
    assert cert.threshold == pytest.approx((cert.rate_large / c) ** -2.0, rel=1.0e-10)


def test_flagship_certificate_verifies(flagship, flagship_certificate):
    report = verify_certificate_by_sampling(flagship, flagship_certificate, 16)
    assert report.violations == 0
    assert report.worst_margin > 0


# }}}


# {{{ contracts


def test_preconditions():
    linear = unit_weight_problem(power(1.0))
    with pytest.raises(PreconditionError):
        certify_case1(linear)
    with pytest.raises(PreconditionError):
        certify_case2(linear)
    with pytest.raises(PreconditionError):
        certify(linear)
    with pytest.raises(PreconditionError):
        certify_case1(unit_weight_problem(power(0.5)))
    with pytest.raises(PreconditionError):
        certify_case2(unit_weight_problem(power(2.0)))


def test_forged_certificate_fails_inner_check():
    problem = unit_weight_problem(expression("0*u"))
    forged = Certificate("A2", 1.0, 10.0, 100.0, 0.5, 5.0, 0.44, 0.18, True, 1.5)
    report = verify_certificate_by_sampling(problem, forged, 4)
    assert report.violations == 4
    assert all(entry["inner_violated"] and not entry["outer_violated"] for entry in report.samples)


def test_single_member_family():
    problem = unit_weight_problem(power(0.5))
    report = verify_certificate_by_sampling(problem, certify(problem), 1)
    assert len(report.samples) == 1
    grid = Grid(64)
    (member,) = boundary_family(grid, 1.5, 1)
    assert member.node_max == 1.0
    assert np.allclose(member.values, 4.0 * grid.t * grid.tc)


def test_boundary_family_is_in_the_cone():
    grid = Grid(128)
    for alpha in (1.2, 1.5, 2.0):
        family = boundary_family(grid, alpha, 16)
        assert len(family) == 16
        for psi in family:
            assert psi.node_max == pytest.approx(1.0)
            assert cone_membership(psi, alpha)


def test_invalid_certificate_rejected():
    problem = unit_weight_problem(power(0.5))
    bad = Certificate("A2", 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, False, 1.5)
    with pytest.raises(ContractError):
        verify_certificate_by_sampling(problem, bad)
    with pytest.raises(DomainError):
        verify_certificate_by_sampling(problem, certify(problem),
                                       workspace=OperatorWorkspace(problem, Grid(65)))


def test_certificate_serialization(flagship_certificate):
    data = json.loads(json.dumps(flagship_certificate.to_dict()))
    assert Certificate.from_dict(data) == flagship_certificate
    assert set(data) >= {"case", "small_radius", "large_radius", "valid", "integral_small"}


# }}}
