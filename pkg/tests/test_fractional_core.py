from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracbvp.errors import DomainError, ResolutionError
from fracbvp.fractional_core import (
    FractionalOrder,
    gamma_fn,
    green_kernel,
    green_value,
    kernel_bounds,
    rl_derivative,
    rl_integral,
)
from fracbvp.grid import Grid, SampledFunction

alphas = st.floats(min_value=1.0, max_value=2.0, exclude_min=True)
interior = st.floats(min_value=1.0e-3, max_value=1.0 - 1.0e-3)


# {{{ gamma


@pytest.mark.parametrize(
    ("x", "expected"),
    [(1.0, 1.0), (1.5, 0.5 * math.sqrt(math.pi)), (2.5, 0.75 * math.sqrt(math.pi)),
     (0.5, math.sqrt(math.pi)), (5.0, 24.0)],
)
def test_gamma_closed_forms(x, expected):
    assert gamma_fn(x) == pytest.approx(expected, rel=1.0e-14)


def test_gamma_relative_error_against_stdlib():
    x = np.concatenate([np.geomspace(1.0e-6, 0.5, 400), np.linspace(0.5, 171.0, 4000)])
    ref = np.array([math.gamma(v) for v in x])
    assert np.max(np.abs(gamma_fn(x) / ref - 1.0)) <= 1.0e-13


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_gamma_rejects_non_positive(x):
    with pytest.raises(DomainError):
        gamma_fn(x)


# }}}


# {{{ order


@pytest.mark.parametrize("alpha", [1.0, 0.5, 2.0000001, math.nan])
def test_order_rejects_outside_half_open_interval(alpha):
    with pytest.raises(DomainError):
        FractionalOrder(alpha)


def test_order_accepts_two():
    assert FractionalOrder(2.0).p == 1.0


# }}}


# {{{ green's function


def test_green_examples():
    assert green_value(2.0, 0.3, 0.6) == pytest.approx(0.12, abs=1.0e-15)
    assert green_value(1.5, 0.5, 0.5) == pytest.approx(0.5641895835, abs=1.0e-10)
    for alpha in (1.2, 1.5, 2.0):
        assert green_value(alpha, 0.7, 0.0) == 0.0


def test_green_classical_limit():
    t, s = np.meshgrid(np.linspace(0, 1, 21), np.linspace(0, 1, 21), indexing="ij")
    classical = np.where(s <= t, s * (1 - t), t * (1 - s))
    assert np.max(np.abs(green_value(2.0, t, s) - classical)) <= 1.0e-15


def test_green_diagonal_is_hoelder_with_exponent_alpha_minus_one():
    # the lower branch differs from the upper one by (t - s)^(alpha - 1) / Gamma(alpha)
    for alpha in (1.1, 1.5, 1.9):
        for t in (0.1, 0.5, 0.9):
            for d in (1.0e-4, 1.0e-8, 1.0e-12):
                upper = green_value(alpha, t, t)
                s = t - d
                gap = t - s  # exact, unlike d
                lower = green_value(alpha, t, s)
                jump = gap ** (alpha - 1.0) / gamma_fn(alpha)
                assert abs(upper - lower - jump) <= 1.0e-12 + 2.0 * gap


def test_green_rejects_outside_square():
    with pytest.raises(DomainError):
        green_value(1.5, 1.2, 0.5)


#: points on a dyadic lattice, so that ``1 - t`` and ``t - s`` are exact
lattice = st.integers(1, 2**30 - 1).map(lambda k: k / 2**30)


@settings(max_examples=300, deadline=None)
@given(alphas, lattice, lattice)
def test_green_symmetry(alpha, t, s):
    assert abs(green_value(alpha, t, s) - green_value(alpha, 1.0 - s, 1.0 - t)) <= 1.0e-12


@settings(max_examples=300, deadline=None)
@given(alphas, interior, interior)
def test_green_kernel_symmetry_with_exact_distances(alpha, t, s):
    # the reflected point (1 - s, 1 - t) has the same distance to the diagonal
    p = alpha - 1.0
    direct = green_kernel(p, t, s, t - s, 1.0 - s, one_minus_t=1.0 - t)
    mirror = green_kernel(p, 1.0 - s, 1.0 - t, t - s, t, one_minus_t=s)
    assert abs(direct - mirror) <= 1.0e-12


@settings(max_examples=300, deadline=None)
@given(alphas, interior, interior)
def test_green_positive_and_maximal_on_diagonal(alpha, t, s):
    g = green_value(alpha, t, s)
    assert g > 0.0
    assert g <= green_value(alpha, s, s) + 1.0e-12


# }}}


# {{{ kernel bounds


def test_kernel_bounds_classical_example():
    b = kernel_bounds(2.0, 0.5, 0.5)
    assert b.lower == pytest.approx(0.0625)
    assert b.upper_a == pytest.approx(0.25)
    assert b.upper_b == pytest.approx(0.25)


def test_kernel_bounds_bracket_example():
    b = kernel_bounds(1.5, 0.5, 0.5)
    g = green_value(1.5, 0.5, 0.5)
    assert b.lower <= g <= b.upper


def test_kernel_bounds_flags_infinite_ends():
    b = kernel_bounds(1.5, 0.5, 1.0)
    assert b.upper_a_infinite and math.isinf(b.upper_a)
    b = kernel_bounds(1.5, 0.0, 0.5)
    assert b.upper_b_infinite and math.isinf(b.upper_b)
    assert b.lower == 0.0
    # at alpha = 2 the exponent alpha - 2 vanishes and nothing blows up
    assert not kernel_bounds(2.0, 0.5, 1.0).upper_a_infinite


def test_kernel_lower_bound_vanishes_at_origin():
    assert kernel_bounds(1.5, 1.0e-300, 0.4).lower == pytest.approx(0.0, abs=1.0e-140)


@settings(max_examples=300, deadline=None)
@given(alphas, interior, interior)
def test_kernel_sandwich(alpha, t, s):
    b = kernel_bounds(alpha, t, s)
    g = green_value(alpha, t, s)
    assert min(b.lower, b.upper_a, b.upper_b) >= 0.0
    assert b.lower - 1.0e-12 <= g <= b.upper + 1.0e-12


# }}}


# {{{ fractional integral


def test_rl_integral_examples():
    assert rl_integral(1.0, lambda s: np.ones_like(s), 0.8) == pytest.approx(0.8, abs=1.0e-14)
    assert rl_integral(0.5, lambda s: np.ones_like(s), 1.0) == pytest.approx(1.1283791671, abs=1.0e-10)
    assert rl_integral(1.5, lambda s: np.ones_like(s), 1.0) == pytest.approx(0.7522527781, abs=1.0e-10)


@pytest.mark.parametrize("nu", [0.01, 0.3, 0.5, 0.99, 1.0, 1.7])
@pytest.mark.parametrize("lam", [0.0, 0.5, 2.0])
def test_rl_integral_power_rule(nu, lam):
    t = np.array([0.1, 0.5, 1.0])
    exact = gamma_fn(lam + 1) / gamma_fn(lam + nu + 1) * t ** (lam + nu)
    assert np.allclose(rl_integral(nu, lambda s: s**lam, t), exact, rtol=1.0e-12, atol=0)


def test_rl_integral_declared_singularity():
    # I^0.5 of s^-0.5 is Gamma(0.5) / Gamma(1) t^0
    value = rl_integral(0.5, lambda s: s**-0.5, 0.7, exponent_at_0=-0.5)
    assert value == pytest.approx(math.sqrt(math.pi), rel=1.0e-12)


def test_rl_integral_sampled_matches_power_rule():
    grid = Grid(256)
    u = SampledFunction.from_function(grid, lambda t: t**2)
    for nu in (0.3, 0.5, 1.5):
        for t in (0.01, 0.3, 1.0):
            exact = 2.0 / gamma_fn(3 + nu) * t ** (2 + nu)
            assert rl_integral(nu, u, t) == pytest.approx(exact, abs=1.0e-13)


def test_rl_integral_rejects_bad_input():
    with pytest.raises(DomainError):
        rl_integral(0.0, lambda s: s, 0.5)
    with pytest.raises(DomainError):
        rl_integral(0.5, lambda s: s, -0.1)


# }}}


# {{{ fractional derivative


def test_rl_derivative_examples():
    for t in (0.2, 0.5, 0.8):
        assert abs(rl_derivative(1.5, lambda s: s**0.5, t)) <= 1.0e-6
        assert rl_derivative(2.0, lambda s: s**2, t) == pytest.approx(2.0, abs=1.0e-6)
    assert rl_derivative(1.5, lambda s: s**2, 1.0) == pytest.approx(2.2567583342, rel=1.0e-6)


def test_rl_derivative_power_rule_random():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(20):
        alpha = 1.0 + rng.uniform(1.0e-3, 1.0)
        lam = rng.uniform(alpha - 1.0, 4.0)
        for t in (0.25, 0.5, 0.75):
            exact = gamma_fn(lam + 1) / gamma_fn(lam - alpha + 1) * t ** (lam - alpha)
            worst = max(worst, abs(rl_derivative(alpha, lambda s: s**lam, t) / exact - 1))
    assert worst <= 1.0e-3


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_rl_derivative_inverts_rl_integral(alpha):
    grid = Grid(256)

    def f(s):
        return np.cos(2.0 * s) + s

    v = SampledFunction(grid, rl_integral(alpha, f, grid.t))
    t = np.array([0.2, 0.5, 0.8])
    assert np.max(np.abs(rl_derivative(alpha, v, t) - f(t))) <= 1.0e-3


def test_rl_derivative_sampled_manufactured():
    grid = Grid(512)
    alpha = 1.5
    u = SampledFunction.from_function(grid, lambda t: t**0.5 * (1 - t) / gamma_fn(2.5))
    values = rl_derivative(alpha, u, np.array([0.05, 0.3, 0.5, 0.9]))
    assert np.max(np.abs(values + 1.0)) <= 1.0e-5


def test_rl_derivative_stencil_errors():
    with pytest.raises(DomainError):
        rl_derivative(1.5, lambda s: s, 1.0e-5)
    grid = Grid(64)
    u = SampledFunction.from_function(grid, lambda t: t)
    with pytest.raises(DomainError):
        rl_derivative(1.5, u, 1.0 - 1.0e-5)
    with pytest.raises(ResolutionError):
        rl_derivative(1.5, SampledFunction.from_function(Grid(16), lambda t: t), 0.5)
    with pytest.raises(DomainError):
        rl_derivative(2.5, lambda s: s, 0.5)


# }}}
