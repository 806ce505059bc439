r"""Constant forcing against the closed form
=========================================

With :math:`h = f = 1` the problem is linear and its solution is

.. math::

    u(t) = \frac{t^{\alpha - 1} (1 - t)}{\Gamma(\alpha + 1)}.

The script solves it for several orders and prints the sup-norm error on a fine
set of points between the grid nodes, which exercises the interpolant as well as
the discrete operator.

Run with ``python demos/manufactured.py``.
"""

from __future__ import annotations

import numpy as np

from fracbvp.fractional_core import gamma_fn
from fracbvp.problem import parse_problem
from fracbvp.solver import picard_solve

t = np.linspace(0.0, 1.0, 2001)

print(f"{'alpha':>6} {'iterations':>10} {'sup error':>10}")
for alpha in (1.1, 1.25, 1.5, 1.75, 2.0):
    problem = parse_problem({
        "alpha": alpha,
        "weight": {"kind": "power", "c": 1.0, "beta": 0.0},
        "nonlinearity": {"kind": "expression", "expr": "1 + 0*u"},
        "solver": {"n": 256},
    })
    report = picard_solve(problem)
    exact = t ** (alpha - 1) * (1 - t) / gamma_fn(alpha + 1)
    error = np.max(np.abs(report.solution(t) - exact))
    print(f"{alpha:6.2f} {report.iterations:10d} {error:10.1e}")
