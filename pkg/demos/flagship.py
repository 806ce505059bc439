r"""Certify and solve a singular sublinear problem
===============================================

The weight :math:`h(t) = t^{-1.2}` blows up at the origin and
:math:`f(u) = u^{0.3}` is sublinear, so the existence theory places a positive
solution inside an annulus :math:`r_1 \le \|u\| \le R_2` of the cone. This
script builds that certificate, checks it on a family of cone members, then
runs the fixed-point solver and reports where the computed solution landed.

Run with ``python demos/flagship.py``.
"""

from __future__ import annotations

import numpy as np

from fracbvp.certify import certify_case2, verify_certificate_by_sampling
from fracbvp.problem import parse_problem
from fracbvp.solver import picard_solve

problem = parse_problem({
    "alpha": 1.5,
    "weight": {"kind": "power", "c": 1.0, "beta": 1.2},
    "nonlinearity": {"kind": "power", "theta": 0.3},
    "solver": {"n": 512},
})

# {{{ certificate

certificate = certify_case2(problem)
print(f"certified annulus   r1 = {certificate.small_radius:.6g}, R2 = {certificate.large_radius:.6g}")

sampling = verify_certificate_by_sampling(problem, certificate, 16)
print(f"sampled inequality violations: {sampling.violations} of {len(sampling.samples)}")

# }}}

# {{{ solve

report = picard_solve(problem, certificate=certificate)
print()
print(report.summary())

u = report.solution
peak = int(np.argmax(u.values))
print()
print(f"the maximum {u.values[peak]:.6g} sits at t = {u.grid.t[peak]:.4f}")

# }}}
