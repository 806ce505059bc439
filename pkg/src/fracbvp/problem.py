r"""Problem descriptions for

.. math::

    D^\alpha_{0+} u(t) + h(t) f(u(t)) = 0, \quad 0 < t < 1,
    \qquad u(0) = u(1) = 0,

together with the function-space helpers used on sampled solutions: the
:math:`E_\alpha` norm and membership in the cone

.. math::

    K = \{u \ge 0 : u(t) \ge (\alpha - 1) t (1 - t) \|u\|_\infty\}.

Problems are read from YAML or JSON documents of the form

.. code-block:: yaml

    alpha: 1.5
    weight: {kind: power, c: 1.0, beta: 1.2}
    nonlinearity: {kind: power, theta: 0.3}
    solver: {n: 512, tol: 1.0e-8, damping: 0.5, max_iter: 500}
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np
import yaml

from fracbvp.errors import AdmissibilityError, ContractError, DomainError, ParseError
from fracbvp.fractional_core import FractionalOrder
from fracbvp.grid import Grid, SampledFunction, graded_grid
from fracbvp.quadrature import check_H1, check_H2

__all__ = [
    "ConeMembership",
    "Grid",
    "NonlinearitySpec",
    "ProblemSpec",
    "SampledFunction",
    "SolverOptions",
    "WeightSpec",
    "cone_membership",
    "e_alpha_norm",
    "graded_grid",
    "load_problem",
    "parse_problem",
    "problem_to_dict",
    "serialize_problem",
]

WEIGHT_KINDS = ("power", "table", "expression")
NONLINEARITY_KINDS = ("power", "expression")
CLASSES = ("A1", "A2", "unknown")

#: Intervals :math:`[1/k, 1]` on which the weight must be bounded.
PROBE_INTERVALS = tuple((1.0 / k, 1.0) for k in range(2, 7))
#: Slack in the cone floor test.
CONE_SLACK = 1.0e-12

#: Sample points for the admissibility checks on ``f``.
_F_SAMPLES = np.concatenate([[0.0], np.logspace(-6.0, 6.0, 241)])


# {{{ expressions


def _compile(expr: str, variable: str, location: str) -> Callable[[np.ndarray], np.ndarray]:
    import sympy

    try:
        parsed = sympy.sympify(expr, locals={variable: sympy.Symbol(variable)})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ParseError(f"cannot parse expression {expr!r}: {exc}", location) from exc

    if not isinstance(parsed, sympy.Expr):
        raise ParseError(f"{expr!r} is not a scalar expression", location)
    extra = {str(s) for s in parsed.free_symbols} - {variable}
    if extra:
        raise ParseError(
            f"expression {expr!r} may only depend on {variable!r}, found {sorted(extra)}",
            location,
        )

    fn = sympy.lambdify(sympy.Symbol(variable), parsed, modules="numpy")

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape).copy()

    return evaluate


# }}}


# {{{ weight


@dataclass(frozen=True)
class WeightSpec:
    r"""The weight :math:`h \ge 0` on :math:`(0, 1]`.

    ``power``
        :math:`h(t) = c t^{-\beta}` with :math:`c > 0`, :math:`\beta \ge 0`.
    ``table``
        Values ``h`` at nodes ``t``. The regular part :math:`t^\beta h(t)` is
        interpolated linearly, with ``beta`` the declared singularity strength
        (zero if omitted).
    ``expression``
        A formula in ``t``. ``beta`` is optional; without it the integrability
        check is numerical.
    """

    kind: str
    c: float = 1.0
    beta: float | None = 0.0
    expr: str | None = None
    t: tuple[float, ...] | None = None
    h: tuple[float, ...] | None = None

    _evaluator: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in WEIGHT_KINDS:
            raise ParseError(f"unknown weight kind {self.kind!r}", "weight.kind")
        if self.beta is not None and not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise ParseError(f"beta must be finite and >= 0, got {self.beta}", "weight.beta")

        if self.kind == "power":
            if self.beta is None:
                raise ParseError("power weight needs beta", "weight.beta")
            if not (math.isfinite(self.c) and self.c > 0.0):
                raise ParseError(f"coefficient must be positive, got {self.c}", "weight.c")
            c, beta = self.c, self.beta

            def evaluator(t):
                t = np.asarray(t, dtype=float)
                with np.errstate(divide="ignore"):
                    return c * t ** (-beta)

        elif self.kind == "table":
            if self.t is None or self.h is None:
                raise ParseError("table weight needs both t and h", "weight")
            nodes = np.asarray(self.t, dtype=float)
            values = np.asarray(self.h, dtype=float)
            if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
                raise ParseError("t and h must be lists of equal length >= 2", "weight.t")
            if not (nodes[0] > 0.0 and nodes[-1] <= 1.0 and np.all(np.diff(nodes) > 0)):
                raise ParseError("table nodes must increase strictly inside (0, 1]", "weight.t")
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise ParseError("table values must be finite and non-negative", "weight.h")
            object.__setattr__(self, "t", tuple(float(v) for v in nodes))
            object.__setattr__(self, "h", tuple(float(v) for v in values))
            beta = self.beta or 0.0
            regular = values * nodes**beta

            def evaluator(t):
                t = np.asarray(t, dtype=float)
                with np.errstate(divide="ignore"):
                    return np.interp(t, nodes, regular) * t ** (-beta)

        else:
            if not isinstance(self.expr, str):
                raise ParseError("expression weight needs expr", "weight.expr")
            evaluator = _compile(self.expr, "t", "weight.expr")

        object.__setattr__(self, "_evaluator", evaluator)

    def __call__(self, t) -> np.ndarray:
        return self._evaluator(t)

    @property
    def exponent_at_0(self) -> float:
        """Declared algebraic exponent at the origin, ``-beta`` (zero if unknown)."""
        return -(self.beta or 0.0)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "power":
            out.update(c=self.c, beta=self.beta)
        elif self.kind == "table":
            out.update(t=list(self.t), h=list(self.h), beta=self.beta)
        else:
            out.update(expr=self.expr, beta=self.beta)
        return out


# }}}


# {{{ nonlinearity


@dataclass(frozen=True)
class NonlinearitySpec:
    r"""The nonlinearity :math:`f \ge 0` on :math:`[0, \infty)`.

    ``power`` means :math:`f(u) = u^\theta`. For ``expression`` the formula is
    in ``u`` and ``declared_class`` states the growth class the user expects;
    ``p`` is the growth exponent that goes with class ``A1``.
    """

    kind: str
    theta: float | None = None
    declared_class: str = "unknown"
    p: float | None = None
    expr: str | None = None

    _evaluator: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in NONLINEARITY_KINDS:
            raise ParseError(f"unknown nonlinearity kind {self.kind!r}", "nonlinearity.kind")
        if self.declared_class not in CLASSES:
            raise ParseError(
                f"class must be one of {CLASSES}, got {self.declared_class!r}",
                "nonlinearity.class",
            )
        if self.p is not None and not (math.isfinite(self.p) and self.p > 1.0):
            raise ParseError(f"growth exponent p must exceed 1, got {self.p}", "nonlinearity.p")

        if self.kind == "power":
            theta = self.theta
            if theta is None or not (math.isfinite(theta) and theta > 0.0):
                raise ParseError(f"theta must be positive, got {theta}", "nonlinearity.theta")

            def evaluator(u):
                return np.asarray(u, dtype=float) ** theta

        else:
            if not isinstance(self.expr, str):
                raise ParseError("expression nonlinearity needs expr", "nonlinearity.expr")
            evaluator = _compile(self.expr, "u", "nonlinearity.expr")

        object.__setattr__(self, "_evaluator", evaluator)

    def __call__(self, u) -> np.ndarray:
        return self._evaluator(u)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "class": self.declared_class}
        if self.kind == "power":
            out["theta"] = self.theta
        else:
            out["expr"] = self.expr
        if self.p is not None:
            out["p"] = self.p
        return out


# }}}


# {{{ solver options


@dataclass(frozen=True)
class SolverOptions:
    """Settings of the damped fixed-point iteration.

    ``initial`` is ``"cone_profile"``, a positive constant, or a callable of
    ``t``.
    """

    n: int = 512
    tol: float = 1.0e-8
    damping: float = 0.5
    max_iter: int = 500
    initial: Any = "cone_profile"

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 32:
            raise ParseError(f"n must be an integer >= 32, got {self.n}", "solver.n")
        if not (math.isfinite(self.tol) and self.tol > 0.0):
            raise ParseError(f"tol must be positive, got {self.tol}", "solver.tol")
        if not 0.0 < self.damping <= 1.0:
            raise ParseError(f"damping must lie in (0, 1], got {self.damping}", "solver.damping")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ParseError(f"max_iter must be a positive integer, got {self.max_iter}", "solver.max_iter")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "max_iter", int(self.max_iter))

        init = self.initial
        if not (init == "cone_profile" or callable(init)
                or (isinstance(init, (int, float)) and init > 0)):
            raise ParseError(f"unsupported initial iterate {init!r}", "solver.initial")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "n": self.n, "tol": self.tol, "damping": self.damping, "max_iter": self.max_iter,
        }
        if not callable(self.initial):
            out["initial"] = self.initial
        return out


# }}}


# {{{ problem


@dataclass(frozen=True)
class ProblemSpec:
    """An admissible problem. Construction runs the hypothesis checks.

    :raises AdmissibilityError: if the weight is not integrable against
        :math:`s^{\\alpha-1}`, is unbounded near some point of ``(0, 1]``, or if
        ``h`` or ``f`` takes negative or non-finite values.
    """

    order: FractionalOrder
    weight: WeightSpec
    nonlinearity: NonlinearitySpec
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self) -> None:
        if not isinstance(self.order, FractionalOrder):
            object.__setattr__(self, "order", FractionalOrder(float(self.order)))
        alpha = self.order.alpha

        h1 = check_H1(self.order, self.weight)
        if h1.status == "Fail":
            raise AdmissibilityError(
                f"(H1) fails: weight exponent beta={self.weight.beta:g} must be "
                f"smaller than alpha={alpha:g}"
            )
        if h1.status == "Inconclusive":
            warnings.warn(f"{h1.detail}; proceeding", RuntimeWarning, stacklevel=2)

        h2 = check_H2(self.weight, PROBE_INTERVALS)
        if not h2.passed:
            raise AdmissibilityError(h2.detail)

        t = np.linspace(0.0, 1.0, 1025)[1:]
        with np.errstate(all="ignore"):
            hv = np.asarray(self.weight(t), dtype=float)
        if not np.all(np.isfinite(hv)) or np.any(hv < 0):
            raise AdmissibilityError("weight must be finite and non-negative on (0, 1]")

        with np.errstate(all="ignore"):
            fv = np.asarray(self.nonlinearity(_F_SAMPLES), dtype=float)
        if not np.all(np.isfinite(fv)):
            raise AdmissibilityError("nonlinearity must be finite on [0, 1e6]")
        if np.any(fv < 0):
            u_bad = _F_SAMPLES[np.argmax(fv < 0)]
            raise AdmissibilityError(f"nonlinearity is negative at u = {u_bad:g}")

    @property
    def alpha(self) -> float:
        return self.order.alpha

    def h(self, t) -> np.ndarray:
        return self.weight(t)

    def f(self, u) -> np.ndarray:
        return self.nonlinearity(u)

    def with_solver(self, **changes: Any) -> ProblemSpec:
        options = {**self.solver.to_dict(), "initial": self.solver.initial, **changes}
        return ProblemSpec(self.order, self.weight, self.nonlinearity, SolverOptions(**options))


def problem_to_dict(problem: ProblemSpec) -> dict[str, Any]:
    return {
        "alpha": problem.alpha,
        "weight": problem.weight.to_dict(),
        "nonlinearity": problem.nonlinearity.to_dict(),
        "solver": problem.solver.to_dict(),
    }


def serialize_problem(problem: ProblemSpec) -> str:
    """JSON text that :func:`parse_problem` maps back to an equal problem."""
    return json.dumps(problem_to_dict(problem), sort_keys=True, indent=2) + "\n"


# }}}


# {{{ parsing


def _section(doc: Mapping, name: str, kinds: tuple[str, ...], *aliases: str) -> dict:
    for key in (name, *aliases):
        if key in doc:
            raw = doc[key]
            break
    else:
        raise ParseError(f"missing section {name!r}", name)

    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, Mapping):
        raise ParseError(f"section must be a mapping, got {type(raw).__name__}", name)

    raw = dict(raw)
    # YAML flow shorthand: {power, c: 1} reads as {"power": None, "c": 1}
    for kind in kinds:
        if kind in raw and raw[kind] is None and "kind" not in raw:
            del raw[kind]
            raw["kind"] = kind
    if "kind" not in raw:
        raise ParseError("missing field 'kind'", f"{name}.kind")
    return raw


def _number(section: Mapping, key: str, location: str, default=None, *, required=False):
    if key not in section or section[key] is None:
        if required:
            raise ParseError("missing field", location)
        return default
    value = section[key]
    if isinstance(value, str):
        # YAML 1.1 leaves exponent forms without a dot as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", location)
    return float(value)


def _check_keys(section: Mapping, allowed: set[str], location: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}", location)


def _parse_weight(doc: Mapping) -> WeightSpec:
    sec = _section(doc, "weight", WEIGHT_KINDS)
    _check_keys(sec, {"kind", "c", "beta", "expr", "t", "h"}, "weight")
    kind = sec["kind"]
    if kind == "power":
        return WeightSpec(
            "power",
            c=_number(sec, "c", "weight.c", 1.0),
            beta=_number(sec, "beta", "weight.beta", required=True),
        )
    if kind == "table":
        try:
            t = tuple(float(v) for v in sec["t"])
            h = tuple(float(v) for v in sec["h"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"table weight needs numeric lists t and h ({exc})", "weight") from exc
        return WeightSpec("table", beta=_number(sec, "beta", "weight.beta", 0.0), t=t, h=h)
    if kind == "expression":
        expr = sec.get("expr")
        if not isinstance(expr, str):
            raise ParseError("expected a string", "weight.expr")
        return WeightSpec("expression", beta=_number(sec, "beta", "weight.beta"), expr=expr)
    raise ParseError(f"unknown weight kind {kind!r}", "weight.kind")


def _parse_nonlinearity(doc: Mapping) -> NonlinearitySpec:
    sec = _section(doc, "nonlinearity", NONLINEARITY_KINDS, "f")
    _check_keys(sec, {"kind", "theta", "class", "p", "expr"}, "nonlinearity")
    cls = sec.get("class", "unknown")
    if cls is None:
        cls = "unknown"
    if not isinstance(cls, str):
        raise ParseError(f"expected a string, got {cls!r}", "nonlinearity.class")
    kind = sec["kind"]
    p = _number(sec, "p", "nonlinearity.p")
    if kind == "power":
        return NonlinearitySpec(
            "power",
            theta=_number(sec, "theta", "nonlinearity.theta", required=True),
            declared_class=cls,
            p=p,
        )
    if kind == "expression":
        expr = sec.get("expr")
        if not isinstance(expr, str):
            raise ParseError("expected a string", "nonlinearity.expr")
        return NonlinearitySpec("expression", declared_class=cls, p=p, expr=expr)
    raise ParseError(f"unknown nonlinearity kind {kind!r}", "nonlinearity.kind")


def _parse_solver(doc: Mapping) -> SolverOptions:
    sec = doc.get("solver") or {}
    if not isinstance(sec, Mapping):
        raise ParseError("section must be a mapping", "solver")
    _check_keys(sec, {"n", "tol", "damping", "max_iter", "initial"}, "solver")
    kwargs: dict[str, Any] = {}
    for key in ("n", "tol", "damping", "max_iter"):
        value = _number(sec, key, f"solver.{key}")
        if value is not None:
            kwargs[key] = int(value) if key in ("n", "max_iter") and value == int(value) else value
    if "initial" in sec:
        init = sec["initial"]
        if isinstance(init, bool) or not isinstance(init, (str, int, float)):
            raise ParseError(f"unsupported initial iterate {init!r}", "solver.initial")
        kwargs["initial"] = float(init) if isinstance(init, (int, float)) else init
    return SolverOptions(**kwargs)


def parse_problem(document: str | bytes | Mapping) -> ProblemSpec:
    """Build a validated :class:`ProblemSpec` from YAML/JSON text or a mapping.

    :raises ParseError: for malformed documents, with the offending location.
    :raises AdmissibilityError: if the problem violates the hypotheses on
        ``h`` or ``f``.
    """
    if isinstance(document, (str, bytes)):
        try:
            # JSON first: YAML 1.1 reads exponents such as 1e-08 as strings
            doc = json.loads(document)
        except ValueError:
            doc = None
        try:
            if doc is None:
                doc = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else None
            raise ParseError(f"not valid YAML/JSON: {exc}", where) from exc
    else:
        doc = document

    if not isinstance(doc, Mapping):
        raise ParseError("document must be a mapping at top level", "<root>")
    _check_keys(doc, {"alpha", "weight", "nonlinearity", "f", "solver"}, "<root>")

    alpha = _number(doc, "alpha", "alpha", required=True)
    try:
        order = FractionalOrder(alpha)
    except DomainError as exc:
        raise ParseError(str(exc), "alpha") from exc

    return ProblemSpec(order, _parse_weight(doc), _parse_nonlinearity(doc), _parse_solver(doc))


def load_problem(path) -> ProblemSpec:
    try:
        with open(path, encoding="utf-8") as infile:
            text = infile.read()
    except OSError as exc:
        raise ParseError(f"cannot read problem file: {exc.strerror}", str(path)) from exc
    return parse_problem(text)


# }}}


# {{{ norms and the cone


def e_alpha_norm(u: SampledFunction, order) -> float:
    r"""The norm :math:`\|u\|_\infty + \|t^{\alpha-1} D^{\alpha-1}_{0+} u\|_\infty` on nodes.

    Nodes where the derivative channel is NaN (the origin, typically) are
    skipped.

    :raises ContractError: if ``u`` has no derivative channel.
    """
    if u.d_alpha_minus_1 is None:
        raise ContractError("e_alpha_norm needs the D^(alpha-1) channel of u")
    p = order.p if isinstance(order, FractionalOrder) else float(order) - 1.0
    weighted = u.grid.t**p * u.d_alpha_minus_1
    weighted = weighted[np.isfinite(weighted)]
    second = float(np.max(np.abs(weighted))) if weighted.size else 0.0
    return u.node_max + second


@dataclass(frozen=True)
class ConeMembership:
    member: bool
    #: Smallest value of ``u(t_i) - (alpha - 1) t_i (1 - t_i) max u``.
    margin: float

    def __bool__(self) -> bool:
        return self.member


def cone_membership(u: SampledFunction, order) -> ConeMembership:
    """Test :math:`u(t_i) \\ge (\\alpha - 1) t_i (1 - t_i) \\max u` at every node."""
    p = order.p if isinstance(order, FractionalOrder) else float(order) - 1.0
    values = u.values
    t, tc = u.grid.t, u.grid.tc
    floor = p * t * tc * float(np.max(values))
    margin = float(np.min(values - floor))
    member = bool(np.all(values >= 0.0)) and margin >= -CONE_SLACK
    return ConeMembership(member, margin)


# }}}
