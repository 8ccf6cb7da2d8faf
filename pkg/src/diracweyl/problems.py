"""Problem files: JSON documents describing an expression and its boundary data.

::

    {"name": "free",
     "interval": {"a": 0, "b": "pi"},
     "Q": [["0", "0"], ["0", "0"]],            # or {"family": "zero"} or a grid {"x": [...], "values": [...]}
     "R": {"family": "identity"},
     "left":  {"kind": "regular", "angle": 0},
     "right": {"kind": "regular", "angle": 0},
     "left_alt": {"kind": "regular", "angle": "pi/2"},     # second realization (two spectra)
     "transform": {"eta": "id", "gamma": "rotation:0.3"}}

A radial problem replaces ``Q``/``R`` by ``"radial": {"kappa": 1, "q_sc": "0", "q_am": "0"}``
(the interval is then ``(0, b)``); its left condition defaults to the natural one.
Boundary kinds: ``regular`` (``angle`` or ``vector``), ``reference`` (``anchor``,
``vector``, ``lam0``), ``radial``, ``limit_point`` (``seed``, ``cap``) and
``truncated`` (``x``, ``angle``).  Angles may be expressions such as ``"pi/2"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .boundary import BoundaryCondition, ConfigurationError
from .coefficients import (DiracExpression, HypothesisError, Interval, RadialSpec, as_matrix_field, make_radial, named_field,
                           validate_hypotheses)
from .expression import parse_coefficient

__all__ = ["Problem", "load_problem", "parse_problem", "parse_boundary"]


def _number(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf"):
            return math.inf
        if s == "-inf":
            return -math.inf
        f = parse_coefficient(v)
        if not f.is_constant:
            raise ConfigurationError(f"expected a constant, got {v!r}")
        return float(f(0.0))
    return float(v)


def _interval(v) -> Interval:
    if isinstance(v, dict):
        return Interval(_number(v["a"]), _number(v["b"]))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return Interval(_number(v[0]), _number(v[1]))
    raise ConfigurationError(f"cannot read interval {v!r}")


def parse_boundary(d: dict | None, endpoint: str) -> BoundaryCondition | None:
    if d is None:
        return None
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigurationError(f"{endpoint} boundary condition needs a 'kind'")
    kind = d["kind"]
    vec = d.get("vector")
    vec = None if vec is None else tuple(_number(t) for t in vec)
    if kind == "regular":
        if vec is not None:
            return BoundaryCondition.from_vector(vec, endpoint)
        return BoundaryCondition.from_angle(_number(d.get("angle", 0.0)), endpoint)
    if kind == "reference":
        if vec is None or "anchor" not in d:
            raise ConfigurationError("reference condition needs 'anchor' and 'vector'")
        return BoundaryCondition.reference(_number(d["anchor"]), vec, endpoint, _number(d.get("lam0", 0.0)))
    if kind == "radial":
        if endpoint != "left":
            raise ConfigurationError("radial condition is a left condition")
        return BoundaryCondition.radial()
    if kind == "limit_point":
        return BoundaryCondition.limit_point(endpoint, _number(d.get("seed", 10.0)), _number(d.get("cap", 1e6)))
    if kind == "truncated":
        if "x" not in d:
            raise ConfigurationError("truncated condition needs 'x'")
        return BoundaryCondition.truncated(_number(d["x"]), _number(d.get("angle", 0.0)), endpoint)
    raise ConfigurationError(f"unknown boundary kind {kind!r}")


@dataclass
class Problem:
    expr: DiracExpression
    left: BoundaryCondition | None
    right: BoundaryCondition | None
    left_alt: BoundaryCondition | None = None
    transform: dict | None = None
    name: str = ""
    source: dict = field(default_factory=dict)

    @property
    def is_radial(self) -> bool:
        return self.expr.radial is not None

    def require_right(self) -> BoundaryCondition:
        if self.right is None:
            raise ConfigurationError("problem has no right boundary condition")
        return self.right

    def to_json(self):
        return {"name": self.name, "expr": self.expr.to_json(),
                "left": None if self.left is None else self.left.to_json(),
                "right": None if self.right is None else self.right.to_json(),
                "left_alt": None if self.left_alt is None else self.left_alt.to_json(),
                "transform": self.transform}


def parse_problem(doc: dict) -> Problem:
    if not isinstance(doc, dict):
        raise ConfigurationError("problem file must hold a JSON object")
    name = str(doc.get("name", ""))
    try:
        if "radial" in doc:
            r = doc["radial"]
            iv = _interval(doc["interval"]) if "interval" in doc else Interval(0.0, _number(r.get("b", "inf")))
            if iv.a != 0:
                raise ConfigurationError("radial problems live on (0, b)")
            spec = RadialSpec(float(r["kappa"]), str(r.get("q_sc", "0")), str(r.get("q_am", "0")), iv.b)
            expr = make_radial(spec)
        else:
            iv = _interval(doc["interval"])
            Q = as_matrix_field(doc.get("Q", {"family": "zero"}))
            R = as_matrix_field(doc["R"]) if "R" in doc else named_field("identity")
            expr = DiracExpression(iv, Q, R, name=name)
            validate_hypotheses(expr, n_samples=256)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigurationError, HypothesisError)):
            raise
        raise ConfigurationError(f"invalid problem: {exc}") from exc
    left = parse_boundary(doc.get("left"), "left")
    right = parse_boundary(doc.get("right"), "right")
    left_alt = parse_boundary(doc.get("left_alt"), "left")
    return Problem(expr, left, right, left_alt, doc.get("transform"), name, doc)


def load_problem(path) -> Problem:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read problem file {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"problem file {p} is not valid JSON: {exc}") from exc
    prob = parse_problem(doc)
    if not prob.name:
        prob.name = p.stem
    return prob
