"""Dirac differential expressions ``R^{-1}(J f' + Q f)`` and their coefficients.

The variable ``x`` is dimensionless throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, interpolate

from .expression import ScalarField, parse_coefficient

__all__ = [
    "J",
    "Interval",
    "MatrixField",
    "ExpressionMatrixField",
    "GridMatrixField",
    "FunctionMatrixField",
    "ConstantMatrixField",
    "named_field",
    "DiracExpression",
    "RadialSpec",
    "HypothesisError",
    "ValidationReport",
    "make_radial",
    "validate_hypotheses",
    "check_local_integrability",
    "parse_coefficient",
]

J = np.array([[0.0, -1.0], [1.0, 0.0]])


class HypothesisError(ValueError):
    """Coefficients fail symmetry, positivity or local integrability."""

    def __init__(self, message: str, x: float | None = None, report=None):
        super().__init__(message if x is None else f"{message} at x={x!r}")
        self.x = x
        self.report = report


def _parse_end(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        return float(parse_coefficient(v)(0.0))
    return float(v)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _parse_end(self.a))
        object.__setattr__(self, "b", _parse_end(self.b))
        if not self.a < self.b:
            raise ValueError(f"empty interval ({self.a}, {self.b})")

    @property
    def finite_left(self) -> bool:
        return math.isfinite(self.a)

    @property
    def finite_right(self) -> bool:
        return math.isfinite(self.b)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all((x > self.a) & (x < self.b)))

    def interior_point(self) -> float:
        if self.finite_left and self.finite_right:
            return 0.5 * (self.a + self.b)
        if self.finite_left:
            return self.a + 1.0
        if self.finite_right:
            return self.b - 1.0
        return 0.0

    def to_json(self):
        enc = lambda v: v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {"a": enc(self.a), "b": enc(self.b)}


# ---------------------------------------------------------------------------
# matrix fields


class MatrixField:
    """Real 2x2 matrix-valued function of ``x``; ``field(x)`` has shape ``x.shape + (2, 2)``."""

    supports_complex = False
    is_constant = False
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.supports_complex:
            h = 1e-30
            return np.imag(self(x + 1j * h)) / h
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        return (self(x + h) - self(x - h)) / (2 * h)[..., None, None]

    def to_json(self):
        return {"family": "opaque"}


class ExpressionMatrixField(MatrixField):
    supports_complex = True

    def __init__(self, entries: Sequence[Sequence[str | float | ScalarField]]):
        rows = [[e if isinstance(e, ScalarField) else parse_coefficient(e) for e in row] for row in entries]
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValueError("matrix field needs a 2x2 array of expressions")
        self.entries = rows
        self.is_constant = all(e.is_constant for r in rows for e in r)

    def __call__(self, x):
        x = np.asarray(x)
        out = np.empty(x.shape + (2, 2), dtype=complex if np.iscomplexobj(x) else float)
        for i in range(2):
            for j in range(2):
                out[..., i, j] = self.entries[i][j](x)
        return out

    def to_json(self):
        return [[e.text for e in r] for r in self.entries]


class GridMatrixField(MatrixField):
    """Tabulated field with linear or cubic interpolation; refuses queries off the grid."""

    def __init__(self, x, values, order: str = "cubic"):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float).reshape(len(x), 2, 2)
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid abscissae must be strictly increasing")
        if order not in ("linear", "cubic"):
            raise ValueError(f"unknown interpolation order {order!r}")
        self.x = x
        self.values = values
        self.order = order
        self.domain = (float(x[0]), float(x[-1]))
        if order == "cubic":
            self._spline = interpolate.CubicSpline(x, values, axis=0)

    def _check(self, x):
        lo, hi = self.domain
        if np.any((x < lo - 1e-12 * max(1, abs(lo))) | (x > hi + 1e-12 * max(1, abs(hi)))):
            bad = x[(x < lo) | (x > hi)].flat[0]
            raise ValueError(f"grid field queried at x={bad!r} outside [{lo}, {hi}]")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        self._check(x)
        if self.order == "cubic":
            return self._spline(x)
        out = np.empty(x.shape + (2, 2))
        for i in range(2):
            for j in range(2):
                out[..., i, j] = np.interp(x, self.x, self.values[:, i, j])
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        self._check(x)
        if self.order == "cubic":
            return self._spline(x, 1)
        # centered differences at the grid scale
        h = 0.5 * float(np.min(np.diff(self.x)))
        lo, hi = self.domain
        xp = np.minimum(x + h, hi)
        xm = np.maximum(x - h, lo)
        return (self(xp) - self(xm)) / (xp - xm)[..., None, None]

    def to_json(self):
        return {"x": self.x.tolist(), "values": self.values.tolist(), "order": self.order}


class FunctionMatrixField(MatrixField):
    def __init__(self, func: Callable, dfunc: Callable | None = None, *, supports_complex=False,
                 name: str = "function", domain=(-math.inf, math.inf)):
        self.func = func
        self.dfunc = dfunc
        self.supports_complex = supports_complex
        self.name = name
        self.domain = domain

    def __call__(self, x):
        return self.func(np.asarray(x))

    def derivative(self, x):
        if self.dfunc is not None:
            return self.dfunc(np.asarray(x, dtype=float))
        return super().derivative(x)

    def to_json(self):
        return {"family": self.name}


class ConstantMatrixField(MatrixField):
    supports_complex = True
    is_constant = True

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float).reshape(2, 2)

    def __call__(self, x):
        x = np.asarray(x)
        out = np.broadcast_to(self.value, x.shape + (2, 2))
        return out.astype(complex) if np.iscomplexobj(x) else out.copy()

    def derivative(self, x):
        return np.zeros(np.shape(x) + (2, 2))

    def to_json(self):
        return {"family": "constant", "value": self.value.tolist()}


def named_field(name: str, **params) -> MatrixField:
    """Named coefficient families: ``zero``, ``identity``, ``constant`` (needs ``value``)."""
    if name == "zero":
        return ConstantMatrixField(np.zeros((2, 2)))
    if name == "identity":
        return ConstantMatrixField(np.eye(2))
    if name == "constant":
        return ConstantMatrixField(params["value"])
    raise ValueError(f"unknown matrix family {name!r}")


def as_matrix_field(spec) -> MatrixField:
    """Build a field from a 2x2 nested list of expressions, a grid dict, a family dict or a field."""
    if isinstance(spec, MatrixField):
        return spec
    if isinstance(spec, dict):
        if "family" in spec:
            params = {k: v for k, v in spec.items() if k != "family"}
            return named_field(spec["family"], **params)
        if "x" in spec and "values" in spec:
            return GridMatrixField(spec["x"], spec["values"], spec.get("order", "cubic"))
        raise ValueError(f"cannot interpret matrix field {spec!r}")
    arr = spec
    if isinstance(arr, np.ndarray) and arr.dtype != object:
        return ConstantMatrixField(arr)
    entries = [[e for e in row] for row in arr]
    if all(isinstance(e, (int, float)) for r in entries for e in r):
        return ConstantMatrixField(entries)
    return ExpressionMatrixField(entries)


# ---------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class RadialSpec:
    kappa: float
    q_sc: ScalarField | str = "0"
    q_am: ScalarField | str = "0"
    b: float = math.inf

    def __post_init__(self):
        for name in ("q_sc", "q_am"):
            v = getattr(self, name)
            if not isinstance(v, ScalarField):
                object.__setattr__(self, name, parse_coefficient(v))
        object.__setattr__(self, "b", _parse_end(self.b))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def is_free(self) -> bool:
        return self.q_sc.is_constant and self.q_am.is_constant and \
            float(self.q_sc(1.0)) == 0.0 and float(self.q_am(1.0)) == 0.0


@dataclass(frozen=True)
class DiracExpression:
    interval: Interval
    Q: MatrixField
    R: MatrixField
    radial: RadialSpec | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_entries(cls, interval, Q, R=None, name=""):
        if not isinstance(interval, Interval):
            interval = Interval(*interval)
        R = named_field("identity") if R is None else as_matrix_field(R)
        return cls(interval, as_matrix_field(Q), R, name=name)

    @classmethod
    def free(cls, a=0.0, b=math.inf):
        return cls(Interval(a, b), named_field("zero"), named_field("identity"), name="free")

    def coefficients(self, x):
        """Symmetrised ``(Q(x), R(x))``."""
        Q = self.Q(x)
        R = self.R(x)
        Q = 0.5 * (Q + np.swapaxes(Q, -1, -2))
        R = 0.5 * (R + np.swapaxes(R, -1, -2))
        return Q, R

    @property
    def r_is_identity(self) -> bool:
        R = self.R
        return isinstance(R, ConstantMatrixField) and np.array_equal(R.value, np.eye(2))

    def to_json(self):
        if self.radial is not None:
            r = self.radial
            return {"interval": self.interval.to_json(),
                    "radial": {"kappa": r.kappa, "q_sc": r.q_sc.text, "q_am": r.q_am.text}}
        return {"interval": self.interval.to_json(), "Q": self.Q.to_json(), "R": self.R.to_json()}


def _nested_quadrature(fn: Callable, end: float, c: float, kmax: int = 40, rtol: float = 1e-6):
    """Integrate ``fn`` over cells ``[end + 2^-k (c-end), end + 2^-(k-1) (c-end)]``.

    Returns ``(converged, partial_integrals)``.  Convergence means the cell
    increments decay geometrically and the extrapolated tail is below
    ``rtol`` relative to the total; divergence is declared when increments
    stop shrinking.
    """
    total = 0.0
    values = []
    incs = []
    prev = c
    L = c - end
    for k in range(1, kmax + 1):
        nxt = end + L * 2.0 ** -k
        lo, hi = sorted((nxt, prev))
        inc, _ = integrate.quad(fn, lo, hi, limit=100)
        total += inc
        values.append(total)
        incs.append(abs(inc))
        prev = nxt
        if k >= 8:
            last = np.array(incs[-6:])
            ratios = last[1:] / np.maximum(last[:-1], 1e-300)
            if last[-1] == 0.0:
                return True, values
            r = float(ratios.max())
            if r < 0.97:
                tail = last[-1] * r / (1 - r)
                if tail <= rtol * max(abs(total), 1e-300):
                    return True, values
            elif np.all(ratios > 0.97):
                return False, values
    # out of cells: sustained geometric decay of the increments still means a finite limit
    last = np.array(incs[-6:])
    return bool(len(last) >= 6 and np.all(last[1:] < 0.97 * last[:-1])), values


def make_radial(spec: RadialSpec, check_c: float = 1.0) -> DiracExpression:
    """Radial expression with ``R = I`` and ``Q = [[q_sc, k/x + q_am], [k/x + q_am, -q_sc]]``."""
    if spec.kappa < 0:
        raise ValueError("kappa must be >= 0; reduce kappa < 0 with the Gamma = J transform")
    if abs(spec.kappa - 0.5) < 1e-14:
        c = min(check_c, spec.b / 2 if math.isfinite(spec.b) else check_c)
        fn = lambda x: (abs(float(spec.q_sc(x))) + abs(float(spec.q_am(x)))) * abs(math.log(x))
        ok, values = _nested_quadrature(fn, 0.0, c, rtol=1e-4)
        if not ok:
            raise HypothesisError(
                f"kappa=1/2 requires (|q_sc|+|q_am|)|log x| integrable near 0; partial integrals {values[-3:]}")
    k = spec.kappa
    qs, qa = spec.q_sc, spec.q_am

    def Q(x):
        x = np.asarray(x)
        s = qs(x)
        off = k / x + qa(x)
        out = np.empty(x.shape + (2, 2), dtype=np.result_type(s, off, float))
        out[..., 0, 0] = s
        out[..., 1, 1] = -s
        out[..., 0, 1] = off
        out[..., 1, 0] = off
        return out

    Qf = FunctionMatrixField(Q, supports_complex=True, name="radial")
    return DiracExpression(Interval(0.0, spec.b), Qf, named_field("identity"), radial=spec,
                           name=f"radial(kappa={k:g})")


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    symmetry_residual: float
    symmetry_worst_x: float
    min_eig_R: float
    min_eig_worst_x: float
    integrals: list[dict]
    n_samples: int

    @property
    def ok(self) -> bool:
        return True

    def to_json(self):
        return dict(self.__dict__)


def default_compacts(interval: Interval) -> list[tuple[float, float]]:
    a, b = interval.a, interval.b
    if interval.finite_left and interval.finite_right:
        pad = (b - a) / 1024
        return [(a + pad, b - pad)]
    c = interval.interior_point()
    lo = a + 1e-3 if interval.finite_left else c - 8.0
    hi = b - 1e-3 if interval.finite_right else c + 8.0
    return [(lo, hi)]


def validate_hypotheses(expr: DiracExpression, compacts=None, n_samples: int = 1024,
                        tol: float = 1e-12) -> ValidationReport:
    """Sample-based check of symmetry of Q, positivity of R, and integrability on compacts.

    Raises :class:`HypothesisError` at the offending ``x`` on failure.
    """
    compacts = default_compacts(expr.interval) if compacts is None else compacts
    if not compacts:
        raise ValueError("sample plan needs at least one compact subinterval")
    sym_res, sym_x = 0.0, float("nan")
    min_eig, eig_x = math.inf, float("nan")
    integrals = []
    for lo, hi in compacts:
        if not (expr.interval.a <= lo < hi <= expr.interval.b):
            raise ValueError(f"compact [{lo}, {hi}] not inside {expr.interval}")
        xs = np.linspace(lo, hi, n_samples)
        Q = np.asarray(expr.Q(xs), dtype=float)
        R = np.asarray(expr.R(xs), dtype=float)
        scale = np.maximum(1.0, np.abs(Q).max(axis=(-1, -2)))
        res = np.abs(Q[..., 0, 1] - Q[..., 1, 0]) / scale
        i = int(np.argmax(res))
        if res[i] > sym_res or math.isnan(sym_x):
            sym_res, sym_x = float(res[i]), float(xs[i])
        rsym = np.abs(R[..., 0, 1] - R[..., 1, 0])
        if rsym.max() > tol * max(1.0, np.abs(R).max()):
            j = int(np.argmax(rsym))
            raise HypothesisError("weight matrix R is not symmetric", float(xs[j]))
        eig = np.linalg.eigvalsh(0.5 * (R + np.swapaxes(R, -1, -2)))[..., 0]
        j = int(np.argmin(eig))
        if eig[j] < min_eig:
            min_eig, eig_x = float(eig[j]), float(xs[j])
        nq = lambda x: float(np.linalg.norm(np.asarray(expr.Q(np.array([x])), dtype=float)[0], 2))
        nr = lambda x: float(np.linalg.norm(np.asarray(expr.R(np.array([x])), dtype=float)[0], 2))
        iq, _ = integrate.quad(nq, lo, hi, limit=200)
        ir, _ = integrate.quad(nr, lo, hi, limit=200)
        integrals.append({"lo": lo, "hi": hi, "int_norm_Q": iq, "int_norm_R": ir})
    report = ValidationReport(sym_res, sym_x, min_eig, eig_x, integrals, n_samples)
    if sym_res > tol:
        raise HypothesisError(f"potential Q is not symmetric (residual {sym_res:.3g})", sym_x, report)
    if not min_eig > 0:
        raise HypothesisError(f"weight R is not positive definite (min eigenvalue {min_eig:.3g})", eig_x, report)
    if not all(math.isfinite(d["int_norm_Q"]) and math.isfinite(d["int_norm_R"]) for d in integrals):
        raise HypothesisError("coefficient norms not integrable on a compact", None, report)
    return report


def check_local_integrability(expr: DiracExpression, endpoint: str, c: float | None = None,
                              kmax: int = 40, rtol: float = 1e-8):
    """Nested quadrature of ``||Q|| + ||R||`` on ``[a + 2^-k (c-a), c]`` (or its mirror).

    Returns ``(converged, partial_integrals)``; infinite endpoints never converge.
    """
    iv = expr.interval
    end = iv.a if endpoint == "left" else iv.b
    if not math.isfinite(end):
        return False, []
    if c is None:
        c = iv.interior_point()
    L = c - end

    def g(x):
        Q, R = expr.coefficients(np.array([x]))
        return float(np.linalg.norm(np.asarray(Q[0], dtype=float), 2) + np.linalg.norm(np.asarray(R[0], dtype=float), 2))

    return _nested_quadrature(g, end, c, kmax=kmax, rtol=rtol)
