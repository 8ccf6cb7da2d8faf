"""Liouville transformations ``f(x) = Gamma(x) f~(eta(x))`` and invariance checks.

A transform is stored as the pair ``(eta, Gamma)`` with derivatives.  The tilde
coefficients are

    R~(eta) = Gamma^T R Gamma / eta',    Q~(eta) = (Gamma^T Q Gamma + Gamma^T J Gamma') / eta',

and solutions, frames and boundary vectors map by ``f~(eta(x)) = Gamma(x)^{-1} f(x)``.
Because ``det Gamma = 1`` the Wronskian is preserved, so Weyl functions, spectra
and de Branges kernels of the two expressions agree.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._cheb import PiecewiseCheb
from .boundary import (AnchoredFrame, BoundaryCondition, ConfigurationError, Frame, RegularFrame,
                       left_frame)
from .coefficients import (J, DiracExpression, FunctionMatrixField, HypothesisError, Interval,
                           RadialSpec, make_radial, validate_hypotheses)
from .expression import ScalarField, parse_coefficient
from .ode import PropagationSettings, transfer_matrix, evolve

__all__ = [
    "LiouvilleTransform",
    "pushforward",
    "pullback",
    "compose",
    "normalize_weight",
    "normalize_trace",
    "kill_potential",
    "normalize_det",
    "gauge_rotate",
    "push_boundary",
    "pushed_frame",
    "invariance_harness",
    "radial_form_defect",
    "rigidity_check",
    "transform_from_json",
]

_I = np.eye(2)


def _T(M):
    return np.swapaxes(M, -1, -2)


def _inv2(M):
    """Inverse of unimodular 2x2 matrices (the adjugate)."""
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 1, 1] = M[..., 0, 0]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    return out


def _rot(phi):
    """``exp(phi J) = cos(phi) I + sin(phi) J``."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    out = np.empty(phi.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 1, 1] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    return out


def _spd_sqrt(S):
    """Symmetric positive definite square root of 2x2 SPD matrices (closed form)."""
    d = np.sqrt(np.linalg.det(S))
    t = np.sqrt(np.trace(S, axis1=-2, axis2=-1) + 2 * d)
    return (S + d[..., None, None] * _I) / t[..., None, None], d, t


def _const(value):
    return lambda x: np.broadcast_to(np.asarray(value, dtype=float), np.shape(x) + np.shape(value)).copy()


@dataclass(frozen=True)
class LiouvilleTransform:
    """The pair ``(eta, Gamma)`` acting as ``f(x) = Gamma(x) f~(eta(x))``.

    ``eta``, ``deta``, ``eta_inv`` act on arrays of points; ``gamma`` and ``dgamma``
    return arrays of shape ``x.shape + (2, 2)``.
    """

    source: Interval
    target: Interval
    eta: Callable
    deta: Callable
    eta_inv: Callable
    gamma: Callable
    dgamma: Callable
    name: str = "transform"
    meta: dict = field(default_factory=dict, compare=False)

    # ------------------------------------------------------------- constructors
    @classmethod
    def identity(cls, interval: Interval) -> "LiouvilleTransform":
        return cls.shift(interval, 0.0, name="identity")

    @classmethod
    def shift(cls, interval: Interval, eta0: float, name: str = "shift") -> "LiouvilleTransform":
        e0 = float(eta0)
        return cls(interval, Interval(interval.a + e0, interval.b + e0),
                   lambda x: np.asarray(x, dtype=float) + e0, lambda x: np.ones(np.shape(x)),
                   lambda y: np.asarray(y, dtype=float) - e0, _const(_I), _const(np.zeros((2, 2))),
                   name=name, meta={"eta0": e0})

    @classmethod
    def rotation(cls, interval: Interval, phi, dphi=None, eta0: float = 0.0) -> "LiouvilleTransform":
        """``Gamma = exp(phi(x) J)`` and ``eta(x) = x + eta0``; ``phi`` a number, expression or callable."""
        phi_f, dphi_f, text = _scalar(phi, dphi)
        base = cls.shift(interval, eta0)

        def dgamma(x):
            return dphi_f(x)[..., None, None] * (J @ _rot(phi_f(x)))

        return cls(interval, base.target, base.eta, base.deta, base.eta_inv,
                   lambda x: _rot(phi_f(x)), dgamma, name="rotation",
                   meta={"phi": text, "eta0": float(eta0)})

    @classmethod
    def constant(cls, interval: Interval, gamma, eta_scale: float = 1.0, eta0: float = 0.0):
        """Constant unimodular ``Gamma`` with the affine map ``eta(x) = eta_scale x + eta0``."""
        G = np.asarray(gamma, dtype=float)
        if G.shape != (2, 2) or abs(np.linalg.det(G) - 1) > 1e-12:
            raise ValueError("constant Gamma must be a real 2x2 matrix with determinant 1")
        k, e0 = float(eta_scale), float(eta0)
        if not k > 0:
            raise ValueError("eta must be increasing")
        tgt = Interval(k * interval.a + e0, k * interval.b + e0)
        return cls(interval, tgt, lambda x: k * np.asarray(x, dtype=float) + e0,
                   lambda x: np.full(np.shape(x), k), lambda y: (np.asarray(y, dtype=float) - e0) / k,
                   _const(G), _const(np.zeros((2, 2))), name="constant",
                   meta={"gamma": G.tolist(), "eta_scale": k, "eta0": e0})

    @classmethod
    def from_expressions(cls, interval: Interval, eta: str, gamma=None) -> "LiouvilleTransform":
        """``eta`` an expression in ``x``; ``gamma`` a 2x2 array of expressions (default I)."""
        if not (interval.finite_left and interval.finite_right):
            raise ConfigurationError("expression-defined eta needs a finite interval")
        ef = parse_coefficient(eta)
        eta_f = lambda x: np.asarray(ef(np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x))
        deta_f = lambda x: np.asarray(ef.derivative(np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x))
        table = PiecewiseCheb.build(eta_f, interval.a, interval.b)
        inv = _polished_inverse(table, eta_f, deta_f, interval)
        if gamma is None:
            g, dg = _const(_I), _const(np.zeros((2, 2)))
            gtext = [["1", "0"], ["0", "1"]]
        else:
            fields = [[parse_coefficient(str(e)) for e in row] for row in gamma]
            gtext = [[str(e) for e in row] for row in gamma]

            def g(x):
                x = np.asarray(x, dtype=float)
                return np.stack([np.stack([np.asarray(f(x), dtype=float) * np.ones(x.shape) for f in row], -1)
                                 for row in fields], -2)

            def dg(x):
                x = np.asarray(x, dtype=float)
                return np.stack([np.stack([np.asarray(f.derivative(x), dtype=float) * np.ones(x.shape)
                                           for f in row], -1) for row in fields], -2)

        tgt = Interval(float(eta_f(np.array([interval.a]))[0]), float(eta_f(np.array([interval.b]))[0]))
        return cls(interval, tgt, eta_f, deta_f, inv, g, dg, name="expression",
                   meta={"eta": eta, "gamma": gtext})

    # ------------------------------------------------------------- algebra
    def inverse(self) -> "LiouvilleTransform":
        """The transform with ``f~(y) = Gamma(eta^{-1}(y))^{-1} f(eta^{-1}(y))``."""
        fwd = self

        def g(y):
            return _inv2(fwd.gamma(fwd.eta_inv(y)))

        def dg(y):
            x = fwd.eta_inv(y)
            Gi = _inv2(fwd.gamma(x))
            return -(Gi @ fwd.dgamma(x) @ Gi) / fwd.deta(x)[..., None, None]

        return LiouvilleTransform(self.target, self.source, self.eta_inv,
                                  lambda y: 1.0 / fwd.deta(fwd.eta_inv(y)), self.eta, g, dg,
                                  name=f"inverse({self.name})", meta={"of": self.to_json()})

    def then(self, other: "LiouvilleTransform") -> "LiouvilleTransform":
        """Apply ``self`` first, then ``other`` (acting on the tilde side)."""
        return compose(other, self)

    def check(self, n: int = 257, tol: float = 1e-10):
        """Sampled invariants: eta increasing, ``det Gamma = 1`` and Gamma real."""
        xs = _samples(self.source, n)
        d = np.asarray(self.deta(xs), dtype=float)
        G = np.asarray(self.gamma(xs))
        det_dev = float(np.max(np.abs(np.linalg.det(G.real) - 1)))
        rep = {"min_deta": float(d.min()), "det_defect": det_dev,
               "imag": float(np.max(np.abs(np.imag(G)))), "n": n}
        if not d.min() > 0:
            raise HypothesisError("eta is not increasing", float(xs[int(np.argmin(d))]))
        if det_dev > tol:
            raise HypothesisError(f"det Gamma deviates from 1 by {det_dev:.3g}")
        return rep

    def to_json(self):
        return {"name": self.name, "source": self.source.to_json(), "target": self.target.to_json(),
                **{k: v for k, v in self.meta.items() if k != "of"}}


def compose(T2: LiouvilleTransform, T1: LiouvilleTransform) -> LiouvilleTransform:
    """``T2 o T1``: first ``T1`` (x -> y), then ``T2`` (y -> w)."""

    def g(x):
        return T1.gamma(x) @ T2.gamma(T1.eta(x))

    def dg(x):
        y = T1.eta(x)
        return (T1.dgamma(x) @ T2.gamma(y)
                + T1.gamma(x) @ T2.dgamma(y) * T1.deta(x)[..., None, None])

    return LiouvilleTransform(T1.source, T2.target, lambda x: T2.eta(T1.eta(x)),
                              lambda x: T2.deta(T1.eta(x)) * T1.deta(x),
                              lambda w: T1.eta_inv(T2.eta_inv(w)), g, dg,
                              name=f"{T2.name}o{T1.name}", meta={"parts": [T1.to_json(), T2.to_json()]})


def _samples(iv: Interval, n: int):
    if iv.finite_left and iv.finite_right:
        return np.linspace(iv.a, iv.b, n)
    c = iv.interior_point()
    lo = iv.a if iv.finite_left else c - 20.0
    hi = iv.b if iv.finite_right else c + 20.0
    return np.linspace(lo, hi, n)


def _scalar(v, dv=None):
    """-> (f, df, description) for a number, expression text, ScalarField or callable."""
    if isinstance(v, (int, float)):
        c = float(v)
        return (lambda x: np.full(np.shape(x), c), lambda x: np.zeros(np.shape(x)), c)
    if isinstance(v, str):
        v = parse_coefficient(v)
    if isinstance(v, ScalarField):
        f = v
        return (lambda x: np.asarray(f(np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x)),
                lambda x: np.asarray(f.derivative(np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x)),
                f.pretty())
    if callable(v):
        if dv is None:
            raise ValueError("a callable phase needs its derivative")
        return (lambda x: np.asarray(v(np.asarray(x, dtype=float)), dtype=float),
                lambda x: np.asarray(dv(np.asarray(x, dtype=float)), dtype=float), "callable")
    raise TypeError(f"cannot interpret {v!r} as a scalar field")


def _polished_inverse(table: PiecewiseCheb, f, df, iv: Interval):
    dtable = table.derivative()

    def inv(y):
        y = np.asarray(y, dtype=float)
        x = table.inverse(y, dtable)
        for _ in range(2):
            x = np.clip(x - (f(x) - y) / df(x), iv.a, iv.b)
        return x

    return inv


def _cumulative(fn, iv: Interval, tol: float = 1e-14):
    """``(eta, deta, eta_inv, target)`` for ``eta(x) = int_a^x fn``, ``fn > 0`` smooth."""
    if not (iv.finite_left and iv.finite_right):
        raise ConfigurationError("cumulative maps are tabulated and need a finite interval")
    dtab = PiecewiseCheb.build(fn, iv.a, iv.b, tol=tol)
    tab = dtab.antiderivative(iv.a)
    inv = lambda y: tab.inverse(y, dtab)
    tgt = Interval(iv.a, float(tab(np.array([iv.b]))[0]))
    return tab, dtab, inv, tgt


# ---------------------------------------------------------------------------
# pushforward


class _Pushed:
    """Tilde coefficients with a one-entry cache (the integrator asks for Q and R in turn)."""

    def __init__(self, expr: DiracExpression, T: LiouvilleTransform):
        self.expr = expr
        self.T = T
        self._cache = (None, None)  # (key, value), replaced as one object

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        key = (y.shape, y.tobytes())
        cached_key, val = self._cache
        if key != cached_key:
            x = self.T.eta_inv(y)
            Q, R = self.expr.coefficients(x)
            G = np.asarray(self.T.gamma(x), dtype=float)
            dG = np.asarray(self.T.dgamma(x), dtype=float)
            d = np.asarray(self.T.deta(x), dtype=float)[..., None, None]
            Gt = _T(G)
            Rt = Gt @ R @ G / d
            Qt = (Gt @ Q @ G + Gt @ J @ dG) / d
            val = (Qt, Rt)
            self._cache = (key, val)
        return val


def pushforward(expr: DiracExpression, T: LiouvilleTransform, validate: bool = True) -> DiracExpression:
    """The tilde expression on ``T.target`` (its solutions are ``Gamma^{-1} f`` in ``eta``)."""
    iv = expr.interval
    if (T.source.a, T.source.b) != (iv.a, iv.b):
        raise ConfigurationError(f"transform is defined on {T.source}, expression on {iv}")
    T.check()
    coef = _Pushed(expr, T)
    dom = (T.target.a, T.target.b)
    Qf = FunctionMatrixField(lambda y: coef(y)[0], name="pushforward", domain=dom)
    Rf = FunctionMatrixField(lambda y: coef(y)[1], name="pushforward", domain=dom)
    out = DiracExpression(T.target, Qf, Rf, name=f"{T.name}[{expr.name}]",
                          meta={"transform": T.to_json(), "source": expr.to_json()})
    if validate:
        validate_hypotheses(out, n_samples=256)
    return out


def pullback(expr_tilde: DiracExpression, T: LiouvilleTransform, validate: bool = True) -> DiracExpression:
    """Inverse of :func:`pushforward`: the expression on ``T.source``."""
    return pushforward(expr_tilde, T.inverse(), validate)


# ---------------------------------------------------------------------------
# normalizations


def _weight_parts(expr: DiracExpression):
    def R_and_dR(x):
        x = np.asarray(x, dtype=float)
        R = expr.R(x)
        R = 0.5 * (R + _T(R))
        dR = expr.R.derivative(x)
        return np.asarray(R, dtype=float), 0.5 * (dR + _T(dR))

    def sqrt_det(x):
        R, _ = R_and_dR(x)
        det = np.linalg.det(R)
        if np.any(det <= 0):
            raise HypothesisError("det R is not positive", float(np.asarray(x).ravel()[int(np.argmin(det))]))
        return np.sqrt(det)

    return R_and_dR, sqrt_det


def _eta_from_sqrt_det(expr: DiracExpression, sqrt_det):
    iv = expr.interval
    if expr.R.is_constant:
        k = float(sqrt_det(np.array([iv.interior_point()]))[0])
        a0 = iv.a if iv.finite_left else 0.0
        eta = lambda x: a0 + k * (np.asarray(x, dtype=float) - a0)
        return (eta, lambda x: np.full(np.shape(x), k), lambda y: a0 + (np.asarray(y, dtype=float) - a0) / k,
                Interval(float(eta(iv.a)), float(eta(iv.b))), "affine")
    tab, dtab, inv, tgt = _cumulative(sqrt_det, iv)
    return tab, lambda x: sqrt_det(np.asarray(x, dtype=float)), inv, tgt, "cumulative:detR"


def normalize_weight(expr: DiracExpression, validate: bool = True):
    """Transform with ``eta' = sqrt(det R)`` and ``Gamma = sqrt(eta' R^{-1})`` so that ``R~ = I``."""
    R_and_dR, sqrt_det = _weight_parts(expr)
    eta, deta, inv, tgt, how = _eta_from_sqrt_det(expr, sqrt_det)

    def parts(x):
        R, dR = R_and_dR(x)
        Ri = np.linalg.inv(R)
        det = np.linalg.det(R)
        ddet = np.einsum("...ij,...ji->...", _adj(R), dR)
        e1 = np.sqrt(det)
        e2 = ddet / (2 * e1)
        S = e1[..., None, None] * Ri
        dS = e2[..., None, None] * Ri - e1[..., None, None] * (Ri @ dR @ Ri)
        G, d, t = _spd_sqrt(S)
        dd = np.einsum("...ij,...ji->...", _adj(S), dS) / (2 * d)
        dt = (np.trace(dS, axis1=-2, axis2=-1) + 2 * dd) / (2 * t)
        dG = (dS + dd[..., None, None] * _I) / t[..., None, None] - G * (dt / t)[..., None, None]
        return G, dG

    T = LiouvilleTransform(expr.interval, tgt, eta, deta, inv, lambda x: parts(x)[0], lambda x: parts(x)[1],
                           name="normalize_weight", meta={"eta": how, "gamma": "weight-sqrt"})
    return pushforward(expr, T, validate), T


def _adj(M):
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 1, 1] = M[..., 0, 0]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    return out


def normalize_trace(expr: DiracExpression, validate: bool = True):
    """Rotation ``Gamma = exp(phi J)`` with ``phi' = tr Q / 2`` (anchored at the left end): ``tr Q~ = 0``.

    Written for ``R = I``; for other weights the rotation still removes the trace
    and conjugates ``R``.
    """
    iv = expr.interval

    def half_trace(x):
        Q, _ = expr.coefficients(np.asarray(x, dtype=float))
        return 0.5 * np.real(np.trace(Q, axis1=-2, axis2=-1))

    if expr.Q.is_constant:
        k = float(half_trace(np.array([iv.interior_point()]))[0])
        a0 = iv.a if iv.finite_left else 0.0
        phi = lambda x: k * (np.asarray(x, dtype=float) - a0)
        how = f"{k!r}*(x-{a0!r})"
    else:
        if not (iv.finite_left and iv.finite_right):
            raise ConfigurationError("cumulative phase needs a finite interval")
        dtab = PiecewiseCheb.build(half_trace, iv.a, iv.b)
        phi = dtab.antiderivative(0.0)
        how = "cumulative:trQ/2"
    T = LiouvilleTransform.rotation(iv, phi, half_trace)
    T = LiouvilleTransform(T.source, T.target, T.eta, T.deta, T.eta_inv, T.gamma, T.dgamma,
                           name="normalize_trace", meta={"phi": how})
    return pushforward(expr, T, validate), T


def kill_potential(expr: DiracExpression, settings: PropagationSettings | None = None,
                   anchor: float | None = None, validate: bool = True):
    """``Gamma`` solves ``J Gamma' + Q Gamma = 0`` with ``Gamma(anchor) = I``: ``Q~ = 0``, ``R~ = Gamma^T R Gamma``.

    ``Gamma`` is the zero-energy transfer matrix, tabulated in Chebyshev panels;
    ``Gamma' = J Q Gamma`` is evaluated from the table.
    """
    iv = expr.interval
    if not (iv.finite_left and iv.finite_right):
        raise ConfigurationError("kill_potential tabulates Gamma and needs a finite interval")
    x0 = iv.a if anchor is None else float(anchor)
    st = settings or PropagationSettings(rtol=1e-13)

    def sampler(xs):
        xs = np.asarray(xs, dtype=float)
        out = np.empty((len(xs), 2, 2))
        order = np.argsort(xs)
        xo = xs[order]
        right = xo >= x0
        if np.any(right):
            F, _ = evolve(expr, 0.0, x0, _I, xo[right], st, renormalize=False)
            out[order[right]] = F[:, 0].real
        if np.any(~right):
            F, _ = evolve(expr, 0.0, x0, _I, xo[~right][::-1], st, renormalize=False)
            out[order[~right]] = F[::-1, 0].real
        return out

    table = PiecewiseCheb.build(sampler, iv.a, iv.b, tol=1e-14)

    def gamma(x):
        return table(np.asarray(x, dtype=float))

    def dgamma(x):
        x = np.asarray(x, dtype=float)
        Q, _ = expr.coefficients(x)
        return J @ np.asarray(Q, dtype=float) @ gamma(x)

    base = LiouvilleTransform.identity(iv)
    T = LiouvilleTransform(iv, iv, base.eta, base.deta, base.eta_inv, gamma, dgamma,
                           name="kill_potential", meta={"anchor": x0, "panels": len(table.breaks) - 1})
    return pushforward(expr, T, validate), T


def normalize_det(expr: DiracExpression, validate: bool = True):
    """``Gamma = I`` and ``eta' = sqrt(det R)``: ``det R~ = 1`` and ``Q~ = Q / eta'``."""
    _, sqrt_det = _weight_parts(expr)
    eta, deta, inv, tgt, how = _eta_from_sqrt_det(expr, sqrt_det)
    T = LiouvilleTransform(expr.interval, tgt, eta, deta, inv, _const(_I), _const(np.zeros((2, 2))),
                           name="normalize_det", meta={"eta": how})
    return pushforward(expr, T, validate), T


def gauge_rotate(expr: DiracExpression, phi, eta0: float = 0.0, dphi=None, validate: bool = True):
    """``Q~(eta0 + x) = exp(-phi J) Q exp(phi J) - phi' I`` on the shifted interval."""
    T = LiouvilleTransform.rotation(expr.interval, phi, dphi, eta0)
    return pushforward(expr, T, validate), T


# ---------------------------------------------------------------------------
# frames and boundary data


def push_boundary(bc: BoundaryCondition, T: LiouvilleTransform) -> BoundaryCondition:
    """Boundary data for the tilde expression: vectors map by ``Gamma^{-1}``, points by ``eta``."""
    if bc.kind in ("limit_point", "radial"):
        if bc.kind == "radial":
            raise ConfigurationError("radial conditions are carried by a pushed frame, not a vector")
        return bc
    if bc.kind == "regular":
        x = T.source.a if bc.endpoint == "left" else T.source.b
        if not math.isfinite(x):
            raise ConfigurationError("regular condition at an infinite endpoint")
        u = _inv2(np.asarray(T.gamma(np.array([x]))[0], dtype=float)) @ bc.u
        return BoundaryCondition.from_vector(u, bc.endpoint)
    x = bc.anchor
    u = _inv2(np.asarray(T.gamma(np.array([x]))[0], dtype=float)) @ bc.u
    y = float(T.eta(np.array([x]))[0])
    if bc.kind == "truncated":
        return BoundaryCondition(bc.endpoint, "truncated", tuple(float(t) for t in u), anchor=y)
    return BoundaryCondition(bc.endpoint, "reference", tuple(float(t) for t in u), anchor=y, lam0=bc.lam0)


def pushed_frame(frame: Frame, T: LiouvilleTransform, expr_tilde: DiracExpression,
                 anchor: float | None = None) -> Frame:
    """Frame of the tilde expression with ``Theta~, Phi~ = Gamma^{-1} (Theta, Phi)`` at an anchor.

    For a regular left endpoint the anchor is the endpoint itself and the tilde
    frame is propagated independently; otherwise the frame values at the anchor
    are mapped, and points left of the anchor are mapped pointwise.
    """
    settings = frame.settings
    if isinstance(frame, RegularFrame):
        G = np.asarray(T.gamma(np.array([T.source.a]))[0], dtype=float)
        V = _inv2(G) @ frame._V

        def vals(z):
            return np.broadcast_to(V, (len(z), 2, 2))

        out = AnchoredFrame(expr_tilde, T.target.a, vals, settings=settings, entire=True,
                            meta={"pushed_from": "regular"})
        return out
    xa = frame.expr.interval.interior_point() if anchor is None else float(anchor)
    if hasattr(frame, "theta_anchor"):
        xa = min(xa, frame.theta_anchor)
    Ga = _inv2(np.asarray(T.gamma(np.array([xa]))[0], dtype=float))
    ya = float(T.eta(np.array([xa]))[0])

    def vals(z):
        F, _ = frame.values(z, [xa])
        return Ga @ F[0]

    def near(z, ys):
        xs = T.eta_inv(np.asarray(ys, dtype=float))
        F, _ = frame.values(z, xs)
        Gi = _inv2(np.asarray(T.gamma(xs), dtype=float))
        return np.einsum("xij,xzjk->xzik", Gi, F)

    out = AnchoredFrame(expr_tilde, ya, vals, near=near, settings=settings, entire=frame.entire,
                        singular_left=frame.singular_left, meta={"pushed_from": frame.kind, "anchor_x": xa})
    out.left_power = frame.left_power
    return out


# ---------------------------------------------------------------------------
# invariance harness


@dataclass
class HarnessReport:
    transform: dict
    eigenvalue_distance: float
    n_eigenvalues: tuple[int, int]
    weyl_deviation: float
    kernel_deviation: float
    probes: dict
    details: dict
    seconds: float

    @property
    def max_deviation(self) -> float:
        return max(self.eigenvalue_distance, self.weyl_deviation, self.kernel_deviation)

    def to_json(self):
        return dict(self.__dict__, max_deviation=self.max_deviation)


def invariance_harness(expr: DiracExpression, T: LiouvilleTransform, right: BoundaryCondition,
                       left: BoundaryCondition | None = None, window=(-20.0, 20.0), zs=None, c_grid=None,
                       zeta: complex = 1j, settings: PropagationSettings | None = None,
                       expr_tilde: DiracExpression | None = None) -> HarnessReport:
    """Compare spectra, Weyl functions and de Branges kernels of ``expr`` and its pushforward.

    The tilde side is built from the pushed coefficients, the pushed boundary
    data and its own propagation; only the frame normalisation at the left end
    is transported.  Kernel deviations are relative.
    """
    from .debranges import kernel_integral
    from .weyl import WeylFunction, eigenvalues, set_distance

    t0 = time.perf_counter()
    st = settings or PropagationSettings()
    frame = left_frame(expr, left, st)
    tilde = pushforward(expr, T) if expr_tilde is None else expr_tilde
    frame_t = pushed_frame(frame, T, tilde)
    right_t = push_boundary(right, T)
    W = WeylFunction(frame, right, settings=st)
    Wt = WeylFunction(frame_t, right_t, settings=st)
    if zs is None:
        rng = np.random.default_rng(0)
        zs = rng.uniform(-5, 5, 10) + 1j * rng.uniform(0.2, 3, 10)
    zs = np.asarray(zs, dtype=complex)
    m = W(zs)
    mt = Wt(zs)
    mdev = float(np.max(np.abs(m - mt)))
    eig_dist, n_e = 0.0, (0, 0)
    if W.discrete and window is not None:
        S = eigenvalues(W, window)
        St = eigenvalues(Wt, window)
        eig_dist = set_distance(S.eigenvalues, St.eigenvalues)
        n_e = (len(S.eigenvalues), len(St.eigenvalues))
    iv = expr.interval
    if c_grid is None:
        hi = iv.b if iv.finite_right else iv.interior_point() + 1.0
        lo = iv.a if iv.finite_left else hi - 2.0
        c_grid = lo + (hi - lo) * np.array([0.25, 0.5, 0.75])
    kdev = 0.0
    kvals = []
    for c in np.atleast_1d(c_grid):
        k = kernel_integral(frame, zeta, zeta, float(c)).value
        kt = kernel_integral(frame_t, zeta, zeta, float(T.eta(np.array([c]))[0])).value
        d = abs(k - kt) / max(abs(k), 1e-300)
        kdev = max(kdev, d)
        kvals.append([float(c), float(np.real(k)), float(np.real(kt))])
    return HarnessReport(T.to_json(), float(eig_dist), n_e, mdev, float(kdev),
                         {"z": [[float(z.real), float(z.imag)] for z in zs], "window": list(window or []),
                          "c_grid": [float(c) for c in np.atleast_1d(c_grid)], "zeta": [zeta.real, zeta.imag]},
                         {"kernel": kvals, "right": right.to_json(), "right_tilde": right_t.to_json()},
                         time.perf_counter() - t0)


def radial_form_defect(expr: DiracExpression, xs=(1e-6, 1e-5, 1e-4)):
    """How far ``Q`` near 0 is from the radial pattern ``[[q, k/x + p], [k/x + p, -q]]``, ``k >= 0``.

    Returns ``(defect, kappa_eff)``: ``defect`` is ``max |x (Q11 + Q22)/2|`` plus the
    singular part of the diagonal ``max |x (Q11 - Q22)/2|``; ``kappa_eff = x Q12`` at the
    smallest point.  A rotation by a constant angle ``phi`` produces a defect of
    ``kappa |sin 2 phi|`` and ``kappa_eff = kappa cos 2 phi``.
    """
    xs = np.asarray(xs, dtype=float)
    Q, _ = expr.coefficients(xs)
    Q = np.real(Q)
    diag = np.abs(xs * 0.5 * (Q[:, 0, 0] - Q[:, 1, 1])) + np.abs(xs * 0.5 * (Q[:, 0, 0] + Q[:, 1, 1]))
    return float(diag.max()), float(xs[0] * Q[0, 0, 1])


def rigidity_check(spec_a: RadialSpec, spec_b: RadialSpec, b: float = 1.0, window=(-15.0, 15.0),
                   right_angle: float = 0.0, settings: PropagationSettings | None = None):
    """Smoke test on two radial problems on ``(0, b)`` with the same right condition.

    Reports the distance of the spectra and the first-moment discrepancy of the
    spectral measures on ``window``; equal data must give zero, perturbed data a
    positive discrepancy.
    """
    from .weyl import WeylFunction, set_distance, spectral_measure

    st = settings or PropagationSettings()
    right = BoundaryCondition.from_angle(right_angle, "right")
    out = {}
    for key, spec in (("a", spec_a), ("b", spec_b)):
        sp = RadialSpec(spec.kappa, spec.q_sc, spec.q_am, b)
        W = WeylFunction(left_frame(make_radial(sp), None, st), right, settings=st)
        mu = spectral_measure(W, window, n_grid=3, estimate_m_c=False)
        out[key] = mu
    la, ma = out["a"].atoms[:, 0], out["a"].atoms[:, 1]
    lb, mb = out["b"].atoms[:, 0], out["b"].atoms[:, 1]
    m1 = abs(float(np.sum(la * ma) - np.sum(lb * mb)))
    return {"first_moment_discrepancy": m1, "spectral_distance": set_distance(la, lb),
            "n_atoms": [len(la), len(lb)], "mass_discrepancy": abs(float(ma.sum() - mb.sum()))}


# ---------------------------------------------------------------------------
# JSON


def transform_from_json(expr: DiracExpression, spec: dict) -> LiouvilleTransform:
    """Transform spec ``{"eta": expression | "cumulative:detR" | "id", "gamma": 2x2 | named}``.

    Named Gamma: ``"rotation:<phi expression>"``, ``"weight-sqrt"``, ``"kill-potential"``,
    ``"trace"``.  ``"shift"`` adds a constant to eta when eta is the identity.
    """
    iv = expr.interval
    eta = spec.get("eta", "id")
    gamma = spec.get("gamma", "identity")
    shift = float(spec.get("shift", 0.0))
    if isinstance(gamma, str):
        if gamma == "weight-sqrt":
            return normalize_weight(expr, validate=False)[1]
        if gamma == "kill-potential":
            return kill_potential(expr, validate=False)[1]
        if gamma == "trace":
            return normalize_trace(expr, validate=False)[1]
        if gamma.startswith("rotation:"):
            if eta not in ("id", "x"):
                raise ConfigurationError("rotation gauges use eta = id (plus an optional shift)")
            return LiouvilleTransform.rotation(iv, gamma.split(":", 1)[1], eta0=shift)
        if gamma != "identity":
            raise ConfigurationError(f"unknown named gamma {gamma!r}")
        gamma = None
    if eta == "cumulative:detR":
        if gamma is not None:
            raise ConfigurationError("cumulative eta is combined with gamma 'weight-sqrt' or 'identity'")
        return normalize_det(expr, validate=False)[1]
    if eta in ("id", "x"):
        if gamma is None:
            return LiouvilleTransform.shift(iv, shift) if shift else LiouvilleTransform.identity(iv)
        G = np.array([[float(parse_coefficient(str(e))(0.0)) if parse_coefficient(str(e)).is_constant
                       else math.nan for e in row] for row in gamma])
        if np.all(np.isfinite(G)):
            return LiouvilleTransform.constant(iv, G, 1.0, shift)
        return LiouvilleTransform.from_expressions(iv, f"x+{shift!r}", gamma)
    return LiouvilleTransform.from_expressions(iv, eta, gamma)
