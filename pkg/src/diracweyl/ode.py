"""Propagation of solutions of ``(tau - z) u = 0``.

The system ``f' = -J (z R(x) - Q(x)) f`` is integrated with an adaptive
sixth-order Magnus scheme (three Gauss nodes per step, error from step
doubling).  The generator is trace free for symmetric ``Q`` and ``R``, so every
step is an exact ``SL(2, C)`` map: transfer matrices have unit determinant to
rounding.  Constant coefficients are integrated exactly, which keeps long
half-line truncations cheap.

All routines are vectorised over a batch of spectral parameters ``z`` that share
one step sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coefficients import J, DiracExpression

__all__ = [
    "PropagationSettings",
    "SolutionState",
    "IntegrationError",
    "evolve",
    "propagate",
    "transfer_matrix",
    "wronskian",
    "lagrange_residual",
    "gauss_panels",
]

_SQ15 = math.sqrt(15.0)
_GAUSS3 = np.array([0.5 - _SQ15 / 10, 0.5, 0.5 + _SQ15 / 10])
_GROWTH_CAP = 40.0  # max |Re s| of one step exponential
_RENORM = 1e64


class IntegrationError(RuntimeError):
    def __init__(self, message: str, x: float):
        super().__init__(f"{message} at x={x!r}")
        self.x = x


@dataclass(frozen=True)
class PropagationSettings:
    rtol: float = 1e-12
    atol: float = 1e-300
    max_step: float = math.inf
    first_step: float | None = None
    approach_ratio: float = 0.5
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.approach_ratio < 1:
            raise ValueError("approach_ratio must lie in (0, 1)")

    def with_(self, **kw) -> "PropagationSettings":
        return replace(self, **kw)

    def to_json(self):
        return {k: (v if v is None or math.isfinite(v) else "inf") for k, v in self.__dict__.items()}


DEFAULT_SETTINGS = PropagationSettings()


@dataclass(frozen=True)
class SolutionState:
    x: float
    f: np.ndarray
    dfdz: np.ndarray | None = None


def wronskian(f, g):
    """Plain bilinear Wronskian ``f1 g2 - f2 g1`` (no conjugation), over the last axis."""
    f = np.asarray(f)
    g = np.asarray(g)
    return f[..., 0] * g[..., 1] - f[..., 1] * g[..., 0]


# Traceless 2x2 matrices [[a, b], [c, -a]] are carried as arrays whose leading
# axis holds (a, b, c); every Magnus term and commutator stays in that class.


def _tl_comm(x, y):
    xa, xb, xc = x
    ya, yb, yc = y
    return np.stack([xb * yc - yb * xc, 2 * (xa * yb - xb * ya), 2 * (xc * ya - xa * yc)])


def _tl_exp(om):
    """exp of a traceless triple -> (e00, e01, e10, e11, s)."""
    a, b, c = om
    s2 = a * a + b * c
    s = np.sqrt(s2)
    small = np.abs(s) < 1e-4
    with np.errstate(all="ignore"):
        sinhc = np.where(small, 1 + s2 / 6 + s2 * s2 / 120, np.sinh(s) / np.where(small, 1, s))
    ch = np.cosh(s)
    return ch + sinhc * a, sinhc * b, sinhc * c, ch - sinhc * a, s


def _magnus6(A1, A2, A3, h):
    a1 = h * A2
    a2 = (_SQ15 * h / 3) * (A3 - A1)
    a3 = (10 * h / 3) * (A3 - 2 * A2 + A1)
    c1 = _tl_comm(a1, a2)
    c2 = _tl_comm(a1, 2 * a3 + c1) / -60
    return a1 + a3 / 12 + _tl_comm(-20 * a1 - a3 + c1, a2 + c2) / 240


def _apply(E, F0, F1):
    e00, e01, e10, e11 = E[:4]
    return e00 * F0 + e01 * F1, e10 * F0 + e11 * F1


def _generators(expr: DiracExpression, xs):
    """Traceless components of K = -J R (multiplies z) and L = J Q at ``xs``."""
    Q, R = expr.coefficients(xs)
    K = (R[..., 1, 0], R[..., 1, 1], -R[..., 0, 0])
    L = (-Q[..., 1, 0], -Q[..., 1, 1], Q[..., 0, 0])
    return K, L


def evolve(expr: DiracExpression, z, x0: float, F0, xs, settings: PropagationSettings | None = None,
           renormalize: bool = True):
    """Integrate from ``x0`` through the monotone sequence ``xs``.

    Parameters
    ----------
    z : complex or array (nz,)
    F0 : array broadcastable to (nz, 2, m)
        Initial columns.
    xs : array (nx,)
        Output points, all on one side of ``x0`` and monotone away from it.

    Returns
    -------
    F : array (nx, nz, 2, m)
        Solution values; with ``renormalize`` the true value is ``F * exp(logscale)``.
    logscale : array (nx, nz)
    """
    st = settings or DEFAULT_SETTINGS
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    nz = z.shape[0]
    F = np.asarray(F0, dtype=complex)
    if F.ndim == 1:
        F = F[:, None]
    F = np.broadcast_to(F, (nz,) + F.shape[-2:])
    m = F.shape[-1]
    F0c = np.array(F[:, 0, :])
    F1c = np.array(F[:, 1, :])
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty((len(xs), nz, 2, m), dtype=complex)
    logs = np.zeros((len(xs), nz))
    log_scale = np.zeros(nz)
    if len(xs) == 0:
        return out, logs
    direction = 1.0 if xs[-1] >= x0 else -1.0
    if np.any(direction * np.diff(np.concatenate([[x0], xs])) < 0):
        raise ValueError("output points must be monotone away from x0")

    zc = z[None, :]
    zr = z[None, None, :]
    hfac = np.array([1.0, 0.5, 0.5])[:, None, None]
    x = float(x0)
    span = abs(xs[-1] - x0)
    if st.first_step is not None:
        h = st.first_step
    else:
        K, L = _generators(expr, np.array([x0 + direction * 1e-3 * max(span, 1e-300)]))
        nrm = max(np.max(np.abs(zc * K[i][:, None] + L[i][:, None])) for i in range(3))
        h = min(span, 0.5 / max(nrm, 1e-12)) if span > 0 else 0.0
    h = min(h, st.max_step)
    nodes = np.concatenate([_GAUSS3, 0.5 * _GAUSS3, 0.5 + 0.5 * _GAUSS3])
    steps = 0
    for j, target in enumerate(xs):
        while direction * (target - x) > 0:
            rem = abs(target - x)
            hs = min(h, st.max_step)
            last = hs >= rem * (1 - 1e-12)
            if last:
                hs = rem
            dx = direction * hs
            K, L = _generators(expr, x + dx * nodes)
            # A[comp, group, node, iz, 0]; groups: full step, first half, second half
            A = (zr * np.stack(K)[:, :, None] + np.stack(L)[:, :, None]).reshape(3, 3, 3, nz)[..., None]
            om = _magnus6(A[:, :, 0], A[:, :, 1], A[:, :, 2], hfac * dx)
            E = _tl_exp(om)
            if np.max(np.abs(E[4][0].real)) > _GROWTH_CAP:
                h = hs * 0.5
                continue
            E_full = tuple(e[0] for e in E)
            E1 = tuple(e[1] for e in E)
            E2 = tuple(e[2] for e in E)
            G0, G1 = _apply(E2, *_apply(E1, F0c, F1c))
            H0, H1 = _apply(E_full, F0c, F1c)
            scale = np.maximum(np.abs(G0).max(axis=1), np.abs(G1).max(axis=1))
            diff = np.maximum(np.abs(G0 - H0).max(axis=1), np.abs(G1 - H1).max(axis=1))
            err = float(np.max(diff / (st.rtol * scale + st.atol)))
            if not np.isfinite(err):
                err = math.inf
            if err <= 1.0:
                x = float(target) if last else x + dx
                F0c, F1c = G0, G1
                if renormalize:
                    over = scale > _RENORM
                    if np.any(over):
                        F0c[over] /= scale[over][:, None]
                        F1c[over] /= scale[over][:, None]
                        log_scale[over] += np.log(scale[over])
                fac = 4.0 if err == 0 else min(4.0, max(0.2, 0.9 * err ** (-1 / 7)))
                h = hs * fac
            else:
                h = hs * max(0.1, 0.9 * err ** (-1 / 7))
            steps += 1
            if h < 4e-16 * abs(x) or h < 1e-300 or steps > st.max_steps:
                raise IntegrationError("step size underflow (coefficients not integrable?)", x)
        out[j, :, 0] = F0c
        out[j, :, 1] = F1c
        logs[j] = log_scale
    return out, logs


def propagate(expr: DiracExpression, z, state: SolutionState, to_x: float,
              settings: PropagationSettings | None = None) -> SolutionState:
    """Solve ``(tau - z) u = 0`` from ``state`` to ``to_x`` (either direction)."""
    scalar = np.ndim(z) == 0
    F, logs = evolve(expr, z, state.x, np.asarray(state.f, dtype=complex)[..., :, None], [to_x],
                     settings, renormalize=False)
    f = F[0, ..., 0]
    return SolutionState(float(to_x), f[0] if scalar else f)


def transfer_matrix(expr: DiracExpression, z, x0: float, x1: float,
                    settings: PropagationSettings | None = None) -> np.ndarray:
    """Matrix mapping ``f(x0)`` to ``f(x1)``; shape (2, 2) or (nz, 2, 2)."""
    F, _ = evolve(expr, z, x0, np.eye(2, dtype=complex), [x1], settings, renormalize=False)
    return F[0, 0] if np.ndim(z) == 0 else F[0]


def gauss_panels(lo: float, hi: float, n_panels: int, order: int = 16):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None]).ravel()
    wts = (half[:, None] * w[None]).ravel()
    return x, wts


def lagrange_residual(expr: DiracExpression, zeta: complex, z: complex, f0, g0, alpha: float,
                      beta: float, settings: PropagationSettings | None = None,
                      rtol: float = 1e-13, max_panels: int = 4096) -> float:
    """``|W_beta - W_alpha - (zeta* - z) int f^T R g|`` for ``f`` at ``zeta*`` and ``g`` at ``z``.

    ``f0`` and ``g0`` are the values of ``f`` and ``g`` at ``alpha``.
    """
    zs = np.array([np.conj(zeta), z], dtype=complex)
    F0 = np.stack([np.asarray(f0, dtype=complex), np.asarray(g0, dtype=complex)])[:, :, None]
    (Fb,), _ = evolve(expr, zs, alpha, F0, [beta], settings, renormalize=False)
    fb, gb = Fb[0, :, 0], Fb[1, :, 0]
    lhs = wronskian(fb, gb) - wronskian(F0[0, :, 0], F0[1, :, 0])
    lo, hi = min(alpha, beta), max(alpha, beta)
    sgn = 1.0 if beta >= alpha else -1.0
    prev = None
    n = 4
    while True:
        x, w = gauss_panels(lo, hi, n)
        order = np.argsort(x) if sgn > 0 else np.argsort(-x)
        xo = x[order]
        Fx, _ = evolve(expr, zs, alpha, F0, xo, settings, renormalize=False)
        _, R = expr.coefficients(xo)
        f = Fx[:, 0, :, 0]
        g = Fx[:, 1, :, 0]
        integrand = np.einsum("ni,nij,nj->n", f, R, g)
        val = sgn * np.sum(w[order] * integrand)
        if prev is not None and abs(val - prev) <= rtol * max(1.0, abs(val)):
            break
        if n >= max_panels:
            break
        prev = val
        n *= 2
    return float(abs(lhs - (np.conj(zeta) - z) * val))
