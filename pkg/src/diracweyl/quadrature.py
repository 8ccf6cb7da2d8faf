"""Quadrature of bilinear expressions in frame solutions.

Everything here integrates products ``F(zeta_i, x)^* R(x) G(z_j, x)`` of frame
columns over ``(lo, hi]``.  Panels are Gauss-Legendre; their number is sized by
the local wavenumber ``|z| * max eig R`` and then doubled until two successive
estimates agree.  When the frame is singular at the left endpoint the panels
are graded geometrically toward it.
"""

from __future__ import annotations

import math

import numpy as np

from .boundary import Frame, kernel_nodes

__all__ = ["QuadratureError", "gram", "norming_constants", "transform", "pairing_nodes"]

_ORDER = 24
_MAX_ELEMS = 1 << 21  # nodes x spectral parameters per chunk


class QuadratureError(RuntimeError):
    pass


def _rmax(frame: Frame, lo: float, hi: float) -> float:
    xs = np.linspace(lo, hi, 34)[1:-1]
    _, R = frame.expr.coefficients(xs)
    return float(np.max(np.linalg.eigvalsh(R)))


def pairing_nodes(frame: Frame, zmax: float, lo: float, hi: float, level: int, rmax: float | None = None):
    span = hi - lo
    rmax = _rmax(frame, lo, hi) if rmax is None else rmax
    n0 = max(2, int(math.ceil((zmax * rmax + 1.0) * span / (0.5 * _ORDER))))
    levels = int(math.ceil(54 / (1 + frame.left_power))) + 1
    return kernel_nodes(lo, hi, frame.singular_left and lo <= frame.expr.interval.a, n0 * 2 ** level,
                        order=_ORDER, grade_levels=levels)


def _frame_at(frame: Frame, z, xs):
    F, _ = frame.values(z, xs, phi_only=True)
    return F  # (nx, nz, 2, 2); Theta column may be NaN


def gram(frame: Frame, zetas, zs, c: float, lo: float | None = None, column: int = 1,
         rtol: float = 1e-12, max_level: int = 6):
    """Matrix ``K[i, j] = int_lo^c Phi(zeta_i, x)^* R(x) Phi(z_j, x) dx`` (lo defaults to a)."""
    zetas = np.atleast_1d(np.asarray(zetas, dtype=complex))
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    lo = frame.expr.interval.a if lo is None else lo
    allz = np.concatenate([zetas, zs])
    zmax = float(np.max(np.abs(allz))) if len(allz) else 0.0
    prev = None
    for level in range(max_level + 1):
        x, w = pairing_nodes(frame, zmax, lo, c, level)
        F = _frame_at(frame, allz, x)[..., column]  # (nx, nz, 2)
        _, R = frame.expr.coefficients(x)
        A = F[:, : len(zetas)].conj()
        B = np.einsum("xij,xzj->xzi", R, F[:, len(zetas):])
        val = np.einsum("x,xai,xbi->ab", w, A, B)
        if prev is not None:
            scale = max(float(np.max(np.abs(val))), 1e-300)
            if float(np.max(np.abs(val - prev))) <= rtol * scale:
                return val
        prev = val
    raise QuadratureError(f"kernel quadrature on ({lo}, {c}] did not converge")


def norming_constants(frame: Frame, lams, hi: float, rtol: float = 1e-12, max_level: int = 6):
    """``||Phi(lam, .)||^2_R`` on ``(a, hi)`` for real ``lam`` (batched, chunked by |lam|)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    out = np.empty(len(lams))
    for idx in _chunks(frame, lams, frame.expr.interval.a, hi):
        out[idx] = _diag_integral(frame, lams[idx] + 0j, frame.expr.interval.a, hi, rtol, max_level)
    return out


def _diag_integral(frame, z, lo, hi, rtol, max_level):
    zmax = float(np.max(np.abs(z)))
    prev = None
    for level in range(max_level + 1):
        x, w = pairing_nodes(frame, zmax, lo, hi, level)
        F = _frame_at(frame, z, x)[..., 1]
        _, R = frame.expr.coefficients(x)
        val = np.real(np.einsum("x,xzi,xij,xzj->z", w, F.conj(), R, F))
        if prev is not None and np.all(np.abs(val - prev) <= rtol * np.maximum(np.abs(val), 1e-300)):
            return val
        prev = val
    raise QuadratureError("norming-constant quadrature did not converge")


def _chunks(frame, zs, lo, hi):
    """Index chunks of ``zs`` sorted by magnitude with bounded node x z work."""
    order = np.argsort(np.abs(zs))
    rmax = _rmax(frame, lo, hi)
    span = hi - lo
    out = []
    i = 0
    n = len(zs)
    while i < n:
        j = i + 1
        while j < n:
            nodes = 2 * _ORDER * max(2.0, (abs(zs[order[j]]) * rmax + 1.0) * span / (0.5 * _ORDER))
            if nodes * (j - i + 1) > _MAX_ELEMS:
                break
            j += 1
        out.append(order[i:j])
        i = j
    return out


def transform(frame: Frame, f, zs, lo: float, hi: float, rtol: float = 1e-11, max_level: int = 6):
    """``int_lo^hi f(x)^* R(x) Phi(z, x) dx`` for each z (f vectorised: x -> (nx, 2)).

    ``f`` is treated as smooth on ``[lo, hi]``; split piecewise functions at their
    breakpoints and add the pieces.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    out = np.empty(len(zs), dtype=complex)
    for idx in _chunks(frame, zs, lo, hi):
        z = zs[idx]
        zmax = float(np.max(np.abs(z)))
        prev = None
        for level in range(max_level + 1):
            x, w = pairing_nodes(frame, zmax, lo, hi, level)
            F = _frame_at(frame, z, x)[..., 1]
            _, R = frame.expr.coefficients(x)
            fx = np.asarray(f(x), dtype=complex)
            val = np.einsum("x,xi,xij,xzj->z", w, fx.conj(), R, F)
            if prev is not None:
                scale = max(float(np.max(np.abs(val))), 1e-300)
                if float(np.max(np.abs(val - prev))) <= rtol * max(scale, 1.0):
                    break
            prev = val
        else:
            raise QuadratureError("transform quadrature did not converge")
        out[idx] = val
    return out
