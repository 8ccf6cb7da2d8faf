"""de Branges functions, reproducing kernels, spectral transform and Parseval checks.

``E(z, c)`` is built from ``Phi(z, c)`` as ``Phi1 - i Phi2`` ("standard") or
``Phi1 + i Phi2`` ("conjugate").  With the plain bilinear Wronskian only one of
them satisfies the structure identity with a positive kernel; the convention
is therefore chosen at construction by requiring ``|E(i)| > |E(-i)|``, which
is exactly ``K(i, i, c) > 0`` in the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import Frame
from .ode import wronskian
from .quadrature import gram, transform
from .weyl import SpectralMeasure

__all__ = [
    "DeBrangesFunction",
    "e_function",
    "KernelValue",
    "kernel_integral",
    "structure_kernel",
    "rep_identity_residual",
    "nesting_check",
    "transform_hat",
    "parseval_residual",
    "cartwright_diagnostics",
    "gram_matrix",
]


class DeBrangesFunction:
    """``z -> E(z, c)`` for the Phi column of ``frame`` at the point ``c``."""

    def __init__(self, frame: Frame, c: float, convention: str = "auto"):
        self.frame = frame
        self.c = float(c)
        if convention == "auto":
            v = self._phi(np.array([1j, -1j]))
            std = v[:, 0] - 1j * v[:, 1]
            conj = v[:, 0] + 1j * v[:, 1]
            if abs(std[0]) > abs(std[1]):
                convention = "standard"
            elif abs(conj[0]) > abs(conj[1]):
                convention = "conjugate"
            else:
                raise ArithmeticError("neither sign convention gives a Hermite-Biehler E")
            self.auto_selected = True
        else:
            self.auto_selected = False
        if convention not in ("standard", "conjugate"):
            raise ValueError("convention must be 'standard', 'conjugate' or 'auto'")
        self.convention = convention
        self._sign = -1.0 if convention == "standard" else 1.0

    def _phi(self, z, renormalize=False):
        F, lg = self.frame.values(z, [self.c], renormalize=renormalize)
        if renormalize:
            return F[0, :, :, 1], lg[0]
        return F[0, :, :, 1]

    def __call__(self, z):
        scalar = np.ndim(z) == 0
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        v = self._phi(z)
        E = v[:, 0] + self._sign * 1j * v[:, 1]
        return E[0] if scalar else E

    def sharp(self, z):
        """``E#(z) = E(z*)*``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        v = self._phi(z)
        return v[:, 0] - self._sign * 1j * v[:, 1]

    def log_abs(self, z):
        """``log |E(z, c)|`` with overflow-safe log-scale tracking."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        v, lg = self._phi(z, renormalize=True)
        E = v[:, 0] + self._sign * 1j * v[:, 1]
        with np.errstate(divide="ignore"):
            return np.log(np.abs(E)) + lg

    def derivative(self, z, radius: float = 0.25, n: int = 32):
        """``(E'(z), E#'(z))`` by a trapezoid Cauchy integral."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        th = 2 * np.pi * np.arange(n) / n
        w = (z[:, None] + radius * np.exp(1j * th)[None, :]).ravel()
        v = self._phi(w).reshape(len(z), n, 2)
        k = (np.exp(-1j * th) / radius)[None, :]
        dE = np.mean((v[..., 0] + self._sign * 1j * v[..., 1]) * k, axis=1)
        dEs = np.mean((v[..., 0] - self._sign * 1j * v[..., 1]) * k, axis=1)
        return dE, dEs

    def hermite_biehler_defect(self, zs) -> float:
        """min over samples of ``|E(z)| - |E(z*)|`` (positive when Hermite-Biehler holds)."""
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        zs = np.where(zs.imag < 0, zs.conj(), zs)
        E = self(np.concatenate([zs, zs.conj()]))
        n = len(zs)
        return float(np.min(np.abs(E[:n]) - np.abs(E[n:])))

    def to_json(self):
        return {"c": self.c, "convention": self.convention, "auto_selected": self.auto_selected,
                "formula": "Phi1 - i Phi2" if self.convention == "standard" else "Phi1 + i Phi2"}


def e_function(frame: Frame, c: float, z=None, convention: str = "auto"):
    E = DeBrangesFunction(frame, c, convention)
    return E if z is None else E(z)


@dataclass
class KernelValue:
    zeta: complex
    z: complex
    c: float
    value: complex
    method: str  # integral | structure-identity

    def to_json(self):
        return {"zeta": [self.zeta.real, self.zeta.imag], "z": [self.z.real, self.z.imag], "c": self.c,
                "value": [self.value.real, self.value.imag], "method": self.method}


def kernel_integral(frame: Frame, zeta, z, c: float, rtol: float = 1e-12) -> KernelValue:
    """``K(zeta, z, c) = int_a^c Phi(zeta, x)^* R(x) Phi(z, x) dx`` by quadrature."""
    K = gram(frame, [zeta], [z], c, rtol=rtol)[0, 0]
    return KernelValue(complex(zeta), complex(z), float(c), complex(K), "integral")


def gram_matrix(frame: Frame, zetas, c: float, rtol: float = 1e-12) -> np.ndarray:
    return gram(frame, zetas, zetas, c, rtol=rtol)


def structure_kernel(E: DeBrangesFunction, zeta, z, coincidence: float = 1e-6) -> KernelValue:
    """Kernel from E: ``[E(z)E(zeta)* - E(zeta*)E(z*)*] / (2i (zeta* - z))``.

    For ``|zeta* - z| < coincidence`` the derivative form
    ``[E(z) E#'(z) - E'(z) E#(z)] / (2i)`` is used.
    """
    zeta = complex(zeta)
    z = complex(z)
    w = zeta.conjugate()
    if abs(w - z) < coincidence:
        Ez = E(z)
        Es = E.sharp(z)[0]
        dE, dEs = E.derivative(z)
        val = (Ez * dEs[0] - dE[0] * Es) / 2j
        return KernelValue(zeta, z, E.c, complex(val), "structure-identity")
    vals = E(np.array([z, zeta, w, z.conjugate()]))
    num = vals[0] * np.conj(vals[1]) - vals[2] * np.conj(vals[3])
    return KernelValue(zeta, z, E.c, complex(num / (2j * (w - z))), "structure-identity")


def rep_identity_residual(E: DeBrangesFunction, K: KernelValue | complex, zeta=None, z=None, c=None,
                          relative: bool = False) -> float:
    """``|structure-identity quotient - K(zeta, z, c)|`` (optionally relative to ``|K|``)."""
    if isinstance(K, KernelValue):
        zeta, z, c, val = K.zeta, K.z, K.c, K.value
    else:
        val = complex(K)
    if c is not None and abs(c - E.c) > 1e-15 * max(1.0, abs(c)):
        raise ValueError("kernel and E were built at different points c")
    S = structure_kernel(E, zeta, z).value
    r = abs(S - val)
    return r / abs(val) if relative and val != 0 else r


def nesting_check(frame: Frame, zeta, c_grid, vanish_tol: float = 1e-6, rtol: float = 1e-12):
    """``K(zeta, zeta, c)`` along ``c_grid``: strictly increasing, continuous, vanishing at a."""
    c_grid = np.asarray(c_grid, dtype=float)
    if np.any(np.diff(c_grid) <= 0):
        raise ValueError("c_grid must be strictly increasing")
    a = frame.expr.interval.a
    # increments between consecutive grid points (and from a to the first point)
    edges = np.concatenate([[a], c_grid])
    incs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        incs.append(np.real(gram(frame, [zeta], [zeta], hi, lo=lo, rtol=rtol)[0, 0]))
    incs = np.array(incs)
    K = np.cumsum(incs)
    increasing = bool(np.all(np.diff(K) > 0))
    # continuity proxy: each increment bounded by the sup of the integrand times the step
    jumps = incs[1:] / np.maximum(np.diff(c_grid), 1e-300)
    rep = {
        "zeta": [float(np.real(zeta)), float(np.imag(zeta))],
        "c_grid": c_grid.tolist(),
        "K": K.tolist(),
        "strictly_increasing": increasing,
        "first_violation": None if increasing else int(np.argmin(np.diff(K) > 0)),
        "K_at_smallest_c": float(K[0]),
        "vanishes": bool(K[0] < vanish_tol),
        "max_difference_quotient": float(np.max(jumps)) if len(jumps) else 0.0,
    }
    rep["ok"] = rep["strictly_increasing"] and rep["vanishes"]
    return rep


def transform_hat(f, frame: Frame, zs, support, rtol: float = 1e-11):
    """``f^(z) = int f(x)^* R(x) Phi(z, x) dx`` with ``f`` supported on ``support``.

    ``support`` is ``(lo, hi)`` or a list of breakpoints; ``f`` is vectorised
    ``x -> (nx, 2)`` and smooth between breakpoints.
    """
    pts = list(support)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    out = np.zeros(len(zs), dtype=complex)
    for lo, hi in zip(pts[:-1], pts[1:]):
        out += transform(frame, f, zs, lo, hi, rtol=rtol)
    return out


def _f_norm(f, frame: Frame, support, n: int = 64):
    pts = list(support)
    total = 0.0
    t, w = np.polynomial.legendre.leggauss(n)
    for lo, hi in zip(pts[:-1], pts[1:]):
        x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        fx = np.asarray(f(x), dtype=complex)
        _, R = frame.expr.coefficients(x)
        total += float(np.real(np.sum(0.5 * (hi - lo) * w * np.einsum("xi,xij,xj->x", fx.conj(), R, fx))))
    return total


def parseval_residual(f, frame: Frame, measure: SpectralMeasure, support, tail_tol: float = 1e-3,
                      rtol: float = 1e-11):
    """``|int |f^|^2 drho - ||f||^2| / ||f||^2`` with a window-tail estimate.

    Discrete parts contribute ``sum rho_n |f^(lambda_n)|^2``; an a.c. density is
    integrated by the trapezoid rule on its grid.
    """
    fn2 = _f_norm(f, frame, support)
    total = 0.0
    details = {}
    lam = measure.atoms[:, 0] if len(measure.atoms) else np.zeros(0)
    if len(lam):
        fh = transform_hat(f, frame, lam + 0j, support, rtol)
        contrib = measure.atoms[:, 1] * np.abs(fh) ** 2
        total += float(np.sum(contrib))
        # tail: fit contrib ~ C / lambda^2 on the outer atoms of each side
        tail = 0.0
        order = np.argsort(lam)
        for side in (order[-max(3, len(lam) // 20):], order[: max(3, len(lam) // 20)]):
            l_ = lam[side]
            if len(l_) < 3 or np.any(np.abs(l_) < 1e-12):
                continue
            C = float(np.mean(contrib[side] * l_ ** 2))
            spacing = float(np.mean(np.abs(np.diff(np.sort(l_))))) or 1.0
            tail += C / (np.min(np.abs(l_)) * spacing)
        details["tail_estimate"] = tail
    if len(measure.density) > 1:
        d = measure.density
        fh = transform_hat(f, frame, d[:, 0] + 0j, support, rtol)
        total += float(np.trapezoid(d[:, 1] * np.abs(fh) ** 2, d[:, 0]))
    if fn2 == 0:
        return {"residual": abs(total), "norm_sq": 0.0, "spectral_sum": total, **details,
                "tail_warning": False}
    res = abs(total - fn2) / fn2
    warn = details.get("tail_estimate", 0.0) / fn2 > tail_tol
    return {"residual": res, "norm_sq": fn2, "spectral_sum": total, **details, "tail_warning": bool(warn)}


def cartwright_diagnostics(E: DeBrangesFunction, y_schedule=(50.0, 100.0, 200.0), window=(-50.0, 50.0),
                           n_window: int = 2001):
    """Exponential-type estimate along the imaginary axis and the logarithmic integral.

    The type is fitted from ``log|E(iy)| = tau y + p log y + q`` over the schedule
    (exact for the free and Bessel-type asymptotics); the raw sup of
    ``log|E(iy)|/y`` is reported too.
    """
    ys = np.asarray(y_schedule, dtype=float)
    la = np.concatenate([E.log_abs(1j * ys), E.log_abs(-1j * ys)])
    lu, ld = la[: len(ys)], la[len(ys):]
    lm = np.maximum(lu, ld)
    raw = float(np.max(lm / ys))
    if len(ys) >= 3:
        A = np.column_stack([ys, np.log(ys), np.ones_like(ys)])
        tau = float(np.linalg.lstsq(A, lm, rcond=None)[0][0])
    else:
        tau = raw
    lam = np.linspace(window[0], window[1], n_window)
    lp = np.maximum(E.log_abs(lam + 0j), 0.0)
    integrand = lp / (1 + lam ** 2)
    inside = float(np.trapezoid(integrand, lam))
    # tail bound: log+|E| grows at most like the edge values (real axis, finite type)
    edge = max(float(lp[0]), float(lp[-1]), 1.0)
    L = min(abs(window[0]), abs(window[1]))
    tail = 2 * edge * (math.pi / 2 - math.atan(L)) * (1 + math.log1p(L))
    return {"c": E.c, "y_schedule": ys.tolist(), "type_estimate": tau, "raw_sup_type": raw,
            "log_integral_window": inside, "log_integral_tail_bound": tail,
            "log_integral_finite": bool(np.isfinite(inside)), "convention": E.convention}
