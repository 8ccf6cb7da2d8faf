"""Adaptive piecewise Chebyshev tables for smooth functions on a compact interval."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C


def _cheb_nodes(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.cos(np.pi * (k + 0.5) / n)


def _values_to_coeffs(vals: np.ndarray) -> np.ndarray:
    # vals: (panels, n, ...) at first-kind nodes -> coefficients (panels, n, ...)
    n = vals.shape[1]
    k = np.arange(n)
    T = np.cos(np.pi * np.outer(np.arange(n), k + 0.5) / n) * (2.0 / n)
    T[0] *= 0.5
    return np.einsum("jk,pk...->pj...", T, vals)


class PiecewiseCheb:
    """Chebyshev series on panels ``[breaks[i], breaks[i+1]]``; values may be array-valued."""

    def __init__(self, breaks, coeffs):
        self.breaks = np.asarray(breaks, dtype=float)
        self.coeffs = np.asarray(coeffs)
        self.lo = float(self.breaks[0])
        self.hi = float(self.breaks[-1])

    @classmethod
    def build(cls, sampler, lo: float, hi: float, deg: int = 24, tol: float = 1e-14,
              n_init: int = 8, max_panels: int = 8192):
        """Fit ``sampler`` (vectorised ``x -> values`` with leading axis over ``x``)."""
        n = deg + 1
        t = _cheb_nodes(n)
        breaks = list(np.linspace(lo, hi, n_init + 1))
        done: dict[tuple[float, float], np.ndarray] = {}
        pending = [(breaks[i], breaks[i + 1]) for i in range(n_init)]
        scale = 0.0
        while pending:
            if len(done) + len(pending) > max_panels:
                raise RuntimeError("piecewise Chebyshev fit did not resolve the function")
            xs = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * t for a, b in pending])
            vals = np.asarray(sampler(xs))
            vals = vals.reshape((len(pending), n) + vals.shape[1:])
            scale = max(scale, float(np.max(np.abs(vals))))
            coeffs = _values_to_coeffs(vals)
            nxt = []
            for (a, b), c in zip(pending, coeffs):
                tail = float(np.max(np.abs(c[-3:])))
                if tail <= tol * max(scale, 1e-300) or (b - a) < 1e-12 * max(1.0, abs(a)):
                    done[(a, b)] = c
                else:
                    m = 0.5 * (a + b)
                    nxt += [(a, m), (m, b)]
            pending = nxt
        keys = sorted(done)
        brk = [keys[0][0]] + [k[1] for k in keys]
        return cls(brk, np.stack([done[k] for k in keys]))

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.breaks) - 2)
        a = self.breaks[idx]
        b = self.breaks[idx + 1]
        t = (2 * x - a - b) / (b - a)
        return idx, t

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx, t = self._locate(x)
        c = self.coeffs[idx]  # (..., n, extra)
        extra = c.ndim - t.ndim - 1
        tt = t.reshape(t.shape + (1,) * extra)
        n = c.shape[t.ndim]
        b1 = np.zeros(c.shape[:t.ndim] + c.shape[t.ndim + 1:], dtype=c.dtype)
        b2 = np.zeros_like(b1)
        for j in range(n - 1, 0, -1):
            b1, b2 = 2 * tt * b1 - b2 + np.take(c, j, axis=t.ndim), b1
        return tt * b1 - b2 + np.take(c, 0, axis=t.ndim)

    def derivative(self) -> "PiecewiseCheb":
        width = np.diff(self.breaks)
        d = C.chebder(self.coeffs, axis=1)
        d = d * (2.0 / width).reshape((-1,) + (1,) * (d.ndim - 1))
        pad = np.zeros((d.shape[0], 1) + d.shape[2:], dtype=d.dtype)
        return PiecewiseCheb(self.breaks, np.concatenate([d, pad], axis=1))

    def antiderivative(self, value_at_lo=0.0) -> "PiecewiseCheb":
        width = np.diff(self.breaks)
        ci = C.chebint(self.coeffs, lbnd=-1, axis=1)
        ci = ci * (0.5 * width).reshape((-1,) + (1,) * (ci.ndim - 1))
        ends = ci.sum(axis=1)  # T_k(1) = 1
        offsets = np.concatenate([np.zeros_like(ends[:1]), np.cumsum(ends, axis=0)[:-1]]) + value_at_lo
        ci = ci.copy()
        ci[:, 0] += offsets
        return PiecewiseCheb(self.breaks, ci)

    def inverse(self, y, deriv: "PiecewiseCheb | None" = None, iters: int = 60):
        """Inverse of a strictly increasing scalar table (safeguarded Newton)."""
        y = np.asarray(y, dtype=float)
        deriv = self.derivative() if deriv is None else deriv
        ends = self(self.breaks)
        idx = np.clip(np.searchsorted(ends, y, side="right") - 1, 0, len(self.breaks) - 2)
        lo = self.breaks[idx].copy()
        hi = self.breaks[idx + 1].copy()
        flo = ends[idx]
        fhi = ends[idx + 1]
        x = lo + (hi - lo) * np.clip((y - flo) / np.where(fhi > flo, fhi - flo, 1.0), 0, 1)
        for _ in range(iters):
            f = self(x) - y
            lo = np.where(f < 0, x, lo)
            hi = np.where(f > 0, x, hi)
            d = deriv(x)
            step = f / np.where(d > 0, d, np.inf)
            xn = x - step
            bad = ~((xn > lo) & (xn < hi))
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            if np.all(np.abs(xn - x) <= 4e-16 * np.maximum(1.0, np.abs(x))):
                x = xn
                break
            x = xn
        return x
