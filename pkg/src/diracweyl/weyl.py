"""Weyl-Titchmarsh-Kodaira functions, eigenvalues, spectral measures, two-spectra reports.

``M(z) = -W(Theta, psi) / W(Phi, psi)`` where ``psi`` obeys the right boundary
data; Wronskians are taken at a matching point ``m``.  The spectral measure is
recovered by Stieltjes inversion with ``Im M(lambda + i eps)`` (positive for
a Herglotz M), extrapolated to ``eps -> 0``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import (BoundaryCondition, ConfigurationError, Frame, left_frame, reference_limit)
from .coefficients import DiracExpression
from .ode import PropagationSettings, evolve, wronskian
from .quadrature import norming_constants

__all__ = [
    "WeylFunction",
    "WeylConvergenceError",
    "EigenvalueHit",
    "weyl_solution",
    "weyl_m",
    "Spectrum",
    "eigenvalues",
    "find_real_roots",
    "SpectralMeasure",
    "spectral_measure",
    "stieltjes_mass",
    "herglotz_check",
    "set_distance",
    "interlacing_violations",
    "Realization",
    "two_spectra_report",
]


class WeylConvergenceError(RuntimeError):
    """Limit-point truncation schedule did not stabilise; carries the M sequence."""

    def __init__(self, message, sequence):
        super().__init__(message)
        self.sequence = sequence


class EigenvalueHit(ArithmeticError):
    """W(Phi, psi) vanishes numerically: z sits on an eigenvalue of the operator."""

    def __init__(self, z):
        super().__init__(f"W(Phi, psi) ~ 0 at z={z!r}: z is numerically an eigenvalue")
        self.z = z


class WeylFunction:
    """``z -> M(z)`` for a frame (left data) and right boundary data.

    ``right`` kinds: ``regular`` (at ``b``), ``truncated`` (regular condition at a
    finite point), ``reference`` (limit-circle condition through a real reference
    solution) and ``limit_point`` (truncation schedule ``x_b = m + seed 2^k`` with a
    Dirichlet-type condition, stopped when successive M agree within ``lp_tol``).
    """

    def __init__(self, frame: Frame, right: BoundaryCondition, matching: float | None = None,
                 settings: PropagationSettings | None = None, lp_tol: float = 1e-9):
        if right.endpoint != "right":
            raise ConfigurationError("expected a right boundary condition")
        self.frame = frame
        self.expr: DiracExpression = frame.expr
        self.right = right
        self.settings = settings or frame.settings
        self.lp_tol = lp_tol
        iv = self.expr.interval
        if right.kind == "regular" and not iv.finite_right:
            raise ConfigurationError("regular right condition needs a finite right endpoint")
        if right.kind == "radial":
            raise ConfigurationError("radial conditions live at the left endpoint")
        if matching is None:
            if right.kind == "regular":
                matching = iv.b
            elif right.kind in ("truncated", "reference"):
                matching = right.anchor
            else:
                matching = iv.interior_point()
        self.m = float(matching)
        self.last_lp_sequence = None

    @property
    def discrete(self) -> bool:
        """True when the right data make the spectrum purely discrete-computable."""
        return self.right.kind in ("regular", "truncated", "reference")

    @property
    def upper(self) -> float:
        """Right end of the integration range for norms."""
        if self.right.kind == "regular":
            return self.expr.interval.b
        if self.right.kind == "truncated":
            return self.right.anchor
        return self.expr.interval.b

    # -- frame and psi -------------------------------------------------------

    def frame_at_matching(self, z):
        if self.right.kind == "regular" and self.m == self.expr.interval.b:
            # evaluate at b itself (the frame evaluation rejects endpoints)
            x0, V0 = self.frame.seed(z)
            F, lg = evolve(self.expr, z, x0, V0, [self.m], self.settings, renormalize=True)
            return F[0], lg[0]
        F, lg = self.frame.values(z, [self.m], renormalize=True)
        return F[0], lg[0]

    def psi(self, z, V=None):
        """Right solution at the matching point, shape (nz, 2) (arbitrary normalisation)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        r = self.right
        if r.kind in ("regular", "truncated"):
            x_r = self.expr.interval.b if r.kind == "regular" else r.anchor
            u = np.asarray(r.u, dtype=complex)
            if x_r == self.m:
                return np.broadcast_to(u, (len(z), 2)).copy()
            F, _ = evolve(self.expr, z, x_r, u[:, None], [self.m], self.settings, renormalize=True)
            return F[0, :, :, 0]
        if r.kind == "reference":
            Vr, _ = reference_limit(self.expr, "right", r.anchor, r.u, r.lam0, z, self.settings)
            psi = Vr[:, :, 1]
            if r.anchor == self.m:
                return psi
            F, _ = evolve(self.expr, z, r.anchor, psi[:, :, None], [self.m], self.settings, renormalize=True)
            return F[0, :, :, 0]
        if V is None:
            V, _ = self.frame_at_matching(z)
        return self._psi_limit_point(z, V)

    def _psi_limit_point(self, z, V):
        if np.any(np.abs(z.imag) == 0):
            raise ConfigurationError("limit-point Weyl solutions need non-real z")
        r = self.right
        u = np.array([0.0, 1.0], dtype=complex)  # f1 = 0 at the truncation point
        nz = len(z)
        T = np.broadcast_to(np.eye(2, dtype=complex), (nz, 2, 2)).copy()
        x = self.m
        done = np.zeros(nz, bool)
        psi_out = np.zeros((nz, 2), dtype=complex)
        last_M = np.full(nz, np.nan + 0j)
        seq = []
        k = 0
        while True:
            xb = self.m + r.seed * 2.0 ** k
            if xb > r.cap:
                bad = np.flatnonzero(~done)
                raise WeylConvergenceError(
                    f"limit-point truncation did not converge up to x_b={r.cap:g} for z={z[bad][:3]}",
                    [list(map(complex, s)) for s in seq[-6:]])
            act = ~done
            Fk, _ = evolve(self.expr, z[act], x, T[act], [xb], self.settings, renormalize=True)
            T[act] = Fk[0]
            x = xb
            a, b, c, d = T[:, 0, 0], T[:, 0, 1], T[:, 1, 0], T[:, 1, 1]
            psi = np.stack([d * u[0] - b * u[1], -c * u[0] + a * u[1]], axis=-1)
            wt = wronskian(V[:, :, 0], psi)
            wp = wronskian(V[:, :, 1], psi)
            M = -wt / wp
            seq.append(np.where(act, M, last_M))
            conv = act & (np.abs(M - last_M) <= self.lp_tol * np.maximum(1.0, np.abs(M)))
            psi_out[act] = psi[act]
            done |= conv
            last_M = np.where(act, M, last_M)
            k += 1
            if np.all(done):
                self.last_lp_sequence = seq
                return psi_out

    # -- M and characteristic functions --------------------------------------

    def __call__(self, z, allow_real: bool = False):
        scalar = np.ndim(z) == 0
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if not allow_real and np.any(z.imag == 0):
            raise ValueError("M is evaluated off the real axis (pass allow_real for discrete problems)")
        V, _ = self.frame_at_matching(z)
        psi = self.psi(z, V)
        wt = wronskian(V[:, :, 0], psi)
        wp = wronskian(V[:, :, 1], psi)
        scale = np.abs(V[:, :, 1]).max(axis=1) * np.abs(psi).max(axis=1)
        hit = np.abs(wp) <= 1e-15 * scale
        if np.any(hit):
            raise EigenvalueHit(complex(z[np.argmax(hit)]))
        M = -wt / wp
        return M[0] if scalar else M

    def characteristic(self, lam, shift: float | None = None):
        """``W(Phi, psi)`` (or ``W(Theta + h Phi, psi)`` with ``shift=h``) at real ``lam``."""
        z = np.atleast_1d(np.asarray(lam, dtype=complex))
        V, _ = self.frame_at_matching(z)
        psi = self.psi(z, V)
        col = V[:, :, 1] if shift is None else V[:, :, 0] + shift * V[:, :, 1]
        return wronskian(col, psi)

    def to_json(self):
        return {"frame": self.frame.to_json(), "right": self.right.to_json(), "matching_point": self.m,
                "lp_tol": self.lp_tol}


def weyl_solution(weyl: WeylFunction, z):
    """Right Weyl solution at the matching point, normalised so that ``psi = Theta + M Phi``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    V, _ = weyl.frame_at_matching(z)
    psi = weyl.psi(z, V)
    M = weyl(z)
    target = V[:, :, 0] + M[:, None] * V[:, :, 1]
    return weyl.m, target


def weyl_m(frame: Frame, right: BoundaryCondition, z, settings=None, matching=None):
    return WeylFunction(frame, right, matching, settings)(z)


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    window: tuple[float, float]
    flagged: list = field(default_factory=list)  # suspected double roots: (lo, hi, min |chi|)
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "residual"])
        for lam, r in zip(self.eigenvalues, self.residuals):
            w.writerow(["%.17g" % lam, "%.17g" % r])
        return buf.getvalue()

    def to_json(self):
        return {"window": list(self.window), "eigenvalues": [float(v) for v in self.eigenvalues],
                "residuals": [float(v) for v in self.residuals], "flagged": self.flagged, **self.meta}


def _batched(fn, lams, chunk):
    out = np.empty(len(lams))
    for i in range(0, len(lams), chunk):
        v = fn(lams[i:i + chunk])
        out[i:i + chunk] = np.real(v)
    return out


def find_real_roots(fn, lo: float, hi: float, per_unit: int = 64, chunk: int = 2048,
                    xtol: float = 4e-15, max_iter: int = 100):
    """Real roots of ``fn`` (vectorised, real-valued on reals) in ``[lo, hi]``.

    Scans at ``per_unit`` points per unit, polishes sign changes with a vectorised
    Illinois iteration and inspects non-sign-changing local minima of ``|fn|``
    on a refined grid; returns ``(roots, residuals, flagged)``.
    """
    if not hi > lo:
        raise ValueError("empty window")
    pad = 2.0 / per_unit
    n = int(math.ceil((hi - lo + 2 * pad) * per_unit)) + 1
    grid = np.linspace(lo - pad, hi + pad, n)
    vals = _batched(fn, grid, chunk)
    scale = float(np.median(np.abs(vals))) or 1.0
    brackets = []
    roots = []
    sgn = np.sign(vals)
    for i in range(n - 1):
        if vals[i] == 0:
            roots.append(grid[i])
        elif sgn[i] * sgn[i + 1] < 0:
            brackets.append((grid[i], grid[i + 1], vals[i], vals[i + 1]))
    flagged = []
    av = np.abs(vals)
    for i in range(1, n - 1):
        if av[i] < av[i - 1] and av[i] < av[i + 1] and sgn[i - 1] == sgn[i] == sgn[i + 1] and sgn[i] != 0:
            # two close roots can hide between grid points: look closer
            fine = np.linspace(grid[i - 1], grid[i + 1], 65)
            fv = _batched(fn, fine, chunk)
            fs = np.sign(fv)
            found = False
            for j in range(len(fine) - 1):
                if fs[j] * fs[j + 1] < 0:
                    brackets.append((fine[j], fine[j + 1], fv[j], fv[j + 1]))
                    found = True
                elif fv[j] == 0:
                    roots.append(fine[j])
                    found = True
            if not found:
                m = float(np.min(np.abs(fv)))
                if m < 1e-6 * scale:
                    j = int(np.argmin(np.abs(fv)))
                    flagged.append({"lo": float(fine[max(j - 1, 0)]), "hi": float(fine[min(j + 1, 64)]),
                                    "min_abs": m, "scale": scale})
    if brackets:
        B = np.array(brackets)
        a, b, fa, fb = B[:, 0].copy(), B[:, 1].copy(), B[:, 2].copy(), B[:, 3].copy()
        side = np.zeros(len(a))
        for _ in range(max_iter):
            active = np.abs(b - a) > xtol * np.maximum(1.0, np.abs(a))
            if not np.any(active):
                break
            c = np.where(active, (a * fb - b * fa) / (fb - fa), a)
            bad = ~((c > np.minimum(a, b)) & (c < np.maximum(a, b)))
            c = np.where(bad, 0.5 * (a + b), c)
            fc = np.zeros(len(c))
            idx = np.flatnonzero(active)
            fc[idx] = _batched(fn, c[idx], chunk)
            exact = active & (fc == 0)
            a = np.where(exact, c, a)
            b = np.where(exact, c, b)
            same_b = active & ~exact & (np.sign(fc) == np.sign(fb))
            same_a = active & ~exact & ~same_b
            # Illinois: halve the retained end's value when the same side repeats
            fa = np.where(same_b & (side == 1), fa / 2, fa)
            fb = np.where(same_a & (side == -1), fb / 2, fb)
            b = np.where(same_b, c, b)
            fb = np.where(same_b, fc, fb)
            a = np.where(same_a, c, a)
            fa = np.where(same_a, fc, fa)
            side = np.where(same_b, 1, np.where(same_a, -1, side))
        r = np.where(np.abs(fa) < np.abs(fb), a, b)
        r = np.where(a == b, a, r)
        roots.extend(r.tolist())
    roots = np.array(sorted(roots))
    if len(roots):
        keep = np.concatenate([[True], np.diff(roots) > 1e-12 * np.maximum(1, np.abs(roots[1:]))])
        roots = roots[keep]
    slack = 1e-10 * max(1.0, abs(lo), abs(hi))  # roots sitting on the window edge count
    roots = roots[(roots >= lo - slack) & (roots <= hi + slack)]
    res = _batched(fn, roots, chunk) if len(roots) else np.array([])
    return roots, np.abs(res) / scale, flagged


def eigenvalues(weyl: WeylFunction, window, per_unit: int = 64, shift: float | None = None) -> Spectrum:
    """Eigenvalues in ``window`` as real roots of ``W(Phi(lam), psi(lam))``.

    With ``shift=h`` the roots of ``W(Theta + h Phi, psi)`` (zeros of ``M - h``) are
    returned instead.
    """
    lo, hi = map(float, window)
    if not weyl.discrete:
        raise ConfigurationError(
            "eigenvalue search needs a regular, limit-circle or truncated right condition")
    roots, res, flagged = find_real_roots(lambda lam: weyl.characteristic(lam, shift), lo, hi, per_unit)
    return Spectrum(roots, res, (lo, hi), flagged,
                    {"per_unit": per_unit, "shift": shift, "right": weyl.right.to_json()})


# ---------------------------------------------------------------------------
# spectral measure


def _extrapolate_zero(eps, values):
    """Polynomial (Neville) extrapolation of values(eps) to eps = 0; values (..., k)."""
    eps = np.asarray(eps, dtype=float)
    P = [np.asarray(values[..., i]) for i in range(len(eps))]
    k = len(eps)
    for m in range(1, k):
        for i in range(k - m):
            P[i] = (eps[i + m] * P[i] - eps[i] * P[i + 1]) / (eps[i + m] - eps[i])
    return P[0]


@dataclass
class SpectralMeasure:
    atoms: np.ndarray  # (n, 2): lambda, mass
    density: np.ndarray  # (m, 2): lambda, density
    window: tuple[float, float]
    eps: tuple
    m_c: float = 0.0
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def total_mass(self, lo=None, hi=None) -> float:
        lo = self.window[0] if lo is None else lo
        hi = self.window[1] if hi is None else hi
        a = self.atoms
        sel = (a[:, 0] > lo) & (a[:, 0] <= hi) if len(a) else np.zeros(0, bool)
        pm = float(np.sum(a[sel, 1])) if len(a) else 0.0
        d = self.density
        if len(d) > 1:
            m = (d[:, 0] >= lo) & (d[:, 0] <= hi)
            ac = float(np.trapezoid(d[m, 1], d[m, 0])) if np.count_nonzero(m) > 1 else 0.0
        else:
            ac = 0.0
        return pm + ac

    def atoms_csv(self) -> str:
        return _csv(["lambda", "weight"], self.atoms)

    def density_csv(self) -> str:
        return _csv(["lambda", "density"], self.density)

    def to_json(self):
        return {"window": list(self.window), "eps": list(self.eps), "m_c": self.m_c,
                "atoms": [[float(l), float(w)] for l, w in self.atoms], "n_density": len(self.density),
                "flags": self.flags, **self.meta}


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["%.17g" % v for v in r])
    return buf.getvalue()


def _norm_derivative(weyl: WeylFunction, lams, radius: float = 0.25, n: int = 32):
    """``||Phi(lam)||^2 = W(dPhi/dz, Phi)`` at the right end (regular or truncated right data).

    Follows from the Lagrange identity in the coincidence limit; dPhi/dz by a
    trapezoid Cauchy integral.
    """
    lams = np.asarray(lams, dtype=float)
    th = 2 * np.pi * np.arange(n) / n
    w = lams[:, None] + radius * np.exp(1j * th)[None, :]
    out = np.empty(len(lams))
    step = max(1, 65536 // n)
    for i in range(0, len(lams), step):
        wi = w[i:i + step].ravel()
        V, lg = weyl.frame_at_matching(np.concatenate([wi, lams[i:i + step] + 0j]))
        V = V * np.exp(lg)[:, None, None]
        k = len(wi)
        phis = V[:k, :, 1].reshape(-1, n, 2)
        dphi = np.mean(phis * (np.exp(-1j * th) / radius)[None, :, None], axis=1)
        phi = V[k:, :, 1]
        out[i:i + step] = np.real(wronskian(dphi, phi))
    return out


def spectral_measure(weyl: WeylFunction, window, eps_schedule=(1e-2, 1e-3, 1e-4), grid=None,
                     n_grid: int = 201, with_atoms: bool = True, norm_method: str = "auto",
                     m_c_schedule=(1e2, 1e3, 1e4), estimate_m_c: bool = True) -> SpectralMeasure:
    """Point masses and a.c. density of the spectral measure in ``window``."""
    lo, hi = map(float, window)
    eps = tuple(sorted((float(e) for e in eps_schedule), reverse=True))
    flags = []
    meta = {"norm_method": None}
    atoms = np.zeros((0, 2))
    if with_atoms and weyl.discrete:
        spec = eigenvalues(weyl, (lo, hi))
        lam = spec.eigenvalues
        if len(lam):
            zs = (lam[:, None] + 1j * np.array(eps)[None, :]).ravel()
            M = weyl(zs).reshape(len(lam), len(eps))
            masses = _extrapolate_zero(eps, np.array(eps)[None, :] * M.imag)
            method = norm_method
            if method == "auto":
                method = "derivative" if (len(lam) > 256 and weyl.right.kind in ("regular", "truncated")) \
                    else "quadrature"
            meta["norm_method"] = method
            if method == "quadrature":
                norms = norming_constants(weyl.frame, lam, weyl.upper)
            elif method == "derivative":
                norms = _norm_derivative(weyl, lam)
            else:
                norms = None
            if norms is not None:
                check = masses * norms
                meta["norming_check_max_dev"] = float(np.max(np.abs(check - 1)))
                for l_, c_ in zip(lam, check):
                    if abs(c_ - 1) > 0.01:
                        flags.append({"lambda": float(l_), "issue": "norming-constant mismatch",
                                      "ratio": float(c_)})
            for l_, m_ in zip(lam, masses):
                if m_ <= 0:
                    flags.append({"lambda": float(l_), "issue": "nonpositive mass", "mass": float(m_)})
            atoms = np.column_stack([lam, masses])
            meta["spectrum_flagged"] = spec.flagged
    # a.c. density on a grid kept away from atoms
    if grid is None:
        grid = np.linspace(lo, hi, n_grid)
    grid = np.asarray(grid, dtype=float)
    gap = 10 * max(eps)
    if len(atoms):
        for l_ in atoms[:, 0]:
            near = np.abs(grid - l_) < gap
            grid = np.where(near, np.where(grid >= l_, l_ + gap, l_ - gap), grid)
        grid = np.unique(grid[(grid >= lo) & (grid <= hi)])
    if len(grid):
        zs = (grid[:, None] + 1j * np.array(eps)[None, :]).ravel()
        M = weyl(zs).reshape(len(grid), len(eps))
        dens = _extrapolate_zero(eps, M.imag) / np.pi
        raw_min = float(np.min(dens))
        meta["density_raw_min"] = raw_min
        if not weyl.discrete:
            # atoms show up as eps * Im M that does not vanish with eps
            em = np.array(eps)[None, :] * M.imag
            sus = grid[em[:, -1] > 0.5 * em[:, 0] + 1e-12]
            if len(sus):
                flags.append({"issue": "suspected atoms", "lambda": sus[:10].tolist()})
        dens = np.maximum(dens, 0.0)
        density = np.column_stack([grid, dens])
    else:
        density = np.zeros((0, 2))
    m_c = 0.0
    if estimate_m_c:
        ys = np.array(m_c_schedule, dtype=float)
        vals = (weyl(1j * ys) / (1j * ys)).real
        # linear extrapolation in 1/y through the two largest y
        y1, y2 = ys[-2], ys[-1]
        est = (y2 * vals[-1] - y1 * vals[-2]) / (y2 - y1)
        meta["m_c_samples"] = vals.tolist()
        m_c = float(est) if abs(est) >= 1e-8 else 0.0
    meta["settings"] = {"eps_schedule": list(eps), "grid_gap_from_atoms": gap,
                        "m_c_schedule": list(m_c_schedule)}
    return SpectralMeasure(atoms, density, (lo, hi), eps, m_c, flags, meta)


def stieltjes_mass(weyl: WeylFunction, lo: float, hi: float, eps_schedule=(1e-2, 5e-3, 2.5e-3),
                   atoms=(), order: int = 16):
    """``(1/pi) int_lo^hi Im M(lam + i eps) dlam`` extrapolated to eps -> 0.

    Panels are graded geometrically around the given atom locations so the
    Lorentzian peaks are resolved.
    """
    t, w = np.polynomial.legendre.leggauss(order)
    out = []
    for e in eps_schedule:
        brk = {lo, hi}
        for a in atoms:
            for k in range(-2, 12):
                for s in (-1, 1):
                    p = a + s * e * 4.0 ** k / 16
                    if lo < p < hi:
                        brk.add(p)
            if lo < a < hi:
                brk.add(a)
        brk = np.array(sorted(brk))
        # cap panel length so the smooth background is resolved too
        fine = [brk[0]]
        for a_, b_ in zip(brk[:-1], brk[1:]):
            k = max(1, int(math.ceil((b_ - a_) / 0.05)))
            fine.extend(np.linspace(a_, b_, k + 1)[1:])
        brk = np.array(fine)
        half = 0.5 * np.diff(brk)
        mid = 0.5 * (brk[1:] + brk[:-1])
        x = (mid[:, None] + half[:, None] * t[None]).ravel()
        wt = (half[:, None] * w[None]).ravel()
        M = weyl(x + 1j * e)
        out.append(float(np.sum(wt * M.imag)) / np.pi)
    return float(_extrapolate_zero(np.array(eps_schedule), np.array(out))), out


def herglotz_check(weyl: WeylFunction, zs, tol: float = 1e-10):
    """Im M(z) * sign(Im z) >= -tol on the samples, plus the reflection defect."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    zs = zs[zs.imag != 0]
    M = weyl(np.concatenate([zs, zs.conj()]))
    n = len(zs)
    signed = M[:n].imag * np.sign(zs.imag)
    worst = int(np.argmin(signed))
    refl = float(np.max(np.abs(M[n:] - M[:n].conj())))
    return {"ok": bool(signed[worst] >= -tol), "min_signed_imag": float(signed[worst]),
            "worst_z": [float(zs[worst].real), float(zs[worst].imag)], "reflection_defect": refl,
            "n_samples": n}


# ---------------------------------------------------------------------------
# spectra comparison and two-spectra


def set_distance(A, B) -> float:
    """Hausdorff distance between two finite real sets (inf if exactly one is empty)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if len(A) == 0 and len(B) == 0:
        return 0.0
    if len(A) == 0 or len(B) == 0:
        return math.inf
    d = np.abs(A[:, None] - B[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def interlacing_violations(S, T) -> int:
    """Number of places where the merged sorted list fails to alternate S, T."""
    lab = [(float(s), 0) for s in S] + [(float(t), 1) for t in T]
    lab.sort()
    return sum(1 for (_, p), (_, q) in zip(lab[:-1], lab[1:]) if p == q)


@dataclass
class Realization:
    """An expression with left and right boundary data (or an explicit left frame)."""

    expr: DiracExpression
    left: BoundaryCondition | None
    right: BoundaryCondition
    settings: PropagationSettings | None = None
    frame: Frame | None = None

    def weyl(self) -> WeylFunction:
        frame = self.frame if self.frame is not None else left_frame(self.expr, self.left, self.settings)
        return WeylFunction(frame, self.right, settings=self.settings)


def two_spectra_report(S: Realization, T: Realization, S_t: Realization, T_t: Realization, window,
                       tol: float = 1e-6):
    """Compare ``(sigma(S), sigma(T))`` against ``(sigma(S~), sigma(T~))``.

    Also verifies that the zeros of ``M_S - h``, with ``h = M_S(lambda_1(T))``,
    coincide with ``sigma(T)``.
    """
    lo, hi = map(float, window)
    pad = 0.25
    wS, wT, wSt, wTt = S.weyl(), T.weyl(), S_t.weyl(), T_t.weyl()
    ext = (lo - pad, hi + pad)
    sS = eigenvalues(wS, ext).eigenvalues
    sT = eigenvalues(wT, ext).eigenvalues
    sSt = eigenvalues(wSt, ext).eigenvalues
    sTt = eigenvalues(wTt, ext).eigenvalues

    def inside(v):
        return v[(v >= lo) & (v <= hi)]

    def dist(A, B):
        a, b = inside(A), inside(B)
        da = max((float(np.min(np.abs(B - x))) for x in a), default=0.0)
        db = max((float(np.min(np.abs(A - x))) for x in b), default=0.0)
        return max(da, db)

    rep = {
        "window": [lo, hi],
        "sigma_S": inside(sS).tolist(), "sigma_T": inside(sT).tolist(),
        "sigma_S_tilde": inside(sSt).tolist(), "sigma_T_tilde": inside(sTt).tolist(),
        "distance_S": dist(sS, sSt), "distance_T": dist(sT, sTt),
        "interlacing_violations": interlacing_violations(inside(sS), inside(sT)),
        "interlacing_violations_tilde": interlacing_violations(inside(sSt), inside(sTt)),
    }
    Tin = inside(sT)
    if len(Tin):
        # h = M(lambda) at the first T eigenvalue; constancy checked on the rest
        hs = np.real(wS(Tin + 0j, allow_real=True))
        h = float(hs[0])
        rep["h"] = h
        rep["h_spread"] = float(np.max(np.abs(hs - h)))
        zeros = eigenvalues(wS, ext, shift=h).eigenvalues
        rep["zeros_of_M_minus_h"] = inside(zeros).tolist()
        rep["distance_zeros_T"] = dist(zeros, sT)
    else:
        rep["h"] = None
        rep["distance_zeros_T"] = 0.0
    rep["ok"] = bool(rep["distance_S"] < tol and rep["distance_T"] < tol and rep["distance_zeros_T"] < tol)
    return rep
