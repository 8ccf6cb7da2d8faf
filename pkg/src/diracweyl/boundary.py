"""Endpoint classification, boundary conditions and the fundamental system (Theta, Phi).

A *frame* produces, for a batch of spectral parameters, the pair of solutions
``(Theta(z, x), Phi(z, x))`` stored as the two columns of a 2x2 matrix.  ``Phi``
obeys the left boundary condition, ``W(Theta, Phi) = 1`` and both are real
entire in ``z``.  Frames come in four flavours:

* regular left endpoint: z-independent initial data at ``a``;
* limit-circle left endpoint given by a real reference solution at ``lam0``:
  initial data at ``a + delta`` with delta-refinement (Aitken accelerated);
* radial expressions: Volterra iteration on a seed interval ``[0, delta]``;
* anchored frames: explicit data at an interior point (used for frames pushed
  through a Liouville transform).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .coefficients import DiracExpression, RadialSpec, check_local_integrability
from .ode import PropagationSettings, evolve, gauss_panels, wronskian

__all__ = [
    "BoundaryCondition",
    "EndpointClassification",
    "classify_endpoint",
    "Frame",
    "RegularFrame",
    "ReferenceFrame",
    "RadialFrame",
    "AnchoredFrame",
    "EntireSolutionHandle",
    "fundamental_system",
    "left_frame",
    "singular_phi",
    "ConfigurationError",
    "reference_limit",
]


class ConfigurationError(ValueError):
    """The requested boundary data does not fit the endpoint."""


def _unit_vector(angle: float) -> np.ndarray:
    return np.array([-math.sin(angle), math.cos(angle)])


def _angle_of(u) -> float:
    u = np.asarray(u, dtype=float)
    return math.atan2(-u[0], u[1]) % math.pi


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary data at one endpoint.

    kinds
      ``regular``     ``W(f, u) = 0`` at a finite regular endpoint, ``u = (-sin a, cos a)``,
                      i.e. ``f1 cos a + f2 sin a = 0``.
      ``reference``   limit-circle condition ``lim W(f, u) = 0`` where ``u`` is the real
                      solution at ``lam0`` with value ``vector`` at the interior point ``anchor``.
      ``radial``      the natural condition ``lim x^kappa f1 = 0`` of a radial expression
                      at 0 (also covers the limit-point radial cases).
      ``limit_point`` no condition; Weyl solutions come from a truncation schedule.
      ``truncated``   regular condition imposed at the finite point ``anchor`` (an explicit
                      truncation of a limit-point end, for discrete approximations).
    """

    endpoint: str
    kind: str
    vector: tuple[float, float] | None = None
    anchor: float | None = None
    lam0: float = 0.0
    seed: float = 10.0
    cap: float = 1e6

    def __post_init__(self):
        if self.endpoint not in ("left", "right"):
            raise ValueError("endpoint must be 'left' or 'right'")
        if self.kind not in ("regular", "reference", "radial", "limit_point", "truncated"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind in ("regular", "reference", "truncated"):
            if self.vector is None:
                raise ValueError(f"{self.kind} condition needs a vector")
            v = np.asarray(self.vector, dtype=float)
            if v.shape != (2,) or not np.all(np.isfinite(v)) or np.hypot(*v) == 0:
                raise ValueError("boundary vector must be a nonzero real 2-vector")
        if self.kind in ("reference", "truncated") and self.anchor is None:
            raise ValueError(f"{self.kind} condition needs an anchor point")

    @classmethod
    def from_angle(cls, angle: float, endpoint: str = "left") -> "BoundaryCondition":
        angle = float(angle) % math.pi
        return cls(endpoint, "regular", tuple(_unit_vector(angle)))

    @classmethod
    def from_vector(cls, u, endpoint: str = "left") -> "BoundaryCondition":
        return cls(endpoint, "regular", tuple(float(t) for t in u))

    @classmethod
    def reference(cls, anchor: float, value, endpoint: str = "left", lam0: float = 0.0):
        return cls(endpoint, "reference", tuple(float(t) for t in value), anchor=float(anchor),
                   lam0=float(lam0))

    @classmethod
    def radial(cls) -> "BoundaryCondition":
        return cls("left", "radial")

    @classmethod
    def limit_point(cls, endpoint: str = "right", seed: float = 10.0, cap: float = 1e6):
        return cls(endpoint, "limit_point", seed=seed, cap=cap)

    @classmethod
    def truncated(cls, x: float, angle: float = 0.0, endpoint: str = "right"):
        return cls(endpoint, "truncated", tuple(_unit_vector(float(angle) % math.pi)), anchor=float(x))

    @property
    def u(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=float)

    @property
    def angle(self) -> float | None:
        return None if self.vector is None else _angle_of(self.vector)

    def to_json(self):
        d = {"endpoint": self.endpoint, "kind": self.kind}
        if self.vector is not None:
            d["vector"] = list(self.vector)
            d["angle"] = self.angle
        if self.anchor is not None:
            d["anchor"] = self.anchor
        if self.kind == "reference":
            d["lam0"] = self.lam0
        if self.kind == "limit_point":
            d["seed"] = self.seed
            d["cap"] = self.cap
        return d


# ---------------------------------------------------------------------------
# classification


@dataclass
class EndpointClassification:
    verdict: str  # regular | limit-circle | limit-point | inconclusive
    diagnostic: dict = field(default_factory=dict)

    def to_json(self):
        return {"verdict": self.verdict, "diagnostic": self.diagnostic}


def _cells_toward(expr: DiracExpression, endpoint: str, n_cells: int):
    """Geometric cell edges from an interior point toward ``endpoint``."""
    iv = expr.interval
    c = iv.interior_point()
    if endpoint == "left":
        if iv.finite_left:
            d = c - iv.a
            return c, [iv.a + d * 2.0 ** (-k) for k in range(n_cells + 1)]
        return c, [c - (2.0 ** k - 1) for k in range(n_cells + 1)]
    if iv.finite_right:
        d = iv.b - c
        return c, [iv.b - d * 2.0 ** (-k) for k in range(n_cells + 1)]
    return c, [c + (2.0 ** k - 1) for k in range(n_cells + 1)]


def _slope_verdict(logs: np.ndarray, ratio: float = 0.97):
    # logs: log of successive cell contributions; geometric decay => summable
    d = np.diff(logs)
    tail = d[len(d) // 2:]
    if np.all(tail < math.log(ratio)):
        return "convergent"
    if np.all(tail > math.log(ratio)):
        return "divergent"
    return "inconclusive"


def classify_endpoint(expr: DiracExpression, endpoint: str, z_test: complex = 1j,
                      settings: PropagationSettings | None = None, n_cells: int = 30,
                      kmax: int = 40) -> EndpointClassification:
    """Regular / limit-circle / limit-point verdict for ``endpoint`` ('left' or 'right').

    Two solutions started at an interior point with values (1,0) and (0,1) are
    integrated toward the endpoint over geometrically growing (or shrinking)
    cells; the decay rate of the per-cell ``R``-norms decides summability.
    """
    if endpoint not in ("left", "right"):
        raise ValueError("endpoint must be 'left' or 'right'")
    iv = expr.interval
    finite = iv.finite_left if endpoint == "left" else iv.finite_right
    if finite:
        try:
            ok, values = check_local_integrability(expr, endpoint, kmax=kmax)
        except (ArithmeticError, ValueError):
            ok, values = False, []
        if ok:
            return EndpointClassification("regular", {"integrability_partials": list(map(float, values[-5:]))})
    if not finite:
        n_cells = min(n_cells, 12)  # cells double in length; 2^12 suffices at infinity
    c, edges = _cells_toward(expr, endpoint, n_cells)
    t, w = np.polynomial.legendre.leggauss(12)
    xs, ws, cell_id = [], [], []
    for k in range(n_cells):
        lo, hi = sorted((edges[k], edges[k + 1]))
        xs.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * t)
        ws.append(0.5 * (hi - lo) * w)
        cell_id.append(np.full(len(t), k))
    xs = np.concatenate(xs)
    ws = np.concatenate(ws)
    cell_id = np.concatenate(cell_id)
    order = np.argsort(xs) if endpoint == "right" else np.argsort(-xs)
    try:
        F, logs = evolve(expr, np.array([z_test]), c, np.eye(2), xs[order], settings)
    except Exception as exc:  # integration failure is itself a diagnostic
        return EndpointClassification("inconclusive", {"error": str(exc)})
    F = F[:, 0]
    logs = logs[:, 0]
    _, R = expr.coefficients(xs[order])
    verdicts = []
    cell_logs = []
    for col in range(2):
        f = F[:, :, col]
        dens = np.real(np.einsum("ni,nij,nj->n", f.conj(), R, f))
        out = np.full(n_cells, -np.inf)
        for k in range(n_cells):
            m = cell_id[order] == k
            lw = logs[m]
            base = lw.max()
            val = np.sum(ws[order][m] * dens[m] * np.exp(2 * (lw - base)))
            out[k] = math.log(val) + 2 * base if val > 0 else -np.inf
        cell_logs.append(out.tolist())
        verdicts.append(_slope_verdict(out))
    if all(v == "convergent" for v in verdicts):
        verdict = "limit-circle"
    elif any(v == "divergent" for v in verdicts):
        verdict = "limit-point"
    else:
        verdict = "inconclusive"
    return EndpointClassification(verdict, {"z_test": [z_test.real, z_test.imag] if isinstance(z_test, complex)
                                            else [float(np.real(z_test)), float(np.imag(z_test))],
                                            "cell_log_norms": cell_logs, "solution_verdicts": verdicts})


# ---------------------------------------------------------------------------
# frames


def _sorted_eval(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(x, kind="stable")
    return x, order


class Frame:
    """Base class: subclasses supply :meth:`seed` (and optionally :meth:`near`)."""

    expr: DiracExpression
    settings: PropagationSettings
    entire: bool = True
    singular_left: bool = False
    kind: str = "frame"

    def seed(self, z: np.ndarray):
        """Return ``(x0, V0)`` with ``V0`` of shape (nz, 2, 2), columns (Theta, Phi)."""
        raise NotImplementedError

    def near(self, z: np.ndarray, xs: np.ndarray):
        """Direct values for points left of the seed (singular endpoints); default none."""
        return None

    #: exponent p with |Phi|^2 ~ x^p near a singular left endpoint (quadrature grading)
    left_power: float = 0.0

    def values(self, z, xs, renormalize: bool = False, phi_only: bool = False):
        """Frame values ``(F, logscale)`` with ``F`` of shape (nx, nz, 2, 2).

        With ``renormalize`` the true value is ``F * exp(logscale)`` (shared by both
        columns, so quotients of Wronskians are unaffected).  ``phi_only`` allows
        a frame to skip work for the Theta column (which may then hold NaN).
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        xs, order = _sorted_eval(xs)
        iv = self.expr.interval
        if np.any(xs <= iv.a) or np.any(xs >= iv.b):
            raise ValueError("frame evaluation points must be interior")
        xsorted = xs[order]
        x0, V0 = self.seed(z)
        out = np.empty((len(xs), len(z), 2, 2), dtype=complex)
        logs = np.zeros((len(xs), len(z)))
        right = xsorted >= x0
        if np.any(right):
            F, lg = evolve(self.expr, z, x0, V0, xsorted[right], self.settings, renormalize)
            out[order[right]] = F
            logs[order[right]] = lg
        left = ~right
        if np.any(left):
            xl = xsorted[left]
            direct = self.near(z, xl)
            if direct is None:
                F, lg = evolve(self.expr, z, x0, V0, xl[::-1], self.settings, renormalize)
                out[order[left]] = F[::-1]
                logs[order[left]] = lg[::-1]
            else:
                out[order[left]] = direct
        return out, logs

    def theta(self) -> "EntireSolutionHandle":
        return EntireSolutionHandle(self, 0)

    def phi(self) -> "EntireSolutionHandle":
        return EntireSolutionHandle(self, 1)

    def to_json(self):
        return {"kind": self.kind, "entire": self.entire}


class RegularFrame(Frame):
    """Frame at a regular left endpoint: ``Phi(a) = u``, ``Theta(a) = (u2, -u1)/|u|^2``."""

    kind = "regular"

    def __init__(self, expr: DiracExpression, bc: BoundaryCondition,
                 settings: PropagationSettings | None = None):
        if not expr.interval.finite_left:
            raise ConfigurationError("regular frame needs a finite left endpoint")
        self.expr = expr
        self.bc = bc
        self.settings = settings or PropagationSettings()
        u = bc.u
        v = np.array([u[1], -u[0]]) / (u @ u)
        self._V = np.array([[v[0], u[0]], [v[1], u[1]]], dtype=complex)

    def seed(self, z):
        return self.expr.interval.a, np.broadcast_to(self._V, (len(z), 2, 2))

    def to_json(self):
        return {"kind": self.kind, "entire": True, "bc": self.bc.to_json()}


class AnchoredFrame(Frame):
    """Frame given by explicit values at an interior anchor ``x0``.

    ``values_at_anchor(z) -> (nz, 2, 2)``; ``near(z, xs)`` optionally supplies values
    between the left endpoint and the anchor.
    """

    kind = "anchored"

    def __init__(self, expr, x0, values_at_anchor, near=None, settings=None, entire=True,
                 singular_left=False, meta=None):
        self.expr = expr
        self.x0 = float(x0)
        self._vals = values_at_anchor
        self._near = near
        self.settings = settings or PropagationSettings()
        self.entire = entire
        self.singular_left = singular_left
        self.meta = meta or {}

    def seed(self, z):
        return self.x0, np.asarray(self._vals(z), dtype=complex)

    def near(self, z, xs):
        return None if self._near is None else self._near(z, xs)

    def to_json(self):
        return {"kind": self.kind, "entire": self.entire, "anchor": self.x0, **self.meta}


def reference_limit(expr: DiracExpression, side: str, anchor: float, u_anchor, lam0: float, z,
                    settings: PropagationSettings | None = None, tol: float = 1e-11, kmax: int = 44):
    """Limit-circle frame data at ``anchor`` for the reference condition at ``side``.

    Solutions with initial values ``u(e)`` and ``v(e)`` (the reference solution and
    its companion at ``lam0``) at ``e = endpoint -+ delta`` are carried to the anchor;
    the limit ``delta -> 0`` is accelerated with Aitken's process on the geometric
    delta schedule.  Returns ``(V, diagnostics)``; ``V`` has columns (companion-type,
    condition-satisfying) solutions at the anchor, shape (nz, 2, 2).
    """
    st = settings or PropagationSettings()
    iv = expr.interval
    end = iv.a if side == "left" else iv.b
    if not math.isfinite(end):
        raise ConfigurationError("reference conditions need a finite endpoint")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    u = np.asarray(u_anchor, dtype=float)
    v = np.array([u[1], -u[0]]) / (u @ u)
    dist = abs(anchor - end)
    pts = np.array([end + (dist * 2.0 ** (-k) if side == "left" else -dist * 2.0 ** (-k))
                    for k in range(1, kmax + 1)])
    UV0 = np.array([[v[0], u[0]], [v[1], u[1]]], dtype=complex)[None]
    ref, _ = evolve(expr, np.array([lam0 + 0j]), anchor, UV0, pts, st, renormalize=False)
    ref = ref[:, 0]  # (k, 2, 2) real reference pair at the delta points
    # cumulative transfer from pts[k] to the anchor, built incrementally
    T = np.broadcast_to(np.eye(2, dtype=complex), (len(z), 2, 2)).copy()
    prev = anchor
    seq = []
    est = []
    diag = {"levels": 0, "aitken_changes": []}
    for k in range(kmax):
        step, _ = evolve(expr, z, pts[k], np.eye(2), [prev], st, renormalize=False)
        T = T @ step[0]
        prev = pts[k]
        seq.append(T @ ref[k])
        if len(seq) >= 3:
            a0, a1, a2 = seq[-3], seq[-2], seq[-1]
            d1 = a1 - a0
            d2 = a2 - a1
            denom = d2 - d1
            with np.errstate(all="ignore"):
                acc = np.where(np.abs(denom) > 1e-300, a2 - d2 * d2 / denom, a2)
            acc = np.where(np.isfinite(acc), acc, a2)
            est.append(acc)
            if len(est) >= 2:
                change = float(np.max(np.abs(est[-1] - est[-2])) / max(1.0, float(np.max(np.abs(est[-1])))))
                diag["aitken_changes"].append(change)
                if change < tol or float(np.max(np.abs(d2))) < tol * max(1.0, float(np.max(np.abs(a2)))):
                    diag["levels"] = k + 1
                    diag["delta"] = float(abs(pts[k] - end))
                    return est[-1], diag
    raise ConfigurationError(f"limit-circle frame did not stabilise; Aitken changes {diag['aitken_changes'][-5:]}")


class ReferenceFrame(Frame):
    """Limit-circle left endpoint with a reference-solution boundary condition."""

    kind = "reference"

    def __init__(self, expr: DiracExpression, bc: BoundaryCondition,
                 settings: PropagationSettings | None = None, tol: float = 1e-11):
        self.expr = expr
        self.bc = bc
        self.settings = settings or PropagationSettings()
        self.tol = tol
        self.last_diagnostics = None

    def seed(self, z):
        V, diag = reference_limit(self.expr, "left", self.bc.anchor, self.bc.u, self.bc.lam0, z,
                                  self.settings, self.tol)
        self.last_diagnostics = diag
        return self.bc.anchor, V

    def to_json(self):
        return {"kind": self.kind, "entire": True, "bc": self.bc.to_json()}


# ---------------------------------------------------------------------------
# radial Volterra construction


def _cheb_points(n):
    k = np.arange(n)
    return 0.5 * (1 - np.cos(np.pi * (k + 0.5) / n))  # first-kind nodes on [0, 1]


def _bary_matrix(nodes, pts):
    # barycentric interpolation from first-kind Chebyshev nodes (on [0,1]) to pts
    n = len(nodes)
    k = np.arange(n)
    w = (-1.0) ** k * np.sin(np.pi * (k + 0.5) / n)
    d = pts[:, None] - nodes[None, :]
    exact = np.abs(d) < 1e-300
    d[exact] = 1.0
    M = w[None, :] / d
    M /= M.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    M[rows] = exact[rows].astype(float)
    return M


def _jacobi_01(n, power):
    """Gauss rule on [0, 1] for weight ``s**power`` (power > -1)."""
    t, w = roots_jacobi(n, 0.0, power)
    return 0.5 * (1 + t), w * 0.5 ** (1 + power)


@dataclass
class VolterraSeed:
    delta: float
    nodes: np.ndarray  # Chebyshev nodes on [0, delta]
    v: np.ndarray  # (nz, 2, n): rescaled Phi components
    w: np.ndarray | None  # (nz, 2, n): rescaled Theta components (kappa < 1/2)
    iterations: int
    contraction: list


class RadialFrame(Frame):
    """Frame for a radial expression, seeded by Volterra iteration near 0.

    ``Phi = x^kappa (v1, v2)`` with ``v -> (0, 1)``.  For ``kappa < 1/2`` the
    entire ``Theta = x^-kappa (w1, w2)`` with ``w -> (1, 0)`` is built the same way.
    For ``kappa >= 1/2`` no entire ``Theta`` exists in closed form; a *local*
    Theta is fixed at ``theta_anchor`` by ``Theta = (Phi2, -Phi1)/(Phi1^2 + Phi2^2)``.
    It is real for real z and analytic near the real axis, so Stieltjes
    inversion of the resulting M still gives the spectral measure, but
    ``entire`` is False.
    """

    kind = "radial"

    def __init__(self, expr: DiracExpression, settings: PropagationSettings | None = None,
                 n_nodes: int = 28, n_quad: int = 40, theta_anchor: float | None = None,
                 tol: float = 1e-13, max_shrink: int = 12):
        if expr.radial is None:
            raise ConfigurationError("RadialFrame needs an expression from make_radial")
        self.expr = expr
        self.spec: RadialSpec = expr.radial
        self.settings = settings or PropagationSettings()
        self.n_nodes = n_nodes
        self.n_quad = n_quad
        self.tol = tol
        self.max_shrink = max_shrink
        self.singular_left = self.spec.kappa > 0
        self.left_power = 2 * self.spec.kappa
        self.entire = self.spec.kappa < 0.5
        b = expr.interval.b
        self.theta_anchor = float(theta_anchor) if theta_anchor is not None else (
            min(0.25, b / 4) if math.isfinite(b) else 0.25)
        self.last_seed: VolterraSeed | None = None
        self._cache = None

    def _volterra(self, z, delta):
        k = self.spec.kappa
        qs, qa = self.spec.q_sc, self.spec.q_am
        n, m = self.n_nodes, self.n_quad
        t = _cheb_points(n)
        X = delta * t
        nz = len(z)
        zc = z[:, None, None]

        def op_setup(power):
            s, ws = _jacobi_01(m, power)
            P = (X[:, None] * s[None, :])  # (n, m)
            B = _bary_matrix(t, (t[:, None] * s[None, :]).ravel()).reshape(n, m, n)
            return s, ws, P, B

        s0, w0, P0, B0 = op_setup(0.0)
        sp, wp, Pp, Bp = op_setup(2 * k)
        qs0, qa0 = qs(P0), qa(P0)
        qsp, qap = qs(Pp), qa(Pp)

        def interp(B, vals):  # vals (nz, n) -> (nz, n, m)
            return np.einsum("imj,zj->zim", B, vals)

        # Phi: v2 = 1 + x int_0^1 [qa v2 - (z - qs) v1](xs) ds
        #      v1 = x int_0^1 s^{2k} [-qa v1 + (z + qs) v2](xs) ds
        v1 = np.zeros((nz, n), dtype=complex)
        v2 = np.ones((nz, n), dtype=complex)
        hist = []
        it = 0
        while True:
            it += 1
            V1p, V2p = interp(Bp, v1), interp(Bp, v2)
            V10, V20 = interp(B0, v1), interp(B0, v2)
            n1 = X * np.einsum("zim,m->zi", -qap * V1p + (zc + qsp) * V2p, wp)
            n2 = 1 + X * np.einsum("zim,m->zi", qa0 * V20 - (zc - qs0) * V10, w0)
            ch = max(float(np.max(np.abs(n1 - v1))), float(np.max(np.abs(n2 - v2))))
            v1, v2 = n1, n2
            hist.append(ch)
            if ch < self.tol:
                break
            if it > 200 or not np.isfinite(ch) or (it > 5 and ch > hist[-2]):
                return None
        v = np.stack([v1, v2], axis=1)
        w = None
        if k < 0.5:
            sm, wm, Pm, Bm = op_setup(-2 * k)
            qsm, qam = qs(Pm), qa(Pm)
            w1 = np.ones((nz, n), dtype=complex)
            w2 = np.zeros((nz, n), dtype=complex)
            it2 = 0
            while True:
                it2 += 1
                W10, W20 = interp(B0, w1), interp(B0, w2)
                W1m, W2m = interp(Bm, w1), interp(Bm, w2)
                n1 = 1 + X * np.einsum("zim,m->zi", -qa0 * W10 + (zc + qs0) * W20, w0)
                n2 = X * np.einsum("zim,m->zi", qam * W2m - (zc - qsm) * W1m, wm)
                ch = max(float(np.max(np.abs(n1 - w1))), float(np.max(np.abs(n2 - w2))))
                w1, w2 = n1, n2
                hist.append(ch)
                if ch < self.tol:
                    break
                if it2 > 200 or not np.isfinite(ch) or (it2 > 5 and ch > hist[-2]):
                    return None
            w = np.stack([w1, w2], axis=1)
        return VolterraSeed(delta, X, v, w, it, hist)

    def volterra_seed(self, z) -> VolterraSeed:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        cache = self._cache  # read once: (z, seed) pairs are swapped atomically
        if cache is not None and cache[0].shape == z.shape and np.array_equal(cache[0], z):
            return cache[1]
        seed = self._volterra_seed(z)
        self._cache = (z.copy(), seed)
        return seed

    def _volterra_seed(self, z) -> VolterraSeed:
        zmax = float(np.max(np.abs(z))) if len(z) else 0.0
        delta = min(0.25, 1.0 / (4.0 * (1.0 + zmax)))
        b = self.expr.interval.b
        if math.isfinite(b):
            delta = min(delta, b / 4)
        for _ in range(self.max_shrink):
            seed = self._volterra(z, delta)
            if seed is not None:
                self.last_seed = seed
                return seed
            delta *= 0.5
        raise ConfigurationError("radial Volterra iteration failed to contract on the seed interval")

    def _eval_seed(self, seed: VolterraSeed, xs):
        # returns Phi, Theta (or None) at xs <= delta, shape (nx, nz, 2)
        t = np.asarray(xs) / seed.delta
        B = _bary_matrix(_cheb_points(self.n_nodes), t)
        k = self.spec.kappa
        xk = np.asarray(xs) ** k
        phi = np.einsum("xj,zcj->xzc", B, seed.v) * xk[:, None, None]
        theta = None
        if seed.w is not None:
            theta = np.einsum("xj,zcj->xzc", B, seed.w) / xk[:, None, None]
        return phi, theta

    def seed(self, z):
        seed = self.volterra_seed(z)
        d = seed.delta
        phi, theta = self._eval_seed(seed, [d])
        phi, theta = phi[0], None if theta is None else theta[0]
        if theta is not None:
            return d, np.stack([theta, phi], axis=-1)
        # local Theta at the fixed anchor
        xa = self.theta_anchor
        if xa > d:
            F, _ = evolve(self.expr, z, d, phi[:, :, None], [xa], self.settings, renormalize=False)
            pa = F[0, :, :, 0]
        else:
            pa, _ = self._eval_seed(seed, [xa])
            pa = pa[0]
        nrm = pa[:, 0] ** 2 + pa[:, 1] ** 2
        th = np.stack([pa[:, 1], -pa[:, 0]], axis=-1) / nrm[:, None]
        return xa, np.stack([th, pa], axis=-1)

    def near(self, z, xs):
        seed = self.volterra_seed(z)
        xs = np.asarray(xs)
        if np.any(xs > seed.delta * (1 + 1e-12)) or seed.w is None:
            return None
        phi, theta = self._eval_seed(seed, xs)
        return np.stack([theta, phi], axis=-1)

    def values(self, z, xs, renormalize: bool = False, phi_only: bool = False):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.spec.kappa < 0.5:
            return super().values(z, xs, renormalize)
        # kappa >= 1/2: Phi below the seed from the Volterra table, Theta by propagation
        xs_arr = np.atleast_1d(np.asarray(xs, dtype=float))
        seed = self.volterra_seed(z)
        small = xs_arr <= seed.delta
        if phi_only and np.any(small):
            F = np.full((len(xs_arr), len(z), 2, 2), np.nan + 0j)
            logs = np.zeros((len(xs_arr), len(z)))
            if np.any(~small):
                F[~small], logs[~small] = super().values(z, xs_arr[~small], renormalize)
        else:
            F, logs = super().values(z, xs_arr, renormalize)
        if np.any(small):
            phi, _ = self._eval_seed(seed, xs_arr[small])
            if renormalize:
                phi = phi * np.exp(-logs[small])[:, :, None]
            F[small, :, :, 1] = phi
        return F, logs

    def to_json(self):
        s = self.spec
        d = {"kind": self.kind, "entire": self.entire, "kappa": s.kappa, "q_sc": s.q_sc.text,
             "q_am": s.q_am.text}
        if not self.entire:
            d["theta_anchor"] = self.theta_anchor
        if self.last_seed is not None:
            d["seed_delta"] = self.last_seed.delta
            d["contraction"] = [float(c) for c in self.last_seed.contraction[:8]]
        return d


# ---------------------------------------------------------------------------
# handles and dispatch


class EntireSolutionHandle:
    """Evaluator ``(z, x) -> C^2`` for one column of a frame (0: Theta, 1: Phi)."""

    def __init__(self, frame: Frame, column: int):
        self.frame = frame
        self.column = column

    def __call__(self, z, x):
        scalar_z = np.ndim(z) == 0
        scalar_x = np.ndim(x) == 0
        F, _ = self.frame.values(z, np.atleast_1d(x))
        out = F[..., self.column]  # (nx, nz, 2)
        if scalar_z:
            out = out[:, 0]
        if scalar_x:
            out = out[0]
        return out

    @property
    def name(self):
        return "Theta" if self.column == 0 else "Phi"

    def realness_defect(self, z, x) -> float:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        a = self(np.concatenate([z, z.conj()]), x)
        n = len(z)
        return float(np.max(np.abs(a[..., n:, :] - a[..., :n, :].conj())))

    def cauchy_defect(self, z0: complex, x: float, radius: float = 1.0, n: int = 64,
                      probe: complex | None = None) -> float:
        """Trapezoid Cauchy integral on a circle vs a direct value at an interior point."""
        probe = z0 + 0.3 * radius if probe is None else probe
        th = 2 * np.pi * np.arange(n) / n
        w = z0 + radius * np.exp(1j * th)
        vals = self(np.concatenate([w, [probe]]), x)
        fw, direct = vals[:n], vals[n]
        integral = np.mean(fw * ((w - z0) / (w - probe))[:, None], axis=0)
        return float(np.max(np.abs(integral - direct)))


def left_frame(expr: DiracExpression, bc: BoundaryCondition | None = None,
               settings: PropagationSettings | None = None) -> Frame:
    """Frame for the left boundary data (radial expressions default to their natural condition)."""
    if bc is None:
        if expr.radial is not None:
            return RadialFrame(expr, settings)
        raise ConfigurationError("left boundary condition required")
    if bc.endpoint != "left":
        raise ConfigurationError("expected a left boundary condition")
    if bc.kind == "regular":
        return RegularFrame(expr, bc, settings)
    if bc.kind == "radial":
        return RadialFrame(expr, settings)
    if bc.kind == "reference":
        return ReferenceFrame(expr, bc, settings)
    if bc.kind == "limit_point":
        raise ConfigurationError("no real entire Phi is available at a non-radial limit-point left endpoint")
    raise ConfigurationError(f"boundary kind {bc.kind!r} is not valid at the left endpoint")


def fundamental_system(expr: DiracExpression, bc_a: BoundaryCondition | None = None,
                       settings: PropagationSettings | None = None):
    """``(Theta, Phi)`` handles for a regular or limit-circle left endpoint."""
    if bc_a is not None and bc_a.kind == "limit_point":
        raise ConfigurationError("left endpoint is limit point; use singular_phi for radial expressions")
    frame = left_frame(expr, bc_a, settings)
    return frame.theta(), frame.phi()


def singular_phi(spec_or_expr, z=None, settings: PropagationSettings | None = None) -> EntireSolutionHandle:
    """``Phi`` for a radial expression with ``Phi2 = x^kappa (1 + o(1))``, ``Phi1 = o(x^kappa)``."""
    from .coefficients import make_radial

    expr = spec_or_expr if isinstance(spec_or_expr, DiracExpression) else make_radial(spec_or_expr)
    return RadialFrame(expr, settings).phi()


def frame_wronskian(frame: Frame, z, x) -> np.ndarray:
    """``W(Theta(z, x), Phi(z, x))`` for a batch of z at one point ``x``."""
    F, _ = frame.values(z, [x])
    return wronskian(F[0, :, :, 0], F[0, :, :, 1])


def cross_wronskians(frame: Frame, z1, z2, x):
    """``W(Theta(z1), Phi(z2))``, ``W(Phi(z1), Phi(z2))``, ``W(Theta(z1), Theta(z2))`` at ``x``."""
    F, _ = frame.values(np.array([z1, z2]), [x])
    A, B = F[0, 0], F[0, 1]
    return (wronskian(A[:, 0], B[:, 1]), wronskian(A[:, 1], B[:, 1]), wronskian(A[:, 0], B[:, 0]))


def kernel_nodes(lo: float, hi: float, singular: bool, n_sub: int, order: int = 16,
                 grade_levels: int = 54):
    """Quadrature nodes on ``(lo, hi]``; geometric grading toward ``lo`` when singular."""
    if not singular:
        return gauss_panels(lo, hi, n_sub, order)
    t, w = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    d = hi - lo
    for k in range(grade_levels):
        a_, b_ = lo + d * 2.0 ** (-k - 1), lo + d * 2.0 ** (-k)
        nk = n_sub if k < 4 else max(1, n_sub // 4)
        x, wt = gauss_panels(a_, b_, nk, order)
        xs.append(x)
        ws.append(wt)
    return np.concatenate(xs), np.concatenate(ws)
