"""Independent reference values: closed forms and a brute-force second route.

Nothing here imports the integrator or frames of the package; the brute-force
propagator uses scipy's DOP853 on the real 4-dimensional system.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

J = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------- free operator
def free_phi(z, x, alpha=0.0):
    """Solution with ``Phi(0) = (-sin a, cos a)`` of ``J f' = z f``: rotation by ``z x``."""
    z = complex(z)
    u = np.array([-math.sin(alpha), math.cos(alpha)], dtype=complex)
    c, s = np.cos(z * x), np.sin(z * x)
    # f' = -J z f  =>  f(x) = exp(-z x J) u = (cos zx I - sin zx J) u
    return np.array([c * u[0] + s * u[1], -s * u[0] + c * u[1]])


def free_m_halfline(z):
    """M for Q = 0, R = I on (0, inf), f1(0) = 0: the decaying solution is e^{izx}(1, i)."""
    return 1j if complex(z).imag > 0 else -1j


def free_m_interval(z, b=math.pi):
    """M on (0, b) with f1 = 0 at both ends: -cot(b z)."""
    return -1.0 / np.tan(b * complex(z))


def free_kernel(zeta, z, c):
    """int_0^c Phi(zeta)^* Phi(z) for Phi = (sin zx, cos zx): cos((zeta* - z) x) integrated."""
    d = complex(zeta).conjugate() - complex(z)
    if abs(d) < 1e-14:
        return complex(c)
    return np.sin(d * c) / d


# ---------------------------------------------------------------- radial operator
def radial_phi_bessel(kappa, z, x):
    """Phi for Q = (kappa/x) sigma_1, R = I, normalised by Phi2 ~ x^kappa.

    Phi = Gamma(kappa + 1/2) (z/2)^(1/2 - kappa) sqrt(x) (J_{kappa+1/2}(z x), J_{kappa-1/2}(z x)).
    """
    z = complex(z)
    x = np.asarray(x, dtype=float)
    if z == 0:
        return np.stack([np.zeros_like(x, dtype=complex), (x ** kappa).astype(complex)], -1)
    pref = special.gamma(kappa + 0.5) * (z / 2) ** (0.5 - kappa) * np.sqrt(x)
    return np.stack([pref * special.jv(kappa + 0.5, z * x), pref * special.jv(kappa - 0.5, z * x)], -1)


def spherical_j1_zeros(n):
    """First n positive roots of tan(t) = t (zeros of J_{3/2})."""
    out = []
    for k in range(1, n + 1):
        lo, hi = k * math.pi, k * math.pi + math.pi / 2 - 1e-12
        out.append(brentq_tan(lo, hi))
    return np.array(out)


def brentq_tan(lo, hi):
    from scipy.optimize import brentq
    return brentq(lambda t: math.sin(t) - t * math.cos(t), lo, hi, xtol=1e-15, rtol=1e-15)


# ---------------------------------------------------------------- brute force
def brute_solution(Qf, Rf, z, x0, f0, x1, rtol=1e-13, atol=1e-15):
    """Integrate ``f' = -J (z R - Q) f`` with DOP853 (real and imaginary parts stacked)."""
    z = complex(z)

    def rhs(x, y):
        f = y[:2] + 1j * y[2:]
        A = -J @ (z * Rf(x) - Qf(x))
        g = A @ f
        return np.concatenate([g.real, g.imag])

    f0 = np.asarray(f0, dtype=complex)
    sol = integrate.solve_ivp(rhs, (x0, x1), np.concatenate([f0.real, f0.imag]), method="DOP853",
                              rtol=rtol, atol=atol)
    y = sol.y[:, -1]
    return y[:2] + 1j * y[2:]


def brute_kernel(phi, zeta, z, c, a=0.0):
    """``int_a^c phi(zeta, x)^* phi(z, x) dx`` (R = I) by adaptive quadrature."""
    def integrand(x, part):
        v = np.vdot(phi(zeta, x), phi(z, x))
        return v.real if part == 0 else v.imag

    re = integrate.quad(integrand, a, c, args=(0,), epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    im = integrate.quad(integrand, a, c, args=(1,), epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    return re + 1j * im
