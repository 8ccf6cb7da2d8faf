from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import expm

from diracweyl import (J, BoundaryCondition, DiracExpression, LiouvilleTransform, RadialSpec, gauge_rotate,
                       invariance_harness, kill_potential, make_radial, normalize_det, normalize_trace,
                       normalize_weight, pullback, pushforward)
from diracweyl.gauge import compose, push_boundary, radial_form_defect, rigidity_check, transform_from_json

SMOOTH_Q = [["0.5+sin(3*x)", "0.3*cos(x)"], ["0.3*cos(x)", "x^2-1"]]
SMOOTH_R = [["2+sin(x)", "0.3*cos(2*x)"], ["0.3*cos(2*x)", "1.5+x^2"]]


def smooth_expr():
    return DiracExpression.from_entries((0, 1), SMOOTH_Q, SMOOTH_R)


def coeffs(e, ys):
    Q, R = e.coefficients(np.asarray(ys, dtype=float))
    return np.real(Q), np.real(R)


def ys_of(e, n=33):
    iv = e.interval
    return np.linspace(iv.a, iv.b, n + 2)[1:-1]


def test_identity_transform():
    e = smooth_expr()
    t = pushforward(e, LiouvilleTransform.identity(e.interval))
    ys = ys_of(e)
    for A, B in zip(coeffs(e, ys), coeffs(t, ys)):
        assert np.max(np.abs(A - B)) < 1e-15


def test_constant_rotation_of_free():
    e = DiracExpression.free(0, 2)
    t = pushforward(e, LiouvilleTransform.rotation(e.interval, 0.9))
    Q, R = coeffs(t, ys_of(t))
    assert np.max(np.abs(Q)) < 1e-15 and np.max(np.abs(R - np.eye(2))) < 1e-15


def test_gamma_j_flips_radial_sign():
    e = make_radial(RadialSpec(1.5, b=1.0))
    t = pushforward(e, LiouvilleTransform.constant(e.interval, J))
    ys = ys_of(e)
    Q, _ = coeffs(e, ys)
    Qt, Rt = coeffs(t, ys)
    assert np.max(np.abs(Qt[:, 0, 1] + Q[:, 0, 1]) * ys) < 1e-14
    assert np.max(np.abs(Rt - np.eye(2))) < 1e-15


@pytest.mark.parametrize("R,gamma", [
    (np.eye(2), np.eye(2)),
    # det(4I) = 16, so eta' = 4 and Gamma = sqrt(4 (4I)^-1) = I
    (4 * np.eye(2), np.eye(2)),
    (np.diag([1.0, 4.0]), np.diag([math.sqrt(2), 1 / math.sqrt(2)])),
])
def test_normalize_weight_constant(R, gamma):
    e = DiracExpression.from_entries((0, 1), np.zeros((2, 2)), R)
    t, T = normalize_weight(e)
    xs = np.linspace(0.1, 0.9, 5)
    assert np.max(np.abs(T.gamma(xs) - gamma)) < 1e-14
    k = math.sqrt(np.linalg.det(R))
    assert np.max(np.abs(T.eta(xs) - k * xs)) < 1e-14
    _, Rt = coeffs(t, ys_of(t))
    assert np.max(np.abs(Rt - np.eye(2))) < 1e-14


def test_normalize_weight_smooth():
    t, T = normalize_weight(smooth_expr())
    Q, R = coeffs(t, ys_of(t, 101))
    assert np.max(np.abs(R - np.eye(2))) < 1e-9
    assert np.max(np.abs(Q - np.swapaxes(Q, -1, -2))) < 1e-12
    G = T.gamma(np.linspace(0.05, 0.95, 7))
    assert np.max(np.abs(G - np.swapaxes(G, -1, -2))) < 1e-14
    assert np.max(np.abs(np.linalg.det(G) - 1)) < 1e-10


def test_normalize_trace():
    e = DiracExpression.from_entries((0, 1), [["1", "0"], ["0", "1"]])
    t, T = normalize_trace(e)
    Q, _ = coeffs(t, ys_of(t))
    assert np.max(np.abs(np.trace(Q, axis1=1, axis2=2))) < 1e-12
    # phi = x: Q~ = e^{-xJ} I e^{xJ} - I = 0
    assert np.max(np.abs(Q)) < 1e-12
    zero_tr = DiracExpression.from_entries((0, 1), [["x", "1"], ["1", "-x"]])
    _, T0 = normalize_trace(zero_tr)
    assert np.max(np.abs(T0.gamma(np.linspace(0.1, 0.9, 5)) - np.eye(2))) < 1e-14
    rad = make_radial(RadialSpec(1.0, "x", "0", 1.0))
    tr, _ = normalize_trace(rad)
    ys = ys_of(rad)
    assert np.max(np.abs((coeffs(tr, ys)[0] - coeffs(rad, ys)[0]) * ys[:, None, None])) < 1e-13


def test_normalize_trace_smooth():
    e = DiracExpression.from_entries((0, 1), SMOOTH_Q)
    t, _ = normalize_trace(e)
    Q, _ = coeffs(t, ys_of(t, 101))
    assert np.max(np.abs(np.trace(Q, axis1=1, axis2=2))) < 1e-9


def test_kill_potential_zero():
    e = DiracExpression.from_entries((0, 1), np.zeros((2, 2)), SMOOTH_R)
    _, T = kill_potential(e)
    assert np.max(np.abs(T.gamma(np.linspace(0, 1, 9)) - np.eye(2))) < 1e-14


def test_kill_potential_constant():
    q = 1.3
    Q = np.diag([q, -q])
    e = DiracExpression.from_entries((0, 2), Q)
    t, T = kill_potential(e)
    xs = np.linspace(0.05, 1.95, 9)
    ref = np.array([expm(x * J @ Q) for x in xs])
    assert np.max(np.abs(T.gamma(xs) - ref)) < 1e-11
    Qt, Rt = coeffs(t, xs)
    assert np.max(np.abs(Qt)) < 1e-9
    assert np.max(np.abs(Rt - np.swapaxes(ref, 1, 2) @ ref)) < 1e-10


def test_kill_potential_smooth():
    t, T = kill_potential(smooth_expr())
    xs = np.linspace(0, 1, 201)
    assert np.max(np.abs(np.linalg.det(T.gamma(xs)) - 1)) < 1e-10
    Q, _ = coeffs(t, ys_of(t, 101))
    assert np.max(np.abs(Q)) < 1e-9


def test_normalize_det():
    e = DiracExpression.from_entries((0, 1), [["x", "0"], ["0", "0"]], [["1+x", "0"], ["0", "1/(1+x)"]])
    _, T = normalize_det(e)
    xs = np.linspace(0.1, 0.9, 5)
    assert np.max(np.abs(T.eta(xs) - xs)) < 1e-13
    e4 = DiracExpression.from_entries((0, 1), np.zeros((2, 2)), 4 * np.eye(2))
    t4, _ = normalize_det(e4)
    Q, R = coeffs(t4, ys_of(t4))
    assert np.max(np.abs(np.linalg.det(R) - 1)) < 1e-14 and np.max(np.abs(Q)) == 0
    ts, _ = normalize_det(smooth_expr())
    Q, R = coeffs(ts, ys_of(ts, 101))
    assert np.max(np.abs(np.linalg.det(R) - 1)) < 1e-9
    assert np.min(np.abs(Q).max(axis=(1, 2))) > 0


def test_gauge_rotate():
    e = smooth_expr()
    t, _ = gauge_rotate(e, 0.0)
    ys = ys_of(e)
    assert np.max(np.abs(coeffs(t, ys)[0] - coeffs(e, ys)[0])) < 1e-15
    free = DiracExpression.free(0, 1)
    t, _ = gauge_rotate(free, "x")
    Q, _ = coeffs(t, ys)
    assert np.max(np.abs(Q + np.eye(2))) < 1e-14
    t, T = gauge_rotate(free, "x", eta0=2.0)
    assert (t.interval.a, t.interval.b) == (2.0, 3.0)


def test_rotation_breaks_radial_pattern():
    e = make_radial(RadialSpec(1.0, b=1.0))
    d0, k0 = radial_form_defect(e)
    assert d0 < 1e-12 and abs(k0 - 1) < 1e-12
    for phi in (0.3, 1.0):
        t, _ = gauge_rotate(e, phi, validate=False)
        d, k = radial_form_defect(t)
        assert abs(d - abs(math.sin(2 * phi))) < 1e-9 and abs(k - math.cos(2 * phi)) < 1e-9
    t, _ = gauge_rotate(e, math.pi, validate=False)
    assert radial_form_defect(t)[0] < 1e-9


def test_compose_and_inverse():
    e = smooth_expr()
    T1 = LiouvilleTransform.rotation(e.interval, "0.3+0.4*sin(2*x)", eta0=0.5)
    e1 = pushforward(e, T1)
    T2 = LiouvilleTransform.from_expressions(e1.interval, "x+x^2/4", [["1", "0"], ["x", "1"]])
    twice = pushforward(e1, T2)
    once = pushforward(e, compose(T2, T1))
    ys = ys_of(twice, 41)
    for A, B in zip(coeffs(twice, ys), coeffs(once, ys)):
        assert np.max(np.abs(A - B)) < 1e-10
    back = pullback(once, compose(T2, T1))
    xs = ys_of(e, 41)
    for A, B in zip(coeffs(back, xs), coeffs(e, xs)):
        assert np.max(np.abs(A - B)) < 1e-10
    for T in (T1, T2, compose(T2, T1), T1.inverse(), normalize_weight(e)[1], kill_potential(e)[1]):
        assert T.check()["det_defect"] < 1e-10


def test_push_boundary():
    e = DiracExpression.free(0, 1)
    T = LiouvilleTransform.rotation(e.interval, 0.4)
    bc = push_boundary(BoundaryCondition.from_angle(0.0, "right"), T)
    assert abs(bc.angle - (-0.4)) < 1e-14 or abs(abs(bc.angle - (-0.4)) - math.pi) < 1e-14


def test_harness_identity():
    e = smooth_expr()
    rep = invariance_harness(e, LiouvilleTransform.identity(e.interval), BoundaryCondition.from_angle(0.7, "right"),
                             BoundaryCondition.from_angle(0.3), window=(-10, 10))
    assert rep.max_deviation < 1e-9 and rep.n_eigenvalues[0] > 0


def test_harness_rotated_free():
    e = DiracExpression.free(0, math.pi)
    rep = invariance_harness(e, LiouvilleTransform.rotation(e.interval, 0.6), BoundaryCondition.from_angle(0.0, "right"),
                             BoundaryCondition.from_angle(0.0), window=(-6.5, 6.5))
    assert rep.eigenvalue_distance < 1e-7 and rep.n_eigenvalues == (13, 13)


def test_harness_weight_diag():
    e = DiracExpression.from_entries((0, 1), np.zeros((2, 2)), np.diag([1.0, 4.0]))
    t, T = normalize_weight(e)
    rep = invariance_harness(e, T, BoundaryCondition.from_angle(0.0, "right"), BoundaryCondition.from_angle(0.0),
                             window=(-10, 10), expr_tilde=t)
    assert rep.eigenvalue_distance < 1e-7 and rep.max_deviation < 1e-7


def test_transform_from_json():
    e = smooth_expr()
    T = transform_from_json(e, {"eta": "cumulative:detR", "gamma": "weight-sqrt"})
    assert T.check()["det_defect"] < 1e-10
    with pytest.raises(ValueError):
        transform_from_json(e, {"gamma": "nonsense"})


def test_rigidity():
    a = RadialSpec(1.0)
    same = rigidity_check(a, a, window=(-10, 10))
    assert same["first_moment_discrepancy"] == 0 and same["spectral_distance"] == 0
    other = rigidity_check(a, RadialSpec(1.0, "0.5", "0"), window=(-10, 10))
    assert other["spectral_distance"] > 1e-3
