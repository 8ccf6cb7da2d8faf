from __future__ import annotations

import math

import numpy as np
import pytest

from diracweyl import (DiracExpression, PropagationSettings, RadialSpec, SolutionState, evolve, lagrange_residual,
                       make_radial, propagate, transfer_matrix, wronskian)
from oracles import brute_solution, free_phi

SMOOTH_Q = [["0.5+sin(3*x)", "0.3*cos(x)"], ["0.3*cos(x)", "x^2-1"]]
SMOOTH_R = [["2+sin(x)", "0.3*cos(2*x)"], ["0.3*cos(2*x)", "1.5+x^2"]]


def smooth_expr():
    return DiracExpression.from_entries((0, 1), SMOOTH_Q, SMOOTH_R)


@pytest.mark.parametrize("z", [0.7, 2 + 1j, -3.5 + 0.2j, 1j])
def test_free_propagation(z):
    st = propagate(DiracExpression.free(), z, SolutionState(0.0, np.array([0, 1], complex)), 2.3)
    expect = np.array([np.sin(z * 2.3), np.cos(z * 2.3)])
    assert np.max(np.abs(st.f - expect)) < 1e-12 * max(1, np.abs(expect).max())


def test_zero_z_zero_q_constant():
    e = DiracExpression.from_entries((0, 2), np.zeros((2, 2)), SMOOTH_R)
    st = propagate(e, 0.0, SolutionState(0.1, np.array([0.3, -1.2], complex)), 1.9)
    assert np.max(np.abs(st.f - [0.3, -1.2])) < 1e-15


def test_radial_zero_z():
    e = make_radial(RadialSpec(1.0))
    st = propagate(e, 0.0, SolutionState(0.05, np.array([0, 0.05], complex)), 3.0)
    assert np.max(np.abs(st.f - [0, 3.0])) < 1e-11


@pytest.mark.parametrize("z", [0.4, 1.5 - 0.5j])
def test_transfer_matrix_free(z):
    x = 1.7
    T = transfer_matrix(DiracExpression.free(), z, 0.0, x)
    c, s = np.cos(z * x), np.sin(z * x)
    assert np.max(np.abs(T - np.array([[c, s], [-s, c]]))) < 1e-12


def test_transfer_identity_and_flow():
    e = smooth_expr()
    z = 3 - 2j
    assert np.max(np.abs(transfer_matrix(e, z, 0.4, 0.4) - np.eye(2))) < 1e-15
    T02 = transfer_matrix(e, z, 0.1, 0.9)
    T12 = transfer_matrix(e, z, 0.5, 0.9)
    T01 = transfer_matrix(e, z, 0.1, 0.5)
    assert np.max(np.abs(T02 - T12 @ T01)) < 1e-10 * np.abs(T02).max()
    assert abs(np.linalg.det(T02) - 1) < 1e-10


def test_transfer_matches_brute_force():
    e = smooth_expr()
    Qf = lambda x: e.coefficients(np.array([x]))[0][0]
    Rf = lambda x: e.coefficients(np.array([x]))[1][0]
    for z in (5.0, 2 + 3j):
        T = transfer_matrix(e, z, 0.0, 1.0)
        for k in range(2):
            ref = brute_solution(Qf, Rf, z, 0.0, np.eye(2)[:, k], 1.0)
            assert np.max(np.abs(T[:, k] - ref)) < 1e-9 * max(1, np.abs(ref).max())


def test_wronskian_examples():
    assert wronskian(np.array([1, 0]), np.array([0, 1])) == 1
    f = np.array([0.3 + 1j, -2.0])
    assert wronskian(f, f) == 0
    for x in np.linspace(0, 3, 5):
        z = 1.3 + 0.4j
        f = np.array([np.sin(z * x), np.cos(z * x)])
        g = np.array([np.cos(z * x), -np.sin(z * x)])
        assert abs(wronskian(f, g) + 1) < 1e-14


def test_wronskian_constant_along_solutions():
    e = smooth_expr()
    z = 4 + 1j
    F0 = np.array([[1.0, 0.2], [0.5, -1.0]], dtype=complex)
    xs = np.linspace(0.05, 1, 12)
    F, _ = evolve(e, z, 0.0, F0, xs, renormalize=False)
    W = wronskian(F[:, 0, :, 0], F[:, 0, :, 1])
    w0 = wronskian(F0[:, 0], F0[:, 1])
    assert np.max(np.abs(W - w0)) < 1e-10


def test_lagrange_real_equal():
    e = smooth_expr()
    assert lagrange_residual(e, 2.5, 2.5, [1, 0], [1, 0], 0.0, 1.0) < 1e-10


def test_lagrange_free_imaginary():
    # f solves at zeta* = -i, g at z = i; f^T g = sinh^2 + cosh^2 = cosh(2x)
    e = DiracExpression.free(0, 2)
    beta = 1.5
    assert lagrange_residual(e, 1j, 1j, [0, 1], [0, 1], 0.0, beta) < 1e-9
    lhs = wronskian(free_phi(-1j, beta), free_phi(1j, beta))
    assert abs(lhs - (-2j) * math.sinh(2 * beta) / 2) < 1e-12


def test_lagrange_smooth():
    assert lagrange_residual(smooth_expr(), 2 + 1j, 1 - 1j, [1, 0.3], [-0.2, 1], 0.0, 1.0) < 1e-8


def test_forward_backward_roundtrip():
    e = smooth_expr()
    s0 = SolutionState(0.2, np.array([0.7, -0.1 + 0.5j]))
    s1 = propagate(e, 6 - 1j, s0, 0.95)
    s2 = propagate(e, 6 - 1j, s1, 0.2)
    assert np.max(np.abs(s2.f - s0.f)) < 1e-10


def test_settings_validation():
    with pytest.raises(ValueError):
        PropagationSettings(rtol=0)
