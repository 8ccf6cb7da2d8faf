from __future__ import annotations

import math

import numpy as np
import pytest

from diracweyl import (DiracExpression, HypothesisError, Interval, RadialSpec, as_matrix_field,
                       check_local_integrability, make_radial, validate_hypotheses)


def test_radial_kappa0_is_free():
    e = make_radial(RadialSpec(0.0))
    xs = np.linspace(0.1, 5, 9)
    Q, R = e.coefficients(xs)
    assert np.all(Q == 0) and np.all(R == np.eye(2))
    assert e.interval.b == math.inf


def test_radial_entries():
    e = make_radial(RadialSpec(1.0))
    xs = np.array([0.01, 0.5, 3.0])
    Q, _ = e.coefficients(xs)
    assert np.allclose(Q[:, 0, 1], 1 / xs, rtol=0, atol=1e-15 / xs.min())
    assert np.all(Q[:, 0, 0] == 0) and np.all(Q[:, 1, 1] == 0)


def test_radial_pattern_with_potentials():
    e = make_radial(RadialSpec(2.0, "x", "cos(x)"))
    xs = np.array([0.2, 1.3])
    Q, _ = e.coefficients(xs)
    assert np.allclose(Q[:, 0, 0], xs, rtol=1e-15)
    assert np.allclose(Q[:, 1, 1], -xs, rtol=1e-15)
    assert np.allclose(Q[:, 0, 1], 2 / xs + np.cos(xs), rtol=1e-15)


def test_radial_negative_kappa_rejected():
    with pytest.raises(ValueError):
        make_radial(RadialSpec(-0.5))


def test_radial_half_log_integrable_accepted():
    e = make_radial(RadialSpec(0.5, "x^-0.5", "0", 2.0))
    assert e.radial.kappa == 0.5


def test_validate_free():
    rep = validate_hypotheses(DiracExpression.free(0, 1))
    assert rep.symmetry_residual == 0.0
    assert rep.min_eig_R == 1.0


def test_validate_min_eigenvalue():
    e = DiracExpression.from_entries((0, 1), np.zeros((2, 2)), [[1.0, 0.5], [0.5, 1.0]])
    assert abs(validate_hypotheses(e).min_eig_R - 0.5) < 1e-14


def test_validate_asymmetric_q_fails_at_x():
    e = DiracExpression.from_entries((0, 1), [["0", "x"], ["0", "0"]])
    with pytest.raises(HypothesisError) as info:
        validate_hypotheses(e)
    assert info.value.x is not None and 0 < info.value.x < 1


def test_validate_indefinite_r_fails_at_x():
    e = DiracExpression.from_entries((0, 2), np.zeros((2, 2)), [["1", "0"], ["0", "x-1"]])
    with pytest.raises(HypothesisError) as info:
        validate_hypotheses(e)
    assert info.value.x <= 1.0 + 1e-12


def test_grid_field():
    xs = np.linspace(0, 1, 41)
    vals = np.zeros((41, 2, 2))
    vals[:, 0, 0] = np.sin(xs)
    vals[:, 0, 1] = vals[:, 1, 0] = xs ** 2
    vals[:, 1, 1] = 1.0
    F = as_matrix_field({"x": xs.tolist(), "values": vals.tolist()})
    t = np.array([0.33, 0.71])
    out = F(t)
    assert np.max(np.abs(out[:, 0, 0] - np.sin(t))) < 1e-5
    assert np.max(np.abs(out[:, 0, 1] - t ** 2)) < 1e-5
    e = DiracExpression(Interval(0, 1), F, as_matrix_field({"family": "identity"}))
    assert validate_hypotheses(e).symmetry_residual < 1e-12


def test_local_integrability():
    ok, _ = check_local_integrability(DiracExpression.from_entries((0, 1), [["x^-0.5", "0"], ["0", "0"]]), "left")
    assert ok
    ok, _ = check_local_integrability(make_radial(RadialSpec(1.0, b=1.0)), "left")
    assert not ok
    ok, _ = check_local_integrability(DiracExpression.free(0, math.inf), "right")
    assert not ok


def test_interval():
    iv = Interval(0, "inf")
    assert iv.finite_left and not iv.finite_right
    with pytest.raises(ValueError):
        Interval(1, 0)
