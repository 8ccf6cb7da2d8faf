from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from diracweyl import DiracExpression, LiouvilleTransform, parse_coefficient, pushforward, transfer_matrix, wronskian

finite = st.floats(-5, 5, allow_nan=False)
cplx = st.builds(complex, finite, st.floats(-2, 2, allow_nan=False))


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=4, max_size=4))
def test_wronskian_bilinear_antisymmetric(v):
    f, g = np.array(v[:2]), np.array(v[2:])
    assert abs(wronskian(f, g) + wronskian(g, f)) < 1e-12 * (1 + abs(wronskian(f, g)))
    assert abs(wronskian(2 * f, g) - 2 * wronskian(f, g)) < 1e-12 * (1 + abs(wronskian(f, g)))


@settings(max_examples=20, deadline=None)
@given(cplx, st.floats(0.05, 0.95), st.floats(-2, 2), st.floats(-2, 2))
def test_transfer_det_one(z, x1, q, s):
    e = DiracExpression.from_entries((0, 1), [[f"{q!r}*sin(x)", f"{s!r}"], [f"{s!r}", "x"]],
                                     [["2", "0.3"], ["0.3", "1+x^2"]])
    T = transfer_matrix(e, z, 0.0, x1)
    assert abs(np.linalg.det(T) - 1) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.5, 3), st.floats(-3, 3))
def test_pretty_roundtrip_generated(a, k, b):
    text = f"{a!r}*sin({k!r}*x)-({b!r})^2/(1+x^2)+exp(-x)"
    f = parse_coefficient(text)
    xs = np.linspace(-2, 2, 100)
    assert np.max(np.abs(parse_coefficient(f.pretty())(xs) - f(xs))) < 1e-14 * (1 + np.max(np.abs(f(xs))))


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-1, 1))
def test_rotation_pushforward_roundtrip(phi, eta0):
    e = DiracExpression.from_entries((0, 1), [["sin(x)", "x"], ["x", "1"]], [["1+x", "0.2"], ["0.2", "2"]])
    T = LiouvilleTransform.rotation(e.interval, phi, eta0=eta0)
    back = pushforward(pushforward(e, T), T.inverse())
    xs = np.linspace(0.05, 0.95, 11)
    for A, B in zip(back.coefficients(xs), e.coefficients(xs)):
        assert np.max(np.abs(A - B)) < 1e-13
