from __future__ import annotations

import math

import numpy as np
import pytest

from diracweyl import EvaluationDomainError, ParseError, parse_coefficient


def test_zero_is_constant():
    f = parse_coefficient("0")
    assert f.is_constant
    assert np.all(f(np.linspace(-3, 3, 7)) == 0)


def test_reciprocal():
    assert parse_coefficient("1/x")(2.0) == 0.5


def test_mixed_expression():
    assert abs(float(parse_coefficient("sin(3*x)+x^2")(1.0)) - 1.14112000806) < 1e-11


@pytest.mark.parametrize("text,x,expected", [
    ("2^(3^2)", 0.0, 512.0),
    ("-x^2", 3.0, -9.0),
    ("exp(log(x))", 2.5, 2.5),
    ("sqrt(x)*sqrt(x)", 7.0, 7.0),
    ("pi", 0.0, math.pi),
    ("cos(x)^2+sin(x)^2", 0.7, 1.0),
    ("abs(-x)", 2.0, 2.0),
    ("1e-3*x", 2.0, 2e-3),
])
def test_evaluation(text, x, expected):
    assert abs(float(parse_coefficient(text)(x)) - expected) < 1e-13 * max(1, abs(expected))


def test_parse_error_position_and_expected():
    with pytest.raises(ParseError) as info:
        parse_coefficient("1+*x")
    assert info.value.pos == 2
    assert info.value.expected
    with pytest.raises(ParseError):
        parse_coefficient("sin(x")
    with pytest.raises(ParseError):
        parse_coefficient("foo(x)")
    # one exponent per factor: chains need parentheses
    with pytest.raises(ParseError):
        parse_coefficient("2^3^2")


def test_domain_error_reports_x():
    f = parse_coefficient("log(x)")
    with pytest.raises(EvaluationDomainError) as info:
        f(np.array([1.0, -2.0]))
    assert info.value.x == -2.0


def test_pretty_roundtrip():
    rng = np.random.default_rng(1)
    xs = rng.uniform(0.1, 3.0, 100)
    for text in ["sin(3*x)+x^2", "-x^2/(1+x)", "exp(-x)*cos(2*x)-3", "x^-0.5", "2^(x^2)"]:
        f = parse_coefficient(text)
        g = parse_coefficient(f.pretty())
        assert np.max(np.abs(f(xs) - g(xs))) < 1e-14 * np.max(np.abs(f(xs)) + 1)


def test_complex_step_derivative():
    f = parse_coefficient("sin(3*x)+x^2")
    xs = np.linspace(0.1, 2, 5)
    assert np.max(np.abs(f.derivative(xs) - (3 * np.cos(3 * xs) + 2 * xs))) < 1e-13
