from __future__ import annotations

import math

import numpy as np
import pytest

from diracweyl import (BoundaryCondition, DiracExpression, RadialSpec, Realization, WeylFunction, eigenvalues,
                       herglotz_check, left_frame, make_radial, set_distance, spectral_measure, stieltjes_mass,
                       two_spectra_report)
from diracweyl.weyl import interlacing_violations, weyl_solution
from oracles import free_m_interval, spherical_j1_zeros

LEFT0 = BoundaryCondition.from_angle(0.0, "left")
R_F1 = BoundaryCondition.from_angle(0.0, "right")
R_F2 = BoundaryCondition.from_angle(math.pi / 2, "right")


def free_weyl(right=R_F1, b=math.pi):
    e = DiracExpression.free(0, b)
    return WeylFunction(left_frame(e, LEFT0), right)


def halfline_weyl():
    e = DiracExpression.free(0, math.inf)
    return WeylFunction(left_frame(e, LEFT0), BoundaryCondition.limit_point("right"))


def test_halfline_m_is_i():
    zs = np.array([0.5j, 2 + 1j, -3 + 0.1j, 4j])
    assert np.max(np.abs(halfline_weyl()(zs) - 1j)) < 1e-8


def test_halfline_weyl_solution_decays():
    W = halfline_weyl()
    z = 1 + 1j
    m, psi = weyl_solution(W, z)
    v = psi[0]
    # proportional to e^{izx}(1, i)
    assert abs(v[1] / v[0] - 1j) < 1e-8


def test_interval_psi():
    W = free_weyl()
    z = 0.7 + 0.4j
    psi = W.psi(z)[0]
    x = W.m
    ref = np.array([np.sin(z * (x - math.pi)), np.cos(z * (x - math.pi))])
    assert abs(psi[0] * ref[1] - psi[1] * ref[0]) < 1e-12 * np.abs(psi).max() * np.abs(ref).max()


def test_truncation_stability():
    e = DiracExpression.free(0, math.inf)
    frame = left_frame(e, LEFT0)
    ms = [WeylFunction(frame, BoundaryCondition.truncated(xb, 0.0))(1j) for xb in (10.0, 20.0, 40.0)]
    # with f1(x_b) = 0 the truncated M is i coth(x_b) = i (1 + 2 e^{-2 x_b} + ...)
    for m, xb in zip(ms, (10.0, 20.0, 40.0)):
        assert abs(m - 1j / math.tanh(xb)) < 1e-12
    assert abs(ms[0] - ms[1]) < 2.0001 * math.exp(-20) and abs(ms[1] - ms[2]) < 2.0001 * math.exp(-40) + 1e-15


def test_interval_m_cot():
    rng = np.random.default_rng(5)
    zs = rng.uniform(-6, 6, 10) + 1j * rng.uniform(0.05, 3, 10)
    W = free_weyl()
    ref = np.array([free_m_interval(z) for z in zs])
    assert np.max(np.abs(W(zs) - ref)) < 1e-9


def test_reflection():
    e = DiracExpression.from_entries((0, 1), [["sin(x)", "1"], ["1", "x"]], [["2", "0.1"], ["0.1", "1+x"]])
    W = WeylFunction(left_frame(e, BoundaryCondition.from_angle(0.3)), BoundaryCondition.from_angle(1.1, "right"))
    rng = np.random.default_rng(6)
    zs = rng.uniform(-5, 5, 10) + 1j * rng.uniform(0.1, 3, 10)
    assert np.max(np.abs(W(zs.conj()) - W(zs).conj())) < 1e-10


def test_matching_point_independence():
    e = DiracExpression.from_entries((0, 1), [["sin(x)", "1"], ["1", "x"]], [["2", "0.1"], ["0.1", "1+x"]])
    frame = left_frame(e, BoundaryCondition.from_angle(0.3))
    right = BoundaryCondition.from_angle(1.1, "right")
    zs = np.array([2 + 1j, -7 + 0.5j])
    m1 = WeylFunction(frame, right, matching=0.3)(zs)
    m2 = WeylFunction(frame, right, matching=0.8)(zs)
    assert np.max(np.abs(m1 - m2)) < 1e-10


def test_integer_and_half_integer_spectra():
    S = eigenvalues(free_weyl(R_F1), (-10.5, 10.5)).eigenvalues
    T = eigenvalues(free_weyl(R_F2), (-10.5, 10.5)).eigenvalues
    assert np.max(np.abs(S - np.arange(-10, 11))) < 1e-9
    assert np.max(np.abs(T - (np.arange(-11, 11) + 0.5))) < 1e-9
    assert interlacing_violations(S, T) == 0


def test_eigenvalues_are_poles():
    W = free_weyl()
    lam = eigenvalues(W, (-3.5, 3.5)).eigenvalues
    assert np.all(np.abs(W(lam - 1e-7j)) > 1e6)


def test_atoms_and_norming():
    mu = spectral_measure(free_weyl(), (-5.5, 5.5), estimate_m_c=False, n_grid=5)
    assert len(mu.atoms) == 11
    assert np.max(np.abs(mu.atoms[:, 1] - 1 / math.pi)) < 1e-6
    assert mu.meta["norming_check_max_dev"] < 1e-5
    assert not mu.flags


def test_halfline_density():
    mu = spectral_measure(halfline_weyl(), (-3, 3), n_grid=7, estimate_m_c=False)
    assert len(mu.atoms) == 0
    assert np.max(np.abs(mu.density[:, 1] - 1 / math.pi)) < 1e-6


def test_empty_window():
    mu = spectral_measure(free_weyl(), (0.2, 0.8), n_grid=9, estimate_m_c=False)
    assert len(mu.atoms) == 0
    assert mu.total_mass() < 1e-8


def test_herglotz():
    rep = herglotz_check(halfline_weyl(), [1j, 2 + 0.5j])
    assert rep["ok"] and abs(rep["min_signed_imag"] - 1) < 1e-8
    W = free_weyl()
    assert abs(W(1j) - 1j / math.tanh(math.pi)) < 1e-10
    rep = herglotz_check(W, [1j, -3 + 0.2j, 2.5 - 1j])
    assert rep["ok"] and rep["reflection_defect"] < 1e-10


def test_stieltjes_vs_atoms():
    W = free_weyl()
    mass, _ = stieltjes_mass(W, -2.5, 2.5, atoms=[-2, -1, 0, 1, 2])
    assert abs(mass - 5 / math.pi) < 1e-4


def test_radial_kappa1_eigenvalues():
    W = WeylFunction(left_frame(make_radial(RadialSpec(1.0, b=1.0))), R_F1)
    lam = eigenvalues(W, (0.5, 20)).eigenvalues
    ref = spherical_j1_zeros(6)
    ref = ref[ref < 20]
    assert len(lam) == len(ref)
    assert np.max(np.abs(lam - ref)) < 1e-9


def test_two_spectra_identical():
    e = DiracExpression.free(0, math.pi)
    S = Realization(e, LEFT0, R_F1)
    T = Realization(e, BoundaryCondition.from_angle(math.pi / 2), R_F1)
    rep = two_spectra_report(S, T, S, T, (-5, 5))
    assert rep["distance_S"] == 0 and rep["distance_T"] == 0
    assert rep["interlacing_violations"] == 0
    assert rep["distance_zeros_T"] < 1e-9 and rep["ok"]


def test_set_distance():
    assert set_distance([1, 2], [1, 2.5]) == 0.5
    assert set_distance([], []) == 0
    assert set_distance([1], []) == math.inf
