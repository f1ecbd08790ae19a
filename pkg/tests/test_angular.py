from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan as sym_cg
from sympy.physics.wigner import wigner_6j as sym_6j

from obe_steady.angular import (
    AngularMomentum,
    as_two,
    clebsch_gordan,
    clebsch_gordan_exact,
    injected_cg_sign_error,
    legendre,
    projections,
    scaled_legendre,
    wigner6j,
    wigner_d_small,
)


def _half(t):
    return Rational(t, 2)


def _angular_j_matrices(tj):
    # J_y in the descending |j m> basis, built from the ladder operators
    j = tj / 2
    ms = [t / 2 for t in projections(tj)]
    jp = np.zeros((tj + 1, tj + 1))
    for k in range(1, tj + 1):
        m = ms[k]
        jp[k - 1, k] = math.sqrt(j * (j + 1) - m * (m + 1))
    return (jp - jp.T) / 2j


def test_angular_momentum_type():
    j = AngularMomentum.of("3/2")
    assert j.two_j == 3 and j.dim == 4 and not j.is_integer
    assert j.projections() == [3, 1, -1, -3]
    assert AngularMomentum.of(2).is_integer
    assert str(j) == "3/2"
    with pytest.raises(ValueError):
        AngularMomentum(-1)
    with pytest.raises(ValueError):
        as_two(0.3)


def test_cg_handbook_values():
    assert clebsch_gordan(0, 0, 0, 0, 0, 0) == 1.0
    assert clebsch_gordan(0.5, 0.5, 0.5, 0.5, 1, 1) == pytest.approx(1.0, abs=1e-15)
    assert clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1, 0) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert clebsch_gordan(1, 1, 1, -1, 0, 0) == pytest.approx(1 / math.sqrt(3), abs=1e-15)


def test_cg_selection_rules_and_parity():
    assert clebsch_gordan(1, 1, 1, 1, 1, 1) == 0.0  # M != m1 + m2
    assert clebsch_gordan(1, 0, 1, 0, 3, 0) == 0.0  # triangle
    assert clebsch_gordan(1, 0, 1, 0, 1, 0) == 0.0  # parity zero
    with pytest.raises(ValueError):
        clebsch_gordan(1, 0.5, 1, 0, 1, 0.5)


def test_cg_matches_sympy_everywhere_small():
    for tj1 in range(0, 5):
        for tj2 in range(0, 5):
            for tJ in range(abs(tj1 - tj2), tj1 + tj2 + 1, 2):
                for tm1 in projections(tj1):
                    for tm2 in projections(tj2):
                        tM = tm1 + tm2
                        if abs(tM) > tJ:
                            continue
                        ref = float(sym_cg(_half(tj1), _half(tj2), _half(tJ), _half(tm1), _half(tm2), _half(tM)))
                        got = clebsch_gordan(tj1 / 2, tm1 / 2, tj2 / 2, tm2 / 2, tJ / 2, tM / 2)
                        assert got == pytest.approx(ref, abs=1e-13)


def test_cg_exact_form():
    sign, sq = clebsch_gordan_exact(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2), Fraction(-1, 2), 1, 0)
    assert sign == 1 and sq == Fraction(1, 2)


@pytest.mark.parametrize("tj1,tj2", [(2, 2), (3, 4), (8, 8), (5, 7)])
def test_cg_orthogonality(tj1, tj2):
    Js = list(range(abs(tj1 - tj2), tj1 + tj2 + 1, 2))
    for tM in range(-(tj1 + tj2), tj1 + tj2 + 1, 2):
        rows = []
        for tJ in Js:
            if abs(tM) > tJ:
                continue
            rows.append([
                clebsch_gordan(tj1 / 2, tm1 / 2, tj2 / 2, (tM - tm1) / 2, tJ / 2, tM / 2)
                if abs(tM - tm1) <= tj2 else 0.0
                for tm1 in projections(tj1)
            ])
        A = np.array(rows)
        assert np.abs(A @ A.T - np.eye(len(rows))).max() < 1e-12


def test_cg_large_momenta_accurate():
    # exact rational evaluation keeps the top of the range accurate
    ref = float(sym_cg(10, Rational(19, 2), Rational(39, 2), 3, Rational(-1, 2), Rational(5, 2)))
    assert clebsch_gordan(10, 3, 9.5, -0.5, 19.5, 2.5) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        clebsch_gordan(21, 0, 1, 0, 21, 0)


def test_sixj_values():
    assert wigner6j(1, 1, 1, 1, 1, 1) == pytest.approx(1 / 6, abs=1e-15)
    assert wigner6j(1, 1, 3, 1, 1, 1) == 0.0  # triangle fails
    expect = (-1) ** 3 / math.sqrt(3 * 3)
    assert wigner6j(1, 1, 1, 0, 1, 1) == pytest.approx(expect, abs=1e-15)


def test_sixj_matches_sympy():
    rng = np.random.default_rng(3)
    done = 0
    while done < 200:
        t = [int(x) for x in rng.integers(0, 9, size=6)]
        got = wigner6j(*[x / 2 for x in t])
        triads = ((0, 1, 2), (0, 4, 5), (3, 1, 5), (3, 4, 2))
        if any((t[i] + t[j] + t[k]) % 2 for i, j, k in triads):
            assert got == 0.0
            continue
        ref = float(sym_6j(*[_half(x) for x in t]))
        assert got == pytest.approx(ref, abs=1e-13)
        done += 1


@given(st.lists(st.integers(0, 8), min_size=6, max_size=6))
def test_sixj_symmetries(t):
    a, b, c, d, e, f = [x / 2 for x in t]
    base = wigner6j(a, b, c, d, e, f)
    for perm in ((b, a, c, e, d, f), (a, c, b, d, f, e), (c, b, a, f, e, d)):
        assert wigner6j(*perm) == pytest.approx(base, abs=1e-13)
    # swap upper and lower entries in two columns
    assert wigner6j(d, e, c, a, b, f) == pytest.approx(base, abs=1e-13)
    assert wigner6j(a, e, f, d, b, c) == pytest.approx(base, abs=1e-13)


def test_scaled_legendre_values():
    for L in range(11):
        assert scaled_legendre(L, 1.0) == pytest.approx(1.0, abs=1e-13)
    for x in (0.0, 0.3, -2.0, 1j):
        assert scaled_legendre(1, x) == pytest.approx(1.0)
    # x**2 P_2(1/x) = (3 - x**2)/2, so the constant term is 3/2
    assert scaled_legendre(2, 0.0) == pytest.approx(1.5, abs=1e-15)


def test_scaled_legendre_limit_high_precision():
    import mpmath

    mpmath.mp.dps = 50
    for L in range(0, 8):
        x = mpmath.mpf("1e-12")
        ref = x**L * mpmath.legendre(L, 1 / x)
        assert scaled_legendre(L, 0.0) == pytest.approx(float(ref), rel=1e-10)


def test_scaled_legendre_matches_definition(rng):
    x = rng.uniform(0.2, 3, size=20)
    for L in range(8):
        assert np.allclose(scaled_legendre(L, x), x**L * legendre(L, 1 / x), rtol=1e-11)


def test_scaled_legendre_recurrence(rng):
    x = rng.normal(size=20) + 1j * rng.normal(size=20)
    for L in range(1, 12):
        lhs = (L + 1) * scaled_legendre(L + 1, x)
        rhs = (2 * L + 1) * scaled_legendre(L, x) - L * x**2 * scaled_legendre(L - 1, x)
        assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_wigner_d_closed_forms():
    assert np.allclose(wigner_d_small(2, 0.0), np.eye(5))
    th = 0.83
    c, s = math.cos(th / 2), math.sin(th / 2)
    assert np.allclose(wigner_d_small(0.5, th), [[c, -s], [s, c]], atol=1e-15)
    d = wigner_d_small(2, 0.7)
    assert np.abs(d @ d.T - np.eye(5)).max() < 1e-13


@pytest.mark.parametrize("tj", [1, 2, 3, 4, 5, 8])
def test_wigner_d_matches_matrix_exponential(tj):
    th = 1.234
    ref = scipy.linalg.expm(-1j * th * _angular_j_matrices(tj))
    assert np.abs(wigner_d_small(tj / 2, th) - ref).max() < 1e-12


@given(st.integers(0, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_wigner_d_composition(tj, a, b):
    lhs = wigner_d_small(tj / 2, a) @ wigner_d_small(tj / 2, b)
    assert np.abs(lhs - wigner_d_small(tj / 2, a + b)).max() < 1e-12


def test_injected_fault_changes_and_restores():
    before = clebsch_gordan(1, 0, 1, -1, 1, -1)
    with injected_cg_sign_error():
        assert clebsch_gordan(1, 0, 1, -1, 1, -1) == -before
    assert clebsch_gordan(1, 0, 1, -1, 1, -1) == before
