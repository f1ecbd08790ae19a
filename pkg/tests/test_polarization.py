from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import sph_harm_y

from obe_steady.angular import clebsch_gordan, double_factorial, legendre, scaled_legendre
from obe_steady.polarization import (
    ComplexVector3,
    Frame,
    Polarization,
    SphericalTensor,
    circular_pair,
    couple,
    natural_frame_angle,
    polarization_from_ellipticity,
    spherical_dot,
    spherical_harmonic,
    spinor_power,
    spinor_root,
    tensor_power,
)

from conftest import EPSILONS, random_complex_vector

eps_strategy = st.floats(-math.pi / 4, math.pi / 4)


def test_spherical_basis_and_dot():
    ex, ey, ez = (ComplexVector3.from_cartesian(v) for v in np.eye(3))
    assert ez.comps.tolist() == [0, 1, 0]
    # e_{+1} = -(e_x + i e_y)/sqrt(2)
    assert np.allclose(ComplexVector3.basis(1).cartesian(), [-1 / math.sqrt(2), -1j / math.sqrt(2), 0])
    assert ex.dot(ex) == pytest.approx(1) and ex.dot(ey) == pytest.approx(0)
    assert ComplexVector3.basis(1).dot(ComplexVector3.basis(-1)) == pytest.approx(-1)


def test_conjugation_matches_cartesian(rng):
    a = random_complex_vector(rng)
    assert np.allclose(a.conj().cartesian(), np.conj(a.cartesian()))
    # basis vectors obey e*_q = (-1)^q e_{-q}
    for q in (-1, 0, 1):
        assert np.allclose(ComplexVector3.basis(q).conj().comps, ((-1) ** q * ComplexVector3.basis(-q)).comps)


def test_cross_product_matches_cartesian(rng):
    a, b = random_complex_vector(rng), random_complex_vector(rng)
    assert np.allclose(a.cross(b).cartesian(), np.cross(a.cartesian(), b.cartesian()))


def test_ellipticity_examples():
    lin = polarization_from_ellipticity(0.0)
    assert np.allclose(lin.vector.comps, [0, 1, 0])
    circ = polarization_from_ellipticity(math.pi / 4)
    assert circ.scalar_square == 0.0 and circ.is_circular
    assert np.count_nonzero(np.abs(circ.vector.comps) > 1e-15) == 1
    # the frame on the other cylinder carries the circular part in q = +1
    e = polarization_from_ellipticity(math.pi / 8, Frame.NATURAL_MINUS).vector.comps
    assert e[1] == pytest.approx(math.sqrt(math.cos(math.pi / 4)))
    assert e[0] == pytest.approx(-math.sqrt(2) * math.sin(math.pi / 8))
    assert e[2] == 0
    e = polarization_from_ellipticity(math.pi / 8, Frame.NATURAL_PLUS).vector.comps
    assert e[0] == 0 and e[2] == pytest.approx(-math.sqrt(2) * math.sin(math.pi / 8))


def test_conventional_frame_is_the_textbook_ellipse():
    eps = 0.3
    pol = polarization_from_ellipticity(eps, Frame.CONVENTIONAL)
    assert np.allclose(pol.vector.cartesian(), [math.cos(eps), 1j * math.sin(eps), 0])


@given(eps_strategy, st.sampled_from(list(Frame)))
def test_polarization_invariants(eps, frame):
    pol = polarization_from_ellipticity(eps, frame)
    e = pol.vector
    assert e.conj().dot(e) == pytest.approx(1, abs=1e-12)
    assert abs(e.dot(e).imag) < 1e-14
    assert pol.scalar_square == pytest.approx(math.cos(2 * eps), abs=1e-12)
    # |e* x e| = |sin 2 eps| in every frame
    assert abs(np.linalg.norm(e.conj().cross(e).cartesian()) - abs(math.sin(2 * eps))) < 1e-12


def test_frames_are_related_by_a_real_rotation():
    # the Gram matrices of (Re e, Im e) agree, so a rotation maps one onto the other
    eps = 0.27
    grams = []
    for frame in Frame:
        v = polarization_from_ellipticity(eps, frame).vector.cartesian()
        R = np.array([v.real, v.imag])
        grams.append(R @ R.T)
    for g in grams[1:]:
        assert np.allclose(g, grams[0])


def test_polarization_rejects_bad_vectors():
    with pytest.raises(ValueError):
        polarization_from_ellipticity(1.0)
    with pytest.raises(ValueError):
        Polarization(ComplexVector3((0, 2, 0)))
    with pytest.raises(ValueError):
        # normalized but e.e = i is not real
        Polarization(ComplexVector3.from_cartesian(np.array([1, 1j * 0 + 1, 0]) * np.exp(0.25j * math.pi) / math.sqrt(2)))


def test_natural_frame_angle():
    assert natural_frame_angle(math.pi / 4) == pytest.approx(0, abs=1e-7)
    assert natural_frame_angle(0) == pytest.approx(math.pi / 2)
    assert natural_frame_angle(math.pi / 8) == pytest.approx(1.1437, abs=1e-4)
    assert natural_frame_angle(-math.pi / 8) == natural_frame_angle(math.pi / 8)


def test_tensor_power_examples():
    a = ComplexVector3((0.3, 0.1j, -0.7))
    assert np.allclose(tensor_power(a, 1).comps, a.comps)
    # a vector with only the q = +1 component stretches into M = L
    for L in range(1, 7):
        t = tensor_power(ComplexVector3((1, 0, 0)), L).comps
        assert t[0] == pytest.approx(1) and np.allclose(t[1:], 0)
    t = tensor_power(ComplexVector3.basis(0), 2).comps
    assert np.allclose(t, [0, 0, math.sqrt(2 / 3), 0, 0])


def test_tensor_power_by_direct_contraction(rng):
    # {a x {a x a}_2}_3 summed out by hand with the coupling coefficients
    a = random_complex_vector(rng)
    comp = dict(zip((1, 0, -1), a.comps))
    two = {M: sum(clebsch_gordan(1, m, 1, M - m, 2, M) * comp[m] * comp[M - m]
                  for m in (1, 0, -1) if abs(M - m) <= 1) for M in range(-2, 3)}
    three = [sum(clebsch_gordan(1, m, 2, M - m, 3, M) * comp[m] * two[M - m]
                 for m in (1, 0, -1) if abs(M - m) <= 2) for M in range(3, -4, -1)]
    assert np.allclose(tensor_power(a, 3).comps, three)


@pytest.mark.parametrize("L", range(0, 7))
def test_harmonic_of_real_direction_is_racah_harmonic(L, rng):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    theta, phi = math.acos(v[2]), math.atan2(v[1], v[0])
    ref = [math.sqrt(4 * math.pi / (2 * L + 1)) * sph_harm_y(L, M, theta, phi) for M in range(L, -L - 1, -1)]
    n = spherical_harmonic(ComplexVector3.from_cartesian(v), L).comps
    assert np.allclose(n, ref, atol=1e-12)


def test_harmonic_along_z():
    for L in range(6):
        n = spherical_harmonic(ComplexVector3.basis(0), L).comps
        assert np.allclose(n, np.eye(2 * L + 1)[L])


def test_harmonic_scale_invariance(rng):
    a = random_complex_vector(rng)
    for L in range(7):
        n1 = spherical_harmonic(a, L).comps
        n2 = spherical_harmonic(a * 2.3j, L).comps
        # the principal square root fixes the overall sign only up to (-1)**L
        assert min(np.abs(n2 - n1).max(), np.abs(n2 + n1).max()) < 1e-12
        if L % 2 == 0:
            assert np.abs(n2 - n1).max() < 1e-12
        assert spherical_dot(spherical_harmonic(a, L), spherical_harmonic(a, L)) == pytest.approx(1, abs=1e-11)


def test_harmonic_rejects_isotropic_vector():
    with pytest.raises(ZeroDivisionError):
        spherical_harmonic(ComplexVector3.basis(1), 2)


def test_spherical_dot_basics():
    e0 = SphericalTensor.from_vector(ComplexVector3.basis(0))
    assert spherical_dot(e0, e0) == 1
    with pytest.raises(ValueError):
        spherical_dot(e0, SphericalTensor(4, np.zeros(5)))


def test_sum_rule(rng):
    for _ in range(10):
        a, b = random_complex_vector(rng), random_complex_vector(rng)
        ra, rb = np.sqrt(complex(a.dot(a))), np.sqrt(complex(b.dot(b)))
        for L in range(7):
            lhs = spherical_dot(spherical_harmonic(a, L), spherical_harmonic(b, L))
            assert lhs == pytest.approx(legendre(L, a.dot(b) / (ra * rb)), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("J", range(1, 9))
def test_tensor_power_norm(J):
    for eps in EPSILONS + (math.pi / 4,):
        e = polarization_from_ellipticity(eps).vector
        got = spherical_dot(tensor_power(e, J), tensor_power(e.conj(), J))
        expect = math.factorial(J) / double_factorial(2 * J - 1) * scaled_legendre(J, math.cos(2 * eps))
        assert got == pytest.approx(expect, abs=1e-12)


def test_harmonic_product_expansion(rng):
    a = random_complex_vector(rng)
    for l1 in range(4):
        for l2 in range(4):
            n1, n2 = spherical_harmonic(a, l1).comps, spherical_harmonic(a, l2).comps
            for i1, m1 in enumerate(range(l1, -l1 - 1, -1)):
                for i2, m2 in enumerate(range(l2, -l2 - 1, -1)):
                    rhs = 0
                    for L in range(abs(l1 - l2), l1 + l2 + 1):
                        M = m1 + m2
                        if abs(M) > L:
                            continue
                        c = clebsch_gordan(l1, 0, l2, 0, L, 0) * clebsch_gordan(l1, m1, l2, m2, L, M)
                        rhs += c * spherical_harmonic(a, L).comps[L - M]
                    assert n1[i1] * n2[i2] == pytest.approx(rhs, abs=1e-10)


def test_product_collapse_rule(rng):
    e = polarization_from_ellipticity(0.31).vector
    for L in range(7):
        for J in range(7):
            for K in range(abs(L - J), L + J + 1):
                if (L + J - K) % 2:
                    continue
                lhs = couple(spherical_harmonic(e, L), spherical_harmonic(e, J), K).comps
                rhs = clebsch_gordan(L, 0, J, 0, K, 0) * spherical_harmonic(e, K).comps
                assert np.allclose(lhs, rhs, atol=1e-10)


@given(eps_strategy, st.integers(1, 8))
def test_vector_times_stretched_power_vanishes(eps, J):
    e = polarization_from_ellipticity(eps).vector
    assert np.abs(couple(e, tensor_power(e, J), J).comps).max() < 1e-12


@given(eps_strategy)
def test_circular_pair_conditions(eps):
    pol = polarization_from_ellipticity(eps)
    c1, c2 = circular_pair(pol)
    x = abs(pol.scalar_square)
    for c in (c1, c2):
        assert abs(c.dot(c)) < 1e-12
        assert abs(pol.vector.dot(c)) < 1e-12
        assert c.conj().dot(c) == pytest.approx(1, abs=1e-12)
    assert abs(c1.conj().dot(c2)) == pytest.approx((1 - x) / (1 + x), abs=1e-12)


def test_circular_pair_limits():
    c1, c2 = circular_pair(polarization_from_ellipticity(math.pi / 4))
    ov = c1.conj().dot(c2)
    assert abs(ov) == pytest.approx(1)
    assert np.allclose(c2.comps, ov * c1.comps)
    # linear along z: the circular vectors e_{+1} and e_{-1} up to phase
    c1, c2 = circular_pair(polarization_from_ellipticity(0.0))
    assert {int(np.argmax(np.abs(c.comps))) for c in (c1, c2)} == {0, 2}
    assert abs(c1.conj().dot(c2)) < 1e-15


def test_spinor_root_squares_back(rng):
    for eps in (0.0, 0.2, 0.5, math.pi / 4):
        for c in circular_pair(polarization_from_ellipticity(eps)):
            chi = spinor_root(c)
            assert np.allclose(spinor_power(chi, 2).comps, c.comps, atol=1e-14)
