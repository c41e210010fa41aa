import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frackin import integrals as I
from frackin.errors import DomainError, InvalidInputError

mp.mp.dps = 30


def _mp_c1(alpha, beta1):
    return float(mp.quad(lambda y: y ** alpha / (1 + y ** (2 * beta1)), [0, 1, mp.inf]))


def _mp_c2(alpha, beta2):
    return float(mp.quad(lambda y: y ** alpha / mp.sqrt(1 + y ** (2 * beta2)), [0, 1, mp.inf]))


def test_c1_toy_value():
    # alpha = 0, beta1 = 1: int_0^inf dy/(1+y^2) = pi/2, and p = 1 gives pi/2 / 1
    assert I.c1_closed_form(0.0, 1.0) == pytest.approx(math.pi / 2, rel=1e-15)
    assert I.c1_closed_form(0.0, 2.0) == pytest.approx(math.pi / (4 * math.sin(math.pi / 4)), rel=1e-15)


def test_c1_reference():
    val = I.c1_closed_form(-0.5, 2.0)
    assert val == pytest.approx(2.05234, abs=5e-6)
    assert val == pytest.approx(_mp_c1(-0.5, 2.0), rel=1e-12)
    assert I.c1_quadrature(-0.5, 2.0) == pytest.approx(val, rel=1e-10)


def test_c2_reference():
    # the direct integral, not a closed form, fixes c2(-0.5, 1) = 3.7081
    ref = _mp_c2(-0.5, 1.0)
    assert ref == pytest.approx(3.70815, abs=1e-4)
    assert I.c2_closed_form(-0.5, 1.0) == pytest.approx(ref, rel=1e-12)
    assert I.c2_quadrature(-0.5, 1.0) == pytest.approx(ref, rel=1e-10)
    assert I.c2_closed_form(-0.5, 2.0) == pytest.approx(_mp_c2(-0.5, 2.0), rel=1e-12)


def test_random_sweep_closed_form_vs_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(20):
        beta = rng.uniform(0.3, 4.0)
        a1 = rng.uniform(-1, 2 * beta - 1)
        a2 = rng.uniform(-1, beta - 1)
        for alpha, (cf, cq) in ((a1, (I.c1_closed_form, I.c1_quadrature)), (a2, (I.c2_closed_form, I.c2_quadrature))):
            p = (alpha + 1) / beta
            if min(p, 2 - p if cf is I.c1_closed_form else 1 - p) < 0.02:
                continue  # too close to the poles for an algebraic-weight rule at 1e-9
            assert cq(alpha, beta) == pytest.approx(cf(alpha, beta), rel=1e-9)


@given(st.floats(0.05, 0.95), st.floats(0.3, 3.0), st.floats(1e-3, 1e3))
@settings(max_examples=60, deadline=None)
def test_lemma_homogeneity(p, beta, a):
    a1 = p * 2 * beta - 1  # p*2 in (0,2): fine for the pole-2 case
    a2 = p * beta - 1
    assert I.lemma_direct_pole2(a1, beta, a) == pytest.approx(I.lemma_integral_pole2(a1, beta, a), rel=1e-8)
    assert I.lemma_direct_pole1(a2, beta, a) == pytest.approx(I.lemma_integral_pole1(a2, beta, a), rel=1e-8)
    # exponent of a is (alpha+1)/beta
    r = I.lemma_integral_pole2(a1, beta, 2 * a) / I.lemma_integral_pole2(a1, beta, a)
    assert r == pytest.approx(2 ** (-(a1 + 1) / beta), rel=1e-12)


@pytest.mark.parametrize("fn, alpha, beta", [
    (I.c1_closed_form, -1.0, 2.0), (I.c1_closed_form, 3.0, 2.0), (I.c1_closed_form, 0.0, -1.0),
    (I.c2_closed_form, 1.0, 2.0), (I.c2_closed_form, -1.5, 2.0), (I.c2_quadrature, 0.0, 0.0),
])
def test_domain_errors(fn, alpha, beta):
    with pytest.raises(DomainError):
        fn(alpha, beta)
    with pytest.raises(DomainError):
        I.lemma_integral_pole2(0.0, 2.0, 0.0)


def test_sphere_quadrature_symmetry():
    for dim, order in ((1, 2), (2, 2), (2, 64)):
        q = I.build_sphere_quadrature(dim, 1.3, order)
        assert q.weights.sum() == pytest.approx(1.0, abs=1e-15)
        half = q.size // 2
        assert np.array_equal(q.nodes[half:], -q.nodes[:half])
        assert np.abs(q.weights @ q.nodes).max() < 1e-15
        assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.3, rtol=1e-15)
    with pytest.raises(InvalidInputError):
        I.build_sphere_quadrature(2, 1.0, 3)
    with pytest.raises(InvalidInputError):
        I.build_sphere_quadrature(3)


def test_sphere_moment_exact():
    assert I.sphere_moment(1, 2.0, 1.75) == 2.0 ** 1.75
    ref = mp.quad(lambda t: abs(mp.cos(t)) ** 1.75, [0, mp.pi / 2, mp.pi]) / mp.pi
    assert I.sphere_moment(2, 1.0, 1.75) == pytest.approx(float(ref), rel=1e-13)
    # even integer moment: <v1^2> = 1/2 on the circle
    assert I.sphere_moment(2, 1.0, 2.0) == pytest.approx(0.5, rel=1e-14)


def test_sphere_quadrature_converges_to_moment():
    # |cos|^p with p = 1.75 has a kink, so convergence is algebraic; check order and error
    exact = I.sphere_moment(2, 1.0, 1.75)
    errs = [abs(I.build_sphere_quadrature(2, 1.0, m).moment(1.75) - exact) for m in (64, 256, 1024)]
    assert errs[-1] < 1e-6
    rates = [math.log(errs[i] / errs[i + 1], 4) for i in range(2)]
    assert min(rates) > 2.3
    # integer power: exact for moderate order
    assert I.build_sphere_quadrature(2, 1.0, 8).moment(2.0) == pytest.approx(0.5, abs=1e-14)


def test_fat_tail_integral():
    f = lambda y: 1.0 / (1.0 + abs(y)) ** 1.5
    r = I.improper_fat_tail_integral(f, 1.5)
    assert r.value == pytest.approx(4.0, rel=1e-9)  # 2 * int_0^inf (1+y)^-1.5 = 2*2
    r = I.improper_fat_tail_integral(f, 1.5, lower=0.0)
    assert r.value == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(DomainError):
        I.improper_fat_tail_integral(lambda y: 1.0 / (1 + abs(y)), 1.0)
