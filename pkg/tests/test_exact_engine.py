import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import flat_model
from entropy_lattice import entropy_model as em
from entropy_lattice import exact_engine as ee
from entropy_lattice.errors import EmptyDomain, NonFiniteTerm, TypeMismatch
from entropy_lattice.laplace import classify_maximum
from entropy_lattice.lattice import build_lattice


def test_flat_counts_points():
    d = build_lattice(1, 10, [1], [(0, 1)])
    assert ee.partition_sum(d, flat_model(), 10).log_magnitude == pytest.approx(math.log(11), rel=1e-15)


def test_quadratic_sum_against_high_precision():
    d = build_lattice(1, 100, [1], [(0, 1)])
    model = em.quadratic(1, [0.5], [[1.0]])
    mpmath.mp.dps = 50
    ref = mpmath.log(mpmath.fsum(mpmath.exp(-100 * (mpmath.mpf(i) / 100 - mpmath.mpf(1) / 2) ** 2)
                                 for i in range(101)))
    got = ee.partition_sum(d, model, 100).log_magnitude
    assert got == pytest.approx(float(ref), rel=1e-14)
    assert math.exp(got) == pytest.approx(math.sqrt(100 * math.pi), rel=1e-10)


def test_zero_tilt_is_bitwise_identical(unit1, quad1):
    a = ee.partition_sum(unit1, quad1, 100)
    b = ee.partition_sum(unit1, quad1, 100, lambda x: np.exp(0.0 * x[:, 0]))
    assert a == b


def test_signed_weight():
    d = build_lattice(1, 10, [1], [(-1, 1)])
    v = ee.partition_sum(d, flat_model(), 10, g=lambda x: x[:, 0] - 0.5)
    assert v.sign == -1
    assert float(v) == pytest.approx(-10.5, rel=1e-13)


def test_non_finite_term(unit1):
    bad = em.EntropyModel("bad", 1, S=lambda x, N: np.where(x[..., 0] > 0.5, np.nan, 0.0))
    with pytest.raises(NonFiniteTerm):
        ee.partition_sum(unit1, bad, 100)


def test_empty_predicate_domain():
    d = build_lattice(1, 10, [1], [(0, 1)], predicate=lambda x: x[:, 0] < 0.55)
    d2 = d.__class__(1, 10, d.spacings, d.box, lambda x: np.zeros(len(x), bool), d.rotation, d.point_cap)
    with pytest.raises(EmptyDomain):
        ee.partition_sum(d2, flat_model(), 10)


def test_pmf_properties(unit1, quad1):
    dist = ee.pmf(build_lattice(1, 10, [1], [(0, 1)]), quad1, 10)
    assert dist.mode()[0] == 0.5
    uni = ee.pmf(build_lattice(1, 10, [1], [(0, 1)]), flat_model(), 10)
    np.testing.assert_allclose(uni.probs, 1 / 11, rtol=1e-14)
    st2 = em.stirling(2)
    d = build_lattice(2, 30, [1, 1], [(0, 1), (0, 1)], predicate=st2.defined)
    assert ee.pmf(d, st2, 30).probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_mgf_examples(quad1, unit1):
    assert ee.mgf_exact(unit1, quad1, 100, [0.0]).log_magnitude == 0.0
    two = build_lattice(1, 1, [1], [(0, 1)])
    assert float(ee.mgf_exact(two, flat_model(), 1, [1.0])) == pytest.approx((1 + math.e) / 2, rel=1e-14)
    M = float(ee.mgf_exact(unit1.with_N(200), quad1, 200, [0.3]))
    assert abs(M - math.exp(0.15)) < 200 ** -0.35


@given(st.floats(-2, 2), st.sampled_from([5, 17, 60]))
@settings(max_examples=40, deadline=None)
def test_binomial_mgf_closed_form(xi, N):
    # with the tilt, X_N = K/N for K ~ Binomial(N, p): M(xi) = (1 - p + p e^{xi/N})^N
    p = 0.3
    model = em.stirling(1, [p])
    d = build_lattice(1, N, [1], [(0, 1)])
    got = ee.mgf_exact(d, model, N, [xi]).log_magnitude
    assert got == pytest.approx(N * math.log1p(p * math.expm1(xi / N)), rel=1e-11, abs=1e-13)


def test_mgf_log_convex_along_line(unit2):
    model = em.quadratic(2, [0.4, 0.6], [[1.0, 0.3], [0.3, 2.0]])
    d = unit2.with_N(20)
    u = np.array([0.7, -0.4])
    ts = np.linspace(-3, 3, 13)
    lm = np.array([ee.mgf_exact(d, model, 20, t * u).log_magnitude for t in ts])
    assert np.all(np.diff(lm, 2) >= -1e-9)


def test_jensen(unit2):
    model = em.stirling(2, [0.2, 0.5])
    d = build_lattice(2, 24, [1, 1], [(0, 1), (0, 1)], predicate=model.defined)
    mean = ee.pmf(d, model, 24).mean()
    for xi in ([1.0, -1.0], [0.3, 0.2], [-2.0, 0.5]):
        assert ee.mgf_exact(d, model, 24, xi).log_magnitude >= float(np.dot(xi, mean)) - 1e-12


def test_fluctuation_type_a(unit1, quad1):
    info = classify_maximum(unit1, quad1, 100)
    fd = ee.fluctuation_distribution(unit1, quad1, 100, info)
    np.testing.assert_allclose(fd.points[:, 0], 10 * (np.linspace(0, 1, 101) - 0.5), atol=1e-12)
    np.testing.assert_array_equal(fd.log_weights, ee.pmf(unit1, quad1, 100).log_weights)


def test_fluctuation_type_b_linear():
    model = em.linear_boundary(1)
    d = build_lattice(1, 30, [1], [(0, 1)])
    info = classify_maximum(d, model, 30)
    fd = ee.fluctuation_distribution(d, model, 30, info)
    np.testing.assert_allclose(fd.points[:, 0], np.arange(31), atol=1e-12)
    p = np.exp(-np.arange(31.0))
    np.testing.assert_allclose(fd.probs, p / p.sum(), rtol=1e-12)
    assert fd.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_fluctuation_needs_boundary(unit1, quad1):
    info = classify_maximum(unit1, quad1, 100)
    info.kind = "boundary"
    with pytest.raises(TypeMismatch):
        ee.fluctuation_points(np.zeros((1, 1)), 100, info)


def test_logvalue_arithmetic():
    a, b = ee.LogValue.from_float(3.0), ee.LogValue.from_float(-5.0)
    assert float(a + b) == pytest.approx(-2.0)
    assert float(a - b) == pytest.approx(8.0)
    assert float(a * b) == pytest.approx(-15.0)
    assert float(a / b) == pytest.approx(-0.6)
    z = a - a
    assert z.sign == 0 and z.log_magnitude == -math.inf
    big = ee.LogValue(1e6) + ee.LogValue(1e6)
    assert big.log_magnitude == pytest.approx(1e6 + math.log(2))


def test_sampling():
    d = build_lattice(1, 10, [1], [(0, 1)])
    dist = ee.pmf(d, flat_model(), 10)
    n = 100_000
    draws = ee.sample(dist, n, seed=42)
    counts = np.array([np.sum(np.isclose(draws[:, 0], v)) for v in dist.points[:, 0]])
    sd = math.sqrt(n * (1 / 11) * (10 / 11))
    assert np.all(np.abs(counts - n / 11) <= 5 * sd)
    assert np.array_equal(draws, ee.sample(dist, n, seed=42))
    pm = ee.DiscreteDistribution(np.array([[0.25]]), np.array([0.0]), 0.0)
    assert np.all(ee.sample(pm, 100, seed=1) == 0.25)


def test_marginal_and_csv(tmp_path):
    model = em.stirling(2)
    d = build_lattice(2, 12, [1, 1], [(0, 1), (0, 1)], predicate=model.defined)
    dist = ee.pmf(d, model, 12)
    mg = dist.marginal([0])
    # marginal of a trinomial fraction is binomial(N, 1/3)
    k = np.rint(mg.points[:, 0] * 12).astype(int)
    ref = np.array([math.comb(12, int(i)) * (1 / 3) ** i * (2 / 3) ** (12 - i) for i in k])
    np.testing.assert_allclose(mg.probs, ref, rtol=1e-12)
    path = tmp_path / "d.csv"
    dist.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,x1,x2,log_weight,prob" and len(lines) == dist.points.shape[0] + 1
