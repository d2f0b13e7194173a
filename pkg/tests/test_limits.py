import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropy_lattice import entropy_model as em
from entropy_lattice import limits as lm
from entropy_lattice.errors import DivergentSeries, InsufficientData, PreconditionViolated, UnsupportedPair
from entropy_lattice.exact_engine import DiscreteDistribution, fluctuation_distribution, pmf
from entropy_lattice.laplace import classify_maximum
from entropy_lattice.lattice import build_lattice


def test_lln_limit_mgf():
    assert lm.lln_limit_mgf([0.5], [0.0]) == 1.0
    assert lm.lln_limit_mgf([0.5], [2.0]) == pytest.approx(math.e)
    assert lm.lln_limit_mgf([0.5, 0.25], [2.0, 4.0]) == pytest.approx(math.e**2)


def test_clt_limit_mgf():
    assert lm.clt_limit_mgf(lm.LimitLaw.gaussian([[0.5]]), [1.0]) == pytest.approx(math.exp(0.25))
    geo = lm.LimitLaw.boundary_mixture(math.exp(-1))
    assert lm.clt_limit_mgf(geo, [0.0]) == 1.0
    partial = sum(math.exp(-0.5 * i) for i in range(10_000)) * (1 - math.exp(-1))
    assert lm.clt_limit_mgf(geo, [0.5]) == pytest.approx(partial, rel=1e-13)
    assert lm.clt_limit_mgf(geo, [0.5]) == pytest.approx(1.6065, abs=1e-4)
    with pytest.raises(DivergentSeries):
        lm.clt_limit_mgf(geo, [1.0])


def test_limit_law_validation():
    with pytest.raises(np.linalg.LinAlgError):
        lm.LimitLaw.gaussian([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        lm.LimitLaw.boundary_mixture(1.5)


def test_fit_rate_examples():
    assert lm.fit_rate([1, 4, 16], [1, 0.5, 0.25]) == (pytest.approx(-0.5, abs=1e-14), pytest.approx(1.0))
    assert lm.fit_rate([1, 2, 3, 4], [0.1] * 4)[0] == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(InsufficientData):
        lm.fit_rate([1, 2, 3], [1.0, 0.0, 0.5])


@given(st.floats(-3, 1), st.floats(1e-3, 1e3), st.integers(3, 10))
@settings(max_examples=60, deadline=None)
def test_fit_rate_exact_on_power_laws(p, C, n):
    h = np.geomspace(10, 1e4, n)
    slope, r2 = lm.fit_rate(h, C * h**p)
    assert slope == pytest.approx(p, abs=1e-9)
    assert r2 == pytest.approx(1.0, abs=1e-9)


def test_fit_rate_noisy():
    rng = np.random.default_rng(0)
    h = np.geomspace(10, 1e4, 20)
    slope, r2 = lm.fit_rate(h, h**-1.0 * rng.uniform(0.9, 1.1, h.size))
    assert -1.1 < slope < -0.9 and r2 >= 0.95


def test_make_report_policy():
    rep = lm.make_report([1, 2, 4, 8], [1, 2, 4, 8], [0, 0, 0, 0], -0.35)
    assert rep.passed and "degenerate" in rep.note
    rep = lm.make_report([1, 2, 4, 8], [1, 2, 4, 8], [1.0, 0.5, 0.25, 0.0], -0.35)
    assert rep.passed and "dropped" in rep.note
    rep = lm.make_report([1, 2, 4, 8], [1, 2, 4, 8], [1.0, 1.0, 1.0, 1.0], -0.35)
    assert not rep.passed


def test_lln_curve_quadratic(quad1, unit1):
    rep = lm.lln_error_curve(unit1, quad1, [50, 100, 200, 400, 800], delta=0.05)
    assert rep.passed and rep.fitted_slope <= -0.35 + 0.15


def test_lln_curve_eps_regime():
    model = em.perturbed_quadratic(1, [0.5], [[1.0]], sigma=[1.0], eps=0.25)
    dom = build_lattice(1, 50, [1], [(0, 1)])
    rep = lm.lln_error_curve(dom, model, [50, 100, 200, 400, 800], delta=0.05)
    assert rep.extra["regime"] == "eps" and rep.claimed_slope == pytest.approx(-0.25)
    assert rep.fitted_slope == pytest.approx(-0.25, abs=0.05)


def test_clt_curve_degenerate_grid(quad1, unit1):
    rep = lm.clt_error_curve(unit1, quad1, [50, 100, 200, 400], xi_grid=[[0.0]])
    assert rep.passed and "degenerate" in rep.note


def test_clt_curve_boundary_1d():
    model = em.linear_boundary(1)
    dom = build_lattice(1, 8, [1], [(0, 1)])
    rep = lm.clt_error_curve(dom, model, [8, 12, 16, 24, 32, 48])
    assert rep.extra["law"] == "boundary_mixture"
    assert rep.passed and rep.fitted_slope < -2


def test_clt_precondition():
    model = em.perturbed_quadratic(1, [0.5], [[1.0]], sigma=[1.0], eps="1/logN")
    with pytest.raises(PreconditionViolated):
        lm.clt_error_curve(build_lattice(1, 50, [1], [(0, 1)]), model, [50, 100, 200, 400])


def test_distance_point_mass():
    d = DiscreteDistribution(np.array([[0.3]]), np.array([0.0]), 0.0)
    law = lm.LimitLaw.point_mass([0.3])
    assert lm.distribution_distance(d, law) == 0.0
    assert lm.distribution_distance(d, law, "tv") == 0.0
    two = DiscreteDistribution(np.array([[0.3], [0.4]]), np.log([0.75, 0.25]), 0.0)
    assert lm.distribution_distance(two, law) == pytest.approx(0.25)
    assert lm.distribution_distance(two, law, "tv") == pytest.approx(0.25)


def test_distance_unsupported(quad1, unit1):
    d = pmf(unit1, quad1, 100)
    with pytest.raises(UnsupportedPair):
        lm.distribution_distance(d, lm.LimitLaw.gaussian(np.eye(2)))
    with pytest.raises(UnsupportedPair):
        lm.distribution_distance(d, lm.LimitLaw.gaussian([[0.5]]), "hellinger")


def test_gaussian_variance_converges():
    # the exact Y_N variance approaches 1/2 for S = -N (x - 1/2)^2 on a spacing-1/2 lattice
    model = em.quadratic(1, [0.5], [[1.0]])
    errs = []
    Ns = [4, 6, 8, 12]
    for N in Ns:
        d = build_lattice(1, N, [0.5], [(0, 1)])
        fd = fluctuation_distribution(d, model, N, classify_maximum(d, model, N))
        errs.append(abs(fd.covariance()[0, 0] - 0.5))
    assert lm.fit_rate(Ns, errs)[0] <= -0.4


def test_boundary_mixture_independence():
    model = em.linear_boundary(2, 1.0, [0.5], [[1.0]])
    covs = []
    for N in (20, 40, 80):
        d = build_lattice(2, N, [1, 1], [(0, 1), (0, 1)])
        fd = fluctuation_distribution(d, model, N, classify_maximum(d, model, N))
        covs.append(abs(fd.covariance()[0, 1]))
    assert max(covs) < 1e-12


def test_report_csv(tmp_path):
    rep = lm.make_report([1, 2, 4], [1, 2, 4], [1.0, 0.5, 0.25], -0.35)
    rep.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "N,h,error,log_error" and len(lines) == 4
    assert set(rep.summary()) >= {"slope", "r2", "claimed", "pass"}
