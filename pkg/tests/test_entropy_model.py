import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropy_lattice import entropy_model as em
from entropy_lattice.errors import DomainError, SingularHessian, StencilOutOfDomain
from entropy_lattice.lattice import build_lattice


def test_eval_S_examples(quad1):
    assert em.eval_S(quad1, [0.5], 100) == 0.0
    assert em.eval_S(quad1, [0.0], 100) == pytest.approx(-25.0)
    assert em.eval_S(em.stirling(1), [0.5], 10) == pytest.approx(math.log(252), rel=1e-13)


def test_eval_S_outside_support():
    with pytest.raises(DomainError):
        em.eval_S(em.stirling(1), [1.2], 10)


def test_quadratic_derivatives(quad1):
    assert em.grad_S(quad1, [0.5], 10)[0] == 0.0
    assert em.hess_S(quad1, [0.3], 10)[0, 0] == pytest.approx(-20.0)


def test_stirling_hessian_near_minus_4N():
    from scipy.special import polygamma
    H = em.hess_S(em.stirling(1), [0.5], 20)[0, 0]
    assert H == pytest.approx(-2 * 20**2 * polygamma(1, 11), rel=1e-12)
    # N^2 trigamma(N x + 1) = N / x + O(1), so the smooth-part value -4N holds to O(1/N)
    assert H == pytest.approx(-80.0, rel=0.06)


def _strip(model):
    """Same model without analytic derivatives, forcing finite differences."""
    return replace(model, grad_S=None, hess_S=None, third_S=None,
                   grad_s=None, hess_s=None, third_s=None)


@given(st.floats(0.05, 0.6), st.floats(0.05, 0.3), st.sampled_from([20, 50, 200]))
@settings(max_examples=50, deadline=None)
def test_finite_differences_match_analytic(a, b, N):
    model = em.stirling(2, [0.3, 0.25])
    x = np.array([a, b])
    fd = _strip(model)
    g, gf = em.grad_S(model, x, N), em.grad_S(fd, x, N)
    H, Hf = em.hess_S(model, x, N), em.hess_S(fd, x, N)
    assert np.linalg.norm(gf - g) <= 1e-5 * max(1.0, np.linalg.norm(g))
    assert np.linalg.norm(Hf - H) <= 1e-5 * max(1.0, np.linalg.norm(H))
    np.testing.assert_allclose(Hf, Hf.T, rtol=1e-6)
    assert np.max(np.linalg.eigvalsh(H)) < 0


def test_third_derivative_fd():
    model = em.stirling(1, [0.3])
    x = np.array([0.4])
    T = em.third_s(model, x)[0, 0, 0]
    Tf = em.third_s(_strip(model), x)[0, 0, 0]
    # step >= 1e-3 on a differenced Hessian: O(step^2) truncation
    assert Tf == pytest.approx(T, rel=1e-3)


def test_stencil_out_of_domain():
    with pytest.raises(StencilOutOfDomain):
        em.grad_S(_strip(em.stirling(1)), [1e-9], 10)


def test_representation_exact_model(quad1):
    pts = np.linspace(0.1, 0.9, 9)[:, None]
    rep = em.check_representation(quad1, pts, [10, 100, 1000])
    assert rep.passed and rep.max_residual <= 1e-10


def test_representation_perturbed():
    model = em.perturbed_quadratic(1, [0.5], [[1.0]], sigma=[1.0], eps="1/N")
    rep = em.check_representation(model, np.linspace(0.1, 0.9, 9)[:, None], [10, 100, 1000])
    assert rep.passed


def test_representation_negative_control():
    model = em.perturbed_quadratic(1, [0.5], [[1.0]], sigma=[1.0], eps="1/N")
    bad = replace(model, sigma=lambda x: np.array([3.0]))
    rep = em.check_representation(bad, np.linspace(0.1, 0.9, 9)[:, None], [10, 100])
    assert not rep.passed


def test_representation_stirling_first_correction():
    # sigma * eps captures the 1/N term of the log-gamma expansion; the rest is O(1/N^2)
    model = em.stirling(1, [0.3])
    pts = np.linspace(0.2, 0.8, 7)[:, None]
    r1 = em.check_representation(model, pts, [1000]).max_residual
    r2 = em.check_representation(model, pts, [2000]).max_residual
    assert r1 < 1e-5 and r2 / r1 == pytest.approx(0.25, rel=0.05)


def test_regularity_quadratic(quad1, unit1):
    rc = em.estimate_regularity_constants(quad1, unit1, [10, 100], sample_budget=20)
    assert rc.s2 == pytest.approx(2.0) and rc.s2_prime == pytest.approx(2.0) and rc.s3 == 0.0


def test_regularity_anisotropic():
    model = em.quadratic(2, [0.3, 0.6], np.diag([1.0, 2.0]))
    dom = build_lattice(2, 10, [1, 1], [(0, 1), (0, 1)])
    rc = em.estimate_regularity_constants(model, dom, [10, 20], sample_budget=15)
    assert rc.s2 == pytest.approx(4.0) and rc.s2_prime == pytest.approx(2.0)


def test_regularity_stirling_edge():
    model = em.stirling(1)
    dom = build_lattice(1, 50, [1], [(0.2, 0.8)])
    rc = em.estimate_regularity_constants(model, dom, [50, 400, 3200], sample_budget=1000)
    assert rc.s2 == pytest.approx(6.25, rel=0.03)


def test_regularity_widens_with_budget():
    model = em.stirling(1)
    dom = build_lattice(1, 50, [1], [(0.2, 0.8)])
    small = em.estimate_regularity_constants(model, dom, [50], sample_budget=10, seed=3)
    big = em.estimate_regularity_constants(model, dom, [50], sample_budget=30, seed=3)
    assert big.s2 >= small.s2 and big.s2_prime <= small.s2_prime and big.s3 >= small.s3


def test_regularity_singular():
    flat = em.linear_boundary(1)
    with pytest.raises(SingularHessian):
        em.estimate_regularity_constants(flat, build_lattice(1, 10, [1], [(0, 1)]), [10], 10)


def test_regularity_budget_minimum(quad1, unit1):
    with pytest.raises(ValueError):
        em.estimate_regularity_constants(quad1, unit1, [10], sample_budget=5)


def test_maximizer_drift_tracks_eps():
    from entropy_lattice.laplace import continuum_maximizer
    from entropy_lattice.limits import fit_rate
    model = em.perturbed_quadratic(1, [0.5], [[1.0]], sigma=[1.0], eps="1/sqrtN")
    Ns = [16, 64, 256, 1024]
    drift = [abs(continuum_maximizer(model, N)[0] - 0.5) for N in Ns]
    slope, _ = fit_rate([model.eps(N) for N in Ns], drift)
    assert slope >= 0.9


def test_registry_and_eps():
    assert {"quadratic", "perturbed_quadratic", "stirling", "linear_boundary"} <= set(em.MODEL_REGISTRY)
    assert em.make_eps("1/N")(4) == 0.25 and em.make_eps(0.5)(4) == 0.5
    assert em.make_eps("1/logN")(math.e) == pytest.approx(1.0)
    with pytest.raises(KeyError):
        em.make_model("nope")


def test_stirling_normalization_identity():
    # sum of the tilted multinomial weights equals p0^-N (multinomial theorem)
    model = em.stirling(1, [0.3])
    N = 40
    x = np.arange(N + 1)[:, None] / N
    total = np.log(np.sum(np.exp(model.S(x, N))))
    assert total == pytest.approx(-N * math.log(0.7), rel=1e-12)
