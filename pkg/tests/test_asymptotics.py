import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropy_lattice import asymptotics as asy
from entropy_lattice.errors import LengthMismatch, NotInvertible, ZeroDenominator

fracs = st.fractions(-20, 20, max_denominator=50)


def test_product_small_cases():
    d = asy.product_decomposition([3], [2])
    assert d.rhs == 1 and d.lhs == 1
    d = asy.product_decomposition([3, 5], [2, 4])
    assert d.lhs == 7 and d.rhs == 7
    assert sorted(v for _, v in d.terms) == [1, 2, 4]
    with pytest.raises(LengthMismatch):
        asy.product_decomposition([1, 2], [1])


@given(st.integers(1, 7).flatmap(lambda m: st.tuples(st.lists(fracs, min_size=m, max_size=m),
                                                      st.lists(fracs, min_size=m, max_size=m))))
@settings(max_examples=80, deadline=None)
def test_product_identity_exact(AB):
    A, B = AB
    d = asy.product_decomposition(A, B)
    assert d.lhs == d.rhs
    assert len(d.terms) == 2 ** len(A) - 1


def test_product_identity_float_m5():
    rng = np.random.default_rng(1)
    d = asy.product_decomposition(rng.normal(size=5).tolist(), rng.normal(size=5).tolist())
    assert d.residual <= 1e-12 * max(1.0, abs(d.lhs))


def test_ratio_examples():
    v = asy.ratio_decomposition(Fraction(3), Fraction(2), Fraction(1), Fraction(5), Fraction(4), Fraction(1))
    assert v == Fraction(1, 10)
    assert asy.ratio_decomposition(2.0, 2.0, 0.0, 3.0, 3.0, 0.0) == 0.0
    with pytest.raises(ZeroDenominator):
        asy.ratio_decomposition(1, 1, 0, 0, 1, -1)


@given(fracs, fracs, fracs.filter(bool), fracs.filter(bool))
@settings(max_examples=80, deadline=None)
def test_ratio_identity_exact(A1, B1, A2, B2):
    assert asy.ratio_decomposition(A1, B1, A1 - B1, A2, B2, A2 - B2) == A1 / A2 - B1 / B2


def test_neumann():
    z = asy.neumann_inverse_residual(np.zeros((2, 2)), [0.1, 0.01])
    assert z.residuals == [0.0, 0.0] and z.passed
    one = asy.neumann_inverse_residual([[1.0]], [0.1, 0.05, 0.01])
    assert one.residuals[0] == pytest.approx(1 - 1 / 1.1)
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3))
    A /= asy.spectral_norm(A)
    c = asy.neumann_inverse_residual(A, np.logspace(-1, -4, 10))
    assert c.passed and c.slope == pytest.approx(1.0, abs=0.05)
    with pytest.raises(NotInvertible):
        asy.neumann_inverse_residual(A, [2.0])


def test_det_approx():
    c = asy.det_approx_check(np.diag([1.0, 2.0]), [100, 200, 400])
    assert c.residuals[0] == pytest.approx(2e-4, rel=1e-9)
    assert c.slope == pytest.approx(-2.0, abs=0.1)
    rot = asy.det_approx_check([[0.0, -1.0], [1.0, 0.0]], np.logspace(1, 3, 9))
    assert rot.passed
    assert asy.det_approx_check(np.zeros((2, 2)), [10, 20, 40]).passed


def test_power_bound():
    ok, margin = asy.power_bound_check(2.0, 2, [0.0])
    assert ok and margin == pytest.approx(4.0 - 2.0)
    assert asy.power_bound_check(1.0, 4, np.arange(0, 10.5, 0.5))[0]
    grid = np.linspace(0, 1e3, 10_000)
    for a in (0.1, 1.0, 10.0):
        for m in range(1, 7):
            assert asy.power_bound_check(a, m, grid)[0]


def test_power_bound_statement_root_fails():
    # the negative root (1 - sqrt(1+4a))/2 does not give a bound: a=2, m=2, t=0
    t_neg = (1 - math.sqrt(9)) / 2
    assert (0 + 2.0) ** 1 > t_neg**2 + 0.0


def test_spectral_norm():
    assert asy.spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0)
