from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degmag.errors import DomainError
from degmag.perturbation import (HermiteVector, Surd, apply_h0, derivative_coeffs, epsilon_series_check,
                                 inner_h0_closed, intermediate_inner_products, ladder_apply, lower_op, omega2,
                                 perturbation_result, raise_op, solve_first_order, squarefree_split)

fracs = st.fractions(min_value=-50, max_value=50, max_denominator=20)
radicands = st.integers(1, 60)


@pytest.mark.parametrize("n,split", [(1, (1, 1)), (8, (2, 2)), (12, (2, 3)), (50, (5, 2)), (30, (1, 30))])
def test_squarefree_split(n, split):
    assert squarefree_split(n) == split


@given(a=fracs, b=fracs, r=radicands, s=radicands)
def test_surd_arithmetic_matches_floats(a, b, r, s):
    x, y = Surd.of(a, r), Surd.of(b, s)
    assert float(x + y) == pytest.approx(float(a) * r**0.5 + float(b) * s**0.5, abs=1e-9)
    assert float(x * y) == pytest.approx(float(a) * float(b) * (r * s) ** 0.5, abs=1e-9)
    assert (x - x).is_zero()


@given(r=radicands)
def test_sqrt_squares_to_rational(r):
    v = Surd.sqrt(r) * Surd.sqrt(r)
    assert v.is_rational() and v.to_fraction() == r


def test_ladder_commutator():
    # a, a* carry sqrt(2k) coefficients, so [a, a*] = 2
    for k in range(6):
        u = HermiteVector.basis(k)
        c = lower_op(raise_op(u)) - raise_op(lower_op(u))
        assert c.real_inner(u).to_fraction() == 2


@pytest.mark.parametrize("ell", range(5))
def test_x_squared_expectation(ell):
    # closed form: <x^2 v_l, v_l> = (2l+1)/2 for the normalized Hermite functions
    u = HermiteVector.basis(ell)
    assert ladder_apply(u, "xx").real_inner(u).to_fraction() == Fraction(2 * ell + 1, 2)


@pytest.mark.parametrize("nu", range(2, 9))
@pytest.mark.parametrize("ell", range(6))
def test_omega2_closed_form(nu, ell):
    assert omega2(nu, ell) == Fraction((nu - 1) * ell * (ell + 1), 2)


@pytest.mark.parametrize("nu", range(2, 9))
def test_omega2_sign(nu):
    assert omega2(nu, 0) == 0
    assert all(omega2(nu, l) > 0 for l in range(1, 6))


@pytest.mark.parametrize("nu,ell", [(2, 0), (2, 1), (3, 2), (5, 3)])
def test_first_order_equation(nu, ell):
    u1 = solve_first_order(nu, ell)
    r = perturbation_result(nu, ell)
    assert not (apply_h0(u1, ell) + r.h1_u0).coeffs
    assert u1.real_inner(HermiteVector.basis(ell)).is_zero()


def test_intermediate_inner_product_closed_form():
    for nu in (2, 3, 4):
        for ell in range(4):
            a, _ = intermediate_inner_products(nu, ell)
            assert a == inner_h0_closed(nu, ell)


@pytest.mark.parametrize("nu", range(2, 9))
@pytest.mark.parametrize("ell", range(6))
def test_derivative_relation_exact(nu, ell):
    d = derivative_coeffs(nu, ell)
    assert d.kappa1 == d.kappa2 == -d.kappa3 / 2
    assert d.kappa1 == Fraction(nu * (2 * ell + 1), 2)
    assert d.kappa4 == pytest.approx(nu ** (1 / nu))


def test_kappa_value():
    assert perturbation_result(2, 1).kappa == pytest.approx(1.0 * 2 ** (-1.0))


@pytest.mark.parametrize("bad", [(1, 0), (2, -1), (2.5, 0)])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        omega2(*bad)


@pytest.mark.parametrize("nu,ell", [(3, 1), (3, 2), (4, 1)])
def test_epsilon_series_fourth_order(nu, ell):
    # independent route: numerical eigenvalue of the rescaled operator follows omega2 eps^2 + O(eps^4)
    c = epsilon_series_check(nu, ell, np.logspace(-2, -1, 5))
    assert c.used.all()
    assert c.C < 100
    assert c.slope == pytest.approx(4.0, abs=0.1)


def test_epsilon_series_nu2_residual_below_bound():
    # for nu = 2 the eps^4 term cancels; the residual is smaller still
    c = epsilon_series_check(2, 1, np.logspace(-2, -1, 5))
    assert np.all(np.abs(c.residual) <= 0.01 * c.eps**4 + 10 * c.error)
