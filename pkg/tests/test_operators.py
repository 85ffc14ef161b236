import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degmag.eigensolve import eigen_lowest_k, solve_refined
from degmag.errors import DomainError, EllipticityError, InputError
from degmag.operators import (ConstantPotential, Grid1D, ModelParams, ScalingMap, auto_grid, build_fiber,
                              build_general, build_pilot, fiber_grid, rescale_to_unit, veff_pilot)


def test_grid_nodes_and_refinement():
    g = Grid1D(-1.0, 1.0, 3)
    assert np.allclose(g.x, [-0.5, 0.0, 0.5])
    assert g.refined().spacing == pytest.approx(g.spacing / 2)
    assert np.allclose(g.reflected().x, -g.x[::-1])


@pytest.mark.parametrize("args", [(1.0, -1.0, 5), (0.0, 1.0, 2), (0.0, np.inf, 5)])
def test_grid_rejects_bad_input(args):
    with pytest.raises((DomainError, InputError)):
        Grid1D(*args)


@pytest.mark.parametrize("kw", [{"nu": 1}, {"ell": -1}, {"mu": 0.0}, {"h": 1.5}, {"h": 0.0}])
def test_params_validation(kw):
    base = {"nu": 2, "ell": 0}
    base.update(kw)
    with pytest.raises(DomainError):
        ModelParams(**base)


def test_regime_labels():
    assert ModelParams(2, 0, mu=0.05, h=1.0).regime() == "sub-critical"
    assert ModelParams(2, 0, mu=1.0, h=1.0).regime() == "critical"
    assert ModelParams(2, 0, mu=1000.0, h=0.1).regime() == "super-critical"


@given(nu=st.integers(3, 9).filter(lambda n: n % 2 == 1), ell=st.integers(0, 3),
       eta=st.floats(-20, 20), x=st.floats(-5, 5))
def test_odd_nu_reflection_of_potential(nu, ell, eta, x):
    a = veff_pilot(nu, ell, eta, x)
    b = veff_pilot(nu, ell, -eta, -x)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-9)


@given(x=st.floats(0.01, 100), e=st.floats(0.01, 100), t=st.floats(0.01, 100), y=st.floats(-10, 10))
def test_scaling_round_trip(x, e, t, y):
    s = ScalingMap(x, e, t)
    ident = s.compose(s.inverse())
    assert (ident.x_factor, ident.energy_factor, ident.eta_factor) == pytest.approx((1, 1, 1))
    assert float(s.inverse().x_to_physical(s.x_to_physical(y))) == pytest.approx(y)
    assert float(s.eta_to_unit(s.inverse().eta_to_unit(y))) == pytest.approx(y)


def test_scaling_factors():
    p = ModelParams(3, 1, mu=8.0, h=0.5)
    s = rescale_to_unit(p)
    assert s.x_factor == pytest.approx((0.5 / 8.0) ** 0.25)
    assert s.eta_factor == pytest.approx((8.0 * 0.5**3) ** 0.25)
    assert s.energy_factor == pytest.approx(s.eta_factor**2)


@given(nu=st.sampled_from([2, 3]), ell=st.integers(0, 2), logc=st.floats(-1, 1), h=st.floats(0.05, 1.0),
       eta=st.floats(-2, 4), W=st.floats(-1, 1))
def test_fiber_is_rescaled_half_pilot(nu, ell, logc, h, eta, W):
    # independent route: change of variables x = x_f y maps the fiber onto E_f/2 * pilot - W/2
    mu = 10.0**logc / h**nu
    p = ModelParams(nu, ell, mu=mu, h=h, W=ConstantPotential(W))
    s = rescale_to_unit(p)
    gu = auto_grid(nu, ell, eta, 2, 60.0, 6.0)
    gp = Grid1D(gu.x_min * s.x_factor, gu.x_max * s.x_factor, gu.n)
    lam_u = eigen_lowest_k(build_pilot(nu, ell, eta, gu, check_domain=False), 2).values
    xi2 = eta * s.eta_factor
    lam_p = eigen_lowest_k(build_fiber(p, 0.0, xi2, gp, check_domain=False), 2).values
    expect = 0.5 * s.energy_factor * lam_u - 0.5 * W
    assert np.allclose(lam_p, expect, rtol=1e-9, atol=1e-9 * s.energy_factor)


def test_general_reduces_to_pilot():
    g = Grid1D(-6, 6, 400)
    a = build_pilot(3, 1, 1.5, g)
    b = build_general(3, 1, 1.5, (0, 0, 0), (0, 0, 0), g)
    assert np.allclose(a.diag, b.diag) and np.allclose(a.offdiag, b.offdiag)


def test_general_ellipticity_guard():
    with pytest.raises(EllipticityError):
        build_general(2, 0, 0.0, (1.0, 0, 0), (0, 0, 0), Grid1D(-3, 3, 100))


def test_domain_guard():
    with pytest.raises(DomainError):
        build_pilot(2, 0, 10.0, Grid1D(-1, np.sqrt(20.0), 50))  # right end at the well bottom


def test_factorized_and_central_agree():
    g = auto_grid(2, 0, 1.0, 3, 120.0, 6.0)
    a = solve_refined(lambda gg: build_pilot(2, 0, 1.0, gg, "central", check_domain=False), g, 3).values
    b = solve_refined(lambda gg: build_pilot(2, 0, 1.0, gg, "factorized", check_domain=False), g, 3).values
    assert np.allclose(a, b, rtol=1e-7, atol=1e-9)


def test_fiber_grid_covers_rescaled_pilot():
    p = ModelParams(2, 1, mu=25.0, h=0.2)
    g = fiber_grid(p, 1.0, 3)
    s = rescale_to_unit(p)
    gu = auto_grid(2, 1, 1.0 / s.eta_factor, 3)
    assert g.n == gu.n and g.x_min == pytest.approx(gu.x_min * s.x_factor)
