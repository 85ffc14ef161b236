import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degmag import branches as br
from degmag.errors import DomainError
from degmag.operators import ConstantPotential, ModelParams, rescale_to_unit


def _synthetic(values, eta, params=ModelParams(2, 1)):
    values = np.atleast_2d(values)
    return br.EigenBranch(np.asarray(eta, float), values, np.full_like(values, 1e-14), params)


def test_eta_grids():
    g = br.eta_grid_geometric(1.0, 100.0, 3)
    assert np.allclose(g, [1, 10, 100])
    assert np.allclose(br.eta_grid_uniform(-1, 1, 3), [-1, 0, 1])


def test_trace_rejects_bad_grid():
    with pytest.raises(DomainError):
        br.trace_branches(ModelParams(2, 0), [1.0, 0.5], 1)
    with pytest.raises(DomainError):
        br.trace_branches(ModelParams(2, 0), [0.0, 1.0], 0)


@settings(max_examples=10)
@given(eta=st.floats(0.1, 6.0), nu=st.sampled_from([3, 5]), ell=st.integers(0, 2))
def test_odd_nu_branches_are_even_in_eta(eta, nu, ell):
    b = br.trace_branches(ModelParams(nu, ell), [-eta, eta], 2)
    d = np.abs(b.values[:, 0] - b.values[:, 1])
    assert np.all(d <= 2 * np.maximum(b.error_estimates[:, 0], b.error_estimates[:, 1]) + 1e-12)


def test_parallel_trace_matches_serial():
    eta = br.eta_grid_uniform(-2, 2, 6)
    a = br.trace_branches(ModelParams(2, 1), eta, 2, workers=1)
    b = br.trace_branches(ModelParams(2, 1), eta, 2, workers=2)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.error_estimates, b.error_estimates)


def test_physical_scale_transport():
    # branches on the fiber scale equal E_f/2 times unit branches minus W/2
    p = ModelParams(2, 1, mu=25.0, h=0.2, W=ConstantPotential(0.4))
    s = rescale_to_unit(p)
    eta_u = np.array([0.5, 1.5])
    u = br.trace_branches(ModelParams(2, 1), eta_u, 2)
    f = br.trace_branches(p, eta_u * s.eta_factor, 2, scale="physical")
    expect = 0.5 * s.energy_factor * u.values - 0.2
    assert np.allclose(f.values, expect, rtol=1e-7, atol=1e-8)


def test_fit_power_law_exact():
    eta = np.geomspace(10, 1000, 7)
    b = _synthetic(3.0 * eta**-0.7, eta)
    f = br.fit_power_law(b, 0, (10, 1000))
    assert f.coefficient == pytest.approx(3.0) and f.exponent == pytest.approx(-0.7)
    assert f.max_relative_residual < 1e-12


def test_fit_power_law_needs_positive_values():
    eta = np.geomspace(10, 1000, 4)
    with pytest.raises(DomainError):
        br.fit_power_law(_synthetic(-eta, eta), 0, (10, 1000))


def test_kappa_target():
    assert br.kappa_target(2, 1) == pytest.approx(0.5)
    assert br.kappa_target(3, 0) == 0.0


def test_decay_fit_domain():
    b = _synthetic(np.ones(5), np.arange(1, 6.0), ModelParams(3, 0))
    with pytest.raises(DomainError):
        br.fit_exponential_decay(b)


def test_spacing_scale_labels():
    assert br.spacing_scale(2, 0.5, 1.0) == ("bounded", 1.0)
    assert br.spacing_scale(2, -50.0, 1.0)[0] == "even_negative"
    label, s = br.spacing_scale(3, -15.0, 1.0)
    assert label == "large" and s == pytest.approx(16.0 ** (2 / 3))


def test_zero_crossings_l1():
    b = br.trace_branches(ModelParams(2, 1), br.eta_grid_uniform(-5, 5, 21), 3)
    z = br.detect_zeros(b)
    assert [c.branch for c in z] == [0]
    assert z[0].order_r == 1 and not z[0].flagged
    assert not br.continuity_violations(b)


def test_simultaneous_crossings():
    a = br.ZeroCrossing(1.0, 0, 1, 1.0)
    b = br.ZeroCrossing(1.0 + 1e-9, 1, 1, 1.0)
    c = br.ZeroCrossing(2.0, 2, 1, 1.0)
    assert br.simultaneous_crossings([a, b, c], 1e-6) == [(a, b)]


def test_large_eta_sign_separation():
    b = br.trace_branches(ModelParams(3, 1), br.eta_grid_geometric(100, 1000, 3), 3)
    sep = br.sign_separation(b, 100)
    assert sep[0] > 0 and sep[2] > 0
    assert all(br.large_eta_signs(b, 100).values())
    assert np.all(b.values[1] > 0)


def test_zero_mode_residual_second_order():
    z = br.zero_mode_residual(3, 20.0)
    assert z.residual < 1e-3 and z.order == pytest.approx(2.0, abs=0.05)
    with pytest.raises(DomainError):
        br.zero_mode_residual(2, 1.0)


def test_mixed_scale_separation_both_terms():
    p = ModelParams(3, 1, mu=40.0, h=0.5, W=ConstantPotential(0.4))
    s = rescale_to_unit(p)
    eta = np.array([0.2, 1.0, 20.0, 200.0]) * s.eta_factor
    b = br.trace_branches(p, eta, 3, scale="physical")
    rep = br.mixed_scale_separation(b)
    assert set(rep.eps) == {0, 2}
    assert rep.eps[2] > 0
    assert {r[3] for r in rep.rows} == {"fixed", "eta"}
    with pytest.raises(DomainError):
        br.mixed_scale_separation(br.trace_branches(ModelParams(3, 1), [1.0], 2))
