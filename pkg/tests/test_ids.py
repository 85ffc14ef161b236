import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from degmag import ids
from degmag.errors import DomainError
from degmag.operators import ConstantPotential, ModelParams

P31 = ModelParams(3, 1, mu=10.0 / 0.1**3, h=0.1, W=ConstantPotential(1.0))
P21 = ModelParams(2, 1, mu=25.0, h=0.2, W=ConstantPotential(1.0))


# ---------------------------------------------------------------- cutoffs


@given(st.floats(-2, 2), st.floats(0.05, 1), st.floats(0.05, 1), st.floats(0.05, 1))
def test_bump_integral_and_range(a, r1, r2, r3):
    b = ids.Bump(a, a + r1, a + r1 + r2, a + r1 + r2 + r3)
    ref, _ = quad(b, *b.support, points=b.knots, limit=200)
    assert b.integral() == pytest.approx(ref, rel=1e-9, abs=1e-12)
    t = np.linspace(a - 1, a + 4, 501)
    v = b(t)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[(t < a) | (t > b.support[1])] == 0)


def test_bump_rejects_bad_knots_and_centered():
    with pytest.raises(DomainError):
        ids.Bump(0, 2, 1, 3)
    b = ids.Bump.centered(1.0, 0.5, center=2.0)
    assert b.support == (1.0, 3.0) and b(2.0) == 1.0


def test_indicator_and_spec():
    ind = ids.Indicator(-1, 2)
    assert ind.integral() == 3 and ind(0.0) == 1 and ind(5.0) == 0
    spec = ids.CutoffSpec(ids.Bump(-1, -0.5, 0.5, 1), ind)
    v = spec.evaluate(np.array([0.0, 0.9, 3.0]), np.array([0.0, 1.0]))
    assert v.shape == (2, 3)
    assert v[0, 0] == 1 and v[0, 2] == 0


# ---------------------------------------------------------- Landau counts


@given(st.integers(0, 4), st.floats(0.01, 10), st.floats(-5, 5), st.floats(-3, 3))
def test_landau_count_definition(ell, b, W, tau):
    # TRIVIAL by definition: count n >= 0 with (n - l) b - W/2 < tau
    n = np.arange(0, 4000)
    ref = int(np.sum((n - ell) * b - 0.5 * W < tau))
    assert int(ids.landau_count(ell, b, W, tau)) == ref


@given(st.integers(0, 3), st.floats(0.1, 5), st.floats(-2, 2))
def test_landau_count_monotone(ell, b, W):
    taus = np.linspace(-3, 3, 25)
    c = ids.landau_count(ell, b, W, taus)
    assert np.all(np.diff(c) >= 0)


@pytest.mark.parametrize("B,h,ell,W,expect", [(50, 0.1, 1, 1.0, 100.0), (50, 0.1, 1, -1.0, 50.0),
                                               (50, 0.1, 0, 1.0, 50.0)])
def test_constant_field_density(B, h, ell, W, expect):
    num, landau = ids.constant_field_density(B, h, ell, W)
    assert landau == pytest.approx(expect)
    assert num == pytest.approx(landau, rel=0.02)


# ------------------------------------------------------------ fiber IDS


def test_nondegeneracy_positive():
    rep = ids.check_nondegeneracy(P21, np.linspace(-0.5, 0.5, 3), np.linspace(-3, 3, 13), 3)
    assert rep.eps0 > 0
    assert rep.table.shape == (3 * 13 * 3, 7)


def test_fiber_ids_nonnegative_and_monotone_in_tau():
    psi = ids.CutoffSpec(ids.Bump(-0.5, -0.25, 0.25, 0.5), ids.Bump(-0.5, -0.25, 0.25, 0.5))
    vals = [ids.fiber_ids(P21, psi, tau) for tau in (-0.5, 0.0, 0.5)]
    assert all(v.value >= 0 and v.error >= 0 for v in vals)
    assert vals[0].value <= vals[1].value + vals[1].error
    assert vals[1].value <= vals[2].value + vals[2].error


def test_fiber_ids_linear_in_psi2_for_constant_W():
    psi1 = ids.Bump(-0.5, -0.25, 0.25, 0.5)
    psi_a = ids.CutoffSpec(psi1, ids.Indicator(0.0, 1.0))
    psi_b = ids.CutoffSpec(psi1, ids.Indicator(0.0, 2.5))
    a = ids.fiber_ids(P21, psi_a, 0.0)
    b = ids.fiber_ids(P21, psi_b, 0.0)
    assert b.value == pytest.approx(2.5 * a.value, rel=1e-9)


# -------------------------------------------------------------- Weyl term


@settings(max_examples=15)
@given(st.floats(-0.5, 0.5), st.floats(0.05, 0.5), st.floats(0.05, 0.5))
def test_weyl_additive_over_x2_partitions(a, l1, l2):
    def w(lo, hi):
        return ids.weyl_ids(P31, ids.CutoffSpec(None, ids.Indicator(lo, hi)), 0.0, x1_extent=0.4).value

    assert w(a, a + l1 + l2) == pytest.approx(w(a, a + l1) + w(a + l1, a + l1 + l2), rel=1e-10)


def test_weyl_requires_extent_without_psi1():
    with pytest.raises(DomainError):
        ids.weyl_ids(P31, ids.CutoffSpec(None, ids.Indicator(0, 1)))


def test_weyl_grows_with_tau():
    psi = ids.CutoffSpec(ids.Bump(-0.4, -0.3, 0.3, 0.4), ids.Indicator(0, 1))
    v = [ids.weyl_ids(P31, psi, tau).value for tau in (-1.0, 0.0, 1.0)]
    assert v[0] <= v[1] <= v[2]


def test_cut_radius_and_windows():
    r = ids.cut_radius(P31, 2.0)
    assert r == pytest.approx(2.0 * (P31.mu * P31.h) ** -0.5)
    win = ids.matched_windows(P31, r, 0.4)
    assert len(win) == 2 and win[0] == (-win[1][1], -win[1][0])
    assert len(ids.matched_windows(P21, 0.1, 0.4)) == 1


# ------------------------------------------------------- correction term


def test_correction_small_against_terms():
    psi2 = ids.Bump(-0.5, -0.25, 0.25, 0.5)
    c = ids.correction_term(P31, psi2, 0.4)
    assert c.value == pytest.approx(c.fiber - c.weyl)
    assert abs(c.value) < 0.2 * abs(c.fiber)
    with pytest.raises(DomainError):
        ids.correction_term(P31, psi2, 0.5 * c.cut_radius)


# ---------------------------------------------------------------- sweeps


def test_remainder_point_record():
    spec = ids.OracleSpec(2.0, 2.0, 60, 60)
    rec = ids.remainder_point(P21, spec)
    assert rec.oracle == int(rec.oracle) and rec.oracle >= 0
    assert rec.remainder_RI == pytest.approx(abs(rec.oracle - rec.fiber_ids))
    assert rec.discretization_error >= 0.5
    assert rec.regime == P21.regime()
    assert ids.remainder_scale(P21) == pytest.approx(P21.mu ** -0.5 / P21.h)


def test_sweep_skips_infeasible_points():
    spec = ids.OracleSpec(3.0, 3.0, 600, 600, cap=1000)
    (rec,) = ids.remainder_sweep([P21], spec)
    assert rec.skipped and math.isnan(rec.remainder_RI)
