import numpy as np
import pytest

from degmag.errors import CapExceeded, DomainError
from degmag.ids import CutoffSpec, Indicator
from degmag.operators import ConstantPotential, LinearPotential, ModelParams
from degmag.oracle2d import (Box2D, CountInterval, build_2d, bulk_count, count_below_2d, count_below_2d_interval,
                             magnetic_resolution, oracle_ids)


def _small():
    p = ModelParams(2, 1, mu=25.0, h=0.2, W=ConstantPotential(1.0))
    return p, Box2D(-0.3, 0.3, -0.2, 0.2, 40, 27)


def test_box_cap_and_shape():
    with pytest.raises(CapExceeded):
        Box2D(0, 1, 0, 1, 600, 600)
    with pytest.raises(DomainError):
        Box2D(1, 0, 0, 1, 10, 10)
    b = Box2D(0, 1, 0, 1, 9, 19)
    assert b.dim == 171 and b.grid2.spacing == pytest.approx(0.05)
    big = b.padded(2.0)
    assert big.grid2.spacing == pytest.approx(b.grid2.spacing)
    assert big.x2_max - big.x2_min == pytest.approx(2.0)


def test_weak_field_reduces_to_discrete_laplacian():
    # independent route: mu -> 0 leaves (h^2/2) times the Dirichlet 5-point Laplacian, known in closed form
    h = 1.0
    p = ModelParams(2, 0, mu=1e-14, h=h)
    box = Box2D(0.0, 1.0, 0.0, 1.0, 15, 11)
    d1, d2 = box.grid1.spacing, box.grid2.spacing
    k1, k2 = np.arange(1, 16), np.arange(1, 12)
    e1 = 4 / d1**2 * np.sin(k1 * np.pi / 32) ** 2
    e2 = 4 / d2**2 * np.sin(k2 * np.pi / 24) ** 2
    ev = np.sort((0.5 * h * h * (e1[:, None] + e2[None, :])).ravel())
    A = build_2d(p, box, check_resolution=False)
    for tau in (10.0, 50.0, 200.0, 700.0):
        assert count_below_2d(A, tau) == int(np.sum(ev < tau))


def test_matrix_is_hermitian_and_counts_match_dense():
    p, box = _small()
    for scheme in ("peierls", "expanded"):
        A = build_2d(p, box, scheme)
        H = A.to_dense()
        assert np.allclose(H, H.conj().T)
        ev = np.linalg.eigvalsh(H)
        for tau in (-1.0, 0.0, 2.0):
            assert count_below_2d(A, tau) == int(np.sum(ev < tau))


def test_translation_covariance():
    # shifting W and the box together in x2 leaves the spectrum unchanged
    p1 = ModelParams(2, 1, mu=25.0, h=0.2, W=LinearPotential(0.5, 0.0))
    p2 = ModelParams(2, 1, mu=25.0, h=0.2, W=LinearPotential(0.5, -0.5 * 0.3))
    b1 = Box2D(-0.3, 0.3, -0.2, 0.2, 40, 27)
    b2 = Box2D(-0.3, 0.3, 0.1, 0.5, 40, 27)
    for tau in (-0.5, 0.0, 0.5):
        assert count_below_2d(build_2d(p1, b1), tau) == count_below_2d(build_2d(p2, b2), tau)


def test_resolution_guard():
    p = ModelParams(2, 1, mu=2500.0, h=0.02)
    box = Box2D(-1, 1, -1, 1, 20, 20)
    assert magnetic_resolution(p, box) < 8
    with pytest.raises(DomainError):
        build_2d(p, box)


def test_count_interval_brackets_count():
    p, box = _small()
    A = build_2d(p, box)
    ci = count_below_2d_interval(A, 0.0)
    assert ci.lo <= count_below_2d(A, 0.0) <= ci.hi
    assert CountInterval(3, 5).value == 4


def test_weighted_oracle_with_unit_weight_is_the_count():
    p, box = _small()
    psi = CutoffSpec(None, Indicator(box.x2_min - 1, box.x2_max + 1))
    assert oracle_ids(p, psi, box) == pytest.approx(oracle_ids(p, None, box), abs=1e-9)
    half = CutoffSpec(None, Indicator(box.x2_min - 1, 0.0))
    assert 0 <= oracle_ids(p, half, box) <= oracle_ids(p, None, box)


def test_dense_cap():
    p, box = _small()
    with pytest.raises(CapExceeded):
        oracle_ids(p, CutoffSpec(None, Indicator(-1, 1)), box, dense_cap=100)


def test_bulk_count_nonnegative():
    p, box = _small()
    dN, extra = bulk_count(p, box)
    assert dN >= 0 and extra == pytest.approx(box.x2_max - box.x2_min, rel=0.1)
