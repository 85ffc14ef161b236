import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal, svdvals

from degmag import _jit
from degmag import kernels as K

seeds = st.integers(0, 2**32 - 1)


def _tridiag(seed, n):
    rng = np.random.default_rng(seed)
    return rng.normal(size=n), rng.normal(size=n - 1)


@given(seed=seeds, n=st.integers(3, 60))
def test_sturm_counts_match_dense(backend, seed, n):
    d, e = _tridiag(seed, n)
    ev = eigh_tridiagonal(d, e, eigvals_only=True)
    shifts = np.linspace(ev[0] - 1, ev[-1] + 1, 9)
    got = K.sturm_counts(d, e * e, shifts)
    assert list(got) == [int(np.sum(ev < s)) for s in shifts]


@given(seed=seeds, n=st.integers(3, 60))
def test_sturm_counts_monotone_in_shift(backend, seed, n):
    d, e = _tridiag(seed, n)
    c = K.sturm_counts(d, e * e, np.linspace(-5, 5, 41))
    assert np.all(np.diff(c) >= 0)


@given(seed=seeds, n=st.integers(3, 80))
def test_bisection_matches_lapack(backend, seed, n):
    d, e = _tridiag(seed, n)
    ref = eigh_tridiagonal(d, e, eigvals_only=True)
    k = min(n, 6)
    got = K.bisect_eigenvalues(d, e, np.arange(k), 1e-14, 1e-14)
    assert np.allclose(got, ref[:k], rtol=0, atol=1e-12 * max(1.0, np.abs(ref).max()))


def test_singular_values_match_svd(backend):
    rng = np.random.default_rng(3)
    n = 50
    lower, upper = rng.normal(size=n + 1), rng.normal(size=n + 1)
    B = np.zeros((n + 1, n))
    for i in range(n):
        B[i, i] = upper[i]
        B[i + 1, i] = lower[i + 1]
    ref = np.sort(svdvals(B))
    got = K.bisect_singular_values(lower, upper, np.arange(8), 1e-14)
    assert np.allclose(got / ref[:8], 1.0, rtol=0, atol=1e-12)


def test_singular_values_keep_relative_accuracy(backend):
    # graded bidiagonal down to sigma^2 ~ 1e-270: singular values are |upper|
    upper = np.array([1e-135, 1e-60, 1e-20, 1.0, 2.0, 0.0])
    lower = np.full(6, 1e-145)
    lower[0] = 0.0
    s = K.bisect_singular_values(lower, upper, np.arange(3), 1e-13)
    assert np.allclose(s / upper[:3], 1.0, rtol=0, atol=1e-12)


def _banded(seed, n, p, complex_):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + (1j * rng.normal(size=(n, n)) if complex_ else 0)
    A = A + A.conj().T
    i, j = np.indices((n, n))
    A[np.abs(i - j) > p] = 0
    bands = np.zeros((p + 1, n), dtype=A.dtype)
    for k in range(p + 1):
        bands[k, : n - k] = np.diagonal(A, -k)
    return A, bands


@given(seed=seeds, n=st.integers(3, 40), p=st.integers(1, 5), complex_=st.booleans(), tau=st.floats(-3, 3))
def test_ldlt_inertia_matches_eigvalsh(backend, seed, n, p, complex_, tau):
    p = min(p, n - 1)
    A, bands = _banded(seed, n, p, complex_)
    ev = np.linalg.eigvalsh(A)
    if np.min(np.abs(ev - tau)) < 1e-8:
        return
    neg, _ = K.ldlt_inertia(bands, tau)
    assert neg == int(np.sum(ev < tau))


@pytest.mark.skipif(not _jit.HAVE_NUMBA, reason="numba missing")
def test_backends_agree():

    d, e = _tridiag(7, 200)
    _, bands = _banded(8, 60, 4, True)
    out = {}
    for be in ("numba", "numpy"):
        prev = _jit.set_backend(be)
        try:
            out[be] = (K.bisect_eigenvalues(d, e, np.arange(10), 1e-14, 1e-14),
                       K.sturm_counts(d, e * e, [-1.0, 0.0, 1.0]), K.ldlt_inertia(bands, 0.3))
        finally:
            _jit.set_backend(prev)
    assert np.allclose(out["numba"][0], out["numpy"][0], rtol=1e-13, atol=1e-13)
    assert list(out["numba"][1]) == list(out["numpy"][1])
    assert out["numba"][2] == out["numpy"][2]


def test_env_flag_selects_numpy_backend():
    import subprocess
    import sys

    code = "from degmag import _jit; print(_jit.backend())"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={**__import__("os").environ, "DEGMAG_DISABLE_NUMBA": "1"}, check=True)
    assert out.stdout.strip() == "numpy"
