"""Hot loops: Sturm counts, bisection, singular-value bisection, banded LDL^T inertia.

Each kernel has a numba version (scalar loops) and a numpy version that
vectorizes across shifts instead of across rows. The public wrappers dispatch
on :func:`degmag._jit.backend`.
"""

from __future__ import annotations

import numpy as np

from . import _jit
from ._jit import njit
from .errors import NumericalFailure

TINY = np.finfo(float).tiny
BIG = 1e150
MAX_BISECT = 400


def pivmin_for(e2: np.ndarray) -> float:
    m = float(e2.max()) if e2.size else 0.0
    return TINY * max(1.0, m)


# --------------------------------------------------------------------- Sturm


@njit(cache=True)
def _count_nb(d, e2, s, pivmin):
    n = d.shape[0]
    cnt = 0
    q = d[0] - s
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        cnt += 1
    for i in range(1, n):
        q = (d[i] - s) - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            cnt += 1
    return cnt


@njit(cache=True)
def _counts_nb(d, e2, shifts, pivmin):
    out = np.empty(shifts.shape[0], dtype=np.int64)
    for j in range(shifts.shape[0]):
        out[j] = _count_nb(d, e2, shifts[j], pivmin)
    return out


def _counts_np(d, e2, shifts, pivmin):
    shifts = np.asarray(shifts, dtype=float)
    q = d[0] - shifts
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    cnt = (q < 0).astype(np.int64)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for i in range(1, d.shape[0]):
            q = (d[i] - shifts) - e2[i - 1] / q
            q = np.where(np.abs(q) < pivmin, -pivmin, q)
            cnt += q < 0
    return cnt


def _prescale(d, e2):
    # counts are invariant under positive rescaling of A - s
    m = max(float(np.abs(d).max()), float(np.sqrt(e2.max())) if e2.size else 0.0)
    if m > BIG:
        return 1.0 / m
    return 1.0


def sturm_counts(d: np.ndarray, e2: np.ndarray, shifts) -> np.ndarray:
    """Number of eigenvalues strictly below each shift.

    ``e2`` holds the squared off-diagonal. A tiny pivot is replaced by
    ``-pivmin``, the usual convention that makes the count well defined.
    """
    d = np.ascontiguousarray(d, dtype=float)
    e2 = np.ascontiguousarray(e2, dtype=float)
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    sc = _prescale(d, e2)
    if sc != 1.0:
        d, e2, shifts = d * sc, e2 * sc * sc, shifts * sc
    piv = pivmin_for(e2)
    if _jit.backend() == "numba":
        return _counts_nb(d, e2, np.ascontiguousarray(shifts), piv)
    return _counts_np(d, e2, shifts, piv)


# ----------------------------------------------------------------- bisection


@njit(cache=True)
def _width_ok(lo, hi, rtol, afloor):
    mid = 0.5 * (lo + hi)
    return hi - lo <= max(rtol * abs(mid), afloor)


@njit(cache=True)
def _bisect_nb(d, e2, idx, glo, ghi, rtol, afloor, pivmin):
    k = idx.shape[0]
    vals = np.empty(k)
    lo_prev = glo
    for t in range(k):
        j = idx[t]
        lo = lo_prev
        hi = ghi
        it = 0
        while not _width_ok(lo, hi, rtol, afloor) and it < MAX_BISECT:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _count_nb(d, e2, mid, pivmin) <= j:
                lo = mid
            else:
                hi = mid
            it += 1
        vals[t] = 0.5 * (lo + hi)
        lo_prev = lo
    return vals


def _bisect_np(d, e2, idx, glo, ghi, rtol, afloor, pivmin, m=15):
    # multisection: m interior probes per interval per sweep
    k = idx.shape[0]
    lo = np.full(k, glo)
    hi = np.full(k, ghi)
    frac = np.arange(1, m + 1) / (m + 1)
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        active = (hi - lo) > np.maximum(rtol * np.abs(mid), afloor)
        if not active.any():
            break
        a = np.nonzero(active)[0]
        probes = lo[a, None] + (hi[a] - lo[a])[:, None] * frac[None, :]
        cnt = _counts_np(d, e2, probes.ravel(), pivmin).reshape(probes.shape)
        below = cnt <= idx[a, None]
        nb = below.sum(axis=1)
        new_lo = np.where(nb > 0, probes[np.arange(a.size), np.maximum(nb - 1, 0)], lo[a])
        new_hi = np.where(nb < m, probes[np.arange(a.size), np.minimum(nb, m - 1)], hi[a])
        stalled = (new_lo == lo[a]) & (new_hi == hi[a])
        lo[a], hi[a] = new_lo, new_hi
        if stalled.all():
            break
    return 0.5 * (lo + hi)


def gershgorin(d: np.ndarray, e: np.ndarray) -> tuple[float, float]:
    ae = np.abs(e)
    r = np.zeros_like(d)
    r[:-1] += ae
    r[1:] += ae
    lo, hi = float((d - r).min()), float((d + r).max())
    pad = 2.0 * np.finfo(float).eps * max(abs(lo), abs(hi), 1.0) * d.size
    return lo - pad - TINY, hi + pad + TINY


def bisect_eigenvalues(d, e, idx, rtol: float, afloor: float) -> np.ndarray:
    """Eigenvalues with 0-based indices ``idx`` (sorted ascending) by bisection."""
    d = np.ascontiguousarray(d, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    idx = np.ascontiguousarray(np.asarray(idx, dtype=np.int64))
    e2 = e * e
    glo, ghi = gershgorin(d, e)
    sc = _prescale(d, e2)
    if sc != 1.0:
        d, e2, glo, ghi, afloor = d * sc, e2 * sc * sc, glo * sc, ghi * sc, afloor * sc
    piv = pivmin_for(e2)
    if _jit.backend() == "numba":
        vals = _bisect_nb(d, e2, idx, glo, ghi, rtol, afloor, piv)
    else:
        vals = _bisect_np(d, e2, idx, glo, ghi, rtol, afloor, piv)
    return vals / sc


# ------------------------------------------------ singular values of a bidiagonal


def tgk_offdiag(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Off-diagonal of the zero-diagonal tridiagonal whose eigenvalues are +-sigma.

    ``lower`` has length n+1 (edge to the left node), ``upper`` length n+1;
    the rectangular (n+1) x n bidiagonal B has B[e, e] = upper[e] for e < n and
    B[e, e-1] = lower[e] for e >= 1.
    """
    n = lower.shape[0] - 1
    out = np.empty(2 * n)
    out[0::2] = upper[:n]
    out[1::2] = lower[1:]
    return out


@njit(cache=True)
def _zero_diag_count_nb(e2, s, pivmin):
    n = e2.shape[0] + 1
    cnt = 0
    q = s
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        cnt += 1
    for i in range(1, n):
        q = s - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            cnt += 1
    return cnt


@njit(cache=True)
def _sv_bisect_nb(e2, nsig, idx, shi, rtol, sfloor, pivmin):
    # geometric bisection in log space; sigma below sfloor is reported as 0
    k = idx.shape[0]
    vals = np.empty(k)
    lo_prev = 0.0
    for t in range(k):
        j = idx[t]
        lo = lo_prev
        hi = shi
        if nsig - _zero_diag_count_nb(e2, sfloor, pivmin) > j:
            vals[t] = 0.0
            continue
        if lo < sfloor:
            lo = sfloor
        it = 0
        while hi - lo > rtol * hi and it < 4 * MAX_BISECT:
            mid = np.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            below = nsig - _zero_diag_count_nb(e2, mid, pivmin)
            if below <= j:
                lo = mid
            else:
                hi = mid
            it += 1
        vals[t] = 0.5 * (lo + hi)
        lo_prev = lo
    return vals


def _sv_bisect_np(e2, nsig, idx, shi, rtol, sfloor, pivmin, m=15):
    zeros = np.zeros(e2.shape[0] + 1)
    k = idx.shape[0]
    under = (nsig - _counts_np(zeros, e2, np.array([-sfloor]), pivmin)[0]) > idx
    lo = np.full(k, sfloor)
    hi = np.full(k, shi)
    frac = np.arange(1, m + 1) / (m + 1)
    for _ in range(4 * MAX_BISECT):
        active = ((hi - lo) > rtol * hi) & ~under
        if not active.any():
            break
        a = np.nonzero(active)[0]
        geo = hi[a] > 4.0 * lo[a]
        llo, lhi = np.log(lo[a]), np.log(hi[a])
        probes = np.where(
            geo[:, None],
            np.exp(llo[:, None] + (lhi - llo)[:, None] * frac[None, :]),
            lo[a, None] + (hi[a] - lo[a])[:, None] * frac[None, :],
        )
        cnt = nsig - _counts_np(zeros, e2, -probes.ravel(), pivmin).reshape(probes.shape)
        nb = (cnt <= idx[a, None]).sum(axis=1)
        rows = np.arange(a.size)
        new_lo = np.where(nb > 0, probes[rows, np.maximum(nb - 1, 0)], lo[a])
        new_hi = np.where(nb < m, probes[rows, np.minimum(nb, m - 1)], hi[a])
        stalled = (new_lo == lo[a]) & (new_hi == hi[a])
        lo[a], hi[a] = new_lo, new_hi
        if stalled.all():
            break
    return np.where(under, 0.0, 0.5 * (lo + hi))


def bisect_singular_values(lower, upper, idx, rtol: float, sfloor: float = 1e-290) -> np.ndarray:
    """Singular values (ascending, 0-based ``idx``) of the rectangular bidiagonal.

    Bisection on the zero-diagonal Golub-Kahan tridiagonal is accurate to high
    relative precision even for singular values many orders below the norm.
    """
    off = tgk_offdiag(np.asarray(lower, float), np.asarray(upper, float))
    e2 = np.ascontiguousarray(off * off)
    nsig = lower.shape[0] - 1
    shi = float(np.sqrt(2.0 * e2.max()) * 1.01 + TINY) if e2.size else 1.0
    piv = TINY
    idx = np.ascontiguousarray(np.asarray(idx, dtype=np.int64))
    if _jit.backend() == "numba":
        return _sv_bisect_nb(e2, nsig, idx, shi, rtol, sfloor, piv)
    return _sv_bisect_np(e2, nsig, idx, shi, rtol, sfloor, piv)


def singular_counts(lower, upper, s) -> np.ndarray:
    """Number of singular values strictly below each ``s`` (> 0)."""
    off = tgk_offdiag(np.asarray(lower, float), np.asarray(upper, float))
    nsig = lower.shape[0] - 1
    s = np.atleast_1d(np.asarray(s, float))
    return nsig - sturm_counts(np.zeros(off.size + 1), off * off, -s)


# ------------------------------------------------------------ banded LDL^T


@njit(cache=True)
def _ldlt_inertia_nb(bands, tau, eps_piv):
    p = bands.shape[0] - 1
    n = bands.shape[1]
    w = bands.copy()
    for i in range(n):
        w[0, i] -= tau
    rownorm = np.zeros(n)
    for j in range(p + 1):
        for i in range(n - j):
            a = abs(w[j, i])
            rownorm[i] += a
            if j > 0:
                rownorm[i + j] += a
    neg = 0
    nzero = 0
    fail = -1
    for k in range(n):
        dk = w[0, k].real
        if abs(dk) <= eps_piv * rownorm[k]:
            if rownorm[k] == 0.0:
                fail = k
                break
            dk = eps_piv * rownorm[k]
            nzero += 1
        if dk < 0.0:
            neg += 1
        m = min(p, n - 1 - k)
        for i in range(1, m + 1):
            lik = w[i, k] / dk
            if lik == 0.0:
                continue
            for j in range(1, i + 1):
                w[i - j, k + j] -= lik * np.conj(w[j, k])
    return neg, nzero, fail


def _ldlt_inertia_np(bands, tau, eps_piv):
    p = bands.shape[0] - 1
    n = bands.shape[1]
    a = bands.copy()
    a[0] -= tau
    rownorm = np.abs(a).sum(axis=0)
    for j in range(1, p + 1):
        rownorm[j:] += np.abs(a[j, : n - j])
    # win[r, c] = A[k + r, k + c]: dense copy of the active trailing block
    win = np.zeros((p + 1, p + 1), dtype=a.dtype)
    for r in range(min(p + 1, n)):
        for c in range(r + 1):
            win[r, c] = a[r - c, c]
            win[c, r] = np.conj(a[r - c, c])
    cols = np.arange(p + 1)
    neg = nzero = 0
    for k in range(n):
        dk = win[0, 0].real
        if abs(dk) <= eps_piv * rownorm[k]:
            if rownorm[k] == 0.0:
                return neg, nzero, k
            dk = eps_piv * rownorm[k]
            nzero += 1
        if dk < 0:
            neg += 1
        col = win[1:, 0].copy()
        win[1:, 1:] -= np.outer(col / dk, np.conj(col))
        win[:-1, :-1] = win[1:, 1:]
        nxt = k + 1 + p
        if nxt < n:
            row = a[p - cols, k + 1 + cols]
        else:
            row = np.zeros(p + 1, dtype=a.dtype)
        win[p, :] = row
        win[:, p] = np.conj(row)
    return neg, nzero, -1


def ldlt_inertia(bands: np.ndarray, tau: float, eps_piv: float = 1e-14) -> tuple[int, int]:
    """(number of negative pivots, number of perturbed pivots) of A - tau I.

    ``bands[j, i] = A[i + j, i]`` (lower band storage), real symmetric or
    complex Hermitian. No pivoting: by
    Sylvester's law the negative-pivot count equals the number of eigenvalues
    below ``tau`` whenever the factorization exists.
    """
    dtype = complex if np.iscomplexobj(bands) else float
    bands = np.ascontiguousarray(bands, dtype=dtype)
    if _jit.backend() == "numba":
        neg, nz, fail = _ldlt_inertia_nb(bands, float(tau), eps_piv)
    else:
        neg, nz, fail = _ldlt_inertia_np(bands, float(tau), eps_piv)
    if fail >= 0:
        raise NumericalFailure("LDL^T breakdown on an all-zero row", int(fail))
    return int(neg), int(nz)
