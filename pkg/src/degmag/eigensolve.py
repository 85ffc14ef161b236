"""Eigenvalues, inertia counts and eigenvectors of symmetric tridiagonal and banded matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from . import kernels
from .errors import DimensionError, DomainError, InputError, NumericalFailure
from .operators import Grid1D, TridiagOperator

EPS = np.finfo(float).eps


@dataclass
class EigenResult:
    values: np.ndarray
    error_estimates: np.ndarray
    grid_used: Grid1D | None
    residual_norms: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.error_estimates = np.asarray(self.error_estimates, dtype=float)
        if np.any(self.error_estimates < 0):
            raise ValueError("error estimates must be nonnegative")


@dataclass
class BandedMatrix:
    """Symmetric (or complex Hermitian) band matrix in lower storage: ``bands[j, i] = A[i + j, i]``."""

    bandwidth: int
    bands: np.ndarray
    dim: int

    def __post_init__(self):
        self.bands = np.asarray(self.bands, dtype=complex if np.iscomplexobj(self.bands) else float)
        if self.bandwidth < 1:
            raise InputError("bandwidth must be >= 1")
        if self.bands.shape != (self.bandwidth + 1, self.dim):
            raise InputError(f"bands shape {self.bands.shape} != {(self.bandwidth + 1, self.dim)}")
        if not np.all(np.isfinite(self.bands)):
            raise InputError("non-finite band entries")
        if np.iscomplexobj(self.bands) and np.any(self.bands[0].imag != 0):
            raise InputError("Hermitian band matrix needs a real diagonal")

    @classmethod
    def from_dense(cls, A: np.ndarray, bandwidth: int) -> "BandedMatrix":
        n = A.shape[0]
        bands = np.zeros((bandwidth + 1, n), dtype=A.dtype)
        for j in range(bandwidth + 1):
            bands[j, : n - j] = np.diagonal(A, -j)
        return cls(bandwidth, bands, n)

    def to_dense(self) -> np.ndarray:
        n = self.dim
        A = np.zeros((n, n), dtype=self.bands.dtype)
        for j in range(self.bandwidth + 1):
            d = self.bands[j, : n - j]
            A[np.arange(j, n), np.arange(n - j)] = d
            if j:
                A[np.arange(n - j), np.arange(j, n)] = np.conj(d)
        return A

    def matvec(self, v: np.ndarray) -> np.ndarray:
        n = self.dim
        out = self.bands[0] * np.asarray(v, dtype=np.result_type(self.bands, v))
        for j in range(1, self.bandwidth + 1):
            d = self.bands[j, : n - j]
            out[j:] += d * v[: n - j]
            out[: n - j] += np.conj(d) * v[j:]
        return out


# ----------------------------------------------------------------- values


def _check_k(k: int, dim: int):
    if k < 1 or k > dim:
        raise DimensionError(f"requested k={k} eigenvalues of a {dim}x{dim} matrix")


def noise_floor(op: TridiagOperator) -> float:
    """Magnitude below which a central-stencil eigenvalue is rounding noise."""
    return 4.0 * EPS * op.norm_inf()


def eigen_lowest_k(op: TridiagOperator, k: int, rtol: float = 1e-12) -> EigenResult:
    """The ``k`` smallest eigenvalues by Sturm bisection.

    Bracket width is at most ``rtol * max(1, |lambda|)``. Operators carrying a
    bidiagonal factor are solved through the singular values of the factor,
    which keeps relative accuracy for eigenvalues far below the matrix norm.
    """
    if rtol <= 0:
        raise InputError("rtol must be positive")
    _check_k(k, op.dim)
    idx = np.arange(k)
    flags: dict = {}
    if op.factor is not None:
        lower, upper = op.factor
        sig = kernels.bisect_singular_values(lower, upper, idx, rtol)
        vals = op.factor_scale * sig * sig + op.factor_shift
        err = op.factor_scale * sig * sig * 2.5 * rtol + EPS * abs(op.factor_shift)
        flags["relative_accuracy"] = True
        flags["noise_floor"] = 0.0
    else:
        vals = kernels.bisect_eigenvalues(op.diag, op.offdiag, idx, rtol, rtol)
        err = 0.5 * rtol * np.maximum(1.0, np.abs(vals))
        flags["noise_floor"] = noise_floor(op)
    gaps = np.diff(vals)
    tie = gaps <= rtol * np.maximum(1.0, np.abs(vals[1:]))
    if np.any(tie):
        flags["near_degenerate"] = [int(i) for i in np.nonzero(tie)[0]]
    return EigenResult(vals, err, op.grid, flags=flags)


def inertia_below_detail(matrix, tau: float, eps_piv: float = 1e-14) -> tuple[int, int]:
    """(count below tau, number of perturbed pivots)."""
    if isinstance(matrix, TridiagOperator):
        if matrix.factor is not None and tau > matrix.factor_shift:
            lower, upper = matrix.factor
            s = np.sqrt((tau - matrix.factor_shift) / matrix.factor_scale)
            return int(kernels.singular_counts(lower, upper, s)[0]), 0
        if matrix.factor is not None and tau <= matrix.factor_shift:
            return 0, 0
        return int(kernels.sturm_counts(matrix.diag, matrix.offdiag**2, [tau])[0]), 0
    if isinstance(matrix, BandedMatrix):
        return kernels.ldlt_inertia(matrix.bands, tau, eps_piv)
    raise InputError(f"unsupported matrix type {type(matrix).__name__}")


def inertia_below(matrix, tau: float) -> int:
    """Number of eigenvalues strictly below ``tau``."""
    return inertia_below_detail(matrix, tau)[0]


# ---------------------------------------------------------------- vectors


def eigenvector(op: TridiagOperator, lam: float, rtol: float = 1e-10,
                previous: Sequence[np.ndarray] = (), return_residual: bool = False, max_iter: int = 5):
    """Unit-norm (discrete l2) eigenvector by shifted inverse iteration."""
    n = op.dim
    anorm = op.norm_inf()
    ab = np.zeros((3, n))
    ab[0, 1:] = op.offdiag
    ab[1] = op.diag - lam
    ab[2, :-1] = op.offdiag
    # a deterministic start vector with no symmetry
    v = 1.0 + 0.1 * np.sin(np.arange(n) * 0.7 + 0.3)
    v /= np.linalg.norm(v)
    tol = 100.0 * rtol * anorm
    res = np.inf
    for _ in range(max_iter):
        for u in previous:
            v -= np.dot(u, v) * u
        try:
            with np.errstate(all="ignore"):
                w = solve_banded((1, 1), ab, v, check_finite=False)
        except np.linalg.LinAlgError:
            ab[1] += max(abs(lam), 1.0) * EPS * 16
            continue
        if not np.all(np.isfinite(w)):
            ab[1] += max(abs(lam), 1.0) * EPS * 16
            continue
        for u in previous:
            w -= np.dot(u, w) * u
        nw = np.linalg.norm(w)
        if nw == 0:
            raise NumericalFailure("inverse iteration collapsed")
        v = w / nw
        res = float(np.linalg.norm(op.matvec(v) - lam * v))
        if res <= tol:
            break
    if not res <= tol:
        raise NumericalFailure(f"inverse iteration did not converge (residual {res:.3g} > {tol:.3g})")
    # fix the sign so the largest component is positive
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return (v, res) if return_residual else v


# ------------------------------------------------------------- refinement


def refine_richardson(build: Callable[[Grid1D], TridiagOperator], k: int, grids: tuple[Grid1D, Grid1D],
                      rtol: float = 1e-12) -> EigenResult:
    """Two-grid Richardson extrapolation for a second-order stencil."""
    g1, g2 = grids
    if not np.isclose(g2.spacing, g1.spacing / 2, rtol=1e-9):
        raise DomainError("second grid must halve the spacing of the first")
    r1 = eigen_lowest_k(build(g1), k, rtol)
    r2 = eigen_lowest_k(build(g2), k, rtol)
    lc, lf = r1.values, r2.values
    vals = (4.0 * lf - lc) / 3.0
    err = np.abs(lf - lc) / 3.0 + r1.error_estimates + r2.error_estimates
    flags = {"coarse": lc, "fine": lf}
    if r2.flags.get("relative_accuracy"):
        # tiny positive values: extrapolate log lambda when the linear form loses the sign
        bad = (vals <= 0) & (lf > 0) & (lc > 0)
        if np.any(bad):
            logv = (4.0 * np.log(lf[bad]) - np.log(lc[bad])) / 3.0
            vals[bad] = np.exp(logv)
            err[bad] = vals[bad] * np.abs(np.log(lf[bad] / lc[bad])) / 3.0
            flags["log_extrapolated"] = [int(i) for i in np.nonzero(bad)[0]]
        flags["relative_accuracy"] = True
    flags["noise_floor"] = max(r1.flags.get("noise_floor", 0.0), r2.flags.get("noise_floor", 0.0))
    gaps = np.diff(vals)
    if np.any(gaps <= np.maximum(err[1:], err[:-1])):
        flags["near_degenerate"] = [int(i) for i in np.nonzero(gaps <= np.maximum(err[1:], err[:-1]))[0]]
    return EigenResult(vals, err, g2, flags=flags)


def solve_refined(build: Callable[[Grid1D], TridiagOperator], grid: Grid1D, k: int, rtol: float = 1e-12) -> EigenResult:
    return refine_richardson(build, k, (grid, grid.refined()), rtol)
