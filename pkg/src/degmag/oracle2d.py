"""Brute-force 2D counting oracle for the Landau-gauge model operator.

The operator ``1/2 (h^2 D1^2 + (h D2 - mu x1^nu/nu)^2 - (2l+1) mu h x1^(nu-1) - W(x2))``
is discretized on a Dirichlet box. The magnetic term makes the matrix complex
Hermitian; counts come from the inertia of a banded LDL^H factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .eigensolve import BandedMatrix, inertia_below_detail
from .errors import CapExceeded, DomainError
from .operators import Grid1D, ModelParams

DEFAULT_CAP = 250_000
DENSE_CAP = 6_000


@dataclass(frozen=True)
class Box2D:
    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    n1: int
    n2: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not (self.x1_min < self.x1_max and self.x2_min < self.x2_max):
            raise DomainError("box ranges must be nonempty")
        if self.n1 < 3 or self.n2 < 3:
            raise DomainError("need at least 3 interior points per direction")
        if self.n1 * self.n2 > self.cap:
            raise CapExceeded(f"n1*n2 = {self.n1 * self.n2} exceeds cap {self.cap}")

    @property
    def grid1(self) -> Grid1D:
        return Grid1D(self.x1_min, self.x1_max, self.n1)

    @property
    def grid2(self) -> Grid1D:
        return Grid1D(self.x2_min, self.x2_max, self.n2)

    @property
    def dim(self) -> int:
        return self.n1 * self.n2

    def padded(self, factor: float = 2.0, direction: str = "x2") -> "Box2D":
        """Box with the chosen side scaled about its center at unchanged spacing."""
        if direction == "x2":
            c, half = 0.5 * (self.x2_min + self.x2_max), 0.5 * (self.x2_max - self.x2_min)
            n = int(round((self.n2 + 1) * factor)) - 1
            return Box2D(self.x1_min, self.x1_max, c - factor * half, c + factor * half, self.n1, n, self.cap)
        c, half = 0.5 * (self.x1_min + self.x1_max), 0.5 * (self.x1_max - self.x1_min)
        n = int(round((self.n1 + 1) * factor)) - 1
        return Box2D(c - factor * half, c + factor * half, self.x2_min, self.x2_max, n, self.n2, self.cap)


def magnetic_resolution(params: ModelParams, box: Box2D) -> float:
    """Grid points per local magnetic length ``sqrt(h / (mu |F|))`` at the worst point.

    Where the field vanishes the relevant length is the degeneration scale
    ``(h/mu)^(1/(nu+1))``; the smaller of the two lengths is used.
    """
    nu, mu, h = params.nu, params.mu, params.h
    xmax = max(abs(box.x1_min), abs(box.x1_max))
    F = xmax ** (nu - 1)
    lengths = [(h / mu) ** (1.0 / (nu + 1))]
    if F > 0:
        lengths.append(np.sqrt(h / (mu * F)))
    d = max(box.grid1.spacing, box.grid2.spacing)
    return float(min(lengths) / d)


def build_2d(params: ModelParams, box: Box2D, scheme: str = "peierls", check_resolution: bool = True) -> BandedMatrix:
    """Hermitian band matrix, lexicographic order with x1 fastest, bandwidth n1.

    ``scheme="expanded"`` writes ``(hD2 - a)^2 = h^2 D2^2 - 2a hD2 + a^2`` with
    centered differences. ``scheme="peierls"`` attaches the phase
    ``exp(i a dx2 / h)`` to the x2 hopping instead, which is exact on x2 plane
    waves for every value of ``a``.
    """
    if check_resolution and magnetic_resolution(params, box) < 8.0:
        raise DomainError("fewer than 8 grid points per magnetic length; refine the box grid")
    nu, ell, mu, h = params.nu, params.ell, params.mu, params.h
    g1, g2 = box.grid1, box.grid2
    x1, x2 = g1.x, g2.x
    d1, d2 = g1.spacing, g2.spacing
    n1, n2 = box.n1, box.n2
    a = mu * x1**nu / nu
    W = np.asarray(params.W(x2), dtype=float)
    pot1 = -(2 * ell + 1) * mu * h * x1 ** (nu - 1)
    bands = np.zeros((n1 + 1, n1 * n2), dtype=complex)
    base = 2 * h * h / d1**2 + 2 * h * h / d2**2 + pot1
    if scheme == "expanded":
        base = base + a * a
        hop2 = -h * h / d2**2 - 1j * a * h / d2
    elif scheme == "peierls":
        hop2 = -(h * h / d2**2) * np.exp(1j * a * d2 / h)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    diag = (base[None, :] - W[:, None]).ravel()
    bands[0] = 0.5 * diag
    hop1 = np.full((n2, n1), -h * h / d1**2)
    hop1[:, 0] = 0.0  # no coupling across rows of the lexicographic order
    bands[1] = 0.5 * np.roll(hop1.ravel(), -1)
    # bands[n1, k] = A[k + n1, k]: row (i, j+1), column (i, j)
    low = np.zeros((n2, n1), dtype=complex)
    low[:-1, :] = hop2[None, :]
    bands[n1] = 0.5 * low.ravel()
    return BandedMatrix(n1, bands, n1 * n2)


@dataclass(frozen=True)
class CountInterval:
    lo: int
    hi: int

    @property
    def value(self) -> int:
        return (self.lo + self.hi) // 2


def count_below_2d_interval(matrix: BandedMatrix, tau: float) -> CountInterval:
    """Count below tau; perturbed pivots widen it to an interval."""
    neg, nz = inertia_below_detail(matrix, tau)
    return CountInterval(max(neg - nz, 0), neg + nz)


def count_below_2d(matrix: BandedMatrix, tau: float) -> int:
    return inertia_below_detail(matrix, tau)[0]


def oracle_ids(params: ModelParams, psi, box: Box2D, tau: float = 0.0, scheme: str = "peierls",
               dense_cap: int = DENSE_CAP) -> float:
    """``sum_{lambda < tau} <psi v, v>`` over box eigenpairs.

    ``psi=None`` means psi = 1 on the box and reduces to the inertia count.
    Otherwise a dense Hermitian eigensolve is used, capped at ``dense_cap``.
    """
    A = build_2d(params, box, scheme)
    if psi is None:
        return float(count_below_2d(A, tau))
    if box.dim > dense_cap:
        raise CapExceeded(f"dense path needs dim <= {dense_cap}, got {box.dim}; use psi=None for count-only mode")
    H = A.to_dense()
    vals, vecs = scipy.linalg.eigh(H, subset_by_value=(-np.inf, tau), driver="evr")
    weight = psi.evaluate(box.grid1.x, box.grid2.x).ravel()  # (n2, n1) in x1-fastest order
    return float(np.sum(weight[:, None] * np.abs(vecs) ** 2))


def bulk_count(params: ModelParams, box: Box2D, factor: float = 2.0, tau: float = 0.0,
               scheme: str = "peierls") -> tuple[float, float]:
    """Edge-free count per unit x2 length from two boxes differing only in x2 length.

    Returns ``(N(big) - N(small), extra x2 length)``; edge contributions cancel
    because both boxes carry identical walls.
    """
    big = box.padded(factor, "x2")
    n_small = count_below_2d(build_2d(params, box, scheme), tau)
    n_big = count_below_2d(build_2d(params, big, scheme), tau)
    extra = (big.x2_max - big.x2_min) - (box.x2_max - box.x2_min)
    return float(n_big - n_small), float(extra)
