"""Discretized 1D fiber operators and the scalings that connect them.

Three families share one tridiagonal carrier:

* the unit-parameter pilot ``D^2 + (eta - x^nu/nu)^2 - (2l+1) x^(nu-1)``,
* its polynomial-coefficient deformation (``alpha``, ``beta`` triples),
* the physical fiber ``1/2 (h^2 D^2 + (xi2 - mu x^nu/nu)^2 - (2l+1) mu h x^(nu-1) - W(x2))``.

``D = -i d/dx`` throughout, so ``D^2 = -d^2/dx^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, EllipticityError, InputError

Potential = Callable[[np.ndarray], np.ndarray]


def zero_potential(x2):
    return np.zeros_like(np.asarray(x2, dtype=float))


@dataclass(frozen=True)
class ConstantPotential:
    value: float

    def __call__(self, x2):
        return np.full_like(np.asarray(x2, dtype=float), self.value)

    def __repr__(self) -> str:
        return f"W={self.value!r}"


@dataclass(frozen=True)
class LinearPotential:
    slope: float
    offset: float = 0.0

    def __call__(self, x2):
        return self.offset + self.slope * np.asarray(x2, dtype=float)

    def __repr__(self) -> str:
        return f"W={self.offset!r}+{self.slope!r}*x2"


# ------------------------------------------------------------------ types


@dataclass(frozen=True)
class Grid1D:
    """Uniform interior nodes of ``[x_min, x_max]``; Dirichlet at both ends."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise InputError("grid endpoints must be finite")
        if not self.x_min < self.x_max:
            raise DomainError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"need n >= 3 interior points, got {self.n}")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(1, self.n + 1)

    @property
    def edges(self) -> np.ndarray:
        """Midpoints between consecutive nodes, boundary nodes included (n+1 values)."""
        return self.x_min + self.spacing * (np.arange(self.n + 1) + 0.5)

    def refined(self) -> "Grid1D":
        """Same interval with half the spacing."""
        return Grid1D(self.x_min, self.x_max, 2 * self.n + 1)

    def reflected(self) -> "Grid1D":
        return Grid1D(-self.x_max, -self.x_min, self.n)


@dataclass(frozen=True)
class ModelParams:
    nu: int
    ell: int
    mu: float = 1.0
    h: float = 1.0
    W: Potential = zero_potential
    alpha: tuple = (0.0, 0.0, 0.0)
    beta: tuple = (0.0, 0.0, 0.0)
    sigma: Potential | None = None
    phi: Potential | None = None

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 2:
            raise DomainError(f"nu must be an integer >= 2, got {self.nu}")
        if int(self.ell) != self.ell or self.ell < 0:
            raise DomainError(f"ell must be an integer >= 0, got {self.ell}")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not (0 < self.h <= 1):
            raise DomainError(f"h must lie in (0, 1], got {self.h}")
        if len(self.alpha) != 3 or len(self.beta) != 3:
            raise DomainError("alpha and beta are triples")
        for f in (self.sigma, self.phi):
            if f is not None and not np.isclose(float(f(np.array([0.0]))[0]), 1.0):
                raise DomainError("sigma(0) and phi(0) must equal 1")

    @property
    def coupling(self) -> float:
        """mu h^nu, the quantity that classifies the regime."""
        return self.mu * self.h**self.nu

    def regime(self, eps: float = 0.1, C0: float = 10.0) -> str:
        c = self.coupling
        if c <= eps:
            return "sub-critical"
        if c >= C0:
            return "super-critical"
        return "critical"

    def beta_condition(self) -> bool:
        """The global sufficient condition beta_j > alpha_j^2 / 2 for every j."""
        return all(b > a * a / 2 for a, b in zip(self.alpha, self.beta))


@dataclass
class TridiagOperator:
    """Symmetric tridiagonal matrix plus grid metadata.

    When ``factor`` is set the matrix equals ``factor_scale * B^T B + factor_shift``
    with ``B`` the rectangular bidiagonal ``(lower, upper)``; solvers use this to
    get eigenvalues near the shift to high relative accuracy.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    grid: Grid1D
    meta: dict = field(default_factory=dict)
    factor: tuple[np.ndarray, np.ndarray] | None = None
    factor_scale: float = 1.0
    factor_shift: float = 0.0

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        self.offdiag = np.asarray(self.offdiag, dtype=float)
        if self.offdiag.shape[0] != self.diag.shape[0] - 1:
            raise InputError("offdiag must have length n-1")
        if not (np.all(np.isfinite(self.diag)) and np.all(np.isfinite(self.offdiag))):
            raise InputError("non-finite matrix entries")

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    def norm_inf(self) -> float:
        r = np.abs(self.diag).copy()
        r[:-1] += np.abs(self.offdiag)
        r[1:] += np.abs(self.offdiag)
        return float(r.max())

    def shifted(self, c: float) -> "TridiagOperator":
        return TridiagOperator(self.diag + c, self.offdiag.copy(), self.grid, dict(self.meta),
                               self.factor, self.factor_scale, self.factor_shift + c)


@dataclass(frozen=True)
class ScalingMap:
    """Affine-free rescaling between physical and unit parameters."""

    x_factor: float
    energy_factor: float
    eta_factor: float

    def __post_init__(self):
        if not (self.x_factor > 0 and self.energy_factor > 0 and self.eta_factor > 0):
            raise DomainError("scaling factors must be positive")

    def inverse(self) -> "ScalingMap":
        return ScalingMap(1.0 / self.x_factor, 1.0 / self.energy_factor, 1.0 / self.eta_factor)

    def compose(self, other: "ScalingMap") -> "ScalingMap":
        return ScalingMap(self.x_factor * other.x_factor, self.energy_factor * other.energy_factor,
                          self.eta_factor * other.eta_factor)

    def x_to_physical(self, y):
        return self.x_factor * np.asarray(y)

    def eta_to_unit(self, xi2):
        return np.asarray(xi2) / self.eta_factor

    def energy_to_physical(self, lam):
        return self.energy_factor * np.asarray(lam)


# ---------------------------------------------------------------- potentials


def veff_pilot(nu: int, ell: int, eta: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = eta - x**nu / nu
    return w * w - (2 * ell + 1) * x ** (nu - 1)


def _bidiag(w_edges: np.ndarray, dx: float, c: float) -> tuple[np.ndarray, np.ndarray]:
    # B = c d/dx - w with w at edge midpoints; row e couples nodes e-1 and e
    upper = c / dx - 0.5 * w_edges
    lower = -c / dx - 0.5 * w_edges
    return lower, upper


def _bidiag_gram(lower, upper) -> tuple[np.ndarray, np.ndarray]:
    diag = upper[:-1] ** 2 + lower[1:] ** 2
    off = lower[1:-1] * upper[1:-1]
    return diag, off


def _check_outside(vals_at_ends: tuple[float, float], what: str):
    lo, hi = vals_at_ends
    if not (lo > 0 and hi > 0):
        raise DomainError(
            f"{what}: grid endpoint inside the classically allowed region at energy 0 "
            f"(V(x_min)={lo:.3g}, V(x_max)={hi:.3g})"
        )


def build_pilot(nu: int, ell: int, eta: float, grid: Grid1D, stencil: str = "central",
                check_domain: bool = True) -> TridiagOperator:
    """Pilot operator on ``grid``.

    ``stencil="central"`` is the plain three-point scheme. ``"factorized"``
    writes the l=0 part as ``B^T B`` with ``B = d/dx - (eta - x^nu/nu)`` at edge
    midpoints; for l >= 1 the remaining ``-2l x^(nu-1)`` goes on the diagonal.
    Both are second order.
    """
    if int(nu) != nu or nu < 2 or int(ell) != ell or ell < 0:
        raise DomainError(f"invalid (nu, ell) = ({nu}, {ell})")
    if not np.isfinite(eta):
        raise InputError("eta must be finite")
    if check_domain:
        _check_outside(tuple(veff_pilot(nu, ell, eta, [grid.x_min, grid.x_max])), "build_pilot")
    x, dx = grid.x, grid.spacing
    meta = {"eta": float(eta), "nu": int(nu), "ell": int(ell), "scale": "unit", "stencil": stencil}
    if stencil == "central":
        diag = 2.0 / dx**2 + veff_pilot(nu, ell, eta, x)
        off = np.full(grid.n - 1, -1.0 / dx**2)
        return TridiagOperator(diag, off, grid, meta)
    if stencil == "factorized":
        xe = grid.edges
        lower, upper = _bidiag(eta - xe**nu / nu, dx, 1.0)
        diag, off = _bidiag_gram(lower, upper)
        if ell == 0:
            return TridiagOperator(diag, off, grid, meta, factor=(lower, upper))
        return TridiagOperator(diag - 2 * ell * x ** (nu - 1), off, grid, meta)
    raise ValueError(f"unknown stencil {stencil!r}")


def build_general(nu: int, ell: int, eta: float, alpha, beta, grid: Grid1D,
                  check_domain: bool = True) -> TridiagOperator:
    """Polynomial-coefficient deformation; the second-order term in divergence form."""
    a1, a2, a3 = (float(a) for a in alpha)
    b1, b2, b3 = (float(b) for b in beta)
    x, xe, dx = grid.x, grid.edges, grid.spacing
    c1 = 1.0 + a1 * xe + b1 * b1 * xe * xe
    c1_nodes = 1.0 + a1 * x + b1 * b1 * x * x
    if np.any(c1 <= 0) or np.any(c1_nodes <= 0):
        bad = float(np.concatenate([xe[c1 <= 0], x[c1_nodes <= 0]])[0])
        raise EllipticityError(f"1 + a1 x + b1^2 x^2 <= 0 at x = {bad:.6g}")
    c2 = 1.0 + a2 * x + b2 * b2 * x * x
    c3 = 1.0 + a3 * x
    w = eta - x**nu / nu
    v = c2 * (w * w) - (2 * ell + 1) * c3 * x ** (nu - 1)
    if check_domain:
        ends = np.array([grid.x_min, grid.x_max])
        we = eta - ends**nu / nu
        ve = (1 + a2 * ends + b2 * b2 * ends**2) * we * we - (2 * ell + 1) * (1 + a3 * ends) * ends ** (nu - 1)
        _check_outside(tuple(ve), "build_general")
    diag = (c1[:-1] + c1[1:]) / dx**2 + v
    off = -c1[1:-1] / dx**2
    meta = {"eta": float(eta), "nu": int(nu), "ell": int(ell), "scale": "unit", "stencil": "central",
            "alpha": (a1, a2, a3), "beta": (b1, b2, b3)}
    return TridiagOperator(diag, off, grid, meta)


def fiber_potential(params: ModelParams, xi2: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = xi2 - params.mu * x**params.nu / params.nu
    return w * w - (2 * params.ell + 1) * params.mu * params.h * x ** (params.nu - 1)


def build_fiber(params: ModelParams, x2: float, xi2: float, grid: Grid1D, stencil: str = "central",
                check_domain: bool = True) -> TridiagOperator:
    """Fiber operator at ``(x2, xi2)``; x2 enters only through ``-W(x2)/2``."""
    nu, ell, mu, h = params.nu, params.ell, params.mu, params.h
    wv = float(np.asarray(params.W(np.array([x2], dtype=float)))[0])
    if check_domain:
        ends = fiber_potential(params, xi2, [grid.x_min, grid.x_max]) - wv
        _check_outside(tuple(ends), "build_fiber")
    x, dx = grid.x, grid.spacing
    meta = {"xi2": float(xi2), "x2": float(x2), "nu": nu, "ell": ell, "mu": mu, "h": h,
            "W": wv, "scale": "physical", "stencil": stencil}
    if stencil == "central":
        diag = 0.5 * (2.0 * h * h / dx**2 + fiber_potential(params, xi2, x)) - 0.5 * wv
        off = np.full(grid.n - 1, 0.5 * (-h * h / dx**2))
        return TridiagOperator(diag, off, grid, meta)
    if stencil == "factorized":
        xe = grid.edges
        lower, upper = _bidiag(xi2 - mu * xe**nu / nu, dx, h)
        diag, off = _bidiag_gram(lower, upper)
        if ell == 0:
            return TridiagOperator(0.5 * diag - 0.5 * wv, 0.5 * off, grid, meta,
                                   factor=(lower, upper), factor_scale=0.5, factor_shift=-0.5 * wv)
        diag = diag - 2 * ell * mu * h * x ** (nu - 1)
        return TridiagOperator(0.5 * diag - 0.5 * wv, 0.5 * off, grid, meta)
    raise ValueError(f"unknown stencil {stencil!r}")


def rescale_to_unit(params: ModelParams, eta: float = 0.0) -> ScalingMap:
    """Maps of the change of variables that turns the fiber into half the pilot.

    ``x = x_factor * y``, ``xi2 = eta_factor * eta`` and energies scale by
    ``energy_factor``, so that ``fiber(xi2) = energy_factor/2 * pilot(xi2/eta_factor) - W/2``.
    ``eta`` is accepted for interface symmetry; the factors do not depend on it.
    """
    nu, mu, h = params.nu, params.mu, params.h
    if not (mu > 0 and h > 0):
        raise DomainError("mu and h must be positive")
    return ScalingMap(
        x_factor=(h / mu) ** (1.0 / (nu + 1)),
        energy_factor=(mu * h**nu) ** (2.0 / (nu + 1)),
        eta_factor=(mu * h**nu) ** (1.0 / (nu + 1)),
    )


# ------------------------------------------------------------ domain choice


@dataclass(frozen=True)
class Domain:
    x_lo: float
    x_hi: float
    length: float  # smallest natural length of an included well
    wells: tuple


def _pilot_poly(nu, ell, eta):
    # coefficients in increasing powers of x
    c = np.zeros(2 * nu + 1)
    c[0] += eta * eta
    c[nu] += -2.0 * eta / nu
    c[2 * nu] += 1.0 / nu**2
    c[nu - 1] += -(2 * ell + 1)
    return np.polynomial.Polynomial(c)


def _critical_points(P) -> np.ndarray:
    dP, d2P = P.deriv(), P.deriv(2)
    r = dP.roots()
    r = np.unique(np.round(r.real[np.abs(r.imag) <= 1e-6 * (1 + np.abs(r.real))], 12))
    out = []
    for x0 in r:
        x = float(x0)
        for _ in range(50):
            d2 = d2P(x)
            if d2 == 0:
                break
            step = dP(x) / d2
            x -= step
            if abs(step) <= 1e-15 * (1 + abs(x)):
                break
        out.append(x)
    return np.unique(np.array(out))


def pilot_domain(nu: int, ell: int, eta: float, e_max: float, pad: float = 5.0) -> Domain:
    """Hull of the sublevel set ``{Veff < e_max}`` padded by ``pad`` natural lengths.

    Only wells whose bottom lies below ``e_max`` are included; for even nu and
    large eta this keeps just the well at ``x = (nu eta)^(1/nu)``.
    """
    P = _pilot_poly(nu, ell, eta)
    d2P = P.deriv(2)
    crit = _critical_points(P)
    vals = P(crit)
    minima = [c for c in crit if d2P(c) > 0 and P(c) < e_max]
    if not minima:
        # degenerate (flat) minimum; fall back to the global minimizer
        minima = [float(crit[np.argmin(vals)])]
        e_max = max(e_max, float(P(minima[0])) + 1.0)
    comps = []
    for m in minima:
        lo = _walk(P, m, e_max, -1.0, crit)
        hi = _walk(P, m, e_max, +1.0, crit)
        curv = max(float(d2P(m)) / 2.0, 1e-300)
        L = curv ** (-0.25)
        L = min(L, max(hi - lo, 1e-12))
        comps.append((lo, hi, L, float(m)))
    L = min(c[2] for c in comps)
    Lmax = max(c[2] for c in comps)
    x_lo = min(c[0] for c in comps) - pad * Lmax
    x_hi = max(c[1] for c in comps) + pad * Lmax
    return Domain(x_lo, x_hi, L, tuple(c[3] for c in comps))


def _walk(P, x0, e, direction, crit):
    # first crossing of P = e beyond x0; P is monotone between critical points
    f = lambda x: float(P(x)) - e  # noqa: E731
    ahead = sorted((c for c in crit if (c - x0) * direction > 1e-12 * (1 + abs(x0))),
                   key=lambda c: abs(c - x0))
    a = x0
    for c in ahead:
        if f(c) >= 0:
            return _root(f, a, c)
        a = c
    step = max(1.0, abs(a - x0))
    b = a + direction * step
    for _ in range(200):
        if f(b) >= 0:
            return _root(f, a, b)
        step *= 2.0
        b = a + direction * step
    raise DomainError("sublevel set appears unbounded")


def _root(f, a, b):
    lo, hi = min(a, b), max(a, b)
    return brentq(f, lo, hi, xtol=1e-13 * (1 + abs(lo) + abs(hi)), rtol=1e-14)


def grid_from_domain(dom: Domain, ppl: float, max_n: int = 400_000) -> Grid1D:
    n = int(math.ceil((dom.x_hi - dom.x_lo) / (dom.length / ppl))) - 1
    if n > max_n:
        raise DomainError(f"grid needs {n} points (cap {max_n})")
    return Grid1D(dom.x_lo, dom.x_hi, max(n, 3))


def auto_grid(nu: int, ell: int, eta: float, k: int, ppl: float = 60.0, pad: float = 5.0,
              margin: float = 10.0, max_n: int = 400_000) -> Grid1D:
    """Grid for the lowest ``k`` pilot eigenvalues.

    The energy cut starts from a harmonic estimate and is updated once from the
    computed ``lambda_{k-1}`` plus ``margin``.
    """
    from .eigensolve import eigen_lowest_k  # local import: eigensolve imports this module

    P = _pilot_poly(nu, ell, eta)
    crit = _critical_points(P)
    d2 = P.deriv(2)(crit)
    mins = crit[d2 > 0] if np.any(d2 > 0) else crit
    vmin = float(P(mins).min())
    om = float(np.sqrt(max(d2[d2 > 0].max() / 2.0, 1e-12))) if np.any(d2 > 0) else 1.0
    e_max = vmin + (2 * k - 1) * om + margin
    for _ in range(4):
        dom = pilot_domain(nu, ell, eta, e_max, pad)
        coarse = grid_from_domain(dom, min(ppl, 25.0), max_n)
        op = build_pilot(nu, ell, eta, coarse, check_domain=False)
        lam = eigen_lowest_k(op, k, 1e-8).values[-1]
        new = float(lam) + margin
        if abs(new - e_max) <= 0.05 * max(abs(new), margin):
            break
        e_max = new
    grid = grid_from_domain(pilot_domain(nu, ell, eta, e_max, pad), ppl, max_n)
    return grid


def fiber_grid(params: ModelParams, xi2: float, k: int, ppl: float = 60.0, pad: float = 5.0,
               margin: float = 10.0, max_n: int = 400_000) -> Grid1D:
    """Pilot grid mapped through the scaling; energy margin in unit scale."""
    sm = rescale_to_unit(params)
    g = auto_grid(params.nu, params.ell, float(sm.eta_to_unit(xi2)), k, ppl, pad, margin, max_n)
    return Grid1D(g.x_min * sm.x_factor, g.x_max * sm.x_factor, g.n)
