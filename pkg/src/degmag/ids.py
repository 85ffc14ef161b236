"""Fiber-integral spectral density, the magnetic Weyl term, correction and remainder sweeps.

Everything is per unit ``(2 pi h)^(-1)``: a density integrated against a
cutoff ``psi(x) = psi1(x1) psi2(x2)``. Band functions are
``Lambda_n(x2, xi2) = lambda_n(xi2) - W(x2)/2`` with ``lambda_n`` the fiber
eigenvalues at ``W = 0``, so one set of eigenvalue samples in ``xi2`` serves
every ``x2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .eigensolve import eigen_lowest_k, eigenvector
from .errors import CapExceeded, DomainError, QuadratureError
from .operators import (ConstantPotential, Grid1D, ModelParams, TridiagOperator, build_fiber, fiber_grid,
                        zero_potential)

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)

# ---------------------------------------------------------------- cutoffs


def _smoothstep(t):
    # quintic with vanishing first and second derivatives at 0 and 1 (C^2)
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True)
class Bump:
    """Equal to 1 on ``[plateau_lo, plateau_hi]``, 0 outside ``(lo, hi)``, C^2 spline between."""

    lo: float
    plateau_lo: float
    plateau_hi: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.plateau_lo <= self.plateau_hi < self.hi):
            raise DomainError("need lo < plateau_lo <= plateau_hi < hi")

    @classmethod
    def centered(cls, radius: float, plateau: float, center: float = 0.0) -> "Bump":
        return cls(center - radius, center - plateau, center + plateau, center + radius)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        up = _smoothstep((t - self.lo) / (self.plateau_lo - self.lo))
        down = _smoothstep((self.hi - t) / (self.hi - self.plateau_hi))
        return np.minimum(up, down)

    @property
    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def knots(self) -> tuple:
        return (self.lo, self.plateau_lo, self.plateau_hi, self.hi)

    def integral(self) -> float:
        # each smoothstep ramp integrates to half its width
        return (self.plateau_hi - self.plateau_lo) + 0.5 * (self.plateau_lo - self.lo) + 0.5 * (self.hi - self.plateau_hi)


@dataclass(frozen=True)
class Indicator:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError("need lo < hi")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return ((t >= self.lo) & (t <= self.hi)).astype(float)

    @property
    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def knots(self) -> tuple:
        return (self.lo, self.hi)

    def integral(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class CutoffSpec:
    """Product cutoff; ``psi1=None`` means psi1 = 1 (all fiber eigenmass counts)."""

    psi1: Bump | Indicator | None
    psi2: Bump | Indicator

    def evaluate(self, x1, x2) -> np.ndarray:
        p1 = np.ones_like(np.asarray(x1, dtype=float)) if self.psi1 is None else self.psi1(x1)
        return np.outer(self.psi2(x2), p1)


def _panel_nodes(knots, panels: int):
    """Composite Gauss-Legendre nodes and weights on the given breakpoints."""
    xs, ws = [], []
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= a:
            continue
        edges = np.linspace(a, b, panels + 1)
        for u, v in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (u + v) + 0.5 * (v - u) * GL_NODES)
            ws.append(0.5 * (v - u) * GL_WEIGHTS)
    return np.concatenate(xs), np.concatenate(ws)


# ------------------------------------------------------------ fiber setup


@dataclass(frozen=True)
class FiberSetup:
    """How fiber operators are discretized inside the density integrals.

    ``x1_grid`` fixes a Dirichlet box in x1 (used to match a 2D oracle);
    otherwise every ``xi2`` gets its own automatic grid. ``x2_spacing`` replaces
    ``(xi2 - a)^2`` by the symbol of the x2 difference scheme of the oracle
    grid, so fiber and oracle share one discretization.
    """

    x1_grid: Grid1D | None = None
    x2_spacing: float | None = None
    x2_scheme: str = "peierls"
    ppl: float = 40.0
    pad: float = 6.0
    rtol: float = 1e-12


def _w0(params: ModelParams) -> ModelParams:
    return replace(params, W=zero_potential)


def fiber_operator(params: ModelParams, xi2: float, k: int, setup: FiberSetup) -> TridiagOperator:
    """Fiber operator at ``W = 0`` for the given setup."""
    p = _w0(params)
    grid = setup.x1_grid if setup.x1_grid is not None else fiber_grid(p, xi2, k, setup.ppl, setup.pad)
    stencil = "factorized" if (p.ell == 0 and setup.x2_spacing is None) else "central"
    op = build_fiber(p, 0.0, xi2, grid, stencil, check_domain=False)
    if setup.x2_spacing is None:
        return op
    # swap the continuum symbol for the discrete x2 symbol
    x = grid.x
    a = p.mu * x**p.nu / p.nu
    d2, h = setup.x2_spacing, p.h
    t = (xi2 - a) * d2 / h
    if setup.x2_scheme == "peierls":
        sym = 2.0 * h * h * (1.0 - np.cos(t)) / d2**2
    elif setup.x2_scheme == "expanded":
        sym = 2.0 * h * h * (1.0 - np.cos(xi2 * d2 / h)) / d2**2 - 2.0 * a * h * np.sin(xi2 * d2 / h) / d2 + a * a
    else:
        raise ValueError(f"unknown x2 scheme {setup.x2_scheme!r}")
    diag = op.diag - 0.5 * (xi2 - a) ** 2 + 0.5 * sym
    return TridiagOperator(diag, op.offdiag, grid, dict(op.meta, x2_spacing=d2))


@lru_cache(maxsize=200_000)
def _fiber_eigs_cached(params: ModelParams, xi2: float, k: int, setup: FiberSetup) -> tuple:
    op = fiber_operator(params, xi2, k, setup)
    return tuple(eigen_lowest_k(op, k, setup.rtol).values)


def fiber_eigs(params: ModelParams, xi2: float, k: int, setup: FiberSetup | None = None) -> np.ndarray:
    return np.array(_fiber_eigs_cached(_w0(params), float(xi2), int(k), setup or FiberSetup()))


def _W_at(params: ModelParams, x2: float) -> float:
    return float(np.asarray(params.W(np.array([x2], dtype=float)))[0])


def band_function(params: ModelParams, x2: float, xi2: float, n: int, setup: FiberSetup | None = None) -> float:
    """``Lambda_n(x2, xi2) = lambda_n(xi2) - W(x2)/2``; the xi2 part is cached."""
    return float(fiber_eigs(params, xi2, n + 1, setup)[n]) - 0.5 * _W_at(params, x2)


def landau_scale(params: ModelParams, xi2: float) -> float:
    """``mu h gamma^(nu-1)`` with ``gamma = (nu |xi2| / mu)^(1/nu)``."""
    gamma = (params.nu * abs(xi2) / params.mu) ** (1.0 / params.nu)
    return params.mu * params.h * gamma ** (params.nu - 1)


# ---------------------------------------------------------- nondegeneracy


@dataclass
class NondegeneracyReport:
    eps0: float
    argmin: tuple  # (x2, xi2, n)
    table: np.ndarray  # rows (x2, xi2, n, Lambda, dLambda/dxi2, dLambda/dx2, lhs)


def check_nondegeneracy(params: ModelParams, x2_grid, xi2_grid, n_branches: int,
                        setup: FiberSetup | None = None, step: float = 1e-4) -> NondegeneracyReport:
    """Empirical minimum of ``|Lambda| + (|xi2|+1)|d_xi2 Lambda| + |d_x2 Lambda|``."""
    rows = []
    for xi in np.asarray(xi2_grid, dtype=float):
        dxi = step * (1.0 + abs(xi))
        lam = fiber_eigs(params, xi, n_branches, setup)
        lp = fiber_eigs(params, xi + dxi, n_branches, setup)
        lm = fiber_eigs(params, xi - dxi, n_branches, setup)
        dl = (lp - lm) / (2 * dxi)
        for x2 in np.asarray(x2_grid, dtype=float):
            dx = step * (1.0 + abs(x2))
            w = _W_at(params, x2)
            dw = (_W_at(params, x2 + dx) - _W_at(params, x2 - dx)) / (2 * dx)
            for n in range(n_branches):
                L = lam[n] - 0.5 * w
                lhs = abs(L) + (abs(xi) + 1) * abs(dl[n]) + abs(0.5 * dw)
                rows.append((x2, xi, n, L, dl[n], -0.5 * dw, lhs))
    table = np.array(rows)
    i = int(np.argmin(table[:, 6]))
    return NondegeneracyReport(float(table[i, 6]), (float(table[i, 0]), float(table[i, 1]), int(table[i, 2])), table)


# ------------------------------------------------------- level-set measure


@dataclass
class _XiSampler:
    """Eigenvalue samples on a xi2 window, grown on demand."""

    params: ModelParams
    setup: FiberSetup
    k: int

    def eigs(self, xi: float) -> np.ndarray:
        return fiber_eigs(self.params, xi, self.k, self.setup)


def _lipschitz(params: ModelParams, sampler: _XiSampler, xi: float) -> float:
    # Hellmann-Feynman: |d lambda / d xi2| <= max |xi2 - a(x)| over the grid
    grid = sampler.setup.x1_grid or fiber_grid(_w0(params), xi, sampler.k, sampler.setup.ppl, sampler.setup.pad)
    ends = np.array([grid.x_min, grid.x_max, 0.0])
    a = params.mu * np.where(ends == 0, 0.0, ends) ** params.nu / params.nu
    return float(np.max(np.abs(xi - a)))


def _level_intervals(f, a: float, b: float, fa: float, fb: float, slope: float, xtol: float,
                     depth: int, out: list, budget: list):
    """Append the sub-intervals of [a, b] where f < 0; returns unresolved width."""
    if fa * fb < 0:
        r = brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
        out.append((a, r) if fa < 0 else (r, b))
        return 0.0
    # same sign: a hidden pair of roots needs |f| to reach 0 inside
    if min(abs(fa), abs(fb)) > 0.5 * slope * (b - a):
        if fa < 0:
            out.append((a, b))
        return 0.0
    if depth == 0 or budget[0] <= 0:
        if fa < 0:
            out.append((a, b))
        return b - a
    budget[0] -= 1
    m = 0.5 * (a + b)
    fm = f(m)
    u1 = _level_intervals(f, a, m, fa, fm, slope, xtol, depth - 1, out, budget)
    u2 = _level_intervals(f, m, b, fm, fb, slope, xtol, depth - 1, out, budget)
    return u1 + u2


def _merge(intervals):
    iv = sorted(intervals)
    out = []
    for a, b in iv:
        if out and a <= out[-1][1] + 1e-15 * (1 + abs(a)):
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


@dataclass
class XiIntegral:
    value: float
    error: float
    intervals: dict  # n -> list of (lo, hi) where Lambda_n < level
    n_branches: int


def _xi_integral(params: ModelParams, level: float, window, setup: FiberSetup, k: int, psi1,
                 n_samples: int, xtol: float, max_depth: int, budget: int, weight_tol: float) -> XiIntegral:
    """``int sum_n 1{lambda_n(xi) < level} w_n(xi) dxi`` over the window(s)."""
    sampler = _XiSampler(params, setup, k)
    total, err, intervals = 0.0, 0.0, {}
    for (wa, wb) in window:
        xs = np.linspace(wa, wb, n_samples)
        lam = np.array([sampler.eigs(x) for x in xs])  # (n_samples, k)
        slope = max(_lipschitz(params, sampler, wa), _lipschitz(params, sampler, wb))
        # local slopes from the samples, with margin; the global bound caps them
        fd = np.abs(np.diff(lam, axis=0)) / np.diff(xs)[:, None]
        for n in range(k):
            f = lambda x, n=n: float(sampler.eigs(x)[n]) - level  # noqa: E731
            out, unresolved, bud = [], 0.0, [budget]
            g = lam[:, n] - level
            for i in range(n_samples - 1):
                loc = fd[max(i - 1, 0): i + 2, n].max()
                s = min(slope, 4.0 * loc + 1e-12 * slope)
                unresolved += _level_intervals(f, xs[i], xs[i + 1], g[i], g[i + 1], s, xtol, max_depth, out, bud)
            out = _merge(out)
            intervals.setdefault(n, []).extend(out)
            err += unresolved + 2 * xtol * len(out)
            if psi1 is None:
                total += sum(b - a for a, b in out)
            else:
                for a, b in out:
                    v, e = _weighted_length(params, a, b, n, k, setup, psi1, weight_tol, budget)
                    total += v
                    err += e
    return XiIntegral(total, err, intervals, k)


def _eigen_weight(params: ModelParams, xi: float, n: int, k: int, setup: FiberSetup, psi1) -> float:
    op = fiber_operator(params, xi, k, setup)
    lam = eigen_lowest_k(op, k, setup.rtol).values
    v = eigenvector(op, float(lam[n]), rtol=1e-10)
    return float(np.sum(v * v * psi1(op.grid.x)))


def _weighted_length(params, a, b, n, k, setup, psi1, tol, budget):
    """Adaptive Gauss-Legendre of ``w_n(xi)`` over [a, b]; returns (value, error).

    Without a fixed x1 box, one grid covering the automatic grids at both ends
    (at the finer spacing) is used for the whole interval, so ``w_n`` is smooth
    in xi instead of jumping where the automatic grid size changes.
    """
    if setup.x1_grid is None:
        p0 = _w0(params)
        gs = [fiber_grid(p0, x, k, setup.ppl, setup.pad) for x in (a, 0.5 * (a + b), b)]
        lo, hi = min(g.x_min for g in gs), max(g.x_max for g in gs)
        d = min(g.spacing for g in gs)
        setup = replace(setup, x1_grid=Grid1D(lo, hi, int(math.ceil((hi - lo) / d)) - 1))

    def gl(u, v):
        xs = 0.5 * (u + v) + 0.5 * (v - u) * GL_NODES
        ws = 0.5 * (v - u) * GL_WEIGHTS
        return float(np.dot(ws, [_eigen_weight(params, x, n, k, setup, psi1) for x in xs]))

    stack = [(a, b, gl(a, b))]
    total, err, steps = 0.0, 0.0, 0
    while stack:
        u, v, whole = stack.pop()
        m = 0.5 * (u + v)
        left, right = gl(u, m), gl(m, v)
        e = abs(left + right - whole)
        if e <= tol * max(v - u, 1e-300) / max(b - a, 1e-300) or v - u < 1e-10 * (1 + abs(u)):
            total += left + right
            err += e
            continue
        steps += 1
        if steps > budget:
            raise QuadratureError("weight quadrature budget exhausted", (u, v))
        stack.extend([(u, m, left), (m, v, right)])
    return total, err


# ----------------------------------------------------------- fiber_ids


@dataclass
class FiberIDS:
    value: float
    error: float
    n_branches: int
    window: tuple
    per_x2: np.ndarray | None = None  # rows (x2, weight, xi-integral)
    intervals: dict = field(default_factory=dict)


def _constant_W(params: ModelParams):
    W = params.W
    if W is zero_potential:
        return 0.0
    if isinstance(W, ConstantPotential):
        return float(W.value)
    return None


def default_xi_window(params: ModelParams, psi: CutoffSpec, tau: float, setup: FiberSetup,
                      wmax: float) -> tuple:
    """A window beyond which no band function counts.

    For a fixed x1 box, ``(xi2 - a(x))^2 / 2`` alone exceeds the level once
    ``xi2`` clears the range of ``a`` by ``R``. For the open line a bounded psi1
    is required; the window follows the guiding centers of its support plus
    ``setup.pad`` degeneration lengths.
    """
    nu, mu, h, ell = params.nu, params.mu, params.h, params.ell
    if setup.x1_grid is not None:
        g = setup.x1_grid
        xs = np.array([g.x_min, g.x_max])
        F = np.max(np.abs(xs)) ** (nu - 1)
        a = mu * np.concatenate([xs, [0.0]]) ** nu / nu
        R = math.sqrt(max(2.0 * tau + (2 * ell + 1) * mu * h * F + wmax, 0.0)) + 1.0
        if setup.x2_spacing is not None:
            R = R * 1.2
        return ((float(a.min() - R), float(a.max() + R)),)
    if psi.psi1 is None:
        raise DomainError("psi1 = 1 on the open line needs an explicit xi2 window")
    lo, hi = psi.psi1.support
    xf = (h / mu) ** (1.0 / (nu + 1))
    X = max(abs(lo), abs(hi)) + setup.pad * xf
    top = mu * X**nu / nu
    if nu % 2 == 1:
        return ((-top, top),)
    # even nu: no well for xi2 < 0, and the pilot grows like eta^2 there
    eta_f = (mu * h**nu) ** (1.0 / (nu + 1))
    return ((-eta_f * (10.0 + 2.0 * math.sqrt(max(2 * tau + wmax, 0.0) / eta_f**2)), top),)


def fiber_ids(params: ModelParams, psi: CutoffSpec, tau: float = 0.0, setup: FiberSetup | None = None,
              xi_window=None, n_branches: int | None = None, n_samples: int = 161, x2_panels: int = 4,
              xtol: float = 1e-11, max_depth: int = 30, budget: int = 20_000,
              weight_tol: float = 1e-9) -> FiberIDS:
    """``(2 pi h)^-1 int int sum_n 1{Lambda_n < tau} w_n(xi2) psi2(x2) dxi2 dx2``.

    ``w_n = sum_i v_n(x_i)^2 psi1(x_i)`` (1 when ``psi1`` is None). Crossings
    of each branch with the level are root-refined and act as breakpoints; the
    error is the sum of unresolved cell widths, root tolerances, weight
    quadrature errors and, for non-constant W, the x2 panel-halving difference.
    """
    setup = setup or FiberSetup()
    Wc = _constant_W(params)
    x2_lo, x2_hi = psi.psi2.support
    if Wc is not None:
        wmax = abs(Wc)
    else:
        probe = np.linspace(x2_lo, x2_hi, 257)
        wmax = float(np.max(np.abs(params.W(probe))))
    window = tuple(xi_window) if xi_window is not None else default_xi_window(params, psi, tau, setup, wmax)
    if np.ndim(window[0]) == 0:
        window = (tuple(window),)
    # enough branches that the top one stays above every level on the window
    level_max = tau + 0.5 * wmax
    k = n_branches or params.ell + 2
    while True:
        probe_xi = np.linspace(window[0][0], window[-1][1], 41)
        top = min(float(fiber_eigs(params, x, k, setup)[-1]) for x in probe_xi)
        if n_branches is not None or top > level_max + 1.0:
            break
        k *= 2
        if k > 512:
            raise CapExceeded("more than 512 branches below the level")
    scale = 1.0 / (2.0 * math.pi * params.h)

    def xi_part(level):
        return _xi_integral(params, level, window, setup, k, psi.psi1, n_samples, xtol, max_depth, budget, weight_tol)

    if Wc is not None:
        r = xi_part(tau + 0.5 * Wc)
        I2 = psi.psi2.integral()
        val = scale * I2 * r.value
        err = scale * I2 * r.error + 1e-13 * abs(val)
        return FiberIDS(val, err, k, window, None, r.intervals)

    def x2_quad(panels):
        xs, ws = _panel_nodes(psi.psi2.knots, panels)
        vals = np.array([xi_part(tau + 0.5 * _W_at(params, x)).value for x in xs])
        return float(np.dot(ws * psi.psi2(xs), vals)), np.column_stack([xs, ws * psi.psi2(xs), vals])

    v1, _ = x2_quad(x2_panels)
    v2, rows = x2_quad(2 * x2_panels)
    val = scale * v2
    err = scale * abs(v2 - v1) + 1e-13 * abs(val)
    return FiberIDS(val, err, k, window, rows)


# ---------------------------------------------------------------- Weyl


@dataclass
class WeylResult:
    value: float  # calibrated: (2 pi h)^-1 mu sum over occupied Landau levels
    lpm_value: float  # the (4 pi)^-1 mu h^-1 l_pm int psi |F| form
    cut_radius: float
    field: np.ndarray  # rows (x1, x2, level count) on the quadrature nodes
    bulk_count: int | None


def landau_count(ell: int, muhF, W, tau: float = 0.0):
    """Number of n >= 0 with ``(n - l) mu h F - W/2 < tau`` (``mu h F > 0``)."""
    muhF, W = np.asarray(muhF, dtype=float), np.asarray(W, dtype=float)
    t = ell + (tau + 0.5 * W) / muhF
    n = np.maximum(np.ceil(t), 0.0)
    # the quotient can round onto an integer; settle the boundary level with the defining inequality
    n = n + ((n - ell) * muhF - 0.5 * W < tau)
    return np.maximum(n - ((n - 1 - ell) * muhF - 0.5 * W >= tau) * (n > 0), 0.0)


def cut_radius(params: ModelParams, C: float = 1.0) -> float:
    """Inner zone radius ``C (mu h)^(-1/(nu-1))`` where Landau levels merge."""
    return C * (params.mu * params.h) ** (-1.0 / (params.nu - 1))


def _x1_breaks(params: ModelParams, psi1, r: float, W: float, tau: float, X: float) -> list:
    # level-count jumps at mu h |x|^(nu-1) = (tau + W/2) / (m - l)
    nu, mu, h, ell = params.nu, params.mu, params.h, params.ell
    br = {-X, X, -r, r, 0.0}
    if psi1 is not None:
        br.update(psi1.knots)
    s = tau + 0.5 * W
    for m in range(0, 4096):
        if m == ell:
            continue
        q = s / (m - ell)
        if q <= 0:
            continue
        x = (q / (mu * h)) ** (1.0 / (nu - 1))
        if x < r:
            break
        if x <= X:
            br.update((x, -x))
    return sorted(b for b in br if -X <= b <= X)


def _weyl_x1(params: ModelParams, psi1, W: float, tau: float, r: float, X: float, panels: int):
    nu, mu, h, ell = params.nu, params.mu, params.h, params.ell
    br = _x1_breaks(params, psi1, r, W, tau, X)
    xs, ws = _panel_nodes(br, panels)
    keep = np.abs(xs) >= r
    xs, ws = xs[keep], ws[keep]
    F = np.abs(xs) ** (nu - 1)
    N = landau_count(ell, mu * h * F, W, tau)
    p1 = np.ones_like(xs) if psi1 is None else psi1(xs)
    val = float(np.sum(ws * p1 * mu * F * N))
    absF = float(np.sum(ws * p1 * F))
    return val, absF, xs, N


def weyl_ids(params: ModelParams, psi: CutoffSpec, tau: float = 0.0, C: float = 1.0,
             x1_extent: float | None = None, panels: int = 2, x2_panels: int = 8) -> WeylResult:
    """Magnetic Weyl term by pointwise Landau-level counting.

    ``(2 pi h)^-1 int psi mu |F| N(x) dx`` with ``N`` the number of Landau
    levels of the frozen-field operator below ``tau``; the zone
    ``|x1| < cut_radius`` where levels merge is cut out. The
    ``(4 pi)^-1 mu h^-1 l_pm int psi |F|`` form, with ``l_pm = l`` for W > 0 and
    ``l - 1`` for W < 0, is returned alongside.
    """
    nu = params.nu
    r = cut_radius(params, C)
    if psi.psi1 is None:
        if x1_extent is None:
            raise DomainError("psi1 = 1 needs an explicit x1_extent")
        X = float(x1_extent)
    else:
        X = max(abs(psi.psi1.support[0]), abs(psi.psi1.support[1]))
    Wc = _constant_W(params)
    scale = 1.0 / (2.0 * math.pi * params.h)
    if Wc is not None:
        v, absF, xs, N = _weyl_x1(params, psi.psi1, Wc, tau, r, X, panels)
        I2 = psi.psi2.integral()
        value = scale * I2 * v
        lpm = params.ell if Wc > 0 else (params.ell - 1 if Wc < 0 else float("nan"))
        lpm_total = params.mu / (4 * math.pi * params.h) * lpm * I2 * absF
        field_ = np.column_stack([xs, np.full_like(xs, np.nan), N])
        bulk = int(N[np.argmax(np.abs(xs))]) if xs.size else None
        return WeylResult(value, lpm_total, r, field_, bulk)
    xs2, ws2 = _panel_nodes(psi.psi2.knots, x2_panels)
    total, lpm_sum, rows = 0.0, 0.0, []
    sgn = set()
    for x2, w2 in zip(xs2, ws2):
        Wv = _W_at(params, x2)
        sgn.add(np.sign(Wv))
        v, absF, xs, N = _weyl_x1(params, psi.psi1, Wv, tau, r, X, panels)
        p2 = float(psi.psi2(x2))
        total += w2 * p2 * v
        lpm = params.ell if Wv > 0 else params.ell - 1
        lpm_sum += w2 * p2 * lpm * absF
        rows.append(np.column_stack([xs, np.full_like(xs, x2), N]))
    lpm_val = params.mu / (4 * math.pi * params.h) * lpm_sum if len(sgn) == 1 and 0 not in sgn else float("nan")
    return WeylResult(scale * total, lpm_val, r, np.vstack(rows), None)


def constant_field_density(B: float, h: float, ell: int, W: float, tau: float = 0.0,
                           half_width: float | None = None, n: int = 1500) -> tuple[float, float]:
    """Brute-force level density of the constant-field operator against the Landau formula.

    Counts ``{xi : Lambda_n(xi) < tau}`` for ``1/2 (h^2 D^2 + (xi - B x)^2 - (2l+1) h B - W)``
    on a Dirichlet interval, per unit length and per ``2 pi h``; returns
    ``(numerical density, B * N_Landau)``. Guiding centers within five magnetic
    lengths of the walls are excluded from both.
    """
    lb = math.sqrt(h / B)
    L = half_width or 40 * lb
    g = Grid1D(-L, L, n)
    x = g.x
    inner = L - 8 * lb
    N = int(landau_count(ell, h * B, W, tau))
    k = N + 3
    levels = []
    xis = np.linspace(-B * inner, B * inner, 81)
    for xi in xis:
        diag = 0.5 * (2 * h * h / g.spacing**2 + (xi - B * x) ** 2 - (2 * ell + 1) * h * B - W)
        off = np.full(n - 1, -0.5 * h * h / g.spacing**2)
        lam = eigen_lowest_k(TridiagOperator(diag, off, g), k, 1e-12).values
        levels.append(int(np.sum(lam < tau)))
    levels = np.array(levels)
    if np.any(levels != levels[0]):
        raise DomainError("level count varies across guiding centers; widen the interval")
    # measure in xi per unit guiding-center length is B
    return float(levels[0] * B), float(B * N)


# ------------------------------------------------------------ correction


@dataclass
class CorrectionResult:
    value: float
    error: float
    fiber: float
    weyl: float
    cut_radius: float
    x1_extent: float
    xi_window: tuple


def matched_windows(params: ModelParams, r: float, X: float) -> tuple:
    """xi2 windows matched to ``r <= |x1| <= X`` through ``xi2 = mu x1^nu / nu``."""
    nu, mu = params.nu, params.mu
    lo, hi = mu * r**nu / nu, mu * X**nu / nu
    if nu % 2 == 1:
        return ((-hi, -lo), (lo, hi))
    return ((lo, hi),)


def correction_term(params: ModelParams, psi2, x1_extent: float, tau: float = 0.0, C: float = 1.0,
                    setup: FiberSetup | None = None, **kw) -> CorrectionResult:
    """Fiber density with psi1 = 1 minus the Weyl term, on matched x1 / xi2 windows.

    The x1 window is ``cut_radius <= |x1| <= x1_extent`` and the xi2 window its
    image under the guiding-center map; both sides use the same psi2.
    """
    r = cut_radius(params, C)
    if not r < x1_extent:
        raise DomainError(f"cut radius {r:.4g} not below x1_extent {x1_extent:.4g}")
    win = matched_windows(params, r, x1_extent)
    psi = CutoffSpec(None, psi2)
    f = fiber_ids(params, psi, tau, setup, xi_window=win, **kw)
    w = weyl_ids(params, psi, tau, C, x1_extent=x1_extent)
    err = f.error + 1e-12 * (abs(f.value) + abs(w.value))
    return CorrectionResult(f.value - w.value, err, f.value, w.value, r, x1_extent, win)


# --------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class OracleSpec:
    """2D oracle box in degeneration units ``x_f = (h/mu)^(1/(nu+1))``.

    ``x2_length`` (physical) overrides ``y2_half`` and keeps the x2 spacing
    equal to the x1 spacing. ``mode="count"`` uses psi = 1 on the box.
    """

    y1_half: float = 4.0
    y2_half: float = 4.0
    n1: int = 200
    n2: int = 200
    x2_length: float | None = None
    scheme: str = "peierls"
    mode: str = "count"
    cap: int = 250_000


def oracle_box(params: ModelParams, spec: OracleSpec):
    from .oracle2d import Box2D

    xf = (params.h / params.mu) ** (1.0 / (params.nu + 1))
    X1 = spec.y1_half * xf
    d1 = 2 * X1 / (spec.n1 + 1)
    if spec.x2_length is not None:
        n2 = int(round(spec.x2_length / d1)) - 1
        L2 = (n2 + 1) * d1
    else:
        n2 = spec.n2
        L2 = 2 * spec.y2_half * xf
    return Box2D(-X1, X1, -0.5 * L2, 0.5 * L2, spec.n1, n2, spec.cap)


@dataclass
class SweepRecord:
    params: ModelParams
    fiber_ids: float
    weyl: float
    correction: float
    remainder_RI: float
    normalized_remainder: float
    quadrature_error: float
    oracle: float = float("nan")
    discretization_error: float = 0.0
    regime: str = ""
    skipped: str = ""
    box: tuple = ()


def remainder_scale(params: ModelParams) -> float:
    """``mu^(-1/nu) h^(-1)``."""
    return params.mu ** (-1.0 / params.nu) / params.h


def remainder_point(params: ModelParams, spec: OracleSpec, tau: float = 0.0) -> SweepRecord:
    """Oracle count on a box against the fiber density on the same x1 grid and x2 length.

    ``spec.mode="count"`` compares the full box count with psi2 = 1 on the box.
    ``spec.mode="bulk"`` compares ``N(2 L2) - N(L2)`` (x2 walls cancel) with the
    fiber density over the added length. ``discretization_error`` is the
    difference between discrete and continuum x2 symbols plus the unit
    granularity of integer counts.
    """
    from .oracle2d import build_2d, bulk_count, count_below_2d

    box = oracle_box(params, spec)
    g1, d2 = box.grid1, box.grid2.spacing
    if spec.mode == "count":
        psi = CutoffSpec(None, Indicator(box.x2_min, box.x2_max))
        N = float(count_below_2d(build_2d(params, box, spec.scheme), tau))
        granularity = 0.5
    elif spec.mode == "bulk":
        N, extra = bulk_count(params, box, 2.0, tau, spec.scheme)
        psi = CutoffSpec(None, Indicator(0.0, extra))
        granularity = 1.0
    else:
        raise ValueError(f"unknown oracle mode {spec.mode!r}")
    exact = FiberSetup(x1_grid=g1, x2_spacing=d2, x2_scheme=spec.scheme)
    cont = FiberSetup(x1_grid=g1)
    f = fiber_ids(params, psi, tau, exact)
    f_cont = fiber_ids(params, psi, tau, cont)
    disc = abs(f.value - f_cont.value) + granularity
    RI = abs(N - f.value)
    reg = params.regime()
    norm = RI / remainder_scale(params) if reg == "sub-critical" else RI
    return SweepRecord(params, f.value, float("nan"), float("nan"), RI, norm, f.error, N, disc, reg,
                       box=(box.x1_min, box.x1_max, box.x2_min, box.x2_max, box.n1, box.n2))


def remainder_sweep(param_list, spec: OracleSpec, tau: float = 0.0, workers: int = 1) -> list:
    """One SweepRecord per parameter point; infeasible points are skipped with a reason."""
    from .parallel import parallel_map

    return parallel_map(_sweep_task, [(p, spec, tau) for p in param_list], workers)


def _sweep_task(args):
    p, spec, tau = args
    try:
        return remainder_point(p, spec, tau)
    except (CapExceeded, DomainError) as exc:
        nan = float("nan")
        return SweepRecord(p, nan, nan, nan, nan, nan, nan, skipped=str(exc), regime=p.regime())
