"""Eigenvalue branches over eta grids, and the fits and tests built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .eigensolve import EigenResult, solve_refined
from .errors import DomainError
from .operators import (Grid1D, ModelParams, auto_grid, build_fiber, build_general, build_pilot,
                        rescale_to_unit)
from .parallel import parallel_map


@dataclass
class EigenBranch:
    eta_grid: np.ndarray
    values: np.ndarray  # (n_branch, n_eta)
    error_estimates: np.ndarray
    params: ModelParams
    grids: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def n_branches(self) -> int:
        return self.values.shape[0]


@dataclass
class PowerLawFit:
    coefficient: float
    exponent: float
    window: tuple
    max_relative_residual: float
    offset: float = 0.0
    n_points: int = 0


@dataclass
class DecayFit(PowerLawFit):
    eps_lower: float = float("nan")
    C_upper: float = float("nan")
    monotone: bool = False
    eta_used: np.ndarray | None = None
    neg_dlog: np.ndarray | None = None
    stencil_spread: float = float("nan")


@dataclass
class ZeroCrossing:
    eta_bar: float
    branch: int
    order_r: int
    alpha_local: float
    slope: float = float("nan")
    rounding_gap: float = float("nan")
    flagged: bool = False


# --------------------------------------------------------------- eta grids


def eta_grid_geometric(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def eta_grid_uniform(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


# ------------------------------------------------------------------ tracing


def _stencil(params: ModelParams, stencil: str) -> str:
    if stencil != "auto":
        return stencil
    general = any(params.alpha) or any(params.beta)
    return "factorized" if (params.ell == 0 and not general) else "central"


def _unit(params: ModelParams) -> bool:
    return params.mu == 1.0 and params.h == 1.0


def solve_point(params: ModelParams, eta: float, k: int, settings: dict) -> tuple[EigenResult, Grid1D]:
    """Richardson-refined lowest ``k`` eigenvalues at one eta."""
    nu, ell = params.nu, params.ell
    ppl, pad, rtol = settings["ppl"], settings["pad"], settings["rtol"]
    st = _stencil(params, settings.get("stencil", "auto"))
    general = any(params.alpha) or any(params.beta)
    if settings.get("scale", "unit") == "physical" and not _unit(params):
        sm = rescale_to_unit(params)
        g = auto_grid(nu, ell, float(sm.eta_to_unit(eta)), k, ppl, pad)
        grid = Grid1D(g.x_min * sm.x_factor, g.x_max * sm.x_factor, g.n)
        build = lambda gg: build_fiber(params, 0.0, eta, gg, st, check_domain=False)  # noqa: E731
    else:
        grid = auto_grid(nu, ell, eta, k, ppl, pad)
        if general:
            build = lambda gg: build_general(nu, ell, eta, params.alpha, params.beta, gg, check_domain=False)  # noqa: E731
        else:
            build = lambda gg: build_pilot(nu, ell, eta, gg, st, check_domain=False)  # noqa: E731
    return solve_refined(build, grid, k, rtol), grid


def _trace_task(args):
    params, eta, k, settings = args
    try:
        res, grid = solve_point(params, eta, k, settings)
    except Exception as exc:  # tag with eta for the caller
        try:
            tagged = type(exc)(f"at eta={eta!r}: {exc}")
        except TypeError:
            raise exc
        raise tagged from exc
    return res.values, res.error_estimates, grid, res.flags


DEFAULTS = {"ppl": 120.0, "pad": 5.0, "rtol": 1e-13, "stencil": "auto", "scale": "unit"}


def trace_branches(params: ModelParams, eta_grid, n_branches: int, rtol: float = 1e-13,
                   workers: int = 1, **settings) -> EigenBranch:
    """Lowest ``n_branches`` eigenvalues at every eta, labeled by sorted index."""
    eta_grid = np.asarray(eta_grid, dtype=float)
    if eta_grid.ndim != 1 or eta_grid.size == 0 or np.any(np.diff(eta_grid) <= 0):
        raise DomainError("eta_grid must be a nonempty strictly increasing 1D array")
    if n_branches < 1:
        raise DomainError("need at least one branch")
    st = dict(DEFAULTS)
    st.update(settings)
    st["rtol"] = rtol
    tasks = [(params, float(e), n_branches, st) for e in eta_grid]
    out = parallel_map(_trace_task, tasks, workers)
    vals = np.array([o[0] for o in out]).T
    errs = np.array([o[1] for o in out]).T
    flags = {}
    nd = [float(eta_grid[i]) for i, o in enumerate(out) if "near_degenerate" in o[3]]
    if nd:
        flags["near_degenerate_eta"] = nd
    flags["noise_floor"] = np.array([o[3].get("noise_floor", 0.0) for o in out])
    return EigenBranch(eta_grid, vals, errs, params, [o[2] for o in out], st, flags)


def retrace(branch: EigenBranch, eta_grid, n_branches: int | None = None) -> EigenBranch:
    st = dict(branch.settings)
    rtol = st.pop("rtol")
    return trace_branches(branch.params, eta_grid, n_branches or branch.n_branches, rtol, **st)


# ---------------------------------------------------------------- spacing


def spacing_scale(nu: int, eta: float, C: float) -> tuple[str, float]:
    """Regime label and predicted gap scale in unit parameters."""
    if abs(eta) <= C:
        return "bounded", 1.0
    if eta > 0 or nu % 2 == 1:
        return "large", (1.0 + abs(eta)) ** ((nu - 1) / nu)
    return "even_negative", 1.0


@dataclass
class SpacingStats:
    rows: list  # (eta, n, gap, normalized_gap, regime)
    summary: dict  # regime -> (min, max)


def spacing_stats(branch: EigenBranch, C: float = 1.0, n_max: int | None = None) -> SpacingStats:
    """Gaps ``lambda_{n+1} - lambda_n`` normalized by the regime's scale.

    Physical-scale branches are first mapped to unit scale.
    """
    if branch.n_branches < 2:
        raise DomainError("need at least two branches")
    vals, etas = branch.values, branch.eta_grid
    if branch.settings.get("scale") == "physical" and not _unit(branch.params):
        sm = rescale_to_unit(branch.params)
        vals = 2.0 * (vals + 0.5 * float(branch.params.W(np.array([0.0]))[0])) / sm.energy_factor
        etas = sm.eta_to_unit(etas)
    top = branch.n_branches - 1 if n_max is None else min(n_max, branch.n_branches - 1)
    rows, summary = [], {}
    for j, eta in enumerate(etas):
        label, scale = spacing_scale(branch.params.nu, float(eta), C)
        for n in range(top):
            gap = float(vals[n + 1, j] - vals[n, j])
            ng = gap / scale
            rows.append((float(branch.eta_grid[j]), n, gap, ng, label))
            lo, hi = summary.get(label, (math.inf, -math.inf))
            summary[label] = (min(lo, ng), max(hi, ng))
    return SpacingStats(rows, summary)


def sign_separation(branch: EigenBranch, eta_min: float) -> dict:
    """Empirical epsilon in ``sign(n-l) lambda_n >= eps |n-l| (1+eta)^((nu-1)/nu)``.

    Returns, per n != l, the minimum over eta >= eta_min of
    ``sign(n-l) lambda_n / (|n-l| (1+eta)^((nu-1)/nu))``; positive means the
    separation holds on the grid.
    """
    nu, ell = branch.params.nu, branch.params.ell
    sel = branch.eta_grid >= eta_min
    out = {}
    for n in range(branch.n_branches):
        if n == ell:
            continue
        s = np.sign(n - ell)
        scale = abs(n - ell) * (1 + branch.eta_grid[sel]) ** ((nu - 1) / nu)
        out[n] = float(np.min(s * branch.values[n, sel] / scale))
    return out


@dataclass
class MixedScaleReport:
    eps: dict  # n -> min over eta of sign(n-l)(lambda_n + W/2) / (|n-l| (T_fixed + T_eta))
    rows: list  # (eta, T_fixed, T_eta, dominant term)


def mixed_scale_separation(branch: EigenBranch) -> MixedScaleReport:
    """Separation of physical-scale branches n != l against the two-term scale.

    ``T_fixed = c^(2/(nu+1))`` and ``T_eta = |eta|^((nu-1)/nu) c^(1/nu)`` with
    ``c = mu h^nu``. Which term dominates at each eta is recorded, not assumed.
    """
    if branch.settings.get("scale") != "physical":
        raise DomainError("mixed-scale separation needs a physical-scale branch")
    p = branch.params
    nu, ell, c = p.nu, p.ell, p.coupling
    half_w = 0.5 * float(p.W(np.array([0.0]))[0])
    t_fix = c ** (2.0 / (nu + 1))
    t_eta = np.abs(branch.eta_grid) ** ((nu - 1) / nu) * c ** (1.0 / nu)
    rows = [(float(e), t_fix, float(t), "eta" if t > t_fix else "fixed") for e, t in zip(branch.eta_grid, t_eta)]
    eps = {}
    for n in range(branch.n_branches):
        if n != ell:
            s = np.sign(n - ell)
            eps[n] = float(np.min(s * (branch.values[n] + half_w) / (abs(n - ell) * (t_fix + t_eta))))
    return MixedScaleReport(eps, rows)


def continuity_violations(branch: EigenBranch) -> list:
    """Steps violating ``|d lambda| <= L |d eta|`` with ``L = 2 max |eta - x^nu/nu|``."""
    nu = branch.params.nu
    bad = []
    for j in range(len(branch.eta_grid) - 1):
        e0, e1 = branch.eta_grid[j], branch.eta_grid[j + 1]
        L = 0.0
        for e, g in ((e0, branch.grids[j]), (e1, branch.grids[j + 1])):
            L = max(L, 2.0 * float(np.max(np.abs(e - np.array([g.x_min, g.x_max]) ** nu / nu))),
                    2.0 * abs(e))
        d = np.abs(branch.values[:, j + 1] - branch.values[:, j])
        tol = L * (e1 - e0) + branch.error_estimates[:, j] + branch.error_estimates[:, j + 1]
        for n in np.nonzero(d > tol)[0]:
            bad.append((float(e0), float(e1), int(n)))
    return bad


# ------------------------------------------------------------------- fits


def _window_mask(etas, window):
    lo, hi = window
    return (etas >= lo) & (etas <= hi)


def fit_power_law(branch: EigenBranch, n: int, window) -> PowerLawFit:
    """Least squares ``log lambda_n = log c + p log eta`` on the window."""
    m = _window_mask(branch.eta_grid, window)
    if m.sum() < 2:
        raise DomainError(f"fewer than two points in window {window}")
    lam, eta = branch.values[n, m], branch.eta_grid[m]
    if np.any(lam <= 0) or np.any(eta <= 0):
        raise DomainError("power-law fit needs positive eta and lambda on the window")
    A = np.vstack([np.ones_like(eta), np.log(eta)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(lam), rcond=None)
    pred = np.exp(A @ coef)
    res = float(np.max(np.abs(lam / pred - 1.0)))
    return PowerLawFit(float(np.exp(coef[0])), float(coef[1]), (float(eta[0]), float(eta[-1])), res,
                       n_points=int(m.sum()))


def kappa_target(nu: int, ell: int) -> float:
    from .perturbation import omega2

    return float(omega2(nu, ell)) * nu ** (-2.0 / nu)


def _offset_power_fit(eta, y):
    # y = k eta^p + c; p by 1D minimization, (k, c) by linear least squares
    def sse(p):
        A = np.vstack([eta**p, np.ones_like(eta)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(np.sum((A @ coef - y) ** 2)), coef

    r = minimize_scalar(lambda p: sse(p)[0], bounds=(0.2, 5.0), method="bounded",
                        options={"xatol": 1e-10})
    _, coef = sse(r.x)
    return float(r.x), float(coef[0]), float(coef[1])


def representable(branch: EigenBranch, n: int, floor: float) -> np.ndarray:
    lam = branch.values[n]
    nf = branch.flags.get("noise_floor", np.zeros_like(lam))
    return (lam > floor) & (lam > 10.0 * branch.error_estimates[n]) & (lam > 100.0 * nf)


def fit_exponential_decay(branch: EigenBranch, window=None, n: int = 0, floor: float = 1e-280,
                          widths=(0.02, 0.04, 0.08)) -> DecayFit:
    """Fit ``-log Lambda = k2 eta^p + c`` and test the log-derivative sandwich.

    Only even nu, l = 0 qualifies; points must be representable (above
    ``floor``, above ten error estimates and above the stencil noise). The
    derivative ``-d log Lambda / d eta`` is taken by central differences at
    three widths; their spread is reported and the widest-consistent
    Richardson value is used.
    """
    p = branch.params
    if p.nu % 2 == 1 or p.ell != 0:
        raise DomainError("exponential decay applies to even nu and l = 0 only")
    ok = representable(branch, n, floor) & (branch.eta_grid > 0)
    if window is not None:
        ok &= _window_mask(branch.eta_grid, window)
    if ok.sum() < 4:
        raise DomainError("fewer than four representable points in the window")
    eta, lam = branch.eta_grid[ok], branch.values[n, ok]
    y = -np.log(lam)
    pexp, k2, c = _offset_power_fit(eta, y)
    pred = k2 * eta**pexp + c
    res = float(np.max(np.abs(pred - y) / np.abs(y)))
    # derivative sandwich from fresh solves at eta +- delta
    ders = []
    for d in widths:
        grid = np.concatenate([eta - d, eta + d])
        order = np.argsort(grid)
        b = retrace(branch, grid[order], n + 1)
        v = np.empty_like(grid)
        v[order] = b.values[n]
        ders.append(-(np.log(v[len(eta):]) - np.log(v[: len(eta)])) / (2 * d))
    ders = np.array(ders)
    # second-order central differences: Richardson on the two narrowest widths
    best = (4.0 * ders[0] - ders[1]) / 3.0
    spread = float(np.max(np.abs(ders - best) / np.abs(best)))
    ratio = best / eta ** (1.0 / p.nu)
    mono = bool(np.all(np.diff(lam) < 0))
    return DecayFit(float(k2), float(pexp), (float(eta[0]), float(eta[-1])), res, offset=float(c),
                    n_points=int(ok.sum()), eps_lower=float(ratio.min()), C_upper=float(ratio.max()),
                    monotone=mono, eta_used=eta, neg_dlog=best, stencil_spread=spread)


# ------------------------------------------------------------------ zeros


def _branch_value(branch: EigenBranch, n: int, eta: float) -> float:
    res, _ = solve_point(branch.params, eta, n + 1, branch.settings)
    return float(res.values[n])


def _identically_zero(branch: EigenBranch, n: int) -> bool:
    lam = branch.values[n]
    tol = np.maximum(10 * branch.error_estimates[n], 1e-8 * np.maximum(1.0, np.abs(branch.eta_grid)) ** 2)
    return bool(np.all(np.abs(lam) <= tol))


def detect_zeros(branch: EigenBranch, xtol: float = 1e-9, decades: float = 1.0, n_slope: int = 9) -> list:
    """Sign changes of each branch, refined by bisection in eta, with local order.

    The order ``r`` is the log-log slope of ``|lambda_n|`` against
    ``|eta - eta_bar|`` over one decade below the bracket scale, on both sides.
    """
    out = []
    for n in range(branch.n_branches):
        if _identically_zero(branch, n):
            continue
        lam = branch.values[n]
        for j in np.nonzero(np.sign(lam[:-1]) * np.sign(lam[1:]) < 0)[0]:
            a, b = float(branch.eta_grid[j]), float(branch.eta_grid[j + 1])
            fa = float(lam[j])
            for _ in range(200):
                if b - a <= xtol * max(1.0, abs(a)):
                    break
                m = 0.5 * (a + b)
                fm = _branch_value(branch, n, m)
                if fm == 0:
                    a = b = m
                    break
                if np.sign(fm) == np.sign(fa):
                    a, fa = m, fm
                else:
                    b = m
            eb = 0.5 * (a + b)
            width = float(branch.eta_grid[j + 1] - branch.eta_grid[j])
            d_hi = 0.1 * width
            ds = d_hi * np.logspace(-decades, 0, n_slope)
            logs, logv, signed = [], [], []
            for s in (-1.0, 1.0):
                for d in ds:
                    v = _branch_value(branch, n, eb + s * d)
                    logs.append(math.log(d))
                    logv.append(math.log(max(abs(v), 1e-300)))
                    signed.append((s * d, v))
            slope = float(np.polyfit(logs, logv, 1)[0])
            r = max(1, int(round(slope)))
            gap = abs(slope - round(slope))
            sd = np.array(signed)
            alpha = float(np.median(sd[:, 1] / sd[:, 0] ** r))
            out.append(ZeroCrossing(eb, n, r, alpha, slope, gap, gap > 0.2))
    return out


def simultaneous_crossings(crossings: list, resolution: float) -> list:
    """Pairs of crossings on different branches closer than ``resolution``."""
    bad = []
    for i, a in enumerate(crossings):
        for b in crossings[i + 1:]:
            if a.branch != b.branch and abs(a.eta_bar - b.eta_bar) <= resolution:
                bad.append((a, b))
    return bad


def large_eta_signs(branch: EigenBranch, eta_min: float) -> dict:
    """Whether ``sign(lambda_n) = sign(n - l)`` for all eta >= eta_min, per n != l."""
    ell = branch.params.ell
    sel = branch.eta_grid >= eta_min
    return {n: bool(np.all(np.sign(branch.values[n, sel]) == np.sign(n - ell)))
            for n in range(branch.n_branches) if n != ell}


def with_settings(branch: EigenBranch, **kw) -> EigenBranch:
    st = dict(branch.settings)
    st.update(kw)
    return replace(branch, settings=st)


# ------------------------------------------------------------- zero mode


@dataclass
class ZeroModeResidual:
    eta: float
    residual: float  # ||A v|| / ||D^2 v|| on interior rows
    residual_refined: float
    order: float  # log2 of the ratio; 2 for a second-order stencil


def zero_mode_residual(nu: int, eta: float, ppl: float = 120.0, pad: float = 5.0) -> ZeroModeResidual:
    """Apply the central pilot stencil (l = 0) to ``exp(eta x - x^(nu+1)/(nu(nu+1)))``.

    That function is annihilated by ``d/dx - (eta - x^nu/nu)`` and so by the
    continuous operator; the discrete residual is pure truncation error. Rows
    touching the Dirichlet ends are dropped since the sampled function is not
    zero there.
    """
    if nu % 2 == 0:
        raise DomainError("the explicit zero mode is normalizable only for odd nu")
    g = auto_grid(nu, 0, eta, 1, ppl, pad)
    res = []
    for gg in (g, g.refined()):
        x = gg.x
        lv = eta * x - x ** (nu + 1) / (nu * (nu + 1))
        v = np.exp(lv - lv.max())
        r = build_pilot(nu, 0, eta, gg, "central", check_domain=False).matvec(v)[1:-1]
        d2 = (v[:-2] - 2 * v[1:-1] + v[2:]) / gg.spacing**2
        res.append(float(np.linalg.norm(r) / np.linalg.norm(d2)))
    return ZeroModeResidual(float(eta), res[0], res[1], math.log2(res[0] / res[1]))
