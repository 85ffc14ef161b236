"""Exact Rayleigh-Schrodinger coefficients for the pilot branch lambda_l near eta = +infinity.

After the shift ``x -> x + gamma`` and the rescaling ``x -> gamma^((1-nu)/2) x``
the pilot operator equals ``gamma^(nu-1) b_eps`` with ``eps = gamma^(-(nu+1)/2)``
and ``b_eps = h0 + eps h1 + eps^2 h2 + ...``, ``h0 = D^2 + x^2 - (2l+1)``.
Everything here is computed in exact arithmetic on Hermite functions ``v_k``
using the ladder rules ``(x - iD) v_k = sqrt(2k+2) v_{k+1}`` and
``(x + iD) v_k = sqrt(2k) v_{k-1}``.

Numbers are finite sums ``sum q_r sqrt(r)`` with rational ``q_r`` and squarefree
``r`` (:class:`Surd`). Vectors carry a global power of ``i`` because ``D`` is
``-i d/dx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DiscrepancyError, DomainError, NumericalFailure

# ------------------------------------------------------------------ surds


@lru_cache(maxsize=4096)
def squarefree_split(n: int) -> tuple[int, int]:
    """``n = s^2 r`` with ``r`` squarefree; returns ``(s, r)``."""
    if n < 0:
        raise ValueError("negative radicand")
    if n == 0:
        return 0, 1
    s, r, p = 1, 1, 2
    m = n
    while p * p <= m:
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            r *= p
        p += 1
    return s, r * m


@dataclass(frozen=True)
class Surd:
    """Exact value ``sum_r q_r sqrt(r)``; ``terms`` maps squarefree r to q_r != 0."""

    terms: tuple = ()

    @staticmethod
    def of(q=0, radicand: int = 1) -> "Surd":
        s, r = squarefree_split(int(radicand))
        q = Fraction(q) * s
        return Surd(((r, q),)) if q != 0 else Surd()

    @staticmethod
    def sqrt(n: int) -> "Surd":
        return Surd.of(1, n)

    def _dict(self) -> dict:
        return dict(self.terms)

    @staticmethod
    def _from(d: Mapping[int, Fraction]) -> "Surd":
        return Surd(tuple(sorted((r, q) for r, q in d.items() if q != 0)))

    def __add__(self, other):
        other = _as_surd(other)
        d = self._dict()
        for r, q in other.terms:
            d[r] = d.get(r, Fraction(0)) + q
        return Surd._from(d)

    __radd__ = __add__

    def __neg__(self):
        return Surd(tuple((r, -q) for r, q in self.terms))

    def __sub__(self, other):
        return self + (-_as_surd(other))

    def __rsub__(self, other):
        return _as_surd(other) - self

    def __mul__(self, other):
        other = _as_surd(other)
        d: dict = {}
        for r1, q1 in self.terms:
            for r2, q2 in other.terms:
                g = math.gcd(r1, r2)
                # sqrt(r1) sqrt(r2) = g sqrt(r1 r2 / g^2), and r1 r2 / g^2 is squarefree
                r = (r1 // g) * (r2 // g)
                d[r] = d.get(r, Fraction(0)) + q1 * q2 * g
        return Surd._from(d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Fraction(other)
        return Surd(tuple((r, q / other) for r, q in self.terms))

    def __eq__(self, other):
        try:
            return self.terms == _as_surd(other).terms
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_rational(self) -> bool:
        return all(r == 1 for r, _ in self.terms)

    def to_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is irrational")
        return self.terms[0][1] if self.terms else Fraction(0)

    def __float__(self):
        return float(sum(float(q) * math.sqrt(r) for r, q in self.terms))

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{q}" if r == 1 else f"{q}*sqrt({r})" for r, q in self.terms)


def _as_surd(v) -> Surd:
    if isinstance(v, Surd):
        return v
    if isinstance(v, (int, Fraction)):
        return Surd.of(v)
    raise TypeError(f"cannot convert {type(v).__name__} to Surd exactly")


# ------------------------------------------------------------- vectors


@dataclass(frozen=True)
class HermiteVector:
    """``i^ipow * sum_k coeffs[k] v_k`` with exact coefficients."""

    coeffs: tuple = ()  # sorted (k, Surd) pairs, nonzero only
    ipow: int = 0

    @staticmethod
    def basis(k: int) -> "HermiteVector":
        if k < 0:
            raise DomainError("basis index must be >= 0")
        return HermiteVector(((k, Surd.of(1)),))

    @staticmethod
    def from_dict(d: Mapping[int, Surd], ipow: int = 0) -> "HermiteVector":
        items = tuple(sorted((k, v) for k, v in d.items() if not v.is_zero()))
        return HermiteVector(items, ipow % 4 if items else 0)

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    @property
    def support(self) -> tuple:
        return tuple(k for k, _ in self.coeffs)

    def __getitem__(self, k: int) -> Surd:
        return self.as_dict().get(k, Surd())

    def scale(self, c) -> "HermiteVector":
        c = _as_surd(c)
        return HermiteVector.from_dict({k: v * c for k, v in self.coeffs}, self.ipow)

    def times_i(self, p: int = 1) -> "HermiteVector":
        return HermiteVector(self.coeffs, (self.ipow + p) % 4 if self.coeffs else 0)

    def __add__(self, other: "HermiteVector") -> "HermiteVector":
        if not other.coeffs:
            return self
        if not self.coeffs:
            return other
        a, b = self, other
        dp = (b.ipow - a.ipow) % 4
        if dp == 0:
            sign = 1
        elif dp == 2:
            sign = -1
        else:
            raise ValueError("adding vectors with phases differing by i is not representable")
        d = a.as_dict()
        for k, v in b.coeffs:
            d[k] = d.get(k, Surd()) + v * sign
        return HermiteVector.from_dict(d, a.ipow)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def inner(self, other: "HermiteVector") -> tuple[Surd, int]:
        """``<self, other>`` (linear in self) as ``(value, power of i)``."""
        d = other.as_dict()
        acc = Surd()
        for k, v in self.coeffs:
            if k in d:
                acc = acc + v * d[k]
        return acc, (self.ipow - other.ipow) % 4

    def real_inner(self, other: "HermiteVector") -> Surd:
        val, p = self.inner(other)
        if val.is_zero():
            return val
        if p == 0:
            return val
        if p == 2:
            return -val
        raise ValueError("inner product is imaginary")

    def norm2(self) -> Fraction:
        return self.real_inner(self).to_fraction()

    def to_array(self, kmax: int | None = None) -> np.ndarray:
        kmax = max(self.support, default=0) if kmax is None else kmax
        out = np.zeros(kmax + 1)
        for k, v in self.coeffs:
            out[k] = float(v)
        return out


# ---------------------------------------------------------------- ladder


def raise_op(v: HermiteVector) -> HermiteVector:
    """``(x - iD) v_k = sqrt(2k+2) v_{k+1}``."""
    return HermiteVector.from_dict({k + 1: c * Surd.sqrt(2 * k + 2) for k, c in v.coeffs}, v.ipow)


def lower_op(v: HermiteVector) -> HermiteVector:
    """``(x + iD) v_k = sqrt(2k) v_{k-1}``."""
    return HermiteVector.from_dict({k - 1: c * Surd.sqrt(2 * k) for k, c in v.coeffs if k > 0}, v.ipow)


def apply_x(v: HermiteVector) -> HermiteVector:
    # x = ((x - iD) + (x + iD)) / 2
    return (raise_op(v) + lower_op(v)).scale(Fraction(1, 2))


def apply_D(v: HermiteVector) -> HermiteVector:
    # iD = ((x + iD) - (x - iD)) / 2, so D = -i * that
    return (lower_op(v) - raise_op(v)).scale(Fraction(1, 2)).times_i(-1)


def ladder_apply(v: HermiteVector, word: Sequence[str]) -> HermiteVector:
    """Apply the operator monomial ``word[0] word[1] ... word[-1]`` (rightmost first)."""
    out = v
    for letter in reversed(tuple(word)):
        if letter == "x":
            out = apply_x(out)
        elif letter == "D":
            out = apply_D(out)
        else:
            raise ValueError(f"unknown letter {letter!r}; use 'x' or 'D'")
    return out


def poly_apply(v: HermiteVector, poly: Mapping[int, Fraction]) -> HermiteVector:
    """Apply the multiplication operator ``sum_p poly[p] x^p``."""
    out = HermiteVector()
    cur = v
    for p in range(max(poly, default=-1) + 1):
        c = poly.get(p, 0)
        if c != 0:
            out = out + cur.scale(Fraction(c))
        cur = apply_x(cur)
    return out


def apply_h0(v: HermiteVector, ell: int) -> HermiteVector:
    """``(D^2 + x^2 - (2l+1)) v`` through the ladder rules."""
    return ladder_apply(v, "DD") + ladder_apply(v, "xx") + v.scale(-(2 * ell + 1))


# ------------------------------------------------------- series expansion


def _binom(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0


def expansion_terms(nu: int, ell: int, order: int = 2) -> list[dict]:
    """Polynomial coefficients of ``h_0 - D^2, h_1, h_2, ...`` derived from b_eps.

    ``b_eps = D^2 + x^2 g(eps x)^2 - (2l+1)(1+eps x)^(nu-1)`` with
    ``g(t) = ((1+t)^nu - 1)/(nu t) = sum_j C(nu, j+1) t^j / nu``.
    """
    g = [Fraction(_binom(nu, j + 1), nu) for j in range(order + 1)]
    g2 = [sum(g[i] * g[m - i] for i in range(m + 1)) for m in range(order + 1)]
    out = []
    for m in range(order + 1):
        poly: dict = {}
        if g2[m]:
            poly[m + 2] = g2[m]
        c = -(2 * ell + 1) * _binom(nu - 1, m)
        if c:
            poly[m] = poly.get(m, Fraction(0)) + c
        out.append(poly)
    return out


def build_h1_h2(nu: int, ell: int) -> tuple[dict, dict]:
    """Exact coefficient maps {power: Fraction} of ``h1`` and ``h2``.

    Derived from the expansion of ``b_eps`` and checked against the closed forms
    ``h1 = (nu-1)(x^3 - (2l+1)x)`` and
    ``h2 = (nu-1)((7nu-11)/12 x^4 - (2l+1)(nu-2)/2 x^2)``.
    """
    _check(nu, ell)
    _, h1, h2 = expansion_terms(nu, ell, 2)
    h1 = {p: c for p, c in h1.items() if c != 0}
    h2 = {p: c for p, c in h2.items() if c != 0}
    h1_closed = {3: Fraction(nu - 1), 1: Fraction(-(nu - 1) * (2 * ell + 1))}
    h2_closed = {4: Fraction((nu - 1) * (7 * nu - 11), 12), 2: Fraction(-(nu - 1) * (2 * ell + 1) * (nu - 2), 2)}
    h1_closed = {p: c for p, c in h1_closed.items() if c != 0}
    h2_closed = {p: c for p, c in h2_closed.items() if c != 0}
    if h1 != h1_closed:
        raise DiscrepancyError("h1 coefficients", h1, h1_closed)
    if h2 != h2_closed:
        raise DiscrepancyError("h2 coefficients", h2, h2_closed)
    return h1, h2


# ------------------------------------------------------ perturbation chain


@dataclass(frozen=True)
class PerturbationResult:
    nu: int
    ell: int
    omega2: Fraction
    h1_u0: HermiteVector
    u1: HermiteVector
    inner_h0: Fraction
    inner_h2: Fraction
    kappa: float


def _check(nu, ell):
    if int(nu) != nu or nu < 2:
        raise DomainError(f"nu must be an integer >= 2, got {nu}")
    if int(ell) != ell or ell < 0:
        raise DomainError(f"ell must be an integer >= 0, got {ell}")


def solve_first_order(nu: int, ell: int) -> HermiteVector:
    """``u1`` with ``h0 u1 + h1 u0 = 0`` and ``<u1, u0> = 0``."""
    _check(nu, ell)
    h1, _ = build_h1_h2(nu, ell)
    f = poly_apply(HermiteVector.basis(ell), h1)
    if not f[ell].is_zero():
        raise NumericalFailure(f"<h1 u0, u0> = {f[ell]} != 0; first-order equation unsolvable")
    u1 = {k: c / (-2 * (k - ell)) for k, c in f.coeffs if k != ell}
    return HermiteVector.from_dict(u1, f.ipow)


def omega2_closed(nu: int, ell: int) -> Fraction:
    return Fraction((nu - 1) * ell * (ell + 1), 2)


def inner_h0_closed(nu: int, ell: int) -> Fraction:
    return Fraction((nu - 1) ** 2 * (-2 * ell * ell - 2 * ell + 3), 16)


def inner_h2_closed(nu: int, ell: int) -> Fraction:
    return (Fraction((nu - 1) * (7 * nu - 11) * (2 * ell * ell + 2 * ell + 1), 16)
            - Fraction((nu - 1) * (nu - 2) * (2 * ell + 1) ** 2, 4))


def perturbation_result(nu: int, ell: int) -> PerturbationResult:
    """Run the whole chain; every closed form is checked exactly."""
    _check(nu, ell)
    h1, h2 = build_h1_h2(nu, ell)
    u0 = HermiteVector.basis(ell)
    h1u0 = poly_apply(u0, h1)
    u1 = solve_first_order(nu, ell)
    resid = apply_h0(u1, ell) + h1u0
    if resid.coeffs:
        raise DiscrepancyError("h0 u1 + h1 u0", resid, 0)
    inner_h0 = apply_h0(u1, ell).real_inner(u1).to_fraction()
    inner_h2 = poly_apply(u0, h2).real_inner(u0).to_fraction()
    om = inner_h2 - inner_h0
    # the first form: <h1 u1 + h2 u0, u0>
    om_direct = (poly_apply(u1, h1) + poly_apply(u0, h2)).real_inner(u0).to_fraction()
    if om != om_direct:
        raise DiscrepancyError("omega2 by the two routes", om_direct, om)
    if inner_h0 != inner_h0_closed(nu, ell):
        raise DiscrepancyError("<h0 u1, u1>", inner_h0, inner_h0_closed(nu, ell))
    if inner_h2 != inner_h2_closed(nu, ell):
        raise DiscrepancyError("<h2 u0, u0>", inner_h2, inner_h2_closed(nu, ell))
    if om != omega2_closed(nu, ell):
        raise DiscrepancyError("omega2", om, omega2_closed(nu, ell))
    return PerturbationResult(nu, ell, om, h1u0, u1, inner_h0, inner_h2, float(om) * nu ** (-2.0 / nu))


def omega2(nu: int, ell: int) -> Fraction:
    """Second-order coefficient; raises :class:`DiscrepancyError` if the closed form fails."""
    return perturbation_result(nu, ell).omega2


def intermediate_inner_products(nu: int, ell: int) -> tuple[Fraction, Fraction]:
    r = perturbation_result(nu, ell)
    return r.inner_h0, r.inner_h2


# ------------------------------------------------ derivative coefficients


@dataclass(frozen=True)
class DerivativeCoeffs:
    kappa1: Fraction
    kappa2: Fraction
    kappa3: Fraction
    kappa4: float
    chain_factor: int


def derivative_coeffs(nu: int, ell: int) -> DerivativeCoeffs:
    """Leading coefficients of ``d lambda_l / d alpha_j = kappa_j eta + ...`` at alpha = beta = 0.

    Hellmann-Feynman at the shifted, rescaled well gives
    ``d lambda / d alpha_j ~ gamma^nu <k_j v_l, v_l>`` with ``k = D^2, x^2, -(2l+1)``;
    ``gamma^nu = nu eta`` is the chain factor. The three derivatives sum to
    ``<x a u, u> = lambda <x>`` and ``<x> ~ gamma = (nu eta)^(1/nu)``, which gives
    ``kappa4 = nu^(1/nu)``.
    """
    _check(nu, ell)
    u0 = HermiteVector.basis(ell)
    d2 = ladder_apply(u0, "DD").real_inner(u0).to_fraction()
    x2 = ladder_apply(u0, "xx").real_inner(u0).to_fraction()
    chain = nu
    k1, k2, k3 = chain * d2, chain * x2, Fraction(-chain * (2 * ell + 1))
    if not (k1 == k2 == -k3 / 2):
        raise DiscrepancyError("kappa1 = kappa2 = -kappa3/2", (k1, k2, k3), "equal")
    return DerivativeCoeffs(k1, k2, k3, float(nu ** (1.0 / nu)), chain)


# ----------------------------------------------------- numerical epsilon series


def _g_poly(nu: int, t: np.ndarray) -> np.ndarray:
    # ((1+t)^nu - 1)/(nu t) without cancellation
    out = np.zeros_like(t)
    for j in range(nu - 1, -1, -1):
        out = out * t + _binom(nu, j + 1) / nu
    return out


def build_b_eps(nu: int, ell: int, eps: float, grid):
    """Discretize ``b_eps`` exactly (not truncated) on ``grid``."""
    from .operators import TridiagOperator

    y, dy = grid.x, grid.spacing
    t = eps * y
    v = y * y * _g_poly(nu, t) ** 2 - (2 * ell + 1) * (1 + t) ** (nu - 1)
    return TridiagOperator(2.0 / dy**2 + v, np.full(grid.n - 1, -1.0 / dy**2), grid,
                           {"eps": eps, "nu": nu, "ell": ell, "scale": "b_eps"})


@dataclass
class EpsSeriesCheck:
    eps: np.ndarray
    Lambda: np.ndarray
    error: np.ndarray
    residual: np.ndarray  # Lambda - omega2 eps^2
    used: np.ndarray  # points above the numerical noise floor
    C: float  # max |residual| / eps^4 over used points
    slope: float  # log-log slope of |residual| over used points


def epsilon_series_check(nu: int, ell: int, eps_values: Iterable[float], half_width: float = 12.0,
                         n: int = 1000, rtol: float = 1e-13) -> EpsSeriesCheck:
    """Numerical ``Lambda_eps`` of ``b_eps`` versus ``omega2 eps^2``.

    Residuals within 10x the Richardson error estimate are treated as noise and
    excluded from the constant ``C``.
    """
    from .eigensolve import refine_richardson
    from .operators import Grid1D

    om = float(omega2(nu, ell))
    eps = np.asarray(sorted(eps_values), dtype=float)
    lam, err = np.empty_like(eps), np.empty_like(eps)
    for i, e in enumerate(eps):
        Y = min(half_width, 0.8 / e)
        g = Grid1D(-Y, Y, n)
        build = lambda gg: build_b_eps(nu, ell, e, gg)  # noqa: E731
        r1 = refine_richardson(build, ell + 1, (g, g.refined()), rtol)
        r2 = refine_richardson(build, ell + 1, (g.refined(), g.refined().refined()), rtol)
        # the extrapolated values are fourth order: their difference bounds the error
        lam[i] = r2.values[ell]
        err[i] = abs(r2.values[ell] - r1.values[ell]) / 15.0 + 1e-13 * max(1.0, abs(lam[i]))
    res = lam - om * eps**2
    used = np.abs(res) > 10.0 * err
    if used.sum() >= 1:
        C = float(np.max(np.abs(res[used]) / eps[used] ** 4))
    else:
        C = 0.0
    slope = float(np.polyfit(np.log(eps[used]), np.log(np.abs(res[used])), 1)[0]) if used.sum() >= 2 else float("nan")
    return EpsSeriesCheck(eps, lam, err, res, used, C, slope)
