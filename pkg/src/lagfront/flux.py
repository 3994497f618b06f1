"""Convex flux models, entropy pairs, and shock-local algebra.

All solution values live in the unit slab [0, 1]; data outside that range are
affinely rescaled on ingestion (see :func:`rescaled`).  Everything here is
immutable after construction and safe to share across threads; the operations
are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "ConvexityError",
    "EqualStatesError",
    "FluxModel",
    "EntropyPair",
    "ShockData",
    "burgers",
    "polynomial_flux",
    "rescaled",
    "rh_speed",
    "sonic_level",
    "make_shock",
    "shock_potential",
    "bounce_map",
    "make_entropy",
    "shock_dissipation_rate",
]

#: grid used for the sampled convexity / bound checks
_CHECK_POINTS = 1001


class ConvexityError(ValueError):
    """Raised when a flux fails the uniform-convexity check on [0, 1]."""


class EqualStatesError(ValueError):
    """Raised when a jump relation is requested for (numerically) equal states."""


@dataclass(frozen=True)
class FluxModel:
    """Strictly convex flux on the unit value slab.

    Attributes:
        f: flux value, units of value*speed.
        df: derivative f' (characteristic speed).
        ddf: second derivative f''.
        alpha: uniform convexity lower bound, min of f'' on [0, 1].
        s_max: max of |f'| on [0, 1]; every trajectory built on this flux is
            s_max-Lipschitz in time.
        poly: optional polynomial representation (enables closed-form entropy
            fluxes); None for opaque callables.
        name: short label used in reports.
    """

    f: Callable[[float], float]
    df: Callable[[float], float]
    ddf: Callable[[float], float]
    alpha: float
    s_max: float
    poly: Optional[Polynomial] = None
    name: str = "flux"

    def __post_init__(self):
        u = np.linspace(0.0, 1.0, _CHECK_POINTS)
        dd = np.asarray([self.ddf(x) for x in u], dtype=float)
        if not np.all(dd >= self.alpha - 1e-12) or self.alpha <= 0.0:
            raise ConvexityError(
                f"flux {self.name!r}: f'' must stay >= alpha > 0 on [0,1] "
                f"(min sampled f''={dd.min():.3e}, alpha={self.alpha:.3e})"
            )
        d = np.asarray([self.df(x) for x in u], dtype=float)
        if np.max(np.abs(d)) > self.s_max + 1e-12:
            raise ConvexityError(
                f"flux {self.name!r}: |f'| exceeds declared s_max on [0,1]"
            )

    @property
    def is_quadratic(self) -> bool:
        return self.poly is not None and self.poly.degree() <= 2


def burgers() -> FluxModel:
    """The quadratic flux u^2/2 (f' is the identity)."""
    p = Polynomial([0.0, 0.0, 0.5])
    return FluxModel(
        f=lambda u: 0.5 * u * u,
        df=lambda u: u,
        ddf=lambda u: 1.0,
        alpha=1.0,
        s_max=1.0,
        poly=p,
        name="burgers",
    )


def polynomial_flux(coeffs, name: str = "polynomial") -> FluxModel:
    """Flux from polynomial coefficients in increasing degree order.

    Convexity is machine-checked by sampling f'' on a 1001-point grid; the
    sampled minimum becomes ``alpha``.
    """
    p = Polynomial(np.asarray(coeffs, dtype=float))
    dp = p.deriv()
    ddp = p.deriv(2)
    u = np.linspace(0.0, 1.0, _CHECK_POINTS)
    dd = ddp(u)
    alpha = float(dd.min())
    if alpha <= 1e-12:
        raise ConvexityError(
            f"flux {name!r}: sampled f'' has min {alpha:.3e}, not uniformly convex"
        )
    s_max = float(max(abs(dp(0.0)), abs(dp(1.0))))  # f' monotone: extremes at ends
    return FluxModel(
        f=lambda x: float(p(x)), df=lambda x: float(dp(x)), ddf=lambda x: float(ddp(x)),
        alpha=alpha, s_max=s_max, poly=p, name=name,
    )


def rescaled(flux: FluxModel, lo: float, hi: float) -> FluxModel:
    """Flux for data affinely rescaled from [lo, hi] onto [0, 1].

    If u solves the law with flux f, then w = (u-lo)/(hi-lo) solves it with
    g(w) = f(lo + (hi-lo) w)/(hi-lo).
    """
    if hi <= lo:
        raise ValueError("rescale bounds must satisfy lo < hi")
    span = hi - lo
    if flux.poly is not None:
        comp = flux.poly(Polynomial([lo, span])) / span
        return polynomial_flux(comp.coef, name=f"{flux.name}[{lo},{hi}]")
    f, df, ddf = flux.f, flux.df, flux.ddf
    return FluxModel(
        f=lambda w: f(lo + span * w) / span,
        df=lambda w: df(lo + span * w),
        ddf=lambda w: ddf(lo + span * w) * span,
        alpha=flux.alpha * span,
        s_max=max(abs(df(lo)), abs(df(hi))),
        poly=None,
        name=f"{flux.name}[{lo},{hi}]",
    )


def _bisect_increasing(g: Callable[[float], float], lo: float, hi: float) -> float:
    """Root of an increasing function by bisection, to machine interval width."""
    glo, ghi = g(lo), g(hi)
    if glo > 0.0:
        return lo
    if ghi < 0.0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rh_speed(flux: FluxModel, u_l: float, u_r: float) -> float:
    """Jump speed (f(u_l) - f(u_r)) / (u_l - u_r) of a discontinuity."""
    if abs(u_l - u_r) < 1e-14:
        raise EqualStatesError(f"equal states u_l={u_l!r}, u_r={u_r!r}: no front")
    return (flux.f(u_l) - flux.f(u_r)) / (u_l - u_r)


def sonic_level(flux: FluxModel, sigma: float) -> float:
    """The unique v in [0, 1] with f'(v) = sigma.

    Uses monotone bisection; final residual |f'(v) - sigma| <= 1e-12.
    """
    d0, d1 = flux.df(0.0), flux.df(1.0)
    if sigma < d0 - 1e-12 or sigma > d1 + 1e-12:
        raise ValueError(f"speed {sigma!r} outside characteristic range [{d0}, {d1}]")
    if flux.is_quadratic:
        # f' is affine: solve directly
        a, b = flux.df(0.0), flux.df(1.0)
        v = (sigma - a) / (b - a)
        return min(1.0, max(0.0, v))
    v = _bisect_increasing(lambda w: flux.df(w) - sigma, 0.0, 1.0)
    if abs(flux.df(v) - sigma) > 1e-12:
        raise ValueError(f"sonic level root-finding stalled at residual "
                         f"{abs(flux.df(v) - sigma):.3e}")
    return v


@dataclass(frozen=True)
class ShockData:
    """A single discontinuity with its jump speed and sonic level.

    ``entropic`` is True when u_left > u_right (dissipative for convex flux).
    The potential E(w) = f(w) - f(v_sonic) - sigma (w - v_sonic) is >= 0,
    vanishes at v_sonic, and takes equal values at both states (that equality
    *is* the jump condition).
    """

    u_left: float
    u_right: float
    sigma: float
    v_sonic: float
    entropic: bool


def make_shock(flux: FluxModel, u_l: float, u_r: float) -> ShockData:
    sigma = rh_speed(flux, u_l, u_r)
    return ShockData(
        u_left=u_l,
        u_right=u_r,
        sigma=sigma,
        v_sonic=sonic_level(flux, sigma),
        entropic=u_l > u_r,
    )


def shock_potential(shock: ShockData, flux: FluxModel, w: float) -> float:
    """E(w) = f(w) - f(v_sonic) - sigma (w - v_sonic); equal at both states."""
    return flux.f(w) - flux.f(shock.v_sonic) - shock.sigma * (w - shock.v_sonic)


def bounce_map(shock: ShockData, flux: FluxModel, v: float, *,
               sonic_tol: float = 1e-14) -> float:
    """Measure-preserving level reassignment at a discontinuity.

    Sends v to the unique v' on the opposite side of the sonic level with
    E(v') = E(v).  It is an involution, maps each endpoint state to the other,
    and preserves the flux-box measure |f'(w) - sigma| dw.  A level at the
    sonic point is a fixed point and is returned unchanged (the caller flags
    it; jittered ensemble sampling makes it a null event).
    """
    lo = min(shock.u_left, shock.u_right)
    hi = max(shock.u_left, shock.u_right)
    if not (lo - 1e-12 <= v <= hi + 1e-12) or v <= lo - 1e-12 or v >= hi + 1e-12:
        raise ValueError(f"level {v!r} outside the open state interval ({lo}, {hi})")
    vs = shock.v_sonic
    if abs(v - vs) <= sonic_tol:
        return v
    if flux.is_quadratic:
        # E is an exact parabola around v_sonic: reflection.
        return 2.0 * vs - v
    target = shock_potential(shock, flux, v)
    if v > vs:
        # E decreases from E(lo) to 0 on [lo, vs]
        g = lambda w: target - shock_potential(shock, flux, w)
        out = _bisect_increasing(g, lo, vs)
    else:
        g = lambda w: shock_potential(shock, flux, w) - target
        out = _bisect_increasing(g, vs, hi)
    return out


@dataclass(frozen=True)
class EntropyPair:
    """Entropy eta with flux q satisfying q' = eta' f'.

    ``anchor`` records the normalization side: "zero-at-0" means
    eta(0) = q(0) = 0, "zero-at-1" means eta(1) = q(1) = 0.  ``deta`` uses the
    right-limit convention at kink points (value at a kink equals the limit
    from above), matching one-sided level evaluations along curves.
    """

    eta: Callable[[float], float]
    deta: Callable[[float], float]
    q: Callable[[float], float]
    anchor: str
    convex: bool
    name: str = "entropy"


def _anchor_point(anchor: str) -> float:
    if anchor == "zero-at-0":
        return 0.0
    if anchor == "zero-at-1":
        return 1.0
    raise ValueError(f"unknown anchor {anchor!r}")


def make_entropy(kind: str, flux: FluxModel, anchor: str = "zero-at-0", *,
                 a: Optional[float] = None,
                 eta: Optional[Callable[[float], float]] = None,
                 deta: Optional[Callable[[float], float]] = None,
                 require_convex: bool = False) -> EntropyPair:
    """Build an entropy pair of the given kind.

    kind "quadratic": eta = u^2/2 (or (u^2-1)/2 for the zero-at-1 anchor).
    kind "kruzkov":   eta = (u-a)^+ with q = (f(u)-f(a)) 1_{u>=a} for the
        zero-at-0 anchor, and the mirrored nonincreasing pair (a-u)^+ with
        q = (f(a)-f(u)) 1_{u<=a} for zero-at-1.
    kind "custom":    caller supplies eta and deta; q is built from the anchor
        by adaptive quadrature of eta' f' (absolute tolerance 1e-10).
    """
    base = _anchor_point(anchor)
    if kind == "quadratic":
        off = 0.5 * base * base
        if flux.poly is not None:
            qp = (Polynomial([0.0, 1.0]) * flux.poly.deriv()).integ()
            qref = float(qp(base))
            qfun = lambda u, _qp=qp, _r=qref: float(_qp(u)) - _r
        else:
            qfun = _quadrature_entropy_flux(lambda u: u, flux, base)
        return EntropyPair(
            eta=lambda u: 0.5 * u * u - off,
            deta=lambda u: u,
            q=qfun,
            anchor=anchor,
            convex=True,
            name=f"quadratic:{anchor}",
        )
    if kind == "kruzkov":
        if a is None or not (0.0 <= a <= 1.0):
            raise ValueError("kruzkov entropy needs a threshold a in [0, 1]")
        fa = flux.f(a)
        if anchor == "zero-at-0":
            return EntropyPair(
                eta=lambda u: (u - a) if u >= a else 0.0,
                deta=lambda u: 1.0 if u >= a else 0.0,
                q=lambda u: (flux.f(u) - fa) if u >= a else 0.0,
                anchor=anchor,
                convex=True,
                name=f"kruzkov({a}):{anchor}",
            )
        return EntropyPair(
            eta=lambda u: (a - u) if u <= a else 0.0,
            deta=lambda u: -1.0 if u < a else 0.0,
            q=lambda u: (fa - flux.f(u)) if u <= a else 0.0,
            anchor=anchor,
            convex=True,
            name=f"kruzkov({a}):{anchor}",
        )
    if kind == "custom":
        if eta is None or deta is None:
            raise ValueError("custom entropy needs eta and deta callables")
        grid = np.linspace(0.0, 1.0, 513)
        dvals = np.asarray([deta(x) for x in grid])
        convex = bool(np.all(np.diff(dvals) >= -1e-10))
        if require_convex and not convex:
            raise ValueError("custom entropy is not convex; rejected for "
                             "dissipation-measure use")
        ebase = eta(base)
        return EntropyPair(
            eta=lambda u, _e=eta, _b=ebase: _e(u) - _b,
            deta=deta,
            q=_quadrature_entropy_flux(deta, flux, base),
            anchor=anchor,
            convex=convex,
            name=f"custom:{anchor}",
        )
    raise ValueError(f"unknown entropy kind {kind!r}")


def _quadrature_entropy_flux(deta, flux: FluxModel, base: float):
    from scipy.integrate import quad

    def q(u: float) -> float:
        if u == base:
            return 0.0
        val, _err = quad(lambda w: deta(w) * flux.df(w), base, u,
                         epsabs=1e-10, epsrel=1e-10, limit=200)
        return val

    return q


def shock_dissipation_rate(shock: ShockData, pair: EntropyPair) -> float:
    """Entropy production carried by a traveling front, per unit time.

    sigma [eta] - [q] with [g] = g(u_left) - g(u_right).  Negative for
    entropic fronts and convex eta, positive for non-entropic ones.
    """
    return (shock.sigma * (pair.eta(shock.u_left) - pair.eta(shock.u_right))
            - (pair.q(shock.u_left) - pair.q(shock.u_right)))
