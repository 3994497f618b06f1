"""Entropy flux across a Lipschitz test curve, two ways.

One route classifies each ensemble curve's intersections with the test curve
(graph x = s(t)) into crossings and bounces and sums the one-sided entropy
slopes; the other integrates the solution's traces along the curve.  Equality
of the two totals is the decomposition identity this package exists to check.
A finite-width mollified variant cross-checks the trace route.

Orientation is fixed: the plus side is x > s(t); the minus side is x < s(t).
Both orientations are reachable by negating a surface.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .flux import EntropyPair
from .fronts import FrontSolution
from .ensemble import Ensemble, HYPOGRAPH, LagCurve

__all__ = [
    "Surface",
    "CrossingRecord",
    "TestFunction",
    "classify_intersections",
    "curve_flux_pairing",
    "theta_psi_pairing",
    "lagrangian_flux",
    "lagrangian_flux_detail",
    "trace_flux",
    "mollified_flux",
    "intersection_statistics",
    "fit_linear",
]

log = logging.getLogger(__name__)

_ZTOL = 1e-12  # |curve - surface| below this counts as "on the surface"

IPLUS, IMINUS, BMINUS, BPLUS = "Iplus", "Iminus", "Bminus", "Bplus"


@dataclass(frozen=True)
class Surface:
    """Piecewise-linear test curve x = s(t) on [t_a, t_b]."""

    vertices: Tuple[Tuple[float, float], ...]  # (t, x), strictly increasing t

    def __post_init__(self):
        ts = [t for t, _ in self.vertices]
        if len(ts) < 2 or any(b <= a for a, b in zip(ts[:-1], ts[1:])):
            raise ValueError("surface needs >= 2 vertices with increasing times")

    @property
    def t_a(self) -> float:
        return self.vertices[0][0]

    @property
    def t_b(self) -> float:
        return self.vertices[-1][0]

    @property
    def ts(self) -> np.ndarray:
        return np.asarray([t for t, _ in self.vertices])

    @property
    def xs(self) -> np.ndarray:
        return np.asarray([x for _, x in self.vertices])

    @property
    def lipschitz_bound(self) -> float:
        return max(abs(s) for s in self.slopes())

    def slopes(self) -> List[float]:
        v = self.vertices
        return [(x2 - x1) / (t2 - t1) for (t1, x1), (t2, x2) in zip(v[:-1], v[1:])]

    def s(self, t):
        return np.interp(t, self.ts, self.xs)

    def slope_at(self, t: float) -> float:
        i = min(max(bisect_right(self.ts, t) - 1, 0), len(self.vertices) - 2)
        return self.slopes()[i]

    def normal(self, t: float) -> Tuple[float, float]:
        """Unit normal pointing from the minus side (x < s) to the plus side."""
        sp = self.slope_at(t)
        n = math.hypot(sp, 1.0)
        return (-sp / n, 1.0 / n)

    @staticmethod
    def from_front(front, t_a: float, t_b: float) -> "Surface":
        return Surface(((t_a, front.position(t_a)), (t_b, front.position(t_b))))

    @staticmethod
    def from_config(vertices: Iterable[Sequence[float]]) -> "Surface":
        return Surface(tuple((float(t), float(x)) for t, x in vertices))


def _smoothstep(s: float) -> float:
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def _dsmoothstep(s: float) -> float:
    return 30.0 * s * s * (1.0 - s) * (1.0 - s)


def _bump1(y: float, lo: float, hi: float, w: float) -> float:
    if y <= lo or y >= hi:
        return 0.0
    if y < lo + w:
        return _smoothstep((y - lo) / w)
    if y > hi - w:
        return _smoothstep((hi - y) / w)
    return 1.0


def _dbump1(y: float, lo: float, hi: float, w: float) -> float:
    if y <= lo or y >= hi:
        return 0.0
    if y < lo + w:
        return _dsmoothstep((y - lo) / w) / w
    if y > hi - w:
        return -_dsmoothstep((hi - y) / w) / w
    return 0.0


@dataclass(frozen=True)
class TestFunction:
    """C^2 plateau bump: product of quintic-ramp mollifiers in t and x.

    Identically 1 on the plateau [t_lo+ramp_t, t_hi-ramp_t] x
    [x_lo+ramp_x, x_hi-ramp_x], identically 0 outside the support rectangle.
    Evaluation, both partial derivatives, and the polynomial-piece breakpoints
    are all closed-form, so quadratures split at the breakpoints are exact.
    """

    __test__ = False  # not a pytest class, despite the name

    t_lo: float
    t_hi: float
    x_lo: float
    x_hi: float
    ramp_t: float
    ramp_x: float

    def __post_init__(self):
        if self.t_hi - self.t_lo < 2 * self.ramp_t or self.ramp_t <= 0:
            raise ValueError("time support too narrow for its ramps")
        if self.x_hi - self.x_lo < 2 * self.ramp_x or self.ramp_x <= 0:
            raise ValueError("space support too narrow for its ramps")

    def value(self, t: float, x: float) -> float:
        return (_bump1(t, self.t_lo, self.t_hi, self.ramp_t)
                * _bump1(x, self.x_lo, self.x_hi, self.ramp_x))

    def dt(self, t: float, x: float) -> float:
        return (_dbump1(t, self.t_lo, self.t_hi, self.ramp_t)
                * _bump1(x, self.x_lo, self.x_hi, self.ramp_x))

    def dx(self, t: float, x: float) -> float:
        return (_bump1(t, self.t_lo, self.t_hi, self.ramp_t)
                * _dbump1(x, self.x_lo, self.x_hi, self.ramp_x))

    @property
    def t_breaks(self) -> List[float]:
        return [self.t_lo, self.t_lo + self.ramp_t, self.t_hi - self.ramp_t, self.t_hi]

    @property
    def x_breaks(self) -> List[float]:
        return [self.x_lo, self.x_lo + self.ramp_x, self.x_hi - self.ramp_x, self.x_hi]

    def time_integral(self) -> float:
        """Integral of the pure-t factor (ramps integrate to half their width)."""
        return (self.t_hi - self.t_lo) - self.ramp_t

    @staticmethod
    def plateau(t_window: Tuple[float, float], x_window: Tuple[float, float],
                ramp_t: float = 0.05, ramp_x: float = 0.1) -> "TestFunction":
        """Bump that is exactly 1 on the given windows."""
        return TestFunction(t_window[0] - ramp_t, t_window[1] + ramp_t,
                            x_window[0] - ramp_x, x_window[1] + ramp_x,
                            ramp_t, ramp_x)


@dataclass(frozen=True)
class CrossingRecord:
    """One classified intersection of a curve with the test curve.

    ``t``/``x`` locate the entry of the event, ``t_exit``/``x_exit`` its exit
    (equal for transverse events; they differ only when the curve rides the
    test curve over an interval, which is collapsed to one record classified
    by its entry and exit sides).
    """

    t: float
    cls: str
    v_minus: float
    v_plus: float
    x: float
    t_exit: float
    x_exit: float


def _classify_sides(before: int, after: int) -> str:
    if before < 0 and after > 0:
        return IPLUS
    if before > 0 and after < 0:
        return IMINUS
    if before < 0 and after < 0:
        return BMINUS
    return BPLUS


def classify_intersections(curve: LagCurve, surface: Surface) -> List[CrossingRecord]:
    """Finite list of classified intersection events of a curve with a surface.

    Works on the merged breakpoint grid of the two piecewise-linear graphs.
    Coincidence intervals collapse to a single record.  Events touching the
    domain ends of the overlap cannot be side-classified and are dropped
    (open-interval convention, logged at debug level).
    """
    A = max(float(curve.times[0]), surface.t_a)
    B = min(float(curve.times[-1]), surface.t_b)
    if B <= A:
        return []
    knots = np.union1d(
        np.clip(curve.times, A, B),
        np.clip(surface.ts, A, B),
    )
    knots = np.union1d(knots, [A, B])
    d = np.asarray(curve.position(knots)) - np.asarray(surface.s(knots))
    sign = np.where(np.abs(d) <= _ZTOL, 0, np.sign(d)).astype(int)

    records: List[CrossingRecord] = []

    def _emit(entry_t: float, exit_t: float, before: int, after: int) -> None:
        cls = _classify_sides(before, after)
        t_rec = exit_t if cls == IMINUS else entry_t
        records.append(CrossingRecord(
            t=t_rec,
            cls=cls,
            v_minus=curve.level_before(entry_t),
            v_plus=curve.level_after(exit_t),
            x=float(curve.position(t_rec)),
            t_exit=exit_t,
            x_exit=float(curve.position(exit_t)),
        ))

    n = len(knots)
    i = 0
    while i < n:
        if sign[i] == 0:
            j = i
            while j + 1 < n and sign[j + 1] == 0:
                j += 1
            if i == 0 or j == n - 1:
                log.debug("intersection run touching the domain end dropped "
                          "(curve %s, t=%s..%s)", curve.id, knots[i], knots[j])
            else:
                _emit(float(knots[i]), float(knots[j]), sign[i - 1], sign[j + 1])
            i = j + 1
            continue
        if i + 1 < n and sign[i + 1] != 0 and sign[i + 1] != sign[i]:
            # transverse root strictly between knots
            t0, t1 = float(knots[i]), float(knots[i + 1])
            tr = t0 + (t1 - t0) * (d[i] / (d[i] - d[i + 1]))
            _emit(tr, tr, sign[i], sign[i + 1])
        i += 1
    return records


def curve_flux_pairing(records: Sequence[CrossingRecord], pair: EntropyPair,
                       phi: TestFunction) -> float:
    """Sum of one-sided entropy slopes over the classified events.

    Plus-side bounces do not contribute; a minus-side bounce contributes the
    difference of the entry-side and exit-side slopes (evaluated at the
    respective event ends, which coincide for transverse events).
    """
    total = 0.0
    for r in records:
        if r.cls == IPLUS:
            total += pair.deta(r.v_minus) * phi.value(r.t, r.x)
        elif r.cls == IMINUS:
            total -= pair.deta(r.v_plus) * phi.value(r.t_exit, r.x_exit)
        elif r.cls == BMINUS:
            total += (pair.deta(r.v_minus) * phi.value(r.t, r.x)
                      - pair.deta(r.v_plus) * phi.value(r.t_exit, r.x_exit))
    return total


def theta_psi_pairing(curve: LagCurve, surface: Surface, pair: EntropyPair,
                      phi: TestFunction) -> float:
    """Independent evaluation of the pairing by 0/1-indicator bookkeeping.

    theta(t) = 1 when the curve point lies in the closed plus side, psi(t) is
    the entropy slope times the test function along the curve.  The pairing is
    the jump sum of theta*psi minus the theta-weighted jump sum of psi; no
    classification of events is involved.  Must equal
    :func:`curve_flux_pairing` to roundoff on every curve.
    """
    A = max(float(curve.times[0]), surface.t_a)
    B = min(float(curve.times[-1]), surface.t_b)
    if B <= A:
        return 0.0

    def dval(t: float) -> float:
        return float(curve.position(t)) - float(surface.s(t))

    def psi_at(t: float, level: float) -> float:
        return pair.deta(level) * phi.value(t, float(curve.position(t)))

    knots = np.union1d(np.clip(curve.times, A, B), np.clip(surface.ts, A, B))
    knots = np.union1d(knots, [A, B])
    d = np.asarray(curve.position(knots)) - np.asarray(surface.s(knots))
    points = set()
    for i in range(len(knots)):
        if abs(d[i]) <= _ZTOL:
            points.add(float(knots[i]))
        if i + 1 < len(knots) and abs(d[i]) > _ZTOL and abs(d[i + 1]) > _ZTOL \
                and np.sign(d[i]) != np.sign(d[i + 1]):
            tr = float(knots[i]) + (float(knots[i + 1]) - float(knots[i])) * (
                d[i] / (d[i] - d[i + 1]))
            points.add(tr)
    jump_times = sorted(j.t for j in curve.jumps if A < j.t < B)
    points.update(jump_times)

    # cell partition: the indicator is constant between consecutive points/knots
    cells = sorted(set(float(k) for k in knots) | points)

    def theta_cell(a: float, b: float) -> float:
        dv = dval(0.5 * (a + b))
        return 1.0 if dv >= -_ZTOL else 0.0

    total = 0.0
    for p in sorted(points):
        if not (A < p < B):
            continue
        k = cells.index(p)
        th_m = theta_cell(cells[k - 1], p) if k > 0 else theta_cell(A, p)
        th_p = theta_cell(p, cells[k + 1]) if k + 1 < len(cells) else th_m
        vm = curve.level_before(p)
        vp = curve.level_after(p)
        total += th_p * psi_at(p, vp) - th_m * psi_at(p, vm)
        if any(abs(p - jt) < 1e-14 for jt in jump_times):
            th_point = 1.0 if dval(p) >= -_ZTOL else 0.0
            total -= th_point * (psi_at(p, vp) - psi_at(p, vm))
    return total


def _check_anchor(ensemble: Ensemble, pair: EntropyPair) -> None:
    want = "zero-at-0" if ensemble.side == HYPOGRAPH else "zero-at-1"
    if pair.anchor != want:
        raise ValueError(
            f"{ensemble.side} ensemble needs a {want} entropy pair, "
            f"got {pair.anchor}")


def lagrangian_flux(ensemble: Ensemble, surface: Surface, pair: EntropyPair,
                    phi: TestFunction) -> float:
    return lagrangian_flux_detail(ensemble, surface, pair, phi)["total"]


def lagrangian_flux_detail(ensemble: Ensemble, surface: Surface,
                           pair: EntropyPair, phi: TestFunction) -> Dict[str, float]:
    """Weighted pairing over the ensemble with a per-class breakdown.

    The epigraph total carries an overall sign flip (its pairing measures the
    same trace flux from the complementary region, with zero-at-1 anchors).
    """
    _check_anchor(ensemble, pair)
    sgn = 1.0 if ensemble.side == HYPOGRAPH else -1.0
    terms = []
    by_class = {IPLUS: [], IMINUS: [], BMINUS: []}
    counts = {IPLUS: 0, IMINUS: 0, BMINUS: 0, BPLUS: 0}
    for c in ensemble.curves:
        recs = classify_intersections(c, surface)
        if not recs:
            continue
        terms.append(c.weight * curve_flux_pairing(recs, pair, phi))
        for r in recs:
            counts[r.cls] += 1
            if r.cls == IPLUS:
                by_class[IPLUS].append(
                    c.weight * pair.deta(r.v_minus) * phi.value(r.t, r.x))
            elif r.cls == IMINUS:
                by_class[IMINUS].append(
                    -c.weight * pair.deta(r.v_plus) * phi.value(r.t_exit, r.x_exit))
            elif r.cls == BMINUS:
                by_class[BMINUS].append(c.weight * (
                    pair.deta(r.v_minus) * phi.value(r.t, r.x)
                    - pair.deta(r.v_plus) * phi.value(r.t_exit, r.x_exit)))
    total = sgn * math.fsum(terms)
    out = {"total": total, "sign": sgn}
    for k, v in by_class.items():
        out[k] = sgn * math.fsum(v)
    for k, v in counts.items():
        out[f"count_{k}"] = v
    return out


# -- Eulerian route --------------------------------------------------------

_GN = 16
_GX, _GW = np.polynomial.legendre.leggauss(_GN)


def _gauss(fn, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * math.fsum(w * fn(mid + half * x) for x, w in zip(_GX, _GW))


def _front_crossing_times(solution: FrontSolution, surface: Surface,
                          offset: float = 0.0) -> List[float]:
    """Times where some front crosses the shifted graph x = s(t) + offset."""
    out: List[float] = []
    ts, xs = surface.ts, surface.xs
    for f in solution.fronts:
        t_hi = min(f.death, solution.horizon)
        for i in range(len(ts) - 1):
            a = max(float(ts[i]), f.birth)
            b = min(float(ts[i + 1]), t_hi)
            if b <= a + 1e-15:
                continue
            slope = (xs[i + 1] - xs[i]) / (ts[i + 1] - ts[i])
            g_a = f.position(a) - (xs[i] + slope * (a - ts[i]) + offset)
            g_b = f.position(b) - (xs[i] + slope * (b - ts[i]) + offset)
            if g_a == 0.0:
                out.append(a)
            if g_a * g_b < 0.0:
                out.append(a + (b - a) * (g_a / (g_a - g_b)))
    return out


def _xbreak_crossing_times(surface: Surface, x_breaks: Sequence[float]) -> List[float]:
    out: List[float] = []
    ts, xs = surface.ts, surface.xs
    for i in range(len(ts) - 1):
        for c in x_breaks:
            den = xs[i + 1] - xs[i]
            if abs(den) < 1e-15:
                continue
            lam = (c - xs[i]) / den
            if 0.0 < lam < 1.0:
                out.append(float(ts[i] + lam * (ts[i + 1] - ts[i])))
    return out


def trace_flux(solution: FrontSolution, surface: Surface, pair: EntropyPair,
               phi: TestFunction) -> float:
    """Entropy flux through the test curve from the minus side.

    Line integral of the normal flux of (eta(u^-), q(u^-)) weighted by the
    test function; for a graph x = s(t) the area element cancels the normal
    normalization, leaving (q(u^-) - s'(t) eta(u^-)) Phi(t, s(t)) dt.  The
    quadrature splits at surface vertices, front crossings, and test-function
    breakpoints, so each Gauss panel is exact.
    """
    A, B = surface.t_a, surface.t_b
    knots = {A, B}
    knots.update(t for t in phi.t_breaks if A < t < B)
    knots.update(float(t) for t in surface.ts if A < t < B)
    knots.update(t for t in _front_crossing_times(solution, surface) if A < t < B)
    knots.update(t for t in _xbreak_crossing_times(surface, phi.x_breaks)
                 if A < t < B)
    knots = sorted(knots)

    def integrand(t: float) -> float:
        x = float(surface.s(t))
        u_minus, _ = solution.trace(t, x)
        sp = surface.slope_at(t)
        return (pair.q(u_minus) - sp * pair.eta(u_minus)) * phi.value(t, x)

    return math.fsum(_gauss(integrand, a, b) for a, b in zip(knots[:-1], knots[1:]))


def mollified_flux(solution: FrontSolution, surface: Surface, pair: EntropyPair,
                   phi: TestFunction, delta: float) -> float:
    """Finite-width version of :func:`trace_flux`.

    Replaces the sharp interface by a clamped ramp G rising from 0 to 1 across
    a collar of width delta on the minus side of the curve; integrates
    (eta(u), q(u)) . grad G against the test function over the collar.
    First-order consistent: the gap to :func:`trace_flux` scales like delta.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    s_min = float(np.min(surface.xs))
    if s_min - delta < phi.x_lo:
        raise ValueError(
            f"delta={delta} too large: the ramp collar exits the test-function "
            f"window (s_min={s_min}, phi.x_lo={phi.x_lo})")
    A, B = surface.t_a, surface.t_b
    knots = {A, B}
    knots.update(t for t in phi.t_breaks if A < t < B)
    knots.update(float(t) for t in surface.ts if A < t < B)
    for off in (0.0, -delta):
        knots.update(t for t in _front_crossing_times(solution, surface, off)
                     if A < t < B)
    knots.update(t for t in _xbreak_crossing_times(surface, phi.x_breaks)
                 if A < t < B)
    knots = sorted(knots)

    def t_integrand(t: float) -> float:
        xs_hi = float(surface.s(t))
        xs_lo = xs_hi - delta
        sp = surface.slope_at(t)
        pos, values = solution.states_at(t)
        cuts = sorted({xs_lo, xs_hi, *(p for p in pos if xs_lo < p < xs_hi),
                       *(xb for xb in phi.x_breaks if xs_lo < xb < xs_hi)})
        tot = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            u = values[bisect_right(pos, 0.5 * (a + b))]
            coeff = (pair.q(u) - sp * pair.eta(u)) / delta
            tot += coeff * _gauss(lambda x: phi.value(t, x), a, b)
        return tot

    return math.fsum(_gauss(t_integrand, a, b) for a, b in zip(knots[:-1], knots[1:]))


def intersection_statistics(ensemble: Ensemble, surface: Surface,
                            epsilons: Sequence[float]) -> dict:
    """Per-curve intersection counts plus near-tangency mass per epsilon.

    A curve is epsilon-tangent when one of its segments runs within distance
    epsilon of the surface (horizontal metric) at slope within epsilon of the
    local surface slope.  The tangency mass should shrink at least linearly
    in epsilon for a generic surface.
    """
    flux = ensemble.solution.flux
    counts = []
    tangency = {float(e): 0.0 for e in epsilons}
    sslopes = surface.slopes()
    sv = surface.vertices
    for c in ensemble.curves:
        recs = classify_intersections(c, surface)
        counts.append(len(recs))
        eps_hit = set()
        for k in range(len(c.times) - 1):
            ta, tb = float(c.times[k]), float(c.times[k + 1])
            slope = flux.df(float(c.vs[k]))
            for j in range(len(sv) - 1):
                a = max(ta, sv[j][0])
                b = min(tb, sv[j + 1][0])
                if b <= a:
                    continue
                da = float(c.position(a)) - float(surface.s(a))
                db = float(c.position(b)) - float(surface.s(b))
                dist = 0.0 if da * db <= 0 else min(abs(da), abs(db))
                for e in tangency:
                    if abs(slope - sslopes[j]) <= e and dist <= e:
                        eps_hit.add(e)
        for e in eps_hit:
            tangency[e] += c.weight
    hist: Dict[int, int] = {}
    for n in counts:
        hist[n] = hist.get(n, 0) + 1
    return {
        "max_count": max(counts) if counts else 0,
        "histogram": hist,
        "tangency_mass": tangency,
    }


def fit_linear(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """(slope through origin, r-squared of the affine fit)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    c_origin = float((x * y).sum() / (x * x).sum())
    if len(x) < 3 or np.allclose(y, y[0]):
        return c_origin, 1.0
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_res = float((resid ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return c_origin, r2
