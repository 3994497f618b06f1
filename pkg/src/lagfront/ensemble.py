"""Weighted curve ensembles for the hypograph and epigraph of a front solution.

Each curve carries a position (piecewise linear, slope f'(level)) and a level
(piecewise constant, jumping only where the curve meets a front it cannot
cross).  The level jump is the measure-preserving bounce of
:func:`lagfront.flux.bounce_map`, so the time-t evaluation of the ensemble
stays uniform on the hypograph (resp. epigraph) of the solution.

Curve evolutions are independent given the immutable solution; aggregations
use math.fsum in curve-id order so results are bit-reproducible.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .flux import FluxModel, bounce_map
from .fronts import FrontSolution

__all__ = [
    "Jump",
    "LagCurve",
    "Ensemble",
    "build_ensemble",
    "evolve_curve",
    "pushforward_check",
    "region_area",
    "tv_dissipation",
    "check_no_crossing",
]

HYPOGRAPH = "hypograph"
EPIGRAPH = "epigraph"

_TEPS = 1e-13       # strictly-future tolerance for meeting times
_POS_TIE = 1e-11    # "on the front" position tolerance
_SONIC_TOL = 1e-13  # relative-speed threshold for a grazing level
_EQ_TOL = 1e-12     # level-equals-state degenerate crossing tolerance


@dataclass(frozen=True)
class Jump:
    t: float
    v_minus: float
    v_plus: float
    cause: str  # bounce_left | bounce_right | sonic_flag


@dataclass
class LagCurve:
    """One weighted trajectory: piecewise-linear position, piecewise-constant level."""

    id: int
    weight: float
    times: np.ndarray      # breakpoints, increasing, [0, ..., T]
    xs: np.ndarray         # positions at breakpoints
    vs: np.ndarray         # level on each inter-breakpoint segment
    jumps: Tuple[Jump, ...]
    side: str

    def position(self, t):
        return np.interp(t, self.times, self.xs)

    def level_after(self, t: float) -> float:
        """Level on the segment starting at or containing t (right limit)."""
        i = bisect_right(self.times, t) - 1
        return float(self.vs[min(max(i, 0), len(self.vs) - 1)])

    def level_before(self, t: float) -> float:
        """Left limit of the level at t."""
        i = bisect_right(self.times, t - 1e-15) - 1
        return float(self.vs[min(max(i, 0), len(self.vs) - 1)])

    def total_variation(self) -> float:
        return math.fsum(abs(j.v_plus - j.v_minus) for j in self.jumps)


def evolve_curve(solution: FrontSolution, flux: FluxModel, x0: float, v0: float,
                 side: str = HYPOGRAPH, curve_id: int = -1,
                 weight: float = 0.0) -> LagCurve:
    """Advance one trajectory from (0, x0) at level v0 through the solution.

    The position moves at f'(level).  On meeting a front the curve crosses
    unchanged when its level is interior to the target-side region, and
    bounces (level reassigned by the measure-preserving map) otherwise.  A
    level exactly at a front's sonic point rides the front until the front's
    data changes; the zero-size jump is recorded with cause "sonic_flag".
    """
    if side not in (HYPOGRAPH, EPIGRAPH):
        raise ValueError(f"unknown side {side!r}")
    hypo = side == HYPOGRAPH
    T = solution.horizon
    times: List[float] = [0.0]
    xs: List[float] = [float(x0)]
    jumps: List[Jump] = []
    seg_levels: List[float] = []

    t, x, v = 0.0, float(x0), float(v0)
    riding = None  # Front currently carrying a sonic level

    def _break(tb: float, xb: float, v_old: float) -> None:
        # close the current segment and open a new one at (tb, xb)
        if tb > times[-1] + 1e-15:
            times.append(tb)
            xs.append(xb)
            seg_levels.append(v_old)

    for t0, t1 in solution.slabs():
        if t >= t1 - _TEPS:
            continue
        fronts = solution.alive(0.5 * (t0 + t1))
        fronts.sort(key=lambda f: f.position(0.5 * (t0 + t1)))

        if riding is not None:
            stop = min(riding.death, t1)
            x = riding.position(stop)
            t = stop
            if riding.death <= t1 + _TEPS:
                riding = None
            continue

        c = flux.df(v)
        # locate the gap index: number of fronts effectively left of the curve
        gap = 0
        for i, f in enumerate(fronts):
            p = f.position(t)
            if p < x - _POS_TIE:
                gap = i + 1
            elif abs(p - x) <= _POS_TIE:
                if c > f.speed + _SONIC_TOL:
                    gap = i + 1
                elif c < f.speed - _SONIC_TOL:
                    break
                else:
                    riding = f
                    jumps.append(Jump(t, v, v, "sonic_flag"))
                    break
            else:
                break
        if riding is not None:
            continue

        while t < t1 - _TEPS:
            c = flux.df(v)
            s_meet, f_meet, from_left = math.inf, None, True
            if gap > 0:
                f = fronts[gap - 1]
                rel = f.speed - c
                if rel > _SONIC_TOL:
                    s = t + max(x - f.position(t), 0.0) / rel
                    if t + _TEPS < s < s_meet:
                        s_meet, f_meet, from_left = s, f, False
            if gap < len(fronts):
                f = fronts[gap]
                rel = c - f.speed
                if rel > _SONIC_TOL:
                    s = t + max(f.position(t) - x, 0.0) / rel
                    if t + _TEPS < s < s_meet:
                        s_meet, f_meet, from_left = s, f, True
            if f_meet is None or s_meet > t1 - _TEPS:
                x += c * (t1 - t)
                t = t1
                break
            x_meet = f_meet.position(s_meet)
            target = f_meet.u_right if from_left else f_meet.u_left
            inside = (v < target + _EQ_TOL) if hypo else (v > target - _EQ_TOL)
            if inside:
                x, t = x_meet, s_meet
                gap += 1 if from_left else -1
            else:
                v_new = bounce_map(f_meet.shock, flux, v)
                cause = "bounce_left" if from_left else "bounce_right"
                jumps.append(Jump(s_meet, v, v_new, cause))
                _break(s_meet, x_meet, v)
                x, t, v = x_meet, s_meet, v_new

    if T > times[-1] + 1e-15:
        times.append(T)
        xs.append(x + flux.df(v) * (T - t) if riding is None
                  else riding.position(min(riding.death, T)))
        seg_levels.append(v)
    else:
        seg_levels.append(v)

    return LagCurve(
        id=curve_id,
        weight=weight,
        times=np.asarray(times),
        xs=np.asarray(xs),
        vs=np.asarray(seg_levels[:len(times) - 1] or [v]),
        jumps=tuple(jumps),
        side=side,
    )


@dataclass
class Ensemble:
    """Discrete weighted-curve surrogate for one side of the solution graph."""

    side: str
    curves: List[LagCurve]
    solution: FrontSolution
    nx: int
    nv: int
    window: Tuple[float, float]
    seed: int
    dx: float
    dv: float
    _pos_cache: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(
        default_factory=dict, repr=False)

    @property
    def total_mass(self) -> float:
        return math.fsum(c.weight for c in self.curves)

    def positions_at(self, t: float) -> np.ndarray:
        return np.asarray([float(np.interp(t, c.times, c.xs)) for c in self.curves])

    def levels_at(self, t: float) -> np.ndarray:
        return np.asarray([c.level_after(t) for c in self.curves])

    def weights(self) -> np.ndarray:
        return np.asarray([c.weight for c in self.curves])

    def position_grid(self, n_out: int, t0: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        """(grid times, positions matrix) cached per (n_out, t0)."""
        key = (n_out, round(t0, 12))
        if key not in self._pos_cache:
            ts = np.linspace(t0, self.solution.horizon, n_out + 1)
            pos = np.empty((len(self.curves), len(ts)))
            for i, c in enumerate(self.curves):
                pos[i] = np.interp(ts, c.times, c.xs)
            self._pos_cache[key] = (ts, pos)
        return self._pos_cache[key]

    def causal_interior(self, t: float) -> Tuple[float, float]:
        """x-range unaffected by unsampled mass outside the window up to time t."""
        s = self.solution.flux.s_max
        return self.window[0] + s * t, self.window[1] - s * t

    def jump_count_by_cause(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for c in self.curves:
            for j in c.jumps:
                out[j.cause] = out.get(j.cause, 0) + 1
        return out

    def export_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "weight [area]", "breakpoints t:x [time:space]",
                        "levels [value]", "jumps t:v-:v+:cause"])
            for c in self.curves:
                bp = ";".join(f"{ti:.17g}:{xi:.17g}" for ti, xi in zip(c.times, c.xs))
                lv = ";".join(f"{v:.17g}" for v in c.vs)
                jp = ";".join(f"{j.t:.17g}:{j.v_minus:.17g}:{j.v_plus:.17g}:{j.cause}"
                              for j in c.jumps)
                w.writerow([c.id, f"{c.weight:.17g}", bp, lv, jp])

    def diagnostics(self) -> dict:
        return {
            "side": self.side,
            "curves": len(self.curves),
            "total_mass": self.total_mass,
            "total_variation": math.fsum(c.weight * c.total_variation()
                                         for c in self.curves),
            "jump_counts": self.jump_count_by_cause(),
            "grid": {"nx": self.nx, "nv": self.nv, "window": list(self.window),
                     "seed": self.seed},
        }

    def export_diagnostics(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.diagnostics(), fh, indent=2, sort_keys=True)


def _initial_value(solution: FrontSolution, x: np.ndarray) -> np.ndarray:
    bp = np.asarray(solution.initial_breakpoints)
    vals = np.asarray(solution.initial_values)
    return vals[np.searchsorted(bp, x, side="right")]


def _region_band_area(solution: FrontSolution, side: str,
                      band: Tuple[float, float]) -> float:
    """Initial hypograph/epigraph area inside the x-band."""
    a, b = band
    if b <= a:
        return 0.0
    knots = [a] + [p for p in solution.initial_breakpoints if a < p < b] + [b]
    bp = list(solution.initial_breakpoints)
    vals = list(solution.initial_values)
    area = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        from bisect import bisect_right as _br
        u = vals[_br(bp, 0.5 * (lo + hi))]
        h = u if side == HYPOGRAPH else 1.0 - u
        area += (hi - lo) * h
    return area


def build_ensemble(solution: FrontSolution, side: str, nx: int, nv: int,
                   window: Tuple[float, float], seed: int = 0) -> Ensemble:
    """Sample one jittered representative per grid cell and evolve it.

    A cell (x_i, v_j) contributes a curve iff its jittered sample point lies
    strictly inside the chosen region of the initial profile; the curve's
    weight is the cell area dx*dv.  The window must cover the initial
    breakpoints padded by s_max * horizon so no front-affected mass is missing
    from the sampled strip.
    """
    if nx < 1 or nv < 1:
        raise ValueError("need nx, nv >= 1")
    x_lo, x_hi = window
    T = solution.horizon
    pad = solution.flux.s_max * T
    bps = solution.initial_breakpoints
    # Each window edge must either sit a full causal pad beyond the data span
    # (constant tails: edge effects stay inside the shrinking causal interior)
    # or have zero region mass in the adjacent outside band (nothing to miss).
    for edge, span_ok, band in (
            ("left", x_lo <= min(bps) - pad + 1e-12, (x_lo - pad, x_lo)),
            ("right", x_hi >= max(bps) + pad - 1e-12, (x_hi, x_hi + pad))):
        if span_ok:
            continue
        leak = _region_band_area(solution, side, band)
        if leak > 1e-12:
            raise ValueError(
                f"window {window} too narrow on the {edge}: needs the data span "
                f"padded by s_max*T = {pad}, or no {side} mass in {band}")
    dx = (x_hi - x_lo) / nx
    dv = 1.0 / nv
    rng = np.random.default_rng(seed)
    jit = rng.random((nx * nv, 2))
    ii, jj = np.meshgrid(np.arange(nx), np.arange(nv), indexing="ij")
    xs0 = x_lo + (ii.ravel() + jit[:, 0]) * dx
    vs0 = (jj.ravel() + jit[:, 1]) * dv
    u0 = _initial_value(solution, xs0)
    keep = vs0 < u0 if side == HYPOGRAPH else vs0 > u0
    weight = dx * dv
    curves = []
    for cid, (x0, v0) in enumerate(zip(xs0[keep], vs0[keep])):
        curves.append(evolve_curve(solution, solution.flux, float(x0), float(v0),
                                   side=side, curve_id=cid, weight=weight))
    return Ensemble(side=side, curves=curves, solution=solution, nx=nx, nv=nv,
                    window=(float(x_lo), float(x_hi)), seed=seed, dx=dx, dv=dv)


def region_area(solution: FrontSolution, side: str, t: float,
                rect: Tuple[float, float, float, float]) -> float:
    """Exact area of the hypograph/epigraph slice inside rect = (x1,x2,v1,v2)."""
    x1, x2, v1, v2 = rect
    pos, values = solution.states_at(t)
    knots = [x1] + [p for p in pos if x1 < p < x2] + [x2]
    area = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= a:
            continue
        u = values[bisect_right(pos, 0.5 * (a + b))]
        if side == HYPOGRAPH:
            h = min(v2, u) - v1
        else:
            h = v2 - max(v1, u)
        area += (b - a) * max(h, 0.0)
    return area


def pushforward_check(ensemble: Ensemble, t: float,
                      rectangles: Sequence[Tuple[float, float, float, float]]
                      ) -> List[float]:
    """|curve mass in R - exact region area in R| for each rectangle R."""
    pos = ensemble.positions_at(t)
    lev = ensemble.levels_at(t)
    w = ensemble.weights()
    out = []
    for (x1, x2, v1, v2) in rectangles:
        mask = (pos >= x1) & (pos < x2) & (lev >= v1) & (lev < v2)
        mass = float(w[mask].sum())
        out.append(abs(mass - region_area(ensemble.solution, ensemble.side, t,
                                          (x1, x2, v1, v2))))
    return out


def tv_dissipation(ensemble: Ensemble, t_window: Tuple[float, float],
                   x_window: Tuple[float, float] = (-math.inf, math.inf)) -> float:
    """Weighted level variation of jumps landing inside the window.

    Estimates the dissipation-measure mass of the window: the level jumps of
    the ensemble, weighted by curve mass, reproduce the solution's entropy
    dissipation (for the quadratic entropy it is the full measure).
    """
    t1, t2 = t_window
    x1, x2 = x_window
    terms = []
    for c in ensemble.curves:
        for j in c.jumps:
            if t1 <= j.t <= t2:
                xj = float(np.interp(j.t, c.times, c.xs))
                if x1 <= xj <= x2:
                    terms.append(c.weight * abs(j.v_plus - j.v_minus))
    return math.fsum(terms)


def check_no_crossing(hyp: Ensemble, epi: Ensemble, n_pairs: int = 10_000,
                      seed: int = 0, slack: float = 1e-10) -> int:
    """Count sampled (hypograph, epigraph) pairs where the epigraph curve
    crosses the hypograph curve from the right (right at t1, left at t2 > t1).

    Positions are compared at the union of the two curves' breakpoints.
    Returns 0 under correct dynamics.
    """
    if not hyp.curves or not epi.curves:
        return 0
    rng = np.random.default_rng(seed)
    ih = rng.integers(0, len(hyp.curves), size=n_pairs)
    ie = rng.integers(0, len(epi.curves), size=n_pairs)
    violations = 0
    for a, b in zip(ih, ie):
        ch, ce = hyp.curves[a], epi.curves[b]
        ts = np.union1d(ch.times, ce.times)
        d = np.interp(ts, ce.times, ce.xs) - np.interp(ts, ch.times, ch.xs)
        right = d > slack
        if right.any():
            first = int(np.argmax(right))
            if (d[first + 1:] < -slack).any():
                violations += 1
    return violations
