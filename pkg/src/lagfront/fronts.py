"""Event-driven front tracking for piecewise-constant weak solutions.

A solution is a finite arrangement of straight fronts, each moving at the jump
speed of its adjacent states.  Jumps with increasing states are either kept as
single persistent fronts ("non_entropic" mode) or split into a fan of small
sub-jumps ("entropic" mode); decreasing jumps travel as single entropic
shocks.  Collisions are resolved on the outermost states.  ``evolve`` is
sequential; the resulting :class:`FrontSolution` is immutable and its queries
(`sample`, `trace`, `entropy_production`) are pure.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .flux import (EntropyPair, FluxModel, ShockData, make_shock, rh_speed,
                   shock_dissipation_rate)

__all__ = [
    "Front",
    "FrontSolution",
    "InteractionEvent",
    "RiemannWave",
    "solve_riemann",
    "evolve",
    "sample",
    "trace",
    "entropy_production",
    "weak_residual",
]

ENTROPIC = "entropic_shock"
RAREFACTION = "rarefaction_front"
NON_ENTROPIC = "non_entropic_shock"

_TIE = 1e-12  # collision-time merge tolerance


@dataclass(frozen=True)
class RiemannWave:
    """Template for one front emitted by a Riemann resolution."""

    u_left: float
    u_right: float
    speed: float
    kind: str


@dataclass
class Front:
    """One straight front segment: born at (birth, x_birth), dead at death."""

    id: int
    birth: float
    x_birth: float
    speed: float
    u_left: float
    u_right: float
    kind: str
    death: float = math.inf
    shock: Optional[ShockData] = None  # cached jump data (sonic level etc.)

    def position(self, t: float) -> float:
        return self.x_birth + self.speed * (t - self.birth)

    def alive_at(self, t: float) -> bool:
        return self.birth - _TIE <= t < self.death - _TIE


@dataclass(frozen=True)
class InteractionEvent:
    t: float
    x: float
    incoming: Tuple[int, ...]
    outgoing: Tuple[int, ...]
    tie: bool = False  # another event shares this time (leftmost processed first)


def _classify(u_l: float, u_r: float, mesh: float) -> str:
    if u_l > u_r:
        return ENTROPIC
    if u_r - u_l <= mesh + 1e-12:
        return RAREFACTION
    return NON_ENTROPIC


def solve_riemann(flux: FluxModel, u_l: float, u_r: float,
                  mode: str = "entropic", mesh: float = 1.0 / 64) -> List[RiemannWave]:
    """Front templates for the jump (u_l, u_r).

    Entropic mode splits increasing jumps into ceil((u_r-u_l)/mesh) sub-jumps,
    each traveling at its own jump speed; decreasing jumps give one shock.
    Non-entropic mode emits a single front at the jump speed regardless of
    order (classified by the actual state order).
    """
    if mesh <= 0.0:
        raise ValueError("mesh must be positive")
    if abs(u_l - u_r) < 1e-14:
        return []
    if mode == "non_entropic" or u_l > u_r:
        kind = ENTROPIC if u_l > u_r else NON_ENTROPIC
        return [RiemannWave(u_l, u_r, rh_speed(flux, u_l, u_r), kind)]
    if mode != "entropic":
        raise ValueError(f"unknown interaction mode {mode!r}")
    n = max(1, math.ceil((u_r - u_l) / mesh - 1e-12))
    levels = np.linspace(u_l, u_r, n + 1)
    return [
        RiemannWave(float(a), float(b), rh_speed(flux, float(a), float(b)),
                    _classify(float(a), float(b), mesh))
        for a, b in zip(levels[:-1], levels[1:])
    ]


@dataclass(frozen=True)
class FrontSolution:
    """Immutable arrangement of fronts on [0, horizon]."""

    flux: FluxModel
    fronts: Tuple[Front, ...]
    horizon: float
    initial_breakpoints: Tuple[float, ...]
    initial_values: Tuple[float, ...]  # len = len(breakpoints) + 1
    events: Tuple[InteractionEvent, ...]
    rarefaction_mesh: float

    # -- queries ---------------------------------------------------------

    def event_times(self) -> List[float]:
        ts = sorted({e.t for e in self.events})
        return [t for t in ts if 0.0 < t < self.horizon]

    def slabs(self) -> List[Tuple[float, float]]:
        """Time intervals on which the set of alive fronts is constant."""
        knots = [0.0] + self.event_times() + [self.horizon]
        return [(a, b) for a, b in zip(knots[:-1], knots[1:]) if b - a > _TIE]

    def alive(self, t: float) -> List[Front]:
        return [f for f in self.fronts if f.alive_at(t)]

    def arrangement(self, t: float) -> Tuple[List[Front], List[float]]:
        """Alive fronts sorted left to right with their positions at t."""
        fronts = self.alive(t)
        fronts.sort(key=lambda f: (f.position(t), f.speed))
        return fronts, [f.position(t) for f in fronts]

    def states_at(self, t: float) -> Tuple[List[float], List[float]]:
        """(positions, values) of the piecewise-constant profile at time t."""
        fronts, pos = self.arrangement(t)
        if not fronts:
            return [], [self.initial_values[0]]
        values = [fronts[0].u_left] + [f.u_right for f in fronts]
        return pos, values

    def sample(self, t: float, x: float) -> float:
        """Value at (t, x), right-continuous across fronts."""
        pos, values = self.states_at(t)
        return values[bisect_right(pos, x)]

    def trace(self, t: float, x: float, tol: float = 1e-12) -> Tuple[float, float]:
        """One-sided limits (u_minus, u_plus) at position x, time t."""
        fronts, pos = self.arrangement(t)
        if not fronts:
            v = self.initial_values[0]
            return v, v
        values = [fronts[0].u_left] + [f.u_right for f in fronts]
        on = [i for i, p in enumerate(pos) if abs(p - x) <= tol]
        if on:
            return values[on[0]], values[on[-1] + 1]
        k = bisect_right(pos, x)
        return values[k], values[k]

    def front_count_alive(self, t: float) -> int:
        return len(self.alive(t))

    def export_csv(self, path) -> None:
        """Front segments as CSV: one row per front, headers carry units."""
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "t_start [time]", "t_end [time]", "x_start [space]",
                        "speed [space/time]", "u_left [value]", "u_right [value]",
                        "kind"])
            for f in self.fronts:
                t_end = min(f.death, self.horizon)
                w.writerow([f.id, _g(f.birth), _g(t_end), _g(f.x_birth),
                            _g(f.speed), _g(f.u_left), _g(f.u_right), f.kind])


def _g(x: float) -> str:
    return format(float(x), ".17g")


def evolve(flux: FluxModel, breakpoints: Sequence[float], values: Sequence[float],
           horizon: float, mesh: float = 1.0 / 64,
           interaction_mode: str = "entropic",
           jump_modes: Optional[Sequence[str]] = None) -> FrontSolution:
    """Run the event-driven evolution up to ``horizon``.

    ``values`` has one more entry than ``breakpoints``; ``jump_modes`` gives a
    per-initial-jump resolution mode ("entropic" or "non_entropic"), default
    entropic.  Interactions are resolved with ``interaction_mode``:
    "entropic" re-solves the Riemann problem on the outermost states,
    "preserve" re-emits a single jump-speed front.
    """
    breakpoints = [float(x) for x in breakpoints]
    values = [float(u) for u in values]
    if len(values) != len(breakpoints) + 1:
        raise ValueError("need len(values) == len(breakpoints) + 1")
    if any(b >= a for a, b in zip(breakpoints[1:], breakpoints[:-1])):
        raise ValueError("breakpoints must be strictly increasing")
    if any(not (0.0 <= u <= 1.0) for u in values):
        raise ValueError("values must lie in [0, 1]; rescale data on ingestion")
    if jump_modes is None:
        jump_modes = ["entropic"] * len(breakpoints)
    if len(jump_modes) != len(breakpoints):
        raise ValueError("one jump mode per breakpoint")

    fronts: List[Front] = []
    active: List[Front] = []  # kept sorted left to right

    def _spawn(t: float, x: float, wave: RiemannWave) -> Front:
        fr = Front(id=len(fronts), birth=t, x_birth=x, speed=wave.speed,
                   u_left=wave.u_left, u_right=wave.u_right, kind=wave.kind)
        fr.shock = make_shock(flux, wave.u_left, wave.u_right)
        fronts.append(fr)
        return fr

    for x, u_l, u_r, jmode in zip(breakpoints, values[:-1], values[1:],
                                  jump_modes):
        for wave in solve_riemann(flux, u_l, u_r, mode=jmode, mesh=mesh):
            active.append(_spawn(0.0, x, wave))
    active.sort(key=lambda f: (f.x_birth, f.speed))

    events: List[InteractionEvent] = []
    guard = 10 * len(active) + 100
    t_now = 0.0
    while guard > 0:
        guard -= 1
        # earliest adjacent collision
        best_t, best_i = math.inf, -1
        for i in range(len(active) - 1):
            a, b = active[i], active[i + 1]
            rel = a.speed - b.speed
            if rel <= _TIE:
                continue
            gap = max(b.position(t_now) - a.position(t_now), 0.0)
            tc = t_now + gap / rel
            if tc < best_t - _TIE:
                best_t, best_i = tc, i
        if best_i < 0 or best_t > horizon + _TIE:
            break
        t_now = best_t
        x_hit = active[best_i].position(t_now)
        # chain all fronts meeting this point at this time
        lo = best_i
        while lo > 0 and abs(active[lo - 1].position(t_now) - x_hit) <= 1e-9:
            lo -= 1
        hi = best_i + 1
        while hi + 1 < len(active) and abs(active[hi + 1].position(t_now) - x_hit) <= 1e-9:
            hi += 1
        group = active[lo:hi + 1]
        for f in group:
            f.death = t_now
        u_out_l, u_out_r = group[0].u_left, group[-1].u_right
        mode = "entropic" if interaction_mode == "entropic" else "non_entropic"
        waves = solve_riemann(flux, u_out_l, u_out_r, mode=mode, mesh=mesh)
        born = [_spawn(t_now, x_hit, w) for w in waves]
        events.append(InteractionEvent(
            t=t_now, x=x_hit,
            incoming=tuple(f.id for f in group),
            outgoing=tuple(f.id for f in born)))
        active[lo:hi + 1] = born
    if guard == 0:
        raise RuntimeError("front interaction loop failed to terminate")

    # mark simultaneous events (already processed leftmost-first by position)
    marked = []
    for e in events:
        tie = any(abs(e.t - o.t) <= _TIE and e is not o for o in events)
        marked.append(InteractionEvent(e.t, e.x, e.incoming, e.outgoing, tie))
    marked.sort(key=lambda e: (e.t, e.x))

    for f in fronts:
        if f.death > horizon:
            f.death = math.inf  # survives the whole window
    return FrontSolution(
        flux=flux,
        fronts=tuple(fronts),
        horizon=float(horizon),
        initial_breakpoints=tuple(breakpoints),
        initial_values=tuple(values),
        events=tuple(marked),
        rarefaction_mesh=float(mesh),
    )


def sample(solution: FrontSolution, t: float, x: float) -> float:
    return solution.sample(t, x)


def trace(solution: FrontSolution, s, t: float) -> Tuple[float, float]:
    """One-sided limits along x = s(t).

    ``s`` may be a plain position, a test curve (``.s``), a characteristic or
    front (``.position``), or any t -> x callable.
    """
    if hasattr(s, "s") and not isinstance(s, (int, float)):
        x = float(s.s(t))
    elif hasattr(s, "position"):
        x = float(s.position(t))
    elif callable(s):
        x = float(s(t))
    else:
        x = float(s)
    return solution.trace(t, x)


def entropy_production(solution: FrontSolution, pair: EntropyPair,
                       t_window: Tuple[float, float],
                       x_window: Tuple[float, float] = (-math.inf, math.inf)) -> float:
    """Entropy-production mass inside the window.

    For piecewise-constant solutions the production is purely atomic on the
    fronts: each front contributes its per-time dissipation rate times the
    length of time it spends inside the window.
    """
    t1, t2 = t_window
    x1, x2 = x_window
    total = 0.0
    for f in solution.fronts:
        a = max(t1, f.birth)
        b = min(t2, f.death, solution.horizon)
        if b <= a:
            continue
        # clip to the x-window (front path is linear)
        if f.speed > 0:
            a = max(a, f.birth + (x1 - f.x_birth) / f.speed)
            b = min(b, f.birth + (x2 - f.x_birth) / f.speed)
        elif f.speed < 0:
            a = max(a, f.birth + (x2 - f.x_birth) / f.speed)
            b = min(b, f.birth + (x1 - f.x_birth) / f.speed)
        else:
            if not (x1 <= f.x_birth <= x2):
                continue
        if b <= a:
            continue
        total += shock_dissipation_rate(f.shock, pair) * (b - a)
    return total


# -- weak-form residual ---------------------------------------------------

_GAUSS_N = 16
_GX, _GW = np.polynomial.legendre.leggauss(_GAUSS_N)


def _gauss(fn, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * sum(w * fn(mid + half * x) for x, w in zip(_GX, _GW))


def weak_residual(solution: FrontSolution, phi) -> float:
    """| integral of u phi_t + f(u) phi_x over (0,T)xR  +  integral u0 phi(0,.) |.

    ``phi`` provides value/dt/dx plus t_breaks/x_breaks (polynomial pieces).
    The quadrature splits time at interaction events and space at front
    positions, so each Gauss panel sees a polynomial integrand; the residual
    of an exact weak solution is then quadrature-roundoff only.
    """
    T = solution.horizon
    knots = {0.0, T, *solution.event_times(),
             *(t for t in phi.t_breaks if 0.0 < t < T)}
    # panels must not contain a front crossing a polynomial break of phi
    for f in solution.fronts:
        if abs(f.speed) < 1e-15:
            continue
        for xb in phi.x_breaks:
            tc = f.birth + (xb - f.x_birth) / f.speed
            if f.birth < tc < min(f.death, T):
                knots.add(tc)
    t_knots = sorted(knots)

    def x_integral(t: float) -> float:
        pos, values = solution.states_at(t)
        xs = sorted({*phi.x_breaks, *pos})
        xs = [x for x in xs if phi.x_lo <= x <= phi.x_hi]
        knots = [phi.x_lo] + xs + [phi.x_hi]
        tot = 0.0
        for a, b in zip(knots[:-1], knots[1:]):
            if b - a <= 0:
                continue
            u = values[bisect_right(pos, 0.5 * (a + b))]
            fu = solution.flux.f(u)
            tot += _gauss(lambda x: u * phi.dt(t, x) + fu * phi.dx(t, x), a, b)
        return tot

    bulk = 0.0
    for a, b in zip(t_knots[:-1], t_knots[1:]):
        bulk += _gauss(x_integral, a, b)

    pos0, val0 = solution.states_at(0.0)
    xs = sorted({*phi.x_breaks, *pos0})
    xs = [x for x in xs if phi.x_lo <= x <= phi.x_hi]
    knots = [phi.x_lo] + xs + [phi.x_hi]
    init = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b - a <= 0:
            continue
        u = val0[bisect_right(pos0, 0.5 * (a + b))]
        init += u * _gauss(lambda x: phi.value(0.0, x), a, b)
    return abs(bulk + init)
