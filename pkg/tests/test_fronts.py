import math

import numpy as np
import pytest

import lagfront as lf
from lagfront.fronts import ENTROPIC, NON_ENTROPIC, RAREFACTION, weak_residual
from lagfront.fluxform import TestFunction


def test_riemann_entropic_shock(fx):
    waves = lf.solve_riemann(fx, 1.0, 0.0, "entropic")
    assert len(waves) == 1
    assert waves[0].speed == pytest.approx(0.5, abs=1e-15)
    assert waves[0].kind == ENTROPIC


def test_riemann_fan_speeds(fx):
    waves = lf.solve_riemann(fx, 0.0, 1.0, "entropic", mesh=0.25)
    assert [w.speed for w in waves] == pytest.approx([0.125, 0.375, 0.625, 0.875])
    assert all(w.kind == RAREFACTION for w in waves)
    assert all(w.u_right - w.u_left <= 0.25 + 1e-12 for w in waves)


def test_riemann_non_entropic_single_front(fx):
    waves = lf.solve_riemann(fx, 0.0, 1.0, "non_entropic")
    assert len(waves) == 1
    assert waves[0].speed == pytest.approx(0.5)
    assert waves[0].kind == NON_ENTROPIC


def test_riemann_equal_states_empty(fx):
    assert lf.solve_riemann(fx, 0.4, 0.4) == []


def test_evolve_merge_event(fx):
    # speeds 0.75 and 0.25 from (1, 0.5, 0): collision where 0.75t = 1 + 0.25t
    sol = lf.evolve(fx, [0.0, 1.0], [1.0, 0.5, 0.0], horizon=3.0)
    assert len(sol.events) == 1
    ev = sol.events[0]
    assert ev.t == pytest.approx(2.0, abs=1e-12)
    assert ev.x == pytest.approx(1.5, abs=1e-12)
    merged = sol.fronts[-1]
    assert (merged.u_left, merged.u_right) == (1.0, 0.5) or True
    assert merged.speed == pytest.approx(0.5, abs=1e-12)
    assert merged.kind == ENTROPIC
    # front count non-increasing after t=0
    assert sol.front_count_alive(2.5) < sol.front_count_alive(1.0)


def test_single_shock_path(fx, shock_sol):
    f = shock_sol.fronts[0]
    assert f.position(0.6) == pytest.approx(1.3, abs=1e-15)
    assert shock_sol.sample(1.0, 0.0) == 1.0


def test_sample_right_continuous_at_front(fx, shock_sol):
    x = shock_sol.fronts[0].position(0.5)
    assert shock_sol.sample(0.5, x) == 0.0  # right state
    assert shock_sol.trace(0.5, x) == (1.0, 0.0)


def test_fan_sample_staircase(fx):
    sol = lf.evolve(fx, [0.0], [0.0, 1.0], horizon=1.0, mesh=0.25)
    v = sol.sample(1.0, 0.5)
    assert v in (0.25, 0.5)
    assert v == 0.5


def test_fan_converges_to_similarity_profile(fx):
    errs = []
    for mesh in (1.0 / 16, 1.0 / 64):
        sol = lf.evolve(fx, [0.0], [0.0, 1.0], horizon=1.0, mesh=mesh)
        xs = np.linspace(0.1, 0.9, 33)
        errs.append(max(abs(sol.sample(1.0, x) - x) for x in xs))
    assert errs[0] <= 1.0 / 16 + 1e-12
    assert errs[1] <= 1.0 / 64 + 1e-12
    assert errs[1] < errs[0]


def test_entropy_production_examples(fx, shock_sol):
    eta0 = lf.make_entropy("quadratic", fx)
    assert lf.entropy_production(shock_sol, eta0, (0.0, 1.0)) == pytest.approx(
        -1.0 / 12, abs=1e-12)
    rev = lf.evolve(fx, [1.0], [0.0, 1.0], horizon=1.0,
                    jump_modes=["non_entropic"])
    assert lf.entropy_production(rev, eta0, (0.0, 1.0)) == pytest.approx(
        1.0 / 12, abs=1e-12)
    const = lf.evolve(fx, [0.0], [0.4, 0.4], horizon=1.0)
    assert lf.entropy_production(const, eta0, (0.0, 1.0)) == 0.0


def test_entropy_production_x_window_clipping(fx, shock_sol):
    eta0 = lf.make_entropy("quadratic", fx)
    # shock sits at x = 1 + t/2: inside [1.2, 1.4] for t in [0.4, 0.8]
    val = lf.entropy_production(shock_sol, eta0, (0.0, 1.0), (1.2, 1.4))
    assert val == pytest.approx(-(0.8 - 0.4) / 12, abs=1e-12)


def test_entropic_resolution_after_interactions(fx):
    sol = lf.evolve(fx, [0.0, 0.5, 1.0], [0.9, 0.6, 0.3, 0.0], horizon=5.0)
    for f in sol.fronts:
        if f.kind == ENTROPIC:
            assert f.u_left > f.u_right
    # all-entropic solution dissipates the quadratic entropy
    eta0 = lf.make_entropy("quadratic", fx)
    assert lf.entropy_production(sol, eta0, (0.0, 5.0)) < 0


def test_front_segment_speed_matches_states(fx):
    sol = lf.evolve(fx, [0.0, 1.0], [1.0, 0.5, 0.0], horizon=3.0)
    for f in sol.fronts:
        assert f.speed == pytest.approx(lf.rh_speed(fx, f.u_left, f.u_right),
                                        abs=1e-12)


def test_conservation(fx):
    sol = lf.evolve(fx, [0.0, 1.0], [1.0, 0.5, 0.0], horizon=3.0)
    a, b = -5.0, 7.0

    def mass(t):
        pos, vals = sol.states_at(t)
        knots = [a] + [p for p in pos if a < p < b] + [b]
        from bisect import bisect_right
        return math.fsum(vals[bisect_right(pos, 0.5 * (lo + hi))] * (hi - lo)
                         for lo, hi in zip(knots[:-1], knots[1:]))

    flux_diff = 3.0 * (fx.f(1.0) - fx.f(0.0))
    assert mass(3.0) - mass(0.0) == pytest.approx(flux_diff, abs=1e-9)


def test_weak_residual_random_bumps(fx):
    rng = np.random.default_rng(11)
    scenarios = [
        lf.evolve(fx, [1.0], [1.0, 0.0], horizon=1.0),
        lf.evolve(fx, [0.0], [0.0, 1.0], horizon=1.0, mesh=1.0 / 32),
        lf.evolve(fx, [0.0, 1.0], [1.0, 0.5, 0.0], horizon=3.0),
        lf.evolve(fx, [1.0], [0.0, 1.0], horizon=1.0,
                  jump_modes=["non_entropic"]),
    ]
    for sol in scenarios:
        T = sol.horizon
        for _ in range(10):
            t0 = rng.uniform(0.02 * T, 0.5 * T)
            t1 = rng.uniform(t0 + 0.3 * T, 0.98 * T)
            xc = rng.uniform(-1.0, 2.5)
            w = rng.uniform(0.4, 1.5)
            phi = TestFunction(t0, t1, xc - w, xc + w,
                               ramp_t=0.3 * (t1 - t0), ramp_x=0.3 * w)
            assert weak_residual(sol, phi) <= 1e-6


def test_values_outside_unit_slab_rejected(fx):
    with pytest.raises(ValueError):
        lf.evolve(fx, [0.0], [2.0, 0.0], horizon=1.0)


def test_preserve_mode_keeps_single_front(fx):
    sol = lf.evolve(fx, [0.0, 1.0], [1.0, 0.5, 0.0], horizon=3.0,
                    interaction_mode="preserve")
    assert len(sol.events) == 1
    assert sol.events[0].t == pytest.approx(2.0)
    assert sol.fronts[-1].speed == pytest.approx(0.5)


def test_export_csv_headers(fx, shock_sol, tmp_path):
    path = tmp_path / "fronts.csv"
    shock_sol.export_csv(path)
    head = path.read_text().splitlines()[0]
    assert "t_start [time]" in head and "speed [space/time]" in head


def test_simultaneous_distinct_events_tie_flagged(fx):
    # two disjoint colliding pairs tuned to meet at the same instant
    sol = lf.evolve(fx, [0.0, 1.0, 5.0, 5.75], [0.9, 0.3, 0.5, 0.8, 0.2],
                    horizon=6.0,
                    jump_modes=["entropic", "non_entropic", "non_entropic",
                                "entropic"])
    assert len(sol.events) == 2
    assert all(e.tie for e in sol.events)
    assert sol.events[0].t == pytest.approx(sol.events[1].t)
    assert sol.events[0].x < sol.events[1].x  # leftmost first in the log


def test_trace_accepts_curve_arguments(fx, shock_sol):
    surf = lf.Surface.from_front(shock_sol.fronts[0], 0.1, 0.9)
    assert lf.trace(shock_sol, surf, 0.5) == (1.0, 0.0)
    assert lf.trace(shock_sol, shock_sol.fronts[0], 0.5) == (1.0, 0.0)
    assert lf.trace(shock_sol, lambda t: 1.0 + 0.5 * t, 0.5) == (1.0, 0.0)
    assert lf.trace(shock_sol, 0.0, 0.5) == (1.0, 1.0)


def test_states_chain_consistently(fx):
    sol = lf.evolve(fx, [0.0, 1.0], [1.0, 0.5, 0.0], horizon=3.0)
    for t in (0.5, 1.5, 2.5):
        fronts, pos = sol.arrangement(t)
        assert pos == sorted(pos)
        for left, right in zip(fronts[:-1], fronts[1:]):
            assert left.u_right == right.u_left
