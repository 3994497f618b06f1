import math

import numpy as np
import pytest

import lagfront as lf
from lagfront.ensemble import HYPOGRAPH
from lagfront.fluxform import (BMINUS, BPLUS, IMINUS, IPLUS, Surface,
                               TestFunction, classify_intersections,
                               curve_flux_pairing, fit_linear,
                               theta_psi_pairing)


@pytest.fixture(scope="module")
def pair0(fx):
    return lf.make_entropy("quadratic", fx)


@pytest.fixture(scope="module")
def pair1(fx):
    return lf.make_entropy("quadratic", fx, "zero-at-1")


@pytest.fixture(scope="module")
def probe():
    return Surface(((0.6, 1.25), (0.9, 1.25)))


@pytest.fixture(scope="module")
def probe_phi():
    return TestFunction.plateau((0.55, 0.95), (1.0, 1.5))


def straight_curve(x0, v, T=1.0, flux=None, weight=1.0):
    slope = flux.df(v) if flux else v
    return lf.LagCurve(id=0, weight=weight, times=np.asarray([0.0, T]),
                       xs=np.asarray([x0, x0 + slope * T]),
                       vs=np.asarray([v]), jumps=(), side=HYPOGRAPH)


# -- classification --------------------------------------------------------

def test_classify_transverse_crossing(fx):
    surf = Surface(((0.0, 0.5), (1.0, 0.5)))
    c = straight_curve(0.0, 1.0, flux=fx)  # x = t for Burgers level 1
    recs = classify_intersections(c, surf)
    assert len(recs) == 1
    r = recs[0]
    assert r.cls == IPLUS
    assert r.t == pytest.approx(0.5, abs=1e-12)
    assert r.v_minus == r.v_plus == 1.0


def test_classify_bounce_on_shock_path(fx):
    sol = lf.evolve(fx, [1.0], [1.0, 0.0], horizon=5.0)
    c = lf.evolve_curve(sol, fx, 0.0, 0.75)
    surf = Surface.from_front(sol.fronts[0], 0.5, 4.5)
    recs = classify_intersections(c, surf)
    assert len(recs) == 1
    r = recs[0]
    assert r.cls == BMINUS
    assert r.t == pytest.approx(4.0, abs=1e-12)
    assert (r.v_minus, r.v_plus) == (pytest.approx(0.75), pytest.approx(0.25))


def test_classify_disjoint_curve_empty(fx):
    surf = Surface(((0.0, 2.0), (1.0, 2.0)))
    c = straight_curve(0.0, 0.5, flux=fx)
    assert classify_intersections(c, surf) == []


def test_classify_iminus_and_coincidence(fx):
    # curve dips onto the surface, rides it, and exits to the minus side
    c = lf.LagCurve(id=0, weight=1.0,
                    times=np.asarray([0.0, 0.25, 0.75, 1.0]),
                    xs=np.asarray([1.0, 0.5, 0.5, 0.25]),
                    vs=np.asarray([0.0, 0.0, 0.0]), jumps=(), side=HYPOGRAPH)
    surf = Surface(((0.0, 0.5), (1.0, 0.5)))
    recs = classify_intersections(c, surf)
    assert len(recs) == 1
    r = recs[0]
    # entered from x > s, exited to x < s: one crossing despite the ride
    assert r.cls == IMINUS
    assert r.t == pytest.approx(0.75)  # the exit completes the crossing


def test_classify_endpoint_on_surface_excluded(fx):
    surf = Surface(((0.0, 0.0), (1.0, 0.0)))
    c = straight_curve(0.0, 0.5, flux=fx)  # starts exactly on the surface
    recs = classify_intersections(c, surf)
    assert recs == []


# -- pairing ---------------------------------------------------------------

def one_record(cls, t=0.5, vm=1.0, vp=1.0, x=0.5):
    from lagfront.fluxform import CrossingRecord
    return CrossingRecord(t=t, cls=cls, v_minus=vm, v_plus=vp, x=x,
                          t_exit=t, x_exit=x)


def test_pairing_single_iplus(fx, pair0):
    phi = TestFunction.plateau((0.4, 0.6), (0.4, 0.6))
    assert curve_flux_pairing([one_record(IPLUS)], pair0, phi) == pytest.approx(
        1.0, abs=1e-14)


def test_pairing_bminus_difference(fx, pair0):
    phi = TestFunction.plateau((0.4, 0.6), (0.4, 0.6))
    rec = one_record(BMINUS, vm=0.75, vp=0.25)
    assert curve_flux_pairing([rec], pair0, phi) == pytest.approx(0.5, abs=1e-14)


def test_pairing_bplus_contributes_nothing(fx, pair0):
    phi = TestFunction.plateau((0.4, 0.6), (0.4, 0.6))
    assert curve_flux_pairing([one_record(BPLUS, vm=0.9, vp=0.1)], pair0,
                              phi) == 0.0


# -- Lagrangian vs trace ---------------------------------------------------

def test_lagrangian_flux_unreachable_surface(fx, pair0):
    sol = lf.evolve(fx, [1.0], [1.0, 0.0], horizon=1.0)
    hyp = lf.build_ensemble(sol, HYPOGRAPH, 64, 64, (-1.0, 3.0), seed=0)
    surf = Surface(((0.05, 2.0), (0.95, 2.0)))
    phi = TestFunction.plateau((0.1, 0.9), (1.5, 2.5))
    assert lf.lagrangian_flux(hyp, surf, pair0, phi) == 0.0


def test_lagrangian_flux_empty_ensemble(fx, pair0, probe, probe_phi):
    sol = lf.evolve(fx, [0.0], [0.0, 0.0], horizon=1.0)
    ens = lf.build_ensemble(sol, HYPOGRAPH, 8, 8, (-1.5, 1.5), seed=0)
    assert lf.lagrangian_flux(ens, probe, pair0, probe_phi) == 0.0


def test_anchor_mismatch_rejected(shock_hyp, pair1, probe, probe_phi):
    with pytest.raises(ValueError, match="zero-at-0"):
        lf.lagrangian_flux(shock_hyp, probe, pair1, probe_phi)


def test_trace_flux_probe_value(fx, shock_sol, pair0, probe, probe_phi):
    # u^- = 1 on the probe after the shock passes at t = 0.5:
    # integral of q(1) over [0.6, 0.9]
    tr = lf.trace_flux(shock_sol, probe, pair0, probe_phi)
    assert tr == pytest.approx(0.1, abs=1e-9)


def test_trace_flux_along_shock_path(fx, shock_sol, pair0):
    surf = Surface.from_front(shock_sol.fronts[0], 0.1, 0.9)
    phi = TestFunction.plateau((0.2, 0.8), (1.0, 1.5))
    # integrand (q(1) - sigma eta(1)) = 1/3 - 0.5*0.5 = 1/12 per unit time
    integrand = pair0.q(1.0) - 0.5 * pair0.eta(1.0)
    assert integrand == pytest.approx(1.0 / 12, abs=1e-15)
    tr = lf.trace_flux(shock_sol, surf, pair0, phi)
    assert tr == pytest.approx(integrand * phi.time_integral(), abs=1e-9)


def test_trace_flux_zero_state(fx, pair0):
    sol = lf.evolve(fx, [5.0], [0.0, 1.0], horizon=1.0)  # u = 0 near the probe
    surf = Surface(((0.2, 0.5), (0.8, 0.5)))
    phi = TestFunction.plateau((0.3, 0.7), (0.2, 0.8))
    assert lf.trace_flux(sol, surf, pair0, phi) == pytest.approx(0.0, abs=1e-12)


def test_flux_identity_probe(shock_hyp, pair0, probe, probe_phi):
    tr = lf.trace_flux(shock_hyp.solution, probe, pair0, probe_phi)
    lag = lf.lagrangian_flux(shock_hyp, probe, pair0, probe_phi)
    assert abs(lag - tr) / abs(tr) <= 0.02


def test_flux_identity_shock_path_bounce_dominated(shock_hyp, pair0):
    sol = shock_hyp.solution
    surf = Surface.from_front(sol.fronts[0], 0.1, 0.9)
    phi = TestFunction.plateau((0.2, 0.8), (1.0, 1.5))
    tr = lf.trace_flux(sol, surf, pair0, phi)
    det = lf.lagrangian_flux_detail(shock_hyp, surf, pair0, phi)
    assert abs(det["total"] - tr) / abs(tr) <= 0.02
    assert det["Bminus"] / det["total"] >= 0.95


def test_epigraph_identity_active_surface(fx, shock_sol, shock_epi, pair1):
    # before the shock reaches x = 1.25 the left trace there is 0; the
    # zero-at-1 pair sees the epigraph curves streaming across
    surf = Surface(((0.1, 1.25), (0.4, 1.25)))
    phi = TestFunction.plateau((0.1, 0.4), (1.0, 1.5))
    tr = lf.trace_flux(shock_sol, surf, pair1, phi)
    assert tr == pytest.approx(pair1.q(0.0) * 0.3, abs=1e-9)
    lag = lf.lagrangian_flux(shock_epi, surf, pair1, phi)
    assert abs(lag - tr) / abs(tr) <= 0.02


def test_epigraph_identity_vacuous_surfaces(shock_sol, shock_epi, pair1, probe,
                                            probe_phi):
    tr = lf.trace_flux(shock_sol, probe, pair1, probe_phi)
    lag = lf.lagrangian_flux(shock_epi, probe, pair1, probe_phi)
    assert abs(tr) <= 1e-12 and abs(lag) <= 2e-3


# -- mollified route -------------------------------------------------------

def test_mollified_matches_trace(shock_sol, pair0, probe, probe_phi):
    tr = lf.trace_flux(shock_sol, probe, pair0, probe_phi)
    mo = lf.mollified_flux(shock_sol, probe, pair0, probe_phi, 1e-3)
    assert abs(mo - tr) <= 1e-2


def test_mollified_constant_zero(fx, pair0):
    sol = lf.evolve(fx, [5.0], [0.0, 1.0], horizon=1.0)
    surf = Surface(((0.2, 0.5), (0.8, 0.5)))
    phi = TestFunction.plateau((0.3, 0.7), (0.2, 0.8))
    assert lf.mollified_flux(sol, surf, pair0, phi, 1e-3) == pytest.approx(
        0.0, abs=1e-12)


def test_mollified_first_order_in_delta(fx, shock_sol, pair0):
    # surface crossed by the shock: the collar mismatch is O(delta)
    surf = Surface(((0.3, 1.25), (0.7, 1.25)))
    phi = TestFunction.plateau((0.3, 0.7), (1.0, 1.5))
    tr = lf.trace_flux(shock_sol, surf, pair0, phi)
    e1 = abs(lf.mollified_flux(shock_sol, surf, pair0, phi, 2e-2) - tr)
    e2 = abs(lf.mollified_flux(shock_sol, surf, pair0, phi, 1e-2) - tr)
    assert 0.3 <= e2 / e1 <= 0.7


def test_mollified_delta_too_large(fx, shock_sol, pair0, probe):
    phi = TestFunction.plateau((0.6, 0.9), (1.2, 1.3))
    with pytest.raises(ValueError, match="too large"):
        lf.mollified_flux(shock_sol, probe, pair0, phi, 0.5)


# -- telescoping equality --------------------------------------------------

def test_theta_psi_equals_pairing_everywhere(shock_hyp, pair0, probe,
                                             probe_phi):
    sol = shock_hyp.solution
    surf2 = Surface.from_front(sol.fronts[0], 0.1, 0.9)
    phi2 = TestFunction.plateau((0.2, 0.8), (1.0, 1.5))
    for surf, phi in ((probe, probe_phi), (surf2, phi2)):
        for c in shock_hyp.curves[::23]:
            a = curve_flux_pairing(classify_intersections(c, surf), pair0, phi)
            b = theta_psi_pairing(c, surf, pair0, phi)
            assert abs(a - b) <= 1e-12


# -- intersection statistics ----------------------------------------------

def test_intersection_counts_shock_transverse(shock_hyp):
    surf = Surface(((0.05, 0.635), (0.95, 1.265)))  # slope 0.7, generic
    stats = lf.intersection_statistics(shock_hyp, surf,
                                       [0.1, 0.05, 0.025, 0.0125])
    bound = len(shock_hyp.solution.fronts) + 0 + 1
    assert stats["max_count"] <= bound
    eps = sorted(stats["tangency_mass"], reverse=True)
    masses = [stats["tangency_mass"][e] for e in eps]
    assert all(a >= b for a, b in zip(masses[:-1], masses[1:]))
    c_fit, r2 = fit_linear(eps, masses)
    assert r2 >= 0.9
    assert c_fit > 0


def test_intersection_counts_on_shock_path(shock_hyp):
    sol = shock_hyp.solution
    surf = Surface.from_front(sol.fronts[0], 0.05, 0.95)
    stats = lf.intersection_statistics(shock_hyp, surf, [0.05])
    # bouncing curves touch exactly once
    assert stats["max_count"] == 1
    assert stats["histogram"].get(1, 0) > 1000


def test_intersection_parallel_disjoint(fx):
    sol = lf.evolve(fx, [0.0], [0.5, 0.5], horizon=1.0)
    ens = lf.build_ensemble(sol, HYPOGRAPH, 32, 32, (-1.5, 1.5), seed=0)
    # parallel to every curve of level 0.25 but placed above all of them
    surf = Surface(((0.05, 5.0), (0.95, 5.25)))
    stats = lf.intersection_statistics(ens, surf, [0.01])
    assert stats["max_count"] == 0


# -- test-function sanity --------------------------------------------------

def test_bump_smoothness_and_support():
    phi = TestFunction(0.0, 1.0, -1.0, 1.0, ramp_t=0.2, ramp_x=0.3)
    assert phi.value(0.5, 0.0) == 1.0
    assert phi.value(-0.1, 0.0) == 0.0 and phi.value(1.1, 0.0) == 0.0
    h = 1e-6
    for (t, x) in ((0.1, 0.0), (0.95, -0.85), (0.5, 0.75)):
        fd_t = (phi.value(t + h, x) - phi.value(t - h, x)) / (2 * h)
        fd_x = (phi.value(t, x + h) - phi.value(t, x - h)) / (2 * h)
        assert fd_t == pytest.approx(phi.dt(t, x), abs=1e-7)
        assert fd_x == pytest.approx(phi.dx(t, x), abs=1e-7)
    # C^2: second difference of the ramp stays bounded through the knots
    for y in (0.0, 0.2, 0.8, 1.0):
        dd = (phi.value(y + h, 0.0) - 2 * phi.value(y, 0.0)
              + phi.value(y - h, 0.0)) / h ** 2
        assert abs(dd) < 40.0


def test_plateau_time_integral():
    phi = TestFunction.plateau((0.2, 0.8), (0.0, 1.0), ramp_t=0.05)
    assert phi.time_integral() == pytest.approx(0.65, abs=1e-14)


def test_surface_normal_and_lipschitz():
    surf = Surface(((0.0, 0.0), (1.0, 0.5)))
    assert surf.lipschitz_bound == pytest.approx(0.5)
    n = surf.normal(0.3)
    assert n[1] > 0  # points into x > s(t)
    assert math.hypot(*n) == pytest.approx(1.0)
    assert np.hypot(n[0], n[1]) == pytest.approx(1.0)


def test_surface_requires_increasing_times():
    with pytest.raises(ValueError):
        Surface(((0.5, 0.0), (0.5, 1.0)))
