import pytest

import lagfront as lf

WINDOW = (-1.0, 3.0)


@pytest.fixture(scope="session")
def fx():
    return lf.burgers()


@pytest.fixture(scope="session")
def quartic():
    return lf.polynomial_flux([0.0, 0.0, 0.5, 0.0, 0.25], name="quartic")


@pytest.fixture(scope="session")
def shock_sol(fx):
    return lf.evolve(fx, [1.0], [1.0, 0.0], horizon=1.0)


@pytest.fixture(scope="session")
def shock_hyp(shock_sol, fx):
    return lf.build_ensemble(shock_sol, "hypograph", 256, 256, WINDOW, seed=0)


@pytest.fixture(scope="session")
def shock_epi(shock_sol, fx):
    return lf.build_ensemble(shock_sol, "epigraph", 256, 256, WINDOW, seed=7)


@pytest.fixture(scope="session")
def nonent_sol(fx):
    return lf.evolve(fx, [1.0], [0.0, 1.0], horizon=1.0,
                     jump_modes=["non_entropic"])


@pytest.fixture(scope="session")
def nonent_hyp(nonent_sol):
    return lf.build_ensemble(nonent_sol, "hypograph", 256, 256, WINDOW, seed=0)


@pytest.fixture(scope="session")
def nonent_epi(nonent_sol):
    return lf.build_ensemble(nonent_sol, "epigraph", 256, 256, WINDOW, seed=7)


@pytest.fixture(scope="session")
def fan_sol(fx):
    return lf.evolve(fx, [0.0], [0.0, 1.0], horizon=1.0, mesh=1.0 / 64)


@pytest.fixture(scope="session")
def fan_hyp(fan_sol):
    return lf.build_ensemble(fan_sol, "hypograph", 256, 256, (-1.0, 1.5), seed=0)


@pytest.fixture(scope="session")
def fan_epi(fan_sol):
    return lf.build_ensemble(fan_sol, "epigraph", 256, 256, (-1.0, 1.5), seed=7)


@pytest.fixture(scope="session")
def fan_hyp_tight(fan_sol):
    # the hypograph is empty left of the fan origin, so the window may hug it;
    # the finer x-cells resolve the corner of the (position, level) constraint
    return lf.build_ensemble(fan_sol, "hypograph", 256, 256, (-0.125, 1.125),
                             seed=0)
