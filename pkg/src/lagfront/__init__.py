"""Desk-scale laboratory for 1-D scalar conservation laws with convex flux.

Evolves piecewise-constant weak solutions exactly by front tracking,
represents their hypograph and epigraph as weighted curve ensembles, checks
the entropy-flux decomposition across Lipschitz test curves, and constructs
generalized characteristics as no-cross barrier curves.
"""

__version__ = "0.1.0"

from .flux import (  # noqa: F401
    EntropyPair, FluxModel, ShockData, bounce_map, burgers, make_entropy,
    make_shock, polynomial_flux, rescaled, rh_speed, shock_dissipation_rate,
    sonic_level,
)
from .fronts import (  # noqa: F401
    Front, FrontSolution, entropy_production, evolve, sample, solve_riemann,
    trace, weak_residual,
)
from .ensemble import (  # noqa: F401
    Ensemble, LagCurve, build_ensemble, check_no_crossing, evolve_curve,
    pushforward_check, region_area, tv_dissipation,
)
from .fluxform import (  # noqa: F401
    CrossingRecord, Surface, TestFunction, classify_intersections,
    curve_flux_pairing, intersection_statistics, lagrangian_flux,
    lagrangian_flux_detail, mollified_flux, theta_psi_pairing, trace_flux,
)
from .characteristics import (  # noqa: F401
    Characteristic, build_barrier, check_left_barrier, check_right_barrier,
    dissipation_ratio, refine_barrier, rightmost_reachable,
    verify_characteristic,
)
from .config import ConfigError, Scenario, load_scenario  # noqa: F401
from .report import convergence_study, run_scenario  # noqa: F401
