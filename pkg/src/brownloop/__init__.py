"""Numerical laboratory for the infinite Brownian loop on hyperbolic spaces."""

__version__ = "0.1.0"

from .rootsys import (
    RootDatum,
    PositiveRoot,
    EpsilonSchedule,
    ChamberPoint,
    build_root_datum,
    dimensions,
)
from .hkernel import (
    HyperbolicModel,
    QuadratureSpec,
    SpacePoint,
    KernelProfile,
    make_model,
    spherical_phi,
    phi0,
    heat_kernel,
    hyperbolic_distance,
)
from .doob import RelativizedSpace, relativized_kernel, check_normalization
from .evolve import (
    InitialData,
    radial_bump,
    offcenter_bump,
    decaying_data,
    mass_function,
    mass_constant_radial,
    l1_distance,
    linf_scaled_distance,
    lp_scaled_distance,
    run_convergence_experiment,
)
from .loopmc import (
    MCConfig,
    EmpiricalSample,
    loop_drift,
    simulate_loop,
    loop_marginal_density,
    bridge_radial_density,
    bridge_to_loop_gap,
    ks_distance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
