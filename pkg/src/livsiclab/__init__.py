"""Livsic-theory laboratory: periodic obstructions, coboundaries and CLTs on toral Anosov systems."""

from .errors import (
    CapExceededError,
    InsufficientCoverageError,
    LivsicError,
    MembershipError,
    NoObstructionError,
    NotCertifiedError,
)
from .torus import (
    ConeCertificate,
    HyperbolicToralMap,
    RationalTorusPoint,
    ShearedMap,
    TorusPoint,
    apply,
    apply_inverse,
    apply_rational,
    iterate,
    verify_cone_condition,
)
from .observables import (
    CocycleValue,
    TrigObservable,
    birkhoff_cocycle,
    birkhoff_sum,
    coboundary_from,
    evaluate,
    lipschitz_norm,
    normalize_zero_mean,
)
from .orbits import (
    PeriodicOrbit,
    count_period_n_points,
    enumerate_periodic_points,
    group_into_orbits,
    max_obstruction_up_to,
    orbit_obstruction,
    orbits_up_to,
)
from .livsic import (
    GridFunction,
    MeasurableVerdict,
    Verdict,
    coboundary_residual,
    measurable_solution_test,
    merge_grids,
    solve_on_orbit,
)
from .clt import (
    CltSample,
    VarianceEstimate,
    clt_report,
    estimate_variance,
    ks_distance,
    normal_cdf,
    sample_birkhoff,
    tail_fraction,
)
from .certify import TypeCertificate, certify_family, certify_type, hoeffding_radius, replicate, rigidity_witness
from .flow import (
    FlowCocycleValue,
    FlowPoint,
    PeriodicFlowOrbit,
    RoofFunction,
    SuspensionObservable,
    flow,
    flow_clt_report,
    flow_coboundary,
    flow_cocycle,
    flow_orbit_obstruction,
    infinitesimal_generator_check,
    periodic_flow_orbit,
)

__version__ = "0.1.0"
