"""Unconditionally positive, linear-invariant-preserving time integrators.

The package bundles the first- and second-order damped (geco) and
product-term (gbbks) schemes with Euler/Heun baselines, a production-
destruction model layer, and a stability toolkit that computes stability
functions, critical step sizes, steady-state Jacobians and fixed-point
verdicts for linear conservative Metzler systems.
"""

from .errors import (
    IntegrationError,
    ModelError,
    NumericsError,
    PosinvError,
    SolverError,
)
from .integrators import (
    GbbksStrategy,
    SchemeSpec,
    StepOutcome,
    Trajectory,
    euler_step,
    gbbks1_step,
    gbbks2_step,
    geco1_step,
    geco2_step,
    heun_step,
    integrate,
    make_scheme,
    phi,
    solve_tau,
    step,
    step_map,
)
from .linalg import (
    Spectrum,
    SystemReport,
    eigenvalues,
    expm_apply,
    metzler_disk_check,
    nullspace,
    validate_system,
)
from .pds import (
    GeneralPds,
    LinearPds,
    ModelDocument,
    destruction_rate_sum,
    load_model,
    parse_model,
    serialize_model,
    split_metzler,
    steady_state_for,
)
from .stability import (
    Certificate,
    CriticalStep,
    RegionEndpoint,
    StabilityReport,
    classify_fixed_point,
    closed_form_jacobian,
    critical_step,
    geco2_region_endpoint,
    geco2_w,
    numerical_jacobian,
    random_conservative_system,
    stability_value,
    unconditional_certificate,
)

__version__ = "0.1.0"
