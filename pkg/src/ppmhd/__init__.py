"""Positivity-preserving Lax-Friedrichs FV/DG laboratory for ideal MHD."""

from .states import (
    AdmissibilityTolerance,
    ConservedState,
    IdealGasEos,
    PrimitiveState,
    eos_pressure,
    gstar_functional,
    internal_energy,
    is_admissible,
    orthogonal_transform,
    to_conserved,
    to_primitive,
)
from .bounds import (
    alpha_hat,
    alpha_rho,
    alpha_sigma,
    alpha_sqrt,
    alpha_tilde,
    fast_speed,
    sound_speeds,
    spectral_radius,
    strict_exceed,
)
from .flux import (
    WeightedQuadrupleSet2D,
    WeightedSextupleSet3D,
    glf_average_1d,
    glf_average_2d,
    glf_average_3d,
    lf_flux,
    lf_splitting_counterexample,
    onestate_inequality_lhs,
    physical_flux,
    splitting_inequality_lhs,
)
from .grid import OUTFLOW, PERIODIC, CartesianGrid, GridGeometry, InflowRegion
from .fv import (
    ddf_residual_2d,
    ddf_residual_3d,
    divergence_sup,
    init_cellavg_1d,
    init_cellavg_2d,
    init_cellavg_3d,
    lf_step_1d,
    lf_step_2d,
    lf_step_3d,
    max_dt,
)
from .dg import (
    DgCellPoly,
    DgField,
    LimiterConfig,
    dg_cell_update_1d,
    dg_cell_update_2d,
    energy_bound_diagnostic,
    interface_divergence_2d,
    l2_project,
    pp_limiter,
    project_b_divfree_2d,
    ssp_rk3,
    tvb_minmod_limiter,
)

__version__ = "0.1.0"
