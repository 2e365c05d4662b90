"""Symplectic local discontinuous Galerkin solver for the 1-D stochastic
linear Schrodinger equation with multiplicative noise, plus spectral
reference solvers and a Monte-Carlo convergence laboratory."""

from .errors import (
    ConfigError,
    DomainError,
    MeshMismatchError,
    ParameterError,
    SizeGuardError,
    SldgError,
    SolverError,
)
from .mesh import (
    DGField,
    Mesh,
    Quadrature,
    TraceValue,
    build_mesh,
    eval_field,
    l2_error,
    l2_inner,
    l2_norm,
    mesh_from_nodes,
    project_l2,
    project_minus,
    trace_values,
)
from .noise import (
    IncrementField,
    NoisePath,
    NoiseSpec,
    coarsen_path,
    dump_path,
    eval_increment,
    kappa,
    load_path,
    sample_path,
    truncate,
    truncation_tail_moment,
)
from .ldg import (
    LdgSolver,
    SchemeConfig,
    StepSystem,
    Trajectory,
    assemble_step,
    discrete_charge,
    run,
    step,
    step_operator,
)
from .spectral import (
    SpectralSolver,
    SpectralState,
    commuting_exact,
    l2_error_to_reference,
    restrict_to_dg,
    spectral_charge,
    spectral_h1_norm,
    spectral_l2_norm,
    spectral_step,
    state_from_callable,
)
from .lab import (
    ErrorReport,
    LabConfig,
    StudyRow,
    cost_rate_study,
    cost_resolution,
    fit_order,
    holder_continuity_study,
    moment_bound_check,
    ms_error,
    regularity_checks,
    spatial_order_study,
    temporal_order_study,
)

__version__ = "0.1.0"
