"""stadiumlab: spectral laboratory for partially rectangular billiards."""

from ._backend import active_backend, get_kernels
from .geometry import (
    BETA,
    DIRICHLET,
    FLOW_SCALE,
    NEUMANN,
    PROFILE_RADIUS,
    WING_SPEED,
    Arc,
    BoundaryCondition,
    BoundaryTrace,
    DomainSpec,
    Segment,
    boundary_trace,
    flow_map,
    flow_map_inverse,
    inside_points,
    make_partially_rectangular,
    make_rectangle,
    make_stadium,
    normal_velocity,
    normal_velocity_at,
    robin,
    stadium_area,
    stadium_perimeter,
    stretch_profile,
    stretch_support_radius,
)
from .discretize import (
    DiscreteOperator,
    Grid,
    assemble_laplacian,
    boundary_normal_derivative,
    build_grid,
    stretch_form_matrix,
    stretch_quadratic_form,
    xgrad_quadratic,
)
from .spectral import (
    EigenPair,
    LowSpectrum,
    SpectralWindow,
    WeylFit,
    count_below,
    counting_function,
    eigs_lowest,
    eigs_window,
    weyl_fit,
)
from .quasimode import (
    EnvelopeProfile,
    OverlapResult,
    Quasimode,
    best_overlap,
    discrete_residual,
    make_envelope,
    make_quasimode,
    projection_mass,
    residual_bound,
    vertical_factor,
)
from .variation import (
    Branch,
    DecayLawResult,
    boundary_rate_trace,
    decay_law_check,
    finite_difference_check,
    flow_profile,
    hadamard_rate_boundary,
    hadamard_rate_interior,
    interior_rate_bound,
    track_branches,
)
from .scan import (
    BumpCutoff,
    Cutoff,
    PlateauCutoff,
    ScarReport,
    WindowCount,
    bouncing_ball_mass_momentum,
    bouncing_ball_mass_position,
    default_position_cutoffs,
    equidistributed_baseline,
    find_loitering,
    scar_report,
    window_count_scan,
)
from . import errors

__version__ = "0.1.0"
