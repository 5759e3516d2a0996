"""Hawkes-driven limit order book: micro simulation, diffusive scaling and reflected SDE."""
from ._rng import DEFAULT_SEED, stream
from .coefficients import EffectiveCoefficients, PiecewiseLinear
from .covariance import (
    CovarianceBundle,
    EventTaxonomy,
    build_incidence,
    covariance_bundle,
    empirical_fclt,
    factor_psd,
    lob_event_spec,
    sigma_N,
    sigma_X,
)
from .errors import (
    HawkesLOBError,
    NotPSDError,
    NumericalError,
    PreconditionError,
    StabilityError,
    ValidationError,
)
from .hawkes import (
    EventLog,
    HawkesSpec,
    IntensityState,
    branching_matrix,
    compensator_increments,
    intensity_at,
    simulate_counts,
    simulate_hawkes,
    spectral_radius,
    stationary_intensity,
)
from .meso import (
    HeatRelaxation,
    MesoConfig,
    MesoEnsemble,
    MesoState,
    dirichlet_modes,
    drift,
    heat_relaxation,
    laplacian,
    simulate_meso,
    step_reflected_euler,
)
from .micro import (
    AffineBaseline,
    BookState,
    MicroConfig,
    MicroEvent,
    MicroPath,
    MigrationSpec,
    QueueExcitation,
    QueuePath,
    apply_event,
    micro_rates,
    simulate_micro,
    terminal_book,
)
from .scaling import (
    GeneratorReport,
    MomentReport,
    TestFunction,
    check_neumann,
    finite_diffs,
    generator_convergence_report,
    generator_jump,
    generator_limit,
    generator_micro,
    micro_meso_moment_comparison,
    rescale_path,
    snap_to_lattice,
)

__version__ = "0.1.0"
