"""Spectral stability analysis and fixed-order stabilization of DDAEs."""

from .asymptotic import (
    StrongStabilityReport,
    ThetaGrid,
    f_eval,
    gamma0,
    robust_difference_abscissa,
    robust_spectral_abscissa,
    strong_stability,
)
from .model import (
    AffineFamily,
    AssumptionViolation,
    ControllerEmbedding,
    ControllerIo,
    DdaeSystem,
    Decomposition,
    PlantIo,
    controller_from_gains,
    create_controller,
    create_plant,
    decompose,
    interconnect,
    make_controller_family,
    neutral_to_ddae,
    plant_dynamics,
    static_controller,
)
from .optimize import (
    InfeasibleProblem,
    SolveOptions,
    SynthesisResult,
    feasibility_phase,
    nonsmooth_minimize,
    stabilization_barrier,
    stabilization_max,
)
from .sensitivity import (
    CD_gradient,
    DerivativeBreakdown,
    GradientSample,
    abscissa_gradient,
    gamma0_gradient,
    root_derivative,
)
from .spectrum import (
    RootOptions,
    RootSet,
    char_matrix,
    char_matrix_derivative,
    compute_roots,
    discretize,
    newton_correct,
    spectral_abscissa,
)
from .sysfile import SystemFileError, load_system, write_document

__version__ = "0.1.0"
