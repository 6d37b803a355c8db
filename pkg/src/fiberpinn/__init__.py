"""Physics-informed neural surrogates for bit-rate-parameterized fiber channels."""
from .complexity import (
    ComplexityParams,
    comparison_table,
    mac_parameterized,
    mac_pinn_per_rate_family,
    mac_ssfm,
)
from .config import RunConfig
from .errors import (
    CoverageError,
    DegenerateDispersionError,
    DivergenceError,
    FiberPinnError,
    InvalidArchitectureError,
    InvalidCoefficientsError,
    InvalidConfigError,
    InvalidGradientError,
    InvalidGridError,
    InvalidParameterError,
    OutOfRangeError,
)
from .network import (
    AdamState,
    DerivativeBundle,
    NetworkParams,
    adam_step,
    forward,
    init_network,
    input_derivatives,
    load_checkpoint,
    loss_gradient,
    save_checkpoint,
)
from .physical_model import (
    FiberParams,
    Grid,
    GriddedField,
    NlseCoefficients,
    NormalizationMap,
    SignalSpec,
    build_grid,
    coefficients_for_rate,
    compute_coefficients,
    compute_normalization,
    derive_fiber_params,
    nlse_residual,
    ook_initial_condition,
)
from .reduced_basis import (
    FiberProblem,
    FitConfig,
    GreedyConfig,
    NetworkConfig,
    ReducedBasisModel,
    combination_loss,
    combined_field,
    fit_coefficients,
    greedy_train,
    load_model,
    predict,
    save_model,
)
from .ssfm import SsfmConfig, nlse_residual_fd, propagate, reference_solution
from .toy import DispersionToy
from .trainer import TrainConfig, TrainedBasis, evaluate_on_grid, pinn_loss, train_basis

__version__ = "0.1.0"
