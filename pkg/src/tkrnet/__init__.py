"""Time-dependent KRnet density solver for Liouville equations.

Trains a time-dependent invertible flow against the residual of the
Liouville equation of a stochastic dynamical system, with adaptive
collocation resampling and temporal decomposition for long horizons.

Example:
    >>> from tkrnet import load_preset, validate_config
    >>> cfg = load_preset("lorenz96_full")
    >>> cfg.system.dim, cfg.architecture.hidden_width
    (40, 128)
    >>> grid = {"steps": 4, "points": 8}
    >>> validate_config({"system": "duffing", "time_grid": grid}).t_final
    2.0
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("tkrnet")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

from tkrnet._cli import run
from tkrnet._config import (
    EvaluationConfig,
    ExperimentConfig,
    GridExportConfig,
    OutputConfig,
)
from tkrnet._diff import (
    AdjointProgram,
    ParameterStore,
    TangentBundle,
    Var,
    material_derivative,
    nested_gradient,
)
from tkrnet._errors import (
    CheckpointError,
    DomainError,
    EvaluationError,
    FlowError,
    IntegrationError,
    TKRnetError,
    TrainingError,
)
from tkrnet._eval import (
    DensityGrid,
    MetricsTable,
    density_grid_export,
    evaluate,
    kl_bound_diagnostic,
    kl_estimate,
    moment_errors,
    reference_ensemble,
    relative_error,
    trapezoid_mass,
)
from tkrnet._flow import (
    ArchitectureConfig,
    DensityModel,
    PiecewiseModel,
    StackedModel,
    TKRnetModel,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from tkrnet._loss import (
    DensityModelView,
    batch_loss,
    interface_cross_entropy,
    ode_loss,
    residual,
    residual_log,
)
from tkrnet._odeint import (
    CharacteristicEnsemble,
    IntegratorConfig,
    integrate,
    integrate_ensemble,
    integrate_with_logdensity,
)
from tkrnet._systems import (
    GaussianDensity,
    SystemConfig,
    SystemSpec,
    double_gyre,
    duffing,
    get_system,
    kraichnan_orszag,
    lorenz96,
)
from tkrnet._train import (
    SeedStreams,
    TrainConfig,
    TrainingConfig,
    TrainingResult,
    stacked_sample,
    train,
    train_adaptive,
    train_temporal_choice1,
    train_temporal_choice2,
)
from tkrnet._types import LossVariant
from tkrnet._validators import load_config, load_preset, preset_names, validate_config

__all__ = [
    "AdjointProgram",
    "ArchitectureConfig",
    "CharacteristicEnsemble",
    "CheckpointError",
    "DensityGrid",
    "DensityModel",
    "DensityModelView",
    "DomainError",
    "EvaluationConfig",
    "EvaluationError",
    "ExperimentConfig",
    "FlowError",
    "GaussianDensity",
    "GridExportConfig",
    "IntegrationError",
    "IntegratorConfig",
    "LossVariant",
    "MetricsTable",
    "OutputConfig",
    "ParameterStore",
    "PiecewiseModel",
    "SeedStreams",
    "StackedModel",
    "SystemConfig",
    "SystemSpec",
    "TKRnetError",
    "TKRnetModel",
    "TangentBundle",
    "TrainConfig",
    "TrainingConfig",
    "TrainingError",
    "TrainingResult",
    "Var",
    "__version__",
    "batch_loss",
    "build_model",
    "density_grid_export",
    "double_gyre",
    "duffing",
    "evaluate",
    "get_system",
    "integrate",
    "integrate_ensemble",
    "integrate_with_logdensity",
    "interface_cross_entropy",
    "kl_bound_diagnostic",
    "kl_estimate",
    "kraichnan_orszag",
    "load_checkpoint",
    "load_config",
    "load_preset",
    "lorenz96",
    "material_derivative",
    "moment_errors",
    "nested_gradient",
    "ode_loss",
    "preset_names",
    "reference_ensemble",
    "relative_error",
    "residual",
    "residual_log",
    "run",
    "save_checkpoint",
    "stacked_sample",
    "train",
    "train_adaptive",
    "train_temporal_choice1",
    "train_temporal_choice2",
    "trapezoid_mass",
    "validate_config",
]
