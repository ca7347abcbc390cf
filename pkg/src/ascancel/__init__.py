"""Unit-modulus analog spatial cancellation and a near-far link simulator."""

from .channel import (
    DuplicateAngleError,
    RngStream,
    SteeringParams,
    SwiptChannel,
    compose_received,
    from_geometry,
    steering_vector,
)
from .kron import (
    FactorizationPlan,
    PhaseProgram,
    construct_canceller,
    evaluate_program,
    generate_mother_set,
    k_max,
    optimal_factorization,
    select_independent,
)
from .linksim import (
    AdcModel,
    LinkConfig,
    ModulationScheme,
    TrialStats,
    quantize,
    run_analog_chain,
    run_digital_baseline,
    sqnr_estimate_db,
)
from .numeric import kron_left, spectral_metrics
from .single import PhaseMatrix, fourier_canceller, hadamard_canceller

__version__ = "0.1.0"

__all__ = [
    "AdcModel",
    "DuplicateAngleError",
    "FactorizationPlan",
    "LinkConfig",
    "ModulationScheme",
    "PhaseMatrix",
    "PhaseProgram",
    "RngStream",
    "SteeringParams",
    "SwiptChannel",
    "TrialStats",
    "compose_received",
    "construct_canceller",
    "evaluate_program",
    "fourier_canceller",
    "from_geometry",
    "generate_mother_set",
    "hadamard_canceller",
    "k_max",
    "kron_left",
    "optimal_factorization",
    "quantize",
    "run_analog_chain",
    "run_digital_baseline",
    "select_independent",
    "spectral_metrics",
    "sqnr_estimate_db",
    "steering_vector",
]
