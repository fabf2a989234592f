"""Kinetic wealth exchange models: simulation and distribution fitting."""

__version__ = "0.1.0"

from .kernels import (
    DomainError,
    ExchangeOutcome,
    LambdaLaw,
    ModelSpec,
    Variant,
    exchange_bidirectional,
    exchange_distributed_saving,
    exchange_no_saving,
    exchange_uniform_saving,
)
from .engine import (
    AgentPopulation,
    EquilibrationPolicy,
    RandomStream,
    SimulationConfig,
    ensemble_run,
    run_realization,
)

__all__ = [
    "AgentPopulation",
    "DomainError",
    "EquilibrationPolicy",
    "ExchangeOutcome",
    "LambdaLaw",
    "ModelSpec",
    "RandomStream",
    "SimulationConfig",
    "Variant",
    "ensemble_run",
    "exchange_bidirectional",
    "exchange_distributed_saving",
    "exchange_no_saving",
    "exchange_uniform_saving",
    "run_realization",
]
