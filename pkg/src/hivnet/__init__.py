"""Agent-based simulation of HIV spread over an evolving sexual contact network.

Typical use::

    from hivnet import ModelParams, run_ensemble
    result = run_ensemble(ModelParams(), n_runs=4)
    result.series("incidence")
"""

from .engine import EnsembleResult, new_state, run, run_ensemble, run_single
from .network import ContactNetwork, NetworkParams, build_network
from .params import ModelParams, RunParams
from .population import CareCascadeParams, Stage
from .stats import YearStats, chi_square_compare
from .transmission import RiskFactorTable, TransmissionParams

__version__ = "0.1.0"

__all__ = [
    "CareCascadeParams",
    "ContactNetwork",
    "EnsembleResult",
    "ModelParams",
    "NetworkParams",
    "RiskFactorTable",
    "RunParams",
    "Stage",
    "TransmissionParams",
    "YearStats",
    "build_network",
    "chi_square_compare",
    "new_state",
    "run",
    "run_ensemble",
    "run_single",
]
