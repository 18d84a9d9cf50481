"""Error and disturbance of finite-dimensional quantum measurements.

Error and disturbance are quadratic forms of inverse Fisher information on
Bloch coordinates; INFINITE values are represented by ``math.inf``.
"""

from .errdist import (
    TradeoffReport,
    attainable_bound,
    disturbance,
    heisenberg_bound,
    invariant_subspaces,
    measurement_error,
    tradeoff_report,
)
from .fisher import INFINITE, classical_fisher, quadform_pinv, rld_fisher, sld_fisher
from .optmeas import attainability_sweep, build_optimal_scheme, optimal_retrieval, random_vindication_sweep
from .quantum_core import DensityMatrix, KrausMeasurement, Observable, Povm, povm_from_kraus, projective_measurement
from .su_basis import build_su_basis, decompose_hermitian, reconstruct

__version__ = "0.1.0"

__all__ = [
    "INFINITE",
    "DensityMatrix",
    "KrausMeasurement",
    "Observable",
    "Povm",
    "TradeoffReport",
    "attainability_sweep",
    "attainable_bound",
    "build_optimal_scheme",
    "build_su_basis",
    "classical_fisher",
    "decompose_hermitian",
    "disturbance",
    "heisenberg_bound",
    "invariant_subspaces",
    "measurement_error",
    "optimal_retrieval",
    "povm_from_kraus",
    "projective_measurement",
    "quadform_pinv",
    "random_vindication_sweep",
    "reconstruct",
    "rld_fisher",
    "sld_fisher",
    "tradeoff_report",
]
