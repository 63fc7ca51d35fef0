"""qmeas: ideal quantum measurement as a dynamical process, end to end.

Dense density-operator algebra (qstate), the Curie-Weiss measurement model
with closed-form truncation dynamics (curie_weiss), thermodynamic
registration and pointer states (equilibrium), run statistics with Born
frequencies and branch reductions (runs), decomposition-ambiguity geometry
(ambiguity), CHSH and joint-distribution feasibility (contextuality), and a
dense brute-force oracle cross-checking the analytic layer (oracle).
"""

__version__ = "1.0.0"

from .errors import (
    ConvergenceError,
    GuardError,
    InfeasibleError,
    QmeasError,
    ValidationError,
)
from .qstate import (
    DensityOperator,
    Observable,
    bloch_state,
    bloch_vector,
    maximally_mixed,
    merge,
    partial_trace,
    pure_state,
    qexpect,
    tensor,
    trace_distance,
    vn_entropy,
)

__all__ = [
    "__version__",
    "ConvergenceError",
    "GuardError",
    "InfeasibleError",
    "QmeasError",
    "ValidationError",
    "DensityOperator",
    "Observable",
    "bloch_state",
    "bloch_vector",
    "maximally_mixed",
    "merge",
    "partial_trace",
    "pure_state",
    "qexpect",
    "tensor",
    "trace_distance",
    "vn_entropy",
]
