"""Simulation and security-analysis toolkit for a mediated semi-quantum
key distribution protocol.

The package splits into small layers: `qmath` holds the state and
entropy primitives, `channels` the depolarizing noise model, `protocol`
the round-by-round simulation, `stats` the observed-statistics tables,
`keyrate` the entropic key-rate bound, and `reduction` the
entanglement-based equivalence check. A compiled kernel accelerates the
round loop when available; `engine.backend_name()` reports which
implementation is active.
"""

from .channels import DepolarizingChannel, sample_pauli, twirl_weights
from .engine import backend_name
from .keyrate import (
    ConstraintSet,
    InfeasibleStats,
    KeyRateReport,
    MissingStatsError,
    conditional_entropy_ab,
    entropy_bound,
    key_rate,
    minimize_entropy,
    rate_best,
    symmetric_zero_crossing,
)
from .protocol import (
    AttackModel,
    Choice,
    Mode,
    ModePolicy,
    ProtocolConfig,
    RoundRecord,
    extract_raw_key,
    read_transcript,
    run_round,
    sampling_stage,
    simulate,
    write_transcript,
)
from .qmath import (
    DensityMatrix,
    StateVector,
    bell_projectors,
    bell_state,
    binary_entropy,
    measure_projective,
    partial_trace,
    tensor,
    von_neumann_entropy,
)
from .reduction import (
    BasisChoice,
    EquivalenceResult,
    NRoundAttack,
    build_pm_state,
    run_entanglement,
    verify_equivalence,
)
from .stats import (
    ObservedStats,
    depolarization_tables,
    merge,
    predict_depolarization,
    predict_from_attack,
    tally,
)

__version__ = "0.1.0"

__all__ = [
    "AttackModel",
    "BasisChoice",
    "Choice",
    "ConstraintSet",
    "DensityMatrix",
    "DepolarizingChannel",
    "EquivalenceResult",
    "InfeasibleStats",
    "KeyRateReport",
    "MissingStatsError",
    "Mode",
    "ModePolicy",
    "NRoundAttack",
    "ObservedStats",
    "ProtocolConfig",
    "RoundRecord",
    "StateVector",
    "backend_name",
    "bell_projectors",
    "bell_state",
    "binary_entropy",
    "build_pm_state",
    "conditional_entropy_ab",
    "depolarization_tables",
    "entropy_bound",
    "extract_raw_key",
    "key_rate",
    "measure_projective",
    "merge",
    "minimize_entropy",
    "partial_trace",
    "predict_depolarization",
    "predict_from_attack",
    "rate_best",
    "read_transcript",
    "run_entanglement",
    "run_round",
    "sampling_stage",
    "simulate",
    "symmetric_zero_crossing",
    "tally",
    "tensor",
    "twirl_weights",
    "verify_equivalence",
    "von_neumann_entropy",
    "write_transcript",
]
