"""Learn local Lindbladians from steady-state expectation values."""

__version__ = "0.1.0"

from .constraints import (
    ConstraintMatrix,
    ConstraintSet,
    KTemplate,
    MeasurementRecord,
    build_K,
    build_known_dissipation_system,
    build_prior_system,
    constraint_set,
)
from .dynamics import Trajectory, evolve, mean_local_trace_distance
from .model import (
    LindbladModel,
    OperatorBasis,
    apply,
    classical_ising_loss_model,
    loss_dephasing_model,
    pack,
    random_nn_jump_model,
    random_nn_model,
    superoperator,
    unpack,
)
from .pauli import DensityMatrix, LocalOperator, PauliString, commutator, expectation, multiply, partial_trace
from .recovery import RecoveryResult, error_estimate, reconstruction_error, recover, recover_with_prior
from .steady_state import DegenerateSteadyState, NoConvergence, SteadyStateResult, find_steady_state
from .stitching import PatchLayout, PatchRecovery, partition, patch_constraints, stitch, synthetic_stitch_trial
