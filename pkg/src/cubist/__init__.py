"""cubist: truncated-Fock simulation and ancilla optimization for a
measurement-induced cubic phase gate.

Subpackages by concern: :mod:`cubist.fock` (states, quadratures, homodyne
projection and sampling), :mod:`cubist.gaussian` (Gaussian unitaries and
symplectic maps), :mod:`cubist.phasespace` (Wigner functions, the Airy-form
ideal cubic state, measurement projectors), :mod:`cubist.ancilla` (the
minimum-eigenvalue ancilla optimizer), :mod:`cubist.gate` (end-to-end
conditional gate simulation) and :mod:`cubist.cli` (command line).
"""

__version__ = "0.1.0"

from .ancilla import (
    AncillaOptimum,
    OptimizerConfig,
    SearchMap,
    min_eigpair,
    nlq_moments,
    nlq_operator,
    optimize_ancilla,
    search_map,
    variance_ratio_table,
    y_shifted_squared,
)
from .errors import (
    ConvergenceError,
    CoverageError,
    CubistError,
    DimensionError,
    OverflowGuardError,
    PreconditionError,
    SingularPhaseError,
    TruncationError,
    TruncationRiskWarning,
)
from .fock import (
    GridSpec,
    OperatorMatrix,
    StateVector,
    fock_state,
    hermite_wavefunction,
    homodyne_pdf,
    ladder_ops,
    project_quadrature,
    quadrature_ops,
    sample_homodyne,
    sample_homodyne_batch,
    tensor,
    vacuum,
)
from .gate import (
    AncillaSpec,
    GateConfig,
    GateRunSummary,
    GateShotRecord,
    NoiseBudget,
    adaptive_theta,
    feedforward_displacement,
    ideal_cubic_output,
    matched_unbalanced_config,
    noise_budget,
    run_gate_batch,
    run_gate_shot,
    squeezed_vacuum_state,
    verify_heisenberg_identity,
)
from .gaussian import (
    SymplecticMap,
    beam_splitter_op,
    displacement_op,
    phase_shift_op,
    squeeze_op,
    symplectic_of_circuit,
)
from .phasespace import (
    ProjectorParams,
    WignerGrid,
    airy,
    generalized_projector_wigner,
    ideal_cubic_wigner,
    projector_wigner,
    pure_projection_state,
    sign_changes_along_p,
    wigner_of_state,
)

__all__ = [name for name in dir() if not name.startswith("_")]
