"""Robust stability analysis of sparsely interconnected uncertain systems.

Frequency-gridded IQC feasibility LMIs in a lumped form (interconnection
eliminated) and a sparse form (interconnection kept as a constraint),
solved by a barrier method whose slack factorization can exploit the
aggregate sparsity pattern.
"""

from .analysis import FrequencyRecord, StabilityCertificate, analyze, analyze_frequency
from .generate import (
    GenerationExhausted,
    GeneratorConfig,
    Topology,
    generate_instance,
    generate_instances,
    rescale_small_gain,
    sample_scale_free,
    verify_conditions,
)
from .linalg_sparse import (
    CholeskyFactor,
    NotPositiveDefinite,
    SparsityPattern,
    cholesky,
    log_det,
    min_degree_order,
    solve_with_factor,
    symbolic_factor,
)
from .lmi import SdpFeasibilityProblem, lumped_lmi, real_embed, sparse_lmi, to_dual_form
from .lti import (
    FrequencyGrid,
    IllPosedInterconnection,
    StateSpaceSystem,
    freq_response,
    hinf_norm,
    is_hurwitz,
    lumped_response,
    lumped_state_matrix,
)
from .model import (
    InterconnectedSystem,
    InterconnectionMatrix,
    IqcMultiplierSpec,
    Subsystem,
    build_interconnection,
    chain_interconnection,
    diag_multiplier,
    well_posed,
)
from .sdpa import export_sdpa, read_sdpa
from .serialization import load_system, save_system
from .solver import SolverOptions, SolverPath, SolveResult, SolveStatus, solve_margin

__version__ = "0.1.0"
