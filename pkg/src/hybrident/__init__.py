"""Simulator for heralded hybrid entanglement between a photon-number qubit and a cat-like mode."""

__version__ = "0.1.0"

from .fock import (
    ModeOperator,
    ModeShape,
    StateVector,
    TruncationError,
    basis,
    fidelity,
    partial_trace,
    partial_transpose,
    state_fidelity,
    tensor,
    trace_norm,
)
from .states import (
    HybridTargetSpec,
    SqueezingSpec,
    best_cat_amplitude,
    cat,
    coherent,
    hybrid_target,
    squeezed_vacuum,
    two_mode_squeezed,
)
from .channels import (
    BeamsplitterSpec,
    HeraldError,
    HeraldModel,
    apply_beamsplitter,
    herald,
    loss_channel,
    photon_subtract,
)
from .protocol import ExperimentConfig, HeraldResult, balance_router, reduced_block, run_protocol, sweep_router
from .analysis import (
    WignerGrid,
    max_target_fidelity,
    negativity,
    qubit_leakage,
    report_metrics,
    wigner,
    wigner_origin,
)
from .tomography import (
    MLEOptions,
    QuadratureRecords,
    TomographySchedule,
    homodyne_pdf,
    mle_reconstruct,
    quad_wavefunctions,
    sample,
)
