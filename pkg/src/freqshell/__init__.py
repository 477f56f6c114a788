"""Dyadic frequency-shell calculus on the torus with inequality diagnostics.

Modules:
  sequences    sparse logarithmic weights, window sets, exhaustive certifiers
  profiles     shell-magnitude profiles, weighted norms, rescaling certificates
  fields       spectral vector fields, masks, norms, convection, snapshots
  sim          pseudo-spectral Navier-Stokes integration
  diagnostics  inequality records and measured constants over snapshot streams
  cli          `freqshell` command-line front end
"""

from .sequences import (
    CertificationReport,
    PairedSumCertification,
    averaged_weight,
    averaged_weight_direct,
    certify_averaged_weight,
    certify_paired_weight_sums,
    certify_window_count,
    first_shell_above,
    paired_sum_constant,
    sparse_log_weight,
    sparse_window_set,
)
from .profiles import (
    MAX_TOWER_LEVEL,
    LevelCheck,
    ProfileFormatError,
    ShellProfile,
    SmallnessCertificate,
    TowerScaling,
    certify_rescaling_smallness,
    certify_uniform_smallness,
    random_profile,
    read_profile,
    smallness_level,
    tail_cutoff,
    tower_shift,
    write_profile,
)
from .fields import (
    BandLimitError,
    BandMask,
    Lattice,
    SnapshotFormatError,
    SpectralField,
    apply_mask,
    convection,
    decompose_shells,
    from_physical,
    grad_norm_l2,
    inner_product,
    leray_project,
    norm_hs,
    norm_l2,
    read_snapshot,
    sup_norms,
    to_physical,
    write_snapshot,
)
from .sim import (
    BlowUpError,
    ConfigError,
    InitialCondition,
    NavierStokesStepper,
    SimConfig,
    SimulationResult,
    StateSnapshot,
    evolution_rhs,
    initial_field,
    random_divergence_free,
    run_simulation,
    step,
    taylor_green,
)
from .diagnostics import (
    ConstantEstimate,
    DiagnosticsResult,
    InequalityRecord,
    run_diagnostics,
    snapshot_records,
)

__version__ = "0.1.0"
