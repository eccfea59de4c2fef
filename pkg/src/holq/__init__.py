"""HOLQ-family tensor decompositions and separable covariance inference."""

__version__ = "0.1.0"

from .engine import (  # noqa: E402
    Diagnostics,
    HolqDecomposition,
    HolqError,
    HorqDecomposition,
    ModeConstraint,
    NonExistenceError,
    SolverOptions,
    apply_inverse,
    check_core,
    criterion,
    holq,
    holq_junior,
    horq,
    parse_constraints,
)
from .ihop import IhopDecomposition, ihop, ihop_plain  # noqa: E402
from .inference import (  # noqa: E402
    HypothesisSpec,
    LrtResult,
    MleResult,
    is_nested,
    lrt_null_sample,
    lrt_statistic,
    lrt_test,
    mle,
    sample_multilinear_normal,
)
from .linalg import (  # noqa: E402
    NormalizedLq,
    NormalizedPolar,
    NotPositiveDefiniteError,
    RankDeficiencyError,
    cholesky,
    diag_minimizer,
    lq,
    normalized_lq,
    normalized_polar,
    polar,
    rq,
    svd,
    unit_diag_minimizer,
)
from .spectral import (  # noqa: E402
    IsvdDecomposition,
    TruncatedIsvd,
    hooi,
    hosvd_truncate,
    isvd,
    truncated_isvd,
)
from .tensor import (  # noqa: E402
    TensorFormatError,
    fold,
    kron,
    kron_all,
    merge_modes,
    mode_mult,
    read_tensor,
    split_mode,
    tucker_mult,
    unfold,
    unvec,
    vec,
    write_tensor,
)
