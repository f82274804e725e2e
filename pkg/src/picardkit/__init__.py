'''Maximum-likelihood ICA with relative quasi-Newton updates.

The public surface is re-exported here; submodules stay importable on their
own for users who only need one piece (say, the whitening kernel or the
trace diagnostics).
'''

from .errors import (
    PicardkitError,
    DimensionError,
    ContractError,
    NotSpdError,
    SingularityError,
    DegenerateDataError,
    LineSearchFailure,
    NumericalFailure,
    UndefinedRateError,
    FormatError,
)
from .linalg import (
    matrix_exp,
    sym_eig,
    solve_spd,
    whiten,
    pca_reduce,
    WhiteningResult,
    sup_norm,
    frobenius_inner,
)
from .likelihood import (
    ScoreModel,
    get_score,
    loss,
    loss_given_sources,
    relative_gradient,
    gradient_and_coeffs,
    full_hessian,
    approx_hessian,
    solve_regularized,
    HessianTensor,
    ApproxHessianCoeffs,
)
from .lbfgs import MemoryPair, LbfgsMemory, update_memory, two_loop_direction
from .solver import (
    SolverConfig,
    IterationRecord,
    FitResult,
    project_antisym,
    line_search,
    fit,
    amari_distance,
)
from .diagnostics import (
    SpectrumReport,
    materialize_full_hessian,
    materialize_simple_hessian,
    materialize_preconditioner_inverse,
    preconditioned_spectrum,
    constrained_spectrum,
    measure_rate,
)
from .data import (
    Dataset,
    SourceSpec,
    generate_synthetic,
    generate_dependent,
    dependent_latents,
    extract_patches,
    dead_leaves_image,
    load_pgm,
    save_pgm,
    load_matrix,
    save_matrix,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
