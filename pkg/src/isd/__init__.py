"""Invariant subspace decomposition for time-varying linear models.

Splits the coefficient space of a time-varying linear model into an
invariant subspace (where the explained-variance maximizer is constant over
time) and a residual subspace (where it drifts), estimates both components,
and ships the simulators, baselines and benchmark harness used to validate
the estimators.
"""

__version__ = "0.1.0"

from .ajd import Diagonalizer, offdiag_cost, uwedge
from .dataset import TimeSeries, WindowPlan, load_csv, make_windows, write_csv
from .decomposition import (
    InvarianceScores,
    SubspaceSplit,
    cross_validate_lambda,
    invariance_scores,
    split_subspaces,
)
from .estimators import (
    AdaptationFit,
    IsdModel,
    fit_adaptation,
    fit_invariant,
    magging,
    pooled_ols,
    population_isd,
    predict,
    rolling_ols,
)
from .exceptions import DataError, IsdError, NumericalError
from .jbd import (
    BlockDecomposition,
    ResidualProfile,
    blocks_at_threshold,
    is_decorrelating,
    residual_profile,
    select_blocks,
)
from .linalg import SymEig, pinv_projected, qr_orthonormalize, solve_spd, sym_eig
from .metrics import (
    EvalReport,
    cumulative_xv,
    mspe,
    mspe_mc,
    population_delta_var,
    r_squared,
)
from .moments import (
    PooledMoments,
    WindowMoments,
    pooled_moments,
    weighted_gamma,
    window_moments,
)
from .simulate import (
    GroundTruth,
    gen_example2d,
    gen_main,
    gen_quick_varying,
    oracle_split,
    random_orthogonal,
    random_spd_block,
)

__all__ = [
    "AdaptationFit",
    "BlockDecomposition",
    "DataError",
    "Diagonalizer",
    "EvalReport",
    "GroundTruth",
    "InvarianceScores",
    "IsdError",
    "IsdModel",
    "NumericalError",
    "PooledMoments",
    "ResidualProfile",
    "SubspaceSplit",
    "SymEig",
    "TimeSeries",
    "WindowMoments",
    "WindowPlan",
    "blocks_at_threshold",
    "cross_validate_lambda",
    "cumulative_xv",
    "fit_adaptation",
    "fit_invariant",
    "gen_example2d",
    "gen_main",
    "gen_quick_varying",
    "invariance_scores",
    "is_decorrelating",
    "load_csv",
    "magging",
    "make_windows",
    "mspe",
    "mspe_mc",
    "offdiag_cost",
    "oracle_split",
    "pinv_projected",
    "pooled_moments",
    "pooled_ols",
    "population_delta_var",
    "population_isd",
    "predict",
    "qr_orthonormalize",
    "r_squared",
    "random_orthogonal",
    "random_spd_block",
    "residual_profile",
    "rolling_ols",
    "select_blocks",
    "solve_spd",
    "split_subspaces",
    "sym_eig",
    "uwedge",
    "weighted_gamma",
    "window_moments",
    "write_csv",
]
