"""Physics-constrained neural networks for one-dimensional consolidation.

Thin Python surface over the C++ core: the Terzaghi series solution, dataset
builders, the tape-based differentiator driving forward/inverse training, and
the Crank-Nicolson reference solver.
"""

from ._core import (  # noqa: F401
    BottomBoundary,
    Bounds,
    CollocationPoint,
    Dataset,
    Drainage,
    EpochRecord,
    Evaluation,
    FDGrid,
    FDSolution,
    Grid,
    GridSolution,
    LabeledPoint,
    LoadingParams,
    NetworkParams,
    ProblemSpec,
    RefineResult,
    TrainConfig,
    TrainMode,
    TrainReport,
    TrainResult,
    build_forward_dataset,
    build_inverse_dataset,
    cv_from_weight,
    evaluate,
    fd_solve,
    forward,
    init_network,
    initial_pressure,
    l2_relative_error,
    lhs_collocation,
    load_model,
    pressure_ratio,
    pressure_ratio_at_depth,
    pressure_ratio_partial_sum,
    read_grid_csv,
    refine_until,
    residual,
    save_model,
    series_coord,
    solve_analytic,
    train_forward,
    train_inverse,
    write_grid_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
