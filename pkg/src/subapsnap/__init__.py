"""Snapshot + row-subsampling solver for parameter-dependent linear systems.

Offline: solve A(p_i) x = b(p_i) at a few snapshot points, orthonormalize,
pick a good row subset. Online: each new parameter touches only the selected
rows of A(p) and costs O(s r^2) regardless of n.
"""

from .bounds import (BoundReport, LipschitzEstimate, actual_ratio,
                     bound_report, corollary_bounds, estimate_lipschitz,
                     lemma_bounds, theorem_bound)
from .cli import (ExperimentConfig, emit_plots, load_config, run_experiment,
                  run_krr_experiment, run_offline, run_online)
from .errors import (ConfigError, NumericalError, RankDeficiencyError,
                     SubapsnapError)
from .krr import KrrGridResult, run_krr_grid
from .linalg import (PolarFactors, cpqr_row_pivots, lupp_row_pivots,
                     polar_unitary, solve_ls, thin_qr, thin_svd)
from .online import (OnlinePlan, OnlineSolution, estimate_residual,
                     precompute_online, solve_apsnap, solve_batch,
                     solve_online)
from .snapshot import (SnapshotBasis, build_snapshot, default_snapshot_points,
                       load_snapshot, save_snapshot)
from .subsample import (RowSelector, SelectorConfig, choose_anchor,
                        leverage_scores, load_selector, merge_selectors,
                        save_selector, select_rows)
from .systems import (AffineTerm, Axis, Domain, ParametricSystem, ProblemSpec,
                      assemble_rhs, assemble_rows, build_problem, full_solve,
                      interval, read_matrix_market)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
