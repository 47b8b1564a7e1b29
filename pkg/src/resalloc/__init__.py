"""Optimal allocation of a data-acquisition budget across statistical sources.

Sub-modules
-----------
tradeoffs      resource -> precision/loss curves
aggregation    optimal convex weighting of unbiased estimates
solver_core    simplex/box constraints, projected gradient, closed forms
assignment     bijective matching of fixed resource amounts to sources
support_alloc  sources observing different coordinate subsets
linear_design  weighted least squares and design criteria
halfspace      polling allocation for halfspace (election) decisions
harness        Monte Carlo validation of predicted losses and bounds
scenario, cli  JSON scenario files and the ``resalloc`` command
"""

__version__ = "0.1.0"

from .aggregation import AggregationWeights, aggregate_estimates, optimal_weights_single, optimal_weights_supported
from .assignment import AssignmentProblem, AssignmentResult, solve_assignment, solve_rank_one_sorted
from .errors import (
    DerivativeSingularityError,
    DomainError,
    InfeasibleConstraintError,
    NoInformationError,
    RankDeficiencyError,
    ResallocError,
    ShapeMismatchError,
    UnobservableCoordinateError,
)
from .halfspace import ElectionProblem, BoundReport, solve_direct, solve_indirect, regime_study
from .harness import GaussianSources, SimulationReport, SimulationSpec, simulate_decision, simulate_mse, simulate_tail
from .linear_design import DesignProblem, design_gradient, design_objective, mvue_estimate, solve_design
from .solver_core import SimplexConstraint, SolverReport, minimize_projected, project_simplex, solve_simplex
from .sources import SourceModel, reciprocal_sets
from .support_alloc import SupportProblem, solve_support, support_gradient, support_objective
from .tradeoffs import (
    TradeoffFunction,
    custom_convex_loss,
    exp_margin_loss,
    linear_precision,
    log_channel_precision,
    power_precision,
)

__all__ = [name for name in dir() if not name.startswith("_")]
