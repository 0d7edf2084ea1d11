"""eurot: solvers for quadratically (squared-l2) regularised optimal transport.

The package provides

  * exact threshold coordinate updates and the Sinkhorn-type loop built on
    them (:mod:`eurot.sinkhorn`),
  * adaptive accelerated gradient ascent on the dual (:mod:`eurot.apdagd`),
  * accelerated alternating maximisation with exact block solves
    (:mod:`eurot.aam`),
  * randomised coordinate dual averaging with lazy updates
    (:mod:`eurot.clvr`),
  * the accuracy pipeline gamma -> solve -> project onto exact marginals
    (:mod:`eurot.pipeline`),
  * independent reference solvers for testing (:mod:`eurot.oracles`), and
  * a benchmark harness with IDX image ingestion, grid costs, an entropy
    kernel baseline and CSV/JSON logging (:mod:`eurot.bench`).
"""

from .aam import BlockStep, choose_block, run_aam
from .apdagd import LineSearchError, LineSearchStep, run_apdagd, solve_step_coefficient
from .clvr import clvr_step_size, run_clvr
from .core import (
    CostMatrix,
    DualPoint,
    Measure,
    Problem,
    Residuals,
    SolveResult,
    TraceRecord,
    TransportPlan,
    dual_gradient,
    dual_objective,
    lemma1_radius,
    marginal_residuals,
    operator_norm,
    primal_objective,
    recover_plan,
    round_to_polytope,
    sparsity_fraction,
)
from .pipeline import METHODS, PipelineConfig, PipelineResult, approx_ot
from .sinkhorn import (
    ThresholdResult,
    run_euclidean_sinkhorn,
    threshold_solve,
    update_lambda,
    update_mu,
)

__version__ = "0.1.0"

__all__ = [
    "BlockStep",
    "CostMatrix",
    "DualPoint",
    "LineSearchError",
    "LineSearchStep",
    "METHODS",
    "Measure",
    "PipelineConfig",
    "PipelineResult",
    "Problem",
    "Residuals",
    "SolveResult",
    "ThresholdResult",
    "TraceRecord",
    "TransportPlan",
    "approx_ot",
    "choose_block",
    "clvr_step_size",
    "dual_gradient",
    "dual_objective",
    "lemma1_radius",
    "marginal_residuals",
    "operator_norm",
    "primal_objective",
    "recover_plan",
    "round_to_polytope",
    "run_aam",
    "run_apdagd",
    "run_clvr",
    "run_euclidean_sinkhorn",
    "solve_step_coefficient",
    "sparsity_fraction",
    "threshold_solve",
    "update_lambda",
    "update_mu",
]
