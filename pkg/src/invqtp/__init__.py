"""Minimal cost perturbations making a flow optimal for a quadratic transportation problem."""

from .estimator import InverseCostEstimator
from .fileio import InstanceDocument, InstanceFormatError, canonical_json, parse_instance_text
from .inverse_l1 import (
    InverseSolution,
    SplitVariables,
    build_l1_lp,
    canonicalize,
    closed_form_l1,
    perturbation_norms,
    solve_l1,
)
from .inverse_linf import build_linf_lp, closed_form_linf, solve_linf
from .kkt import (
    CyclicSupportError,
    DualCertificate,
    frank_wolfe_gap,
    frank_wolfe_optimize,
    kkt_check,
    reduced_costs,
    stationarity_residual,
    tree_potentials,
)
from .linprog import LinearProgram, LpSolution, basic_feasible_solutions, enumerate_vertices, solve_lp
from .model import (
    FlowMatrix,
    QuadraticCost,
    SupportPartition,
    TransportationInstance,
    check_flow_feasibility,
    constraint_matrix,
    evaluate_objective,
    flatten,
    generate_instance,
    northwest_corner_flow,
    support_partition,
    unflatten,
    validate_instance,
)
from .oracle import grid_search_inverse_diagonal, transportation_vertices, verify_inverse

__version__ = "0.1.0"

__all__ = [
    "InverseCostEstimator",
    "InstanceDocument",
    "InstanceFormatError",
    "InverseSolution",
    "SplitVariables",
    "DualCertificate",
    "CyclicSupportError",
    "LinearProgram",
    "LpSolution",
    "FlowMatrix",
    "QuadraticCost",
    "SupportPartition",
    "TransportationInstance",
    "build_l1_lp",
    "build_linf_lp",
    "basic_feasible_solutions",
    "canonical_json",
    "canonicalize",
    "check_flow_feasibility",
    "closed_form_l1",
    "closed_form_linf",
    "constraint_matrix",
    "enumerate_vertices",
    "evaluate_objective",
    "flatten",
    "frank_wolfe_gap",
    "frank_wolfe_optimize",
    "generate_instance",
    "grid_search_inverse_diagonal",
    "kkt_check",
    "northwest_corner_flow",
    "parse_instance_text",
    "perturbation_norms",
    "reduced_costs",
    "solve_l1",
    "solve_linf",
    "solve_lp",
    "stationarity_residual",
    "support_partition",
    "transportation_vertices",
    "tree_potentials",
    "unflatten",
    "validate_instance",
    "verify_inverse",
]
