"""Scikit-learn style front door for the inverse solvers.

Inverse optimization is parameter estimation: given an observed flow, fit
the nearest cost data under which that flow is optimal.  The estimator
wraps the library pipeline behind the usual ``fit`` / ``get_params``
surface so it composes with tooling that expects that shape.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .inverse_l1 import closed_form_l1, solve_l1
from .inverse_linf import closed_form_linf, solve_linf
from .kkt import tree_potentials
from .model import (
    FlowMatrix,
    QuadraticCost,
    TransportationInstance,
    check_flow_feasibility,
    default_support_tolerance,
    support_partition,
    validate_instance,
)


class InverseCostEstimator(BaseEstimator):
    """Fit perturbed costs (H, d) that make an observed flow optimal.

    Parameters
    ----------
    norm : 'l1' or 'linf'
        Norm in which the perturbation is measured.
    method : 'lp' or 'closed'
        Exact LP solve or the greedy closed-form candidate.
    w1 : 'free', 'tree' or 'zero'
        Treatment of the node potentials: decision variables, tree
        potentials over the support forest, or all zero.
    diagonal : bool
        Restrict matrix perturbations to the diagonal (LP method only).

    Attributes (after fit)
    ----------------------
    matrix_cost_, vector_cost_ : the perturbed quadratic and linear costs
    objective_ : size of the perturbation under the chosen norm
    certificate_ : dual certificate of optimality for the observed flow
    solution_ : the full :class:`~invqtp.inverse_l1.InverseSolution`
    """

    def __init__(self, norm: str = "l1", method: str = "lp", w1: str = "free", diagonal: bool = False):
        self.norm = norm
        self.method = method
        self.w1 = w1
        self.diagonal = diagonal

    def fit(self, instance: TransportationInstance, cost: QuadraticCost, x0) -> "InverseCostEstimator":
        if self.norm not in ("l1", "linf"):
            raise ValueError(f"norm must be 'l1' or 'linf', got {self.norm!r}")
        if self.method not in ("lp", "closed"):
            raise ValueError(f"method must be 'lp' or 'closed', got {self.method!r}")
        if self.w1 not in ("free", "tree", "zero"):
            raise ValueError(f"w1 must be 'free', 'tree' or 'zero', got {self.w1!r}")
        if self.method == "closed" and self.w1 == "free":
            raise ValueError("the closed form needs fixed potentials; use w1='tree' or 'zero'")

        flow = FlowMatrix(np.asarray(x0, dtype=float), default_support_tolerance())
        report = validate_instance(instance)
        if not report.accepted:
            raise ValueError(f"instance rejected: {report.as_dict()}")
        feas = check_flow_feasibility(instance, flow)
        if not feas.feasible:
            raise ValueError(f"observed flow is not feasible: {feas.as_dict()}")
        partition = support_partition(flow)

        if self.w1 == "free":
            potentials = None
        elif self.w1 == "zero":
            potentials = np.zeros(instance.n + instance.m)
        else:
            potentials = tree_potentials(instance, cost, flow, partition)

        if self.method == "lp":
            solver = solve_l1 if self.norm == "l1" else solve_linf
            sol = solver(instance, cost, flow, partition, potentials, diagonal=self.diagonal)
        else:
            closed = closed_form_l1 if self.norm == "l1" else closed_form_linf
            sol = closed(instance, cost, flow, partition, potentials)

        self.matrix_cost_ = sol.matrix_cost
        self.vector_cost_ = sol.vector_cost
        self.objective_ = sol.objective_value
        self.certificate_ = sol.certificate
        self.solution_ = sol
        return self

    def perturbed_cost(self) -> QuadraticCost:
        """The fitted costs as a :class:`~invqtp.model.QuadraticCost`."""
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit before perturbed_cost")
        return QuadraticCost(self.matrix_cost_, self.vector_cost_)
