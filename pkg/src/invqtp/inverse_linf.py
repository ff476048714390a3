"""Inverse problem under the max norm.

The stationarity rows match the L1 formulation; only the objective changes.
The matrix max-norm (largest absolute row sum) is bounded by the same
epigraph rows as the column-sum norm because the split matrices are
symmetric, and the vector max-norm gets one extra bound row per cell.

The closed-form candidate is computed by the identical greedy procedure as
the L1 one, including its tie-breaking, so the two candidates agree
entrywise by construction; only the reported norms differ.
"""

from __future__ import annotations

import numpy as np

from .inverse_l1 import (
    InverseSolution,
    _assemble_inverse_lp,
    _closed_form_solution,
    _solve_inverse,
)
from .linprog import LinearProgram
from .model import (
    FlowMatrix,
    QuadraticCost,
    SupportPartition,
    TransportationInstance,
    support_partition,
)


def build_linf_lp(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
    potentials: np.ndarray | None = None,
    diagonal: bool = False,
) -> LinearProgram:
    """LP whose optimum is the max-norm-minimal perturbation for the flow."""
    if partition is None:
        partition = support_partition(flow)
    return _assemble_inverse_lp(inst, cost, flow, partition, potentials, diagonal, "linf")


def solve_linf(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
    potentials: np.ndarray | None = None,
    diagonal: bool = False,
) -> InverseSolution:
    """Exact max-norm-minimal perturbation via the LP route."""
    return _solve_inverse(inst, cost, flow, partition, potentials, diagonal, "linf")


def closed_form_linf(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
    potentials: np.ndarray | None = None,
) -> InverseSolution:
    """Closed-form candidate under the max norm at fixed potentials.

    Produces exactly the costs of :func:`invqtp.inverse_l1.closed_form_l1`;
    the greedy repair is shared so the candidates cannot drift apart.
    """
    return _closed_form_solution(inst, cost, flow, partition, potentials, "linf")
