"""Brute-force verifiers, kept independent of the solver pipeline.

``transportation_vertices`` enumerates basic feasible flows directly from
spanning trees of the origin/destination graph, without touching the LP
machinery, so it can sit on the other side of a cross-check from
``solve_lp``/``enumerate_vertices``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .inverse_l1 import InverseSolution, perturbation_norms
from .kkt import kkt_check
from .model import (
    FlowMatrix,
    QuadraticCost,
    TransportationInstance,
    evaluate_objective,
    unflatten,
)

VERTEX_GUARD_CELLS = 12
GRID_GUARD_CELLS = 4


class OracleGuardError(ValueError):
    """Instance exceeds the size guard of a brute-force oracle."""


def _tree_flow(inst: TransportationInstance, edges: tuple[int, ...]) -> np.ndarray | None:
    """Basic solution for a spanning-tree edge set, by repeated leaf stripping.

    Returns None when the edge set contains a cycle (not a tree) or the basic
    solution has a clearly negative entry.
    """
    n, m = inst.n, inst.m
    nodes = n + m
    incident: list[list[int]] = [[] for _ in range(nodes)]
    for p in edges:
        i, j = unflatten(p, m)
        incident[i - 1].append(p)
        incident[n + j - 1].append(p)

    degree = [len(e) for e in incident]
    rem = np.concatenate([inst.supplies.astype(float), inst.demands.astype(float)])
    alive = [True] * len(edges)
    edge_pos = {p: k for k, p in enumerate(edges)}
    x = np.zeros(inst.cells)
    for _ in range(len(edges)):
        leaf = -1
        for node in range(nodes):
            if degree[node] == 1:
                leaf = node
                break
        if leaf < 0:
            return None  # remaining edges all lie on cycles
        p = next(q for q in incident[leaf] if alive[edge_pos[q]])
        i, j = unflatten(p, m)
        amount = rem[leaf]
        x[p] = amount
        other = n + j - 1 if leaf == i - 1 else i - 1
        rem[other] -= amount
        rem[leaf] = 0.0
        alive[edge_pos[p]] = False
        for node in (i - 1, n + j - 1):
            degree[node] -= 1
            incident[node] = [q for q in incident[node] if alive[edge_pos[q]]]
    if np.min(x) < -1e-9:
        return None
    return np.where(np.abs(x) <= 1e-12, 0.0, x)


def transportation_vertices(inst: TransportationInstance) -> list[np.ndarray]:
    """All vertices of the transportation polytope, deduplicated within 1e-9.

    Bases correspond to spanning trees of the origin/destination graph
    (n + m - 1 cells); infeasible bases are dropped.  Guarded to 12 cells.
    """
    if inst.cells > VERTEX_GUARD_CELLS:
        raise OracleGuardError(f"{inst.cells} cells exceed the guard of {VERTEX_GUARD_CELLS}")
    size = inst.n + inst.m - 1
    found: list[np.ndarray] = []
    for edges in itertools.combinations(range(inst.cells), size):
        x = _tree_flow(inst, edges)
        if x is None:
            continue
        if any(np.max(np.abs(x - y)) <= 1e-9 for y in found):
            continue
        found.append(x)
    return found


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the independent optimality audit of an inverse solution."""

    passed: bool
    first_order_gap: float
    psd: bool
    first_order_only: bool
    sample_margin: float
    recomputed_objective: float
    objective_abs_error: float

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "first_order_gap": self.first_order_gap,
            "psd": self.psd,
            "first_order_only": self.first_order_only,
            "sample_margin": self.sample_margin,
            "recomputed_objective": self.recomputed_objective,
            "objective_abs_error": self.objective_abs_error,
        }


def verify_inverse(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    sol: InverseSolution,
    gap_tol: float = 1e-7,
    samples: int = 21,
) -> VerificationReport:
    """Audit that the flow really is optimal under the perturbed costs.

    Checks the first-order gap over independently enumerated vertices; when
    the perturbed matrix is PSD it additionally samples segments between
    vertex pairs (and from the flow to each vertex) and requires no sampled
    objective to undercut the flow's.  Recomputes the perturbation norms.
    """
    if inst.cells > VERTEX_GUARD_CELLS:
        raise OracleGuardError(f"{inst.cells} cells exceed the guard of {VERTEX_GUARD_CELLS}")
    perturbed = QuadraticCost(sol.matrix_cost, sol.vector_cost)
    vertices = transportation_vertices(inst)
    g = sol.matrix_cost @ flow.x + sol.vector_cost
    gap = float(g @ flow.x - min(float(g @ v) for v in vertices))

    eigs = np.linalg.eigvalsh(sol.matrix_cost)
    psd = bool(eigs.min() >= -1e-9)
    margin = math.inf
    if psd:
        f0 = evaluate_objective(perturbed, flow.x)
        ts = np.linspace(0.0, 1.0, samples)
        points = [flow.x] + vertices
        for va, vb in itertools.combinations(range(len(points)), 2):
            seg = np.outer(1.0 - ts, points[va]) + np.outer(ts, points[vb])
            vals = 0.5 * np.einsum("ki,ij,kj->k", seg, perturbed.Q, seg) + seg @ perturbed.c
            margin = min(margin, float(vals.min() - f0))
    spot_ok = (not psd) or margin >= -gap_tol

    mat_norm, vec_norm = perturbation_norms(cost, sol.matrix_cost, sol.vector_cost, sol.norm)
    recomputed = mat_norm + vec_norm
    return VerificationReport(
        passed=bool(gap <= gap_tol and spot_ok),
        first_order_gap=gap,
        psd=psd,
        first_order_only=not psd,
        sample_margin=float(margin) if margin != math.inf else 0.0,
        recomputed_objective=recomputed,
        objective_abs_error=abs(recomputed - sol.objective_value),
    )


def grid_search_inverse_diagonal(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    norm: str,
    reference_objective: float,
    resolution: int = 21,
    pair_search: bool = True,
) -> float:
    """Coarse independent upper bound on the inverse objective for diagonal Q.

    Grids single-cell perturbations of the cost diagonal and of the linear
    cost (plus pairs of linear-cost cells) inside +/- 1.5x the reference
    objective, keeps those whose perturbed problem certifies the flow
    optimal, and returns the smallest norm found (inf when none qualifies).
    The exact solver can never do worse than this bound, only better.
    """
    if inst.cells > GRID_GUARD_CELLS:
        raise OracleGuardError(f"{inst.cells} cells exceed the guard of {GRID_GUARD_CELLS}")
    if not cost.diagonal:
        raise ValueError("grid search supports diagonal Q only")
    N = inst.cells
    bound = 1.5 * max(reference_objective, 0.0)
    values = np.linspace(-bound, bound, resolution) if bound > 0 else np.array([0.0])

    def feasible_norm(dh: np.ndarray, dc: np.ndarray) -> float | None:
        perturbed = QuadraticCost(cost.Q + np.diag(dh), cost.c + dc, diagonal=True)
        if kkt_check(inst, perturbed, flow) is None:
            return None
        if norm == "l1":
            return float(np.abs(dh).max(initial=0.0) + np.abs(dc).sum())
        return float(np.abs(dh).max(initial=0.0) + np.abs(dc).max(initial=0.0))

    best = math.inf
    zero = np.zeros(N)
    got = feasible_norm(zero, zero)
    if got is not None:
        best = min(best, got)
    for p in range(N):
        for v in values:
            if v == 0.0:
                continue
            dc = np.zeros(N)
            dc[p] = v
            got = feasible_norm(zero, dc)
            if got is not None:
                best = min(best, got)
            dh = np.zeros(N)
            dh[p] = v
            got = feasible_norm(dh, zero)
            if got is not None:
                best = min(best, got)
    if pair_search:
        for p, q in itertools.combinations(range(N), 2):
            for vp in values:
                for vq in values:
                    if vp == 0.0 and vq == 0.0:
                        continue
                    dc = np.zeros(N)
                    dc[p] = vp
                    dc[q] = vq
                    got = feasible_norm(zero, dc)
                    if got is not None:
                        best = min(best, got)
    return best
