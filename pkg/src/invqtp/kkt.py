"""Optimality certificates for a flow under quadratic costs.

A feasible flow x0 is optimal for costs (Q, c) over the transportation
polytope exactly when node potentials w (one per origin and destination)
and nonnegative slacks exist with

    potential_i + potential_{n+j} + slack_ij = gradient_ij   on zero-flow cells
    potential_i + potential_{n+j}            = gradient_ij   on flow-carrying cells

where gradient = Q x0 + c.  The slack on a zero-flow cell is its reduced
cost.  Textbook treatments differ on the sign with which the multiplier of
x >= 0 enters the stationarity equation; this module uses the convention
above, under which optimal flows of convex problems do admit certificates,
and additionally reports the opposite-sign residual for auditing (see
``certificate_report``).  Cross-validation against ``frank_wolfe_gap`` is
part of the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linprog import LinearProgram, basic_feasible_solutions, enumerate_vertices, solve_lp
from .model import (
    DimensionError,
    FlowMatrix,
    QuadraticCost,
    SupportPartition,
    TransportationInstance,
    constraint_matrix,
    support_partition,
    unflatten,
)

FW_GUARD_CELLS = 12
STATIONARITY_TOL = 1e-7


class CyclicSupportError(ValueError):
    """The flow support contains a cycle, so tree potentials are not defined."""


class SizeGuardError(ValueError):
    """Instance exceeds the size guard of a brute-force verification step."""


@dataclass(frozen=True)
class DualCertificate:
    """Node potentials plus nonnegative slacks for the zero-flow cells."""

    potentials: np.ndarray   # length n + m: origins first, then destinations
    slacks: np.ndarray       # length n * m, zero on flow-carrying cells

    def __post_init__(self) -> None:
        object.__setattr__(self, "potentials", np.atleast_1d(np.asarray(self.potentials, dtype=float)))
        object.__setattr__(self, "slacks", np.atleast_1d(np.asarray(self.slacks, dtype=float)))

    def as_dict(self) -> dict:
        return {
            "potentials": [float(v) for v in self.potentials],
            "slacks": [float(v) for v in self.slacks],
        }


def _potential_sums(inst: TransportationInstance, potentials: np.ndarray) -> np.ndarray:
    """(u_i + v_j) per flat cell for potentials stacked as (origins, destinations)."""
    u = potentials[: inst.n]
    v = potentials[inst.n :]
    return np.add.outer(u, v).ravel()


def gradient(cost: QuadraticCost, x: np.ndarray) -> np.ndarray:
    return cost.Q @ x + cost.c


def stationarity_residual(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    cert: DualCertificate,
) -> np.ndarray:
    """Componentwise defect of the optimality system for (cost, flow, cert).

    Zero everywhere (within tolerance) certifies first-order optimality of
    the flow for the given quadratic cost.
    """
    if flow.cells != inst.cells or cost.cells != inst.cells:
        raise DimensionError("instance, cost and flow sizes must agree")
    if cert.potentials.shape[0] != inst.n + inst.m or cert.slacks.shape[0] != inst.cells:
        raise DimensionError("certificate sizes must match the instance")
    g = gradient(cost, flow.x)
    return _potential_sums(inst, cert.potentials) + cert.slacks - g


def opposite_sign_residual(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    cert: DualCertificate,
) -> np.ndarray:
    """Residual with the slack entering with the opposite sign (audit only)."""
    g = gradient(cost, flow.x)
    return g - _potential_sums(inst, cert.potentials) + cert.slacks


def reduced_costs(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    potentials: np.ndarray,
) -> np.ndarray:
    """Gradient minus potential sums: c_ij - (u_i + v_j) + sum_kl Q x0."""
    potentials = np.asarray(potentials, dtype=float)
    if flow.cells != inst.cells or cost.cells != inst.cells:
        raise DimensionError("instance, cost and flow sizes must agree")
    if potentials.shape[0] != inst.n + inst.m:
        raise DimensionError("need one potential per origin and destination")
    return gradient(cost, flow.x) - _potential_sums(inst, potentials)


def tree_potentials(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
) -> np.ndarray:
    """Potentials solving u_i + v_j = gradient_ij on the support forest.

    The smallest-index node of each connected component is anchored at zero,
    so the result is deterministic.  A cyclic support is refused.
    """
    if partition is None:
        partition = support_partition(flow)
    n, m = inst.n, inst.m
    g = gradient(cost, flow.x)
    adj: dict[int, list[tuple[int, int]]] = {node: [] for node in range(n + m)}
    for p in partition.positive_sorted():
        i, j = unflatten(p, m)
        adj[i - 1].append((n + j - 1, p))
        adj[n + j - 1].append((i - 1, p))

    w = np.zeros(n + m)
    seen = [False] * (n + m)
    for root in range(n + m):
        if seen[root]:
            continue
        seen[root] = True
        w[root] = 0.0
        stack = [root]
        tree_edges: set[int] = set()
        while stack:
            node = stack.pop()
            for other, p in adj[node]:
                if p in tree_edges:
                    continue
                if seen[other]:
                    raise CyclicSupportError("flow support contains a cycle")
                tree_edges.add(p)
                seen[other] = True
                w[other] = g[p] - w[node]
                stack.append(other)
    return w


def kkt_check(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
) -> DualCertificate | None:
    """Search for a certificate by LP feasibility; None when none exists."""
    if partition is None:
        partition = support_partition(flow)
    n, m = inst.n, inst.m
    cells = inst.cells
    g = gradient(cost, flow.x)
    zero_cells = partition.zero_sorted()

    names = [f"u({i})" for i in range(n)] + [f"v({j})" for j in range(m)]
    names += [f"rc({p})" for p in zero_cells]
    n_vars = len(names)
    A = np.zeros((cells, n_vars))
    for p in range(cells):
        i, j = unflatten(p, m)
        A[p, i - 1] = 1.0
        A[p, n + j - 1] = 1.0
    for k, p in enumerate(zero_cells):
        A[p, n + m + k] = 1.0
    free = np.zeros(n_vars, dtype=bool)
    free[: n + m] = True
    lp = LinearProgram(np.zeros(n_vars), A, g, free=free, names=tuple(names))
    sol = solve_lp(lp)
    if sol.status != "optimal":
        return None
    potentials = sol.x[: n + m]
    slacks = np.zeros(cells)
    for k, p in enumerate(zero_cells):
        slacks[p] = max(0.0, sol.x[n + m + k])
    return DualCertificate(potentials, slacks)


def certificate_report(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    cert: DualCertificate,
) -> dict:
    """Residual diagnostics for a certificate, including the sign audit."""
    res = stationarity_residual(inst, cost, flow, cert)
    alt = opposite_sign_residual(inst, cost, flow, cert)
    comp = float(np.max(np.abs(cert.slacks * flow.x)))
    report = {
        "stationarity_max_residual": float(np.max(np.abs(res))),
        "opposite_sign_max_residual": float(np.max(np.abs(alt))),
        "complementary_slackness_max": comp,
        "min_slack": float(np.min(cert.slacks)),
    }
    if report["stationarity_max_residual"] <= STATIONARITY_TOL < report["opposite_sign_max_residual"]:
        report["sign_note"] = (
            "slack sign follows the zero-flow reduced-cost convention; "
            "the opposite-sign form does not vanish on this certificate"
        )
    return report


def _transportation_lp(inst: TransportationInstance, objective: np.ndarray) -> LinearProgram:
    A, b = constraint_matrix(inst)
    names = tuple(f"x({p})" for p in range(inst.cells))
    return LinearProgram(objective, A, b, names=names)


def frank_wolfe_gap(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
) -> float:
    """First-order gap g(x0)'x0 - min_y g(x0)'y over the transportation polytope.

    Nonnegative for every feasible flow; a value at zero (within tolerance)
    certifies first-order optimality, which is global when Q is PSD.  Uses
    the vertex-enumeration oracle, so the instance is guarded to at most
    12 cells.
    """
    if inst.cells > FW_GUARD_CELLS:
        raise SizeGuardError(f"{inst.cells} cells exceed the guard of {FW_GUARD_CELLS}")
    g = gradient(cost, flow.x)
    best = enumerate_vertices(_transportation_lp(inst, g))
    if best.status != "optimal":
        raise RuntimeError(f"transportation polytope enumeration returned {best.status}")
    return float(g @ flow.x - best.objective)


def _polish_on_support(
    inst: TransportationInstance,
    cost: QuadraticCost,
    x: np.ndarray,
    tol: float,
) -> np.ndarray | None:
    """Solve the equality-constrained problem on the support face of x.

    Returns a cleaned exact stationary point when it is feasible and keeps
    first-order optimality, else None.
    """
    supp = [int(p) for p in np.nonzero(x > 1e-9)[0]]
    A, b = constraint_matrix(inst)
    k = len(supp)
    nm_nodes = inst.n + inst.m
    K = np.zeros((k + nm_nodes, k + nm_nodes))
    K[:k, :k] = cost.Q[np.ix_(supp, supp)]
    K[:k, k:] = -A[:, supp].T
    K[k:, :k] = A[:, supp]
    rhs = np.concatenate([-cost.c[supp], b])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    xs = sol[:k]
    w = sol[k:]
    if k and np.min(xs) < -1e-11:
        return None
    x_new = np.zeros(inst.cells)
    if k:
        x_new[supp] = np.where(np.abs(xs) <= 1e-11, 0.0, xs)
    if np.max(np.abs(A @ x_new - b), initial=0.0) > 1e-9:
        return None
    reduced = gradient(cost, x_new) - _potential_sums(inst, w)
    if np.min(reduced) < -1e-9 or (k and np.max(np.abs(reduced[supp])) > tol):
        return None
    return x_new


def frank_wolfe_optimize(
    inst: TransportationInstance,
    cost: QuadraticCost,
    tol: float = 1e-9,
    max_iters: int = 200_000,
) -> np.ndarray:
    """Away-step conditional gradient to the stated gap over the polytope.

    After convergence the active face is solved exactly, which removes the
    residual first-order error of the iterate whenever the polish stays
    feasible.  Deterministic for fixed inputs.
    """
    if inst.cells > FW_GUARD_CELLS:
        raise SizeGuardError(f"{inst.cells} cells exceed the guard of {FW_GUARD_CELLS}")
    raw = basic_feasible_solutions(_transportation_lp(inst, cost.c))
    vertices: list[np.ndarray] = []
    for v in raw:
        if not any(np.max(np.abs(v - u)) <= 1e-9 for u in vertices):
            vertices.append(np.maximum(v, 0.0))
    V = np.array(vertices)

    start = int(np.argmin(V @ cost.c))
    weights: dict[int, float] = {start: 1.0}

    def combine() -> np.ndarray:
        total = sum(weights.values())
        x = np.zeros(inst.cells)
        for vi, wv in weights.items():
            x += (wv / total) * V[vi]
        return x

    x = combine()
    for _ in range(max_iters):
        g = gradient(cost, x)
        scores = V @ g
        s = int(np.argmin(scores))
        fw_gap = float(g @ x - scores[s])
        if fw_gap <= tol:
            polished = _polish_on_support(inst, cost, x, STATIONARITY_TOL)
            if polished is not None:
                g_pol = gradient(cost, polished)
                if float(g_pol @ polished - np.min(V @ g_pol)) <= tol:
                    return polished
            return x
        active = sorted(weights)
        a = max(active, key=lambda vi: (scores[vi], -vi))
        away_gap = float(scores[a] - g @ x)
        if fw_gap >= away_gap:
            d = V[s] - x
            gamma_max = 1.0
        else:
            alpha = weights[a]
            d = x - V[a]
            gamma_max = alpha / (1.0 - alpha) if alpha < 1.0 else 0.0
        slope = float(g @ d)
        curv = float(d @ cost.Q @ d)
        if curv > 1e-14:
            gamma = min(gamma_max, max(0.0, -slope / curv))
        else:
            gamma = gamma_max if slope < 0 else 0.0
        if fw_gap >= away_gap:
            for vi in list(weights):
                weights[vi] *= 1.0 - gamma
            weights[s] = weights.get(s, 0.0) + gamma
        else:
            for vi in list(weights):
                weights[vi] *= 1.0 + gamma
            weights[a] -= gamma
        weights = {vi: wv for vi, wv in weights.items() if wv > 1e-14}
        if not weights:
            weights = {s: 1.0}
        x = combine()
    raise RuntimeError(f"no point with gap <= {tol} within {max_iters} iterations")
