"""Inverse problem under the L1 norm: nearest costs making a flow optimal.

The perturbation is split into nonnegative parts, H - Q = mat_pos - mat_neg
and d - c = vec_pos - vec_neg, which turns the norm objective into a linear
program: the matrix 1-norm (largest absolute column sum) becomes an epigraph
bound over per-column sums and the vector 1-norm a plain sum.  Node
potentials can either stay fixed data (supplied by the caller, typically
:func:`invqtp.kkt.tree_potentials`) or join the decision variables.

Besides the LP route there is a greedy closed-form candidate that repairs
each cell with a nonzero reduced cost either through the linear cost or
through one quadratic entry against the heaviest flow-carrying cell.  The
candidate is cheap but not guaranteed optimal; tests measure its gap
against the LP.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kkt import (
    DualCertificate,
    opposite_sign_residual,
    reduced_costs,
    stationarity_residual,
    tree_potentials,
)
from .linprog import LinearProgram, solve_lp
from .model import (
    FlowMatrix,
    QuadraticCost,
    SupportPartition,
    TransportationInstance,
    support_partition,
    unflatten,
)

ZERO_TOL = 1e-9          # reduced-cost classification threshold
RECONSTRUCT_TOL = 1e-7   # |recomputed norm - objective| accepted after canonicalization


class InverseSolveError(RuntimeError):
    """The inverse LP ended in a status it can never legitimately reach."""


@dataclass(frozen=True)
class SplitVariables:
    """Nonnegative split of a cost perturbation plus its dual data.

    ``matrix_bound`` tracks the matrix-norm epigraph value (largest column
    sum of mat_pos + mat_neg; equal to the largest row sum here because both
    parts are symmetric).  ``vector_bound`` is only set for the max-norm
    variant, where it tracks max(vec_pos + vec_neg).
    """

    mat_pos: np.ndarray
    mat_neg: np.ndarray
    vec_pos: np.ndarray
    vec_neg: np.ndarray
    matrix_bound: float
    potentials: np.ndarray
    slacks: np.ndarray
    vector_bound: float | None = None


@dataclass(frozen=True)
class InverseSolution:
    """Perturbed costs (matrix_cost, vector_cost) that make the flow optimal."""

    matrix_cost: np.ndarray
    vector_cost: np.ndarray
    objective_value: float
    norm: str                     # 'l1' | 'linf'
    certificate: DualCertificate
    method: str                   # 'lp' | 'closed'
    split: SplitVariables
    diagnostics: dict


def perturbation_norms(
    cost: QuadraticCost, matrix_cost: np.ndarray, vector_cost: np.ndarray, norm: str
) -> tuple[float, float]:
    """(matrix norm, vector norm) of the perturbation under 'l1' or 'linf'."""
    dM = np.abs(matrix_cost - cost.Q)
    dv = np.abs(vector_cost - cost.c)
    if norm == "l1":
        return float(dM.sum(axis=0).max()), float(dv.sum())
    if norm == "linf":
        return float(dM.sum(axis=1).max()), float(dv.max())
    raise ValueError(f"unknown norm {norm!r}")


def canonicalize(split: SplitVariables) -> SplitVariables:
    """Remove entrywise overlap between the split pairs and refresh the bounds.

    The differences mat_pos - mat_neg and vec_pos - vec_neg are unchanged, so
    every stationarity row keeps holding; the objective can only decrease.
    """
    m_overlap = np.minimum(split.mat_pos, split.mat_neg)
    v_overlap = np.minimum(split.vec_pos, split.vec_neg)
    mat_pos = split.mat_pos - m_overlap
    mat_neg = split.mat_neg - m_overlap
    vec_pos = split.vec_pos - v_overlap
    vec_neg = split.vec_neg - v_overlap
    matrix_bound = float((mat_pos + mat_neg).sum(axis=0).max())
    vector_bound = None if split.vector_bound is None else float((vec_pos + vec_neg).max())
    return replace(
        split,
        mat_pos=mat_pos,
        mat_neg=mat_neg,
        vec_pos=vec_pos,
        vec_neg=vec_neg,
        matrix_bound=matrix_bound,
        vector_bound=vector_bound,
    )


def _matrix_reps(cells: int, diagonal: bool) -> list[tuple[int, int]]:
    if diagonal:
        return [(p, p) for p in range(cells)]
    return [(p, q) for p in range(cells) for q in range(p, cells)]


def _count_report(inst: TransportationInstance, diagonal: bool, w1_free: bool, norm: str) -> dict:
    """Reconcile the headline variable counts with what the LP actually holds.

    The headline (nominal) count treats the split matrices as dense and the
    potentials as variables, and has no epigraph variable; the raw count adds
    the epigraph variable(s) and drops the potentials when they are fixed
    data.  The built LP is smaller still: one column per unordered matrix
    pair and slack columns for the epigraph rows.
    """
    n, m = inst.n, inst.m
    N = inst.cells
    nominal = (5 * N if diagonal else 2 * N * N + 3 * N) + n + m
    bounds = 1 if norm == "l1" else 2
    raw = nominal + bounds - (0 if w1_free else n + m)
    return {"nominal_variables": nominal, "raw_variables": raw}


def _assemble_inverse_lp(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition,
    potentials: np.ndarray | None,
    diagonal: bool,
    norm: str,
) -> LinearProgram:
    """Shared LP builder for both norms; they differ only in the objective
    and in the extra per-cell bound rows of the max-norm variant."""
    n, m = inst.n, inst.m
    N = inst.cells
    x0 = flow.x
    w1_free = potentials is None
    zero_cells = partition.zero_sorted()
    reps = _matrix_reps(N, diagonal)

    names: list[str] = []
    names += [f"dQ+({a},{b})" for a, b in reps]
    names += [f"dQ-({a},{b})" for a, b in reps]
    names += [f"dc+({p})" for p in range(N)]
    names += [f"dc-({p})" for p in range(N)]
    names += [f"rc({p})" for p in zero_cells]
    names.append("mnorm")
    if norm == "linf":
        names.append("vnorm")
    if w1_free:
        names += [f"u({i})" for i in range(n)]
        names += [f"v({j})" for j in range(m)]
    names += [f"mslack({p})" for p in range(N)]
    if norm == "linf":
        names += [f"vslack({p})" for p in range(N)]

    col = {name: k for k, name in enumerate(names)}
    n_vars = len(names)
    n_rows = 2 * N if norm == "l1" else 3 * N
    A = np.zeros((n_rows, n_vars))
    b = np.zeros(n_rows)
    c_obj = np.zeros(n_vars)
    free = np.zeros(n_vars, dtype=bool)

    # Stationarity rows, one per cell: sum_s (neg - pos)_{s,p} x0_s
    # - vec_pos_p + vec_neg_p (+ slack on zero cells) (+ potentials if free)
    # equals the reduced cost (fixed potentials) or the raw gradient (free).
    if w1_free:
        b[:N] = cost.Q @ x0 + cost.c
    else:
        b[:N] = reduced_costs(inst, cost, flow, potentials)
    for t, (a, bb) in enumerate(reps):
        if a == bb:
            weight_rows = [(a, x0[a])]
            mult_rows = [(a, 1.0)]
        else:
            weight_rows = [(bb, x0[a]), (a, x0[bb])]
            mult_rows = [(bb, 1.0), (a, 1.0)]
        for row, wgt in weight_rows:
            A[row, t] -= wgt                    # dQ+ lowers the left side
            A[row, len(reps) + t] += wgt        # dQ- raises it
        for row, mult in mult_rows:
            A[N + row, t] -= mult
            A[N + row, len(reps) + t] -= mult
    for p in range(N):
        A[p, col[f"dc+({p})"]] = -1.0
        A[p, col[f"dc-({p})"]] = 1.0
    for p in zero_cells:
        A[p, col[f"rc({p})"]] = 1.0
    if w1_free:
        for p in range(N):
            i, j = unflatten(p, m)
            A[p, col[f"u({i - 1})"]] = 1.0
            A[p, col[f"v({j - 1})"]] = 1.0
            free[col[f"u({i - 1})"]] = True
            free[col[f"v({j - 1})"]] = True

    # Epigraph rows: mnorm >= column sums of (pos + neg); the multiplier
    # coefficients were written above, here the bound and slack columns.
    for p in range(N):
        A[N + p, col["mnorm"]] = 1.0
        A[N + p, col[f"mslack({p})"]] = -1.0
    if norm == "linf":
        for p in range(N):
            A[2 * N + p, col["vnorm"]] = 1.0
            A[2 * N + p, col[f"dc+({p})"]] = -1.0
            A[2 * N + p, col[f"dc-({p})"]] = -1.0
            A[2 * N + p, col[f"vslack({p})"]] = -1.0

    if norm == "l1":
        c_obj[col["mnorm"]] = 1.0
        for p in range(N):
            c_obj[col[f"dc+({p})"]] = 1.0
            c_obj[col[f"dc-({p})"]] = 1.0
    else:
        c_obj[col["mnorm"]] = 1.0
        c_obj[col["vnorm"]] = 1.0

    meta = _count_report(inst, diagonal, w1_free, norm)
    meta.update(
        {
            "lp_columns": n_vars,
            "lp_rows": n_rows,
            "w1_free": w1_free,
            "diagonal": diagonal,
            "norm": norm,
            "matrix_pairs": len(reps),
        }
    )
    return LinearProgram(c_obj, A, b, free=free, names=tuple(names), meta=meta)


def build_l1_lp(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
    potentials: np.ndarray | None = None,
    diagonal: bool = False,
) -> LinearProgram:
    """LP whose optimum is the L1-minimal perturbation making the flow optimal.

    ``potentials=None`` makes the node potentials decision variables; passing
    a vector evaluates the problem at those fixed potentials.  With
    ``diagonal=True`` only diagonal matrix perturbations are allowed.
    """
    if partition is None:
        partition = support_partition(flow)
    return _assemble_inverse_lp(inst, cost, flow, partition, potentials, diagonal, "l1")


def _extract_split(
    lp: LinearProgram,
    sol_values: dict[str, float],
    inst: TransportationInstance,
    partition: SupportPartition,
    potentials: np.ndarray | None,
    diagonal: bool,
    norm: str,
) -> SplitVariables:
    N = inst.cells
    mat_pos = np.zeros((N, N))
    mat_neg = np.zeros((N, N))
    for a, bb in _matrix_reps(N, diagonal):
        gp = sol_values[f"dQ+({a},{bb})"]
        gn = sol_values[f"dQ-({a},{bb})"]
        mat_pos[a, bb] = mat_pos[bb, a] = gp
        mat_neg[a, bb] = mat_neg[bb, a] = gn
    vec_pos = np.array([sol_values[f"dc+({p})"] for p in range(N)])
    vec_neg = np.array([sol_values[f"dc-({p})"] for p in range(N)])
    slacks = np.zeros(N)
    for p in partition.zero_sorted():
        slacks[p] = max(0.0, sol_values[f"rc({p})"])
    if potentials is None:
        pot = np.array(
            [sol_values[f"u({i})"] for i in range(inst.n)]
            + [sol_values[f"v({j})"] for j in range(inst.m)]
        )
    else:
        pot = np.asarray(potentials, dtype=float)
    return SplitVariables(
        mat_pos=mat_pos,
        mat_neg=mat_neg,
        vec_pos=vec_pos,
        vec_neg=vec_neg,
        matrix_bound=sol_values["mnorm"],
        potentials=pot,
        slacks=slacks,
        vector_bound=sol_values["vnorm"] if norm == "linf" else None,
    )


def _solve_inverse(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None,
    potentials: np.ndarray | None,
    diagonal: bool,
    norm: str,
) -> InverseSolution:
    if partition is None:
        partition = support_partition(flow)
    lp = _assemble_inverse_lp(inst, cost, flow, partition, potentials, diagonal, norm)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise InverseSolveError(
            f"inverse LP came back {sol.status}; the split formulation is always "
            "feasible and bounded, so this indicates corrupted input data"
        )
    objective = float(sol.objective)
    if -1e-9 < objective < 0.0:
        objective = 0.0  # sum of nonnegative variables, so only float dust is negative
    split = canonicalize(
        _extract_split(lp, sol.values, inst, partition, potentials, diagonal, norm)
    )
    matrix_cost = cost.Q + split.mat_pos - split.mat_neg
    vector_cost = cost.c + split.vec_pos - split.vec_neg
    cert = DualCertificate(split.potentials, split.slacks)
    perturbed = QuadraticCost(matrix_cost, vector_cost)
    residual = stationarity_residual(inst, perturbed, flow, cert)
    mat_norm, vec_norm = perturbation_norms(cost, matrix_cost, vector_cost, norm)
    recomputed = mat_norm + vec_norm
    diagnostics = {
        "stationarity_max_residual": float(np.max(np.abs(residual))),
        "opposite_sign_max_residual": float(
            np.max(np.abs(opposite_sign_residual(inst, perturbed, flow, cert)))
        ),
        "recomputed_matrix_norm": mat_norm,
        "recomputed_vector_norm": vec_norm,
        "recomputed_objective": recomputed,
        "objective_abs_error": abs(recomputed - objective),
        "canonicalization_applied": True,
        "lp_iterations": sol.iterations,
        "lp_max_equality_residual": sol.max_equality_residual,
        "counts": dict(lp.meta),
    }
    return InverseSolution(
        matrix_cost=matrix_cost,
        vector_cost=vector_cost,
        objective_value=objective,
        norm=norm,
        certificate=cert,
        method="lp",
        split=split,
        diagnostics=diagnostics,
    )


def solve_l1(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
    potentials: np.ndarray | None = None,
    diagonal: bool = False,
) -> InverseSolution:
    """Exact L1-minimal perturbation via the LP route.

    The default dense mode searches all symmetric matrix perturbations even
    when Q itself is diagonal, so its optimum is always a lower bound for
    the closed-form candidate; ``diagonal=True`` restricts the search and is
    the cheap mode for diagonal Q.
    """
    return _solve_inverse(inst, cost, flow, partition, potentials, diagonal, "l1")


def _closed_form_candidate(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition,
    potentials: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[dict]]:
    """Greedy per-cell repair driven by the reduced costs at fixed potentials.

    Returns (matrix_cost, vector_cost, slacks, mode log).  Cells with zero
    reduced cost need nothing; zero-flow cells with positive reduced cost are
    absorbed by the slack.  Every other cell is repaired either through the
    linear cost (always available) or through one quadratic entry against the
    flow-heaviest cell, whichever grows the running L1 objective less.
    """
    cpi = reduced_costs(inst, cost, flow, potentials)
    x0 = flow.x
    N = inst.cells
    pos_cells = partition.positive_sorted()
    kl = None
    if pos_cells:
        kl = int(pos_cells[int(np.argmax(x0[pos_cells]))])

    H = cost.Q.copy()
    d = cost.c.copy()
    slacks = np.zeros(N)
    colsums = np.zeros(N)
    theta_run = 0.0
    log: list[dict] = []
    for p in range(N):
        v = float(cpi[p])
        if abs(v) <= ZERO_TOL:
            continue
        if v > 0 and p in partition.zero:
            slacks[p] = v
            log.append({"cell": p, "mode": "slack", "reduced_cost": v})
            continue
        mag = abs(v)
        if kl is None:
            mode = "vector"
        else:
            per = mag / x0[kl]
            if kl == p:
                theta_new = max(theta_run, colsums[p] + per)
            else:
                theta_new = max(theta_run, colsums[p] + per, colsums[kl] + per)
            mode = "vector" if mag <= theta_new - theta_run else "matrix"
        if mode == "vector":
            d[p] = cost.c[p] - v
        else:
            per = mag / x0[kl]
            H[kl, p] -= np.sign(v) * per
            H[p, kl] = H[kl, p]
            colsums[p] += per
            if kl != p:
                colsums[kl] += per
            theta_run = float(np.max(colsums))
        log.append({"cell": p, "mode": mode, "reduced_cost": v})
    return H, d, slacks, log


def _closed_form_solution(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None,
    potentials: np.ndarray | None,
    norm: str,
) -> InverseSolution:
    if partition is None:
        partition = support_partition(flow)
    if potentials is None:
        potentials = tree_potentials(inst, cost, flow, partition)
    else:
        potentials = np.asarray(potentials, dtype=float)
    H, d, slacks, log = _closed_form_candidate(inst, cost, flow, partition, potentials)
    split = SplitVariables(
        mat_pos=np.maximum(H - cost.Q, 0.0),
        mat_neg=np.maximum(cost.Q - H, 0.0),
        vec_pos=np.maximum(d - cost.c, 0.0),
        vec_neg=np.maximum(cost.c - d, 0.0),
        matrix_bound=float(np.abs(H - cost.Q).sum(axis=0).max()),
        potentials=potentials,
        slacks=slacks,
        vector_bound=float(np.abs(d - cost.c).max()) if norm == "linf" else None,
    )
    cert = DualCertificate(potentials, slacks)
    perturbed = QuadraticCost(H, d)
    residual = stationarity_residual(inst, perturbed, flow, cert)
    mat_norm, vec_norm = perturbation_norms(cost, H, d, norm)
    max_residual = float(np.max(np.abs(residual)))
    diagnostics = {
        "stationarity_max_residual": max_residual,
        "opposite_sign_max_residual": float(
            np.max(np.abs(opposite_sign_residual(inst, perturbed, flow, cert)))
        ),
        "recomputed_matrix_norm": mat_norm,
        "recomputed_vector_norm": vec_norm,
        "recomputed_objective": mat_norm + vec_norm,
        "canonicalization_applied": False,
        "mode_log": log,
        # Repairing a flow-carrying cell through the matrix also disturbs the
        # mirrored row; the candidate is reported as-is, never patched.
        "mirror_violation": max_residual > 1e-7,
    }
    return InverseSolution(
        matrix_cost=H,
        vector_cost=d,
        objective_value=mat_norm + vec_norm,
        norm=norm,
        certificate=cert,
        method="closed",
        split=split,
        diagnostics=diagnostics,
    )


def closed_form_l1(
    inst: TransportationInstance,
    cost: QuadraticCost,
    flow: FlowMatrix,
    partition: SupportPartition | None = None,
    potentials: np.ndarray | None = None,
) -> InverseSolution:
    """Closed-form candidate under the L1 norm at fixed potentials.

    Defaults to tree potentials over the support forest, which zero the
    reduced costs on flow-carrying cells so only zero-flow cells need repair.
    """
    return _closed_form_solution(inst, cost, flow, partition, potentials, "l1")
