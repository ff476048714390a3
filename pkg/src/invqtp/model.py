"""Balanced transportation instances, quadratic costs, flows and index plumbing.

Every cost matrix and flow vector in this package lives in a flat index
space of size n*m: origin i, destination j (both 1-based) map to
``flat = (i-1)*m + (j-1)`` (row-major).  All other modules rely on that
single bijection.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

BALANCE_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
DEFAULT_SUPPORT_TOL = 1e-9


class DimensionError(ValueError):
    """Shapes of instance, cost or flow data do not agree."""


def default_support_tolerance() -> float:
    """Support tolerance, overridable through the INVQTP_TOL environment variable."""
    return float(os.environ.get("INVQTP_TOL", DEFAULT_SUPPORT_TOL))


def flatten(i: int, j: int, m: int) -> int:
    """Map the 1-based cell (i, j) of an n x m grid to its flat index."""
    if i < 1 or j < 1 or j > m:
        raise IndexError(f"cell ({i}, {j}) out of range for m={m}")
    return (i - 1) * m + (j - 1)


def unflatten(p: int, m: int) -> tuple[int, int]:
    """Inverse of :func:`flatten`: flat index back to the 1-based cell (i, j)."""
    if p < 0:
        raise IndexError(f"flat index {p} out of range")
    return p // m + 1, p % m + 1


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TransportationInstance:
    """Origins with supplies, destinations with demands.

    Construction only checks shapes; value-level requirements (nonnegativity,
    balance) are reported by :func:`validate_instance` so that invalid files
    can still be loaded and diagnosed.
    """

    supplies: np.ndarray
    demands: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "supplies", _readonly(np.atleast_1d(self.supplies)))
        object.__setattr__(self, "demands", _readonly(np.atleast_1d(self.demands)))
        if self.supplies.ndim != 1 or self.demands.ndim != 1:
            raise DimensionError("supplies and demands must be vectors")
        if self.n < 1 or self.m < 1:
            raise DimensionError("need at least one origin and one destination")

    @property
    def n(self) -> int:
        return self.supplies.shape[0]

    @property
    def m(self) -> int:
        return self.demands.shape[0]

    @property
    def cells(self) -> int:
        return self.n * self.m


@dataclass(frozen=True)
class QuadraticCost:
    """Cost ``0.5 * x'Qx + c'x`` with Q symmetric over flat cell pairs.

    ``diagonal`` records that Q has nonzeros only on its diagonal; it is
    verified at construction.  Symmetry is required exactly.
    """

    Q: np.ndarray
    c: np.ndarray
    diagonal: bool = False

    def __post_init__(self) -> None:
        Q = np.array(self.Q, dtype=float, copy=True)
        c = np.atleast_1d(np.array(self.c, dtype=float, copy=True))
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        if c.ndim != 1 or c.shape[0] != Q.shape[0]:
            raise DimensionError("c length must match Q dimension")
        if not np.array_equal(Q, Q.T):
            raise ValueError("Q must be exactly symmetric")
        if self.diagonal and np.any(Q != np.diag(np.diag(Q))):
            raise ValueError("diagonal flag set but Q has off-diagonal entries")
        Q.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_diagonal(cls, q: np.ndarray, c: np.ndarray) -> "QuadraticCost":
        return cls(np.diag(np.asarray(q, dtype=float)), c, diagonal=True)

    @property
    def cells(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class FlowMatrix:
    """Candidate flow in flat order plus the tolerance that defines its support."""

    x: np.ndarray
    support_tolerance: float = DEFAULT_SUPPORT_TOL

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _readonly(np.atleast_1d(self.x)))
        if self.x.ndim != 1:
            raise DimensionError("flow must be a vector")
        if self.support_tolerance < 0:
            raise ValueError("support tolerance must be nonnegative")

    @property
    def cells(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SupportPartition:
    """Cells carrying flow (``positive``) versus cells at zero (``zero``)."""

    positive: frozenset[int]
    zero: frozenset[int]

    def __post_init__(self) -> None:
        if self.positive & self.zero:
            raise ValueError("support sets must be disjoint")

    @property
    def cells(self) -> int:
        return len(self.positive) + len(self.zero)

    def positive_sorted(self) -> list[int]:
        return sorted(self.positive)

    def zero_sorted(self) -> list[int]:
        return sorted(self.zero)


@dataclass(frozen=True)
class ValidationReport:
    """Result of value-level instance checks."""

    accepted: bool
    balance_residual: float
    negative_supplies: tuple[int, ...] = ()
    negative_demands: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "balance_residual": self.balance_residual,
            "negative_supplies": list(self.negative_supplies),
            "negative_demands": list(self.negative_demands),
        }


@dataclass(frozen=True)
class FeasibilityReport:
    """Row/column residuals of a flow against an instance."""

    feasible: bool
    max_row_residual: float
    max_column_residual: float
    min_entry: float

    def as_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "max_row_residual": self.max_row_residual,
            "max_column_residual": self.max_column_residual,
            "min_entry": self.min_entry,
        }


def validate_instance(inst: TransportationInstance) -> ValidationReport:
    """Report balance residual and negative entries; accept iff both are clean."""
    residual = abs(float(np.sum(inst.supplies) - np.sum(inst.demands)))
    neg_s = tuple(int(i) for i in np.nonzero(inst.supplies < 0)[0])
    neg_d = tuple(int(j) for j in np.nonzero(inst.demands < 0)[0])
    accepted = residual <= BALANCE_TOL and not neg_s and not neg_d
    return ValidationReport(accepted, residual, neg_s, neg_d)


def check_flow_feasibility(inst: TransportationInstance, flow: FlowMatrix) -> FeasibilityReport:
    """Residuals of the row-sum/column-sum equations plus the smallest entry."""
    if flow.cells != inst.cells:
        raise DimensionError(f"flow has {flow.cells} cells, instance has {inst.cells}")
    grid = flow.x.reshape(inst.n, inst.m)
    row_res = float(np.max(np.abs(grid.sum(axis=1) - inst.supplies)))
    col_res = float(np.max(np.abs(grid.sum(axis=0) - inst.demands)))
    min_entry = float(np.min(flow.x))
    feasible = row_res <= FEASIBILITY_TOL and col_res <= FEASIBILITY_TOL and min_entry >= 0
    return FeasibilityReport(feasible, row_res, col_res, min_entry)


def support_partition(flow: FlowMatrix, tol: float | None = None) -> SupportPartition:
    """Split cells into flow-carrying and zero sets at the given tolerance."""
    if tol is None:
        tol = flow.support_tolerance
    if tol < 0:
        raise ValueError("support tolerance must be nonnegative")
    pos = frozenset(int(p) for p in np.nonzero(flow.x > tol)[0])
    zero = frozenset(range(flow.cells)) - pos
    return SupportPartition(pos, zero)


def evaluate_objective(cost: QuadraticCost, x: np.ndarray) -> float:
    """Value of ``0.5 * x'Qx + c'x`` at the given flow vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != cost.c.shape:
        raise DimensionError("flow length must match cost dimension")
    return float(0.5 * x @ cost.Q @ x + cost.c @ x)


def constraint_matrix(inst: TransportationInstance) -> tuple[np.ndarray, np.ndarray]:
    """Dense equality system A x = b of the transportation polytope.

    A has n + m rows: one per origin (row sums) followed by one per
    destination (column sums); b stacks supplies then demands.
    """
    n, m = inst.n, inst.m
    A = np.zeros((n + m, n * m))
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            p = flatten(i, j, m)
            A[i - 1, p] = 1.0
            A[n + j - 1, p] = 1.0
    b = np.concatenate([inst.supplies, inst.demands])
    return A, b


def northwest_corner_flow(inst: TransportationInstance) -> np.ndarray:
    """Feasible flow from the northwest-corner rule; support is always a forest."""
    n, m = inst.n, inst.m
    rem_s = inst.supplies.astype(float).copy()
    rem_d = inst.demands.astype(float).copy()
    x = np.zeros(n * m)
    i = j = 0
    while i < n and j < m:
        amount = min(rem_s[i], rem_d[j])
        x[i * m + j] = amount
        rem_s[i] -= amount
        rem_d[j] -= amount
        if rem_s[i] <= 0 and i < n - 1:
            i += 1
        elif rem_d[j] <= 0 and j < m - 1:
            j += 1
        else:
            if rem_s[i] <= 0 and rem_d[j] <= 0:
                break
            if rem_s[i] <= 0:
                i += 1
            else:
                j += 1
    return x


def _symmetrize(M: np.ndarray) -> np.ndarray:
    # (M + M.T)/2 entry pairs are computed from identical float operations,
    # so the result is exactly symmetric.
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class GeneratedProblem:
    instance: TransportationInstance
    cost: QuadraticCost
    flow: FlowMatrix
    psd: bool = True


def generate_instance(
    seed: int,
    n: int,
    m: int,
    supply_range: tuple[int, int] = (1, 9),
    cost_range: tuple[float, float] = (-5.0, 5.0),
    diagonal: bool = False,
    psd: bool = True,
) -> GeneratedProblem:
    """Deterministic random problem: balanced instance, symmetric Q, feasible flow.

    Supplies are integers in ``supply_range``; demands split the same total so
    the instance is balanced by construction (last demand takes the exact
    remainder).  Q is PSD (Gram matrix) unless ``psd=False``, which yields a
    labeled indefinite symmetric matrix; ``diagonal=True`` draws positive
    diagonal entries instead.  The embedded flow is the northwest-corner one.
    """
    if n < 1 or m < 1:
        raise DimensionError("need n, m >= 1")
    lo, hi = supply_range
    if lo > hi or lo < 0:
        raise ValueError(f"impossible supply range {supply_range}")
    if cost_range[0] > cost_range[1]:
        raise ValueError(f"impossible cost range {cost_range}")
    rng = np.random.default_rng(seed)
    supplies = rng.integers(lo, hi + 1, size=n).astype(float)
    total = float(np.sum(supplies))
    weights = rng.integers(1, 10, size=m).astype(float)
    demands = total * weights / float(np.sum(weights))
    demands[-1] = total - float(np.sum(demands[:-1]))
    inst = TransportationInstance(supplies, demands)

    cells = n * m
    if diagonal:
        diag = rng.uniform(0.5, 3.0, size=cells)
        cost = QuadraticCost.from_diagonal(diag, rng.uniform(*cost_range, size=cells))
    else:
        if psd:
            V = rng.normal(size=(cells + 2, cells))
            Q = _symmetrize(V.T @ V / cells)
        else:
            Q = _symmetrize(rng.normal(size=(cells, cells)))
        cost = QuadraticCost(Q, rng.uniform(*cost_range, size=cells))

    flow = FlowMatrix(northwest_corner_flow(inst), default_support_tolerance())
    return GeneratedProblem(inst, cost, flow, psd=psd or diagonal)
