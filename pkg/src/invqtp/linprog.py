"""Dense two-phase primal simplex and an exhaustive vertex-enumeration oracle.

Problems are equality-constrained: minimize c'x subject to Ax = b with each
variable either bounded below by zero or marked free.  Free variables are
split into differences of nonnegative parts internally, both by the solver
and by the enumerator, so the two routes stay comparable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-8          # equality residual accepted on optimal solutions
BOUND_TOL = 1e-10        # bound violation accepted on optimal solutions
REDUCED_TOL = 1e-9       # reduced-cost threshold for entering columns
RATIO_TOL = 1e-9         # smallest pivot the ratio test will accept
PIVOT_TOL = 1e-11        # below this a forced pivot is a numerical breakdown
MAX_PIVOTS = 100_000


class SimplexBreakdownError(RuntimeError):
    """A pivot below the safe magnitude would be required to continue."""


class VertexGuardError(ValueError):
    """Problem exceeds the size guard of the enumeration oracle."""


@dataclass(frozen=True)
class LinearProgram:
    """Minimize ``c @ x`` subject to ``A @ x = b``; ``free[j]`` lifts the zero bound."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    free: np.ndarray | None = None
    names: tuple[str, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape != (b.shape[0], c.shape[0]):
            raise ValueError(f"inconsistent shapes: A {A.shape}, b {b.shape}, c {c.shape}")
        free = self.free
        if free is None:
            free = np.zeros(c.shape[0], dtype=bool)
        else:
            free = np.atleast_1d(np.asarray(free, dtype=bool))
            if free.shape != c.shape:
                raise ValueError("free mask length must match objective length")
        names = self.names
        if names is None:
            names = tuple(f"x{j}" for j in range(c.shape[0]))
        else:
            names = tuple(names)
            if len(names) != c.shape[0]:
                raise ValueError("need one name per variable")
        for arr in (c, A, b, free):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "names", names)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class LpSolution:
    """Solver or oracle outcome; ``x`` is None unless the status is optimal."""

    status: str                      # 'optimal' | 'infeasible' | 'unbounded'
    x: np.ndarray | None
    objective: float
    iterations: int
    names: tuple[str, ...] = ()
    max_equality_residual: float = 0.0
    max_bound_violation: float = 0.0

    @property
    def values(self) -> dict[str, float]:
        if self.x is None:
            return {}
        return {name: float(v) for name, v in zip(self.names, self.x)}


def _split_free(lp: LinearProgram) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[int]]:
    """Standard form with free variables written as differences of nonnegatives.

    Returns (c, A, b, free_cols) where free_cols lists the original indices of
    free variables; their negative parts are appended after the original
    columns, in the same order.
    """
    free_idx = [int(j) for j in np.nonzero(lp.free)[0]]
    if not free_idx:
        return lp.c.copy(), lp.A.copy(), lp.b.copy(), free_idx
    A = np.hstack([lp.A, -lp.A[:, free_idx]])
    c = np.concatenate([lp.c, -lp.c[free_idx]])
    return c, A, lp.b.copy(), free_idx


def _merge_free(x_std: np.ndarray, n_orig: int, free_idx: list[int]) -> np.ndarray:
    x = x_std[:n_orig].copy()
    for k, j in enumerate(free_idx):
        x[j] -= x_std[n_orig + k]
    return x


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    piv_row = T[row] / T[row, col]
    T -= np.outer(T[:, col], piv_row)
    T[row] = piv_row
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: list[int], cost: np.ndarray, allow_unbounded: bool) -> tuple[str, int]:
    """Bland-rule simplex on tableau ``T`` (rows x [cols | rhs]) in place.

    Entering: smallest-index column with reduced cost below -REDUCED_TOL.
    Leaving: minimum ratio; ties broken by the smallest basic-variable index.
    """
    n = T.shape[1] - 1
    pivots = 0
    while True:
        reduced = cost - np.asarray(cost)[basis] @ T[:, :n] if basis else cost.copy()
        candidates = np.nonzero(reduced < -REDUCED_TOL)[0]
        if candidates.size == 0:
            return "optimal", pivots
        j = int(candidates[0])
        col = T[:, j]
        eligible = np.nonzero(col > RATIO_TOL)[0]
        if eligible.size == 0:
            if np.any(col > PIVOT_TOL):
                raise SimplexBreakdownError(
                    f"only pivots below {RATIO_TOL} available in column {j}"
                )
            if allow_unbounded:
                return "unbounded", pivots
            raise SimplexBreakdownError("improving direction with no pivot in phase 1")
        ratios = T[eligible, -1] / col[eligible]
        best = float(np.min(ratios))
        tied = eligible[ratios <= best + 1e-9 * max(1.0, abs(best))]
        row = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, basis, row, j)
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise SimplexBreakdownError("pivot limit exceeded")


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Two-phase primal simplex with Bland's anti-cycling rule."""
    c, A, b, free_idx = _split_free(lp)
    m, n = A.shape

    A = A.copy()
    b = b.copy()
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # Phase 1: drive an artificial basis to zero.
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    status, pivots1 = _run_simplex(T, basis, cost1, allow_unbounded=False)
    phase1_obj = float(cost1[basis] @ T[:, -1]) if basis else 0.0
    if phase1_obj > FEAS_TOL:
        return LpSolution("infeasible", None, math.nan, pivots1, lp.names)

    # Remove artificials from the basis; rows that cannot pivot are redundant.
    keep = list(range(m))
    for row in range(m):
        if basis[row] >= n:
            entries = np.abs(T[row, :n])
            j = int(np.argmax(entries))
            if entries[j] > RATIO_TOL:
                _pivot(T, basis, row, j)
            else:
                keep.remove(row)
    if len(keep) < m:
        T = T[keep]
        basis = [basis[r] for r in keep]

    # Phase 2 on the real columns only.
    T2 = np.hstack([T[:, :n], T[:, -1:]])
    status, pivots2 = _run_simplex(T2, basis, c, allow_unbounded=True)
    iterations = pivots1 + pivots2
    if status == "unbounded":
        return LpSolution("unbounded", None, -math.inf, iterations, lp.names)

    x_std = np.zeros(n)
    x_std[basis] = T2[:, -1]
    # Refresh basic values against the original data to shed pivot drift.
    if basis:
        A_orig = np.hstack([lp.A, -lp.A[:, free_idx]]) if free_idx else lp.A
        rows = _independent_rows(A_orig, len(basis))
        if rows is not None:
            try:
                refined = np.linalg.solve(A_orig[np.ix_(rows, basis)], lp.b[rows])
                if np.min(refined) >= -BOUND_TOL:
                    x_std[basis] = refined
            except np.linalg.LinAlgError:
                pass
    x = _merge_free(x_std, lp.n_vars, free_idx)
    eq_res = float(np.max(np.abs(lp.A @ x - lp.b))) if lp.n_rows else 0.0
    bound_violation = float(max(0.0, -np.min(np.where(lp.free, 0.0, x)))) if n else 0.0
    objective = float(lp.c @ x)
    return LpSolution("optimal", x, objective, iterations, lp.names, eq_res, bound_violation)


def _independent_rows(A: np.ndarray, count: int) -> list[int] | None:
    """First ``count`` rows of A forming an independent set, by Gaussian elimination."""
    M = A.copy()
    m = M.shape[0]
    chosen: list[int] = []
    used = np.zeros(m, dtype=bool)
    for _ in range(count):
        best_row, best_val, best_col = -1, 0.0, -1
        for r in range(m):
            if used[r]:
                continue
            j = int(np.argmax(np.abs(M[r])))
            v = abs(M[r, j])
            if v > best_val:
                best_row, best_val, best_col = r, v, j
        if best_val <= 1e-10:
            return None
        used[best_row] = True
        chosen.append(best_row)
        piv = M[best_row] / M[best_row, best_col]
        for r in range(m):
            if not used[r]:
                M[r] -= M[r, best_col] * piv
    return sorted(chosen)


def _reduce_system(A: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, bool]:
    """Row-reduce [A|b]; returns an equivalent full-row-rank system and consistency."""
    M = np.hstack([A, b[:, None]]).astype(float)
    m, ncol = M.shape
    n = ncol - 1
    rank = 0
    for col in range(n):
        if rank >= m:
            break
        piv = rank + int(np.argmax(np.abs(M[rank:, col])))
        if abs(M[piv, col]) <= tol:
            continue
        M[[rank, piv]] = M[[piv, rank]]
        M[rank] = M[rank] / M[rank, col]
        others = [r for r in range(m) if r != rank]
        if others:
            M[others] -= np.outer(M[others, col], M[rank])
        rank += 1
    for r in range(rank, m):
        if np.max(np.abs(M[r, :n]), initial=0.0) <= tol and abs(M[r, n]) > 1e-7:
            return M[:rank, :n], M[:rank, n], False
    return M[:rank, :n], M[:rank, n], True


def _scan_bases(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    collect: bool,
    feas_tol: float = 1e-9,
    chunk: int = 20_000,
):
    """Visit every column basis of the reduced system in lexicographic order.

    Returns (best_obj, best_x, vertices, unbounded) where vertices is filled
    only when ``collect`` is set and best_x is None when nothing is feasible.
    """
    r, n = A.shape
    best_obj = math.inf
    best_x: np.ndarray | None = None
    vertices: list[np.ndarray] = []
    unbounded = False

    if r == 0:
        x = np.zeros(n)
        if collect:
            vertices.append(x)
        return 0.0, x, vertices, bool(np.any(c < -1e-7))

    b_scale = max(1.0, float(np.max(np.abs(b))))
    combos = itertools.combinations(range(n), r)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        B = np.array(block, dtype=np.int64)                     # (k, r)
        AB = np.transpose(A[:, B], (1, 0, 2))                   # (k, r, r)
        sign, _ = np.linalg.slogdet(AB)
        ok = np.nonzero(sign != 0)[0]
        if ok.size == 0:
            continue
        rhs = np.concatenate([b[:, None], A], axis=1)           # (r, 1 + n)
        sol = np.linalg.solve(AB[ok], np.broadcast_to(rhs, (ok.size, r, 1 + n)))
        xB = sol[:, :, 0]
        D = sol[:, :, 1:]
        residual = np.abs(np.einsum("kij,kj->ki", AB[ok], xB) - b).max(axis=1)
        good = residual <= 1e-6 * b_scale

        cB = c[B[ok]]
        reduced = c[None, :] - np.einsum("ki,kij->kj", cB, D)
        nonbasic = np.ones((ok.size, n), dtype=bool)
        nonbasic[np.arange(ok.size)[:, None], B[ok]] = False
        ray = (D <= 1e-9).all(axis=1) & nonbasic & (reduced < -1e-7)
        if np.any(ray.any(axis=1) & good):
            unbounded = True

        feas = good & (xB.min(axis=1) >= -feas_tol)
        idx = np.nonzero(feas)[0]
        if idx.size == 0:
            continue
        objs = np.einsum("ki,ki->k", cB[idx], xB[idx])
        if collect:
            for k in idx:
                x = np.zeros(n)
                x[B[ok[k]]] = xB[k]
                vertices.append(x)
        k_best = int(idx[np.argmin(objs)])
        obj = float(objs[np.argmin(objs)])
        if obj < best_obj:
            best_obj = obj
            best_x = np.zeros(n)
            best_x[B[ok[k_best]]] = xB[k_best]
    return best_obj, best_x, vertices, unbounded


def enumerate_vertices(lp: LinearProgram, max_vars: int = 16) -> LpSolution:
    """Exhaustive oracle: best basic feasible solution over all bases.

    Independent of :func:`solve_lp` except for the shared free-variable
    splitting.  Unboundedness is detected from basic recession directions.
    The guard rejects problems with more than ``max_vars`` columns after
    splitting (default 16; callers may raise it for batch-verified sizes).
    """
    c, A, b, free_idx = _split_free(lp)
    if A.shape[1] > max_vars:
        raise VertexGuardError(f"{A.shape[1]} columns exceed the enumeration guard {max_vars}")
    Ared, bred, consistent = _reduce_system(A, b)
    if not consistent:
        return LpSolution("infeasible", None, math.nan, 0, lp.names)
    best_obj, best_x, _, unbounded = _scan_bases(Ared, bred, c, collect=False)
    if best_x is None:
        return LpSolution("infeasible", None, math.nan, 0, lp.names)
    if unbounded:
        return LpSolution("unbounded", None, -math.inf, 0, lp.names)
    x = _merge_free(best_x, lp.n_vars, free_idx)
    eq_res = float(np.max(np.abs(lp.A @ x - lp.b))) if lp.n_rows else 0.0
    return LpSolution("optimal", x, float(lp.c @ x), 0, lp.names, eq_res, 0.0)


def basic_feasible_solutions(lp: LinearProgram, max_vars: int = 16) -> list[np.ndarray]:
    """All basic feasible solutions, in original variable space, without dedup."""
    c, A, b, free_idx = _split_free(lp)
    if A.shape[1] > max_vars:
        raise VertexGuardError(f"{A.shape[1]} columns exceed the enumeration guard {max_vars}")
    Ared, bred, consistent = _reduce_system(A, b)
    if not consistent:
        return []
    _, _, vertices, _ = _scan_bases(Ared, bred, c, collect=True)
    return [_merge_free(v, lp.n_vars, free_idx) for v in vertices]


def dump_lp(lp: LinearProgram) -> str:
    """Deterministic text rendering of an LP for diffing and debugging."""
    lines = ["minimize:"]
    terms = [f"{lp.c[j]:+.12g} {lp.names[j]}" for j in range(lp.n_vars) if lp.c[j] != 0]
    lines.append("  " + (" ".join(terms) if terms else "0"))
    lines.append("subject to:")
    for i in range(lp.n_rows):
        row = [f"{lp.A[i, j]:+.12g} {lp.names[j]}" for j in range(lp.n_vars) if lp.A[i, j] != 0]
        lines.append(f"  row{i}: " + (" ".join(row) if row else "0") + f" = {lp.b[i]:.12g}")
    lines.append("bounds:")
    for j in range(lp.n_vars):
        lines.append(f"  {lp.names[j]} {'free' if lp.free[j] else '>= 0'}")
    return "\n".join(lines) + "\n"
