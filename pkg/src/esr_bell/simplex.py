"""Dense phase-I simplex for feasibility of  A x = b,  x >= 0.

Uses Bland's smallest-index rule for both the entering and the leaving
variable, so the method terminates on degenerate problems.  On
infeasibility the final simplex multipliers form a Farkas certificate
y with  y^T A <= 0  and  y^T b > 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverStall(RuntimeError):
    """The solver could not classify the system as feasible or infeasible."""


@dataclass
class PhaseOneResult:
    feasible: bool
    x: np.ndarray | None
    certificate: np.ndarray | None
    objective: float
    iterations: int


def independent_rows(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal linearly independent subset of the rows of A,
    chosen greedily in row order by Gram-Schmidt."""
    basis: list[np.ndarray] = []
    keep = []
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    for i, row in enumerate(np.asarray(A, dtype=float)):
        v = row.copy()
        for q in basis:
            v -= (q @ v) * q
        # second pass keeps the orthogonalization accurate
        for q in basis:
            v -= (q @ v) * q
        n = np.linalg.norm(v)
        if n > tol * scale:
            basis.append(v / n)
            keep.append(i)
    return np.array(keep, dtype=int)


def farkas_holds(A: np.ndarray, b: np.ndarray, y: np.ndarray, tol: float) -> bool:
    return bool(np.all(y @ A <= tol) and y @ b > tol)


def phase_one(A: np.ndarray, b: np.ndarray, tol: float = 1e-9,
              max_iter: int = 50_000) -> PhaseOneResult:
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape

    sign = np.where(b < 0, -1.0, 1.0)
    A_s = A * sign[:, None]
    b_s = b * sign

    # tableau columns: n structural, m artificial, then rhs
    T = np.zeros((m, n + m + 1))
    T[:, :n] = A_s
    T[:, n:n + m] = np.eye(m)
    T[:, -1] = b_s
    cost = np.zeros(n + m)
    cost[n:] = 1.0
    basis = list(range(n, n + m))
    pivot_tol = tol

    it = 0
    while True:
        c_b = cost[basis]
        reduced = cost - c_b @ T[:, :-1]
        candidates = np.nonzero(reduced < -tol)[0]
        if candidates.size == 0:
            break
        if it >= max_iter:
            raise SolverStall(f"no convergence after {max_iter} pivots")
        j = int(candidates[0])
        col = T[:, j]
        rows = np.nonzero(col > pivot_tol)[0]
        if rows.size == 0:
            # phase I is bounded below by 0, so this is numerical trouble
            raise SolverStall(f"unbounded direction in phase I at column {j}")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        T[r] /= T[r, j]
        others = np.arange(m) != r
        T[others] -= np.outer(T[others, j], T[r])
        basis[r] = j
        it += 1

    # recompute from the original data so accumulated pivot error is dropped
    full = np.hstack([A_s, np.eye(m)])
    B = full[:, basis]
    try:
        x_b = np.linalg.solve(B, b_s)
        y_s = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError as exc:
        raise SolverStall(f"singular final basis: {exc}") from exc
    z = np.zeros(n + m)
    z[basis] = x_b
    objective = float(z[n:].sum())

    if objective <= tol:
        x = np.clip(z[:n], 0.0, None)
        return PhaseOneResult(True, x, None, objective, it)

    # optimal multipliers y_s satisfy y_s^T A_s <= 0, y_s^T b_s = objective
    y = y_s * sign
    y = y / max(1.0, float(np.abs(y).max()))
    if farkas_holds(A, b, y, tol):
        return PhaseOneResult(False, None, y, objective, it)
    raise SolverStall(
        f"phase I ended with objective {objective:.3e} but the certificate fails "
        f"(max y^T A = {float((y @ A).max()):.3e}, y^T b = {float(y @ b):.3e})")
