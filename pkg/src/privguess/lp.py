"""Small dense two-phase simplex solver.

Built for the tradeoff oracle: a handful of rows (one per output symbol plus
the privacy constraint) and up to tens of thousands of columns. The entering
column is the one with the largest reduced cost; after a run of degenerate
pivots the solver falls back to Bland's rule, which cannot cycle. Once the
final basis is known, the basic solution is recomputed from the original
data with a direct solve, so tableau drift does not reach the reported
primal values.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclasses.dataclass(frozen=True)
class LpResult:
    status: LpStatus
    x: np.ndarray | None
    value: float
    iterations: int


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], tol: float):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def set_objective(self, c: np.ndarray):
        # last row holds reduced costs c_j - z_j (to be maximized) and -z in the rhs
        m = len(self.basis)
        row = np.zeros(self.T.shape[1])
        row[: c.size] = c
        for i, j in enumerate(self.basis):
            if row[j] != 0.0:
                row -= row[j] * self.T[i]
        self.T[m] = row

    def pivot(self, r: int, j: int):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int, bland_after: int = 50) -> LpStatus:
        T, tol = self.T, self.tol
        m = len(self.basis)
        degenerate = 0
        for _ in range(max_iter):
            reduced = np.where(allowed, T[m, :-1], 0.0)
            candidates = np.flatnonzero(reduced > tol)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            if degenerate >= bland_after:
                j = int(candidates[0])
            else:
                j = int(np.argmax(reduced))
            col = T[:m, j]
            rows = np.flatnonzero(col > tol)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            degenerate = degenerate + 1 if best <= tol else 0
            self.pivot(r, j)
        raise RuntimeError(f"simplex did not converge in {max_iter} pivots")


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = 1e-11,
            max_iter: int = 50_000) -> LpResult:
    """Maximize ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    blocks, rhs = [], []
    n_ub = 0
    if A_ub is not None:
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        n_ub = A_ub.shape[0]
        blocks.append(np.hstack([A_ub, np.eye(n_ub)]))
        rhs.append(np.asarray(b_ub, dtype=float).ravel())
    if A_eq is not None:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        blocks.append(np.hstack([A_eq, np.zeros((A_eq.shape[0], n_ub))]))
        rhs.append(np.asarray(b_eq, dtype=float).ravel())
    if not blocks:
        raise ValueError("simplex needs at least one constraint")
    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    m, n_std = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A, b = A * sign[:, None], b * sign

    # phase I: one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    tab = _Tableau(A1, b, list(range(n_std, n_std + m)), tol)
    c1 = np.concatenate([np.zeros(n_std), -np.ones(m)])
    tab.set_objective(c1)
    tab.run(np.ones(n_std + m, dtype=bool), max_iter)
    infeas = tab.T[m, -1]  # -z, the artificial mass left
    if infeas > 1e-9 * max(1.0, np.abs(b).max()):
        return LpResult(LpStatus.INFEASIBLE, None, float("nan"), tab.iterations)

    # drive remaining artificials out of the basis; rows with nothing to pivot on are redundant
    keep = []
    for r in range(m):
        if tab.basis[r] < n_std:
            keep.append(r)
            continue
        nz = np.flatnonzero(np.abs(tab.T[r, :n_std]) > 1e-9)
        if nz.size:
            tab.pivot(r, int(nz[0]))
            keep.append(r)
    if len(keep) < m:
        rows = keep + [m]
        tab.T = tab.T[rows]
        tab.basis = [tab.basis[r] for r in keep]
        A, b = A[keep], b[keep]
        m = len(keep)

    allowed = np.concatenate([np.ones(n_std, dtype=bool), np.zeros(tab.T.shape[1] - 1 - n_std, dtype=bool)])
    c_std = np.concatenate([c, np.zeros(n_std - n)])
    tab.set_objective(c_std)
    status = tab.run(allowed, max_iter)
    if status is LpStatus.UNBOUNDED:
        return LpResult(status, None, float("inf"), tab.iterations)

    x = np.zeros(n_std)
    basis = np.array(tab.basis)
    B = A[:, basis]
    try:
        xb = np.linalg.solve(B, b)
    except np.linalg.LinAlgError:
        xb = tab.T[:m, -1]
    x[basis] = np.clip(xb, 0.0, None)
    return LpResult(LpStatus.OPTIMAL, x[:n], float(c @ x[:n]), tab.iterations)
