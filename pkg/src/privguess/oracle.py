"""Independent numerical ground truth for the discrete tradeoffs.

Two routes, neither of which uses any closed form:

* ``oracle_h`` writes ``(P_c(X|Z), P_c(Y|Z))`` as a mixture of per-posterior
  scores. Every output symbol ``z`` contributes its posterior
  ``q' = P_{Y|Z}(.|z)`` with weight ``P_Z(z)``. The mixture must average
  back to ``q_Y``, so maximizing utility under the privacy budget becomes a
  linear program over a set of candidate posteriors. Both scores are
  piecewise linear, and any posterior inside a cell where they are linear
  splits into the cell's vertices without changing either average. The
  vertices of that cell arrangement are always added to the uniform grid,
  which makes the LP value exact up to floating point. With ``vertices=False``
  the pure grid gives a lower bound that tightens as the resolution grows.
* ``random_filter_search`` and ``oracle_underline_h`` sample row-stochastic
  filters directly and refine the best one by coordinate ascent. Because the
  square-filter problem is not concave, these are search heuristics: they
  give achievable values, not certified maxima.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import itertools
import math
import os
from typing import Callable, Sequence

import numpy as np

from privguess import core
from privguess.core import Channel, JointPmf
from privguess.errors import ValidationError
from privguess.lp import LpStatus, simplex
from privguess.scalar import Regime, TradeoffCurve, TradeoffPoint

MAX_ORACLE_N = 6


def default_resolution(n_symbols: int) -> int:
    if n_symbols <= 2:
        return 256
    if n_symbols <= 4:
        return 64
    return 24


def worker_count() -> int:
    """Thread cap from ``PRIVGUESS_THREADS`` (default: CPU count)."""
    raw = os.environ.get("PRIVGUESS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValidationError(f"PRIVGUESS_THREADS={raw!r} is not an integer") from None
    return os.cpu_count() or 1


def task_seed(seed: int, index: int) -> int:
    """Seed for the ``index``-th task of a batch; serial and parallel runs share it."""
    return int(seed) ^ int(index)


# -- posterior grid ---------------------------------------------------------


def simplex_grid(n_symbols: int, resolution: int) -> np.ndarray:
    """All probability vectors with denominator ``resolution`` (compositions)."""
    G, N = resolution, n_symbols
    if N == 1:
        return np.ones((1, 1))
    # stars and bars: choose N-1 bar positions among G+N-1 slots
    bars = np.array(list(itertools.combinations(range(G + N - 1), N - 1)), dtype=np.int64)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), G + N - 1)])
    counts = np.diff(edges, axis=1) - 1
    return counts / G


def cell_vertices(back: np.ndarray, chunk: int = 20_000) -> np.ndarray:
    """Vertices of the cells on which ``s`` and ``t`` are both linear.

    ``back`` is ``P_{X|Y}`` restricted to the support of ``Y``. Candidates are
    intersections of ``N - 1`` hyperplanes of the form ``s_x = s_x'``,
    ``q'(y) = q'(y')`` or ``q'(y) = 0`` with the unit-sum plane; those inside
    the simplex are kept. Extra points are harmless to the LP, and every
    true vertex is among the candidates.
    """
    M, N = back.shape
    if N == 1:
        return np.ones((1, 1))
    eye = np.eye(N)
    planes = [back[a] - back[b] for a, b in itertools.combinations(range(M), 2)]
    planes += [eye[a] - eye[b] for a, b in itertools.combinations(range(N), 2)]
    planes += list(eye)
    H = np.array([h for h in planes if np.abs(h).max() > 1e-12])
    combos = np.array(list(itertools.combinations(range(H.shape[0]), N - 1)), dtype=np.int64)
    rhs = np.zeros(N)
    rhs[-1] = 1.0
    found = []
    for start in range(0, combos.shape[0], chunk):
        A = np.concatenate([H[combos[start:start + chunk]],
                            np.ones((min(chunk, combos.shape[0] - start), 1, N))], axis=1)
        det = np.linalg.det(A)
        A = A[np.abs(det) > 1e-10]
        if A.shape[0] == 0:
            continue
        sol = np.linalg.solve(A, np.broadcast_to(rhs, (A.shape[0], N))[..., None])[..., 0]
        sol = sol[np.all(sol >= -1e-10, axis=1)]
        found.append(np.clip(sol, 0.0, None))
    pts = np.vstack(found)
    pts /= pts.sum(axis=1, keepdims=True)
    return np.unique(np.round(pts, 12), axis=0)


@dataclasses.dataclass(frozen=True, eq=False)
class PosteriorGrid:
    """Candidate posteriors ``q'`` over the support of ``Y`` with their scores.

    ``s = max_x sum_y P(x|y) q'(y)`` is the guessing probability of ``X`` under
    ``q'`` and ``t = max_y q'(y)`` that of ``Y``. Besides the uniform grid, the
    prior ``q_Y`` itself is appended so that the perfect-privacy end of the
    domain stays feasible at every resolution, and (by default) the cell
    vertices from :func:`cell_vertices`.
    """

    resolution: int
    points: np.ndarray
    s: np.ndarray
    t: np.ndarray
    support: np.ndarray

    @classmethod
    def build(cls, joint: JointPmf, resolution: int, vertices: bool = True) -> "PosteriorGrid":
        q = joint.q_y
        support = np.flatnonzero(q > 0)
        back = joint.backward_channel()[:, support]
        parts = [simplex_grid(support.size, resolution), q[support][None] / q[support].sum()]
        if vertices:
            parts.append(cell_vertices(back))
        pts = np.vstack(parts)
        s = (pts @ back.T).max(axis=1)
        t = pts.max(axis=1)
        return cls(resolution, pts, s, t, support)

    def __len__(self):
        return self.points.shape[0]


@dataclasses.dataclass(frozen=True)
class LpSolution:
    value: float
    weights: tuple[tuple[int, float], ...]
    status: LpStatus
    privacy: float = float("nan")
    grid: PosteriorGrid | None = dataclasses.field(default=None, repr=False, compare=False)


def _check_oracle_size(joint: JointPmf):
    if joint.N > MAX_ORACLE_N:
        raise ValidationError(f"oracle supports N <= {MAX_ORACLE_N}, got N={joint.N}")


def oracle_h(joint: JointPmf, eps: float, resolution: int | None = None,
             grid: PosteriorGrid | None = None, vertices: bool = True) -> LpSolution:
    """LP value of ``h(eps)``: exact with cell vertices, a lower bound without.

    Thresholds below ``P_c(X)`` give an ``INFEASIBLE`` status.
    """
    _check_oracle_size(joint)
    if grid is None:
        resolution = resolution or default_resolution(joint.N)
        if resolution < 2:
            raise ValidationError("resolution must be at least 2")
        grid = PosteriorGrid.build(joint, resolution, vertices)
    q = joint.q_y[grid.support]
    res = simplex(grid.t, A_ub=grid.s[None, :], b_ub=[eps], A_eq=grid.points.T, b_eq=q)
    if res.status is not LpStatus.OPTIMAL:
        return LpSolution(float("nan"), (), res.status, grid=grid)
    nz = np.flatnonzero(res.x > 0)
    weights = tuple((int(i), float(res.x[i])) for i in nz)
    return LpSolution(float(res.value), weights, LpStatus.OPTIMAL, float(grid.s @ res.x), grid)


def filter_from_solution(joint: JointPmf, sol: LpSolution, min_weight: float = 1e-12) -> Channel:
    """Rebuild a filter realizing an LP mixture by Bayes inversion.

    Each kept grid point becomes one output symbol ``z`` with ``P_Z(z) = w``
    and ``P_{Y|Z}(.|z) = q'``; inverting against ``q_Y`` gives ``P_{Z|Y}``.
    Inputs outside the support of ``Y`` are sent to the first symbol.
    """
    grid = sol.grid
    kept = [(i, w) for i, w in sol.weights if w >= min_weight]
    if grid is None or not kept:
        raise ValidationError("solution carries no usable weights")
    idx = np.array([i for i, _ in kept])
    w = np.array([w for _, w in kept])
    q = joint.q_y
    rows = np.zeros((joint.N, idx.size))
    sup = grid.support
    rows[sup] = (grid.points[idx] * w[:, None]).T / q[sup, None]
    rows[sup] /= rows[sup].sum(axis=1, keepdims=True)
    outside = np.setdiff1d(np.arange(joint.N), sup)
    rows[outside, 0] = 1.0
    return Channel(rows)


def oracle_curve(joint: JointPmf, num_points: int = 21, resolution: int | None = None,
                 workers: int | None = None, vertices: bool = True) -> TradeoffCurve:
    """LP oracle sampled on a uniform threshold grid over ``[P_c(X), P_c(X|Y)]``."""
    _check_oracle_size(joint)
    lo, hi = core.pc_marginal(joint.p_x), core.pc_conditional(joint)
    if hi - lo <= 1e-12:
        return TradeoffCurve((TradeoffPoint(lo, 1.0, source="lp"),), (lo, hi))
    grid = PosteriorGrid.build(joint, resolution or default_resolution(joint.N), vertices)
    eps_values = np.linspace(lo, hi, num_points)

    def solve(e):
        return oracle_h(joint, float(e), grid=grid)

    workers = min(worker_count() if workers is None else workers, num_points)
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            sols = list(pool.map(solve, eps_values))
    else:
        sols = [solve(e) for e in eps_values]
    pts = tuple(TradeoffPoint(float(e), s.value, None, Regime.ORACLE, source="lp")
                for e, s in zip(eps_values, sols))
    return TradeoffCurve(pts, (lo, hi))


# -- filter search ----------------------------------------------------------


def _privacy_utility(P: np.ndarray, q: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched privacy and utility for filters ``F`` of shape ``(B, N, K)``."""
    xz = np.einsum("xy,byz->bxz", P, F)
    privacy = xz.max(axis=1).sum(axis=1)
    utility = (q[None, :, None] * F).max(axis=1).sum(axis=1)
    return privacy, utility


def _dirichlet_rows(rng: np.random.Generator, count: int, N: int, K: int) -> np.ndarray:
    e = rng.standard_exponential((count, N, K))
    return e / e.sum(axis=2, keepdims=True)


class _Problem:
    def __init__(self, joint: JointPmf, eps: float, K: int, fallback: int):
        self.P = joint.probs
        self.q = joint.q_y
        self.eps = eps
        self.K = K
        self.C = np.zeros((joint.N, K))
        self.C[:, fallback] = 1.0

    def project(self, F: np.ndarray, iters: int = 60) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Mix each filter with the constant filter just enough to meet the budget.

        Leakage is convex along the segment and equals ``P_c(X)`` at the
        constant end, so the feasible part of the segment is an interval
        ``[0, lam*]`` found by bisection.
        """
        priv, util = _privacy_utility(self.P, self.q, F)
        ok = priv <= self.eps
        lam = np.where(ok, 1.0, 0.0)
        todo = ~ok
        if todo.any():
            lo = np.zeros(todo.sum())
            hi = np.ones(todo.sum())
            Ft = F[todo]
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                Fm = mid[:, None, None] * Ft + (1 - mid)[:, None, None] * self.C
                pm, _ = _privacy_utility(self.P, self.q, Fm)
                good = pm <= self.eps
                lo = np.where(good, mid, lo)
                hi = np.where(good, hi, mid)
            lam[todo] = lo
        G = lam[:, None, None] * F + (1 - lam)[:, None, None] * self.C
        priv, util = _privacy_utility(self.P, self.q, G)
        return G, priv, util


def _ascend(prob: _Problem, F: np.ndarray, util: float, steps: Sequence[float]) -> tuple[np.ndarray, float]:
    N, K = F.shape
    moves = [(y, a, b) for y in range(N) for a in range(K) for b in range(K) if a != b]
    for delta in steps:
        while True:
            cand = np.repeat(F[None], len(moves), axis=0)
            for m, (y, a, b) in enumerate(moves):
                d = min(delta, cand[m, y, a])
                cand[m, y, a] -= d
                cand[m, y, b] += d
            G, priv, u = prob.project(cand)
            best = int(np.argmax(u))
            if u[best] <= util + 1e-13:
                break
            F, util = G[best], float(u[best])
    return F, util


_STEPS = (0.2, 0.05, 0.01, 2e-3, 5e-4, 1e-4, 2e-5)


def _search(joint: JointPmf, eps: float, budget: int, seed: int, K: int, fallback: int,
            seeds: list[np.ndarray], starts: int = 8) -> tuple[np.ndarray, float, float]:
    if budget < 1:
        raise ValidationError("budget must be at least 1")
    prob = _Problem(joint, eps, K, fallback)
    rng = np.random.default_rng(seed)
    cands = [np.stack(seeds)] if seeds else []
    cands.append(_dirichlet_rows(rng, budget, joint.N, K))
    pool_F, pool_u = [], []
    for block in cands:
        for start in range(0, block.shape[0], 4096):
            G, _, u = prob.project(block[start:start + 4096])
            top = np.argsort(-u, kind="stable")[:starts]
            pool_F.extend(G[top])
            pool_u.extend(u[top])
    order = np.argsort(-np.array(pool_u), kind="stable")[:starts]
    best_F, best_u = None, -np.inf
    for i in order:
        F, u = _ascend(prob, pool_F[i], float(pool_u[i]), _STEPS)
        if u > best_u + 1e-13:
            best_F, best_u = F, u
    priv, util = _privacy_utility(prob.P, prob.q, best_F[None])
    return best_F, float(priv[0]), float(util[0])


def random_filter_search(joint: JointPmf, eps: float, budget: int = 2000, seed: int = 0) -> TradeoffPoint:
    """Best utility found among random ``N x (N+1)`` filters meeting the budget.

    The identity (padded with an unused spare output) and the constant filter
    are always among the candidates. Deterministic for a fixed seed.
    """
    N = joint.N
    ident = np.hstack([np.eye(N), np.zeros((N, 1))])
    const = np.zeros((N, N + 1))
    const[:, N] = 1.0
    F, priv, util = _search(joint, float(eps), budget, seed, N + 1, N, [ident, const])
    return TradeoffPoint(float(eps), util, Channel(F), Regime.ORACLE, achieved=priv <= eps + 1e-12,
                         source="search")


def _nary_z_candidates(joint: JointPmf, eps: float, gamma_points: int = 201) -> list[np.ndarray]:
    """For every ``(y0, z0)``, the N-ary Z-channel with the smallest feasible crossover."""
    N = joint.N
    P, q = joint.probs, joint.q_y
    gammas = np.linspace(0.0, 1.0, gamma_points)
    out = []
    for y0, z0 in itertools.permutations(range(N), 2):
        def family(g):
            F = np.repeat(np.eye(N)[None], len(g), axis=0)
            F[:, y0, y0] = 1.0 - g
            F[:, y0, z0] = g
            return F
        priv, _ = _privacy_utility(P, q, family(gammas))
        feas = np.flatnonzero(priv <= eps)
        if feas.size == 0:
            continue
        k = int(feas[0])
        if k == 0:
            out.append(family(gammas[:1])[0])
            continue
        lo, hi = gammas[k - 1], gammas[k]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            pm, _ = _privacy_utility(P, q, family(np.array([mid])))
            lo, hi = (lo, mid) if pm[0] <= eps else (mid, hi)
        out.append(family(np.array([hi]))[0])
        out.extend(family(gammas[feas[1:]]))
    return out


def oracle_underline_h(joint: JointPmf, eps: float, budget: int = 2000, seed: int = 0) -> TradeoffPoint:
    """Search estimate of the restricted tradeoff (square filters only).

    N-ary Z-channels with the smallest feasible crossover are always seeded,
    so wherever one of them is optimal the search reproduces it.
    """
    N = joint.N
    fallback = int(np.argmax(joint.q_y))
    const = np.zeros((N, N))
    const[:, fallback] = 1.0
    seeds = [np.eye(N), const] + _nary_z_candidates(joint, float(eps))
    F, priv, util = _search(joint, float(eps), budget, seed, N, fallback, seeds)
    return TradeoffPoint(float(eps), util, Channel(F), Regime.ORACLE, achieved=priv <= eps + 1e-12,
                         source="search")


def locate_linear_regime(formula: Callable[[float], float], oracle: Callable[[float], float],
                         eps_values: Sequence[float], tol: float) -> float:
    """Smallest threshold down to which ``formula`` and ``oracle`` agree within ``tol``.

    ``eps_values`` are scanned from the largest downward; the scan stops at
    the first disagreement (or the first point where ``formula`` raises).
    """
    ordered = sorted((float(e) for e in eps_values), reverse=True)
    last = ordered[0]
    for e in ordered:
        try:
            f = formula(e)
        except Exception:
            break
        if not math.isfinite(f) or abs(f - oracle(e)) > tol:
            break
        last = e
    return last


def search_points(joint: JointPmf, eps_values: Sequence[float], budget: int, seed: int,
                  restricted: bool = False, workers: int | None = None) -> list[TradeoffPoint]:
    """Filter search at each threshold; task ``i`` is seeded with ``seed ^ i``.

    Results do not depend on the worker count.
    """
    search = oracle_underline_h if restricted else random_filter_search
    jobs = list(enumerate(float(e) for e in eps_values))

    def run(job):
        i, e = job
        return search(joint, e, budget, task_seed(seed, i))

    workers = min(worker_count() if workers is None else workers, max(len(jobs), 1))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]
