"""Tradeoffs for binary vectors observed through a memoryless BSC.

Three sources are covered:

* i.i.d. ``X^n`` with ``X_k ~ Bernoulli(p)``;
* a binary Markov chain with flip probability ``r``;
* a single hidden parameter ``theta`` repeated ``n`` times (``r = 0``).

Vectors are stored by integer encoding, with coordinate ``k`` (counting from
0) in bit ``k``. The all-ones vector is therefore index ``2^n - 1``.

Thresholds and utilities are per-symbol throughout: a vector tradeoff
``h_n(eps)`` is the ``n``-th root of the best ``P_c(Y^n|Z^n)`` subject to
``P_c(X^n|Z^n) <= eps^n``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from privguess import core
from privguess.core import Channel, JointPmf
from privguess.errors import CertificateError, RegimeError, ValidationError
from privguess.scalar import CERT_TOL, DOMAIN_TOL, Regime, TradeoffCurve, TradeoffPoint, _check_eps, nary_z_limit

# Closed forms only need scalars, so they accept longer vectors than tables do.
MAX_CLOSED_FORM_N = 20
# Above this many bits the Z_n certificate uses the column-update evaluation.
DENSE_CERT_BITS = 6
# Memoryless filters are certified on the full tensor product up to this length.
TENSOR_CERT_N = 4


def _check_n(n: int, odd: bool = False) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValidationError(f"n={n!r} must be a positive integer")
    n = int(n)
    if n > MAX_CLOSED_FORM_N:
        raise ValidationError(f"n={n} exceeds the closed-form cap {MAX_CLOSED_FORM_N}")
    if odd and n % 2 == 0:
        raise ValidationError(f"n={n} must be odd")
    return n


def _check_table_n(n: int):
    if n > core.MAX_BITS:
        raise ValidationError(f"n={n} exceeds the table cap {core.MAX_BITS} (2^n x 2^n entries)")


def _check_p(p: float):
    if not 0.5 <= p < 1.0:
        raise ValidationError(f"p={p!r} must lie in [0.5, 1)")


def _bits(n: int) -> np.ndarray:
    """``(2^n, n)`` array with row ``i`` holding the bits of ``i``, LSB first."""
    idx = np.arange(1 << n)
    return (idx[:, None] >> np.arange(n)) & 1


def _hamming(n: int) -> np.ndarray:
    b = _bits(n)
    return (b[:, None, :] != b[None, :, :]).sum(axis=2)


def _bsc_block(n: int, alpha: float) -> np.ndarray:
    """``P(y^n | x^n)`` for a memoryless BSC, as a ``2^n x 2^n`` table."""
    d = _hamming(n)
    if alpha == 0.0:
        return (d == 0).astype(float)
    return alpha ** d * (1.0 - alpha) ** (n - d)


def _certify_z2n(joint: JointPmf, n: int, gamma: float, privacy: float, utility: float) -> bool:
    size = 1 << n
    if n <= DENSE_CERT_BITS:
        pair = core.evaluate_filter(joint, core.z2n_channel(gamma, n))
    else:
        pair = core.evaluate_nary_z(joint, size - 1, 0, gamma)
    return abs(pair.privacy - privacy) <= CERT_TOL and abs(pair.utility - utility) <= CERT_TOL


def z2n_certified_threshold(joint: JointPmf, n: int) -> float:
    """Per-symbol threshold down to which ``Z_n`` delivers its affine formulas on ``joint``.

    Evaluates ``Z_n`` at the crossover limit of :func:`privguess.scalar.nary_z_limit`.
    """
    ones = joint.N - 1
    gamma = nary_z_limit(joint, ones, 0)
    return core.evaluate_nary_z(joint, ones, 0, gamma).privacy ** (1.0 / n)


def _z2n_filter(n: int, gamma: float) -> Channel | None:
    # Materializing the 2^n x 2^n filter is only worthwhile for small n.
    return core.z2n_channel(gamma, n) if n <= DENSE_CERT_BITS else None


# -- i.i.d. source ----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class IidModel:
    """``n`` i.i.d. ``Bernoulli(p)`` bits observed through ``BSC(alpha)``.

    The closed forms need ``1 - alpha > p``: the observation must be more
    reliable than the prior guess.
    """

    n: int
    p: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "n", _check_n(self.n))
        _check_p(self.p)
        if not 0.0 <= self.alpha < 0.5:
            raise ValidationError(f"alpha={self.alpha!r} must lie in [0, 0.5)")
        if not 1.0 - self.alpha > self.p:
            raise ValidationError(f"need 1 - alpha > p, got alpha={self.alpha!r}, p={self.p!r}")

    @property
    def abar(self) -> float:
        return 1.0 - self.alpha

    @property
    def q(self) -> float:
        """``P(Y_k = 1)``."""
        return self.alpha * (1 - self.p) + self.abar * self.p

    @property
    def domain(self) -> tuple[float, float]:
        """Per-symbol threshold range ``[P_c(X), P_c(X|Y)]``."""
        return self.p, self.abar

    def zeta_n(self, eps: float) -> float:
        a, ab, p, n = self.alpha, self.abar, self.p, self.n
        return (ab ** n - eps ** n) / ((ab * p) ** n - (a * (1 - p)) ** n)

    def zeta_limit(self) -> float:
        """Largest ``Z_n`` crossover for which the closed form is actually delivered.

        Moving mass from the all-ones column to the all-zeros column must not
        change the MAP guess in the all-zeros column, and that column must
        stay the better one for guessing ``Y^n``. Both conditions only depend
        on Hamming weights, so the limit is computed from ``n`` scalars.
        """
        a, ab, p, n = self.alpha, self.abar, self.p, self.n
        base = ((1 - p) * ab) ** n
        k = np.arange(1, n + 1)
        col0 = base * (p * a / ((1 - p) * ab)) ** k
        col1 = base * (p / (1 - p)) ** k * (a / ab) ** (n - k)
        p01 = ((1 - p) * a) ** n
        den = col1 - p01
        ok = den > 0
        ratios = (base - col0[ok]) / den[ok]
        limits = [1.0, ((1 - self.q) / self.q) ** n]
        if ratios.size:
            limits.append(float(ratios.min()))
        return min(limits)

    def certified_threshold(self) -> float:
        """Smallest per-symbol threshold at which ``Z_n`` achieves the closed form."""
        a, ab, p, n = self.alpha, self.abar, self.p, self.n
        span = (ab * p) ** n - (a * (1 - p)) ** n
        return (ab ** n - self.zeta_limit() * span) ** (1.0 / n)

    def phi(self, m: int) -> float:
        """Slope factor ``q^m abar^(m-1) / ((abar p)^m - (alpha pbar)^m)``."""
        a, ab, p = self.alpha, self.abar, self.p
        return self.q ** m * ab ** (m - 1) / ((ab * p) ** m - (a * (1 - p)) ** m)


def _factor(p: float, alpha: float) -> np.ndarray:
    return np.array([[(1 - p) * (1 - alpha), (1 - p) * alpha],
                     [p * alpha, p * (1 - alpha)]])


def tensor_joint(factors: Sequence[JointPmf]) -> JointPmf:
    """Joint of independent pairs; factor ``k`` occupies digit ``k`` (first is least significant)."""
    if not factors:
        raise ValidationError("need at least one factor")
    table = factors[0].probs
    for f in factors[1:]:
        table = np.kron(f.probs, table)
    return JointPmf(table)


def iid_joint(model: IidModel) -> JointPmf:
    _check_table_n(model.n)
    f = JointPmf(_factor(model.p, model.alpha))
    return tensor_joint([f] * model.n)


def pc_product(factors: Sequence[JointPmf]) -> float:
    """``P_c`` of a tensor-product joint from its factors alone."""
    if not factors:
        raise ValidationError("need at least one factor")
    return math.prod(core.pc_conditional(f) for f in factors)


def underline_h_n_iid_value(model: IidModel, eps: float) -> float:
    """The affine-in-``eps^n`` closed form, with no regime check.

    Meaningful as a tradeoff value only where :func:`underline_h_n_iid`
    succeeds; elsewhere it is the analytic continuation of that line.
    """
    u = 1.0 - model.zeta_n(eps) * model.q ** model.n
    return u ** (1.0 / model.n)


def underline_h_n_iid(model: IidModel, eps: float, certify: bool = True) -> TradeoffPoint:
    """Restricted vector tradeoff, achieved by ``Z_n`` with the closed-form crossover.

    Raises :class:`RegimeError` when the crossover would exceed 1. When
    ``certify`` is set (and ``n`` fits in a table) the filter is re-evaluated
    on the exact joint; ``achieved`` reports the outcome.
    """
    lo, hi = model.domain
    eps = _check_eps(eps, lo, hi)
    zeta = model.zeta_n(eps)
    if zeta > 1.0 + DOMAIN_TOL:
        raise RegimeError(f"eps={eps!r} is outside the certified regime (crossover {zeta:.6g} > 1)")
    zeta = min(max(zeta, 0.0), 1.0)
    n = model.n
    util_n = 1.0 - zeta * model.q ** n
    ok = None
    if certify and n <= core.MAX_BITS:
        ok = _certify_z2n(iid_joint(model), n, zeta, eps ** n, util_n)
    return TradeoffPoint(eps, util_n ** (1.0 / n), _z2n_filter(n, zeta), Regime.NARY_Z, float(zeta), ok, n)


def h_n_memoryless(model: IidModel, eps: float, certify: bool = True) -> TradeoffPoint:
    """Best tradeoff with the same binary filter applied to every coordinate.

    The value does not depend on ``n``. The returned filter is the
    single-letter Z-channel. For ``n <= 4`` the certificate evaluates its
    ``n``-fold tensor power on the full joint; beyond that it evaluates the
    single-letter pair, which suffices by the product law.
    """
    lo, hi = model.domain
    eps = _check_eps(eps, lo, hi)
    a, ab, p = model.alpha, model.abar, model.p
    zeta = (ab - eps) / (ab * p - a * (1 - p))
    value = 1.0 - zeta * model.q
    filt = core.z_channel(min(max(zeta, 0.0), 1.0))
    ok = None
    if certify:
        if model.n <= TENSOR_CERT_N:
            big = filt.rows
            for _ in range(model.n - 1):
                big = np.kron(filt.rows, big)
            pair = core.evaluate_filter(iid_joint(model), Channel(big))
            target = (eps ** model.n, value ** model.n)
        else:
            pair = core.evaluate_filter(JointPmf(_factor(p, a)), filt)
            target = (eps, value)
        ok = abs(pair.privacy - target[0]) <= CERT_TOL and abs(pair.utility - target[1]) <= CERT_TOL
    return TradeoffPoint(eps, value, filt, Regime.Z_CHANNEL, float(zeta), ok, model.n)


@dataclasses.dataclass(frozen=True)
class GapBounds:
    """Bounds on ``underline_h_n - h_n^i`` and the measured gap (if computable)."""

    lower: float
    upper: float | None
    gap: float | None


def gap_bounds(model: IidModel, eps: float, tol: float = 1e-9) -> GapBounds:
    """Bounds on the utility lost by restricting to memoryless filters.

    For ``p > 1/2`` the lower bound is ``(abar - eps)(phi(1) - phi(n))`` and
    there is no upper bound. For ``p = 1/2`` the gap lies in
    ``[0, alpha / (2 abar)]``. The measured gap is filled in where the
    restricted closed form is certified, and checked against the bounds.
    """
    lo, hi = model.domain
    eps = _check_eps(eps, lo, hi)
    if model.p == 0.5:
        lower, upper = 0.0, model.alpha / (2 * model.abar)
    else:
        lower, upper = (model.abar - eps) * (model.phi(1) - model.phi(model.n)), None
    if eps < model.certified_threshold() - DOMAIN_TOL:
        return GapBounds(lower, upper, None)
    restricted = underline_h_n_iid(model, eps, certify=False).utility
    gap = restricted - h_n_memoryless(model, eps, certify=False).utility
    if gap < lower - tol or (upper is not None and gap > upper + tol):
        raise CertificateError(f"gap {gap!r} violates bounds [{lower!r}, {upper!r}] at eps={eps!r}")
    return GapBounds(lower, upper, gap)


# -- Markov source ----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class MarkovModel:
    """Binary Markov chain ``X^n`` (start ``Bernoulli(p)``, flip probability ``r``)
    observed through a memoryless ``BSC(alpha)``.

    ``alpha = 0`` is accepted for building joints; the tradeoff operations
    need ``alpha > 0``.
    """

    n: int
    p: float
    alpha: float
    r: float

    def __post_init__(self):
        object.__setattr__(self, "n", _check_n(self.n, odd=True))
        _check_p(self.p)
        if not 0.0 <= self.alpha < 0.5:
            raise ValidationError(f"alpha={self.alpha!r} must lie in [0, 0.5)")
        if not 0.0 <= self.r < 0.5:
            raise ValidationError(f"r={self.r!r} must lie in [0, 0.5)")
        if not (1 - self.alpha) * (1 - self.p) > self.alpha * self.p:
            raise ValidationError("need (1 - alpha)(1 - p) > alpha p")

    @property
    def abar(self) -> float:
        return 1.0 - self.alpha

    @property
    def rbar(self) -> float:
        return 1.0 - self.r

    def check_hypothesis(self):
        """The closed forms need ``r / (1 - r) < (alpha / (1 - alpha))^(n - 1)``."""
        if self.alpha <= 0.0:
            raise ValidationError("alpha must be positive for the Markov tradeoff")
        lhs = self.r / self.rbar
        rhs = (self.alpha / self.abar) ** (self.n - 1)
        if not lhs < rhs:
            raise RegimeError(f"hypothesis r/(1-r) < (alpha/(1-alpha))^(n-1) fails: {lhs:.6g} >= {rhs:.6g}")

    def pc_x(self) -> float:
        """``P_c(X^n)``: the all-ones path is the most likely one."""
        return self.p * self.rbar ** (self.n - 1)

    def certified_threshold(self) -> float:
        """Smallest per-symbol threshold at which ``Z_n`` achieves the lower bound."""
        return z2n_certified_threshold(markov_joint(self), self.n)

    def prob_y_ones(self) -> float:
        """``P(Y^n = all ones)`` by the forward recursion over the chain."""
        a, r = self.alpha, self.r
        emit = np.array([a, 1 - a])
        trans = np.array([[1 - r, r], [r, 1 - r]])
        f = np.array([1 - self.p, self.p]) * emit
        for _ in range(self.n - 1):
            f = (f @ trans) * emit
        return float(f.sum())


def _markov_path_probs(model: MarkovModel) -> np.ndarray:
    n = model.n
    b = _bits(n)
    first = np.where(b[:, 0] == 1, model.p, 1 - model.p)
    flips = (b[:, 1:] != b[:, :-1]).sum(axis=1)
    if model.r == 0.0:
        return np.where(flips == 0, first, 0.0)
    return first * model.r ** flips * model.rbar ** (n - 1 - flips)


def markov_joint(model: MarkovModel) -> JointPmf:
    _check_table_n(model.n)
    px = _markov_path_probs(model)
    return JointPmf(px[:, None] * _bsc_block(model.n, model.alpha))


def pc_markov_cond(model: MarkovModel) -> float:
    """``P_c(X^n|Y^n)`` in closed form (odd ``n``, under the chain hypothesis)."""
    model.check_hypothesis()
    n, a, ab = model.n, model.alpha, model.abar
    tail = sum(math.comb(n, k) * (a / ab) ** k for k in range((n - 1) // 2 + 1))
    return ab ** n * model.rbar ** (n - 1) * tail


@dataclasses.dataclass(frozen=True)
class MarkovBounds:
    lower: TradeoffPoint
    upper: float


def underline_h_n_markov_bounds(model: MarkovModel, eps: float, certify: bool = True) -> MarkovBounds:
    """Lower and upper bounds on the restricted Markov tradeoff.

    The lower bound is achieved by ``Z_n`` and carries that filter.
    """
    pc = pc_markov_cond(model)
    n, p, a, ab, rb = model.n, model.p, model.alpha, model.abar, model.rbar
    eps = _check_eps(eps, model.pc_x() ** (1.0 / n), pc ** (1.0 / n))
    zeta = rb * (pc - eps ** n) / (p * (ab * rb) ** n - (1 - p) * (a * rb) ** n)
    if zeta > 1.0 + DOMAIN_TOL:
        raise RegimeError(f"eps={eps!r} is outside the certified regime (crossover {zeta:.6g} > 1)")
    zeta = min(max(zeta, 0.0), 1.0)
    low_n = 1.0 - zeta * model.prob_y_ones()
    up_n = 1.0 - zeta * a ** n
    ok = None
    if certify and n <= core.MAX_BITS:
        ok = _certify_z2n(markov_joint(model), n, zeta, eps ** n, low_n)
    lower = TradeoffPoint(eps, low_n ** (1.0 / n), _z2n_filter(n, zeta), Regime.NARY_Z, float(zeta), ok, n)
    return MarkovBounds(lower, up_n ** (1.0 / n))


# -- single hidden parameter ------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ParametricModel:
    """``theta ~ Bernoulli(p)`` and ``Y^n`` i.i.d. ``BSC(alpha)`` copies of it."""

    n: int
    p: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "n", _check_n(self.n, odd=True))
        _check_p(self.p)
        if not 0.0 < self.alpha < 0.5:
            raise ValidationError(f"alpha={self.alpha!r} must lie in (0, 0.5)")
        if not (1 - self.alpha) * (1 - self.p) > self.alpha * self.p:
            raise ValidationError("need (1 - alpha)(1 - p) > alpha p")
        if not self.p < self.pc_theta():
            raise ValidationError("observations never change the guess of theta (p >= P_c(theta|Y^n))")

    def as_markov(self) -> MarkovModel:
        return MarkovModel(self.n, self.p, self.alpha, 0.0)

    def pc_theta(self) -> float:
        return pc_markov_cond(self.as_markov())

    def domain(self) -> tuple[float, float]:
        return self.p ** (1.0 / self.n), self.pc_theta() ** (1.0 / self.n)

    def certified_threshold(self) -> float:
        """Smallest per-symbol threshold at which ``Z_n`` achieves the closed form."""
        return z2n_certified_threshold(parametric_joint(self), self.n)


def parametric_joint(model: ParametricModel) -> JointPmf:
    """``2 x 2^n`` joint of ``(theta, Y^n)``."""
    _check_table_n(model.n)
    full = markov_joint(model.as_markov()).probs
    return JointPmf(full[[0, (1 << model.n) - 1]])


def parametric_h_n(model: ParametricModel, eps: float, certify: bool = True) -> TradeoffPoint:
    """Restricted tradeoff for learning ``theta``; ``P_c(theta|Z^n) <= eps^n``."""
    n, p, ab, a = model.n, model.p, 1 - model.alpha, model.alpha
    pc = model.pc_theta()
    lo, hi = model.domain()
    eps = _check_eps(eps, lo, hi)
    zeta = (pc - eps ** n) / (p * ab ** n - (1 - p) * a ** n)
    if zeta > 1.0 + DOMAIN_TOL:
        raise RegimeError(f"eps={eps!r} is outside the certified regime (crossover {zeta:.6g} > 1)")
    zeta = min(max(zeta, 0.0), 1.0)
    util_n = 1.0 - zeta * (p * ab ** n + (1 - p) * a ** n)
    ok = None
    if certify and n <= core.MAX_BITS:
        ok = _certify_z2n(parametric_joint(model), n, zeta, eps ** n, util_n)
    return TradeoffPoint(eps, util_n ** (1.0 / n), _z2n_filter(n, zeta), Regime.NARY_Z, float(zeta), ok, n)


# -- memoryless versus restricted comparison ---------------------------------


@dataclasses.dataclass(frozen=True)
class ComparisonCurve:
    """One curve of the memoryless/restricted comparison.

    ``certified[i]`` says whether point ``i`` is backed by a filter that
    passed its certificate; other points are the closed form's continuation.
    ``coefficients`` are ``(slope, intercept)`` of the least-squares line of
    ``utility^n`` against ``eps^n`` over the certified points.
    """

    label: str
    n: int
    epsilons: np.ndarray
    utilities: np.ndarray
    certified: np.ndarray
    eps_low: float
    coefficients: tuple[float, float]


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def comparison_curves(p: float = 0.6, alpha: float = 0.2, ns: Sequence[int] = (2, 10),
                      num_points: int = 41) -> list[ComparisonCurve]:
    """Memoryless curve plus restricted curves for each ``n`` over ``[p, 1 - alpha]``.

    The memoryless curve does not depend on ``n``; it is labelled
    ``memoryless`` and computed for the smallest ``n``.
    """
    lo, hi = p, 1.0 - alpha
    grid = np.linspace(lo, hi, num_points)
    out = []
    base = IidModel(min(ns), p, alpha)
    mem = [h_n_memoryless(base, e) for e in grid]
    cert = np.array([bool(pt.achieved) for pt in mem])
    util = np.array([pt.utility for pt in mem])
    out.append(ComparisonCurve("memoryless", 1, grid, util, cert, lo, _fit(grid[cert], util[cert])))
    for n in ns:
        model = IidModel(n, p, alpha)
        eps_low = model.certified_threshold()
        values = np.array([underline_h_n_iid_value(model, e) for e in grid])
        cert = np.zeros(num_points, dtype=bool)
        for i, e in enumerate(grid):
            if e >= eps_low - DOMAIN_TOL:
                pt = underline_h_n_iid(model, e)
                cert[i] = bool(pt.achieved)
                values[i] = pt.utility
        fine = np.linspace(max(eps_low, lo), hi, num_points)
        fine_vals = np.array([underline_h_n_iid(model, e, certify=False).utility for e in fine])
        coef = _fit(fine ** n, fine_vals ** n)
        out.append(ComparisonCurve(f"restricted_n{n}", n, grid, values, cert, eps_low, coef))
    return out


def curve_from_points(points: Sequence[TradeoffPoint], domain: tuple[float, float]) -> TradeoffCurve:
    return TradeoffCurve(tuple(points), domain)
