"""Closed-form privacy-utility tradeoffs for scalar sources.

``h(eps)`` is the largest probability of guessing ``Y`` from a filtered
release ``Z`` subject to ``P_c(X|Z) <= eps``. For binary ``X`` and ``Y`` it is
affine and achieved by a Z-channel or a reverse Z-channel. When ``Z`` must
share the alphabet of ``Y`` (the restricted tradeoff), it is affine near
``P_c(X|Y)`` with a slope that is a finite minimum, achieved by an N-ary
Z-channel.

Every point carrying a filter can be re-evaluated exactly through
:func:`privguess.core.evaluate_filter`; that check is the certificate used by
the CLI and the acceptance suite.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Callable, Iterable, Sequence

import numpy as np

from privguess import core
from privguess.core import Channel, JointPmf
from privguess.errors import CertificateError, DomainError, RegimeError, ValidationError

CERT_TOL = 1e-9
# Slack when deciding whether a threshold sits inside a closed domain.
DOMAIN_TOL = 1e-12


class Regime(str, enum.Enum):
    Z_CHANNEL = "z"
    REVERSE_Z = "reverse_z"
    NARY_Z = "nary_z"
    ORACLE = "oracle"
    TRIVIAL = "trivial"


@dataclasses.dataclass(frozen=True)
class TradeoffPoint:
    """One ``(eps, utility)`` sample, with the filter that attains it if known.

    ``achieved`` is the outcome of the exact certificate (``None`` when no
    check was run). ``filter_param`` is the crossover probability of the
    named filter. For vector models ``n > 1`` and both ``epsilon`` and
    ``utility`` are per-symbol (n-th root) values.
    """

    epsilon: float
    utility: float
    filter: Channel | None = None
    regime: Regime = Regime.ORACLE
    filter_param: float | None = None
    achieved: bool | None = None
    n: int = 1
    source: str = "closed_form"


@dataclasses.dataclass(frozen=True)
class TradeoffCurve:
    points: tuple[TradeoffPoint, ...]
    domain: tuple[float, float]

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        eps = np.array([pt.epsilon for pt in pts])
        util = np.array([pt.utility for pt in pts])
        if np.any(np.diff(eps) <= 0):
            raise ValidationError("curve epsilons must be strictly increasing")
        if np.any(np.diff(util) < -1e-9):
            raise ValidationError("curve utilities must be non-decreasing")

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([pt.epsilon for pt in self.points])

    @property
    def utilities(self) -> np.ndarray:
        return np.array([pt.utility for pt in self.points])

    def __len__(self):
        return len(self.points)


def achieves(joint: JointPmf, filt: Channel, privacy: float, utility: float,
             tol: float = CERT_TOL) -> bool:
    """True if ``filt`` leaks exactly ``privacy`` and delivers ``utility`` on ``joint``."""
    pair = core.evaluate_filter(joint, filt)
    return abs(pair.privacy - privacy) <= tol and abs(pair.utility - utility) <= tol


def _check_eps(eps: float, lo: float, hi: float) -> float:
    if not lo - DOMAIN_TOL <= eps <= hi + DOMAIN_TOL:
        raise DomainError(f"eps={eps!r} outside [{lo!r}, {hi!r}]")
    return min(max(float(eps), lo), hi)


# -- binary scalar model ----------------------------------------------------


@dataclasses.dataclass(frozen=True)
class BinaryScalarModel:
    """``X ~ Bernoulli(p)`` observed through ``BIBO(alpha, beta)``."""

    p: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.5 <= self.p < 1.0:
            raise ValidationError(f"p={self.p!r} must lie in [0.5, 1)")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 0.5:
                raise ValidationError(f"{name}={v!r} must lie in [0, 0.5)")

    @property
    def q(self) -> float:
        """``P(Y = 1)``."""
        return self.alpha * (1 - self.p) + (1 - self.beta) * self.p

    @property
    def trivial(self) -> bool:
        """``Y`` never changes the MAP guess of ``X``, so ``h`` is identically 1."""
        return (1 - self.alpha) * (1 - self.p) <= self.beta * self.p

    @property
    def z_regime(self) -> bool:
        a, b, p = self.alpha, self.beta, self.p
        return a * (1 - a) * (1 - p) ** 2 < b * (1 - b) * p ** 2

    @property
    def pc_x(self) -> float:
        return self.p

    @property
    def pc_xy(self) -> float:
        a, b, p = self.alpha, self.beta, self.p
        return max((1 - a) * (1 - p), b * p) + (1 - b) * p

    @property
    def domain(self) -> tuple[float, float]:
        return self.pc_x, self.pc_xy

    def joint(self) -> JointPmf:
        return JointPmf.from_prior_and_channel([1 - self.p, self.p], core.bibo(self.alpha, self.beta))


def h_binary(model: BinaryScalarModel, eps: float, certify: bool = True) -> TradeoffPoint:
    """Exact ``h(eps)`` for a binary pair, with the Z-type filter achieving it.

    Raises :class:`CertificateError` if the filter does not reproduce the
    closed-form value (this would indicate a bug, not a user error).
    """
    p, a, b = model.p, model.alpha, model.beta
    lo, hi = model.domain
    eps = _check_eps(eps, lo, hi)
    if model.trivial:
        return TradeoffPoint(eps, 1.0, core.identity(2), Regime.TRIVIAL, 0.0, True)

    top = (1 - a) * (1 - p) + (1 - b) * p - eps
    if model.z_regime:
        zeta = top / ((1 - b) * p - a * (1 - p))
        utility = 1.0 - zeta * model.q
        regime = Regime.Z_CHANNEL
    else:
        zeta = top / ((1 - a) * (1 - p) - b * p)
        utility = 1.0 - zeta * (1 - model.q)
        regime = Regime.REVERSE_Z
    # eps was clipped into the domain, so only rounding can push zeta past [0, 1]
    zeta = min(max(zeta, 0.0), 1.0)
    filt = core.z_channel(zeta) if regime is Regime.Z_CHANNEL else core.reverse_z_channel(zeta)
    ok = None
    if certify:
        ok = achieves(model.joint(), filt, eps, utility)
        if not ok:
            raise CertificateError(f"{regime.value} filter with zeta={zeta!r} fails at eps={eps!r}")
    return TradeoffPoint(eps, utility, filt, regime, zeta, ok)


def perfect_privacy_nontrivial(model: BinaryScalarModel) -> bool:
    """Whether some filter beats ``P_c(Y)`` while revealing nothing about ``X``.

    In the trivial regime ``h`` is 1 everywhere, which beats ``P_c(Y)`` unless
    ``Y`` is itself deterministic.
    """
    if model.trivial:
        return max(model.q, 1 - model.q) < 1.0
    return model.z_regime and model.p > 0.5


# -- restricted alphabet (|Z| = |Y|) ----------------------------------------


def _column_argmax(joint: JointPmf) -> np.ndarray:
    P = joint.probs
    q = joint.q_y
    zero = np.flatnonzero(q <= 0)
    if zero.size:
        raise ValidationError(f"output symbol y={int(zero[0])} has zero probability")
    if joint.M > 1:
        top2 = np.sort(P, axis=0)[-2:, :]
        tied = np.flatnonzero(top2[1] <= top2[0])
        if tied.size:
            raise ValidationError(f"column y={int(tied[0])} has no unique maximizing x")
    return np.argmax(P, axis=0)


def underline_h_slope(joint: JointPmf) -> tuple[float, tuple[int, int]]:
    """Left derivative of the restricted tradeoff at ``P_c(X|Y)``.

    Returns the slope and the lexicographically smallest minimizing pair
    ``(y0, z0)``; pairs with a zero denominator count as ``+inf``.
    """
    xarg = _column_argmax(joint)
    pcx, pcxy = core.pc_marginal(joint.p_x), core.pc_conditional(joint)
    if pcxy - pcx <= DOMAIN_TOL:
        raise ValidationError("degenerate joint: P_c(X) == P_c(X|Y), the tradeoff is trivial")
    P = joint.probs
    cols = np.arange(joint.N)
    # gap[y, z] = P(x_y, y) - P(x_z, y)
    gap = P[xarg, cols][:, None] - P[xarg[None, :], cols[:, None]]
    with np.errstate(divide="ignore"):
        ratio = np.where(gap > 0, joint.q_y[:, None] / np.where(gap > 0, gap, 1.0), np.inf)
    flat = int(np.argmin(ratio))
    y0, z0 = divmod(flat, joint.N)
    return float(ratio[y0, z0]), (y0, z0)


def nary_z_limit(joint: JointPmf, y0: int, z0: int) -> float:
    """Largest crossover at which ``NaryZ(y0, z0, g)`` still meets its affine formulas.

    Moving mass from column ``y0`` into column ``z0`` leaves privacy and
    utility affine in ``g`` while column ``z0`` keeps its MAP guess of ``X``
    and keeps ``z0`` as its best guess of ``Y``. The limit is the first
    crossover at which either guess would change, capped at 1.
    """
    P, q = joint.probs, joint.q_y
    x0 = int(np.argmax(P[:, z0]))
    limits = [1.0]
    if q[y0] > 0:
        limits.append(q[z0] / q[y0])
    gain = P[:, y0] - P[x0, y0]
    room = P[x0, z0] - P[:, z0]
    faster = gain > 0
    if np.any(faster):
        limits.append(float((room[faster] / gain[faster]).min()))
    return float(min(limits))


def underline_h_linear(joint: JointPmf, eps: float) -> TradeoffPoint:
    """Restricted tradeoff in its high-utility linear regime.

    The value is guaranteed only above an (unknown) threshold ``eps_L``; the
    returned ``achieved`` flag says whether the N-ary Z-channel really
    delivers the formula at this ``eps``.
    """
    slope, (y0, z0) = underline_h_slope(joint)
    pcx, pcxy = core.pc_marginal(joint.p_x), core.pc_conditional(joint)
    eps = _check_eps(eps, pcx, pcxy)
    xarg = np.argmax(joint.probs, axis=0)
    denom = joint.probs[xarg[y0], y0] - joint.probs[xarg[z0], y0]
    zeta = (pcxy - eps) / denom
    if zeta > 1.0 + DOMAIN_TOL:
        raise RegimeError(f"eps={eps!r} is outside the certified regime (crossover {zeta:.6g} > 1)")
    zeta = min(zeta, 1.0)
    utility = 1.0 - (pcxy - eps) * slope
    filt = core.nary_z_channel(y0, z0, zeta, joint.N)
    ok = achieves(joint, filt, eps, utility)
    return TradeoffPoint(eps, utility, filt, Regime.NARY_Z, float(zeta), ok)


# -- curves -----------------------------------------------------------------


def sample_curve(fn: Callable[[float], TradeoffPoint], eps_values: Iterable[float],
                 domain: Sequence[float] | None = None) -> TradeoffCurve:
    pts = tuple(fn(float(e)) for e in eps_values)
    if domain is None:
        domain = (pts[0].epsilon, pts[-1].epsilon)
    return TradeoffCurve(pts, tuple(domain))


def h_binary_curve(model: BinaryScalarModel, num_points: int = 21) -> TradeoffCurve:
    lo, hi = model.domain
    if hi - lo <= 0:
        return TradeoffCurve((h_binary(model, lo),), (lo, hi))
    return sample_curve(lambda e: h_binary(model, e), np.linspace(lo, hi, num_points), (lo, hi))


def detect_breakpoints(curve: TradeoffCurve, tol: float) -> list[float]:
    """Estimate the knots of a sampled piecewise-linear curve.

    A knot is flagged wherever consecutive secant slopes differ by more than
    ``tol``. A run of flagged samples is resolved by intersecting the last
    clean segment before it with the first clean segment after it, which
    recovers a knot falling strictly inside a sampling interval.
    """
    if len(curve) < 20:
        raise ValidationError(f"need at least 20 points to detect breakpoints, got {len(curve)}")
    x, u = curve.epsilons, curve.utilities
    slopes = np.diff(u) / np.diff(x)
    flagged = np.flatnonzero(np.abs(np.diff(slopes)) > tol)
    knots: list[float] = []
    i = 0
    while i < flagged.size:
        j = i
        while j + 1 < flagged.size and flagged[j + 1] == flagged[j] + 1:
            j += 1
        left, right = int(flagged[i]), int(flagged[j]) + 1
        s1, s2 = slopes[left], slopes[right]
        # intersect u = u[left] + s1 (e - x[left]) with u = u[right] + s2 (e - x[right])
        knot = (u[right] - u[left] + s1 * x[left] - s2 * x[right]) / (s1 - s2)
        knots.append(float(np.clip(knot, x[left], x[right + 1])))
        i = j + 1
    return knots
