"""Finite joint distributions, privacy filters and guessing probabilities.

A joint pmf is stored as an ``M x N`` table ``P[x, y]``; a privacy filter
``P_{Z|Y}`` is an ``N x K`` row-stochastic table. Composing the two gives the
joint of ``(X, Z)`` with the Markov chain ``X - Y - Z`` built in.

Conventions used throughout the package:

* argmax ties go to the lowest index (``np.argmax`` semantics);
* probability sums are checked to an absolute tolerance of ``PROB_TOL``;
* Arimoto's order-infinity information is measured in bits;
* output symbols with zero probability contribute nothing to any sum.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from privguess.errors import DomainError, ValidationError

PROB_TOL = 1e-9
# 2^n-ary alphabets are materialized as dense tables; 2^12 x 2^12 is the cap.
MAX_BITS = 12


def _as_table(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must be a non-empty 2-D table, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint pmf of a pair ``(X, Y)`` on ``{0..M-1} x {0..N-1}``.

    Rows index the private variable ``X`` and columns the observed one.
    Instances are immutable; the table is stored read-only.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = _as_table(self.probs, "joint pmf")
        if np.any(arr < 0):
            raise ValidationError("joint pmf has negative entries")
        total = float(arr.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"joint pmf sums to {total!r}, not 1")
        object.__setattr__(self, "probs", _freeze(arr))

    @classmethod
    def from_array(cls, table, normalize: bool = False) -> "JointPmf":
        """Build from any nested sequence; rescale to unit mass only if asked."""
        arr = _as_table(table, "joint pmf")
        if normalize:
            if np.any(arr < 0) or arr.sum() <= 0:
                raise ValidationError("cannot normalize a table with negative or zero mass")
            arr = arr / arr.sum()
        return cls(arr)

    @classmethod
    def from_prior_and_channel(cls, prior: Sequence[float], channel: "Channel") -> "JointPmf":
        """Joint of ``(X, Y)`` with ``X ~ prior`` and ``P_{Y|X} = channel``."""
        p = _check_pmf(prior)
        if p.size != channel.N:
            raise ValidationError(f"prior has {p.size} symbols but channel expects {channel.N}")
        return cls(p[:, None] * channel.rows)

    @property
    def M(self) -> int:
        return self.probs.shape[0]

    @property
    def N(self) -> int:
        return self.probs.shape[1]

    @property
    def p_x(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def q_y(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def backward_channel(self) -> np.ndarray:
        """``P_{X|Y}`` as an ``M x N`` table; columns with ``q(y) = 0`` are zero."""
        q = self.q_y
        out = np.zeros_like(self.probs)
        nz = q > 0
        out[:, nz] = self.probs[:, nz] / q[nz]
        return out

    def transpose(self) -> "JointPmf":
        return JointPmf(self.probs.T.copy())

    def __repr__(self):
        return f"JointPmf(M={self.M}, N={self.N})"


@dataclasses.dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic table ``rows[y, z] = P(z | y)``."""

    rows: np.ndarray

    def __post_init__(self):
        arr = _as_table(self.rows, "channel")
        if np.any(arr < -PROB_TOL) or np.any(arr > 1 + PROB_TOL):
            raise ValidationError("channel entries must lie in [0, 1]")
        sums = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
        if bad.size:
            raise ValidationError(f"channel row {int(bad[0])} sums to {sums[bad[0]]!r}")
        object.__setattr__(self, "rows", _freeze(np.clip(arr, 0.0, 1.0)))

    @property
    def N(self) -> int:
        return self.rows.shape[0]

    @property
    def K(self) -> int:
        return self.rows.shape[1]

    def __repr__(self):
        return f"Channel(N={self.N}, K={self.K})"


@dataclasses.dataclass(frozen=True)
class LeakagePair:
    """``privacy = P_c(X|Z)`` and ``utility = P_c(Y|Z)`` for one filter."""

    privacy: float
    utility: float


def _check_pmf(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).ravel()
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValidationError("probability vector must be finite and non-empty")
    if np.any(arr < 0):
        raise ValidationError("probability vector has negative entries")
    if abs(arr.sum() - 1.0) > PROB_TOL:
        raise ValidationError(f"probability vector sums to {arr.sum()!r}, not 1")
    return arr


def pc_marginal(p) -> float:
    """Probability of correctly guessing a variable with pmf ``p``."""
    return float(_check_pmf(p).max())


def _pc_table(table: np.ndarray) -> float:
    return float(table.max(axis=0).sum())


def pc_conditional(joint: JointPmf) -> float:
    """MAP success probability ``sum_z max_x P(x, z)`` of guessing rows from columns."""
    return _pc_table(joint.probs)


def compose_filter(joint: JointPmf, filt: Channel) -> JointPmf:
    """Joint of ``(X, Z)`` when ``Z`` is produced from ``Y`` by ``filt``."""
    if filt.N != joint.N:
        raise ValidationError(f"filter expects {filt.N} inputs but joint has N={joint.N}")
    return JointPmf(joint.probs @ filt.rows)


def evaluate_filter(joint: JointPmf, filt: Channel) -> LeakagePair:
    """Privacy leakage and utility of a filter, both as guessing probabilities."""
    xz = compose_filter(joint, filt)
    utility = _pc_table(joint.q_y[:, None] * filt.rows)
    return LeakagePair(privacy=pc_conditional(xz), utility=utility)


def evaluate_nary_z(joint: JointPmf, y0: int, z0: int, gamma: float) -> LeakagePair:
    """Same result as ``evaluate_filter`` with ``nary_z_channel(y0, z0, gamma, N)``.

    Only columns ``y0`` and ``z0`` change, so the composed table is formed by
    two column updates instead of an ``N x N`` product. Used for ``2^n``-ary
    alphabets where the dense filter would be large.
    """
    N = joint.N
    g = _param(gamma, "gamma")
    if not (0 <= y0 < N and 0 <= z0 < N) or y0 == z0:
        raise ValidationError(f"invalid symbols ({y0}, {z0}) for alphabet of size {N}")
    xz = np.array(joint.probs)
    moved = g * xz[:, y0]
    xz[:, y0] -= moved
    xz[:, z0] += moved
    q = joint.q_y
    col_max = q.copy()
    col_max[y0] = (1.0 - g) * q[y0]
    col_max[z0] = max(q[z0], g * q[y0])
    return LeakagePair(privacy=_pc_table(xz), utility=float(col_max.sum()))


def arimoto_infty(joint: JointPmf) -> float:
    """Arimoto's order-infinity mutual information ``I_inf(X; Z)`` in bits.

    A point-mass ``X`` gives 0 by convention. Rounding can push the ratio a
    hair below one; the result is clamped at 0.
    """
    px = pc_marginal(joint.p_x)
    if px >= 1.0:
        return 0.0
    ratio = pc_conditional(joint) / px
    return max(0.0, math.log2(ratio))


def g_infty_from_h(h_value: float, eps_exponent: float, joint: JointPmf) -> float:
    """Translate ``h(2^eps P_c(X))`` into the order-infinity rate-privacy value.

    The caller evaluates ``h`` at ``2**eps_exponent * P_c(X)`` and passes the
    result as ``h_value``.
    """
    pcx = pc_marginal(joint.p_x)
    pcy = pc_marginal(joint.q_y)
    arg = 2.0 ** eps_exponent * pcx
    if eps_exponent < 0 or arg > 1.0 + PROB_TOL:
        raise DomainError(f"mapped threshold {arg!r} lies outside [P_c(X), 1]")
    if not 0.0 < h_value <= 1.0 + PROB_TOL:
        raise ValidationError(f"h value {h_value!r} must lie in (0, 1]")
    return math.log2(h_value / pcy)


# -- named channels ---------------------------------------------------------


def _param(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name}={value!r} must lie in [0, 1]")
    return value


def _completed(rows: np.ndarray, completion: Sequence[int]) -> np.ndarray:
    # Each row's designated entry absorbs the rounding so rows sum to 1 exactly.
    for y, j in enumerate(completion):
        rows[y, j] = 0.0
        rows[y, j] = 1.0 - rows[y].sum()
    return rows


def identity(size: int) -> Channel:
    return Channel(np.eye(size))


def constant(size: int, outputs: int | None = None, column: int = 0) -> Channel:
    """Filter sending every input to ``column``; the output is independent of ``Y``."""
    outputs = size if outputs is None else outputs
    rows = np.zeros((size, outputs))
    rows[:, column] = 1.0
    return Channel(rows)


def bibo(alpha: float, beta: float) -> Channel:
    """Binary channel with ``W(.|0) = (1-alpha, alpha)`` and ``W(.|1) = (beta, 1-beta)``."""
    a, b = _param(alpha, "alpha"), _param(beta, "beta")
    return Channel(_completed(np.array([[0.0, a], [b, 0.0]]), [0, 1]))


def bsc(alpha: float) -> Channel:
    return bibo(alpha, alpha)


def z_channel(beta: float) -> Channel:
    """Keeps 0 intact and sends 1 to 0 with probability ``beta``."""
    b = _param(beta, "beta")
    return Channel(_completed(np.array([[1.0, 0.0], [b, 0.0]]), [0, 1]))


def reverse_z_channel(beta: float) -> Channel:
    """Keeps 1 intact and sends 0 to 1 with probability ``beta``."""
    b = _param(beta, "beta")
    return Channel(_completed(np.array([[0.0, b], [0.0, 1.0]]), [0, 1]))


def nary_z_channel(y0: int, z0: int, gamma: float, size: int) -> Channel:
    """Identity on ``size`` symbols except ``y0 -> z0`` with probability ``gamma``."""
    g = _param(gamma, "gamma")
    if size < 2:
        raise ValidationError("an N-ary Z-channel needs at least 2 symbols")
    if not (0 <= y0 < size and 0 <= z0 < size):
        raise ValidationError(f"symbols ({y0}, {z0}) outside alphabet of size {size}")
    if y0 == z0:
        raise ValidationError("y0 and z0 must differ")
    rows = np.eye(size)
    rows[y0, y0] = 0.0
    rows[y0, z0] = g
    return Channel(_completed(rows, range(size)))


def z2n_channel(gamma: float, n: int) -> Channel:
    """``2^n``-ary Z-channel moving the all-ones vector to the all-zeros vector."""
    if not 1 <= n <= MAX_BITS:
        raise ValidationError(f"n={n} outside [1, {MAX_BITS}] for a materialized channel")
    size = 1 << n
    return nary_z_channel(size - 1, 0, gamma, size)


_CHANNELS = {
    "bibo": bibo,
    "bsc": bsc,
    "z": z_channel,
    "reverse_z": reverse_z_channel,
    "nary_z": nary_z_channel,
    "z2n": z2n_channel,
}


def make_channel(kind: str, *args, **kwargs) -> Channel:
    """Dispatch to a named constructor: ``bibo``, ``bsc``, ``z``, ``reverse_z``,
    ``nary_z`` or ``z2n``."""
    key = kind.lower().replace("-", "_")
    try:
        ctor = _CHANNELS[key]
    except KeyError:
        raise ValidationError(f"unknown channel kind {kind!r}") from None
    return ctor(*args, **kwargs)
