"""Estimation-theoretic privacy with Gaussian perturbation filters.

The filter is ``Z_gamma = sqrt(gamma) Y + N`` with ``N ~ N(0, 1)`` independent
of everything. Privacy asks that no function of ``X`` be estimable from
``Z_gamma`` beyond a fraction ``eps`` of its variance; this holds exactly
when ``rho_m^2(X, Z_gamma) <= eps``. Utility is the normalized error
``mmse(Y|Z_gamma) / var(Y)``, and sENSR is its smallest achievable value.

For jointly Gaussian ``(X, Y)`` everything is closed form. For other pairs
this module offers a numerical search and bounds that bracket it.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from typing import Callable, Sequence

import numpy as np

from privguess.core import JointPmf
from privguess.errors import CertificateError, DomainError, ValidationError

DEFAULT_NODES = 200
DEFAULT_BINS = 400
MAX_DISCRETE_SUPPORT = 64
MEMBERSHIP_SLACK = 1e-12
# eps within this of rho^2 is treated as the endpoint rho^2 itself
ENDPOINT_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class GaussianPairModel:
    """Correlation data of a pair with Gaussian ``Y``.

    ``rho`` is the Pearson correlation and ``rho_m`` the maximal correlation;
    they coincide (up to sign) when the pair is jointly Gaussian, which is
    the default.
    """

    var_y: float
    rho: float
    rho_m: float | None = None

    def __post_init__(self):
        if not self.var_y > 0 or not math.isfinite(self.var_y):
            raise ValidationError(f"var_y={self.var_y!r} must be positive")
        if not -1.0 <= self.rho <= 1.0:
            raise ValidationError(f"rho={self.rho!r} must lie in [-1, 1]")
        if self.rho_m is None:
            object.__setattr__(self, "rho_m", abs(self.rho))
        if not abs(self.rho) - 1e-12 <= self.rho_m <= 1.0:
            raise ValidationError(f"rho_m={self.rho_m!r} must lie in [|rho|, 1]")

    @property
    def jointly_gaussian(self) -> bool:
        return abs(self.rho_m - abs(self.rho)) <= 1e-12


@dataclasses.dataclass(frozen=True)
class GaussianSpec:
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise ValidationError(f"variance {self.var!r} must be positive")


@dataclasses.dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported real random variable."""

    support: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        x = np.array(self.support, dtype=float).ravel()
        m = np.array(self.masses, dtype=float).ravel()
        if x.size == 0 or x.size != m.size:
            raise ValidationError("support and masses must be non-empty and of equal length")
        if np.unique(x).size != x.size:
            raise ValidationError("support points must be distinct")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9:
            raise ValidationError("masses must form a pmf")
        x.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "masses", m)

    @property
    def mean(self) -> float:
        return float(self.masses @ self.support)

    @property
    def var(self) -> float:
        return float(self.masses @ (self.support - self.mean) ** 2)


def discretize_gaussian(var: float = 1.0, points: int = 64) -> DiscreteDistribution:
    """Gauss-Hermite discretization of ``N(0, var)``; matches moments up to ``2 points - 1``."""
    t, w = _hermite(points)
    return DiscreteDistribution(math.sqrt(var) * t, w)


@functools.lru_cache(maxsize=16)
def _hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for ``E f(N)``, ``N ~ N(0, 1)``, from the Jacobi matrix.

    The eigenvalue route stays accurate for node counts where the
    three-term-recurrence weights of ``hermegauss`` overflow.
    """
    if nodes < 1:
        raise ValidationError("need at least one quadrature node")
    off = np.sqrt(np.arange(1, nodes, dtype=float))
    t, vec = np.linalg.eigh(np.diag(off, 1) + np.diag(off, -1))
    w = vec[0] ** 2
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w / w.sum()


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(a - m).sum(axis=axis))


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma >= 0:
        raise ValidationError(f"gamma={gamma!r} must be non-negative")
    return gamma


def mmse_gaussian_channel(y_dist: DiscreteDistribution | GaussianSpec, gamma: float,
                          nodes: int = DEFAULT_NODES) -> float:
    """``mmse(Y | sqrt(gamma) Y + N)`` for Gaussian or finitely supported ``Y``.

    The Gaussian case is closed form. For discrete ``Y`` the mean posterior
    variance is integrated over ``Z`` with Gauss-Hermite quadrature, one rule
    per mixture component of the density of ``Z``.
    """
    gamma = _check_gamma(gamma)
    if isinstance(y_dist, GaussianSpec):
        return y_dist.var / (1.0 + gamma * y_dist.var)
    y, m = y_dist.support, y_dist.masses
    if y.size > MAX_DISCRETE_SUPPORT:
        raise ValidationError(f"discrete support limited to {MAX_DISCRETE_SUPPORT} points")
    if gamma == 0.0 or not math.isfinite(gamma):
        return y_dist.var if gamma == 0.0 else 0.0
    t, w = _hermite(nodes)
    s = math.sqrt(gamma)
    # z[i, j]: j-th node of the component centred at s*y[i]
    z = s * y[:, None] + t[None, :]
    with np.errstate(divide="ignore"):
        logm = np.log(m)
    # log of unnormalized posterior weights for every candidate y[k] at z[i, j]
    logpost = logm[None, None, :] - 0.5 * (z[:, :, None] - s * y[None, None, :]) ** 2
    logpost -= _logsumexp(logpost, axis=2)[:, :, None]
    post = np.exp(logpost)
    mean = post @ y
    second = post @ (y ** 2)
    cond_var = np.clip(second - mean ** 2, 0.0, None)
    return float(m @ (cond_var @ w))


def mmse_with_error(y_dist: DiscreteDistribution | GaussianSpec, gamma: float,
                    nodes: int = DEFAULT_NODES) -> tuple[float, float]:
    """Quadrature value and the change when the node count is doubled."""
    a = mmse_gaussian_channel(y_dist, gamma, nodes)
    b = mmse_gaussian_channel(y_dist, gamma, 2 * nodes)
    return b, abs(b - a)


def rho_m_sq_gaussian(model: GaussianPairModel, gamma: float) -> float:
    """``rho_m^2(X, Z_gamma)`` for jointly Gaussian ``(X, Y)``."""
    gamma = _check_gamma(gamma)
    if math.isinf(gamma):
        return model.rho ** 2
    gv = gamma * model.var_y
    return model.rho ** 2 * gv / (1.0 + gv)


def rho_m_gaussian(model: GaussianPairModel, gamma: float) -> float:
    return math.sqrt(rho_m_sq_gaussian(model, gamma))


def gamma_eps(model: GaussianPairModel, eps: float) -> float:
    """Largest noise precision keeping ``rho_m^2(X, Z_gamma) <= eps`` (jointly Gaussian)."""
    r2 = model.rho ** 2
    if not 0.0 <= eps <= r2 + ENDPOINT_TOL:
        raise DomainError(f"eps={eps!r} outside [0, rho^2={r2!r}]")
    if eps >= r2 - ENDPOINT_TOL:
        return math.inf
    return eps / (model.var_y * (r2 - eps))


@dataclasses.dataclass(frozen=True)
class SensrResult:
    """``value`` is the infimum; ``attained`` is false when only a limit reaches it."""

    value: float
    gamma_eps: float
    attained: bool


def sensr_gaussian(model: GaussianPairModel, eps: float) -> SensrResult:
    """Smallest normalized mmse under ``eps``-strong privacy, jointly Gaussian case.

    Equals ``1 - eps / rho^2``. At ``eps = rho^2`` the value 0 is a limit as
    ``gamma -> inf`` and is reported with ``attained=False``.
    """
    if not model.jointly_gaussian:
        raise ValidationError("closed form needs a jointly Gaussian model (rho_m == |rho|); "
                              "use sensr_bounds_gaussian_y")
    r2 = model.rho ** 2
    if not 0.0 <= eps <= r2 + ENDPOINT_TOL:
        raise DomainError(f"eps={eps!r} outside [0, rho^2={r2!r}]")
    if r2 == 0.0:
        # X is independent of Y: any gamma is private, mmse -> 0 only in the limit
        return SensrResult(0.0, math.inf, False)
    g = gamma_eps(model, eps)
    if math.isinf(g):
        return SensrResult(0.0, g, False)
    return SensrResult(1.0 - eps / r2, g, True)


def wensr_gaussian(model: GaussianPairModel, eps: float) -> SensrResult:
    """Weak-privacy counterpart; identical to :func:`sensr_gaussian` for jointly Gaussian pairs."""
    return sensr_gaussian(model, eps)


@dataclasses.dataclass(frozen=True)
class SensrBounds:
    """``None`` marks a bound whose range condition fails at this ``eps``."""

    lower: float | None
    upper: float | None


def sensr_bounds_gaussian_y(model: GaussianPairModel, eps: float) -> SensrBounds:
    """``1 - eps / rho^2 <= sENSR(eps) <= 1 - eps / rho_m^2`` for Gaussian ``Y``."""
    if eps < 0:
        raise DomainError(f"eps={eps!r} must be non-negative")
    r2, m2 = model.rho ** 2, model.rho_m ** 2
    def bound(c2):
        if not 0 < c2 or eps > c2 + ENDPOINT_TOL:
            return None
        return 0.0 if eps >= c2 - ENDPOINT_TOL else 1.0 - eps / c2

    lower, upper = bound(r2), bound(m2)
    if eps == 0:
        lower = upper = 1.0
    if lower is not None and upper is not None and lower > upper + 1e-12:
        raise CertificateError(f"bounds out of order: {lower!r} > {upper!r}")
    return SensrBounds(lower, upper)


def small_eps_slope(sensr: GaussianPairModel | Callable[[float], float],
                    eps_list: Sequence[float]) -> list[float]:
    """Finite-difference estimates of ``(1 - sENSR(eps)) / eps`` as ``eps -> 0``.

    For a jointly Gaussian model every estimate must stay within 0.05 of
    ``1 / rho^2``, the exact value.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValidationError("eps_list must not be empty")
    if any(e <= 0 for e in eps_list):
        raise ValidationError("eps values must be positive")
    if isinstance(sensr, GaussianPairModel):
        model = sensr
        values = [sensr_gaussian(model, e).value for e in eps_list]
        bound = 1.0 / model.rho ** 2
    else:
        values = [float(sensr(e)) for e in eps_list]
        bound = None
    slopes = [(1.0 - v) / e for v, e in zip(values, eps_list)]
    if bound is not None and any(s > bound + 0.05 for s in slopes):
        raise CertificateError(f"slope estimate exceeds 1/rho^2 = {bound!r}: {slopes!r}")
    return slopes


# -- discrete correlation measures -----------------------------------------


def maximal_correlation_discrete(joint: JointPmf) -> float:
    """Second singular value of ``P(u, v) / sqrt(p(u) q(v))``.

    Zero-probability symbols are dropped first; a degenerate marginal gives 0.
    """
    P = joint.probs
    P = P[P.sum(axis=1) > 0][:, P.sum(axis=0) > 0]
    if min(P.shape) < 2:
        return 0.0
    p, q = P.sum(axis=1), P.sum(axis=0)
    B = P / np.sqrt(np.outer(p, q))
    sv = np.linalg.svd(B, compute_uv=False)
    return float(np.clip(sv[1], 0.0, 1.0))


def _row_values(joint: JointPmf, values) -> np.ndarray:
    u = np.arange(joint.M, dtype=float) if values is None else np.asarray(values, dtype=float)
    if u.shape != (joint.M,):
        raise ValidationError(f"need {joint.M} values for U, got shape {u.shape}")
    return u


def eta_squared(joint: JointPmf, values: Sequence[float] | None = None) -> float:
    """``var(E[U|V]) / var(U)`` with ``U`` the row variable.

    Row ``i`` takes the real value ``values[i]`` (default: ``i`` itself).
    """
    u = _row_values(joint, values)
    p, q = joint.p_x, joint.q_y
    mean = p @ u
    var = p @ (u - mean) ** 2
    if var <= 1e-15:
        raise ValidationError("U is constant; eta^2 is undefined")
    nz = q > 0
    cond_mean = (u @ joint.probs[:, nz]) / q[nz]
    return float(np.clip(q[nz] @ (cond_mean - mean) ** 2 / var, 0.0, 1.0))


def normalized_mmse(joint: JointPmf, values: Sequence[float] | None = None) -> float:
    """``E[var(U|V)] / var(U)``, summed directly from the conditional variances."""
    u = _row_values(joint, values)
    p = joint.p_x
    var = p @ (u - p @ u) ** 2
    if var <= 1e-15:
        raise ValidationError("U is constant; the normalized mmse is undefined")
    total = 0.0
    for j in range(joint.N):
        col = joint.probs[:, j]
        w = col.sum()
        if w <= 0:
            continue
        m = col @ u / w
        total += col @ (u - m) ** 2
    return float(total / var)


def strong_privacy_member(joint_xz: JointPmf, eps: float) -> bool:
    """Whether a discrete ``(X, Z)`` pair meets ``eps``-strong estimation privacy.

    Decided by ``rho_m^2(X, Z) <= eps``; the boundary is inclusive up to a
    slack of ``1e-12`` for rounding in the singular value.
    """
    return maximal_correlation_discrete(joint_xz) ** 2 <= eps + MEMBERSHIP_SLACK


# -- numerical search for general pairs -------------------------------------


def gaussian_channel_joint(x_given_y: np.ndarray, y_dist: DiscreteDistribution, gamma: float,
                           bins: int = DEFAULT_BINS, width: float = 8.0) -> JointPmf:
    """Binned joint of ``(X, Z_gamma)`` for finite ``X`` and discrete ``Y``.

    ``x_given_y[i, k]`` is ``P(X = i | Y = y_k)``. ``Z`` is cut into ``bins``
    equal cells over the range where it has mass, plus two tail cells.
    """
    gamma = _check_gamma(gamma)
    x_given_y = np.asarray(x_given_y, dtype=float)
    y, m = y_dist.support, y_dist.masses
    if x_given_y.ndim != 2 or x_given_y.shape[1] != y.size:
        raise ValidationError("x_given_y must have one column per support point of Y")
    s = math.sqrt(gamma)
    lo, hi = s * y.min() - width, s * y.max() + width
    edges = np.concatenate([[-np.inf], np.linspace(lo, hi, bins + 1), [np.inf]])
    erf = np.vectorize(math.erf)
    cdf = 0.5 * (1.0 + erf((edges[None, :] - s * y[:, None]) / math.sqrt(2.0)))
    z_given_y = np.diff(cdf, axis=1)
    table = (x_given_y * m[None, :]) @ z_given_y
    return JointPmf.from_array(np.clip(table, 0.0, None), normalize=True)


def sensr_search(rho_m_sq: Callable[[float], float], mmse: Callable[[float], float], var_y: float,
                 eps: float, gamma_max: float = 1e8, iters: int = 200) -> SensrResult:
    """Bisection for the largest ``gamma`` with ``rho_m_sq(gamma) <= eps``.

    ``rho_m_sq`` must be non-decreasing in ``gamma``; ``mmse`` is evaluated at
    the result. If even ``gamma_max`` is private, the infimum is approached
    only as ``gamma -> inf`` and ``attained`` is false.
    """
    if eps < 0:
        raise DomainError(f"eps={eps!r} must be non-negative")
    if rho_m_sq(gamma_max) <= eps:
        return SensrResult(mmse(gamma_max) / var_y, math.inf, False)
    lo, hi = 0.0, 1.0
    while rho_m_sq(hi) <= eps:
        lo, hi = hi, 2.0 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if rho_m_sq(mid) <= eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return SensrResult(mmse(lo) / var_y, lo, True)


def sensr_numeric(x_given_y: np.ndarray, y_dist: DiscreteDistribution, eps: float,
                  bins: int = DEFAULT_BINS, nodes: int = DEFAULT_NODES,
                  gamma_max: float = 1e4) -> SensrResult:
    """Approximate sENSR for finite ``X`` and discrete ``Y`` (approximate: binned ``Z``)."""

    def rho(g):
        return maximal_correlation_discrete(gaussian_channel_joint(x_given_y, y_dist, g, bins)) ** 2

    def err(g):
        return mmse_gaussian_channel(y_dist, g, nodes)

    return sensr_search(rho, err, y_dist.var, eps, gamma_max=gamma_max, iters=60)
