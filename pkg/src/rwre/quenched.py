"""Exact computations inside one fixed environment.

Hitting probabilities via the ruin recursion, first-passage limits, quenched
mean hitting times, the total-progeny series, partial sums of ln rho, and
large-deviation trap bounds.  Every product of odds ratios is accumulated as
a sum of logs (products over/underflow within ~700 sites); one-way sites
contribute ln rho = -inf and terminate product chains exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import annealed
from .environment import Environment

OVERFLOW_GUARD = 700.0  # exp() saturates just above this


@dataclass(frozen=True)
class RuinProfile:
    """Hitting-probability profile u_i = P_i{reach 0 before n} on 0..n.

    Both the plain values and log-survival form ln(1 - u_i) are kept; the
    escape probability is 1 - u_1.
    """

    n: int
    u: np.ndarray
    log_one_minus_u: np.ndarray

    @property
    def escape(self) -> float:
        return float(np.exp(self.log_one_minus_u[1]))

    @property
    def log_escape(self) -> float:
        return float(self.log_one_minus_u[1])


def _log_rho_inner(env: Environment, n: int) -> np.ndarray:
    """ln rho at sites 1..n-1 (empty for n = 1)."""
    if n < 1:
        raise ValueError("window size must be >= 1")
    if n == 1:
        return np.empty(0)
    p = env.p_window(1, n - 1)
    if np.any(p <= 0.0):
        raise ValueError("p = 0 at an interior site: walk cannot move right")
    with np.errstate(divide="ignore"):
        return np.log((1.0 - p) / p)


def ruin_profile(env: Environment, n: int) -> RuinProfile:
    """Exact ruin profile on the window 0..n via the product representation.

    1 - u_1 = (sum over x < n of prod_{j<=x} rho_j)^{-1}, all in log space;
    one-way sites truncate the sum naturally.
    """
    log_rho = _log_rho_inner(env, n)
    y = np.concatenate(([0.0], np.cumsum(log_rho)))  # Y_x, x = 0..n-1
    prefix = np.logaddexp.accumulate(y)
    log_one_minus_u = np.concatenate(([-math.inf], prefix - prefix[-1]))
    u = -np.expm1(log_one_minus_u)
    u[0], u[-1] = 1.0, 0.0
    return RuinProfile(n=n, u=u, log_one_minus_u=log_one_minus_u)


@dataclass(frozen=True)
class FirstPassage:
    """Limit of the right first-passage probability f_10 with its window."""

    f10: float
    converged: bool
    window: int
    escape: float


def first_passage_right(env: Environment, tol: float = 1e-12, max_window: int = 1 << 20) -> FirstPassage:
    """f_10 by growing the ruin window until the escape probability settles.

    The escape probability decreases in n; convergence is declared when a
    doubling changes it by less than tol.  Non-convergence within
    max_window is expected for laws transient to -inf.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = 2
    prev = ruin_profile(env, n).escape
    while n < max_window:
        n *= 2
        cur = ruin_profile(env, n).escape
        if abs(prev - cur) < tol:
            return FirstPassage(f10=1.0 - cur, converged=True, window=n, escape=cur)
        prev = cur
    return FirstPassage(f10=1.0 - prev, converged=False, window=n, escape=prev)


@dataclass(frozen=True)
class TruncatedValue:
    value: float
    lower_bound: bool  # finite truncation from below; False once +inf is hit
    converged: bool
    depth: int


def quenched_mean_tau(env: Environment, depth: int = 10**4, tol: float = 1e-12) -> TruncatedValue:
    """Quenched mean unit hitting time E tau_1 by unrolling leftward.

    Depth-d truncation gives 1 + 2 sum_{k<d} P_k + P_d with
    P_k = prod_{i=0..k} rho_{-i}; the sequence increases to the true value.
    +inf is reported once partial sums pass the overflow guard; a series
    still growing at the truncation depth is flagged as not converged.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    lr = env.log_rho_window(-depth, 0)[::-1]  # rho_0, rho_-1, ..., rho_-depth
    logs = np.cumsum(lr)  # ln P_k, k = 0..depth
    lse = float(logsumexp(logs))
    if lse > OVERFLOW_GUARD:
        return TruncatedValue(math.inf, False, False, depth)
    total = 1.0 + 2.0 * float(np.exp(logs[:-1]).sum()) + float(np.exp(logs[-1]))
    converged = bool(logs[-1] < math.log(tol) + math.log(total))
    return TruncatedValue(total, True, converged, depth)


def progeny_m0(env: Environment, depth: int = 10**4, tol: float = 1e-12) -> TruncatedValue:
    """Total-progeny series M_0 = sum_{t>=1} prod_{j<t} rho_j in log space.

    Converged when the last increment is below tol relative to the total;
    a one-way site at 0 gives exactly 0 (empty product chain).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    lr = env.log_rho_window(0, depth - 1)
    logs = np.cumsum(lr)  # ln prod_{j<t} rho_j for t = 1..depth
    lse = float(logsumexp(logs))
    if lse == -math.inf:
        return TruncatedValue(0.0, True, True, depth)
    if lse > OVERFLOW_GUARD:
        return TruncatedValue(math.inf, False, False, depth)
    converged = bool(logs[-1] - lse < math.log(tol))
    return TruncatedValue(float(np.exp(lse)), True, converged, depth)


def progeny_m0_ensemble(law, n_env: int, base_seed: int, depth: int = 1024) -> np.ndarray:
    """M_0 over an ensemble of environments (vectorized, batched).

    Used for tail-index checks; depth must comfortably exceed the scale
    1/|eta| so truncation error is negligible.
    """
    from .environment import ensemble_unit_matrix, cumulative_thresholds, pick_atoms

    thr = cumulative_thresholds(law.weights)
    p_atoms = np.asarray(law.p_atoms)
    sites = np.arange(0, depth, dtype=np.int64)
    out = np.empty(n_env)
    batch = max(1, (1 << 23) // depth)
    done = 0
    while done < n_env:
        m = min(batch, n_env - done)
        units = ensemble_unit_matrix(base_seed, range(done, done + m), sites)
        p = p_atoms[pick_atoms(units, thr)]
        with np.errstate(divide="ignore"):
            lr = np.log((1.0 - p) / p)
        logs = np.cumsum(lr, axis=1)
        out[done : done + m] = np.exp(logsumexp(logs, axis=1))
        done += m
    return out


@dataclass(frozen=True)
class Potential:
    """Partial sums Y_x of ln rho over a..b, with Y_0 = 0.

    One-way sites give +-inf sentinels; trap analysis must reject such
    windows.
    """

    a: int
    b: int
    y: np.ndarray

    def value(self, x: int) -> float:
        return float(self.y[x - self.a])


def potential(env: Environment, a: int, b: int) -> Potential:
    if a > b:
        raise ValueError("need a <= b")
    lo, hi = min(a, 0), max(b, 0)
    # Right of the anchor: Y_x = sum_{j=1..x} ln rho_j (-inf past a one-way
    # site); left: Y_x = -sum_{j=x+1..0} ln rho_j (+inf past one, approached
    # from the right).  Built separately so mixed windows avoid inf - inf.
    right = np.concatenate(([0.0], np.cumsum(env.log_rho_window(1, hi)))) if hi >= 1 else np.array([0.0])
    if lo <= -1:
        lr = env.log_rho_window(lo + 1, 0)  # sites lo+1 .. 0
        suffix = np.cumsum(lr[::-1])[::-1]  # sum_{j=x+1..0} for x = lo..-1
        y = np.concatenate([-suffix, right])
    else:
        y = right
    return Potential(a=a, b=b, y=y[a - lo : b - lo + 1])


@dataclass(frozen=True)
class TrapBound:
    """Retention bound exp(-L I(eps)) for a trap of half-width L."""

    retention_bound: float
    rate: float
    kappa_from_ratio: float


def trap_bound(law, L: int, eps: float) -> TrapBound:
    """Probability bound for a slope-eps trap over L sites, from the
    large-deviation rate of the potential, plus the minimizing-ratio
    characterization of the critical exponent as a cross-check."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    rate = annealed.legendre(law, eps)
    if math.isinf(rate):
        bound = 0.0
    else:
        bound = math.exp(-L * rate)
    return TrapBound(
        retention_bound=bound,
        rate=rate,
        kappa_from_ratio=annealed.kappa_from_rate_ratio(law),
    )
