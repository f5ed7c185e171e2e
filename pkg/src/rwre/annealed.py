"""Closed-form annealed analytics computed exactly from law atoms.

Transience classification, asymptotic velocity, the cumulant function of
ln rho with its Legendre transform and critical exponent, excursion means,
the invariant density seen from the particle, the harmonic coordinate,
the recurrent-case limit density, and conductivity constants for bond and
rate models.  Monte Carlo enters only for environment-indexed quantities
(the density f, the increment of the harmonic coordinate, and the
pair-sampled discretization step).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._bits import DOMAIN_STATS, counter_unit_array, derive_key
from .environment import Environment, ensemble_unit_matrix, pick_atoms, cumulative_thresholds
from .laws import BondWeights, LawError, RatesPowerLaw, SiteLaw

KAPPA_UMAX = 64.0
_BISECT_TOL = 1e-13


class Transience(enum.Enum):
    TRANSIENT_PLUS = "transient+"
    TRANSIENT_MINUS = "transient-"
    RECURRENT = "recurrent"


@dataclass(frozen=True)
class TransienceClass:
    kind: Transience
    eta: float
    degenerate: bool


@dataclass(frozen=True)
class CriticalExponent:
    """Root of E rho^kappa = 1 with its bisection bracket."""

    kappa: float
    bracket: tuple[float, float]
    f_at_bracket: tuple[float, float]


def _require_site_law(law) -> SiteLaw:
    if not isinstance(law, SiteLaw):
        raise LawError(f"expected a site law, got {type(law).__name__}")
    return law


def eta(law) -> float:
    """E ln rho_0; -inf when the law has one-way sites."""
    _require_site_law(law)
    w = law.weight_array()
    lr = law.log_rho_atoms()
    if np.any((lr == -np.inf) & (w > 0)):
        return -math.inf
    return float(w[w > 0] @ lr[w > 0])


def classify(law) -> TransienceClass:
    e = eta(law)
    w = law.weight_array()
    lr = law.log_rho_atoms()
    degenerate = bool(np.all(lr[w > 0] == 0.0))
    # Rounding floor: exact-zero eta (e.g. weight 1/2 on +-ln r) evaluates to
    # a few ulps of the atom magnitudes in float arithmetic.
    finite = lr[np.isfinite(lr) & (w > 0)]
    tol = 1e-14 * max(1.0, float(np.abs(finite).max()) if finite.size else 1.0)
    if e < -tol:
        kind = Transience.TRANSIENT_PLUS
    elif e > tol:
        kind = Transience.TRANSIENT_MINUS
    else:
        kind = Transience.RECURRENT
    return TransienceClass(kind=kind, eta=e, degenerate=degenerate)


def mean_rho(law) -> float:
    return _require_site_law(law).mean_rho()


def velocity(law) -> float:
    """Asymptotic velocity: (1-E rho)/(1+E rho) when E rho < 1, the mirrored
    formula when E 1/rho < 1, and 0 in between."""
    _require_site_law(law)
    er = law.mean_rho()
    if er < 1.0:
        return (1.0 - er) / (1.0 + er)
    eri = law.mean_inv_rho()
    if eri < 1.0:
        return -(1.0 - eri) / (1.0 + eri)
    return 0.0


def sigma_sq_log_rho(law) -> float:
    """E ln^2 rho_0 (the recurrent-case localization scale constant)."""
    _require_site_law(law)
    w = law.weight_array()
    lr = law.log_rho_atoms()
    if np.any((~np.isfinite(lr)) & (w > 0)):
        return math.inf
    return float(w @ (lr * lr))


# -- cumulant function, critical exponent, Legendre transform ---------------


def cgf(law, u: float) -> float:
    """F(u) = ln E rho_0^u, exact from atoms, stable for large |u|."""
    _require_site_law(law)
    w = law.weight_array()
    lr = law.log_rho_atoms()
    keep = w > 0
    w, lr = w[keep], lr[keep]
    if u == 0.0:
        return 0.0
    zero = lr == -np.inf
    if np.any(zero) and u < 0.0:
        return math.inf
    w, lr = w[~zero], lr[~zero]
    if w.size == 0:
        return -math.inf
    return float(logsumexp(np.log(w) + u * lr))


def _cgf_derivative(law, u: float) -> float:
    w = law.weight_array()
    lr = law.log_rho_atoms()
    keep = (w > 0) & np.isfinite(lr)
    w, lr = w[keep], lr[keep]
    a = np.log(w) + u * lr
    a -= a.max()
    e = np.exp(a)
    return float((e @ lr) / e.sum())


def kappa(law) -> CriticalExponent:
    """Positive root of F(u) = 0 by bracketing + bisection.

    Requires eta < 0; returns +inf when rho <= 1 a.s. (no positive root
    below the search cap, effectively Gaussian behavior).
    """
    _require_site_law(law)
    e = eta(law)
    if e >= 0.0:
        raise LawError("critical exponent requires eta < 0")
    w = law.weight_array()
    lr = law.log_rho_atoms()
    degenerate = bool(np.all(lr[w > 0] == 0.0))
    if degenerate:
        raise LawError("critical exponent undefined for a degenerate law")
    if not np.any((lr > 0) & (w > 0)):
        return CriticalExponent(math.inf, (KAPPA_UMAX, math.inf), (cgf(law, KAPPA_UMAX), math.nan))
    lo, f_lo = 0.0, 0.0
    hi = 1.0
    while hi <= KAPPA_UMAX:
        f_hi = cgf(law, hi)
        if f_hi > 0.0:
            break
        lo, f_lo = hi, f_hi
        hi *= 2.0
    else:
        return CriticalExponent(math.inf, (lo, math.inf), (f_lo, math.nan))
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        fm = cgf(law, mid)
        if fm > 0.0:
            hi, f_hi = mid, fm
        else:
            lo, f_lo = mid, fm
    root = hi if abs(f_hi) < abs(f_lo) else lo
    return CriticalExponent(root, (lo, hi), (f_lo, f_hi))


def _slope_range(law) -> tuple[float, float, np.ndarray, np.ndarray]:
    w = law.weight_array()
    lr = law.log_rho_atoms()
    keep = (w > 0) & np.isfinite(lr)
    w, lr = w[keep], lr[keep]
    return float(lr.min()), float(lr.max()), w, lr


def legendre(law, x: float) -> float:
    """Rate function I(x) = sup_u (u x - F(u)).

    Finite only for x between the extreme atoms of ln rho; at an extreme
    the supremum equals -ln(weight of that atom).
    """
    _require_site_law(law)
    smin, smax, w, lr = _slope_range(law)
    if x < smin or x > smax:
        return math.inf
    if smin == smax:
        return 0.0 if x == smin else math.inf
    if x == smax:
        return -math.log(float(w[lr == smax].sum()))
    if x == smin:
        return -math.log(float(w[lr == smin].sum()))
    lo, hi = -1.0, 1.0
    while _cgf_derivative(law, lo) > x and lo > -1e6:
        lo *= 2.0
    while _cgf_derivative(law, hi) < x and hi < 1e6:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cgf_derivative(law, mid) < x:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    return u * x - cgf(law, u)


def kappa_from_rate_ratio(law, tol: float = 1e-10) -> float:
    """min over eps > 0 of I(eps)/eps, by golden-section on the ratio.

    Cross-check for the root of F: the minimizing ratio equals kappa.
    """
    _require_site_law(law)
    smin, smax, _, _ = _slope_range(law)
    if smax <= 0.0:
        return math.inf
    lo = max(smin, 0.0) + 1e-12 * max(1.0, abs(smax))
    hi = smax
    ratio = lambda e: legendre(law, e) / e
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = ratio(c), ratio(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = ratio(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = ratio(d)
    return min(fc, fd)


# -- excursions and the diode law --------------------------------------------


@dataclass(frozen=True)
class ExcursionMeans:
    """Annealed mean left-excursion duration and mean unit hitting time."""

    left_excursion: float
    tau1: float


def mean_excursion(law) -> ExcursionMeans:
    _require_site_law(law)
    er = law.mean_rho()
    if er < 1.0:
        return ExcursionMeans(2.0 / (1.0 - er), (1.0 + er) / (1.0 - er))
    return ExcursionMeans(math.inf, math.inf)


def diode_excursion_atoms(alpha: float, rho: float, k_max: int) -> list[tuple[float, float]]:
    """Excursion-time atoms (t_k, (1-alpha) alpha^k), t_k = 2 sum rho^j.

    Satisfies t_k = 2 + rho * t_{k-1} with t_0 = 2.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    out = []
    t = 0.0
    for k in range(k_max + 1):
        t = 2.0 + rho * t
        out.append((t, (1.0 - alpha) * alpha**k))
    return out


# -- environment viewed from the particle ------------------------------------


@dataclass(frozen=True)
class TruncatedSeries:
    value: float
    converged: bool
    terms: int


def _log_prefix_products(log_rho: np.ndarray) -> np.ndarray:
    """Cumulative sums of ln rho (log of the running products)."""
    return np.cumsum(log_rho)


def invariant_density_f(env: Environment, truncation: int = 4096, tol: float = 1e-12) -> TruncatedSeries:
    """Density f = v (1+rho_0) sum_x prod_{j<=x} rho_j of the invariant law.

    Truncated log-space series; requires E rho < 1 for the generating law.
    """
    law = env.law
    er = law.mean_rho()
    if er >= 1.0:
        raise LawError("invariant density requires E rho < 1")
    v = velocity(law)
    rho0 = site_rho_value(env, 0)
    lr = env.log_rho_window(1, truncation)
    logs = np.concatenate(([0.0], _log_prefix_products(lr)))
    total = float(logsumexp(logs))
    converged = bool(logs[-1] - total < math.log(tol))
    return TruncatedSeries(v * (1.0 + rho0) * math.exp(total), converged, truncation + 1)


def site_rho_value(env: Environment, x: int) -> float:
    p = env.p(x)
    return (1.0 - p) / p


def harmonic_increment(env: Environment, x: int, truncation: int = 4096, tol: float = 1e-12) -> TruncatedSeries:
    """Increment D(x) = v - 1 + 2v sum_k prod_{i<=k} rho_{x-i} of the
    harmonic coordinate; E D = 0 under the annealed law."""
    law = env.law
    if law.mean_rho() >= 1.0:
        raise LawError("harmonic coordinate requires E rho < 1")
    v = velocity(law)
    lr = env.log_rho_window(x - truncation, x)[::-1]  # rho_x, rho_{x-1}, ...
    logs = _log_prefix_products(lr)
    total = float(logsumexp(logs))
    converged = bool(logs[-1] - total < math.log(tol))
    return TruncatedSeries(v - 1.0 + 2.0 * v * math.exp(total), converged, truncation + 1)


def harmonic_h(env: Environment, x: int, truncation: int = 4096) -> float:
    """Harmonic coordinate offset h(x) with h(0) = 0, by signed partial sums."""
    if x == 0:
        return 0.0
    if x > 0:
        return float(sum(harmonic_increment(env, k, truncation).value for k in range(x)))
    return -float(sum(harmonic_increment(env, -k, truncation).value for k in range(1, -x + 1)))


# -- vectorized ensembles for the identity checks ----------------------------


def invariant_density_ensemble(law, n_env: int, base_seed: int, width: int = 4096) -> np.ndarray:
    """f over an ensemble of environments (vectorized, reproducible)."""
    if law.mean_rho() >= 1.0:
        raise LawError("invariant density requires E rho < 1")
    v = velocity(law)
    sites = np.arange(0, width + 1, dtype=np.int64)
    p = _ensemble_p(law, base_seed, n_env, sites)
    with np.errstate(divide="ignore"):
        lr = np.log((1.0 - p[:, 1:]) / p[:, 1:])
    logs = np.concatenate([np.zeros((n_env, 1)), np.cumsum(lr, axis=1)], axis=1)
    total = logsumexp(logs, axis=1)
    rho0 = (1.0 - p[:, 0]) / p[:, 0]
    return v * (1.0 + rho0) * np.exp(total)


def drift_density_ensemble(law, n_env: int, base_seed: int, width: int = 4096) -> np.ndarray:
    """(p_0 - q_0) f over an ensemble; its mean equals the velocity."""
    sites = np.arange(0, width + 1, dtype=np.int64)
    p = _ensemble_p(law, base_seed, n_env, sites)
    v = velocity(law)
    with np.errstate(divide="ignore"):
        lr = np.log((1.0 - p[:, 1:]) / p[:, 1:])
    logs = np.concatenate([np.zeros((n_env, 1)), np.cumsum(lr, axis=1)], axis=1)
    total = logsumexp(logs, axis=1)
    rho0 = (1.0 - p[:, 0]) / p[:, 0]
    f = v * (1.0 + rho0) * np.exp(total)
    return (2.0 * p[:, 0] - 1.0) * f


def harmonic_increment_ensemble(law, n_env: int, base_seed: int, width: int = 4096) -> np.ndarray:
    """D(0) over an ensemble of environments (vectorized, reproducible)."""
    if law.mean_rho() >= 1.0:
        raise LawError("harmonic coordinate requires E rho < 1")
    v = velocity(law)
    sites = np.arange(-width, 1, dtype=np.int64)[::-1].copy()  # 0, -1, -2, ...
    p = _ensemble_p(law, base_seed, n_env, sites)
    with np.errstate(divide="ignore"):
        lr = np.log((1.0 - p) / p)
    logs = np.cumsum(lr, axis=1)
    total = logsumexp(logs, axis=1)
    return v - 1.0 + 2.0 * v * np.exp(total)


def _ensemble_p(law, base_seed: int, n_env: int, sites: np.ndarray) -> np.ndarray:
    units = ensemble_unit_matrix(base_seed, n_env, sites)
    thr = cumulative_thresholds(law.weights)
    return np.asarray(law.p_atoms)[pick_atoms(units, thr)]


# -- recurrent-case limit density ---------------------------------------------

_SINAI_K = np.arange(0, 3201)
_SINAI_SIGNS = np.where(_SINAI_K % 2 == 0, 1.0, -1.0)
_SINAI_ODD = 2.0 * _SINAI_K + 1.0
_SINAI_DECAY = _SINAI_ODD**2 * math.pi**2 / 8.0


def sinai_density(x) -> np.ndarray | float:
    """Limit density of the rescaled recurrent walk: an alternating series
    of Gaussian-free exponentials; equals 1/2 at the origin."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    ax = np.abs(xa)
    small = ax < 1e-9
    out[small] = 0.5
    if np.any(~small):
        a = ax[~small]
        terms = (_SINAI_SIGNS / _SINAI_ODD)[None, :] * np.exp(-np.outer(a, _SINAI_DECAY))
        out[~small] = (2.0 / math.pi) * terms.sum(axis=1)
    return out if np.ndim(x) else float(out[0])


def sinai_cdf(x) -> np.ndarray | float:
    """CDF of the limit density, by term-wise integration of the series."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    ax = np.abs(xa)
    coeff = _SINAI_SIGNS / _SINAI_ODD**3
    tail = (16.0 / math.pi**3) * ((1.0 - np.exp(-np.outer(ax, _SINAI_DECAY))) @ coeff)
    out = 0.5 + np.sign(xa) * tail
    return out if np.ndim(x) else float(out[0])


# -- conductivity and effective-medium constants ------------------------------


@dataclass(frozen=True)
class EMAReport:
    """Conductivity/EMA constants for bond and rate laws."""

    c_bar: float
    c_star: float
    delta_1: float
    delta_1_se: float
    delta_star: float
    sigma_sq_bonds: float
    subdiffusive: bool
    return_exponent: float | None
    msd_exponent: float | None


def conductivity_and_ema(law, n_pairs: int = 10**6, seed: int = 2024) -> EMAReport:
    """Effective conductivity (E 1/c)^-1, CLT variance (E c E 1/c)^-1, and
    the naive vs effective discretization steps.

    delta_1 = E (c_{-1,0} + c_{01})^-1 is pair-sampled Monte Carlo; the rest
    is exact atom arithmetic.  Power-law rates have E 1/c = inf, so c_* = 0
    and the subdiffusive exponents are reported instead.
    """
    if isinstance(law, RatesPowerLaw):
        a = law.alpha_exponent
        return EMAReport(
            c_bar=0.0,
            c_star=0.0,
            delta_1=math.inf,
            delta_1_se=0.0,
            delta_star=math.inf,
            sigma_sq_bonds=0.0,
            subdiffusive=True,
            return_exponent=(1.0 - a) / (2.0 - a),
            msd_exponent=2.0 * (1.0 - a) / (2.0 - a),
        )
    if not isinstance(law, BondWeights):
        raise LawError("conductivity requires a bond or rate law")
    ec = law.mean()
    eci = law.mean_inverse()
    c_star = 1.0 / eci
    key = derive_key(seed, DOMAIN_STATS, 0xEA)
    units = counter_unit_array(key, np.arange(2 * n_pairs, dtype=np.int64)).reshape(2, n_pairs)
    thr = cumulative_thresholds([w for _, w in law.atoms])
    vals = law.value_array()
    c1 = vals[pick_atoms(units[0], thr)]
    c2 = vals[pick_atoms(units[1], thr)]
    inv = 1.0 / (c1 + c2)
    return EMAReport(
        c_bar=c_star,
        c_star=c_star,
        delta_1=float(inv.mean()),
        delta_1_se=float(inv.std(ddof=1) / math.sqrt(n_pairs)),
        delta_star=0.5 * eci,
        sigma_sq_bonds=1.0 / (ec * eci),
        subdiffusive=False,
        return_exponent=None,
        msd_exponent=None,
    )
