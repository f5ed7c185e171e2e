"""Estimators and hypothesis checks for the limit-theorem verdicts.

Velocity and scaling-exponent fits, Hill tail indices with bootstrap
intervals, exact Kolmogorov-Smirnov distances, the recurrent-regime
rescaling checks, and detrended-oscillation minima.  Every estimator is a
deterministic function of its sample set: bootstrap seeds are derived from
a digest of the data.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov, ndtr

from . import annealed
from ._bits import DOMAIN_STATS, derive_key
from .simulate import EnsembleResult


@dataclass(frozen=True)
class ScalingFit:
    """A straight-line fit of statistic vs n with a bootstrap interval."""

    ns: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    residual: float
    ci_low: float
    ci_high: float


def _data_seed(*arrays) -> int:
    h = hashlib.blake2b(digest_size=8)
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return int.from_bytes(h.digest(), "little")


def _bootstrap_slopes(xs, rows, stat, n_boot: int, seed: int) -> np.ndarray:
    """Slope distribution under resampling of ensemble rows."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = rows.shape[0]
    out = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        ys = stat(rows[idx])
        out[b] = np.polyfit(xs, ys, 1)[0]
    return out


def _fit(xs, ys, rows, stat, n_boot, seed) -> ScalingFit:
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
    boots = _bootstrap_slopes(xs, rows, stat, n_boot, seed)
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return ScalingFit(
        ns=np.asarray(xs),
        values=np.asarray(ys),
        slope=float(slope),
        intercept=float(intercept),
        residual=resid,
        ci_low=float(lo),
        ci_high=float(hi),
    )


def velocity_fit(result: EnsembleResult, n_boot: int = 200) -> ScalingFit:
    """Slope of mean position vs step count over the checkpoint grid."""
    ns = result.checkpoint_steps.astype(float)
    if ns.size < 4:
        raise ValueError("need at least 4 checkpoints for a velocity fit")
    rows = result.positions.astype(float)
    stat = lambda r: r.mean(axis=0)
    return _fit(ns, stat(rows), rows, stat, n_boot, _data_seed(result.positions))


def hitting_scaling(result: EnsembleResult, n_boot: int = 200) -> ScalingFit:
    """Slope of ln median(T_n) vs ln n over the recorded levels.

    Medians, not means: in the sub-ballistic regime the annealed mean
    hitting time is infinite.
    """
    lv = result.levels.astype(float)
    if lv.size < 3:
        raise ValueError("need at least 3 levels")
    t = np.where(result.hit_times < 0, np.inf, result.hit_times.astype(float))
    med = np.median(t, axis=0)
    if not np.all(np.isfinite(med)):
        raise ValueError("a level was missed by at least half the walks")
    stat = lambda r: np.log(np.median(r, axis=0))
    return _fit(np.log(lv), np.log(med), t, stat, n_boot, _data_seed(result.hit_times))


def displacement_scaling(result: EnsembleResult, n_boot: int = 200, min_n: int = 1) -> ScalingFit:
    """Slope of ln mean X_n vs ln n (the sub-ballistic growth exponent)."""
    keep = result.checkpoint_steps >= min_n
    ns = result.checkpoint_steps[keep].astype(float)
    rows = result.positions[:, keep].astype(float)
    stat = lambda r: np.log(r.mean(axis=0))
    return _fit(np.log(ns), stat(rows), rows, stat, n_boot, _data_seed(result.positions, np.array([min_n])))


@dataclass(frozen=True)
class TailIndex:
    index: float
    ci_low: float
    ci_high: float
    k: int
    heavy: bool  # False when the estimate indicates a light tail (index > 5)


def tail_index(samples, n_boot: int = 200, k: int | None = None) -> TailIndex:
    """Hill estimator of the tail index over the top sqrt(N) order statistics.

    Bootstrap percentile interval with a data-derived seed.  Light-tailed
    samples (e.g. exponential) produce a large index and are flagged.
    """
    x = np.asarray(samples, dtype=float)
    x = x[x > 0]
    n = x.size
    if n < 10**4:
        raise ValueError("need at least 1e4 positive samples")
    if k is None:
        k = int(math.sqrt(n))

    def hill(data: np.ndarray) -> float:
        srt = np.sort(data)
        top = srt[-k:]
        ref = srt[-k - 1]
        return 1.0 / float(np.mean(np.log(top) - math.log(ref)))

    est = hill(x)
    rng = np.random.Generator(np.random.Philox(key=_data_seed(x)))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        boots[b] = hill(x[rng.integers(0, n, size=n)])
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return TailIndex(index=float(est), ci_low=float(lo), ci_high=float(hi), k=k, heavy=est <= 5.0)


@dataclass(frozen=True)
class KSResult:
    distance: float
    p_value: float
    passed: bool
    n: int


def ks_distance(samples, cdf) -> float:
    """Exact one-sample KS distance sup |F_n - F| for a callable CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def ks_normal(samples, mean: float, variance: float, level: float = 0.05) -> KSResult:
    """KS test of the samples against a normal law with the given moments."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    x = np.asarray(samples, dtype=float)
    if x.size < 10**3:
        raise ValueError("need at least 1e3 samples")
    z = (x - mean) / math.sqrt(variance)
    d = ks_distance(z, ndtr)
    p = float(kolmogorov(math.sqrt(x.size) * d))
    return KSResult(distance=d, p_value=p, passed=p > level, n=x.size)


def ks_against(samples, cdf, level: float = 0.05) -> KSResult:
    d = ks_distance(samples, cdf)
    n = len(samples)
    p = float(kolmogorov(math.sqrt(n) * d))
    return KSResult(distance=d, p_value=p, passed=p > level, n=n)


@dataclass(frozen=True)
class SinaiReport:
    """Recurrent-regime rescaling: KS distances of sigma^2 X_n / ln^2 n
    against the limit CDF per horizon, and the growth fit of E max |X|."""

    horizons: np.ndarray
    ks_distances: np.ndarray
    rescaled_last: np.ndarray
    maxabs_slope: float
    maxabs_ci: tuple[float, float]


def sinai_rescale(result: EnsembleResult, sigma_sq: float, law=None, n_boot: int = 200) -> SinaiReport:
    """Rescale positions on the ln^2 n scale and compare against the limit law.

    Requires a recurrent, non-degenerate law; the second output is the slope
    of ln E max|X| vs ln ln n, which the localization scale puts at 2.
    """
    if law is not None:
        cls = annealed.classify(law)
        if cls.kind is not annealed.Transience.RECURRENT:
            raise ValueError("recurrent law required")
        if cls.degenerate:
            raise ValueError("degenerate law (rho = 1 a.s.) is excluded")
    if result.max_abs_at is None:
        raise ValueError("ensemble lacks per-checkpoint max |X| tracking")
    ns = result.checkpoint_steps.astype(float)
    ks = np.empty(ns.size)
    rescaled = None
    for j, n in enumerate(ns):
        samples = sigma_sq * result.positions[:, j] / math.log(n) ** 2
        ks[j] = ks_distance(samples, annealed.sinai_cdf)
        rescaled = samples
    loglog = np.log(np.log(ns))
    maxmean = np.log(result.max_abs_at.mean(axis=0))
    rows = result.max_abs_at.astype(float)
    stat = lambda r: np.log(r.mean(axis=0))
    fit = _fit(loglog, maxmean, rows, stat, n_boot, _data_seed(result.max_abs_at))
    return SinaiReport(
        horizons=result.checkpoint_steps,
        ks_distances=ks,
        rescaled_last=rescaled,
        maxabs_slope=fit.slope,
        maxabs_ci=(fit.ci_low, fit.ci_high),
    )


class OscillationError(ValueError):
    """Fewer than two detrended minima were found."""


@dataclass(frozen=True)
class OscillationReport:
    minima_log_n: np.ndarray
    mean_spacing: float
    detrended: np.ndarray
    log_n: np.ndarray


def oscillation_minima(ns, means, kappa: float, min_n: int = 10) -> OscillationReport:
    """Locate minima of the detrended displacement curve on the ln n axis.

    Detrends E X_n by n^kappa, finds interior local minima, and refines each
    by a three-point quadratic fit (checkpoints are discrete; minima fall
    between grid points).
    """
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    keep = (ns >= min_n) & (means > 0)
    ns, means = ns[keep], means[keep]
    log_n = np.log(ns)
    y = np.log(means) - kappa * log_n
    minima = []
    for i in range(1, len(y) - 1):
        if y[i] <= y[i - 1] and y[i] < y[i + 1]:
            x0, x1, x2 = log_n[i - 1], log_n[i], log_n[i + 1]
            y0, y1, y2 = y[i - 1], y[i], y[i + 1]
            denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
            a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
            b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
            minima.append(-b / (2 * a) if a > 0 else x1)
    if len(minima) < 2:
        raise OscillationError(f"found {len(minima)} minima, need at least 2")
    minima = np.asarray(minima)
    return OscillationReport(
        minima_log_n=minima,
        mean_spacing=float(np.diff(minima).mean()),
        detrended=y,
        log_n=log_n,
    )
