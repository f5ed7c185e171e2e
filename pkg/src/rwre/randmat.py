"""Transfer matrices for bounded-jump walks and Lyapunov-exponent estimation.

The hitting-probability differences of a walk with jumps in -L..R propagate
through companion-form matrices of order d = L+R-1 (top row of coefficient
ratios, shifted identity below).  Products of these i.i.d. matrices are
analyzed through their Lyapunov spectrum; the sign of gamma_R classifies
transience exactly as eta does for nearest-neighbor walks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._bits import DOMAIN_ENV, derive_key
from .environment import cumulative_thresholds
from .laws import BoundedJump, LawError

DEFAULT_BATCHES = 100


@dataclass(frozen=True)
class TransferMatrix:
    """Companion matrix of one site's jump vector."""

    L: int
    R: int
    matrix: np.ndarray

    @property
    def order(self) -> int:
        return self.L + self.R - 1


def _top_row(p_vec: np.ndarray, L: int, R: int) -> np.ndarray:
    """Top row [a(R-1) .. a(1), b(1) .. b(L)] of the companion matrix.

    b(i) sums the left-jump tail probabilities, a(i) the right-jump tail,
    both normalized by the extreme right jump p(R) (which equals p(1) in
    the single-right-step case).
    """
    pR = p_vec[L + R]
    if pR <= 0.0 or p_vec[0] <= 0.0:
        raise LawError("boundary jump probabilities p(-L), p(R) must be positive")
    row = np.empty(L + R - 1)
    for i in range(R - 1, 0, -1):  # a(R-1) .. a(1)
        row[R - 1 - i] = -p_vec[L + i : L + R + 1].sum() / pR
    for i in range(1, L + 1):  # b(1) .. b(L)
        row[R - 2 + i] = p_vec[0 : L - i + 1].sum() / pR
    return row


def transfer_matrix(p_vec, L: int, R: int) -> TransferMatrix:
    """Companion matrix for one probability vector over jumps -L..R."""
    p = np.asarray(p_vec, dtype=float)
    if p.shape != (L + R + 1,):
        raise LawError(f"need a vector of length L+R+1 = {L + R + 1}")
    if abs(p.sum() - 1.0) > 1e-12:
        raise LawError("jump probabilities must sum to 1")
    d = L + R - 1
    m = np.zeros((d, d))
    m[0] = _top_row(p, L, R)
    for i in range(1, d):
        m[i, i - 1] = 1.0
    return TransferMatrix(L=L, R=R, matrix=m)


def _law_top_rows(law: BoundedJump) -> np.ndarray:
    return np.vstack([_top_row(np.asarray(vec), law.L, law.R) for vec, _ in law.atoms])


def _batch_ends(n: int, n_batches: int) -> np.ndarray:
    ends = np.linspace(n / n_batches, n, n_batches).round().astype(np.int64)
    return np.unique(ends)


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float
    n: int


@dataclass(frozen=True)
class LyapunovSpectrum:
    """Estimates gamma_1 >= ... >= gamma_k with batch-means standard errors."""

    gammas: np.ndarray
    stderrs: np.ndarray
    partial_sums: np.ndarray
    n: int
    seed: int
    restarts: int = 0


def _stream_key(law: BoundedJump, seed: int) -> np.uint64:
    return derive_key(seed, DOMAIN_ENV, 0x11A9)


def top_lyapunov(
    law: BoundedJump,
    n: int,
    seed: int,
    cadence: int = 1,
    n_batches: int = DEFAULT_BATCHES,
) -> LyapunovEstimate:
    """Largest Lyapunov exponent by renormalized vector iteration.

    Accumulates log norms along the product of n i.i.d. matrices drawn from
    the law's atom stream; the standard error comes from batch means
    (products are correlated, so the naive variance would be optimistic).
    """
    if n < n_batches:
        raise ValueError("n too small for the batch count")
    rows = _law_top_rows(law)
    thr = cumulative_thresholds([w for _, w in law.atoms])
    ends = _batch_ends(n, n_batches)
    batch_logs = np.zeros(len(ends))
    total = K.lyap_top(rows, thr, _stream_key(law, seed), n, cadence, ends, batch_logs)
    if math.isnan(total):
        raise ArithmeticError("vector iteration collapsed to zero norm")
    incr = np.diff(np.concatenate(([0.0], batch_logs)))
    lens = np.diff(np.concatenate(([0], ends))).astype(float)
    means = incr / lens
    est = total / n
    se = float(means.std(ddof=1) / math.sqrt(len(means)))
    return LyapunovEstimate(value=float(est), stderr=se, n=n)


def lyapunov_spectrum(
    law: BoundedJump,
    k: int | None = None,
    n: int = 10**5,
    seed: int = 0,
    cadence: int = 4,
    n_batches: int = DEFAULT_BATCHES,
    max_restarts: int = 3,
) -> LyapunovSpectrum:
    """First k Lyapunov exponents via an evolved orthonormal frame.

    The log-volume growth of the leading j-subframe estimates
    gamma_1 + ... + gamma_j; differences give the individual exponents.
    Frame degeneracy triggers a re-seeded restart (reported).
    """
    d = law.L + law.R - 1
    if k is None:
        k = d
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d = {d}")
    rows = _law_top_rows(law)
    thr = cumulative_thresholds([w for _, w in law.atoms])
    ends = _batch_ends(n, n_batches)
    restarts = 0
    while True:
        batch_logs = np.zeros((len(ends), k))
        status = K.lyap_frame(rows, thr, _stream_key(law, seed + restarts), n, k, cadence, ends, batch_logs)
        if status == 0:
            break
        restarts += 1
        if restarts > max_restarts:
            raise ArithmeticError("frame degenerated repeatedly")
    partial = batch_logs[-1]  # cumulative log r_ii over the whole run
    gammas = partial / n
    incr = np.diff(np.concatenate((np.zeros((1, k)), batch_logs), axis=0), axis=0)
    lens = np.diff(np.concatenate(([0], ends))).astype(float)[:, None]
    means = incr / lens
    ses = means.std(axis=0, ddof=1) / math.sqrt(means.shape[0])
    return LyapunovSpectrum(
        gammas=gammas,
        stderrs=ses,
        partial_sums=np.cumsum(gammas),
        n=n,
        seed=seed,
        restarts=restarts,
    )


@dataclass(frozen=True)
class BoundedClassification:
    kind: str  # "transient+", "transient-", "recurrent-indeterminate"
    gamma_r: float
    stderr: float
    confidence_radius: float


def classify_bounded(law: BoundedJump, n: int = 10**5, seed: int = 0, z: float = 3.0) -> BoundedClassification:
    """Transience via the sign of gamma_R, with a z-standard-error interval.

    An interval containing 0 is reported as recurrent-indeterminate: the
    sign test cannot distinguish slow transience from recurrence.
    """
    spec = lyapunov_spectrum(law, k=law.R, n=n, seed=seed)
    gamma_r = float(spec.gammas[law.R - 1])
    se = float(spec.stderrs[law.R - 1])
    radius = z * se
    if gamma_r < -radius:
        kind = "transient+"
    elif gamma_r > radius:
        kind = "transient-"
    else:
        kind = "recurrent-indeterminate"
    return BoundedClassification(kind=kind, gamma_r=gamma_r, stderr=se, confidence_radius=radius)


def log_abs_det_mean(law: BoundedJump) -> float:
    """Exact E ln |det M| from atoms: |det| of the companion block is the
    last top-row entry, p(-L)/p(R)."""
    total = 0.0
    for vec, w in law.atoms:
        total += w * math.log(vec[0] / vec[-1])
    return total
