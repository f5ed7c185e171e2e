"""Environment distributions: per-site jump probabilities, bond weights, rates.

Each law is a small frozen dataclass carrying its atoms (values and weights).
Expectations over discrete laws are always computed exactly from the atoms;
sampling is delegated to the environment module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_WEIGHT_TOL = 1e-12


class LawError(ValueError):
    """Invalid law parameters (weights not summing to 1, values out of range)."""


def _check_weights(weights: Sequence[float], what: str) -> None:
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise LawError(f"{what}: no atoms")
    if np.any(w < 0):
        raise LawError(f"{what}: negative weight")
    if abs(float(w.sum()) - 1.0) > _WEIGHT_TOL:
        raise LawError(f"{what}: weights sum to {w.sum()!r}, not 1")


@dataclass(frozen=True)
class SiteLaw:
    """Base for laws assigning a right-jump probability p to each site.

    Atoms with p = 1 (one-way sites) are permitted; p = 0 is not, since the
    walk could then never move right through the site.
    """

    p_atoms: tuple[float, ...] = field(init=False)
    weights: tuple[float, ...] = field(init=False)

    def _finalize(self, p_atoms, weights):
        _check_weights(weights, type(self).__name__)
        for p in p_atoms:
            if not (0.0 < p <= 1.0):
                raise LawError(f"site probability {p} outside (0, 1]")
        object.__setattr__(self, "p_atoms", tuple(float(p) for p in p_atoms))
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))

    # -- exact atom arithmetic -------------------------------------------

    def rho_atoms(self) -> np.ndarray:
        p = np.asarray(self.p_atoms)
        return (1.0 - p) / p

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights)

    def mean_rho(self) -> float:
        return float(self.weight_array() @ self.rho_atoms())

    def mean_inv_rho(self) -> float:
        rho = self.rho_atoms()
        w = self.weight_array()
        if np.any((rho == 0.0) & (w > 0)):
            return math.inf
        return float(w @ (1.0 / rho))

    def mean_drift(self) -> float:
        """E(p - q), the annealed one-step drift."""
        p = np.asarray(self.p_atoms)
        return float(self.weight_array() @ (2.0 * p - 1.0))

    def log_rho_atoms(self) -> np.ndarray:
        """ln rho per atom; -inf where p = 1."""
        with np.errstate(divide="ignore"):
            return np.log(self.rho_atoms())


@dataclass(frozen=True)
class TwoPointSites(SiteLaw):
    """p_x = beta with probability alpha, p_x = 1 - beta otherwise."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise LawError(f"alpha {self.alpha} outside [0, 1]")
        if not (0.0 < self.beta < 1.0):
            raise LawError(f"beta {self.beta} outside (0, 1)")
        self._finalize((self.beta, 1.0 - self.beta), (self.alpha, 1.0 - self.alpha))


@dataclass(frozen=True)
class Diode(SiteLaw):
    """p_x = beta with probability alpha, p_x = 1 (one-way barrier) otherwise.

    beta is parametrized through rho = (1 - beta)/beta of the two-way sites.
    """

    alpha: float
    rho: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise LawError(f"alpha {self.alpha} outside (0, 1)")
        if self.rho <= 0.0:
            raise LawError(f"rho {self.rho} must be positive")
        beta = 1.0 / (1.0 + self.rho)
        self._finalize((beta, 1.0), (self.alpha, 1.0 - self.alpha))


@dataclass(frozen=True)
class DiscreteSites(SiteLaw):
    """General finite site law: atoms of (p value in (0, 1], weight)."""

    atoms: tuple[tuple[float, float], ...]

    def __init__(self, atoms: Sequence[tuple[float, float]]):
        object.__setattr__(self, "atoms", tuple((float(p), float(w)) for p, w in atoms))
        self._finalize([p for p, _ in self.atoms], [w for _, w in self.atoms])


@dataclass(frozen=True)
class BoundedJump:
    """Jumps restricted to -L..R; each site draws one probability vector atom."""

    L: int
    R: int
    atoms: tuple[tuple[tuple[float, ...], float], ...]

    def __init__(self, L: int, R: int, atoms):
        if L < 1 or R < 1:
            raise LawError("L and R must be positive integers")
        object.__setattr__(self, "L", int(L))
        object.__setattr__(self, "R", int(R))
        norm = []
        for vec, w in atoms:
            v = tuple(float(x) for x in vec)
            if len(v) != L + R + 1:
                raise LawError(f"probability vector length {len(v)} != L+R+1 = {L + R + 1}")
            if any(x < 0 for x in v):
                raise LawError("negative jump probability")
            if abs(sum(v) - 1.0) > _WEIGHT_TOL:
                raise LawError(f"probability vector sums to {sum(v)!r}, not 1")
            norm.append((v, float(w)))
        object.__setattr__(self, "atoms", tuple(norm))
        _check_weights([w for _, w in norm], "BoundedJump")

    def weight_array(self) -> np.ndarray:
        return np.asarray([w for _, w in self.atoms])

    def vector_table(self) -> np.ndarray:
        """(n_atoms, L+R+1) table; column j holds p(j - L)."""
        return np.asarray([v for v, _ in self.atoms])

    def p_of(self, vec: Sequence[float], i: int) -> float:
        """p(i) from a stored vector, i in -L..R."""
        return vec[i + self.L]


@dataclass(frozen=True)
class BondWeights:
    """I.i.d. positive conductances attached to bonds (x, x+1)."""

    atoms: tuple[tuple[float, float], ...]

    def __init__(self, atoms: Sequence[tuple[float, float]]):
        vals = tuple((float(c), float(w)) for c, w in atoms)
        if any(c <= 0 for c, _ in vals):
            raise LawError("bond weight must be positive")
        object.__setattr__(self, "atoms", vals)
        _check_weights([w for _, w in vals], "BondWeights")

    def value_array(self) -> np.ndarray:
        return np.asarray([c for c, _ in self.atoms])

    def weight_array(self) -> np.ndarray:
        return np.asarray([w for _, w in self.atoms])

    def mean(self) -> float:
        return float(self.weight_array() @ self.value_array())

    def mean_inverse(self) -> float:
        return float(self.weight_array() @ (1.0 / self.value_array()))


class Rates(BondWeights):
    """I.i.d. positive jump rates on bonds, c(x, x+1) = c(x+1, x)."""


@dataclass(frozen=True)
class RatesPowerLaw:
    """Rates with density (1 - a) u^(-a) on (0, 1); E 1/c diverges."""

    alpha_exponent: float

    def __post_init__(self):
        if not (0.0 < self.alpha_exponent < 1.0):
            raise LawError(f"alpha_exponent {self.alpha_exponent} outside (0, 1)")

    def mean(self) -> float:
        a = self.alpha_exponent
        return (1.0 - a) / (2.0 - a)

    def mean_inverse(self) -> float:
        return math.inf

    def sample_from_units(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF map: c = u**(1/(1-a)) for uniform u."""
        return u ** (1.0 / (1.0 - self.alpha_exponent))


@dataclass(frozen=True)
class BalancedAxes:
    """Balanced d-dimensional site law: p(e_i) = p(-e_i) drawn per site.

    Each atom is a vector (a_1 .. a_d) of per-axis one-sided probabilities
    with sum 2 * sum(a_i) = 1.
    """

    d: int
    atoms: tuple[tuple[tuple[float, ...], float], ...]

    def __init__(self, d: int, atoms):
        if d not in (2, 3):
            raise LawError("balanced walks support d in {2, 3}")
        object.__setattr__(self, "d", int(d))
        norm = []
        for vec, w in atoms:
            v = tuple(float(x) for x in vec)
            if len(v) != d:
                raise LawError(f"axis vector length {len(v)} != d = {d}")
            if any(x <= 0 for x in v):
                raise LawError("axis probabilities must be positive (elliptic)")
            if abs(2.0 * sum(v) - 1.0) > _WEIGHT_TOL:
                raise LawError(f"2 * sum(axis probs) = {2 * sum(v)!r}, not 1")
            norm.append((v, float(w)))
        object.__setattr__(self, "atoms", tuple(norm))
        _check_weights([w for _, w in norm], "BalancedAxes")

    def weight_array(self) -> np.ndarray:
        return np.asarray([w for _, w in self.atoms])

    def axis_table(self) -> np.ndarray:
        return np.asarray([v for v, _ in self.atoms])


SITE_LAWS = (TwoPointSites, Diode, DiscreteSites)


@dataclass(frozen=True)
class LawReport:
    """validate() output: ellipticity and support diagnostics, report-only."""

    elliptic: bool
    ellipticity_delta: float | None
    has_one_way_sites: bool
    eta: float
    eta_finite: bool
    degenerate: bool
    arithmetic: bool
    lattice_gap: float | None


def _lattice_gap(values: np.ndarray, rel_tol: float = 1e-9) -> float | None:
    """Smallest c > 0 with every value on {0, +-c, +-2c, ...}, else None.

    Real-valued gcd by the Euclid recursion with a relative tolerance;
    finite atom sets only.  Incommensurable values grind the gcd below the
    tolerance floor and report as non-arithmetic.
    """
    vals = np.unique(np.abs(values[np.isfinite(values)]))
    vals = vals[vals > 0]
    if vals.size == 0:
        return None
    scale = float(vals.max())
    tol = rel_tol * scale
    g = float(vals[0])
    for v in vals[1:]:
        a, b = max(float(v), g), min(float(v), g)
        while b > tol:
            a, b = b, math.fmod(a, b)
        g = a
    if g <= 1e-6 * scale:
        return None
    ratios = vals / g
    if np.all(np.abs(ratios - np.round(ratios)) <= 1e-6):
        return float(g)
    return None


def validate(law) -> LawReport:
    """Ellipticity margin, finiteness of E ln rho, and lattice support check.

    One-way sites (p = 1) violate uniform ellipticity by construction and are
    flagged; their ln rho contributes an atom at -infinity.
    """
    if not isinstance(law, SITE_LAWS):
        raise LawError(f"validate expects a site law, got {type(law).__name__}")
    p = np.asarray(law.p_atoms)
    w = law.weight_array()
    active = w > 0
    p, w = p[active], w[active]
    one_way = bool(np.any(p == 1.0))
    two_way = p < 1.0
    if one_way:
        delta = float(np.minimum(p[two_way], 1.0 - p[two_way]).min()) if np.any(two_way) else None
        elliptic = False
    else:
        delta = float(np.minimum(p, 1.0 - p).min())
        elliptic = delta > 0.0
    with np.errstate(divide="ignore"):
        log_rho = np.log((1.0 - p) / p)
    eta = float(w @ log_rho) if not one_way else -math.inf
    degenerate = bool(np.all(log_rho == 0.0))
    finite = log_rho[np.isfinite(log_rho)]
    gap = _lattice_gap(finite)
    # Finitely many atoms always lie on *some* grid unless the gcd recursion
    # fails; a law is reported arithmetic when a common gap exists (the
    # degenerate all-rho-1 case trivially so).
    arithmetic = degenerate or gap is not None
    return LawReport(
        elliptic=elliptic,
        ellipticity_delta=delta,
        has_one_way_sites=one_way,
        eta=eta,
        eta_finite=math.isfinite(eta),
        degenerate=degenerate,
        arithmetic=arithmetic,
        lattice_gap=gap,
    )
