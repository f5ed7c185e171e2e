"""Reproducible environment realization.

A realized environment is a window of per-site (or per-bond) data for one
draw of the law.  The datum at index x is a pure function of
(law, seed, x) -- splitmix64 of the site index under a key derived from the
seed -- so windows can be extended in any order, in chunks, or in parallel
and always produce identical values.
"""
from __future__ import annotations

import threading
from typing import Sequence

import numpy as np

from ._bits import DOMAIN_ENV, DOMAIN_WALK, counter_unit_array, derive_key
from .laws import (
    SITE_LAWS,
    BalancedAxes,
    BondWeights,
    BoundedJump,
    LawError,
    RatesPowerLaw,
    SiteLaw,
)

CHUNK = 4096


class WindowBudgetError(RuntimeError):
    """Window extension would exceed the configured site budget."""


def cumulative_thresholds(weights: Sequence[float]) -> np.ndarray:
    """Sequential-sum cumulative weights; shared by numpy and kernel paths.

    Built by plain left-to-right addition so that the scalar scan used inside
    simulation kernels selects bit-identical atoms.
    """
    acc = 0.0
    out = []
    for w in weights:
        acc += float(w)
        out.append(acc)
    return np.asarray(out)


def pick_atoms(units: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Map uniforms in [0,1) to atom indices via the cumulative thresholds."""
    idx = np.searchsorted(thresholds, units, side="right")
    return np.minimum(idx, len(thresholds) - 1)


class Environment:
    """One realized environment: a lazily extensible window of site data.

    ``kind`` is "site" (float p per site), "jump" (atom index per site, with
    the law's vector table alongside) or "bond" (float weight/rate per bond,
    bond x spanning (x, x+1)).
    """

    def __init__(self, law, seed: int, kind: str):
        self.law = law
        self.seed = int(seed)
        self.kind = kind
        self.key = derive_key(self.seed, DOMAIN_ENV)
        self.max_sites = 1 << 25
        self._lock = threading.Lock()
        self._lo = 0
        self._hi = 0
        if kind == "site":
            self._thresholds = cumulative_thresholds(law.weights)
            self._values = np.asarray(law.p_atoms)
        elif kind == "jump":
            self._thresholds = cumulative_thresholds([w for _, w in law.atoms])
            self._table = law.vector_table()
        elif kind == "bond":
            if isinstance(law, BondWeights):
                self._thresholds = cumulative_thresholds([w for _, w in law.atoms])
                self._values = law.value_array()
            else:
                self._thresholds = None
        else:
            raise LawError(f"unknown environment kind {kind!r}")
        self._data = self._fill(np.empty(0, dtype=np.int64))

    # -- realization -------------------------------------------------------

    def _fill(self, counters: np.ndarray) -> np.ndarray:
        units = counter_unit_array(self.key, counters)
        if self.kind == "jump":
            return pick_atoms(units, self._thresholds).astype(np.int64)
        if self.kind == "bond" and isinstance(self.law, RatesPowerLaw):
            return self.law.sample_from_units(units)
        return self._values[pick_atoms(units, self._thresholds)]

    def ensure(self, a: int, b: int) -> None:
        """Realize (at least) indices a..b inclusive; never re-randomizes."""
        if a > b:
            raise ValueError(f"empty range {a}..{b}")
        with self._lock:
            if self._lo < self._hi and self._lo <= a and b < self._hi:
                return
            span = self._hi - self._lo
            pad = max(CHUNK, span // 2)
            lo, hi = self._lo, self._hi
            if self._lo >= self._hi:  # first realization
                new_lo = CHUNK * (a // CHUNK)
                new_hi = CHUNK * (-(-(b + 1) // CHUNK))
                lo = hi = new_lo
            else:
                new_lo = min(lo, CHUNK * ((a - (pad if a < lo else 0)) // CHUNK))
                new_hi = max(hi, CHUNK * (-(-(b + 1 + (pad if b >= hi else 0)) // CHUNK)))
            if new_hi - new_lo > self.max_sites:
                raise WindowBudgetError(
                    f"window {new_lo}..{new_hi} exceeds budget of {self.max_sites} sites"
                )
            parts = []
            if new_lo < lo:
                parts.append(self._fill(np.arange(new_lo, min(lo, new_hi), dtype=np.int64)))
            if self._lo < self._hi:
                parts.append(self._data)
            if new_hi > hi:
                parts.append(self._fill(np.arange(max(hi, new_lo), new_hi, dtype=np.int64)))
            self._data = np.concatenate(parts) if len(parts) != 1 else parts[0]
            self._lo, self._hi = new_lo, new_hi

    @property
    def window(self) -> tuple[int, int]:
        """Realized inclusive index range."""
        return self._lo, self._hi - 1

    def _slice(self, a: int, b: int) -> np.ndarray:
        self.ensure(a, b)
        return self._data[a - self._lo : b + 1 - self._lo]

    # -- site access ---------------------------------------------------------

    def p(self, x: int) -> float:
        if self.kind != "site":
            raise LawError("p(x) requires a site environment")
        return float(self._slice(x, x)[0])

    def p_window(self, a: int, b: int) -> np.ndarray:
        if self.kind != "site":
            raise LawError("p_window requires a site environment")
        return self._slice(a, b)

    def rho_window(self, a: int, b: int) -> np.ndarray:
        p = self.p_window(a, b)
        return (1.0 - p) / p

    def log_rho_window(self, a: int, b: int) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.rho_window(a, b))

    def bond(self, x: int) -> float:
        if self.kind != "bond":
            raise LawError("bond(x) requires a bond environment")
        return float(self._slice(x, x)[0])

    def bond_window(self, a: int, b: int) -> np.ndarray:
        if self.kind != "bond":
            raise LawError("bond_window requires a bond environment")
        return self._slice(a, b)

    def site_p_from_bonds(self, a: int, b: int) -> np.ndarray:
        """Right-jump probabilities c(x,x+1)/(c(x-1,x)+c(x,x+1)) for sites a..b."""
        c = self.bond_window(a - 1, b)
        return c[1:] / (c[:-1] + c[1:])

    def jump_atom_window(self, a: int, b: int) -> np.ndarray:
        if self.kind != "jump":
            raise LawError("jump_atom_window requires a bounded-jump environment")
        return self._slice(a, b)

    def jump_table(self) -> np.ndarray:
        return self._table

    def jump_vector(self, x: int) -> np.ndarray:
        return self._table[int(self.jump_atom_window(x, x)[0])]


def realize(law, seed: int, span: tuple[int, int]) -> Environment:
    """Realize a reproducible environment covering the inclusive span.

    Deterministic per (law, seed); the window extends lazily afterwards.
    """
    a, b = span
    if a > b:
        raise ValueError(f"empty site range {span}")
    if isinstance(law, SITE_LAWS) or isinstance(law, SiteLaw):
        kind = "site"
    elif isinstance(law, BoundedJump):
        kind = "jump"
    elif isinstance(law, (BondWeights, RatesPowerLaw)):
        kind = "bond"
    elif isinstance(law, BalancedAxes):
        raise LawError("balanced laws are realized on the fly by the simulator")
    else:
        raise LawError(f"cannot realize {type(law).__name__}")
    env = Environment(law, seed, kind)
    env.ensure(a, b)
    return env


def site_rho(env: Environment, x: int) -> float:
    """Odds ratio (1-p_x)/p_x; exactly 0 at one-way sites (p_x = 1)."""
    p = env.p(x)
    if p <= 0.0:
        raise LawError(f"nonpositive p at site {x}")
    return (1.0 - p) / p


# -- ensemble keying ---------------------------------------------------------


def ensemble_env_seed(base_seed: int, index: int) -> int:
    """Seed for environment #index of an ensemble keyed by base_seed."""
    return int(derive_key(base_seed, DOMAIN_ENV, index))


def walk_stream_key(base_seed: int, env_index: int, walk_index: int) -> np.uint64:
    """Counter-stream key for walk #walk_index in environment #env_index."""
    return derive_key(base_seed, DOMAIN_WALK, env_index, walk_index)


def ensemble_unit_matrix(base_seed: int, env_indices, sites: np.ndarray) -> np.ndarray:
    """(n_env, len(sites)) uniforms, row i matching environment env_indices[i].

    Each row equals what realize(law, ensemble_env_seed(base_seed, e), ...)
    would produce at the given site indices, before the law mapping.
    env_indices may be an int n (meaning range(n)) or an iterable of indices.
    """
    if isinstance(env_indices, int):
        env_indices = range(env_indices)
    keys = np.array(
        [derive_key(ensemble_env_seed(base_seed, e), DOMAIN_ENV) for e in env_indices],
        dtype=np.uint64,
    )
    c = sites.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = keys[:, None] + (c[None, :] + np.uint64(1)) * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def ensemble_site_p_matrix(law, base_seed: int, n_env: int, sites: np.ndarray) -> np.ndarray:
    """(n_env, len(sites)) matrix of p values for a site law."""
    if not isinstance(law, SiteLaw):
        raise LawError("site-p matrix requires a site law")
    units = ensemble_unit_matrix(base_seed, n_env, sites)
    thr = cumulative_thresholds(law.weights)
    return np.asarray(law.p_atoms)[pick_atoms(units, thr)]
