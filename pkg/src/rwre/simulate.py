"""High-throughput quenched walk engines and deterministic annealed ensembles.

All engines draw per-walk randomness from counter-based streams keyed by
(base seed, environment index, walk index), so an ensemble is a pure
function of its configuration: results are bit-identical across thread
counts and scheduling orders.  Environments extend lazily as walks wander.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from ._bits import DOMAIN_ENV, DOMAIN_WALK, derive_key
from .environment import (
    Environment,
    ensemble_env_seed,
    realize,
    walk_stream_key,
)
from .laws import BalancedAxes, BondWeights, BoundedJump, LawError, RatesPowerLaw, SiteLaw

EXTEND_BLOCK = 4096


class BudgetExhausted(RuntimeError):
    """A run hit its step/event budget; a resumable partial file was written."""

    def __init__(self, message: str, partial_path: str | None = None):
        super().__init__(message)
        self.partial_path = partial_path


def default_threads() -> int:
    env = os.environ.get("RWRE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def geometric_checkpoints(max_steps: int, per_decade: int = 8) -> np.ndarray:
    """Geometric checkpoint grid (powers of 10^(1/per_decade)), deduplicated,
    always ending at max_steps."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    ks = np.arange(0, int(per_decade * math.log10(max_steps)) + 2)
    vals = np.unique(np.round(10.0 ** (ks / per_decade)).astype(np.int64))
    vals = vals[(vals >= 1) & (vals <= max_steps)]
    if vals.size == 0 or vals[-1] != max_steps:
        vals = np.append(vals, max_steps)
    return vals


@dataclass
class TrajectoryRecord:
    """One quenched walk: checkpointed positions, hitting data, extremes."""

    env_seed: int
    walk_seed: int
    steps: float
    checkpoint_steps: np.ndarray
    checkpoint_positions: np.ndarray
    levels: np.ndarray
    hitting_times: np.ndarray
    left_steps_at_hit: np.ndarray
    final_position: np.ndarray | int
    max_abs_position: int
    checkpoint_max_abs: np.ndarray | None = None
    checkpoint_returns: np.ndarray | None = None
    left_steps: int | None = None
    path: np.ndarray | None = None
    events: int | None = None
    returns_to_origin: int | None = None
    axis_occupation: np.ndarray | None = None


def _as_level_array(levels) -> np.ndarray:
    if levels is None:
        levels = ()
    lv = np.asarray(sorted(set(int(x) for x in levels)), dtype=np.int64)
    if lv.size and lv[0] <= 0:
        raise ValueError("levels must be positive site indices")
    return lv


def _as_checkpoint_array(checkpoints, steps) -> np.ndarray:
    if checkpoints is None:
        cps = geometric_checkpoints(int(steps))
    else:
        cps = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if cps.size and (cps[0] < 1 or cps[-1] > steps):
        raise ValueError("checkpoints must lie in 1..steps")
    return cps


def _site_p_view(env: Environment) -> tuple[np.ndarray, int]:
    """(p array, lo) covering the full realized window, for any walkable law."""
    lo, hi = env.window
    if env.kind == "site":
        return env.p_window(lo, hi), lo
    if env.kind == "bond":
        # site x in lo+1..hi-? needs bonds x-1 and x
        return env.site_p_from_bonds(lo + 1, hi), lo + 1
    raise LawError("nearest-neighbor walk needs a site or bond environment")


def run_walk(
    env: Environment,
    steps: int,
    walk_seed: int,
    checkpoints=None,
    levels=None,
    record_path: bool = False,
    stop_after_levels: bool = False,
) -> TrajectoryRecord:
    """Simulate one nearest-neighbor walk in a fixed environment.

    The environment window grows on demand; the walk state is carried across
    window extensions without disturbing the random stream.
    """
    key = derive_key(walk_seed, DOMAIN_WALK)
    return _drive_nn(env, steps, key, checkpoints, levels, record_path, env.seed, walk_seed, stop_after_levels)


def _drive_nn(env, steps, key, checkpoints, levels, record_path, env_seed, walk_seed, stop_after_levels=False) -> TrajectoryRecord:
    cps = _as_checkpoint_array(checkpoints, steps)
    lv = _as_level_array(levels)
    cp_pos = np.zeros(len(cps), dtype=np.int64)
    cp_maxabs = np.zeros(len(cps), dtype=np.int64)
    cp_returns = np.zeros(len(cps), dtype=np.int64)
    lvl_t = np.full(len(lv), -1, dtype=np.int64)
    lvl_lefts = np.full(len(lv), -1, dtype=np.int64)
    path = np.zeros(steps + 1 if record_path else 0, dtype=np.int64)
    state = np.zeros(K.STATE_LEN, dtype=np.int64)
    stop = bool(stop_after_levels and len(lv))
    env.ensure(-EXTEND_BLOCK, EXTEND_BLOCK)
    while True:
        p, lo = _site_p_view(env)
        status = K.nn_walk(p, lo, key, steps, cps, cp_pos, cp_maxabs, cp_returns, lv, lvl_t, lvl_lefts, stop, path, record_path, state)
        if status == K.DONE:
            break
        x = int(state[K.S_X])
        if status == K.NEED_LEFT:
            env.ensure(x - 1, x)
        else:
            env.ensure(x, x + 1)
    if record_path:
        path = path[: int(state[K.S_T]) + 1]
    return TrajectoryRecord(
        env_seed=env_seed,
        walk_seed=walk_seed,
        steps=steps,
        checkpoint_steps=cps,
        checkpoint_positions=cp_pos,
        levels=lv,
        hitting_times=lvl_t,
        left_steps_at_hit=lvl_lefts,
        final_position=int(state[K.S_X]),
        max_abs_position=int(max(state[K.S_MAX], -state[K.S_MIN])),
        checkpoint_max_abs=cp_maxabs,
        checkpoint_returns=cp_returns,
        left_steps=int(state[K.S_LEFTS]),
        path=path if record_path else None,
    )


def run_bounded_jump(
    env: Environment,
    steps: int,
    walk_seed: int,
    checkpoints=None,
    levels=None,
    record_path: bool = False,
) -> TrajectoryRecord:
    """Simulate one bounded-jump walk (jumps in -L..R) in a fixed environment."""
    if not isinstance(env.law, BoundedJump):
        raise LawError("run_bounded_jump requires a bounded-jump environment")
    key = derive_key(walk_seed, DOMAIN_WALK)
    cps = _as_checkpoint_array(checkpoints, steps)
    lv = _as_level_array(levels)
    cp_pos = np.zeros(len(cps), dtype=np.int64)
    lvl_t = np.full(len(lv), -1, dtype=np.int64)
    lvl_lefts = np.full(len(lv), -1, dtype=np.int64)
    path = np.zeros(steps + 1 if record_path else 0, dtype=np.int64)
    state = np.zeros(K.STATE_LEN, dtype=np.int64)
    table = env.jump_table()
    env.ensure(-EXTEND_BLOCK, EXTEND_BLOCK)
    while True:
        lo, hi = env.window
        atoms = env.jump_atom_window(lo, hi)
        status = K.bounded_walk(
            atoms, table, env.law.L, lo, key, steps, cps, cp_pos, lv, lvl_t, lvl_lefts, path, record_path, state
        )
        if status == K.DONE:
            break
        x = int(state[K.S_X])
        margin = max(env.law.L, env.law.R)
        if status == K.NEED_LEFT:
            env.ensure(x - margin, x)
        else:
            env.ensure(x, x + margin)
    return TrajectoryRecord(
        env_seed=env.seed,
        walk_seed=walk_seed,
        steps=steps,
        checkpoint_steps=cps,
        checkpoint_positions=cp_pos,
        levels=lv,
        hitting_times=lvl_t,
        left_steps_at_hit=lvl_lefts,
        final_position=int(state[K.S_X]),
        max_abs_position=int(max(state[K.S_MAX], -state[K.S_MIN])),
        left_steps=None,
        path=path if record_path else None,
    )


def run_ctrw(
    env: Environment,
    t_max: float,
    walk_seed: int,
    time_checkpoints=None,
    max_events: int = 10**9,
) -> TrajectoryRecord:
    """Simulate one continuous-time walk with exponential sojourns.

    The total rate at x is c(x,x-1)+c(x,x+1); the embedded jump chain is
    exactly the random-bond walk.  Exceeding max_events raises
    BudgetExhausted.
    """
    if env.kind != "bond":
        raise LawError("run_ctrw requires a bond/rate environment")
    key = derive_key(walk_seed, DOMAIN_WALK)
    if time_checkpoints is None:
        time_checkpoints = ()
    cps = np.asarray(sorted(float(c) for c in time_checkpoints))
    if cps.size and (cps[0] <= 0 or cps[-1] > t_max):
        raise ValueError("time checkpoints must lie in (0, t_max]")
    cp_pos = np.zeros(len(cps), dtype=np.int64)
    state = np.zeros(K.STATE_LEN, dtype=np.int64)
    fstate = np.zeros(1)
    env.ensure(-EXTEND_BLOCK, EXTEND_BLOCK)
    while True:
        lo, hi = env.window
        bonds = env.bond_window(lo, hi)
        status = K.ctrw_walk(bonds, lo, key, float(t_max), max_events, cps, cp_pos, state, fstate)
        if status == K.DONE:
            break
        x = int(state[1])
        if status == K.NEED_LEFT:
            env.ensure(x - 2, x)
        elif status == K.NEED_RIGHT:
            env.ensure(x, x + 2)
        else:
            raise BudgetExhausted(f"ctrw event budget {max_events} reached at t={fstate[0]:.6g}")
    return TrajectoryRecord(
        env_seed=env.seed,
        walk_seed=walk_seed,
        steps=float(t_max),
        checkpoint_steps=cps,
        checkpoint_positions=cp_pos,
        levels=np.empty(0, dtype=np.int64),
        hitting_times=np.empty(0, dtype=np.int64),
        left_steps_at_hit=np.empty(0, dtype=np.int64),
        final_position=int(state[1]),
        max_abs_position=int(max(state[K.S_MAX], -state[K.S_MIN])),
        events=int(state[0]),
    )


def run_balanced(
    d: int,
    law: BalancedAxes,
    steps: int,
    walk_seed: int,
    env_seed: int,
    checkpoints=None,
) -> TrajectoryRecord:
    """Simulate one balanced walk on the d-dimensional lattice.

    The per-site axis probabilities are hashed from the coordinates under
    the environment key, so no window bookkeeping is needed.
    """
    if not isinstance(law, BalancedAxes) or law.d != d:
        raise LawError("law must be BalancedAxes with matching dimension")
    from .environment import cumulative_thresholds

    env_key = derive_key(env_seed, DOMAIN_ENV)
    walk_key = derive_key(walk_seed, DOMAIN_WALK)
    cps = _as_checkpoint_array(checkpoints, steps)
    cp_pos = np.zeros((len(cps), d), dtype=np.int64)
    cp_returns = np.zeros(len(cps), dtype=np.int64)
    qv = np.zeros(d)
    thr = cumulative_thresholds([w for _, w in law.atoms])
    table = law.axis_table()
    returns = K.balanced_walk(d, thr, table, env_key, walk_key, steps, cps, cp_pos, cp_returns, qv)
    final = cp_pos[-1] if len(cps) and cps[-1] == steps else None
    return TrajectoryRecord(
        env_seed=env_seed,
        walk_seed=walk_seed,
        steps=steps,
        checkpoint_steps=cps,
        checkpoint_positions=cp_pos,
        levels=np.empty(0, dtype=np.int64),
        hitting_times=np.empty(0, dtype=np.int64),
        left_steps_at_hit=np.empty(0, dtype=np.int64),
        final_position=final,
        max_abs_position=int(np.abs(cp_pos).max()) if len(cps) else 0,
        returns_to_origin=int(returns),
        axis_occupation=qv,
        checkpoint_returns=cp_returns,
    )


def regeneration_diagnostic(path: np.ndarray) -> np.ndarray:
    """Times t with X_t above every earlier position and at or below every
    later one: the walk never backtracks past such a point.  Diagnostic only."""
    x = np.asarray(path)
    if x.ndim != 1:
        raise ValueError("need a 1-D trajectory")
    prefix_max = np.concatenate(([np.iinfo(np.int64).min], np.maximum.accumulate(x)[:-1]))
    suffix_min = np.minimum.accumulate(x[::-1])[::-1]
    return np.nonzero((x > prefix_max) & (x == suffix_min))[0]


# -- ensembles ----------------------------------------------------------------


@dataclass
class EnsembleResult:
    """Aggregated annealed statistics over (environment, walk) pairs.

    Row e * n_walks + w of each array belongs to walk w in environment e;
    aggregation is a fixed-order reduction over these arrays, so results do
    not depend on thread count.
    """

    law_repr: str
    base_seed: int
    n_env: int
    n_walks: int
    steps: float
    checkpoint_steps: np.ndarray
    levels: np.ndarray
    positions: np.ndarray
    hit_times: np.ndarray
    left_at_hit: np.ndarray
    finals: np.ndarray
    max_abs: np.ndarray
    max_abs_at: np.ndarray | None = None
    returns_at: np.ndarray | None = None
    events: np.ndarray | None = None
    completed_envs: int = 0

    @property
    def n_total(self) -> int:
        return self.n_env * self.n_walks

    def mean_positions(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def var_positions(self) -> np.ndarray:
        return self.positions.var(axis=0, ddof=1)

    def quantile_positions(self, q) -> np.ndarray:
        return np.quantile(self.positions, q, axis=0)

    def sign_frequencies(self) -> dict[str, np.ndarray]:
        pos = (self.positions > 0).mean(axis=0)
        neg = (self.positions < 0).mean(axis=0)
        return {"positive": pos, "negative": neg, "zero": 1.0 - pos - neg}

    def hitting_quantiles(self, q) -> np.ndarray:
        """Quantiles of T_level over walks that reached the level; unreached
        walks count as +inf (they inflate upper quantiles honestly)."""
        t = np.where(self.hit_times < 0, np.inf, self.hit_times.astype(float))
        return np.quantile(t, q, axis=0)

    def save(self, path: str) -> None:
        np.savez_compressed(
            path,
            positions=self.positions,
            hit_times=self.hit_times,
            left_at_hit=self.left_at_hit,
            finals=self.finals,
            max_abs=self.max_abs,
            max_abs_at=self.max_abs_at if self.max_abs_at is not None else np.empty((0, 0), dtype=np.int64),
            returns_at=self.returns_at if self.returns_at is not None else np.empty((0, 0), dtype=np.int64),
            checkpoint_steps=self.checkpoint_steps,
            levels=self.levels,
            events=self.events if self.events is not None else np.empty(0, dtype=np.int64),
            meta=np.frombuffer(
                json.dumps(
                    {
                        "law_repr": self.law_repr,
                        "base_seed": self.base_seed,
                        "n_env": self.n_env,
                        "n_walks": self.n_walks,
                        "steps": self.steps,
                        "completed_envs": self.completed_envs,
                    },
                    sort_keys=True,
                ).encode(),
                dtype=np.uint8,
            ),
        )

    @classmethod
    def load(cls, path: str) -> "EnsembleResult":
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            events = z["events"]
            maa = z["max_abs_at"] if "max_abs_at" in z else np.empty((0, 0), dtype=np.int64)
            ret = z["returns_at"] if "returns_at" in z else np.empty((0, 0), dtype=np.int64)
            return cls(
                law_repr=meta["law_repr"],
                base_seed=meta["base_seed"],
                n_env=meta["n_env"],
                n_walks=meta["n_walks"],
                steps=meta["steps"],
                checkpoint_steps=z["checkpoint_steps"],
                levels=z["levels"],
                positions=z["positions"],
                hit_times=z["hit_times"],
                left_at_hit=z["left_at_hit"],
                finals=z["finals"],
                max_abs=z["max_abs"],
                max_abs_at=maa if maa.size else None,
                returns_at=ret if ret.size else None,
                events=events if events.size else None,
                completed_envs=meta["completed_envs"],
            )


def _resolve_engine(law):
    if isinstance(law, SiteLaw) or isinstance(law, BondWeights):
        return "nn"
    if isinstance(law, BoundedJump):
        return "bounded"
    raise LawError(f"run_ensemble does not support {type(law).__name__}")


def run_ensemble(
    law,
    n_env: int,
    n_walks: int,
    steps: int,
    checkpoints=None,
    levels=None,
    base_seed: int = 0,
    threads: int | None = None,
    partial_path: str | None = None,
    flush_every: int | None = None,
    stop_after_envs: int | None = None,
    stop_after_levels: bool = False,
) -> EnsembleResult:
    """Run n_env independent environments with n_walks walks each.

    Deterministic for a fixed base_seed regardless of `threads`: per-walk
    streams are keyed by (base_seed, env index, walk index) and results land
    in index-addressed rows.  With partial_path set, progress is flushed
    every flush_every completed environments and a later call resumes from
    the file; stop_after_envs emulates budget exhaustion.
    """
    engine = _resolve_engine(law)
    cps = _as_checkpoint_array(checkpoints, steps)
    lv = _as_level_array(levels)
    n_total = n_env * n_walks
    result = EnsembleResult(
        law_repr=repr(law),
        base_seed=base_seed,
        n_env=n_env,
        n_walks=n_walks,
        steps=steps,
        checkpoint_steps=cps,
        levels=lv,
        positions=np.zeros((n_total, len(cps)), dtype=np.int64),
        hit_times=np.full((n_total, len(lv)), -1, dtype=np.int64),
        left_at_hit=np.full((n_total, len(lv)), -1, dtype=np.int64),
        finals=np.zeros(n_total, dtype=np.int64),
        max_abs=np.zeros(n_total, dtype=np.int64),
        max_abs_at=np.zeros((n_total, len(cps)), dtype=np.int64),
        returns_at=np.zeros((n_total, len(cps)), dtype=np.int64),
    )
    start_env = 0
    if partial_path and os.path.exists(partial_path):
        prev = EnsembleResult.load(partial_path)
        if (
            prev.law_repr == result.law_repr
            and prev.base_seed == base_seed
            and prev.n_env == n_env
            and prev.n_walks == n_walks
            and prev.steps == steps
            and np.array_equal(prev.checkpoint_steps, cps)
            and np.array_equal(prev.levels, lv)
        ):
            k = prev.completed_envs * n_walks
            result.positions[:k] = prev.positions[:k]
            result.hit_times[:k] = prev.hit_times[:k]
            result.left_at_hit[:k] = prev.left_at_hit[:k]
            result.finals[:k] = prev.finals[:k]
            result.max_abs[:k] = prev.max_abs[:k]
            if prev.max_abs_at is not None:
                result.max_abs_at[:k] = prev.max_abs_at[:k]
            if prev.returns_at is not None:
                result.returns_at[:k] = prev.returns_at[:k]
            start_env = prev.completed_envs

    def one_env(e: int) -> None:
        env_seed = ensemble_env_seed(base_seed, e)
        env = realize(law, env_seed, (-2, 2))
        for w in range(n_walks):
            key = walk_stream_key(base_seed, e, w)
            if engine == "nn":
                rec = _drive_nn(env, steps, key, cps, lv, False, env_seed, 0, stop_after_levels)
            else:
                rec = _drive_bounded_keyed(env, steps, key, cps, lv)
            row = e * n_walks + w
            result.positions[row] = rec.checkpoint_positions
            result.hit_times[row] = rec.hitting_times
            result.left_at_hit[row] = rec.left_steps_at_hit
            result.finals[row] = rec.final_position
            result.max_abs[row] = rec.max_abs_position
            if rec.checkpoint_max_abs is not None:
                result.max_abs_at[row] = rec.checkpoint_max_abs
            if rec.checkpoint_returns is not None:
                result.returns_at[row] = rec.checkpoint_returns

    target = n_env if stop_after_envs is None else min(n_env, start_env + stop_after_envs)
    nthreads = threads if threads is not None else default_threads()
    todo = range(start_env, target)
    if nthreads <= 1:
        for e in todo:
            one_env(e)
            result.completed_envs = e + 1
            if partial_path and flush_every and (e + 1) % flush_every == 0:
                result.save(partial_path)
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            chunk = flush_every or max(1, (target - start_env + nthreads - 1))
            done = start_env
            while done < target:
                hi = min(done + chunk, target)
                list(pool.map(one_env, range(done, hi)))
                done = hi
                result.completed_envs = done
                if partial_path and flush_every:
                    result.save(partial_path)
    result.completed_envs = target
    if target < n_env:
        if partial_path:
            result.save(partial_path)
        raise BudgetExhausted(
            f"environment budget exhausted at {target}/{n_env}", partial_path
        )
    if partial_path and os.path.exists(partial_path):
        os.remove(partial_path)
    return result


def _drive_bounded_keyed(env, steps, key, cps, lv) -> TrajectoryRecord:
    cp_pos = np.zeros(len(cps), dtype=np.int64)
    lvl_t = np.full(len(lv), -1, dtype=np.int64)
    lvl_lefts = np.full(len(lv), -1, dtype=np.int64)
    path = np.zeros(0, dtype=np.int64)
    state = np.zeros(K.STATE_LEN, dtype=np.int64)
    table = env.jump_table()
    env.ensure(-EXTEND_BLOCK, EXTEND_BLOCK)
    while True:
        lo, hi = env.window
        atoms = env.jump_atom_window(lo, hi)
        status = K.bounded_walk(atoms, table, env.law.L, lo, key, steps, cps, cp_pos, lv, lvl_t, lvl_lefts, path, False, state)
        if status == K.DONE:
            break
        x = int(state[K.S_X])
        margin = max(env.law.L, env.law.R)
        env.ensure(x - margin, x + margin)
    return TrajectoryRecord(
        env_seed=env.seed,
        walk_seed=0,
        steps=steps,
        checkpoint_steps=cps,
        checkpoint_positions=cp_pos,
        levels=lv,
        hitting_times=lvl_t,
        left_steps_at_hit=lvl_lefts,
        final_position=int(state[K.S_X]),
        max_abs_position=int(max(state[K.S_MAX], -state[K.S_MIN])),
    )


def run_ctrw_ensemble(
    law,
    n_env: int,
    t_max: float,
    time_checkpoints,
    base_seed: int = 0,
    threads: int | None = None,
    max_events_per_walk: int = 10**9,
) -> EnsembleResult:
    """One continuous-time trajectory per environment, checkpointed in time."""
    if not isinstance(law, (BondWeights, RatesPowerLaw)):
        raise LawError("run_ctrw_ensemble requires a rate law")
    cps = np.asarray(sorted(float(c) for c in time_checkpoints))
    positions = np.zeros((n_env, len(cps)), dtype=np.int64)
    finals = np.zeros(n_env, dtype=np.int64)
    max_abs = np.zeros(n_env, dtype=np.int64)
    events = np.zeros(n_env, dtype=np.int64)

    def one(e: int) -> None:
        env_seed = ensemble_env_seed(base_seed, e)
        env = realize(law, env_seed, (-2, 2))
        key = walk_stream_key(base_seed, e, 0)
        cp_pos = np.zeros(len(cps), dtype=np.int64)
        state = np.zeros(K.STATE_LEN, dtype=np.int64)
        fstate = np.zeros(1)
        env.ensure(-EXTEND_BLOCK, EXTEND_BLOCK)
        while True:
            lo, hi = env.window
            bonds = env.bond_window(lo, hi)
            status = K.ctrw_walk(bonds, lo, key, float(t_max), max_events_per_walk, cps, cp_pos, state, fstate)
            if status == K.DONE:
                break
            x = int(state[1])
            if status == K.NEED_LEFT:
                env.ensure(x - 2, x)
            elif status == K.NEED_RIGHT:
                env.ensure(x, x + 2)
            else:
                raise BudgetExhausted(f"event budget in env {e}")
        positions[e] = cp_pos
        finals[e] = state[1]
        max_abs[e] = max(state[K.S_MAX], -state[K.S_MIN])
        events[e] = state[0]

    nthreads = threads if threads is not None else default_threads()
    if nthreads <= 1:
        for e in range(n_env):
            one(e)
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            list(pool.map(one, range(n_env)))
    return EnsembleResult(
        law_repr=repr(law),
        base_seed=base_seed,
        n_env=n_env,
        n_walks=1,
        steps=float(t_max),
        checkpoint_steps=cps,
        levels=np.empty(0, dtype=np.int64),
        positions=positions,
        hit_times=np.empty((n_env, 0), dtype=np.int64),
        left_at_hit=np.empty((n_env, 0), dtype=np.int64),
        finals=finals,
        max_abs=max_abs,
        events=events,
        completed_envs=n_env,
    )


@dataclass
class BalancedEnsemble:
    """Per-axis checkpoint positions and return counts for balanced walks."""

    d: int
    checkpoint_steps: np.ndarray
    positions: np.ndarray  # (n_runs, n_cps, d)
    returns: np.ndarray  # (n_runs, n_cps)
    axis_occupation: np.ndarray  # (n_runs, d)


def run_balanced_ensemble(
    d: int,
    law: BalancedAxes,
    n_runs: int,
    steps: int,
    checkpoints=None,
    base_seed: int = 0,
    threads: int | None = None,
) -> BalancedEnsemble:
    """Independent (environment, walk) pairs of balanced walks."""
    from .environment import cumulative_thresholds

    cps = _as_checkpoint_array(checkpoints, steps)
    thr = cumulative_thresholds([w for _, w in law.atoms])
    table = law.axis_table()
    positions = np.zeros((n_runs, len(cps), d), dtype=np.int64)
    returns = np.zeros((n_runs, len(cps)), dtype=np.int64)
    qv = np.zeros((n_runs, d))

    def one(r: int) -> None:
        env_key = derive_key(ensemble_env_seed(base_seed, r), DOMAIN_ENV)
        walk_key = walk_stream_key(base_seed, r, 0)
        K.balanced_walk(d, thr, table, env_key, walk_key, steps, cps, positions[r], returns[r], qv[r])

    nthreads = threads if threads is not None else default_threads()
    if nthreads <= 1:
        for r in range(n_runs):
            one(r)
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            list(pool.map(one, range(n_runs)))
    return BalancedEnsemble(d=d, checkpoint_steps=cps, positions=positions, returns=returns, axis_occupation=qv)


def quenched_escape_frequency(env: Environment, n: int, trials: int, seed: int) -> float:
    """Monte Carlo estimate of P_1{T_n < T_0} in a fixed environment."""
    env.ensure(0, n)
    p, lo = _site_p_view(env)
    key = derive_key(seed, DOMAIN_WALK, 0xE5C)
    wins = K.escape_trials(p, lo, n, trials, key)
    return wins / trials
