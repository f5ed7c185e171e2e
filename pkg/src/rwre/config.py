"""Experiment configuration: INI round-trip, law (de)serialization, hashing.

A config is a single key-value file with nested sections.  Serialization is
canonical (sorted keys, fixed float format), so the config hash embedded in
run outputs identifies the experiment exactly.
"""
from __future__ import annotations

import configparser
import hashlib
import io

from .laws import (
    BalancedAxes,
    BondWeights,
    BoundedJump,
    Diode,
    DiscreteSites,
    LawError,
    Rates,
    RatesPowerLaw,
    TwoPointSites,
)


class ConfigError(ValueError):
    """Config file is malformed; message carries section/key or line info."""


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def law_to_items(law) -> dict[str, str]:
    """Flatten a law into config [law] section items."""
    if isinstance(law, TwoPointSites):
        return {"kind": "two_point_sites", "alpha": _fmt(law.alpha), "beta": _fmt(law.beta)}
    if isinstance(law, Diode):
        return {"kind": "diode", "alpha": _fmt(law.alpha), "rho": _fmt(law.rho)}
    if isinstance(law, DiscreteSites):
        atoms = "; ".join(f"{_fmt(p)}:{_fmt(w)}" for p, w in law.atoms)
        return {"kind": "discrete_sites", "atoms": atoms}
    if isinstance(law, Rates):
        atoms = "; ".join(f"{_fmt(c)}:{_fmt(w)}" for c, w in law.atoms)
        return {"kind": "rates", "atoms": atoms}
    if isinstance(law, BondWeights):
        atoms = "; ".join(f"{_fmt(c)}:{_fmt(w)}" for c, w in law.atoms)
        return {"kind": "bond_weights", "atoms": atoms}
    if isinstance(law, RatesPowerLaw):
        return {"kind": "rates_power_law", "alpha_exponent": _fmt(law.alpha_exponent)}
    if isinstance(law, BoundedJump):
        atoms = "; ".join(" ".join(_fmt(v) for v in vec) + ":" + _fmt(w) for vec, w in law.atoms)
        return {"kind": "bounded_jump", "l": str(law.L), "r": str(law.R), "atoms": atoms}
    if isinstance(law, BalancedAxes):
        atoms = "; ".join(" ".join(_fmt(v) for v in vec) + ":" + _fmt(w) for vec, w in law.atoms)
        return {"kind": "balanced_axes", "d": str(law.d), "atoms": atoms}
    raise ConfigError(f"cannot serialize law {type(law).__name__}")


def _parse_atom_list(text: str) -> list[tuple[float, float]]:
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        val, _, w = part.rpartition(":")
        out.append((float(val), float(w)))
    return out


def _parse_vector_atoms(text: str) -> list[tuple[tuple[float, ...], float]]:
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        vec, _, w = part.rpartition(":")
        out.append((tuple(float(v) for v in vec.split()), float(w)))
    return out


def law_from_items(items: dict[str, str]):
    """Rebuild a law from config [law] items."""
    try:
        kind = items["kind"]
    except KeyError:
        raise ConfigError("[law] section needs a 'kind' key") from None
    try:
        if kind == "two_point_sites":
            return TwoPointSites(alpha=float(items["alpha"]), beta=float(items["beta"]))
        if kind == "diode":
            return Diode(alpha=float(items["alpha"]), rho=float(items["rho"]))
        if kind == "discrete_sites":
            return DiscreteSites(_parse_atom_list(items["atoms"]))
        if kind == "rates":
            return Rates(_parse_atom_list(items["atoms"]))
        if kind == "bond_weights":
            return BondWeights(_parse_atom_list(items["atoms"]))
        if kind == "rates_power_law":
            return RatesPowerLaw(alpha_exponent=float(items["alpha_exponent"]))
        if kind == "bounded_jump":
            return BoundedJump(int(items["l"]), int(items["r"]), _parse_vector_atoms(items["atoms"]))
        if kind == "balanced_axes":
            return BalancedAxes(int(items["d"]), _parse_vector_atoms(items["atoms"]))
    except (KeyError, ValueError, LawError) as e:
        raise ConfigError(f"[law] {kind}: {e}") from e
    raise ConfigError(f"unknown law kind {kind!r}")


class ExperimentConfig:
    """Declarative experiment description; round-trips losslessly to INI."""

    def __init__(
        self,
        scenario: str,
        seed: int = 0,
        threads: int | None = None,
        out: str = "results",
        law=None,
        budgets=None,
        checkpoints=None,
        levels=(),
        tolerances=None,
    ):
        self.scenario = scenario
        self.seed = int(seed)
        self.threads = threads
        self.out = out
        self.law = law
        self.budgets = dict(budgets or {})
        self.checkpoints = dict(checkpoints or {})
        self.levels = tuple(int(x) for x in levels)
        self.tolerances = dict(tolerances or {})

    # -- canonical serialization ------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["experiment"] = {"scenario": self.scenario, "seed": str(self.seed), "out": self.out}
        if self.threads is not None:
            cp["experiment"]["threads"] = str(self.threads)
        if self.law is not None:
            cp["law"] = law_to_items(self.law)
        if self.budgets:
            cp["budgets"] = {k: _fmt(v) for k, v in sorted(self.budgets.items())}
        if self.checkpoints:
            cp["checkpoints"] = {k: str(v) for k, v in sorted(self.checkpoints.items())}
        if self.levels:
            cp["levels"] = {"values": ",".join(str(x) for x in self.levels)}
        if self.tolerances:
            cp["tolerances"] = {k: _fmt(v) for k, v in sorted(self.tolerances.items())}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(str(e)) from e
        if "experiment" not in cp:
            raise ConfigError("missing [experiment] section")
        exp = cp["experiment"]
        if "scenario" not in exp:
            raise ConfigError("[experiment] needs 'scenario'")
        law = law_from_items(dict(cp["law"])) if "law" in cp else None
        budgets = {}
        if "budgets" in cp:
            for k, v in cp["budgets"].items():
                try:
                    budgets[k] = int(v) if float(v) == int(float(v)) else float(v)
                except ValueError as e:
                    raise ConfigError(f"[budgets] {k}: {e}") from e
        levels: tuple[int, ...] = ()
        if "levels" in cp and cp["levels"].get("values", "").strip():
            try:
                levels = tuple(int(x) for x in cp["levels"]["values"].split(","))
            except ValueError as e:
                raise ConfigError(f"[levels] values: {e}") from e
        tolerances = {}
        if "tolerances" in cp:
            for k, v in cp["tolerances"].items():
                try:
                    tolerances[k] = float(v)
                except ValueError as e:
                    raise ConfigError(f"[tolerances] {k}: {e}") from e
        threads = exp.get("threads")
        return cls(
            scenario=exp["scenario"],
            seed=int(exp.get("seed", "0")),
            threads=int(threads) if threads is not None else None,
            out=exp.get("out", "results"),
            law=law,
            budgets=budgets,
            checkpoints=dict(cp["checkpoints"]) if "checkpoints" in cp else None,
            levels=levels,
            tolerances=tolerances,
        )

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_ini(fh.read())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]
