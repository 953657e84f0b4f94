"""Run configuration: a flat TOML file of dotted keys, plus seed derivation.

Example::

    seed = 7
    approach = "compare"
    mcts.branching_factor = 5
    ga.generations = 200

Per-component seeds are not configured directly; they are derived from the
global seed by hashing a fixed label, so changing one component's workload
never shifts another component's random stream.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
import sys
from dataclasses import dataclass, field

from .dataset import bundled_csv_path
from .errors import DataError
from .genetic import GaParams
from .mcts import MctsParams
from .network import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

APPROACHES = ("nn-sgd", "nn-adam", "ga", "mcts-ga")
SELECTORS = APPROACHES + ("compare",)


def derive_seed(global_seed, label):
    digest = hashlib.sha256(f"{int(global_seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class DataConfig:
    path: str = ""
    test_fraction: float = 0.25


@dataclass
class GenomeConfig:
    perturb_range: float = 0.5
    # "adam" (trained baseline), "untrained", or a model/genome file path
    seed_model: str = "adam"


@dataclass
class RunConfig:
    seed: int = 0
    approach: str = "compare"
    out: str = "runs/latest"
    workers: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    genome: GenomeConfig = field(default_factory=GenomeConfig)
    ga: GaParams = field(default_factory=GaParams)
    mcts: MctsParams = field(default_factory=MctsParams)

    # sections whose fields are reachable as "<section>.<field>"
    SECTIONS = ("data", "train", "genome", "ga", "mcts")
    # derived from the global seed, never read from the file
    DERIVED = {"train.seed", "ga.seed", "mcts.seed", "train.optimizer"}

    def resolved_workers(self):
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def data_path(self):
        return self.data.path or str(bundled_csv_path())

    def seeds(self):
        labels = ("data", "model_init", "train", "ga", "mcts")
        return {lab: derive_seed(self.seed, lab) for lab in labels}

    def validate(self):
        if self.approach not in SELECTORS:
            raise DataError(f"approach must be one of {SELECTORS}, got {self.approach!r}")
        if not 0.0 < self.data.test_fraction < 1.0:
            raise DataError("data.test_fraction must be in (0, 1)")
        if self.genome.perturb_range <= 0:
            raise DataError("genome.perturb_range must be positive")
        self.train.validate()
        self.ga.validate()
        self.mcts.validate()

    def to_flat(self):
        """Dotted-key dict of every result-affecting setting, defaults included.

        ``out`` and ``workers`` are left out; the report keeps them under
        ``runtime`` since they do not change any result.
        """
        flat = {"seed": self.seed, "approach": self.approach, "data.path": self.data_path()}
        for sec in self.SECTIONS:
            for f in dataclasses.fields(getattr(self, sec)):
                key = f"{sec}.{f.name}"
                if key in self.DERIVED or key == "data.path":
                    continue
                flat[key] = getattr(getattr(self, sec), f.name)
        return flat

    def set(self, key, value):
        if key in self.DERIVED:
            raise DataError(f"{key} is derived from the global seed and cannot be set")
        if "." not in key:
            if key not in ("seed", "approach", "out", "workers"):
                raise DataError(f"unknown config key {key!r}")
            target, name = self, key
        else:
            sec, name = key.split(".", 1)
            if sec not in self.SECTIONS:
                raise DataError(f"unknown config section {sec!r}")
            target = getattr(self, sec)
        names = {f.name: f for f in dataclasses.fields(target)}
        if name not in names:
            raise DataError(f"unknown config key {key!r}")
        current = getattr(target, name)
        setattr(target, name, _coerce(key, value, current))


def _coerce(key, value, current):
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise DataError(f"{key}: expected a boolean")
    if isinstance(current, int):
        if isinstance(value, str):
            try:
                value = int(value)
            except ValueError:
                raise DataError(f"{key}: expected an integer, got {value!r}") from None
        if not isinstance(value, int) or isinstance(value, bool):
            raise DataError(f"{key}: expected an integer")
        return value
    if isinstance(current, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise DataError(f"{key}: expected a number, got {value!r}") from None
    return str(value)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def load_config(path=None, overrides=()) -> RunConfig:
    """Read a config file (optional) and apply ``key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise DataError(f"{path}: no such config file") from None
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None
        for key, value in _flatten(doc):
            cfg.set(key, value)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise DataError(f"override {item!r} is not key=value")
        key, value = key.strip(), value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            value = value[1:-1]
        cfg.set(key, value)
    return cfg


def apply_seeds(cfg: RunConfig):
    s = cfg.seeds()
    cfg.train.seed = s["train"]
    cfg.ga.seed = s["ga"]
    cfg.mcts.seed = s["mcts"]
    return s
