"""Flat ``key = value`` experiment configs and the built-in presets.

A config is one assignment per line; ``#`` starts a comment. Dotted keys
nest (``train.dr3.coef``) and commas separate list items. Keys under
``sweep.`` hold comma lists whose cartesian product defines the variants
of an experiment, e.g. ``sweep.train.selector = sarsa, expected``.
"""

import itertools
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from coadapt.agents.config import Dr3Config, TrainConfig
from coadapt.envdata.grid import build_grid
from coadapt.envdata.observe import ObservationMap
from coadapt.exceptions import ConfigError, DomainError

__all__ = [
    "PRESETS",
    "PRESET_DOCS",
    "ExperimentConfig",
    "Variant",
    "parse_flat",
    "format_flat",
    "load_config",
    "resolve_config",
]

# Every preset starts from BASE. Lengths and widths are calibrated for a
# single desktop core rather than taken from large-scale runs.
BASE = {
    "env.grid": "grid16-sparse",
    "env.gamma": "0.95",
    "env.seed": "0",
    "obs.kind": "smoothed_random_projection",
    "obs.dim": "64",
    "obs.seed": "0",
    "obs.radius": "1",
    "data.n": "256",
    "data.p_opt": "0.7",
    "data.seed": "0",
    "data.max_episode_len": "100",
    "seeds": "0",
}

PRESETS = {
    "grid16-sparse-256": {
        "train.selector": "expected",
        "train.total_steps": "20000",
        "train.eval_every": "1000",
    },
    "sarsa-vs-td": {
        "seeds": "0,1,2",
        "train.total_steps": "20000",
        "train.eval_every": "1000",
        "sweep.train.selector": "mc,sarsa,expected,max",
    },
    "coadaptation": {
        "seeds": "0,1,2,3,4",
        "train.total_steps": "100000",
        "train.eval_every": "5000",
        "sweep.train.selector": "expected,sarsa,mc",
    },
    "target-sweep": {
        "seeds": "0,1,2",
        "train.selector": "max",
        "train.total_steps": "20000",
        "train.eval_every": "1000",
        "sweep.train.target_period": "5,10,50,100,200,500",
    },
    "cql-target-sweep": {
        "seeds": "0,1,2",
        "train.selector": "max",
        "train.loss_head": "cql",
        "train.cql_alpha": "1.0",
        "train.total_steps": "20000",
        "train.eval_every": "1000",
        "sweep.train.target_period": "5,10,50,100,200,500",
    },
    "dr3-max": {
        "seeds": "0,1,2,3,4",
        "train.selector": "max",
        "train.dr3.variant": "dot",
        "train.total_steps": "100000",
        "train.eval_every": "5000",
        "sweep.train.dr3.coef": "0,0.01",
    },
    "smoke": {
        "data.n": "64",
        "train.total_steps": "200",
        "train.eval_every": "100",
        "train.hidden": "16,16",
        "obs.dim": "16",
        "seeds": "0,1",
        "sweep.train.selector": "sarsa,expected",
    },
}

PRESET_DOCS = {
    "grid16-sparse-256": "256-transition dataset from the 0.7-greedy behavior policy; expected-backup TD for 20k steps",
    "sarsa-vs-td": "MC regression, offline SARSA, expected-backup TD and max backup; 3 seeds",
    "coadaptation": "expected-backup TD vs offline SARSA vs MC regression; 5 seeds x 100k steps",
    "target-sweep": "max backup with hard target sync every N in {5,10,50,100,200,500}; 3 seeds",
    "cql-target-sweep": "as target-sweep with the CQL penalty (alpha = 1)",
    "dr3-max": "max backup with and without the feature dot-product penalty (c0 = 0.01); 5 paired seeds",
    "smoke": "tiny end-to-end run for checking an installation",
}


def parse_flat(text, source="<config>"):
    """Parse ``key = value`` lines into a dict of strings; errors name the line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or any(not piece for piece in key.split(".")):
            raise ConfigError(f"{source}: line {lineno}: malformed key {key!r}")
        if key in out:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def format_flat(flat):
    return "".join(f"{k} = {v}\n" for k, v in sorted(flat.items()))


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_flat(text, str(path))


def resolve_config(preset=None, flat=None):
    """Merge the base settings, an optional preset and explicit overrides (in that order)."""
    flat = dict(flat or {})
    preset = flat.pop("preset", None) if preset is None else preset
    merged = dict(BASE)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; see list-presets")
        merged.update(PRESETS[preset])
        merged["preset"] = preset
    merged.update(flat)
    return merged


def _split(value):
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


_TRAIN_FIELDS = {f.name: f for f in fields(TrainConfig)}
_DR3_FIELDS = {f.name: f for f in fields(Dr3Config)}


def _coerce(key, name, default, value):
    if name == "hidden":
        return tuple(_int(key, v) for v in _split(value))
    if name == "gamma":
        return None if value.lower() in ("", "none", "dataset") else _float(key, value)
    if isinstance(default, bool):
        if value.lower() not in ("true", "false", "1", "0"):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value.lower() in ("true", "1")
    if isinstance(default, int):
        return _int(key, value)
    if isinstance(default, float):
        return _float(key, value)
    return value


def _train_config(flat):
    kwargs = {}
    dr3 = {}
    for key, value in flat.items():
        if not key.startswith("train."):
            continue
        name = key[len("train."):]
        if name.startswith("dr3."):
            sub = name[len("dr3."):]
            if sub not in _DR3_FIELDS:
                raise ConfigError(f"unknown key {key!r}")
            dr3[sub] = _coerce(key, sub, _DR3_FIELDS[sub].default, value)
            continue
        if name not in _TRAIN_FIELDS or name == "dr3":
            raise ConfigError(f"unknown key {key!r}")
        kwargs[name] = _coerce(key, name, _TRAIN_FIELDS[name].default, value)
    if dr3:
        variant = dr3.pop("variant", "dot")
        coef = dr3.pop("coef", 0.0)
        kwargs["dr3"] = Dr3Config.make(variant, coef, **dr3) if variant != "off" else Dr3Config(**dr3)
    try:
        return TrainConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class Variant:
    """One point of a sweep: a label and the fully resolved flat settings."""

    label: str
    flat: dict
    train: TrainConfig


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment: environment, observations, dataset, variants and seeds."""

    flat: dict
    grid: object
    obs_map: ObservationMap
    data_n: int
    p_opt: float
    data_seed: int
    max_episode_len: int
    seeds: tuple
    variants: tuple = field(default_factory=tuple)

    @property
    def preset(self):
        return self.flat.get("preset")

    @classmethod
    def from_flat(cls, flat, seeds=None):
        flat = dict(flat)
        known = ("env.", "obs.", "data.", "train.", "sweep.")
        for key in flat:
            if key not in ("preset", "seeds") and not key.startswith(known):
                raise ConfigError(f"unknown key {key!r}")
        try:
            grid = build_grid(flat["env.grid"], gamma=_float("env.gamma", flat["env.gamma"]),
                              seed=_int("env.seed", flat["env.seed"]))
            obs_map = ObservationMap(
                flat["obs.kind"], _int("obs.dim", flat["obs.dim"]),
                _int("obs.seed", flat["obs.seed"]), _int("obs.radius", flat["obs.radius"]),
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        if seeds:
            flat["seeds"] = ",".join(str(s) for s in seeds)
        seed_list = tuple(_int("seeds", s) for s in _split(flat.get("seeds", "")))
        if not seed_list:
            raise ConfigError("the seed list is empty")
        p_opt = _float("data.p_opt", flat["data.p_opt"])
        if not 0.0 <= p_opt <= 1.0:
            raise ConfigError("data.p_opt must lie in [0, 1]")
        n = _int("data.n", flat["data.n"])
        max_len = _int("data.max_episode_len", flat["data.max_episode_len"])
        if n < 1 or max_len < 1:
            raise ConfigError("data.n and data.max_episode_len must be positive")

        sweep_keys = sorted(k for k in flat if k.startswith("sweep."))
        axes = []
        for key in sweep_keys:
            values = _split(flat[key])
            if not values:
                raise ConfigError(f"{key}: empty sweep")
            axes.append([(key[len("sweep."):], v) for v in values])
        base = {k: v for k, v in flat.items() if not k.startswith("sweep.")}
        variants = []
        for combo in itertools.product(*axes):
            vflat = dict(base)
            vflat.update(combo)
            label = ",".join(f"{k.split('.')[-1]}={v}" for k, v in combo) or "default"
            variants.append(Variant(label, vflat, _train_config(vflat)))
        return cls(flat, grid, obs_map, n, p_opt, _int("data.seed", flat["data.seed"]), max_len,
                   seed_list, tuple(variants))

    def with_seeds(self, seeds):
        return replace(self, seeds=tuple(seeds))
