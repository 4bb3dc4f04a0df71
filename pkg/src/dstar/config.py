"""Declarative run configuration: TOML parsing, validation, defaults, overrides.

The file format is flat keys for scalars plus nested tables for `dataset`,
`gar_params` and `attack_params`. Unknown keys are rejected so typos fail
loudly. Overrides are `key=value` strings (dotted keys reach into the nested
tables) applied after the file; the DSTAR_SEED environment variable is
applied last and wins over both.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

GARS = ("dstar", "average", "median", "krum", "cge", "trmean", "aksel")
ATTACKS = ("none", "little", "empire")
OPTIMIZERS = ("sgd", "adam")
# "logistic_regression" is accepted as an alias for "logistic" in files
MODELS = ("logistic", "mlp1")
DATASET_KINDS = ("blobs", "idx")


class ConfigError(ValueError):
    """A configuration file, override or invariant problem."""


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    # blobs
    n: int = 0
    p: int = 0
    classes: int = 0
    separation: float = 10.0
    # idx
    images: str = ""
    labels: str = ""


@dataclass(frozen=True)
class GarParams:
    """Aggregator hyperparameters; both default to the config-level f."""

    f: int = 0  # trim count for krum / cge
    b: int = 0  # per-side trim for trmean


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    scale: float = 1.0  # empire only


@dataclass(frozen=True)
class ExperimentConfig:
    N: int
    f: int
    k: int
    T: int
    eta: float
    seed: int
    gar: str
    attack: AttackSpec
    dataset: DatasetSpec
    n_b: int = 32
    warmup_rounds: int = 1
    optimizer: str = "sgd"
    model: str = "logistic"
    hidden_dim: int = 32
    gar_params: GarParams = field(default_factory=GarParams)
    delay_scale_honest: float = 0.2
    delay_scale_byz: float = 0.001
    val_frac: float = 0.1
    test_frac: float = 0.1
    eval_every: int = 10
    tau_k: int = 0  # reserved for an adaptive-k policy; carried but unused


_REQUIRED_KEYS = ("N", "f", "k", "T", "eta", "gar", "attack", "seed", "dataset")

_SCALAR_KEYS = {
    "N": int, "f": int, "k": int, "T": int, "n_b": int, "warmup_rounds": int,
    "hidden_dim": int, "eval_every": int, "seed": int, "tau_k": int,
    "eta": float, "delay_scale_honest": float, "delay_scale_byz": float,
    "val_frac": float, "test_frac": float,
    "gar": str, "attack": str, "optimizer": str, "model": str,
}

_TABLE_KEYS = {
    "dataset": {"kind": str, "n": int, "p": int, "classes": int,
                "separation": float, "images": str, "labels": str},
    "gar_params": {"f": int, "b": int},
    "attack_params": {"scale": float},
}


def _coerce(key: str, value, want: type):
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"config key '{key}': expected integer, got {value!r}")
    if not isinstance(value, want):
        raise ConfigError(f"config key '{key}': expected {want.__name__}, got {value!r}")
    return value


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return key, raw.lower() == "true"
    for cast in (int, float):
        try:
            return key, cast(raw)
        except ValueError:
            pass
    return key, raw.strip('"')


def _apply_override(raw: dict, key: str, value) -> None:
    if "." in key:
        table, sub = key.split(".", 1)
        if table not in _TABLE_KEYS:
            raise ConfigError(f"unknown config table '{table}' in override '{key}'")
        raw.setdefault(table, {})
        if not isinstance(raw[table], dict):
            raise ConfigError(f"config key '{table}': expected a table")
        raw[table][sub] = value
    else:
        raw[key] = value


def parse_config(path, overrides=()) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")
    for text in overrides:
        key, value = _parse_override(text)
        _apply_override(raw, key, value)
    env_seed = os.environ.get("DSTAR_SEED")
    if env_seed is not None:
        try:
            raw["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"DSTAR_SEED must be an integer, got {env_seed!r}")
    return build_config(raw)


def build_config(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required config key '{key}'")

    values: dict = {}
    for key, want in _SCALAR_KEYS.items():
        if key in raw:
            values[key] = _coerce(key, raw.pop(key), want)

    dataset_raw = raw.pop("dataset")
    if not isinstance(dataset_raw, dict):
        raise ConfigError("config key 'dataset': expected a table")
    ds_values = {}
    for key, value in dataset_raw.items():
        if key not in _TABLE_KEYS["dataset"]:
            raise ConfigError(f"unknown config key 'dataset.{key}'")
        ds_values[key] = _coerce(f"dataset.{key}", value, _TABLE_KEYS["dataset"][key])
    if "kind" not in ds_values:
        raise ConfigError("missing required config key 'dataset.kind'")

    gar_raw = raw.pop("gar_params", {})
    if not isinstance(gar_raw, dict):
        raise ConfigError("config key 'gar_params': expected a table")
    for key in gar_raw:
        if key not in _TABLE_KEYS["gar_params"]:
            raise ConfigError(f"unknown config key 'gar_params.{key}'")

    attack_raw = raw.pop("attack_params", {})
    if not isinstance(attack_raw, dict):
        raise ConfigError("config key 'attack_params': expected a table")
    for key in attack_raw:
        if key not in _TABLE_KEYS["attack_params"]:
            raise ConfigError(f"unknown config key 'attack_params.{key}'")

    if raw:
        raise ConfigError(f"unknown config key '{sorted(raw)[0]}'")

    if values.get("model") == "logistic_regression":
        values["model"] = "logistic"

    f = values["f"]
    gar_params = GarParams(
        f=_coerce("gar_params.f", gar_raw.get("f", f), int),
        b=_coerce("gar_params.b", gar_raw.get("b", f), int),
    )
    attack = AttackSpec(
        kind=values.pop("attack"),
        scale=_coerce("attack_params.scale", attack_raw.get("scale", 1.0), float),
    )
    dataset = DatasetSpec(**ds_values)

    config = ExperimentConfig(attack=attack, dataset=dataset,
                              gar_params=gar_params, **values)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    if config.N < 1:
        raise ConfigError(f"config key 'N': must be positive, got {config.N}")
    if config.f < 0:
        raise ConfigError(f"config key 'f': must be nonnegative, got {config.f}")
    if config.N <= 2 * config.f:
        raise ConfigError(
            f"breakdown point violated: require N > 2f, got N={config.N}, f={config.f}"
        )
    if not 1 <= config.k <= config.N:
        raise ConfigError(f"config key 'k': need 1 <= k <= N, got {config.k}")
    if config.T < 1:
        raise ConfigError(f"config key 'T': must be positive, got {config.T}")
    if config.n_b < 1:
        raise ConfigError(f"config key 'n_b': must be positive, got {config.n_b}")
    if config.eta <= 0:
        raise ConfigError(f"config key 'eta': must be positive, got {config.eta}")
    if config.warmup_rounds < 1:
        raise ConfigError(
            f"config key 'warmup_rounds': must be at least 1, got {config.warmup_rounds}"
        )
    if config.gar not in GARS:
        raise ConfigError(f"config key 'gar': unknown rule {config.gar!r}")
    if config.attack.kind not in ATTACKS:
        raise ConfigError(f"config key 'attack': unknown attack {config.attack.kind!r}")
    if config.attack.scale <= 0:
        raise ConfigError(
            f"config key 'attack_params.scale': must be positive, got {config.attack.scale}"
        )
    if config.optimizer not in OPTIMIZERS:
        raise ConfigError(f"config key 'optimizer': unknown optimizer {config.optimizer!r}")
    if config.model not in MODELS:
        raise ConfigError(f"config key 'model': unknown model {config.model!r}")
    if config.model == "mlp1" and config.hidden_dim < 1:
        raise ConfigError(
            f"config key 'hidden_dim': must be positive, got {config.hidden_dim}"
        )
    if config.delay_scale_honest <= 0 or config.delay_scale_byz <= 0:
        raise ConfigError("config keys 'delay_scale_*': must be positive")
    if not (0 <= config.val_frac < 1 and 0 <= config.test_frac < 1
            and config.val_frac + config.test_frac < 1):
        raise ConfigError(
            "config keys 'val_frac'/'test_frac': need nonnegative shares with"
            " val_frac + test_frac < 1"
        )
    if config.eval_every < 1:
        raise ConfigError(
            f"config key 'eval_every': must be positive, got {config.eval_every}"
        )
    if not 0 <= config.seed < 2**64:
        raise ConfigError("config key 'seed': must fit in 64 unsigned bits")
    if config.tau_k < 0:
        raise ConfigError(f"config key 'tau_k': must be nonnegative, got {config.tau_k}")

    if config.gar == "krum" and config.N - config.gar_params.f - 2 < 1:
        raise ConfigError(
            f"config key 'gar_params.f': krum needs N - f - 2 >= 1,"
            f" got N={config.N}, f={config.gar_params.f}"
        )
    if config.gar == "cge" and config.N - config.gar_params.f < 1:
        raise ConfigError(
            f"config key 'gar_params.f': cge needs N - f >= 1,"
            f" got N={config.N}, f={config.gar_params.f}"
        )
    if config.gar == "trmean" and config.N - 2 * config.gar_params.b < 1:
        raise ConfigError(
            f"config key 'gar_params.b': trmean needs N - 2b >= 1,"
            f" got N={config.N}, b={config.gar_params.b}"
        )

    ds = config.dataset
    if ds.kind not in DATASET_KINDS:
        raise ConfigError(f"config key 'dataset.kind': unknown kind {ds.kind!r}")
    if ds.kind == "blobs":
        if ds.classes < 2:
            raise ConfigError(
                f"config key 'dataset.classes': need at least 2, got {ds.classes}"
            )
        if ds.n < ds.classes:
            raise ConfigError(
                f"config key 'dataset.n': need at least {ds.classes} samples, got {ds.n}"
            )
        if ds.p < 1:
            raise ConfigError(f"config key 'dataset.p': must be positive, got {ds.p}")
        if ds.separation <= 0:
            raise ConfigError(
                f"config key 'dataset.separation': must be positive, got {ds.separation}"
            )
    else:
        if not ds.images or not ds.labels:
            raise ConfigError(
                "config keys 'dataset.images'/'dataset.labels': both paths required"
            )


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_config(config: ExperimentConfig) -> str:
    """Emit TOML that parse_config round-trips to an equal config."""
    lines = []
    for key in _SCALAR_KEYS:
        if key == "attack":
            lines.append(f"attack = {_toml_value(config.attack.kind)}")
        else:
            lines.append(f"{key} = {_toml_value(getattr(config, key))}")
    lines.append("")
    lines.append("[attack_params]")
    lines.append(f"scale = {_toml_value(config.attack.scale)}")
    lines.append("")
    lines.append("[gar_params]")
    lines.append(f"f = {_toml_value(config.gar_params.f)}")
    lines.append(f"b = {_toml_value(config.gar_params.b)}")
    lines.append("")
    lines.append("[dataset]")
    ds = config.dataset
    lines.append(f"kind = {_toml_value(ds.kind)}")
    if ds.kind == "blobs":
        for key in ("n", "p", "classes", "separation"):
            lines.append(f"{key} = {_toml_value(getattr(ds, key))}")
    else:
        lines.append(f"images = {_toml_value(ds.images)}")
        lines.append(f"labels = {_toml_value(ds.labels)}")
    return "\n".join(lines) + "\n"


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-JSON view of a config, used by the run manifest."""
    return dataclasses.asdict(config)
