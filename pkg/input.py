import tomllib
from dataclasses import dataclass
from pathlib import Path

import yaml

from cerberus import Validator

from harness.config import ENCODER_NAMES, REWARD_NAMES, TrainConfig


data_schema = {
    "corpus": {"type": "string", "required": False},
    "vocab": {"type": "string", "required": False},
    "embeddings": {"type": "string", "required": False},
    "splits": {
        "type": "list",
        "required": False,
        "minlength": 3,
        "maxlength": 3,
        "schema": {"type": "float", "min": 0.0, "max": 1.0, "coerce": float},
    },
}

model_schema = {
    "preset": {"type": "string", "required": False, "allowed": ["desk", "full"]},
    "d_emb": {"type": "integer", "required": False, "min": 1},
    "d_h": {"type": "integer", "required": False, "min": 1},
    "max_len": {"type": "integer", "required": False, "min": 1},
}

training_schema = {
    "batch": {"type": "integer", "required": False, "min": 1},
    "actor_pretrain_epochs": {"type": "integer", "required": False, "min": 0},
    "critic_pretrain_epochs": {"type": "integer", "required": False, "min": 0},
    "joint_epochs": {"type": "integer", "required": False, "min": 0},
    "lam": {"type": "float", "required": False, "min": 0.0, "max": 1.0, "coerce": float},
    "gamma": {"type": "float", "required": False, "min": 0.0, "max": 1.0, "coerce": float},
    "critic_loss": {"type": "string", "required": False, "allowed": ["kl", "l2"]},
    "critic_updates": {"type": "integer", "required": False, "min": 1},
    "lr_pretrain": {"type": "float", "required": False, "min": 0.0, "coerce": float},
    "lr_actor": {"type": "float", "required": False, "min": 0.0, "coerce": float},
    "lr_critic": {"type": "float", "required": False, "min": 0.0, "coerce": float},
    "grad_clip": {"type": "float", "required": False, "min": 0.0, "coerce": float},
    "seed": {"type": "integer", "required": False, "min": 0},
    "workers": {"type": "integer", "required": False, "min": 1},
    "beam": {"type": "integer", "required": False, "min": 1},
}

reward_schema = {
    "name": {"type": "string", "required": False, "allowed": list(REWARD_NAMES)},
    "aggregation": {"type": "string", "required": False, "allowed": ["mean", "max"]},
    "granularity": {"type": "string", "required": False, "allowed": ["terminal", "incremental"]},
    "similarity": {"type": "string", "required": False, "allowed": ["exp", "reciprocal"]},
    "kernel_span": {"type": "integer", "required": False, "min": 1},
    "brevity": {"type": "string", "required": False, "allowed": ["standard", "paper_literal"]},
    "model": {"type": "string", "required": False},
}

scorer_schema = {
    "kind": {"type": "string", "required": False, "allowed": list(ENCODER_NAMES)},
    "cell": {"type": "string", "required": False, "allowed": ["gru", "lstm"]},
    "d_h": {"type": "integer", "required": False, "min": 1},
    "epochs": {"type": "integer", "required": False, "min": 0},
    "pairs": {"type": "integer", "required": False, "min": 100},
    "lr": {"type": "float", "required": False, "min": 0.0, "coerce": float},
}

root_schema = {
    "data": {"type": "dict", "required": False, "schema": data_schema},
    "model": {"type": "dict", "required": False, "schema": model_schema},
    "training": {"type": "dict", "required": False, "schema": training_schema},
    "reward": {"type": "dict", "required": False, "schema": reward_schema},
    "scorer": {"type": "dict", "required": False, "schema": scorer_schema},
}

# config keys whose TrainConfig field carries a different name
_RENAMES = {
    ("reward", "name"): "reward",
    ("scorer", "kind"): "scorer_kind",
    ("scorer", "cell"): "scorer_cell",
    ("scorer", "d_h"): "scorer_d_h",
    ("scorer", "epochs"): "scorer_epochs",
    ("scorer", "pairs"): "scorer_pairs",
    ("scorer", "lr"): "scorer_lr",
    ("data", "splits"): "splits",
}


@dataclass(frozen=True)
class DataSettings:
    corpus: str | None = None
    vocab: str | None = None
    embeddings: str | None = None
    reward_model: str | None = None


def read_config_file(file_path: str | Path) -> dict:
    """
    Reads a YAML (.yaml/.yml) or TOML (.toml) config file and validates it.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: On a parse error or a schema violation.
    """
    path = Path(file_path)
    with open(path, "rb") as f:
        raw = f.read()

    try:
        if path.suffix == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        else:
            data = yaml.safe_load(raw)
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ValueError(f"cannot parse config '{path}': {e}")

    return validate_config(data or {})


def validate_config(data: dict) -> dict:
    if not isinstance(data, dict):
        raise ValueError(f"config validation error: expected a mapping, got {type(data).__name__}")
    v = Validator(root_schema)

    if v.validate(data):
        return v.document

    else:
        raise ValueError(f"config validation error: {v.errors}")


def to_train_config(data: dict) -> TrainConfig:
    """Builds the TrainConfig of a validated config document; the preset supplies defaults."""
    fields = {}
    for section in ("data", "model", "training", "reward", "scorer"):
        for key, value in data.get(section, {}).items():
            if section == "data" and key != "splits":
                continue
            if (section, key) == ("reward", "model"):
                continue
            fields[_RENAMES.get((section, key), key)] = value

    if "splits" in fields:
        fields["splits"] = tuple(fields["splits"])

    if fields.get("preset", "desk") == "full":
        return TrainConfig.full(**fields)
    return TrainConfig.desk(**fields)


def to_data_settings(data: dict) -> DataSettings:
    section = data.get("data", {})
    return DataSettings(
        corpus=section.get("corpus"),
        vocab=section.get("vocab"),
        embeddings=section.get("embeddings"),
        reward_model=data.get("reward", {}).get("model"),
    )


def load_config(file_path: str | Path | None) -> tuple[TrainConfig, DataSettings]:
    if file_path is None:
        return TrainConfig(), DataSettings()
    data = read_config_file(file_path)
    return to_train_config(data), to_data_settings(data)
