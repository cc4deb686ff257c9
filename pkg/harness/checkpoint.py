import json
import logging
from pathlib import Path

import numpy as np

from agent.critic import CriticNetwork
from agent.policy import PolicyNetwork
from core.errors import DataError
from harness.config import TrainConfig
from harness.training import PHASES, RunState
from nn.params import ParameterStore, load_parameters, save_parameters


logger = logging.getLogger(__name__)

SIDECAR_VERSION = 1


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _merge(stores: dict[str, ParameterStore]) -> ParameterStore:
    merged = ParameterStore()
    for prefix, store in stores.items():
        for name, p in store.params.items():
            merged.add(f"{prefix}/{name}", p.value.data.copy())
            merged.params[f"{prefix}/{name}"].m = p.m.copy()
            merged.params[f"{prefix}/{name}"].v = p.v.copy()
    return merged


def _split(merged: ParameterStore, prefix: str, step: int) -> ParameterStore:
    store = ParameterStore(step=step)
    for name, p in merged.params.items():
        if name.startswith(prefix + "/"):
            local = name[len(prefix) + 1 :]
            store.add(local, p.value.data.copy())
            store.params[local].m = p.m.copy()
            store.params[local].v = p.v.copy()
    if not store.params:
        raise DataError(f"checkpoint holds no '{prefix}' tensors")
    return store


def save_checkpoint(state: RunState, path: str | Path) -> None:
    """
    Writes the tensors of both networks with their Adam moments, plus a JSON sidecar holding
    the config, its hash, the RNG state, phase progress and the loss history.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_parameters(_merge({"policy": state.policy.store, "critic": state.critic.store}), path)

    meta = {
        "version": SIDECAR_VERSION,
        "config": state.config.to_dict(),
        "config_hash": state.config.hash(),
        "rng": state.rng.bit_generator.state,
        "phase": state.phase,
        "epoch": state.epoch,
        "history": state.history,
        "steps": {"policy": state.policy.store.step, "critic": state.critic.store.step},
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug("checkpoint written to %s (%s, epoch %d)", path, state.phase, state.epoch)


def load_checkpoint(path: str | Path) -> RunState:
    """
    Restores a run saved by `save_checkpoint`.

    Raises:
        FileNotFoundError: If the checkpoint does not exist.
        DataError: On a foreign or truncated file, a missing or mismatched sidecar.
    """
    merged = load_parameters(path)
    sidecar = sidecar_path(path)
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"missing checkpoint sidecar '{sidecar}'")
    except json.JSONDecodeError as e:
        raise DataError(f"malformed checkpoint sidecar '{sidecar}': {e}")

    if meta.get("version") != SIDECAR_VERSION:
        raise DataError(f"unsupported checkpoint version {meta.get('version')}")
    config = TrainConfig.from_dict(meta["config"])
    if config.hash() != meta["config_hash"]:
        raise DataError("config hash mismatch in checkpoint sidecar")
    if meta["phase"] not in PHASES:
        raise DataError(f"unknown phase '{meta['phase']}' in checkpoint")

    policy_store = _split(merged, "policy", int(meta["steps"]["policy"]))
    critic_store = _split(merged, "critic", int(meta["steps"]["critic"]))

    embed = policy_store["embed"]
    W_s = policy_store["W_s"]
    n_layers = sum(1 for name in policy_store.names() if name.endswith(".W_x"))
    policy = PolicyNetwork(policy_store, embed.shape[0], W_s.shape[1], embed.shape[1], W_s.shape[0], n_layers)
    critic = CriticNetwork(
        critic_store,
        critic_store["embed"].shape[0],
        critic_store["W_s"].shape[1],
        critic_store["embed"].shape[1],
        critic_store["W_s"].shape[0],
    )

    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng"]
    return RunState(config, policy, critic, rng, meta["phase"], int(meta["epoch"]), meta["history"])
