"""Checkpoint container: a zip holding a JSON manifest and named arrays.

The archive is self describing — every tensor is stored by name with dtype
and shape in an embedded .npz — and round-trips bit exactly. The manifest
carries a format version, the architecture config, the ablation switch,
the step counter, optimizer bookkeeping, and RNG states.
"""

from __future__ import annotations

import dataclasses
import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from .config import NetConfig

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Missing, corrupt, or version-incompatible checkpoint."""


def _flatten_state(prefix: str, state_dict: dict) -> dict[str, np.ndarray]:
    arrays = {}
    for key, value in state_dict.items():
        if torch.is_tensor(value):
            arrays[f"{prefix}/{key}"] = value.detach().cpu().numpy()
        else:
            raise CheckpointError(f"non-tensor entry {key!r} in state dict")
    return arrays


def _optimizer_arrays(prefix: str, opt: torch.optim.Optimizer) -> tuple[dict, dict]:
    sd = opt.state_dict()
    arrays, scalars = {}, {"param_groups": sd["param_groups"], "state_keys": {}}
    for pid, entry in sd["state"].items():
        keys = []
        for name, value in entry.items():
            keys.append(name)
            if torch.is_tensor(value):
                arrays[f"{prefix}/state/{pid}/{name}"] = value.detach().cpu().numpy()
            else:
                arrays[f"{prefix}/state/{pid}/{name}"] = np.asarray(value)
        scalars["state_keys"][str(pid)] = keys
    return arrays, scalars


def _restore_optimizer(prefix: str, opt: torch.optim.Optimizer, arrays, meta) -> None:
    state = {}
    for pid_s, keys in meta["state_keys"].items():
        pid = int(pid_s)
        entry = {}
        for name in keys:
            arr = arrays[f"{prefix}/state/{pid}/{name}"]
            entry[name] = torch.from_numpy(np.array(arr))
        state[pid] = entry
    opt.load_state_dict({"state": state, "param_groups": meta["param_groups"]})


def save_checkpoint(
    path,
    *,
    model: torch.nn.Module,
    discriminator: torch.nn.Module | None = None,
    opt_g: torch.optim.Optimizer | None = None,
    opt_d: torch.optim.Optimizer | None = None,
    step: int = 0,
    net_config: NetConfig | None = None,
    ablation: str = "none",
    numpy_rng: np.random.Generator | None = None,
    extra: dict | None = None,
) -> None:
    """Write the archive atomically (temp file + rename)."""
    arrays = _flatten_state("model", model.state_dict())
    manifest = {
        "format_version": FORMAT_VERSION,
        "net_config": dataclasses.asdict(net_config) if net_config else None,
        "ablation": ablation,
        "step": int(step),
        "extra": extra or {},
    }
    if discriminator is not None:
        arrays.update(_flatten_state("disc", discriminator.state_dict()))
    for name, opt in (("opt_g", opt_g), ("opt_d", opt_d)):
        if opt is not None:
            opt_arrays, opt_meta = _optimizer_arrays(name, opt)
            arrays.update(opt_arrays)
            manifest[name] = opt_meta
    arrays["torch_rng"] = torch.get_rng_state().numpy()
    if numpy_rng is not None:
        manifest["numpy_rng"] = numpy_rng.bit_generator.state

    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest))
        zf.writestr("arrays.npz", buf.getvalue())
    tmp.replace(path)


def read_checkpoint(path) -> tuple[dict, dict]:
    """Return (manifest, arrays). Raises CheckpointError on any defect."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            npz = np.load(io.BytesIO(zf.read("arrays.npz")))
            arrays = {k: npz[k] for k in npz.files}
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {version!r} (expected {FORMAT_VERSION})")
    return manifest, arrays


def load_model_state(module: torch.nn.Module, arrays: dict, prefix: str) -> None:
    plen = len(prefix) + 1
    state = {k[plen:]: torch.from_numpy(np.array(v)) for k, v in arrays.items() if k.startswith(prefix + "/")}
    module.load_state_dict(state)


def restore_rng(manifest: dict, arrays: dict) -> np.random.Generator | None:
    if "torch_rng" in arrays:
        torch.set_rng_state(torch.from_numpy(np.array(arrays["torch_rng"])))
    state = manifest.get("numpy_rng")
    if state is None:
        return None
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


def restore_optimizers(manifest: dict, arrays: dict, opt_g=None, opt_d=None) -> None:
    if opt_g is not None and "opt_g" in manifest:
        _restore_optimizer("opt_g", opt_g, arrays, manifest["opt_g"])
    if opt_d is not None and "opt_d" in manifest:
        _restore_optimizer("opt_d", opt_d, arrays, manifest["opt_d"])
