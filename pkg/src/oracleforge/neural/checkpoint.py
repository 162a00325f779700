"""Checkpoint files: a JSON manifest next to a little-endian float32 blob.

Parameters are rounded to float32 when a checkpoint is taken, so a model
rebuilt from a loaded file is bit-identical to the in-memory checkpoint and
save -> load -> save reproduces both files byte for byte. Rebuilt models run
in float64.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .model import ModelConfig, OracleModel
from .vocab import Vocab

VERSION = "oracleforge-checkpoint/1"


@dataclass
class ModelCheckpoint:
    model_config: ModelConfig
    vocab: Vocab
    params: dict[str, np.ndarray]  # float32 values
    hyperparameters: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    version: str = VERSION

    @classmethod
    def from_model(cls, model: OracleModel, vocab: Vocab, hyperparameters=None, metadata=None) -> "ModelCheckpoint":
        params = {k: v.detach().cpu().numpy().astype("<f4") for k, v in model.state_dict().items()}
        return cls(model.cfg, vocab, params, dict(hyperparameters or {}), dict(metadata or {}))

    def build_model(self) -> OracleModel:
        """Inference model; float32 values widen exactly into float64 parameters."""
        model = OracleModel(replace(self.model_config, dtype="float64"))
        state = {k: torch.from_numpy(v.astype(np.float64)) for k, v in self.params.items()}
        model.load_state_dict(state)
        model.eval()
        return model


def save_checkpoint(ckpt: ModelCheckpoint, path) -> Path:
    """Write ``path`` (manifest) and ``path`` with suffix ``.bin`` (parameters)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob_path = path.with_suffix(".bin")
    tensors = []
    offset = 0
    chunks = []
    for name in sorted(ckpt.params):
        arr = np.ascontiguousarray(ckpt.params[name], dtype="<f4")
        data = arr.tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    manifest = {
        "version": ckpt.version,
        "dtype": "float32-le",
        "blob": blob_path.name,
        "model_config": ckpt.model_config.to_json(),
        "hyperparameters": ckpt.hyperparameters,
        "metadata": ckpt.metadata,
        "vocab": ckpt.vocab.tokens,
        "tensors": tensors,
    }
    blob_path.write_bytes(b"".join(chunks))
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path) -> ModelCheckpoint:
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {manifest.get('version')!r}")
    blob = (path.parent / manifest["blob"]).read_bytes()
    params = {}
    for t in manifest["tensors"]:
        raw = blob[t["offset"]: t["offset"] + t["nbytes"]]
        params[t["name"]] = np.frombuffer(raw, dtype="<f4").reshape(t["shape"]).copy()
    return ModelCheckpoint(
        ModelConfig.from_json(manifest["model_config"]),
        Vocab(list(manifest["vocab"])),
        params,
        manifest.get("hyperparameters", {}),
        manifest.get("metadata", {}),
        manifest["version"],
    )


def checkpoint_hash(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    h.update(path.read_bytes())
    h.update(path.with_suffix(".bin").read_bytes())
    return h.hexdigest()


def params_hash(ckpt: ModelCheckpoint) -> str:
    h = hashlib.sha256()
    for name in sorted(ckpt.params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(ckpt.params[name], dtype="<f4").tobytes())
    return h.hexdigest()
