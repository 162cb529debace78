"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..8    magic ``b"VSEPCKPT"``
    bytes 8..12   format version (uint32, currently 1)
    bytes 12..16  manifest length in bytes (uint32)
    manifest      UTF-8 JSON: model config, parameter names/shapes,
                  optimizer step/hyperparameters, free-form metadata
    payload       row-major float64 arrays, concatenated in manifest
                  order: all parameters, then (if saved) the optimizer's
                  first and second moments in the same order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import CheckpointError
from .optim import AdamWConfig, OptimizerState

__all__ = ["save_checkpoint", "load_checkpoint", "Checkpoint"]

_MAGIC = b"VSEPCKPT"
_VERSION = 1


class Checkpoint:
    """In-memory view of a loaded checkpoint."""

    def __init__(self, params: dict[str, np.ndarray], model_config: dict,
                 optimizer: OptimizerState | None, metadata: dict):
        self.params = params
        self.model_config = model_config
        self.optimizer = optimizer
        self.metadata = metadata


def save_checkpoint(
    path,
    params: dict[str, Tensor],
    model_config: dict,
    optimizer: OptimizerState | None = None,
    metadata: dict | None = None,
) -> None:
    names = list(params.keys())
    manifest = {
        "model_config": model_config,
        "params": [{"name": n, "shape": list(params[n].data.shape)} for n in names],
        "metadata": metadata or {},
    }
    if optimizer is not None:
        cfg = optimizer.config
        manifest["optimizer"] = {
            "step": optimizer.step,
            "lr": cfg.lr,
            "weight_decay": cfg.weight_decay,
            "beta1": cfg.beta1,
            "beta2": cfg.beta2,
            "eps": cfg.eps,
        }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")

    chunks = [_MAGIC, struct.pack("<I", _VERSION), struct.pack("<I", len(blob)), blob]
    for n in names:
        chunks.append(np.ascontiguousarray(params[n].data, dtype="<f8").tobytes())
    if optimizer is not None:
        for n in names:
            chunks.append(np.ascontiguousarray(optimizer.m[n], dtype="<f8").tobytes())
        for n in names:
            chunks.append(np.ascontiguousarray(optimizer.v[n], dtype="<f8").tobytes())

    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < 16 or raw[:8] != _MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    version = struct.unpack("<I", raw[8:12])[0]
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    blob_len = struct.unpack("<I", raw[12:16])[0]
    try:
        manifest = json.loads(raw[16 : 16 + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint manifest: {exc}") from exc

    offset = 16 + blob_len
    entries = manifest["params"]
    has_opt = "optimizer" in manifest
    total = sum(int(np.prod(e["shape"])) for e in entries)
    expected = total * 8 * (3 if has_opt else 1)
    if len(raw) - offset != expected:
        raise CheckpointError(
            f"checkpoint payload is {len(raw) - offset} bytes, expected {expected}"
        )

    def read_block() -> dict[str, np.ndarray]:
        nonlocal offset
        block = {}
        for e in entries:
            shape = tuple(e["shape"])
            count = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
            block[e["name"]] = arr.astype(np.float64)
            offset += count * 8
        return block

    params = read_block()
    optimizer = None
    if has_opt:
        o = manifest["optimizer"]
        optimizer = OptimizerState(
            config=AdamWConfig(lr=o["lr"], weight_decay=o["weight_decay"],
                               beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"]),
            step=int(o["step"]),
            m=read_block(),
            v=read_block(),
        )
    return Checkpoint(params, manifest["model_config"], optimizer, manifest.get("metadata", {}))
