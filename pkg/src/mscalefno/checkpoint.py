"""Checkpoints: a JSON manifest next to a little-endian f64 blob.

``<stem>.json`` holds the config, seed and a section table (name, shape,
dtype, byte offset) in the model's enumeration order; ``<stem>.bin`` holds a
magic header followed by the raw values. Complex sections are stored as
interleaved real/imaginary pairs.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .fno import FnoConfig, FnoParams, parameter_shapes
from .mscale import MscaleParams

CHECKPOINT_MAGIC = b"MSFNOCKP"
CHECKPOINT_VERSION = 1


def _paths(stem: str | Path) -> tuple[Path, Path]:
    stem = Path(stem)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    return stem.with_name(stem.name + ".json"), stem.with_name(stem.name + ".bin")


def model_kind(model) -> str:
    return "mscale-fno" if isinstance(model, MscaleParams) else "normal-fno"


def save_checkpoint(model, stem: str | Path, extra: dict | None = None) -> Path:
    manifest_path, blob_path = _paths(stem)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    sections, chunks, offset = [], [], 0
    for name, t in model.named_parameters():
        raw = np.ascontiguousarray(t.data).reshape(-1).view(np.float64).astype("<f8").tobytes()
        sections.append(
            {
                "name": name,
                "shape": list(t.shape),
                "dtype": "c128le" if t.is_complex else "f64le",
                "offset": offset,
            }
        )
        chunks.append(raw)
        offset += len(raw)
    body = b"".join(chunks)
    header = CHECKPOINT_MAGIC + struct.pack("<I", CHECKPOINT_VERSION)
    blob_path.write_bytes(header + body)

    manifest = {
        "format": "mscalefno-checkpoint",
        "version": CHECKPOINT_VERSION,
        "kind": model_kind(model),
        "config": model.config.to_dict(),
        "seed": model.seed,
        "num_parameters": model.num_parameters(),
        "header_bytes": len(header),
        "sections": sections,
        "sha256": hashlib.sha256(body).hexdigest(),
    }
    if isinstance(model, MscaleParams):
        per_branch = len(parameter_shapes(model.config))
        manifest["branches"] = [
            {"index": i, "prefix": f"branch{i}.", "first_section": i * per_branch, "sections": per_branch}
            for i in range(model.n_branches)
        ]
        manifest["scales"] = [float(c) for c in model.scales.data]
        manifest["weights"] = [float(g) for g in model.weights.data]
    if extra:
        manifest["extra"] = extra
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def read_manifest(stem: str | Path) -> dict:
    manifest_path, _ = _paths(stem)
    return json.loads(manifest_path.read_text())


def load_checkpoint(stem: str | Path):
    manifest_path, blob_path = _paths(stem)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "mscalefno-checkpoint":
        raise ValueError(f"{manifest_path}: not a checkpoint manifest")
    raw = blob_path.read_bytes()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{blob_path}: bad magic header")
    hb = manifest["header_bytes"]
    (version,) = struct.unpack("<I", raw[len(CHECKPOINT_MAGIC) : hb])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{blob_path}: unsupported checkpoint version {version}")
    body = raw[hb:]

    arrays = {}
    for sec in manifest["sections"]:
        shape = tuple(sec["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if sec["dtype"] == "c128le":
            flat = np.frombuffer(body, dtype="<f8", count=2 * count, offset=sec["offset"])
            arr = flat.astype(np.float64).view(np.complex128).reshape(shape)
        else:
            flat = np.frombuffer(body, dtype="<f8", count=count, offset=sec["offset"])
            arr = flat.astype(np.float64).reshape(shape)
        arrays[sec["name"]] = arr

    config = FnoConfig(**manifest["config"])
    names = [name for name, _, _ in parameter_shapes(config)]
    seed = manifest.get("seed")
    if manifest["kind"] == "normal-fno":
        return FnoParams(config, {k: Tensor(arrays[k], True) for k in names}, seed)
    branches = []
    for entry in manifest["branches"]:
        prefix = entry["prefix"]
        branches.append(FnoParams(config, {k: Tensor(arrays[prefix + k], True) for k in names}))
    return MscaleParams(
        config, branches, Tensor(arrays["scales"], True), Tensor(arrays["weights"], True), seed
    )
