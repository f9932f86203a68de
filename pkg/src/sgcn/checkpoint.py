"""Versioned JSON checkpoints.

Layout::

    {"header": {"format": "sgcn-checkpoint", "version": 1, "dims": {...},
                "label_set": {...}, "task": {...}, "classes": [...],
                "vocab": [token for embedding rows 2..], "seed": s, "epoch": e},
     "params": {"name": {"shape": [r, c], "values": [...]}, ...}}

Floats are written with 17 significant digits, which round-trips float64
exactly.
"""

from __future__ import annotations

import json
import os
from typing import Optional, Union

import numpy as np

from sgcn.data import LabelSet
from sgcn.encoder import N_SPECIAL
from sgcn.errors import ConfigError, SchemaError
from sgcn.model import ModelDims, SgcnModel, param_shapes
from sgcn.training import Task

FORMAT = "sgcn-checkpoint"
VERSION = 1


class DimensionError(ConfigError):
    pass


def _floats(values: np.ndarray) -> str:
    return "[" + ",".join(format(float(v), ".17g") for v in values.reshape(-1)) + "]"


def save_checkpoint(
    model: SgcnModel,
    path: Union[str, os.PathLike],
    label_set: LabelSet,
    task: Task,
) -> None:
    vocab = [tok for tok, _ in sorted(model.vocab.items(), key=lambda kv: kv[1])]
    header = {
        "format": FORMAT,
        "version": VERSION,
        "dims": model.dims.to_dict(),
        "label_set": label_set.to_dict(),
        "task": task.to_dict(),
        "classes": list(model.classes),
        "vocab": vocab,
        "seed": model.meta.get("seed"),
        "epoch": model.meta.get("epoch"),
    }
    parts = []
    for name, arr in model.params.items():
        if not np.all(np.isfinite(arr)):
            raise SchemaError(f"refusing to save non-finite parameter {name!r}")
        parts.append(f'  {json.dumps(name)}: {{"shape": [{arr.shape[0]}, {arr.shape[1]}], "values": {_floats(arr)}}}')
    text = '{\n "header": ' + json.dumps(header, sort_keys=True) + ',\n "params": {\n' + ",\n".join(parts) + "\n }\n}\n"
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_checkpoint(path: Union[str, os.PathLike], expect: Optional[ModelDims] = None):
    """Load a checkpoint; returns ``(model, label_set, task)``.

    ``expect`` makes the load fail unless the stored dimensions agree with
    the caller's hidden/gcn/mlp/embedding widths.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a complete checkpoint document ({exc})") from exc
    try:
        header = doc["header"]
        stored = doc["params"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: missing section {exc}") from exc
    if header.get("format") != FORMAT:
        raise SchemaError(f"{path}: not an sgcn checkpoint")
    if header.get("version") != VERSION:
        raise SchemaError(f"{path}: checkpoint version {header.get('version')} but this build reads version {VERSION}")
    try:
        dims = ModelDims(**header["dims"])
        label_set = LabelSet.from_dict(header["label_set"])
        task = Task(**header["task"])
        classes = list(header["classes"])
        vocab = {tok: k + N_SPECIAL for k, tok in enumerate(header["vocab"])}
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: bad header ({exc})") from exc
    if expect is not None:
        for field_name in ("d_e", "hidden", "gcn_size", "mlp_hidden", "num_classes"):
            have, want = getattr(dims, field_name), getattr(expect, field_name)
            if have != want:
                raise DimensionError(f"{path}: checkpoint has {field_name}={have}, session expects {field_name}={want}")
    params = {}
    for name, shape in param_shapes(dims, len(vocab) + N_SPECIAL).items():
        entry = stored.get(name)
        if entry is None:
            raise SchemaError(f"{path}: missing parameter {name!r}")
        values = np.array(entry["values"], dtype=np.float64)
        if tuple(entry["shape"]) != shape or values.size != shape[0] * shape[1]:
            raise SchemaError(f"{path}: parameter {name!r} should be {shape[0]}x{shape[1]}")
        params[name] = values.reshape(shape)
    model = SgcnModel(dims, params, vocab, classes, {"seed": header.get("seed"), "epoch": header.get("epoch")})
    return model, label_set, task
