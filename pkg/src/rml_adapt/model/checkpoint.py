"""``.npz`` checkpoint container: JSON metadata plus raw float64 arrays."""
from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from .transformer import MixTransformer, ModelConfig

FORMAT = "rml-adapt-checkpoint/1"


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(meta, format=FORMAT, shapes={k: list(v.shape) for k, v in arrays.items()})
    payload = {f"p:{k}": np.asarray(v, dtype=np.float64) for k, v in arrays.items()}
    payload["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    # np.savez stamps entries with the wall clock; a fixed date keeps files byte-reproducible
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(payload):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, payload[name], allow_pickle=False)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        if meta.get("format") != FORMAT:
            raise ValueError(f"{path}: not a checkpoint ({meta.get('format')!r})")
        arrays = {k[2:]: z[k].copy() for k in z.files if k.startswith("p:")}
    for name, shape in meta["shapes"].items():
        if list(arrays[name].shape) != shape:
            raise ValueError(f"{path}: array {name} has shape {arrays[name].shape}, header says {shape}")
    return arrays, meta


def save_model(model: MixTransformer, path, extra: dict | None = None) -> None:
    cfg = model.config
    meta = {"kind": "mix-transformer", "config": vars(cfg).copy(), "k": cfg.k,
            "epsilon": cfg.epsilon, "vocab_hash": cfg.vocab_hash}
    if extra:
        meta["extra"] = extra
    save_arrays(path, model.state(), meta)


def load_model(path) -> MixTransformer:
    arrays, meta = load_arrays(path)
    if meta.get("kind") != "mix-transformer":
        raise ValueError(f"{path}: holds a {meta.get('kind')!r}, not a translation model")
    model = MixTransformer(ModelConfig(**meta["config"]), seed=0)
    model.load_state(arrays)
    return model
