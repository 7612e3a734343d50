"""The default 1-D DCNN for 4 x 128 epochs, plus bit-exact model serialization.

Model directory layout: `manifest.json` (layer list, label space, provenance,
per-tensor offsets/shapes, checksum) and `weights.bin` (all tensors
concatenated in layer order, row-major, little-endian float32).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CorruptModel, ShapeError, SpecError
from .nn.layers import (
    LayerSpec,
    Parameters,
    conv1d,
    dense,
    dropout,
    flatten,
    infer_shapes,
    maxpool1d,
    relu,
    softmax,
)

INPUT_SHAPE = (4, 128)
MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"


@dataclass(frozen=True)
class ModelBundle:
    spec: list[LayerSpec]
    params: Parameters
    label_space: list[str]
    provenance: dict = field(default_factory=dict)
    frozen_mask: list[bool] | None = None

    def __post_init__(self):
        shapes = infer_shapes(self.spec, INPUT_SHAPE)
        if shapes[-1] != (len(self.label_space),):
            raise ShapeError(
                f"final layer emits {shapes[-1]}, label space has {len(self.label_space)} classes"
            )
        self.params.validate_against(self.spec)

    def with_provenance(self, **kv) -> "ModelBundle":
        return replace(self, provenance={**self.provenance, **kv})


def default_spec(n_classes: int) -> list[LayerSpec]:
    return [
        conv1d(4, 32, 9),
        relu(),
        maxpool1d(2),
        conv1d(32, 64, 5),
        relu(),
        maxpool1d(2),
        conv1d(64, 64, 3),
        relu(),
        maxpool1d(2),
        flatten(),
        dense(832, 128),
        relu(),
        dropout(0.5),
        dense(128, n_classes),
        softmax(),
    ]


def he_uniform_init(spec: list[LayerSpec], seed: int) -> Parameters:
    """He-uniform weights (limit sqrt(6/fan_in)), zero biases, float32."""
    rng = np.random.default_rng(seed)
    values = []
    for layer in spec:
        if layer.kind == "conv1d":
            fan_in = layer.in_channels * layer.kernel_size
            shape = (layer.out_channels, layer.in_channels, layer.kernel_size)
            nb = layer.out_channels
        elif layer.kind == "dense":
            fan_in = layer.in_dim
            shape = (layer.in_dim, layer.out_dim)
            nb = layer.out_dim
        else:
            values.append(None)
            continue
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=shape).astype(np.float32)
        values.append((w, np.zeros(nb, dtype=np.float32)))
    return Parameters(values)


def build_default_dcnn(n_classes: int, seed: int = 0, label_space=None) -> ModelBundle:
    """Untrained default network: three conv/pool blocks and a 128-unit head."""
    if n_classes < 2:
        raise SpecError("need at least 2 classes")
    spec = default_spec(n_classes)
    if label_space is None:
        label_space = [f"class{i}" for i in range(n_classes)]
    if len(label_space) != n_classes:
        raise SpecError("label_space length must equal n_classes")
    params = he_uniform_init(spec, seed)
    return ModelBundle(
        spec=spec,
        params=params,
        label_space=list(label_space),
        provenance={"init_seed": seed},
    )


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def save_model(bundle: ModelBundle, model_dir: str | os.PathLike):
    os.makedirs(model_dir, exist_ok=True)
    tensors = []
    blobs = []
    offset = 0
    for i, v in enumerate(bundle.params.values):
        if v is None:
            continue
        for name, arr in (("weight", v[0]), ("bias", v[1])):
            arr32 = np.ascontiguousarray(arr, dtype="<f4")
            raw = arr32.tobytes()
            tensors.append(
                {
                    "layer": i,
                    "name": name,
                    "shape": list(arr.shape),
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            blobs.append(raw)
            offset += len(raw)
    weights = b"".join(blobs)
    manifest = {
        "format_version": 1,
        "spec": [l.to_dict() for l in bundle.spec],
        "label_space": bundle.label_space,
        "provenance": bundle.provenance,
        "frozen_mask": bundle.frozen_mask,
        "tensors": tensors,
        "weights_fnv1a64": f"{fnv1a64(weights):016x}",
    }
    with open(os.path.join(model_dir, WEIGHTS_NAME), "wb") as f:
        f.write(weights)
    tmp = os.path.join(model_dir, MANIFEST_NAME + ".tmp")
    with open(tmp, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    os.replace(tmp, os.path.join(model_dir, MANIFEST_NAME))


def load_model(model_dir: str | os.PathLike) -> ModelBundle:
    try:
        with open(os.path.join(model_dir, MANIFEST_NAME)) as f:
            manifest = json.load(f)
        with open(os.path.join(model_dir, WEIGHTS_NAME), "rb") as f:
            weights = f.read()
    except OSError as exc:
        raise CorruptModel(f"cannot read model directory {model_dir}: {exc}") from exc
    if f"{fnv1a64(weights):016x}" != manifest.get("weights_fnv1a64"):
        raise CorruptModel("weights checksum mismatch")
    spec = [LayerSpec.from_dict(d) for d in manifest["spec"]]
    per_layer: dict[int, dict[str, np.ndarray]] = {}
    for t in manifest["tensors"]:
        raw = weights[t["offset"] : t["offset"] + t["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f4")
        expect = int(np.prod(t["shape"])) if t["shape"] else 1
        if arr.size != expect:
            raise ShapeError(
                f"tensor {t['name']} of layer {t['layer']}: {arr.size} values, "
                f"manifest shape {t['shape']}"
            )
        per_layer.setdefault(t["layer"], {})[t["name"]] = arr.reshape(t["shape"]).copy()
    values = []
    for i, layer in enumerate(spec):
        if layer.has_params:
            if i not in per_layer or set(per_layer[i]) != {"weight", "bias"}:
                raise CorruptModel(f"missing tensors for layer {i}")
            values.append((per_layer[i]["weight"], per_layer[i]["bias"]))
        else:
            values.append(None)
    return ModelBundle(
        spec=spec,
        params=Parameters(values),
        label_space=list(manifest["label_space"]),
        provenance=dict(manifest.get("provenance", {})),
        frozen_mask=manifest.get("frozen_mask"),
    )
