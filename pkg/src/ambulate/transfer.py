"""Transfer of a source-trained network to a target label space.

Three modes:
  direct     — keep every source layer frozen, retrain only the replaced head.
  fixed      — freeze the convolutional blocks (a fixed feature extractor),
               fine-tune the dense layers.
  end_to_end — fresh initialization, nothing frozen, no source weights used.
A fourth mode, "full" (initialize from source, freeze nothing), is available
behind the same interface as a conventional warm-start baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dcnn import ModelBundle, default_spec, he_uniform_init
from .errors import ShapeError, SpecError
from .nn.layers import LayerSpec, Parameters, dense, softmax
from .nn.train import TrainConfig, train

MODES = ("direct", "fixed", "end_to_end", "full")


@dataclass(frozen=True)
class TransferPlan:
    mode: str
    source_labels: list[str]
    target_labels: list[str]

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"unknown transfer mode {self.mode!r}")
        if len(self.target_labels) < 2:
            raise SpecError("target label space needs at least 2 classes")

    def frozen_mask(self, spec: list[LayerSpec]) -> list[bool]:
        """Per-layer frozen flags for this mode on the given layer list."""
        n = len(spec)
        last_dense = max(i for i, l in enumerate(spec) if l.kind == "dense")
        if self.mode in ("end_to_end", "full"):
            return [False] * n
        if self.mode == "direct":
            return [i < last_dense for i in range(n)]
        # fixed: conv blocks (everything before flatten) frozen
        flat = next(i for i, l in enumerate(spec) if l.kind == "flatten")
        return [i < flat for i in range(n)]


def apply_transfer(source: ModelBundle | None, plan: TransferPlan, seed: int = 0) -> ModelBundle:
    """Build a target-shaped, untrained-head bundle according to the plan.

    For direct/fixed/full the source weights are copied and the final dense
    layer is replaced by a freshly initialized dense(->|target|) head. For
    end_to_end a completely fresh network is built.
    """
    n_target = len(plan.target_labels)
    if plan.mode == "end_to_end":
        spec = default_spec(n_target) if source is None else _respec_head(source.spec, n_target)
        params = he_uniform_init(spec, seed)
        return ModelBundle(
            spec=spec,
            params=params,
            label_space=list(plan.target_labels),
            provenance={"transfer_mode": plan.mode, "init_seed": seed},
            frozen_mask=[False] * len(spec),
        )
    if source is None:
        raise SpecError(f"mode {plan.mode!r} needs a source model")
    if source.label_space != list(plan.source_labels):
        raise ShapeError("plan source labels do not match the source model")
    spec = _respec_head(source.spec, n_target)
    head_idx = max(i for i, l in enumerate(spec) if l.kind == "dense")
    fresh = he_uniform_init(spec, seed)
    values = []
    for i, v in enumerate(source.params.values):
        if i == head_idx:
            values.append(fresh.values[i])
        else:
            values.append(None if v is None else (v[0].copy(), v[1].copy()))
    mask = plan.frozen_mask(spec)
    return ModelBundle(
        spec=spec,
        params=Parameters(values),
        label_space=list(plan.target_labels),
        provenance={
            "transfer_mode": plan.mode,
            "source": source.provenance.get("trained_on", "source"),
            "init_seed": seed,
        },
        frozen_mask=mask,
    )


def _respec_head(spec: list[LayerSpec], n_target: int) -> list[LayerSpec]:
    if len(spec) < 2 or spec[-1].kind != "softmax" or spec[-2].kind != "dense":
        raise ShapeError("source network must end with dense + softmax")
    head = dense(spec[-2].in_dim, n_target)
    return list(spec[:-2]) + [head, softmax()]


def fine_tune(
    bundle: ModelBundle,
    target_train,
    target_val,
    config: TrainConfig,
) -> ModelBundle:
    """Train the bundle on target data honoring its frozen mask."""
    if bundle.frozen_mask is None:
        raise SpecError("bundle has no frozen mask; run apply_transfer first")
    best, history = train(
        bundle.spec, bundle.params, target_train, target_val, config, bundle.frozen_mask
    )
    out = replace(bundle, params=best)
    return out.with_provenance(fine_tuned=True, passes_run=len(history))
