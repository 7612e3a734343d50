"""Batched forward/backward passes with per-layer activation caching.

The cached per-layer inputs are what relevance propagation consumes later, so
every forward pass records them, along with pooling winner indices and
dropout masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ShapeError
from .layers import (
    LayerSpec,
    Parameters,
    conv1d_backward,
    conv1d_forward,
    infer_shapes,
    maxpool_backward,
    maxpool_forward,
    softmax_forward,
)


@dataclass
class ForwardTrace:
    """Activations of one forward pass.

    layer_inputs[i] is the batched input to layer i; posteriors is the final
    softmax output. pool_winners and dropout_masks are keyed by layer index.
    """

    layer_inputs: list
    posteriors: np.ndarray
    logits: np.ndarray
    pool_winners: dict
    dropout_masks: dict


def forward_batch(
    spec: list[LayerSpec],
    params: Parameters,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    check: bool = False,
) -> ForwardTrace:
    """Run the network on a batch shaped (B, C, L) or (B, D); returns the full trace."""
    if x.ndim < 2:
        raise ShapeError(f"expected a batched input, got {x.shape}")
    infer_shapes(spec, x.shape[1:])
    if training and any(l.kind == "dropout" and l.rate > 0 for l in spec) and rng is None:
        raise ShapeError("training-mode forward with dropout needs an rng")
    layer_inputs = []
    pool_winners = {}
    dropout_masks = {}
    logits = None
    a = x
    for i, layer in enumerate(spec):
        layer_inputs.append(a)
        v = params.values[i]
        if layer.kind == "conv1d":
            a = conv1d_forward(a, v[0], v[1])
        elif layer.kind == "relu":
            a = np.maximum(a, 0)
        elif layer.kind == "maxpool1d":
            a, idx = maxpool_forward(a, layer.pool)
            pool_winners[i] = idx
        elif layer.kind == "flatten":
            a = a.reshape(a.shape[0], -1)
        elif layer.kind == "dense":
            a = a @ v[0] + v[1]
        elif layer.kind == "dropout":
            if training and layer.rate > 0.0:
                keep = (rng.random(a.shape) >= layer.rate).astype(a.dtype)
                mask = keep / (1.0 - layer.rate)
                dropout_masks[i] = mask
                a = a * mask
            # inference: identity (inverted scaling at train time)
        elif layer.kind == "softmax":
            logits = a
            a = softmax_forward(a)
    if check and not np.isfinite(a).all():
        raise NumericalError("non-finite activations in forward pass")
    if logits is None:
        logits = layer_inputs[-1] if spec and spec[-1].kind == "softmax" else a
    return ForwardTrace(
        layer_inputs=layer_inputs,
        posteriors=a,
        logits=logits,
        pool_winners=pool_winners,
        dropout_masks=dropout_masks,
    )


def forward(spec, params, epoch_data: np.ndarray, training_mode=False, seed=None) -> ForwardTrace:
    """Single-epoch forward pass; epoch_data is (C, L)."""
    rng = np.random.default_rng(seed) if seed is not None else None
    return forward_batch(spec, params, epoch_data[None], training=training_mode, rng=rng)


def loss_and_grad(posteriors: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits.

    For softmax outputs the logit gradient is (posterior - onehot)/B.
    """
    batch = posteriors.shape[0]
    p = posteriors[np.arange(batch), labels]
    p = np.maximum(p, 1e-12)
    loss = float(-np.log(p).mean())
    grad = posteriors.copy()
    grad[np.arange(batch), labels] -= 1.0
    grad /= batch
    return loss, grad


def backward(
    spec: list[LayerSpec],
    params: Parameters,
    trace: ForwardTrace,
    out_grad: np.ndarray,
    frozen_mask: list[bool] | None = None,
) -> Parameters:
    """Backpropagate out_grad (w.r.t. logits) through the cached trace.

    Frozen layers get exactly-zero parameter gradients but still pass the
    signal through. Propagation stops below the earliest trainable layer.
    """
    if frozen_mask is not None and len(frozen_mask) != len(spec):
        raise ShapeError("frozen_mask length does not match layer list")
    grads = Parameters.zeros_like(params)
    trainable = [
        i
        for i, layer in enumerate(spec)
        if layer.has_params and (frozen_mask is None or not frozen_mask[i])
    ]
    lowest = min(trainable) if trainable else len(spec)
    g = out_grad
    for i in range(len(spec) - 1, -1, -1):
        if i < lowest:
            break
        layer = spec[i]
        a_in = trace.layer_inputs[i]
        if layer.kind == "softmax":
            # the caller supplies the gradient at the logits
            continue
        if layer.kind == "conv1d":
            frozen = frozen_mask is not None and frozen_mask[i]
            dw, db, dx = conv1d_backward(a_in, params.values[i][0], g, need_dx=(i > lowest))
            if not frozen:
                grads.values[i] = (dw, db)
            g = dx
        elif layer.kind == "relu":
            g = g * (a_in > 0)
        elif layer.kind == "maxpool1d":
            g = maxpool_backward(g, trace.pool_winners[i], layer.pool, a_in.shape[2])
        elif layer.kind == "flatten":
            g = g.reshape(a_in.shape)
        elif layer.kind == "dense":
            frozen = frozen_mask is not None and frozen_mask[i]
            if not frozen:
                grads.values[i] = (a_in.T @ g, g.sum(axis=0))
            if i > lowest:
                g = g @ params.values[i][0].T
            else:
                g = None
        elif layer.kind == "dropout":
            if i in trace.dropout_masks:
                g = g * trace.dropout_masks[i]
    return grads


def predict(spec, params, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Posteriors for inputs (N, C, L); dropout disabled."""
    if x.ndim < 2:
        raise ShapeError(f"expected a batched input, got {x.shape}")
    outs = []
    for start in range(0, x.shape[0], batch_size):
        tr = forward_batch(spec, params, x[start : start + batch_size], training=False)
        outs.append(tr.posteriors)
    return np.concatenate(outs, axis=0)
