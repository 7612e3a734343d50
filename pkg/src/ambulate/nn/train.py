"""Mini-batch training with optional frozen layers and early stopping.

When a prefix of the network is frozen (transfer learning), its activations
are deterministic, so they are computed once and cached; only the trainable
suffix is optimized. Returned parameters always cover the full network, with
frozen tensors bitwise untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, SpecError
from .engine import backward, forward_batch, loss_and_grad
from .layers import LayerSpec, Parameters, conv1d_forward, maxpool_forward


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    patience: int = 10

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise SpecError("epochs and batch_size must be positive")
        if self.learning_rate < 0:
            raise SpecError("learning_rate must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise SpecError(f"unknown optimizer {self.optimizer!r}")
        if self.patience < 0:
            raise SpecError("patience must be non-negative")


class _Adam:
    def __init__(self, params: Parameters, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = Parameters.zeros_like(params)
        self.v = Parameters.zeros_like(params)

    def step(self, params: Parameters, grads: Parameters, trainable: list[int]):
        c = self.cfg
        self.t += 1
        b1t = 1.0 - c.adam_beta1**self.t
        b2t = 1.0 - c.adam_beta2**self.t
        for i in trainable:
            for j in range(2):
                g = grads.values[i][j]
                m = self.m.values[i][j]
                v = self.v.values[i][j]
                m *= c.adam_beta1
                m += (1 - c.adam_beta1) * g
                v *= c.adam_beta2
                v += (1 - c.adam_beta2) * g * g
                params.values[i][j][...] -= (
                    c.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + c.adam_eps)
                )


class _Sgd:
    def __init__(self, params: Parameters, cfg: TrainConfig):
        self.cfg = cfg

    def step(self, params: Parameters, grads: Parameters, trainable: list[int]):
        for i in trainable:
            for j in range(2):
                params.values[i][j][...] -= self.cfg.learning_rate * grads.values[i][j]


def _frozen_prefix_len(spec: list[LayerSpec], frozen_mask: list[bool] | None) -> int:
    """Longest leading run of frozen, deterministic layers."""
    if frozen_mask is None:
        return 0
    n = 0
    for layer, frozen in zip(spec, frozen_mask):
        if layer.kind == "dropout" and layer.rate > 0:
            break  # stochastic in training mode
        if not frozen:
            break
        n += 1
    return n


def _eval_split(spec, params, x, y, batch_size):
    losses = []
    correct = 0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        tr = forward_batch(spec, params, xb, training=False)
        loss, _ = loss_and_grad(tr.posteriors, yb)
        losses.append(loss * xb.shape[0])
        correct += int((tr.posteriors.argmax(axis=1) == yb).sum())
    n = x.shape[0]
    return sum(losses) / n, correct / n


def train(
    spec: list[LayerSpec],
    init_params: Parameters,
    train_data: tuple[np.ndarray, np.ndarray],
    val_data: tuple[np.ndarray, np.ndarray] | None,
    config: TrainConfig,
    frozen_mask: list[bool] | None = None,
):
    """Optimize the unfrozen parameters; returns (best parameters, history).

    History is one dict per pass: pass, train_loss, train_acc, val_loss,
    val_acc. The returned parameters are those of the best validation-loss
    pass (best training loss when no validation split is given).
    """
    x_tr, y_tr = train_data
    if x_tr.shape[0] == 0:
        raise SpecError("empty training split")
    init_params.validate_against(spec)
    params = init_params.copy()
    rng = np.random.default_rng(config.seed)

    prefix = _frozen_prefix_len(spec, frozen_mask)
    if prefix and spec[prefix - 1].kind == "softmax":
        prefix -= 1
    run_spec = spec[prefix:]
    run_mask = frozen_mask[prefix:] if frozen_mask is not None else None
    run_params = Parameters(params.values[prefix:])
    if prefix:
        head_spec = spec[:prefix]
        head_params = Parameters(params.values[:prefix])
        x_run = _prefix_features(head_spec, head_params, x_tr)
        x_val = (
            _prefix_features(head_spec, head_params, val_data[0])
            if val_data is not None and val_data[0].shape[0]
            else None
        )
    else:
        x_run = x_tr
        x_val = val_data[0] if val_data is not None and val_data[0].shape[0] else None
    y_val = val_data[1] if val_data is not None and val_data[0].shape[0] else None

    trainable = [
        i
        for i, layer in enumerate(run_spec)
        if layer.has_params and (run_mask is None or not run_mask[i])
    ]
    opt = (_Adam if config.optimizer == "adam" else _Sgd)(run_params, config)

    history = []
    best_loss = np.inf
    best_params = params.copy()
    best_pass = -1
    n = x_run.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            xb = x_run[sel]
            yb = y_tr[sel]
            tr = forward_batch(run_spec, run_params, xb, training=True, rng=rng)
            loss, grad = loss_and_grad(tr.posteriors, yb)
            if not np.isfinite(loss):
                raise NumericalError(f"training diverged at pass {epoch}")
            loss_sum += loss * xb.shape[0]
            correct += int((tr.posteriors.argmax(axis=1) == yb).sum())
            grads = backward(run_spec, run_params, tr, grad, run_mask)
            opt.step(run_params, grads, trainable)
        rec = {
            "pass": epoch,
            "train_loss": loss_sum / n,
            "train_acc": correct / n,
            "val_loss": float("nan"),
            "val_acc": float("nan"),
        }
        if x_val is not None:
            rec["val_loss"], rec["val_acc"] = _eval_split(
                run_spec, run_params, x_val, y_val, config.batch_size
            )
            monitor = rec["val_loss"]
        else:
            monitor = rec["train_loss"]
        history.append(rec)
        if monitor < best_loss - 1e-12:
            best_loss = monitor
            best_params = params.copy()
            best_pass = epoch
        elif epoch - best_pass > config.patience:
            break
    return best_params, history


def _prefix_features(head_spec, head_params, x, batch_size=256):
    outs = []
    for start in range(0, x.shape[0], batch_size):
        a = x[start : start + batch_size]
        for i, layer in enumerate(head_spec):
            v = head_params.values[i]
            if layer.kind == "conv1d":
                a = conv1d_forward(a, v[0], v[1])
            elif layer.kind == "relu":
                a = np.maximum(a, 0)
            elif layer.kind == "maxpool1d":
                a = maxpool_forward(a, layer.pool)[0]
            elif layer.kind == "flatten":
                a = a.reshape(a.shape[0], -1)
            elif layer.kind == "dense":
                a = a @ v[0] + v[1]
        outs.append(a)
    return np.concatenate(outs, axis=0)


def history_to_csv(history: list[dict]) -> str:
    lines = ["pass,train_loss,train_acc,val_loss,val_acc"]
    for rec in history:
        lines.append(
            f"{rec['pass']},{rec['train_loss']!r},{rec['train_acc']!r},"
            f"{rec['val_loss']!r},{rec['val_acc']!r}"
        )
    return "\n".join(lines) + "\n"
