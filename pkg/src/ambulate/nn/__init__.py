from .engine import ForwardTrace, backward, forward, forward_batch, loss_and_grad, predict
from .gradcheck import check_gradients
from .layers import (
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
from .train import TrainConfig, history_to_csv, train

__all__ = [
    "ForwardTrace",
    "LayerSpec",
    "Parameters",
    "TrainConfig",
    "backward",
    "check_gradients",
    "conv1d",
    "dense",
    "dropout",
    "flatten",
    "forward",
    "forward_batch",
    "history_to_csv",
    "infer_shapes",
    "loss_and_grad",
    "maxpool1d",
    "predict",
    "relu",
    "softmax",
    "train",
]
