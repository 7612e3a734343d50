"""Layer descriptions, parameter containers, and per-layer compute kernels.

All kernels operate on batched arrays: (B, C, L) for convolutional shapes and
(B, D) for dense shapes. Convolution is valid cross-correlation with stride 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError, SpecError

KINDS = ("conv1d", "relu", "maxpool1d", "flatten", "dense", "dropout", "softmax")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the network; hyperparameters depend on `kind`."""

    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel_size: int = 0
    pool: int = 2
    in_dim: int = 0
    out_dim: int = 0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv1d" and min(self.in_channels, self.out_channels, self.kernel_size) < 1:
            raise SpecError("conv1d needs positive in_channels/out_channels/kernel_size")
        if self.kind == "maxpool1d" and self.pool < 1:
            raise SpecError("maxpool1d needs pool >= 1")
        if self.kind == "dense" and min(self.in_dim, self.out_dim) < 1:
            raise SpecError("dense needs positive in_dim/out_dim")
        if self.kind == "dropout" and not 0.0 <= self.rate < 1.0:
            raise SpecError("dropout rate must be in [0, 1)")

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv1d", "dense")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "conv1d":
            d.update(
                in_channels=self.in_channels,
                out_channels=self.out_channels,
                kernel_size=self.kernel_size,
            )
        elif self.kind == "maxpool1d":
            d.update(pool=self.pool)
        elif self.kind == "dense":
            d.update(in_dim=self.in_dim, out_dim=self.out_dim)
        elif self.kind == "dropout":
            d.update(rate=self.rate)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def conv1d(in_channels, out_channels, kernel_size) -> LayerSpec:
    return LayerSpec("conv1d", in_channels=in_channels, out_channels=out_channels,
                     kernel_size=kernel_size)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def maxpool1d(pool=2) -> LayerSpec:
    return LayerSpec("maxpool1d", pool=pool)


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(in_dim, out_dim) -> LayerSpec:
    return LayerSpec("dense", in_dim=in_dim, out_dim=out_dim)


def dropout(rate=0.5) -> LayerSpec:
    return LayerSpec("dropout", rate=rate)


def softmax() -> LayerSpec:
    return LayerSpec("softmax")


def infer_shapes(spec: list[LayerSpec], input_shape: tuple) -> list[tuple]:
    """Shapes flowing between layers, input first; raises ShapeError on a bad chain."""
    shapes = [tuple(input_shape)]
    for i, layer in enumerate(spec):
        s = shapes[-1]
        if layer.kind == "conv1d":
            if len(s) != 2 or s[0] != layer.in_channels:
                raise ShapeError(f"layer {i} conv1d expects ({layer.in_channels}, L), got {s}")
            lout = s[1] - layer.kernel_size + 1
            if lout < 1:
                raise ShapeError(f"layer {i} conv1d kernel {layer.kernel_size} too long for L={s[1]}")
            shapes.append((layer.out_channels, lout))
        elif layer.kind == "maxpool1d":
            if len(s) != 2:
                raise ShapeError(f"layer {i} maxpool1d expects (C, L), got {s}")
            lout = s[1] // layer.pool
            if lout < 1:
                raise ShapeError(f"layer {i} maxpool1d pool {layer.pool} too large for L={s[1]}")
            shapes.append((s[0], lout))
        elif layer.kind == "flatten":
            shapes.append((int(np.prod(s)),))
        elif layer.kind == "dense":
            if len(s) != 1 or s[0] != layer.in_dim:
                raise ShapeError(f"layer {i} dense expects ({layer.in_dim},), got {s}")
            shapes.append((layer.out_dim,))
        elif layer.kind in ("relu", "dropout"):
            shapes.append(s)
        elif layer.kind == "softmax":
            if i != len(spec) - 1:
                raise ShapeError("softmax may only be the final layer")
            if len(s) != 1:
                raise ShapeError(f"softmax expects a vector, got {s}")
            shapes.append(s)
    return shapes


class Parameters:
    """Weights and biases aligned with a layer list; None for parameterless layers.

    Entries are (weight, bias) tuples: conv1d weight (out_channels, in_channels,
    kernel_size), dense weight (in_dim, out_dim); bias (out,).
    """

    def __init__(self, values: list):
        self.values = values

    @classmethod
    def zeros_like(cls, other: "Parameters") -> "Parameters":
        vals = []
        for v in other.values:
            vals.append(None if v is None else (np.zeros_like(v[0]), np.zeros_like(v[1])))
        return cls(vals)

    def copy(self) -> "Parameters":
        vals = []
        for v in self.values:
            vals.append(None if v is None else (v[0].copy(), v[1].copy()))
        return Parameters(vals)

    def astype(self, dtype) -> "Parameters":
        vals = []
        for v in self.values:
            vals.append(None if v is None else (v[0].astype(dtype), v[1].astype(dtype)))
        return Parameters(vals)

    def n_params(self) -> int:
        return sum(v[0].size + v[1].size for v in self.values if v is not None)

    def check_finite(self):
        for i, v in enumerate(self.values):
            if v is not None and not (np.isfinite(v[0]).all() and np.isfinite(v[1]).all()):
                raise SpecError(f"non-finite parameters in layer {i}")

    def validate_against(self, spec: list[LayerSpec]):
        if len(self.values) != len(spec):
            raise ShapeError("parameter list length does not match layer list")
        for i, (layer, v) in enumerate(zip(spec, self.values)):
            if layer.has_params != (v is not None):
                raise ShapeError(f"layer {i} ({layer.kind}) parameter presence mismatch")
            if v is None:
                continue
            w, b = v
            if layer.kind == "conv1d":
                expect_w = (layer.out_channels, layer.in_channels, layer.kernel_size)
                expect_b = (layer.out_channels,)
            else:
                expect_w = (layer.in_dim, layer.out_dim)
                expect_b = (layer.out_dim,)
            if tuple(w.shape) != expect_w or tuple(b.shape) != expect_b:
                raise ShapeError(
                    f"layer {i} ({layer.kind}) tensor shapes {w.shape}/{b.shape} "
                    f"do not match spec {expect_w}/{expect_b}"
                )


# ---------------------------------------------------------------------------
# kernels


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    batch, cin, length = x.shape
    cout, _, k = w.shape
    lout = length - k + 1
    win = sliding_window_view(x, k, axis=2)  # (B, Cin, Lout, K)
    col = win.transpose(0, 2, 1, 3).reshape(batch * lout, cin * k)
    out = col @ w.reshape(cout, cin * k).T
    out += b
    return out.reshape(batch, lout, cout).transpose(0, 2, 1)


def conv1d_backward(x: np.ndarray, w: np.ndarray, g: np.ndarray, need_dx=True):
    """Gradients for valid cross-correlation; g is dL/dout (B, Cout, Lout)."""
    batch, cin, length = x.shape
    cout, _, k = w.shape
    lout = length - k + 1
    win = sliding_window_view(x, k, axis=2)
    col = win.transpose(0, 2, 1, 3).reshape(batch * lout, cin * k)
    g_mat = g.transpose(0, 2, 1).reshape(batch * lout, cout)
    dw = (g_mat.T @ col).reshape(cout, cin, k)
    db = g_mat.sum(axis=0)
    if not need_dx:
        return dw, db, None
    # full correlation of g with the kernel flipped along its tap axis
    gp = np.zeros((batch, cout, lout + 2 * (k - 1)), dtype=g.dtype)
    gp[:, :, k - 1 : k - 1 + lout] = g
    gwin = sliding_window_view(gp, k, axis=2)  # (B, Cout, L, K)
    gcol = gwin.transpose(0, 2, 1, 3).reshape(batch * length, cout * k)
    wflip = w[:, :, ::-1].transpose(1, 0, 2).reshape(cin, cout * k)
    dx = (gcol @ wflip.T).reshape(batch, length, cin).transpose(0, 2, 1)
    return dw, db, dx


def maxpool_forward(x: np.ndarray, pool: int):
    batch, c, length = x.shape
    lout = length // pool
    xr = x[:, :, : lout * pool].reshape(batch, c, lout, pool)
    idx = xr.argmax(axis=3)  # first maximum wins on ties
    out = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
    return out, idx


def maxpool_backward(g: np.ndarray, idx: np.ndarray, pool: int, length: int) -> np.ndarray:
    batch, c, lout = g.shape
    dxr = np.zeros((batch, c, lout, pool), dtype=g.dtype)
    np.put_along_axis(dxr, idx[..., None], g[..., None], axis=3)
    dx = np.zeros((batch, c, length), dtype=g.dtype)
    dx[:, :, : lout * pool] = dxr.reshape(batch, c, lout * pool)
    return dx


def softmax_forward(z: np.ndarray) -> np.ndarray:
    zs = z - z.max(axis=1, keepdims=True)
    e = np.exp(zs)
    return e / e.sum(axis=1, keepdims=True)
