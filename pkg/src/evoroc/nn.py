"""From-scratch CNN: layer forwards/backwards, initialization, full-model passes.

The fixed architecture is 3 valid-convolution blocks (conv -> ReLU -> 2x2 max
pool -> dropout) followed by 3 fully connected layers (ReLU after the first
two, raw logits from the last). On a (6,64,64) input the flattened feature
width is exactly 1024.

All production tensors are float32; every op also accepts float64 so gradient
checks can run in a double-precision shadow mode.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ShapeError
from .rng import RngStream

INPUT_SHAPE = (6, 64, 64)
FLAT_DIM = 1024


@dataclass
class ConvLayerParams:
    weights: np.ndarray  # (out_ch, in_ch, k, k)
    bias: np.ndarray  # (out_ch,)

    def copy(self):
        return ConvLayerParams(self.weights.copy(), self.bias.copy())

    def astype(self, dtype):
        return ConvLayerParams(self.weights.astype(dtype), self.bias.astype(dtype))


@dataclass
class LinearLayerParams:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)

    def copy(self):
        return LinearLayerParams(self.weights.copy(), self.bias.copy())

    def astype(self, dtype):
        return LinearLayerParams(self.weights.astype(dtype), self.bias.astype(dtype))


@dataclass
class CnnModel:
    conv1: ConvLayerParams
    conv2: ConvLayerParams
    conv3: ConvLayerParams
    fc1: LinearLayerParams
    fc2: LinearLayerParams
    fc3: LinearLayerParams
    dropout_p: float = 0.1
    mode: str = "train"

    def train(self):
        self.mode = "train"
        return self

    def eval(self):
        self.mode = "eval"
        return self

    def parameters(self):
        """Ordered name -> array mapping; names match the checkpoint format."""
        out = {}
        for name in ("conv1", "conv2", "conv3", "fc1", "fc2", "fc3"):
            layer = getattr(self, name)
            out[f"{name}.w"] = layer.weights
            out[f"{name}.b"] = layer.bias
        return out

    def copy(self):
        return CnnModel(
            self.conv1.copy(), self.conv2.copy(), self.conv3.copy(),
            self.fc1.copy(), self.fc2.copy(), self.fc3.copy(),
            self.dropout_p, self.mode,
        )

    def astype(self, dtype):
        return CnnModel(
            self.conv1.astype(dtype), self.conv2.astype(dtype), self.conv3.astype(dtype),
            self.fc1.astype(dtype), self.fc2.astype(dtype), self.fc3.astype(dtype),
            self.dropout_p, self.mode,
        )


def xavier_init(shape, fan_in, fan_out, rng: RngStream, dtype=np.float32):
    """Glorot-uniform draw on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]."""
    if fan_in < 1 or fan_out < 1:
        raise ShapeError(f"fans must be >= 1, got fan_in={fan_in} fan_out={fan_out}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, shape).astype(dtype)


def uniform01_init(shape, rng: RngStream, dtype=np.float32):
    """I.i.d. uniform draw on [0, 1)."""
    return rng.uniform(0.0, 1.0, shape).astype(dtype)


def build_model(rng: RngStream) -> CnnModel:
    """Construct the fixed architecture.

    All weights are Glorot-uniform; biases are uniform on [0, 1). Uniform-[0,1)
    FC *weights* stack to logits of order 10^6 and the first SGD steps kill
    every ReLU for good, so the trainable init keeps Glorot there as well.
    """

    def conv(tag, out_ch, in_ch, k):
        r = rng.child(tag)
        w = xavier_init((out_ch, in_ch, k, k), in_ch * k * k, out_ch * k * k, r.child("w"))
        b = uniform01_init((out_ch,), r.child("b"))
        return ConvLayerParams(w, b)

    def fc(tag, out_dim, in_dim):
        r = rng.child(tag)
        w = xavier_init((out_dim, in_dim), in_dim, out_dim, r.child("w"))
        b = uniform01_init((out_dim,), r.child("b"))
        return LinearLayerParams(w, b)

    return CnnModel(
        conv1=conv("conv1", 16, 6, 7),
        conv2=conv("conv2", 32, 16, 5),
        conv3=conv("conv3", 64, 32, 4),
        fc1=fc("fc1", 256, 1024),
        fc2=fc("fc2", 64, 256),
        fc3=fc("fc3", 2, 64),
    )


def _conv2d(x, layer):
    out_ch, in_ch, k, _ = layer.weights.shape
    if x.ndim != 3:
        raise ShapeError(f"conv input must be (C,H,W), got ndim={x.ndim}")
    c, h, w = x.shape
    if c != in_ch:
        raise ShapeError(f"conv input channels={c}, layer expects in_ch={in_ch}")
    if h < k or w < k:
        raise ShapeError(f"conv spatial extents ({h},{w}) smaller than kernel k={k}")
    cols = backend.im2col(x, k)
    y = layer.weights.reshape(out_ch, -1) @ cols + layer.bias[:, None]
    return y.reshape(out_ch, h - k + 1, w - k + 1), cols


def conv2d_forward(x, layer: ConvLayerParams):
    """Valid cross-correlation, stride 1, bias per output channel."""
    return _conv2d(x, layer)[0]


def conv2d_backward(dy, x_shape, cols, layer: ConvLayerParams, need_dx=True):
    out_ch = layer.weights.shape[0]
    k = layer.weights.shape[2]
    c, h, w = x_shape
    dy_mat = dy.reshape(out_ch, -1)
    dw = (dy_mat @ cols.T).reshape(layer.weights.shape)
    db = dy_mat.sum(axis=1)
    dx = None
    if need_dx:
        dcols = layer.weights.reshape(out_ch, -1).T @ dy_mat
        dx = backend.col2im(dcols, c, h, w, k)
    return dx, dw, db


def maxpool2_forward(x):
    """Max over non-overlapping 2x2 windows, stride 2; odd trailing extents dropped."""
    if x.ndim != 3:
        raise ShapeError(f"pool input must be (C,H,W), got ndim={x.ndim}")
    if x.shape[1] < 2 or x.shape[2] < 2:
        raise ShapeError(f"pool needs H,W >= 2, got ({x.shape[1]},{x.shape[2]})")
    out, _ = backend.maxpool2(x)
    return out


def dropout_apply(x, p, mode, rng: RngStream | None = None):
    """Inverted dropout. Returns (output, mask) where mask holds the applied
    per-element scale (0 for dropped, 1/(1-p) for kept; all ones in eval)."""
    if not 0.0 <= p < 1.0:
        raise ShapeError(f"dropout probability must be in [0,1), got {p}")
    if mode == "eval" or p == 0.0:
        return x.copy(), np.ones_like(x)
    keep = rng.uniform(size=x.shape) >= p
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - p)
    return x * mask, mask


def linear_forward(x, layer: LinearLayerParams):
    """y = W x + b."""
    if x.shape != (layer.weights.shape[1],):
        raise ShapeError(
            f"linear input length {x.shape} does not match in_dim={layer.weights.shape[1]}"
        )
    return layer.weights @ x + layer.bias


def relu(x):
    return np.maximum(x, 0)


@dataclass
class ActivationRecord:
    """Intermediates saved by model_forward for the backward pass."""

    x: np.ndarray
    blocks: list = field(default_factory=list)  # per conv block intermediates
    flat: np.ndarray | None = None
    z1: np.ndarray | None = None
    h1: np.ndarray | None = None
    z2: np.ndarray | None = None
    h2: np.ndarray | None = None
    consumed: bool = False


def model_forward(model: CnnModel, x, rng: RngStream | None = None):
    """Full forward pass. Returns (logits, ActivationRecord).

    In train mode dropout masks are drawn from `rng`; eval mode is a pure
    function of (model, x).
    """
    in_ch = model.conv1.weights.shape[1]
    if x.ndim != 3 or x.shape[0] != in_ch:
        raise ShapeError(f"model input must be ({in_ch},H,W), got {x.shape}")
    if model.mode == "train" and model.dropout_p > 0 and rng is None:
        raise ShapeError("train-mode forward with dropout requires an rng stream")

    rec = ActivationRecord(x=x)
    cur = x
    for i, layer in enumerate((model.conv1, model.conv2, model.conv3)):
        z, cols = _conv2d(cur, layer)
        a = relu(z)
        pooled, pool_idx = backend.maxpool2(a)
        drop_rng = rng.child("drop", i) if (rng is not None and model.mode == "train") else None
        dropped, mask = dropout_apply(pooled, model.dropout_p, model.mode, drop_rng)
        rec.blocks.append(
            {
                "in_shape": cur.shape,
                "cols": cols,
                "z": z,
                "a_shape": a.shape,
                "pool_idx": pool_idx,
                "mask": mask,
            }
        )
        cur = dropped

    rec.flat = cur.reshape(-1)
    rec.z1 = linear_forward(rec.flat, model.fc1)
    rec.h1 = relu(rec.z1)
    rec.z2 = linear_forward(rec.h1, model.fc2)
    rec.h2 = relu(rec.z2)
    logits = linear_forward(rec.h2, model.fc3)
    return logits, rec


def conv_features(model: CnnModel, x):
    """Eval-mode convolutional sub-path: conv blocks + flatten, dropout inert."""
    in_ch = model.conv1.weights.shape[1]
    if x.ndim != 3 or x.shape[0] != in_ch:
        raise ShapeError(f"model input must be ({in_ch},H,W), got {x.shape}")
    cur = x
    for layer in (model.conv1, model.conv2, model.conv3):
        z, _ = _conv2d(cur, layer)
        cur, _ = backend.maxpool2(relu(z))
    return cur.reshape(-1)


def model_backward(model: CnnModel, rec: ActivationRecord, dlogits):
    """Exact reverse-mode gradients for every parameter.

    The record is single-use: it is consumed by this call.
    """
    if rec is None or rec.consumed:
        raise ShapeError("activation record missing or already consumed")
    rec.consumed = True

    grads = {}
    # fc3
    grads["fc3.w"] = np.outer(dlogits, rec.h2)
    grads["fc3.b"] = dlogits.copy()
    dh2 = model.fc3.weights.T @ dlogits
    dz2 = dh2 * (rec.z2 > 0)
    grads["fc2.w"] = np.outer(dz2, rec.h1)
    grads["fc2.b"] = dz2
    dh1 = model.fc2.weights.T @ dz2
    dz1 = dh1 * (rec.z1 > 0)
    grads["fc1.w"] = np.outer(dz1, rec.flat)
    grads["fc1.b"] = dz1
    dflat = model.fc1.weights.T @ dz1

    layers = (model.conv1, model.conv2, model.conv3)
    dcur = dflat.reshape(rec.blocks[-1]["mask"].shape)
    for i in range(2, -1, -1):
        blk = rec.blocks[i]
        dpool = dcur * blk["mask"]
        _, ah, aw = blk["a_shape"]
        da = backend.maxpool2_backward(dpool, blk["pool_idx"], ah, aw)
        dz = da * (blk["z"] > 0)
        dx, dw, db = conv2d_backward(
            dz, blk["in_shape"], blk["cols"], layers[i], need_dx=(i > 0)
        )
        grads[f"conv{i + 1}.w"] = dw
        grads[f"conv{i + 1}.b"] = db
        dcur = dx
    return grads
