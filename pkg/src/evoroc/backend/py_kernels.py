"""Pure-numpy kernels: im2col/col2im patch movement and 2x2 max pooling.

These mirror the compiled core in ``_ckernels`` and additionally accept
float64 input, which the gradient-check shadow mode relies on.
"""

import numpy as np


def im2col(x, k):
    """Unfold (C,H,W) into a (C*k*k, OH*OW) patch matrix for a valid k x k window."""
    c, h, w = x.shape
    oh, ow = h - k + 1, w - k + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    return np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(c * k * k, oh * ow)


def col2im(cols, c, h, w, k):
    """Scatter-add a (C*k*k, OH*OW) patch matrix back to a (C,H,W) array."""
    oh, ow = h - k + 1, w - k + 1
    cols = cols.reshape(c, k, k, oh, ow)
    x = np.zeros((c, h, w), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            x[:, i : i + oh, j : j + ow] += cols[:, i, j]
    return x


def maxpool2(x):
    """Non-overlapping 2x2 max pool; trailing odd row/column discarded.

    Returns (out, idx) where idx holds the within-window flat index
    (row*2+col) of the max, first occurrence on ties.
    """
    c, h, w = x.shape
    oh, ow = h // 2, w // 2
    win = (
        x[:, : oh * 2, : ow * 2]
        .reshape(c, oh, 2, ow, 2)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, oh, ow, 4)
    )
    idx = win.argmax(axis=3)
    out = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]
    return out, idx.astype(np.int64)


def maxpool2_backward(dout, idx, h, w):
    """Route upstream gradients back to the argmax positions."""
    c, oh, ow = dout.shape
    win = np.zeros((c, oh, ow, 4), dtype=dout.dtype)
    np.put_along_axis(win, idx[..., None], dout[..., None], axis=3)
    dx = np.zeros((c, h, w), dtype=dout.dtype)
    dx[:, : oh * 2, : ow * 2] = (
        win.reshape(c, oh, ow, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, oh * 2, ow * 2)
    )
    return dx
