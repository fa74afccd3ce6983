"""Finite-difference verification of every backward path (double-precision mode)."""

import numpy as np
import pytest

from evoroc import backend
from evoroc.errors import ShapeError
from evoroc.nn import (
    CnnModel,
    ConvLayerParams,
    LinearLayerParams,
    conv2d_forward,
    conv2d_backward,
    model_backward,
    model_forward,
)
from evoroc.rng import RngStream
from evoroc.train import cross_entropy_loss

FD_STEP = 1e-3
REL_TOL = 1e-4
N_CONFIGS = 20


def _rel_err(analytic, numeric):
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _pool_gap(a):
    """Smallest lead of each 2x2 window max over its runner-up (all-zero windows
    excluded: both sides of the kink have zero gradient there)."""
    c, h, w = a.shape
    gap = np.inf
    for ci in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                win = np.sort(a[ci, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2].reshape(-1))
                if win[-1] > 0 or win[-1] != win[-2]:
                    gap = min(gap, win[-1] - win[-2])
    return gap


# finite differences are only valid away from the max-pool/ReLU kinks; configs
# whose window maxima lead by less than this are rejection-sampled away
KINK_MARGIN = 0.02


def _model_margin(model, x, mask_seed):
    """Distance of the forward pass from its nearest max-pool/ReLU kink.

    Per 2x2 window of each pre-activation map: a stably clipped window
    (max well below zero) is safe; otherwise the max must clear zero and the
    runner-up by a margin. FC pre-activations must clear zero likewise.
    """
    _, rec = model_forward(model, x, RngStream(mask_seed))
    m = np.inf
    for blk in rec.blocks:
        z = blk["z"]
        c, h, w = z.shape
        for ci in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    win = np.sort(z[ci, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2].reshape(-1))
                    top, second = win[-1], win[-2]
                    if top < -KINK_MARGIN:
                        continue
                    m = min(m, abs(top), top - second)
    return min(m, np.abs(rec.z1).min(), np.abs(rec.z2).min())


def _central_diff(f, arr, step=FD_STEP):
    """Central finite differences of scalar f with respect to every arr element."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f()
        flat[i] = orig - step
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


class TestConvGradients:
    def test_random_configs_match_finite_differences(self):
        worst = 0.0
        for trial in range(N_CONFIGS):
            rng = RngStream(100 + trial)
            in_ch = int(rng.integers(1, 4))
            out_ch = int(rng.integers(1, 4))
            k = int(rng.integers(1, 4))
            h = int(rng.integers(k, k + 4))
            w = int(rng.integers(k, k + 4))
            x = rng.child("x").normal(size=(in_ch, h, w))
            layer = ConvLayerParams(
                rng.child("w").normal(size=(out_ch, in_ch, k, k)),
                rng.child("b").normal(size=(out_ch,)),
            )
            c = rng.child("c").normal(size=(out_ch, h - k + 1, w - k + 1))

            def loss():
                return float((conv2d_forward(x, layer) * c).sum())

            y, cols = conv2d_forward(x, layer), None
            cols = backend.im2col(x, k)
            dx, dw, db = conv2d_backward(c, x.shape, cols, layer, need_dx=True)
            worst = max(worst, _rel_err(dx, _central_diff(loss, x)))
            worst = max(worst, _rel_err(dw, _central_diff(loss, layer.weights)))
            worst = max(worst, _rel_err(db, _central_diff(loss, layer.bias)))
        assert worst < REL_TOL


class TestMaxPoolGradients:
    def test_random_configs_match_finite_differences(self):
        worst = 0.0
        accepted = 0
        candidate = 0
        while accepted < N_CONFIGS:
            rng = RngStream(200 + candidate)
            candidate += 1
            ch = int(rng.integers(1, 4))
            h = int(rng.integers(2, 9))
            w = int(rng.integers(2, 9))
            x = rng.child("x").normal(size=(ch, h, w))
            if _pool_gap(x) < KINK_MARGIN:
                continue
            accepted += 1
            c = rng.child("c").normal(size=(ch, h // 2, w // 2))

            def loss():
                return float((backend.maxpool2(x)[0] * c).sum())

            _, idx = backend.maxpool2(x)
            dx = backend.maxpool2_backward(c, idx, h, w)
            worst = max(worst, _rel_err(dx, _central_diff(loss, x)))
        assert worst < REL_TOL


def _tiny_model(rng: RngStream, in_ch, c1, c2, c3, dropout_p):
    """A small random model with the production layer chain but toy widths."""

    def conv(tag, out_ch, in_c, k):
        return ConvLayerParams(
            rng.child(tag, "w").normal(scale=0.5, size=(out_ch, in_c, k, k)),
            rng.child(tag, "b").normal(scale=0.5, size=(out_ch,)),
        )

    def fc(tag, out_dim, in_dim):
        return LinearLayerParams(
            rng.child(tag, "w").normal(scale=0.5, size=(out_dim, in_dim)),
            rng.child(tag, "b").normal(scale=0.5, size=(out_dim,)),
        )

    # input 22x22: conv k3 -> 20 -> pool 10 -> conv k2 -> 9 -> pool 4
    #            -> conv k2 -> 3 -> pool 1, flatten = c3
    return CnnModel(
        conv1=conv("conv1", c1, in_ch, 3),
        conv2=conv("conv2", c2, c1, 2),
        conv3=conv("conv3", c3, c2, 2),
        fc1=fc("fc1", 3, c3),
        fc2=fc("fc2", 3, 3),
        fc3=fc("fc3", 2, 3),
        dropout_p=dropout_p,
    )


class TestModelGradients:
    def test_full_model_with_cross_entropy_matches_finite_differences(self):
        worst = 0.0
        accepted = 0
        candidate = 0
        while accepted < N_CONFIGS:
            trial = candidate
            rng = RngStream(300 + trial)
            candidate += 1
            in_ch = int(rng.integers(1, 3))
            model = _tiny_model(
                rng.child("model"),
                in_ch,
                int(rng.integers(1, 3)),
                int(rng.integers(1, 3)),
                int(rng.integers(1, 3)),
                dropout_p=0.1 if trial % 2 == 0 else 0.0,
            ).train()
            x = rng.child("x").normal(size=(in_ch, 22, 22))
            label = trial % 2
            mask_seed = 9000 + trial  # frozen masks so finite differences see the same network
            if _model_margin(model, x, mask_seed) < KINK_MARGIN:
                continue
            accepted += 1

            def loss():
                logits, _ = model_forward(model, x, RngStream(mask_seed))
                return cross_entropy_loss(logits, label)[0]

            logits, rec = model_forward(model, x, RngStream(mask_seed))
            _, dlogits = cross_entropy_loss(logits, label)
            grads = model_backward(model, rec, dlogits)
            for name, arr in model.parameters().items():
                worst = max(worst, _rel_err(grads[name], _central_diff(loss, arr)))
        assert worst < REL_TOL

    def test_zero_dlogits_zero_gradients(self):
        rng = RngStream(400)
        model = _tiny_model(rng.child("model"), 1, 2, 2, 2, dropout_p=0.0).train()
        x = rng.child("x").normal(size=(1, 22, 22))
        _, rec = model_forward(model, x, RngStream(0))
        grads = model_backward(model, rec, np.zeros(2))
        for arr in grads.values():
            assert not np.any(arr)

    def test_linear_outer_product_oracle(self):
        rng = RngStream(401)
        model = _tiny_model(rng.child("model"), 1, 2, 2, 2, dropout_p=0.0).train()
        x = rng.child("x").normal(size=(1, 22, 22))
        _, rec = model_forward(model, x, RngStream(0))
        dlogits = np.array([1.0, 0.0])
        grads = model_backward(model, rec, dlogits)
        np.testing.assert_allclose(grads["fc3.w"], np.outer(dlogits, rec.h2))
        np.testing.assert_allclose(grads["fc3.b"], dlogits)

    def test_consumed_record_raises(self):
        rng = RngStream(402)
        model = _tiny_model(rng.child("model"), 1, 2, 2, 2, dropout_p=0.0).train()
        x = rng.child("x").normal(size=(1, 22, 22))
        _, rec = model_forward(model, x, RngStream(0))
        model_backward(model, rec, np.zeros(2))
        with pytest.raises(ShapeError):
            model_backward(model, rec, np.zeros(2))


class TestCrossEntropyGradient:
    def test_dlogits_matches_finite_differences(self):
        worst = 0.0
        for trial in range(N_CONFIGS):
            rng = RngStream(500 + trial)
            logits = rng.normal(scale=3.0, size=(2,))
            label = trial % 2
            _, dlogits = cross_entropy_loss(logits, label)

            def loss():
                return cross_entropy_loss(logits, label)[0]

            worst = max(worst, _rel_err(dlogits, _central_diff(loss, logits)))
        assert worst < REL_TOL
