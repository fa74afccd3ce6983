"""Cross-entropy loss, SGD with momentum + L2, and the epoch loop.

The checkpoint returned by `train` is the epoch with the highest validation
AUC (earliest epoch on ties), not the final one.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, SplitError
from .metrics import auc
from .nn import CnnModel, model_backward, model_forward
from .rng import RngStream


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.8
    l2_penalty: float = 0.001
    batch_size: int = 1
    max_epochs: int = 50
    master_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0,1)")
        if self.l2_penalty < 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("invalid training configuration")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_auc: float
    val_auc: float


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    selected_epoch: int = -1

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write("epoch,train_loss,train_auc,val_auc\n")
            for r in self.epochs:
                f.write(f"{r.epoch},{r.train_loss:.6f},{r.train_auc:.6f},{r.val_auc:.6f}\n")


def cross_entropy_loss(logits, label):
    """Stabilized -log softmax(logits)[label]; also returns dloss/dlogits."""
    logits = np.asarray(logits)
    if not np.all(np.isfinite(logits)):
        raise ShapeError("cross-entropy requires finite logits")
    m = logits.max()
    shifted = logits - m
    lse = m + np.log(np.exp(shifted).sum())
    loss = float(lse - logits[label])
    p = np.exp(logits - lse)
    dlogits = p.copy()
    dlogits[label] -= 1
    return loss, dlogits.astype(logits.dtype)


def init_optimizer_state(model: CnnModel):
    return {name: np.zeros_like(p) for name, p in model.parameters().items()}


def sgd_step(params, grads, state, config: TrainConfig):
    """In-place update: g' = g + l2*w; v = momentum*v + g'; w -= lr*v."""
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {w.shape} for {name}")
        v = state[name]
        v *= config.momentum
        v += g + config.l2_penalty * w
        w -= config.learning_rate * v


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def positive_scores(model: CnnModel, records):
    """Eval-mode class-1 softmax probability for each slice record."""
    was = model.mode
    model.eval()
    try:
        return np.array(
            [softmax(model_forward(model, r.pixels)[0])[1] for r in records],
            dtype=np.float64,
        )
    finally:
        model.mode = was


def _check_split(records, name):
    labels = {r.label for r in records}
    if not records or labels != {0, 1}:
        raise SplitError(f"{name} split must be non-empty and contain both classes")


def train(model: CnnModel, train_records, val_records, config: TrainConfig):
    """Run up to max_epochs of per-sample SGD; return (best checkpoint, history)."""
    _check_split(train_records, "train")
    _check_split(val_records, "validation")

    model = model.copy().train()
    params = model.parameters()
    state = init_optimizer_state(model)
    root = RngStream(config.master_seed)
    train_labels = np.array([r.label for r in train_records])
    val_labels = np.array([r.label for r in val_records])

    history = TrainHistory()
    best = None
    best_val = -1.0
    for epoch in range(config.max_epochs):
        order = root.child("shuffle", epoch).permutation(len(train_records))
        losses = 0.0
        for step, idx in enumerate(order):
            rec = train_records[int(idx)]
            rng = root.child("dropout", epoch, step)
            logits, act = model_forward(model, rec.pixels, rng)
            loss, dlogits = cross_entropy_loss(logits, rec.label)
            grads = model_backward(model, act, dlogits)
            sgd_step(params, grads, state, config)
            losses += loss
        train_auc = auc(positive_scores(model, train_records), train_labels)
        val_auc = auc(positive_scores(model, val_records), val_labels)
        history.epochs.append(EpochRecord(epoch, losses / len(order), train_auc, val_auc))
        if val_auc > best_val:
            best_val = val_auc
            best = model.copy().eval()
            history.selected_epoch = epoch
    return best, history
