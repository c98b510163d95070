"""Model assembly, loss, Adam optimizer, training loop and model files.

The fixed architecture used for both the raw-image and quanvolved-feature
classifiers is Conv(32) -> MaxPool -> Conv(64) -> MaxPool -> Dropout(0.25)
-> Flatten -> Dense(128, ReLU) -> Dropout(0.5) -> Dense(n_classes); only
the input shape differs between the two models.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DecodeError, DimensionError, ValidationError
from .layers import Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2

MODEL_MAGIC = b"TSQM"
MODEL_VERSION = 1

CONV_CHANNELS = (32, 64)
DENSE_UNITS = 128
DROPOUT_RATES = (0.25, 0.5)


@dataclass
class TrainConfig:
    batch_size: int
    epochs: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    dropout_active: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


class Network:
    """An ordered layer stack over a fixed input shape."""

    def __init__(self, input_shape: tuple[int, int, int], n_classes: int,
                 layers: list[Layer], metadata: dict | None = None):
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        self.layers = layers
        self.metadata = metadata or {}

    @classmethod
    def build(cls, input_shape: tuple[int, int, int], n_classes: int, seed: int = 0,
              dtype=np.float32, metadata: dict | None = None) -> "Network":
        rng = np.random.default_rng(seed)
        h, w, c = input_shape
        layers: list[Layer] = []
        shape = (h, w, c)
        for out_channels in CONV_CHANNELS:
            conv = Conv2D(shape[2], out_channels, rng, dtype=dtype)
            shape = conv.output_shape(shape)
            pool = MaxPool2()
            shape = pool.output_shape(shape)
            layers.extend([conv, pool])
        layers.append(Dropout(DROPOUT_RATES[0]))
        flatten = Flatten()
        shape = flatten.output_shape(shape)
        layers.append(flatten)
        dense = Dense(shape[0], DENSE_UNITS, rng, relu=True, dtype=dtype)
        layers.append(dense)
        layers.append(Dropout(DROPOUT_RATES[1]))
        layers.append(Dense(DENSE_UNITS, n_classes, rng, relu=False, dtype=dtype))
        return cls(input_shape, n_classes, layers, metadata)

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise DimensionError(
                f"expected input (N, {', '.join(map(str, self.input_shape))}), "
                f"got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x, training, rng)
        return x

    def backward(self, grad_logits: np.ndarray) -> list[np.ndarray]:
        grad = grad_logits
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            if i == 0 and isinstance(layer, Conv2D):
                layer.backward(grad, need_input_grad=False)
                grad = None
            else:
                grad = layer.backward(grad)
        return self.grads()

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def set_params(self, values: list[np.ndarray]) -> None:
        flat = self.params()
        if len(values) != len(flat):
            raise DimensionError(f"expected {len(flat)} tensors, got {len(values)}")
        cursor = 0
        for layer in self.layers:
            n = len(layer.params())
            for slot, value in enumerate(values[cursor : cursor + n]):
                current = layer.params()[slot]
                if current.shape != value.shape:
                    raise DimensionError(
                        f"shape mismatch {current.shape} vs {value.shape}"
                    )
            if n == 2:
                layer.weights = values[cursor].copy()
                layer.bias = values[cursor + 1].copy()
            cursor += n

    def architecture(self) -> list[dict]:
        spec = []
        for layer in self.layers:
            if isinstance(layer, Conv2D):
                spec.append({"kind": "conv", "shape": list(layer.weights.shape)})
            elif isinstance(layer, MaxPool2):
                spec.append({"kind": "maxpool"})
            elif isinstance(layer, Dropout):
                spec.append({"kind": "dropout", "rate": layer.rate})
            elif isinstance(layer, Flatten):
                spec.append({"kind": "flatten"})
            elif isinstance(layer, Dense):
                spec.append({"kind": "dense", "shape": list(layer.weights.shape),
                             "relu": layer.relu})
        return spec


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, onehot: np.ndarray):
    """Mean cross-entropy loss and its gradient w.r.t. the logits."""
    if logits.shape != onehot.shape:
        raise DimensionError(f"logits {logits.shape} vs onehot {onehot.shape}")
    row_sums = onehot.sum(axis=1)
    if not np.allclose(row_sums, 1.0) or not np.all((onehot == 0) | (onehot == 1)):
        raise ValidationError("labels must be one-hot rows")
    n = logits.shape[0]
    probs = softmax(logits)
    true_idx = onehot.argmax(axis=1)
    picked = probs[np.arange(n), true_idx]
    loss = float(-np.log(np.maximum(picked, np.finfo(probs.dtype).tiny)).mean())
    grad = (probs - onehot) / n
    return loss, grad.astype(logits.dtype)


class AdamState:
    """Per-tensor first/second moments plus the shared step counter."""

    def __init__(self, params: list[np.ndarray]):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              config: TrainConfig) -> None:
    """One in-place Adam update with bias correction."""
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} params vs {len(grads)} grads")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionError(f"param {p.shape} vs grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)


def _accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    return float((logits.argmax(axis=1) == labels).mean())


def evaluate(net: Network, x: np.ndarray, labels: np.ndarray,
             batch_size: int = 256) -> tuple[float, float]:
    """(mean loss, accuracy) over a dataset with dropout inactive."""
    total_loss = 0.0
    correct = 0
    onehot_eye = np.eye(net.n_classes, dtype=np.float32)
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        yb = labels[start : start + batch_size]
        logits = net.forward(xb, training=False)
        loss, _ = softmax_cross_entropy(logits, onehot_eye[yb])
        total_loss += loss * xb.shape[0]
        correct += int((logits.argmax(axis=1) == yb).sum())
    n = x.shape[0]
    return total_loss / n, correct / n


def train(net: Network, train_x: np.ndarray, train_y: np.ndarray,
          val_x: np.ndarray, val_y: np.ndarray, config: TrainConfig,
          log=None) -> list[EpochStats]:
    """Seeded epoch loop; returns one stats row per epoch.

    Batches are visited in shuffled order but accumulated sequentially, so a
    fixed seed reproduces training bit-for-bit.
    """
    if train_x.shape[0] == 0:
        raise ValidationError("training set is empty")
    if val_x.shape[0] == 0:
        raise ValidationError("validation set is empty")
    if train_x.shape[0] != train_y.shape[0]:
        raise DimensionError("training inputs and labels differ in length")
    rng = np.random.default_rng(config.seed)
    state = AdamState(net.params())
    onehot_eye = np.eye(net.n_classes, dtype=np.float32)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(train_x.shape[0])
        epoch_loss = 0.0
        epoch_correct = 0
        for start in range(0, order.shape[0], config.batch_size):
            batch = order[start : start + config.batch_size]
            xb = train_x[batch]
            yb = train_y[batch]
            logits = net.forward(xb, training=config.dropout_active, rng=rng)
            loss, grad = softmax_cross_entropy(logits, onehot_eye[yb])
            net.backward(grad)
            adam_step(net.params(), net.grads(), state, config)
            epoch_loss += loss * xb.shape[0]
            epoch_correct += int((logits.argmax(axis=1) == yb).sum())
        val_loss, val_acc = evaluate(net, val_x, val_y)
        stats = EpochStats(
            epoch=epoch,
            train_loss=epoch_loss / order.shape[0],
            train_acc=epoch_correct / order.shape[0],
            val_loss=val_loss,
            val_acc=val_acc,
        )
        history.append(stats)
        if log is not None:
            log(stats)
    return history


def predict(net: Network, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Class indices by logit argmax; ties resolve to the lower index."""
    out = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], batch_size):
        logits = net.forward(x[start : start + batch_size], training=False)
        out[start : start + batch_size] = logits.argmax(axis=1)
    return out


def write_history(history: list[EpochStats], path, header_comment: str = "") -> None:
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    lines.append("epoch,train_loss,train_acc,val_loss,val_acc")
    for row in history:
        lines.append(
            f"{row.epoch},{row.train_loss:.6f},{row.train_acc:.6f},"
            f"{row.val_loss:.6f},{row.val_acc:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def save_model(net: Network, path) -> None:
    """TSQM file: magic, version, JSON descriptor, float32 LE tensors."""
    descriptor = {
        "input_shape": list(net.input_shape),
        "n_classes": net.n_classes,
        "layers": net.architecture(),
        "metadata": net.metadata,
    }
    blob = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for tensor in net.params():
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_model(path) -> Network:
    data = Path(path).read_bytes()
    if data[:4] != MODEL_MAGIC:
        raise DecodeError(f"{path}: bad model magic {data[:4]!r}")
    version, blob_len = struct.unpack("<II", data[4:12])
    if version != MODEL_VERSION:
        raise DecodeError(f"{path}: unsupported model version {version}")
    descriptor = json.loads(data[12 : 12 + blob_len].decode("utf-8"))
    net = Network.build(
        tuple(descriptor["input_shape"]),
        descriptor["n_classes"],
        seed=0,
        metadata=descriptor.get("metadata", {}),
    )
    if net.architecture() != descriptor["layers"]:
        raise DecodeError(f"{path}: descriptor does not match the fixed architecture")
    offset = 12 + blob_len
    tensors = []
    for param in net.params():
        nbytes = param.size * 4
        chunk = data[offset : offset + nbytes]
        if len(chunk) < nbytes:
            raise DecodeError(f"{path}: truncated parameter block")
        tensors.append(
            np.frombuffer(chunk, dtype="<f4").reshape(param.shape).astype(np.float32)
        )
        offset += nbytes
    net.set_params(tensors)
    return net
