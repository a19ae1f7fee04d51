"""Single-hidden-layer sigmoid network trained by online backpropagation.

Training starts from one hidden node and adds nodes whenever the error
stalls; afterwards connections are pruned smallest-magnitude first as long
as accuracy holds. Pruned connections are switched off by boolean masks,
so the stored weight value of a masked connection never matters.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .dataset import Dataset, RexWarning, input_matrix
from .errors import TrainingError, UsageError

INIT_RANGE = 0.5


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.3
    momentum: float = 0.7
    max_epochs: int = 5000
    target_mse: float = 0.01
    stall_window: int = 50
    stall_tolerance: float = 1e-4
    max_hidden: int = 5
    prune_accuracy_slack: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise UsageError("learning_rate must be positive and finite")
        if not 0 <= self.momentum < 1:
            raise UsageError("momentum must lie in [0, 1)")
        if self.max_epochs < 0 or self.stall_window < 1:
            raise UsageError("max_epochs must be >= 0 and stall_window >= 1")
        if not (np.isfinite(self.target_mse) and self.target_mse >= 0):
            raise UsageError("target_mse must be non-negative")
        if not np.isfinite(self.stall_tolerance):
            raise UsageError("stall_tolerance must be finite")
        if self.max_hidden < 1:
            raise UsageError("max_hidden must be at least 1")
        if not 0 <= self.prune_accuracy_slack <= 1:
            raise UsageError("prune_accuracy_slack must lie in [0, 1]")


@dataclass
class TrainReport:
    epochs_run: int = 0
    final_mse: float = float("nan")
    hidden_nodes_added: int = 0
    connections_pruned: int = 0
    inputs_removed: list[int] = field(default_factory=list)
    train_accuracy: float = 0.0


@dataclass(eq=False)
class Network:
    weights_ih: np.ndarray  # hidden x input
    weights_ho: np.ndarray  # output x hidden
    bias_h: np.ndarray
    bias_o: np.ndarray
    mask_ih: np.ndarray
    mask_ho: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.weights_ih = np.array(self.weights_ih, dtype=float, ndmin=2)
        self.weights_ho = np.array(self.weights_ho, dtype=float, ndmin=2)
        self.bias_h = np.array(self.bias_h, dtype=float).reshape(-1)
        self.bias_o = np.array(self.bias_o, dtype=float).reshape(-1)
        self.mask_ih = np.array(self.mask_ih, dtype=bool, ndmin=2)
        self.mask_ho = np.array(self.mask_ho, dtype=bool, ndmin=2)
        h, i = self.weights_ih.shape
        o = self.weights_ho.shape[0]
        if (h < 1 or self.weights_ho.shape != (o, h) or self.bias_h.shape != (h,)
                or self.bias_o.shape != (o,) or self.mask_ih.shape != (h, i)
                or self.mask_ho.shape != (o, h)):
            raise UsageError("inconsistent network shapes")

    @property
    def input_count(self) -> int:
        return self.weights_ih.shape[1]

    @property
    def hidden_count(self) -> int:
        return self.weights_ih.shape[0]

    @property
    def output_count(self) -> int:
        return self.weights_ho.shape[0]

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def effective_weights(self):
        return (np.where(self.mask_ih, self.weights_ih, 0.0),
                np.where(self.mask_ho, self.weights_ho, 0.0))

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "hidden_count": self.hidden_count,
            "output_count": self.output_count,
            "seed": self.seed,
            "weights_ih": self.weights_ih.tolist(),
            "weights_ho": self.weights_ho.tolist(),
            "bias_h": self.bias_h.tolist(),
            "bias_o": self.bias_o.tolist(),
            "mask_ih": self.mask_ih.tolist(),
            "mask_ho": self.mask_ho.tolist(),
        }

    def to_json(self, config: TrainConfig | None = None) -> str:
        doc = self.to_dict()
        if config is not None:
            doc["config"] = asdict(config)
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Network":
        doc = json.loads(text)
        return cls(doc["weights_ih"], doc["weights_ho"], doc["bias_h"], doc["bias_o"],
                   doc["mask_ih"], doc["mask_ho"], doc.get("seed", 0))


def init_network(input_count: int, output_count: int, seed: int = 0) -> Network:
    """One hidden node, weights uniform in [-0.5, 0.5], every connection active."""
    if input_count < 1 or output_count < 1:
        raise UsageError("a network needs at least one input and one output")
    rng = np.random.default_rng(seed)
    w_ih = rng.uniform(-INIT_RANGE, INIT_RANGE, (1, input_count))
    b_h = rng.uniform(-INIT_RANGE, INIT_RANGE, 1)
    w_ho = rng.uniform(-INIT_RANGE, INIT_RANGE, (output_count, 1))
    b_o = rng.uniform(-INIT_RANGE, INIT_RANGE, output_count)
    return Network(w_ih, w_ho, b_h, b_o, np.ones((1, input_count), bool),
                   np.ones((output_count, 1), bool), seed)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def forward(net: Network, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Activations of the hidden and output layers for one input vector."""
    x = np.asarray(inputs, dtype=float)
    if x.shape != (net.input_count,):
        raise UsageError(f"expected {net.input_count} inputs, got shape {x.shape}")
    hidden, outputs = forward_batch(net, x[None, :])
    return hidden[0], outputs[0]


def forward_batch(net: Network, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w_ih, w_ho = net.effective_weights()
    hidden = sigmoid(X @ w_ih.T + net.bias_h)
    return hidden, outputs_from_hidden(net, hidden)


def outputs_from_hidden(net: Network, hidden: np.ndarray) -> np.ndarray:
    _, w_ho = net.effective_weights()
    return sigmoid(hidden @ w_ho.T + net.bias_o)


def predict(net: Network, X: np.ndarray) -> np.ndarray:
    return np.argmax(forward_batch(net, X)[1], axis=1)


def pattern_loss(net: Network, x, target) -> float:
    """Half squared error of one pattern; the quantity backprop differentiates."""
    _, out = forward(net, x)
    return 0.5 * float(np.sum((out - np.asarray(target)) ** 2))


def pattern_gradients(net: Network, x, target) -> dict[str, np.ndarray]:
    """Backpropagated gradients of :func:`pattern_loss`; zero on masked connections."""
    x = np.asarray(x, dtype=float)
    hidden, out = forward(net, x)
    _, w_ho = net.effective_weights()
    delta_o = (out - target) * out * (1 - out)
    delta_h = (w_ho.T @ delta_o) * hidden * (1 - hidden)
    return {
        "weights_ih": np.outer(delta_h, x) * net.mask_ih,
        "bias_h": delta_h,
        "weights_ho": np.outer(delta_o, hidden) * net.mask_ho,
        "bias_o": delta_o,
    }


@njit(cache=False)
def _sgd_epoch(X, T, w_ih, b_h, w_ho, b_o, m_ih, m_ho, v_ih, v_bh, v_ho, v_bo, lr, mom):
    n_in = X.shape[1]
    n_hid = w_ih.shape[0]
    n_out = w_ho.shape[0]
    hidden = np.empty(n_hid)
    delta_o = np.empty(n_out)
    delta_h = np.empty(n_hid)
    for p in range(X.shape[0]):
        for j in range(n_hid):
            z = b_h[j]
            for i in range(n_in):
                if m_ih[j, i]:
                    z += w_ih[j, i] * X[p, i]
            hidden[j] = 1.0 / (1.0 + np.exp(-z))
        for k in range(n_out):
            z = b_o[k]
            for j in range(n_hid):
                if m_ho[k, j]:
                    z += w_ho[k, j] * hidden[j]
            out = 1.0 / (1.0 + np.exp(-z))
            delta_o[k] = (out - T[p, k]) * out * (1.0 - out)
        for j in range(n_hid):
            s = 0.0
            for k in range(n_out):
                if m_ho[k, j]:
                    s += w_ho[k, j] * delta_o[k]
            delta_h[j] = s * hidden[j] * (1.0 - hidden[j])
        for k in range(n_out):
            for j in range(n_hid):
                if m_ho[k, j]:
                    v_ho[k, j] = mom * v_ho[k, j] - lr * delta_o[k] * hidden[j]
                    w_ho[k, j] += v_ho[k, j]
            v_bo[k] = mom * v_bo[k] - lr * delta_o[k]
            b_o[k] += v_bo[k]
        for j in range(n_hid):
            for i in range(n_in):
                if m_ih[j, i]:
                    v_ih[j, i] = mom * v_ih[j, i] - lr * delta_h[j] * X[p, i]
                    w_ih[j, i] += v_ih[j, i]
            v_bh[j] = mom * v_bh[j] - lr * delta_h[j]
            b_h[j] += v_bh[j]


def sgd_epoch(net: Network, X, T, velocity, cfg: TrainConfig):
    """One pass of per-pattern updates in dataset order (updates ``net`` in place)."""
    _sgd_epoch(np.ascontiguousarray(X, dtype=float), np.ascontiguousarray(T, dtype=float),
               net.weights_ih, net.bias_h, net.weights_ho, net.bias_o,
               net.mask_ih, net.mask_ho, *velocity, cfg.learning_rate, cfg.momentum)


def _zero_velocity(net: Network):
    return [np.zeros_like(net.weights_ih), np.zeros_like(net.bias_h),
            np.zeros_like(net.weights_ho), np.zeros_like(net.bias_o)]


def mse(net: Network, X, T) -> float:
    return float(np.mean((forward_batch(net, X)[1] - T) ** 2))


def one_hot(y, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[np.asarray(y, dtype=np.int64)]


def _arrays(net: Network, data: Dataset):
    X, _ = input_matrix(data)
    if X.shape[1] != net.input_count:
        raise UsageError(f"network expects {net.input_count} inputs, data encodes to {X.shape[1]}")
    if data.n_classes != net.output_count:
        raise UsageError(f"network has {net.output_count} outputs for {data.n_classes} classes")
    return X, one_hot(data.y, data.n_classes)


def _add_hidden(net: Network, cfg: TrainConfig):
    rng = np.random.default_rng([cfg.seed, net.hidden_count])
    w_in = rng.uniform(-INIT_RANGE, INIT_RANGE, (1, net.input_count))
    b = rng.uniform(-INIT_RANGE, INIT_RANGE, 1)
    w_out = rng.uniform(-INIT_RANGE, INIT_RANGE, (net.output_count, 1))
    # inputs already cut off everywhere stay cut off for the new node
    alive = net.mask_ih.any(axis=0, keepdims=True)
    net.weights_ih = np.vstack([net.weights_ih, w_in])
    net.mask_ih = np.vstack([net.mask_ih, alive])
    net.bias_h = np.concatenate([net.bias_h, b])
    net.weights_ho = np.hstack([net.weights_ho, w_out])
    net.mask_ho = np.hstack([net.mask_ho, np.ones((net.output_count, 1), bool)])


def grow(net: Network, data: Dataset | None = None, cfg: TrainConfig = TrainConfig()) -> Network:
    """Copy of ``net`` with one more hidden node; existing weights untouched.

    At ``cfg.max_hidden`` nodes the network is returned unchanged and a
    :class:`RexWarning` is issued.
    """
    grown = net.copy()
    if net.hidden_count >= cfg.max_hidden:
        warnings.warn(f"hidden layer already has max_hidden={cfg.max_hidden} nodes",
                      RexWarning, stacklevel=2)
        return grown
    _add_hidden(grown, cfg)
    return grown


def _fit(net, X, T, cfg, epochs, allow_growth):
    velocity = _zero_velocity(net)
    history = []
    added = 0
    run = 0
    err = mse(net, X, T) if len(X) else 0.0
    for epoch in range(1, epochs + 1):
        sgd_epoch(net, X, T, velocity, cfg)
        run = epoch
        err = mse(net, X, T)
        if not np.isfinite(err):
            raise TrainingError("mean squared error is not finite", epoch)
        if err <= cfg.target_mse:
            break
        history.append(err)
        stalled = (len(history) > cfg.stall_window
                   and history[-cfg.stall_window - 1] - err < cfg.stall_tolerance)
        if allow_growth and stalled and net.hidden_count < cfg.max_hidden:
            _add_hidden(net, cfg)
            velocity = _zero_velocity(net)
            history = []
            added += 1
    return run, err, added


def accuracy(net: Network, data: Dataset) -> float:
    """Share of patterns whose largest output sits at the label (lowest index on ties)."""
    if len(data) == 0:
        warnings.warn("accuracy of an empty dataset is taken as 1.0", RexWarning, stacklevel=2)
        return 1.0
    X, _ = _arrays(net, data)
    return float(np.mean(predict(net, X) == data.y))


def removed_inputs(net: Network) -> list[int]:
    """Inputs whose every outgoing connection is masked."""
    return [int(i) for i in np.flatnonzero(~net.mask_ih.any(axis=0))]


def train(net: Network, data: Dataset, cfg: TrainConfig = TrainConfig()) -> TrainReport:
    """Train ``net`` in place, adding hidden nodes when the error stalls.

    Stops at ``cfg.target_mse`` or after ``cfg.max_epochs`` epochs.

    Raises
    ------
    TrainingError
        The error became NaN or infinite; carries the epoch index.
    """
    if len(data) == 0:
        raise UsageError("cannot train on an empty dataset")
    X, T = _arrays(net, data)
    epochs, err, added = _fit(net, X, T, cfg, cfg.max_epochs, allow_growth=True)
    return TrainReport(epochs_run=epochs, final_mse=err, hidden_nodes_added=added,
                       connections_pruned=int((~net.mask_ih).sum() + (~net.mask_ho).sum()),
                       inputs_removed=removed_inputs(net),
                       train_accuracy=float(np.mean(predict(net, X) == data.y)))


def prune(net: Network, data: Dataset, cfg: TrainConfig = TrainConfig()) -> Network:
    """Mask connections smallest-magnitude first while accuracy holds.

    Each trial masks one connection and retrains for ``max_epochs // 10``
    epochs. The change is kept if accuracy stays at least the starting
    accuracy minus ``cfg.prune_accuracy_slack``; otherwise it is undone and
    that connection is never tried again.
    """
    net = net.copy()
    X, T = _arrays(net, data)
    baseline = float(np.mean(predict(net, X) == data.y))
    floor = baseline - cfg.prune_accuracy_slack - 1e-12
    retrain = max(cfg.max_epochs // 10, 1)
    keep = set()
    while True:
        options = [(abs(net.weights_ih[j, i]), 0, j, i) for j, i in zip(*np.nonzero(net.mask_ih))]
        options += [(abs(net.weights_ho[k, j]), 1, k, j) for k, j in zip(*np.nonzero(net.mask_ho))]
        options = [o for o in options if o[1:] not in keep]
        if not options:
            return net
        _, layer, r, c = min(options)
        trial = net.copy()
        (trial.mask_ih if layer == 0 else trial.mask_ho)[r, c] = False
        _fit(trial, X, T, cfg, retrain, allow_growth=False)
        if np.mean(predict(trial, X) == data.y) >= floor:
            net = trial
        else:
            keep.add((layer, r, c))
