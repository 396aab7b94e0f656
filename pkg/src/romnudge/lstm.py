"""Single-step LSTM regression: forward pass, hand-derived backprop, Adam training.

The network realizes a static map from a feature vector to a target vector
through one LSTM cell evaluation with zero initial hidden and cell state,
followed by a linear head.  Training, scaling, and checkpointing live here;
callers decide what the features and targets mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .rng import substream

__all__ = [
    "Scaler",
    "LstmNetwork",
    "TrainingSet",
    "TrainingConfig",
    "LstmGradients",
    "initialize_network",
    "lstm_forward",
    "lstm_backward",
    "train",
    "predict_correction",
    "save_network",
    "load_network",
    "write_loss_history",
]

CHECKPOINT_MAGIC = b"RNLSTM1"

# Observable tags a checkpoint may carry; loading with a different
# expectation is rejected so a net trained on one measured quantity is
# never silently applied to another.
KNOWN_OBSERVABLES = ("velocity", "velocity_squared")

_TAG_BYTES = 24

_PARAM_FIELDS = ("W_f", "W_i", "W_o", "W_c",
                 "b_f", "b_i", "b_o", "b_c",
                 "W_y", "b_y")

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class Scaler:
    """Per-component z-score transform with stored statistics."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        if self.mean.ndim != 1 or self.mean.shape != self.std.shape:
            raise ValueError(
                f"scaler statistics must be matching vectors, got "
                f"{self.mean.shape} and {self.std.shape}"
            )
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.std))):
            raise ValueError("scaler statistics must be finite")
        if np.any(self.std <= 0.0):
            raise ValueError("scaler std components must be positive")

    @classmethod
    def fit(cls, rows: np.ndarray) -> "Scaler":
        """Fit statistics column-wise; constant columns get unit std."""
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        return cls(mean, np.where(std < 1e-12, 1.0, std))

    def scale(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def unscale(self, y: np.ndarray) -> np.ndarray:
        return y * self.std + self.mean

    @property
    def n_components(self) -> int:
        return self.mean.shape[0]


def _identity_scaler(n: int) -> Scaler:
    return Scaler(np.zeros(n), np.ones(n))


@dataclass(frozen=True)
class LstmNetwork:
    """Weights, biases, and scalers of the one-cell regression network.

    Gate weight matrices act on the concatenation [x, h_prev] and therefore
    have shape hidden x (input + hidden).

    Attributes
    ----------
    input_dim, hidden_dim, output_dim : int
        Layer sizes.
    W_f, W_i, W_o, W_c : numpy.ndarray
        Forget, input, output, and candidate gate weights.
    b_f, b_i, b_o, b_c : numpy.ndarray
        Gate biases.
    W_y, b_y : numpy.ndarray
        Linear output head.
    feature_scaler, target_scaler : Scaler
        Statistics applied outside the cell by the prediction helpers.
    """

    input_dim: int
    hidden_dim: int
    output_dim: int
    W_f: np.ndarray
    W_i: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray
    W_y: np.ndarray
    b_y: np.ndarray
    feature_scaler: Scaler
    target_scaler: Scaler

    def __post_init__(self) -> None:
        gate_shape = (self.hidden_dim, self.input_dim + self.hidden_dim)
        for name in ("W_f", "W_i", "W_o", "W_c"):
            if getattr(self, name).shape != gate_shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, "
                                 f"expected {gate_shape}")
        for name in ("b_f", "b_i", "b_o", "b_c"):
            if getattr(self, name).shape != (self.hidden_dim,):
                raise ValueError(f"{name} has wrong shape")
        if self.W_y.shape != (self.output_dim, self.hidden_dim):
            raise ValueError(f"W_y has shape {self.W_y.shape}, expected "
                             f"{(self.output_dim, self.hidden_dim)}")
        if self.b_y.shape != (self.output_dim,):
            raise ValueError("b_y has wrong shape")
        for name in _PARAM_FIELDS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")
        if self.feature_scaler.n_components != self.input_dim:
            raise ValueError("feature scaler dimension mismatch")
        if self.target_scaler.n_components != self.output_dim:
            raise ValueError("target scaler dimension mismatch")


@dataclass(frozen=True)
class TrainingSet:
    """Paired feature and target rows."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("training arrays must be 2-D")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} input rows but "
                f"{self.targets.shape[0]} target rows"
            )
        if not (np.all(np.isfinite(self.inputs))
                and np.all(np.isfinite(self.targets))):
            raise ValueError("training data must be finite")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class TrainingConfig:
    """Optimizer and scheduling hyperparameters."""

    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 500
    val_fraction: float = 0.2
    patience: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0.0 or not np.isfinite(self.lr):
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie strictly between 0 and 1")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")


@dataclass(frozen=True)
class LstmCache:
    """Activations retained by a forward call for the matching backward."""

    x: np.ndarray
    v: np.ndarray
    f: np.ndarray
    i: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class LstmGradients:
    """Loss gradients, one array per trainable parameter."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray
    W_y: np.ndarray
    b_y: np.ndarray


def initialize_network(input_dim: int, hidden_dim: int, output_dim: int,
                       rng: np.random.Generator) -> LstmNetwork:
    """Draw fresh weights: uniform(-k, k), k = 1/sqrt(input + hidden).

    The forget-gate bias starts at 1.0, the other biases at zero, and the
    scalers at identity until training fits real statistics.
    """
    if min(input_dim, hidden_dim, output_dim) < 1:
        raise ValueError("all network dimensions must be at least 1")
    k = 1.0 / np.sqrt(input_dim + hidden_dim)
    gate_shape = (hidden_dim, input_dim + hidden_dim)
    return LstmNetwork(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        output_dim=output_dim,
        W_f=rng.uniform(-k, k, gate_shape),
        W_i=rng.uniform(-k, k, gate_shape),
        W_o=rng.uniform(-k, k, gate_shape),
        W_c=rng.uniform(-k, k, gate_shape),
        b_f=np.ones(hidden_dim),
        b_i=np.zeros(hidden_dim),
        b_o=np.zeros(hidden_dim),
        b_c=np.zeros(hidden_dim),
        W_y=rng.uniform(-k, k, (output_dim, hidden_dim)),
        b_y=np.zeros(output_dim),
        feature_scaler=_identity_scaler(input_dim),
        target_scaler=_identity_scaler(output_dim),
    )


def _params_of(net: LstmNetwork) -> dict[str, np.ndarray]:
    return {name: getattr(net, name) for name in _PARAM_FIELDS}


def _forward_batch(p: dict[str, np.ndarray], x_rows: np.ndarray):
    """Evaluate the cell on a batch of scaled feature rows.

    Returns the batch outputs and the batch-shaped activation cache.
    The initial hidden and cell states are zero, so the forget gate is
    computed but multiplies nothing.
    """
    hidden = p["b_f"].shape[0]
    v = np.hstack([x_rows, np.zeros((x_rows.shape[0], hidden))])
    f = expit(v @ p["W_f"].T + p["b_f"])
    i = expit(v @ p["W_i"].T + p["b_i"])
    o = expit(v @ p["W_o"].T + p["b_o"])
    g = np.tanh(v @ p["W_c"].T + p["b_c"])
    c = i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    y = h @ p["W_y"].T + p["b_y"]
    cache = {"v": v, "f": f, "i": i, "o": o, "g": g,
             "tanh_c": tanh_c, "h": h}
    return y, cache


def _backward_batch(p: dict[str, np.ndarray], cache: dict, dy: np.ndarray):
    """Gradients summed over the batch for upstream per-row gradients dy."""
    v, i, o, g = cache["v"], cache["i"], cache["o"], cache["g"]
    tanh_c, h = cache["tanh_c"], cache["h"]
    d_wy = dy.T @ h
    d_by = dy.sum(axis=0)
    dh = dy @ p["W_y"]
    do = dh * tanh_c
    dc = dh * o * (1.0 - tanh_c**2)
    di = dc * g
    dg = dc * i
    dzi = di * i * (1.0 - i)
    dzo = do * o * (1.0 - o)
    dzg = dg * (1.0 - g**2)
    # The forget gate only touches the zero initial cell state, so its
    # gradient vanishes identically.
    return {
        "W_f": np.zeros_like(p["W_f"]),
        "W_i": dzi.T @ v,
        "W_o": dzo.T @ v,
        "W_c": dzg.T @ v,
        "b_f": np.zeros_like(p["b_f"]),
        "b_i": dzi.sum(axis=0),
        "b_o": dzo.sum(axis=0),
        "b_c": dzg.sum(axis=0),
        "W_y": d_wy,
        "b_y": d_by,
    }


def lstm_forward(net: LstmNetwork, x: np.ndarray):
    """One-cell forward pass on an already feature-scaled vector.

    Returns
    -------
    y : numpy.ndarray
        Output of the linear head, length output_dim.
    cache : LstmCache
        Activations for :func:`lstm_backward`.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.input_dim},)")
    y_rows, c = _forward_batch(_params_of(net), x[None, :])
    y = y_rows[0]
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("non-finite network output")
    cell = c["i"][0] * c["g"][0]
    return y, LstmCache(
        x=x, v=c["v"][0], f=c["f"][0], i=c["i"][0], o=c["o"][0],
        g=c["g"][0], c=cell, tanh_c=c["tanh_c"][0], h=c["h"][0], y=y,
    )


def lstm_backward(net: LstmNetwork, cache: LstmCache,
                  dy: np.ndarray) -> LstmGradients:
    """Exact parameter gradients for upstream gradient dy at a cached point."""
    dy = np.asarray(dy, dtype=float)
    if dy.shape != (net.output_dim,):
        raise ValueError(f"upstream gradient has shape {dy.shape}, expected "
                         f"({net.output_dim},)")
    if cache.x.shape != (net.input_dim,) or cache.h.shape != (net.hidden_dim,):
        raise ValueError("cache does not match this network's dimensions")
    batch_cache = {key: getattr(cache, key)[None, :]
                   for key in ("v", "f", "i", "o", "g", "tanh_c", "h")}
    grads = _backward_batch(_params_of(net), batch_cache, dy[None, :])
    return LstmGradients(**grads)


def _mse(p: dict[str, np.ndarray], x_rows: np.ndarray,
         y_rows: np.ndarray) -> float:
    pred, _ = _forward_batch(p, x_rows)
    return float(np.mean((pred - y_rows) ** 2))


def train(net: LstmNetwork, data: TrainingSet,
          hyper: TrainingConfig) -> tuple[LstmNetwork, list]:
    """Fit the network with Adam, early-stopping on a held-out split.

    Features and targets are z-scored with statistics of the training
    split; the fitted scalers are stored on the returned network, which
    carries the weights of the best validation epoch.

    Returns
    -------
    trained : LstmNetwork
    history : list of (epoch, train_mse, val_mse)
        Epoch 0 is the untrained network; losses are in scaled units.

    Raises
    ------
    FloatingPointError
        If a loss becomes non-finite (diverged optimization).
    """
    n = data.n_samples
    if n < 10:
        raise ValueError(f"need at least 10 samples to train, got {n}")
    if data.inputs.shape[1] != net.input_dim:
        raise ValueError("training features do not match network input_dim")
    if data.targets.shape[1] != net.output_dim:
        raise ValueError("training targets do not match network output_dim")

    rng = substream(hyper.seed, "lstm-train")
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * hyper.val_fraction)))
    if n - n_val < 1:
        raise ValueError("validation fraction leaves no training samples")
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    feature_scaler = Scaler.fit(data.inputs[train_idx])
    target_scaler = Scaler.fit(data.targets[train_idx])
    x_train = feature_scaler.scale(data.inputs[train_idx])
    y_train = target_scaler.scale(data.targets[train_idx])
    x_val = feature_scaler.scale(data.inputs[val_idx])
    y_val = target_scaler.scale(data.targets[val_idx])

    params = {name: arr.copy() for name, arr in _params_of(net).items()}
    adam_m = {name: np.zeros_like(arr) for name, arr in params.items()}
    adam_v = {name: np.zeros_like(arr) for name, arr in params.items()}
    step = 0

    history = [(0, _mse(params, x_train, y_train), _mse(params, x_val, y_val))]
    best_val = history[0][2]
    best_params = {name: arr.copy() for name, arr in params.items()}
    stale_epochs = 0

    n_train = train_idx.size
    for epoch in range(1, hyper.max_epochs + 1):
        order = rng.permutation(n_train)
        for start in range(0, n_train, hyper.batch_size):
            rows = order[start:start + hyper.batch_size]
            pred, cache = _forward_batch(params, x_train[rows])
            dy = (pred - y_train[rows]) / rows.size
            grads = _backward_batch(params, cache, dy)
            step += 1
            scale1 = 1.0 - _ADAM_BETA1**step
            scale2 = 1.0 - _ADAM_BETA2**step
            for name in _PARAM_FIELDS:
                g = grads[name]
                adam_m[name] = _ADAM_BETA1 * adam_m[name] + (1 - _ADAM_BETA1) * g
                adam_v[name] = _ADAM_BETA2 * adam_v[name] + (1 - _ADAM_BETA2) * g**2
                params[name] = params[name] - hyper.lr * (
                    adam_m[name] / scale1
                ) / (np.sqrt(adam_v[name] / scale2) + _ADAM_EPS)

        train_mse = _mse(params, x_train, y_train)
        val_mse = _mse(params, x_val, y_val)
        if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
            raise FloatingPointError(
                f"training diverged at epoch {epoch}: "
                f"train_mse={train_mse}, val_mse={val_mse}"
            )
        history.append((epoch, train_mse, val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_params = {name: arr.copy() for name, arr in params.items()}
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= hyper.patience:
                break

    trained = LstmNetwork(
        input_dim=net.input_dim,
        hidden_dim=net.hidden_dim,
        output_dim=net.output_dim,
        **best_params,
        feature_scaler=feature_scaler,
        target_scaler=target_scaler,
    )
    return trained, history


def predict_correction(net: LstmNetwork, a_b, z: np.ndarray) -> np.ndarray:
    """Learned correction for background coefficients and raw measurements.

    Concatenates [a_b.a, z], applies the stored feature scaling, runs the
    cell, and returns the output in original target units.
    """
    features = np.concatenate([np.asarray(a_b.a, dtype=float),
                               np.asarray(z, dtype=float)])
    if features.shape != (net.input_dim,):
        raise ValueError(
            f"got {features.shape[0]} features, network expects {net.input_dim}"
        )
    y, _ = lstm_forward(net, net.feature_scaler.scale(features))
    return net.target_scaler.unscale(y)


def save_network(net: LstmNetwork, path: str | Path,
                 quantity: str = "velocity") -> None:
    """Write a checkpoint tagged with the observable the net was trained on."""
    if quantity not in KNOWN_OBSERVABLES:
        raise ValueError(f"unknown observable {quantity!r}")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        np.array([net.input_dim, net.hidden_dim, net.output_dim],
                 dtype="<i8").tofile(f)
        net.feature_scaler.mean.astype("<f8").tofile(f)
        net.feature_scaler.std.astype("<f8").tofile(f)
        net.target_scaler.mean.astype("<f8").tofile(f)
        net.target_scaler.std.astype("<f8").tofile(f)
        for name in _PARAM_FIELDS:
            getattr(net, name).astype("<f8").tofile(f)
        f.write(quantity.encode("ascii").ljust(_TAG_BYTES, b"\x00"))


def load_network(path: str | Path,
                 expected_quantity: str | None = None):
    """Read a checkpoint; returns (network, observable tag).

    Passing expected_quantity turns a tag mismatch into an error, the gate
    that stops a velocity-trained net from assimilating squared data.
    """
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        dims = np.fromfile(f, dtype="<i8", count=3)
        if dims.size != 3:
            raise ValueError(f"{path}: truncated checkpoint")
        input_dim, hidden_dim, output_dim = (int(v) for v in dims)
        gate_shape = (hidden_dim, input_dim + hidden_dim)
        shapes = {
            "W_f": gate_shape, "W_i": gate_shape,
            "W_o": gate_shape, "W_c": gate_shape,
            "b_f": (hidden_dim,), "b_i": (hidden_dim,),
            "b_o": (hidden_dim,), "b_c": (hidden_dim,),
            "W_y": (output_dim, hidden_dim), "b_y": (output_dim,),
        }

        def block(count):
            arr = np.fromfile(f, dtype="<f8", count=count)
            if arr.size != count:
                raise ValueError(f"{path}: truncated checkpoint")
            return arr

        feature_scaler = Scaler(block(input_dim), block(input_dim))
        target_scaler = Scaler(block(output_dim), block(output_dim))
        arrays = {name: block(int(np.prod(shape))).reshape(shape)
                  for name, shape in shapes.items()}
        tag_raw = f.read(_TAG_BYTES)
    if len(tag_raw) != _TAG_BYTES:
        raise ValueError(f"{path}: truncated checkpoint")
    quantity = tag_raw.rstrip(b"\x00").decode("ascii")
    if quantity not in KNOWN_OBSERVABLES:
        raise ValueError(f"{path}: unknown observable tag {quantity!r}")
    if expected_quantity is not None and quantity != expected_quantity:
        raise ValueError(
            f"{path}: checkpoint trained on {quantity!r}, "
            f"required {expected_quantity!r}"
        )
    net = LstmNetwork(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        output_dim=output_dim,
        **arrays,
        feature_scaler=feature_scaler,
        target_scaler=target_scaler,
    )
    return net, quantity


def write_loss_history(history: list, path: str | Path) -> None:
    """Emit the per-epoch loss table as CSV."""
    lines = ["epoch,train_mse,val_mse"]
    for epoch, train_mse, val_mse in history:
        lines.append(f"{epoch},{train_mse!r},{val_mse!r}")
    Path(path).write_text("\n".join(lines) + "\n")
