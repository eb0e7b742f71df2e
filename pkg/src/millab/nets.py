"""Minimal sigmoid networks with manual backprop and full-batch ADAM.

Three architectures cover everything the experiments need: a linear model, a
two-hidden-unit sigmoid MLP (both single-output, trained on instance
labels), and a shared-trunk multi-head MLP for the multi-label bag
objectives. Gradients are hand-derived and checked against finite
differences in the test suite.

Training follows a fixed protocol: for each learning rate in the config,
run full-batch ADAM for the full epoch budget from the same seeded
initialization, then keep the run with the lowest final training loss.
Runs that go non-finite are discarded with a diagnostic. Everything is
deterministic given (seed, config, dataset).

For the 2-d single-output architectures the per-epoch pass is delegated to
a compiled kernel (``millab._trainkern``) that computes the identical
clamped-gradient math; ``engine="numpy"`` forces the pure-numpy reference
path instead (the test suite asserts both agree).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .bags import TrainingView
from .errors import ShapeError, TrainingError, ValidationError
from .losses import (
    LossReport,
    NoiseRates,
    si_weights,
    uc_weights,
    weighted_bce,
)

try:
    from . import _trainkern
except ImportError:  # pragma: no cover - extension always built in normal installs
    _trainkern = None

#: Logit cap before exp(); sigmoid saturates in float64 far earlier, so this
#: only prevents overflow warnings, never changes a score.
LOGIT_CAP = 700.0

#: Weight initialization range (biases start at zero).
INIT_HALF_WIDTH = 0.5


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -LOGIT_CAP, LOGIT_CAP)))


@dataclass(frozen=True)
class LinearArch:
    in_dim: int


@dataclass(frozen=True)
class TwoLayerArch:
    in_dim: int
    hidden: int = 2


@dataclass(frozen=True)
class MultiHeadArch:
    """Shared sigmoid trunk with one sigmoid output unit per label."""

    in_dim: int
    hidden: int
    n_labels: int


Arch = Union[LinearArch, TwoLayerArch, MultiHeadArch]

_ARCH_TAGS = {LinearArch: "linear", TwoLayerArch: "two_layer", MultiHeadArch: "multi_head"}


def arch_tag(arch: Arch) -> str:
    return _ARCH_TAGS[type(arch)]


@dataclass(frozen=True)
class MLPParams:
    """Architecture plus its weight arrays and the seed that initialized them."""

    arch: Arch
    layers: tuple[np.ndarray, ...]
    seed: int

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.layers)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(a).ravel() for a in self.layers])


def _layer_shapes(arch: Arch) -> tuple[tuple[int, ...], ...]:
    if isinstance(arch, LinearArch):
        return ((arch.in_dim,), ())
    if isinstance(arch, TwoLayerArch):
        return ((arch.hidden, arch.in_dim), (arch.hidden,), (arch.hidden,), ())
    if isinstance(arch, MultiHeadArch):
        return (
            (arch.hidden, arch.in_dim),
            (arch.hidden,),
            (arch.n_labels, arch.hidden),
            (arch.n_labels,),
        )
    raise ValidationError(f"unknown architecture {arch!r}")


def params_from_vector(arch: Arch, vector: np.ndarray, seed: int) -> MLPParams:
    shapes = _layer_shapes(arch)
    layers, pos = [], 0
    for shape in shapes:
        size = int(np.prod(shape)) if shape else 1
        block = np.asarray(vector[pos : pos + size], dtype=np.float64)
        layers.append(block.reshape(shape))
        pos += size
    if pos != len(vector):
        raise ShapeError(f"vector length {len(vector)} != parameter count {pos}")
    return MLPParams(arch=arch, layers=tuple(layers), seed=seed)


def init_params(arch: Arch, seed: int) -> MLPParams:
    """Zero biases; weights uniform on [-0.5, 0.5] from a Philox stream."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    shapes = _layer_shapes(arch)
    layers = []
    for k, shape in enumerate(shapes):
        is_bias = k % 2 == 1
        if is_bias:
            layers.append(np.zeros(shape))
        else:
            layers.append(rng.uniform(-INIT_HALF_WIDTH, INIT_HALF_WIDTH, shape))
    return MLPParams(arch=arch, layers=tuple(layers), seed=seed)


def _check_features(arch: Arch, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != arch.in_dim:
        raise ShapeError(
            f"features must be (n, {arch.in_dim}), got {features.shape}"
        )
    return features


def forward(params: MLPParams, features: np.ndarray) -> np.ndarray:
    """Scores in (0, 1): shape (n,) for single-output archs, (n, L) for multi-head."""
    X = _check_features(params.arch, features)
    if isinstance(params.arch, LinearArch):
        w, b = params.layers
        return sigmoid(X @ w + b)
    if isinstance(params.arch, TwoLayerArch):
        W1, b1, w2, b2 = params.layers
        a1 = sigmoid(X @ W1.T + b1)
        return sigmoid(a1 @ w2 + b2)
    W1, b1, W2, b2 = params.layers
    a1 = sigmoid(X @ W1.T + b1)
    return sigmoid(a1 @ W2.T + b2)


def backward(
    params: MLPParams, features: np.ndarray, loss_grad: np.ndarray
) -> tuple[np.ndarray, ...]:
    """Chain-rule gradients of the loss with respect to each layer array.

    ``loss_grad`` is d(loss)/d(score) per instance (per label for
    multi-head), as produced by the loss functions.
    """
    X = _check_features(params.arch, features)
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if isinstance(params.arch, LinearArch):
        w, b = params.layers
        s = sigmoid(X @ w + b)
        if loss_grad.shape != s.shape:
            raise ShapeError("loss_grad shape mismatch")
        dz = loss_grad * s * (1.0 - s)
        return (X.T @ dz, dz.sum())
    if isinstance(params.arch, TwoLayerArch):
        W1, b1, w2, b2 = params.layers
        a1 = sigmoid(X @ W1.T + b1)
        s = sigmoid(a1 @ w2 + b2)
        if loss_grad.shape != s.shape:
            raise ShapeError("loss_grad shape mismatch")
        dz2 = loss_grad * s * (1.0 - s)
        dw2 = a1.T @ dz2
        db2 = dz2.sum()
        dz1 = np.outer(dz2, w2) * a1 * (1.0 - a1)
        return (dz1.T @ X, dz1.sum(axis=0), dw2, db2)
    W1, b1, W2, b2 = params.layers
    a1 = sigmoid(X @ W1.T + b1)
    s = sigmoid(a1 @ W2.T + b2)
    if loss_grad.shape != s.shape:
        raise ShapeError("loss_grad shape mismatch")
    dz2 = loss_grad * s * (1.0 - s)  # (n, L)
    dW2 = dz2.T @ a1
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ W2) * a1 * (1.0 - a1)
    return (dz1.T @ X, dz1.sum(axis=0), dW2, db2)


class Adam:
    """Reference ADAM on a flat parameter vector (bias-corrected moments)."""

    def __init__(
        self,
        n_params: int,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        """Update ``theta`` in place from ``grad``."""
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    """Protocol constants for a training grid."""

    epochs: int = 100_000
    learning_rates: tuple[float, ...] = (1e-4, 1e-5, 1e-6)
    full_batch: bool = True
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    trace_every: int = 0  # 0 = auto (about 200 trace points)

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if not self.learning_rates or any(lr <= 0 for lr in self.learning_rates):
            raise ValidationError("learning rates must be positive")
        if not self.full_batch:
            raise ValidationError("only full-batch training is supported")
        if self.trace_every < 0:
            raise ValidationError("trace_every must be >= 0")

    @property
    def effective_trace_every(self) -> int:
        return self.trace_every or max(1, self.epochs // 200)


@dataclass
class TrainedModel:
    """Winning run of the protocol: params, its loss, and a decimated trace."""

    params: MLPParams
    final_train_loss: float
    chosen_lr: float
    loss_trace: tuple[tuple[int, float], ...]
    diagnostics: tuple[str, ...] = ()


_KERNEL_LOSSES = {"si", "uc"}


def _single_run(
    arch: Arch,
    seed: int,
    config: TrainConfig,
    lr: float,
    grad_fn: Callable[[MLPParams], np.ndarray],
    loss_fn: Callable[[MLPParams], float],
) -> tuple[MLPParams, tuple[tuple[int, float], ...], bool]:
    """One ADAM run; returns (params, trace, ok). Pure numpy reference path."""
    params = init_params(arch, seed)
    theta = params.to_vector()
    adam = Adam(len(theta), lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    every = config.effective_trace_every
    current = params
    trace = [(0, loss_fn(current))]
    for t in range(1, config.epochs + 1):
        grad = grad_fn(current)
        adam.step(theta, grad)
        current = params_from_vector(arch, theta, seed)
        if t % every == 0 or t == config.epochs:
            value = loss_fn(current)
            trace.append((t, value))
            if not (math.isfinite(value) and np.all(np.isfinite(theta))):
                return current, tuple(trace), False
    return current, tuple(trace), True


def _kernel_run(
    arch: Arch,
    seed: int,
    config: TrainConfig,
    lr: float,
    X: np.ndarray,
    wlg: np.ndarray,
    wl1mg: np.ndarray,
    loss_fn: Callable[[MLPParams], float],
) -> tuple[MLPParams, tuple[tuple[int, float], ...], bool]:
    """Same run as :func:`_single_run`, epoch pass done by the compiled kernel."""
    kernel = (
        _trainkern.epoch_linear
        if isinstance(arch, LinearArch)
        else _trainkern.epoch_two_layer
    )
    params = init_params(arch, seed)
    theta = params.to_vector()
    grads = np.zeros_like(theta)
    adam = Adam(len(theta), lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    every = config.effective_trace_every
    current = params
    trace = [(0, loss_fn(current))]
    for t in range(1, config.epochs + 1):
        kernel(X, wlg, wl1mg, theta, grads)
        adam.step(theta, grads)
        if t % every == 0 or t == config.epochs:
            current = params_from_vector(arch, theta, seed)
            value = loss_fn(current)
            trace.append((t, value))
            if not (math.isfinite(value) and np.all(np.isfinite(theta))):
                return current, tuple(trace), False
    current = params_from_vector(arch, theta, seed)
    return current, tuple(trace), True


def _kernel_usable(arch: Arch, in_dim: int) -> bool:
    if _trainkern is None or in_dim != 2:
        return False
    if isinstance(arch, LinearArch):
        return True
    return isinstance(arch, TwoLayerArch) and arch.hidden == 2


def train(
    view: TrainingView,
    loss: str,
    arch: Arch,
    config: TrainConfig,
    seed: int,
    rates: NoiseRates | None = None,
    engine: str = "auto",
) -> TrainedModel:
    """Run the lr-selection protocol for one (loss, architecture, seed).

    ``view`` carries features and SI labels only; ``loss`` is ``"si"`` or
    ``"uc"`` (the latter requires ``rates``). Returns the run with the
    lowest final training loss. Raises :class:`TrainingError` if every run
    went non-finite.
    """
    if loss not in _KERNEL_LOSSES:
        raise ValidationError(f"loss must be one of {sorted(_KERNEL_LOSSES)}")
    X = np.ascontiguousarray(view.features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != arch.in_dim:
        raise ShapeError(f"features must be (n, {arch.in_dim}), got {X.shape}")
    if len(view.si_labels) != X.shape[0]:
        raise ShapeError("si_labels length must match features")
    if loss == "uc":
        if rates is None:
            raise ValidationError("uc loss requires NoiseRates")
        wlg, wl1mg = uc_weights(view.si_labels, rates)
    else:
        wlg, wl1mg = si_weights(view.si_labels)
    wlg = np.ascontiguousarray(wlg)
    wl1mg = np.ascontiguousarray(wl1mg)

    def loss_fn(params: MLPParams) -> float:
        return weighted_bce(forward(params, X), wlg, wl1mg).value

    def grad_fn(params: MLPParams) -> np.ndarray:
        report = weighted_bce(forward(params, X), wlg, wl1mg)
        return np.concatenate(
            [np.atleast_1d(g).ravel() for g in backward(params, X, report.grad)]
        )

    if engine not in ("auto", "numpy", "compiled"):
        raise ValidationError(f"unknown engine {engine!r}")
    use_kernel = _kernel_usable(arch, X.shape[1]) if engine == "auto" else engine == "compiled"
    if engine == "compiled" and not _kernel_usable(arch, X.shape[1]):
        raise ValidationError("compiled kernel unavailable for this architecture")

    best: TrainedModel | None = None
    diagnostics: list[str] = []
    for lr in config.learning_rates:
        if use_kernel:
            params, trace, ok = _kernel_run(
                arch, seed, config, lr, X, wlg, wl1mg, loss_fn
            )
        else:
            params, trace, ok = _single_run(arch, seed, config, lr, grad_fn, loss_fn)
        if not ok:
            diagnostics.append(f"lr={lr:g}: diverged to non-finite loss, discarded")
            continue
        final = trace[-1][1]
        if best is None or final < best.final_train_loss:
            best = TrainedModel(
                params=params,
                final_train_loss=final,
                chosen_lr=lr,
                loss_trace=trace,
            )
    if best is None:
        raise TrainingError(
            "all learning-rate runs diverged: " + "; ".join(diagnostics)
        )
    best.diagnostics = tuple(diagnostics)
    return best


def train_bag_objective(
    bag_features: np.ndarray,
    bag_labels: np.ndarray,
    objective: Callable[[np.ndarray, np.ndarray], LossReport],
    arch: MultiHeadArch,
    config: TrainConfig,
    seed: int,
) -> TrainedModel:
    """Same protocol as :func:`train` for bag-level costs on a multi-head net.

    ``bag_features`` is (bags, bag_size, dim); ``objective`` maps
    (scores (bags, bag_size, labels), bag_labels (bags, labels)) to a
    :class:`LossReport` (e.g. ``si_bag_cost`` or ``bag_cost_soft_nor``).
    """
    bag_features = np.asarray(bag_features, dtype=np.float64)
    if bag_features.ndim != 3 or bag_features.shape[2] != arch.in_dim:
        raise ShapeError(
            f"bag_features must be (bags, bag_size, {arch.in_dim}), "
            f"got {bag_features.shape}"
        )
    n_bags, bag_size, dim = bag_features.shape
    labels = np.asarray(bag_labels, dtype=np.float64)
    if labels.shape != (n_bags, arch.n_labels):
        raise ShapeError("bag_labels must be (bags, n_labels)")
    X = bag_features.reshape(n_bags * bag_size, dim)

    def loss_fn(params: MLPParams) -> float:
        scores = forward(params, X).reshape(n_bags, bag_size, arch.n_labels)
        return objective(scores, labels).value

    def grad_fn(params: MLPParams) -> np.ndarray:
        scores = forward(params, X).reshape(n_bags, bag_size, arch.n_labels)
        report = objective(scores, labels)
        flat_grad = report.grad.reshape(n_bags * bag_size, arch.n_labels)
        return np.concatenate(
            [np.atleast_1d(g).ravel() for g in backward(params, X, flat_grad)]
        )

    best: TrainedModel | None = None
    diagnostics: list[str] = []
    for lr in config.learning_rates:
        params, trace, ok = _single_run(arch, seed, config, lr, grad_fn, loss_fn)
        if not ok:
            diagnostics.append(f"lr={lr:g}: diverged to non-finite loss, discarded")
            continue
        final = trace[-1][1]
        if best is None or final < best.final_train_loss:
            best = TrainedModel(params, final, lr, trace)
    if best is None:
        raise TrainingError(
            "all learning-rate runs diverged: " + "; ".join(diagnostics)
        )
    best.diagnostics = tuple(diagnostics)
    return best


def checkpoint_dict(model: TrainedModel, config_digest: str | None = None) -> dict:
    arch = model.params.arch
    data = {
        "architecture": arch_tag(arch),
        "in_dim": arch.in_dim,
        "weights": [float(v) for v in model.params.to_vector()],
        "seed": model.params.seed,
        "chosen_lr": model.chosen_lr,
        "final_train_loss": model.final_train_loss,
        "config_digest": config_digest,
    }
    if isinstance(arch, TwoLayerArch):
        data["hidden"] = arch.hidden
    elif isinstance(arch, MultiHeadArch):
        data["hidden"] = arch.hidden
        data["n_labels"] = arch.n_labels
    return data


def save_checkpoint(
    model: TrainedModel, path: str | Path, config_digest: str | None = None
) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(model, config_digest), indent=2) + "\n")


def load_checkpoint(path: str | Path) -> TrainedModel:
    data = json.loads(Path(path).read_text())
    tag = data["architecture"]
    if tag == "linear":
        arch: Arch = LinearArch(in_dim=data["in_dim"])
    elif tag == "two_layer":
        arch = TwoLayerArch(in_dim=data["in_dim"], hidden=data["hidden"])
    elif tag == "multi_head":
        arch = MultiHeadArch(
            in_dim=data["in_dim"], hidden=data["hidden"], n_labels=data["n_labels"]
        )
    else:
        raise ValidationError(f"unknown architecture tag {tag!r}")
    params = params_from_vector(
        arch, np.asarray(data["weights"], dtype=np.float64), seed=data["seed"]
    )
    return TrainedModel(
        params=params,
        final_train_loss=data["final_train_loss"],
        chosen_lr=data["chosen_lr"],
        loss_trace=(),
        diagnostics=("loaded from checkpoint",),
    )
