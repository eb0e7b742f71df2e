"""Training objectives: SI cross-entropy, soft-NOR bag cost, unbiased noisy-label cost.

All losses clamp scores to ``[CLAMP_EPS, 1 - CLAMP_EPS]`` before taking
logs, and gradients are evaluated at the clamped values (cross-entropy is
unbounded at the boundary). Losses are normalized as means: ``si_loss`` and
``uc_loss`` average over instances; the bag costs sum over labels (and, for
the SI variant, instances) and average as documented on each function. The
gradient in a :class:`LossReport` is the derivative of ``value`` with
respect to each raw score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bags import MILConfig
from .errors import ShapeError, ValidationError

#: Scores are clamped this far inside (0, 1) before any log.
CLAMP_EPS = 1e-7


@dataclass(frozen=True)
class NoiseRates:
    """Class-conditional label-flip probabilities.

    ``flip_pos``: probability that a true positive is observed as negative.
    ``flip_neg``: probability that a true negative is observed as positive.
    """

    flip_pos: float
    flip_neg: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.flip_pos < 1.0 and 0.0 <= self.flip_neg < 1.0):
            raise ValidationError("flip rates must lie in [0, 1)")
        if self.flip_pos + self.flip_neg >= 1.0:
            raise ValidationError(
                f"flip_pos + flip_neg must be < 1, got "
                f"{self.flip_pos + self.flip_neg}"
            )


def analytic_si_rates(config: MILConfig) -> NoiseRates:
    """Flip rates implied by the SI assignment itself.

    The SI labels never flip a true positive; a true negative is observed
    positive exactly when it sits in a positive bag, so the negative flip
    rate is the fraction of negatives living in positive bags.
    """
    n_neg = config.n_pos_bag_neg + config.n_neg_bag
    return NoiseRates(flip_pos=0.0, flip_neg=config.n_pos_bag_neg / n_neg)


@dataclass
class LossReport:
    """Scalar loss plus its exact gradient with respect to the scores."""

    value: float
    grad: np.ndarray


def _clamp(scores: np.ndarray) -> np.ndarray:
    return np.clip(scores, CLAMP_EPS, 1.0 - CLAMP_EPS)


def weighted_bce(
    scores: np.ndarray, w_log_g: np.ndarray, w_log_1mg: np.ndarray
) -> LossReport:
    """``-(w_log_g . ln g + w_log_1mg . ln(1-g))`` at clamped scores ``g``.

    Both SI and UC losses are instances of this form; the training engine
    consumes the same two weight vectors.
    """
    scores = np.asarray(scores, dtype=np.float64)
    g = _clamp(scores)
    value = float(-(w_log_g @ np.log(g) + w_log_1mg @ np.log1p(-g)))
    grad = -w_log_g / g + w_log_1mg / (1.0 - g)
    return LossReport(value=value, grad=grad)


def si_weights(si_labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance ``(w_log_g, w_log_1mg)`` for the mean SI cross-entropy."""
    y = np.asarray(si_labels, dtype=np.float64)
    n = len(y)
    return y / n, (1.0 - y) / n


def uc_weights(
    noisy_labels: np.ndarray, rates: NoiseRates
) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance ``(w_log_g, w_log_1mg)`` for the mean unbiased cost.

    The per-instance unbiased cost for observed label ``t`` is
    ``[(1 - flip(other)) * ce(g, t) - flip(t) * ce(g, not t)] / (1 - flip_pos - flip_neg)``,
    whose expectation over the flip distribution equals the clean
    cross-entropy. Collecting the log coefficients gives the weights below;
    at zero rates they reduce to the plain SI weights exactly.
    """
    y = np.asarray(noisy_labels, dtype=np.float64)
    n = len(y)
    denom = 1.0 - rates.flip_pos - rates.flip_neg
    w_log_g = ((1.0 - rates.flip_neg) * y - rates.flip_neg * (1.0 - y)) / denom
    w_log_1mg = ((1.0 - rates.flip_pos) * (1.0 - y) - rates.flip_pos * y) / denom
    return w_log_g / n, w_log_1mg / n


def _check_lengths(scores: np.ndarray, labels: np.ndarray) -> None:
    if np.shape(scores) != np.shape(labels):
        raise ShapeError(
            f"scores shape {np.shape(scores)} != labels shape {np.shape(labels)}"
        )


def si_loss(scores: np.ndarray, si_labels: np.ndarray) -> LossReport:
    """Mean binary cross-entropy of scores against the SI labels."""
    scores = np.asarray(scores, dtype=np.float64)
    _check_lengths(scores, si_labels)
    return weighted_bce(scores, *si_weights(si_labels))


def uc_loss(
    scores: np.ndarray, noisy_labels: np.ndarray, rates: NoiseRates
) -> LossReport:
    """Mean unbiased noisy-label cost of scores against observed labels."""
    scores = np.asarray(scores, dtype=np.float64)
    _check_lengths(scores, noisy_labels)
    return weighted_bce(scores, *uc_weights(noisy_labels, rates))


def soft_nor(instance_scores: np.ndarray) -> float:
    """Bag activation ``1 - prod(1 - f_i)``, computed in log space.

    Exact at the boundaries: all-zero scores give 0, any score of 1 gives 1.
    """
    f = np.asarray(instance_scores, dtype=np.float64)
    if f.size == 0:
        raise ValidationError("soft_nor of an empty bag is undefined")
    if np.any(f < 0.0) or np.any(f > 1.0):
        raise ValidationError("instance scores must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        log_q = np.sum(np.log1p(-f))
    return float(-np.expm1(log_q))


def _as_bag_tensor(
    scores: np.ndarray, bag_labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Normalize bag scores/labels to (bags, instances, labels) tensors."""
    scores = np.asarray(scores, dtype=np.float64)
    bag_labels = np.asarray(bag_labels, dtype=np.float64)
    in_shape = scores.shape
    if scores.ndim == 2:
        scores = scores[:, :, None]
    if scores.ndim != 3:
        raise ShapeError("bag scores must be (bags, instances[, labels])")
    if bag_labels.ndim == 1:
        bag_labels = bag_labels[:, None]
    if bag_labels.shape != (scores.shape[0], scores.shape[2]):
        raise ShapeError(
            f"bag labels shape {bag_labels.shape} incompatible with scores "
            f"{scores.shape}"
        )
    if scores.shape[1] == 0:
        raise ValidationError("bags must contain at least one instance")
    return scores, bag_labels, in_shape


def bag_cost_soft_nor(scores: np.ndarray, bag_labels: np.ndarray) -> LossReport:
    """Cross-entropy of the soft-NOR bag activations against bag labels.

    Summed over labels, averaged over bags. Instance scores are clamped
    before the products so the gradient through the product is finite.
    """
    scores, y, in_shape = _as_bag_tensor(scores, bag_labels)
    n_bags = scores.shape[0]
    f = _clamp(scores)
    log_q = np.log1p(-f)  # (B, M, L)
    log_prod = log_q.sum(axis=1)  # (B, L)
    o = -np.expm1(log_prod)
    g = _clamp(o)
    value = float(-(y * np.log(g) + (1.0 - y) * np.log1p(-g)).sum() / n_bags)
    dce_dg = (-y / g + (1.0 - y) / (1.0 - g)) / n_bags  # (B, L)
    # d o / d f_i = prod_{j != i} (1 - f_j)
    prod_except = np.exp(log_prod[:, None, :] - log_q)
    grad = (dce_dg[:, None, :] * prod_except).reshape(in_shape)
    return LossReport(value=value, grad=grad)


def si_bag_cost(scores: np.ndarray, bag_labels: np.ndarray) -> LossReport:
    """Per-instance cross-entropy against the bag label.

    Summed over labels, averaged over all instances of all bags; with a
    single label this equals ``si_loss`` on the unpacked instances.
    """
    scores, y, in_shape = _as_bag_tensor(scores, bag_labels)
    n_bags, bag_size, _ = scores.shape
    n_inst = n_bags * bag_size
    g = _clamp(scores)
    yb = np.broadcast_to(y[:, None, :], scores.shape)
    value = float(-(yb * np.log(g) + (1.0 - yb) * np.log1p(-g)).sum() / n_inst)
    grad = ((-yb / g + (1.0 - yb) / (1.0 - g)) / n_inst).reshape(in_shape)
    return LossReport(value=value, grad=grad)
