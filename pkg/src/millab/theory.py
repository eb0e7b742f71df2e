"""Closed-form optima of the SI objective and the imbalance-tolerance margin.

In the large-sample limit the SI cross-entropy is minimized by a classifier
that is 1 on the true positives and, on the negative support, equals the
density-weighted ratio

    n_pos_bag_neg * mu_pbn(x) / (n_pos_bag_neg * mu_pbn(x) + n_neg_bag * mu_nb(x)),

which collapses to the constant ``n_pos_bag_neg / (n_pos_bag_neg + n_neg_bag)``
(about ``1 / (imbalance + 1)``) when the two negative populations share one
distribution. Thresholding above that value recovers the ground truth, and
the threshold keeps working as long as the positive-bag negatives are no
more than about ``imbalance`` times denser than the negative-bag negatives
at any point. The functions here evaluate those quantities exactly for the
piecewise-uniform synthetic densities.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bags import MILConfig
from .errors import ValidationError
from .synth import PiecewiseUniformDensity, VerticalSegment

#: Two optima closer than this to a threshold count as the boundary case.
MARGINAL_TOL = 1e-12


def mixing_optimum(config: MILConfig) -> float:
    """Constant optimal score on all negatives when the two negative
    populations are identically distributed."""
    n_pbn = config.n_pos_bag_neg
    return n_pbn / (n_pbn + config.n_neg_bag)


def scalar_profile_argmax(a: float, b: float) -> float:
    """Unique maximizer of ``a*log(g) + b*log(1-g)`` on (0, 1)."""
    if a <= 0 or b <= 0:
        raise ValidationError(f"need positive coefficients, got a={a}, b={b}")
    return a / (a + b)


def nonmixing_optimum(
    point,
    config: MILConfig,
    mu_pos_bag_neg: PiecewiseUniformDensity,
    mu_neg_bag: PiecewiseUniformDensity,
) -> float:
    """Optimal SI score at a negative-support point under distinct densities."""
    dp = mu_pos_bag_neg.density_at(point)
    dn = mu_neg_bag.density_at(point)
    if dp == 0.0 and dn == 0.0:
        raise ValidationError(
            f"point {tuple(point)} lies outside the support of both densities"
        )
    if dn == 0.0:
        return 1.0
    if dp == 0.0:
        return 0.0
    wp = config.n_pos_bag_neg * dp
    wn = config.n_neg_bag * dn
    return wp / (wp + wn)


def f_prime_from_f(f_value: float, config: MILConfig) -> float:
    """Map a ground-truth score to the corresponding SI-optimal score.

    Affine and strictly increasing, so it preserves score order (hence any
    rank-based metric); 1 is a fixed point and 0 maps to the mixing optimum.
    """
    if not 0.0 <= f_value <= 1.0:
        raise ValidationError(f"f_value must be in [0, 1], got {f_value}")
    return f_value + (1.0 - f_value) * mixing_optimum(config)


@dataclass(frozen=True)
class SegmentVerdict:
    """Threshold check for one support segment of the negative densities."""

    segment: VerticalSegment
    optimum: float
    density_pos_bag_neg: float
    density_neg_bag: float
    status: str  # "pass" | "marginal" | "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _support_segments(
    mu_pos_bag_neg: PiecewiseUniformDensity, mu_neg_bag: PiecewiseUniformDensity
) -> list[VerticalSegment]:
    segments = list(mu_neg_bag.segments)
    for seg in mu_pos_bag_neg.segments:
        if seg not in segments:
            segments.append(seg)
    return segments


def mixing_tolerance(
    config: MILConfig,
    mu_pos_bag_neg: PiecewiseUniformDensity,
    mu_neg_bag: PiecewiseUniformDensity,
    threshold: float,
) -> list[SegmentVerdict]:
    """Per-segment check that negatives fall below the decision threshold.

    A segment passes when the non-mixing optimum there is strictly below the
    threshold (its negatives would be rejected), is marginal exactly at the
    threshold, and fails above it. At threshold 1/2 this is the statement
    that the positive-bag negatives may be up to ``n_neg_bag /
    n_pos_bag_neg`` (about ``imbalance``) times denser than the
    negative-bag negatives.
    """
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must be in (0, 1), got {threshold}")
    verdicts = []
    for seg in _support_segments(mu_pos_bag_neg, mu_neg_bag):
        midpoint = (seg.abscissa, 0.5 * (seg.y_min + seg.y_max))
        dp = mu_pos_bag_neg.density_at(midpoint)
        dn = mu_neg_bag.density_at(midpoint)
        value = nonmixing_optimum(midpoint, config, mu_pos_bag_neg, mu_neg_bag)
        if abs(value - threshold) <= MARGINAL_TOL:
            status = "marginal"
        elif value < threshold:
            status = "pass"
        else:
            status = "fail"
        verdicts.append(
            SegmentVerdict(
                segment=seg,
                optimum=value,
                density_pos_bag_neg=dp,
                density_neg_bag=dn,
                status=status,
            )
        )
    return verdicts
