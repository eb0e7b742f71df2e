import numpy as np
import pytest
from dataclasses import replace

from millab import (
    MILConfig,
    PiecewiseUniformDensity,
    SynthSpec,
    ValidationError,
    VerticalSegment,
    densities,
    f_prime_from_f,
    mixing_optimum,
    mixing_tolerance,
    nonmixing_optimum,
    scalar_profile_argmax,
)


def grid_argmax_profile(a, b, step=1e-6):
    """Independent oracle: brute-force maximizer of a*log g + b*log(1-g)."""
    grid = np.arange(step, 1.0, step)
    return grid[np.argmax(a * np.log(grid) + b * np.log1p(-grid))]


def test_mixing_optimum_benchmark_value(paper_config):
    assert mixing_optimum(paper_config) == pytest.approx(99 / 2099, abs=1e-15)


def test_mixing_optimum_no_negatives_in_positive_bags():
    cfg = MILConfig(bag_size=5, positives_per_bag=5, imbalance=2.0, n_pos_bags=3)
    assert mixing_optimum(cfg) == 0.0


def test_mixing_optimum_close_to_inverse_imbalance(paper_config):
    # (M-l)P / ((M-l)P + MBP) ~ 1/(B+1) for l << M
    assert abs(mixing_optimum(paper_config) - 1 / 21) < 1e-3


def test_scalar_profile_argmax():
    assert scalar_profile_argmax(3.0, 3.0) == 0.5
    assert scalar_profile_argmax(9900.0, 200_000.0) == pytest.approx(99 / 2099)
    with pytest.raises(ValidationError):
        scalar_profile_argmax(0.0, 1.0)
    with pytest.raises(ValidationError):
        scalar_profile_argmax(1.0, -2.0)


def test_scalar_profile_argmax_against_grid_oracle(rng):
    for _ in range(10):
        a, b = rng.uniform(0.5, 1000.0, 2)
        assert abs(grid_argmax_profile(a, b, 1e-5) - scalar_profile_argmax(a, b)) < 2e-5


def test_nonmixing_optimum_benchmark_values(paper_spec, paper_config):
    mu_pbn, mu_nb = densities(paper_spec)
    right = nonmixing_optimum((1.0, 2.0), paper_config, mu_pbn, mu_nb)
    left = nonmixing_optimum((-1.0, 2.0), paper_config, mu_pbn, mu_nb)
    # 9900*0.16 / (9900*0.16 + 200000*0.10) and 9900*0.04 / (...)
    assert right == pytest.approx(1584 / 21584)
    assert left == pytest.approx(396 / 20396)
    assert right == pytest.approx(0.0734, abs=5e-5)
    assert left == pytest.approx(0.0194, abs=5e-5)


def test_nonmixing_reduces_to_mixing_at_half_skew(paper_config):
    spec = SynthSpec(config=paper_config, skew=0.5)
    mu_pbn, mu_nb = densities(spec)
    for pt in [(1.0, 0.0), (1.0, 4.0), (-1.0, 2.5)]:
        value = nonmixing_optimum(pt, paper_config, mu_pbn, mu_nb)
        assert value == pytest.approx(mixing_optimum(paper_config), abs=1e-15)


def test_nonmixing_optimum_edge_cases(paper_config):
    segs = (
        VerticalSegment(-1.0, 0.0, 5.0),
        VerticalSegment(1.0, 0.0, 5.0),
    )
    mu_p = PiecewiseUniformDensity(segs, (0.0, 1.0))
    mu_n = PiecewiseUniformDensity(segs, (1.0, 0.0))
    assert nonmixing_optimum((1.0, 1.0), paper_config, mu_p, mu_n) == 1.0
    assert nonmixing_optimum((-1.0, 1.0), paper_config, mu_p, mu_n) == 0.0
    with pytest.raises(ValidationError):
        nonmixing_optimum((0.0, 0.0), paper_config, mu_p, mu_n)


def test_mixing_tolerance_benchmark_passes(paper_spec, paper_config):
    mu_pbn, mu_nb = densities(paper_spec)
    verdicts = mixing_tolerance(paper_config, mu_pbn, mu_nb, threshold=0.5)
    assert [v.status for v in verdicts] == ["pass", "pass"]
    # density ratios 0.4 and 1.6, well under the ~B=20 margin
    ratios = [v.density_pos_bag_neg / v.density_neg_bag for v in verdicts]
    assert ratios == pytest.approx([0.4, 1.6])
    assert all(r <= paper_config.imbalance for r in ratios)


def test_mixing_tolerance_marginal_case():
    # balance the two sides exactly: optimum lands exactly on the threshold
    cfg = MILConfig(bag_size=2, positives_per_bag=1, imbalance=1.0, n_pos_bags=4)
    segs = (VerticalSegment(-1.0, 0.0, 5.0), VerticalSegment(1.0, 0.0, 5.0))
    mu_p = PiecewiseUniformDensity(segs, (0.0, 1.0))
    mu_n = PiecewiseUniformDensity(segs, (0.5, 0.5))
    # n_pbn * 0.2 == n_nb * 0.1 on the right line
    verdicts = mixing_tolerance(cfg, mu_p, mu_n, threshold=0.5)
    by_x = {v.segment.abscissa: v.status for v in verdicts}
    assert by_x[1.0] == "marginal"
    assert by_x[-1.0] == "pass"  # no positive-bag negatives there at all


def test_mixing_tolerance_complete_dependence_fails(paper_config):
    # a region seen only in positive bags can never be rejected
    segs = (VerticalSegment(-1.0, 0.0, 5.0), VerticalSegment(1.0, 0.0, 5.0))
    mu_p = PiecewiseUniformDensity(segs, (0.0, 1.0))
    mu_n = PiecewiseUniformDensity(segs, (1.0, 0.0))
    for threshold in (0.1, 0.5, 0.99):
        verdicts = mixing_tolerance(paper_config, mu_p, mu_n, threshold)
        by_x = {v.segment.abscissa: v.status for v in verdicts}
        assert by_x[1.0] == "fail"


def test_mixing_tolerance_threshold_validation(paper_spec, paper_config):
    mu_pbn, mu_nb = densities(paper_spec)
    with pytest.raises(ValidationError):
        mixing_tolerance(paper_config, mu_pbn, mu_nb, threshold=0.0)


def test_f_prime_fixed_points(paper_config):
    assert f_prime_from_f(1.0, paper_config) == 1.0
    assert f_prime_from_f(0.0, paper_config) == mixing_optimum(paper_config)
    with pytest.raises(ValidationError):
        f_prime_from_f(1.5, paper_config)


def test_f_prime_strictly_increasing(paper_config, rng):
    pairs = rng.uniform(0.0, 1.0, (100, 2))
    for f1, f2 in pairs:
        lo, hi = min(f1, f2), max(f1, f2)
        if lo < hi:
            assert f_prime_from_f(lo, paper_config) < f_prime_from_f(hi, paper_config)


def test_constant_class_minimizer_matches_mixing_optimum(paper_config):
    """Theorem-1 oracle: over classifiers constant on the negatives, the SI
    loss is minimized at the mixing optimum (scalar grid search)."""
    from millab import si_loss

    n_pbn, n_nb = paper_config.n_pos_bag_neg, paper_config.n_neg_bag
    labels = np.concatenate([np.ones(n_pbn, int), np.zeros(n_nb, int)])
    grid = np.arange(1e-4, 1.0, 1e-4)
    values = [si_loss(np.full(len(labels), g), labels).value for g in grid[::25]]
    best = grid[::25][int(np.argmin(values))]
    assert abs(best - mixing_optimum(paper_config)) < 25e-4 + 1e-6
