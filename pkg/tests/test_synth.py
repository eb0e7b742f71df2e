import numpy as np
import pytest
from dataclasses import replace
from scipy import stats

from millab import (
    MILConfig,
    Origin,
    PiecewiseUniformDensity,
    SynthSpec,
    ValidationError,
    VerticalSegment,
    densities,
    generate,
)


def line_mask(ds, origin, x):
    return ds.origin_mask(origin) & (ds.features[:, 0] == x)


def test_benchmark_counts_and_split(paper_spec):
    ds = generate(paper_spec)
    assert int(ds.origin_mask(Origin.POS_BAG_POS).sum()) == 100
    assert int(ds.origin_mask(Origin.POS_BAG_NEG).sum()) == 9900
    assert int(ds.origin_mask(Origin.NEG_BAG).sum()) == 200_000
    # 80% of the positive-bag negatives on the right line, exactly
    assert int(line_mask(ds, Origin.POS_BAG_NEG, 1.0).sum()) == 7920
    assert int(line_mask(ds, Origin.POS_BAG_NEG, -1.0).sum()) == 1980
    assert int(line_mask(ds, Origin.NEG_BAG, 1.0).sum()) == 100_000
    assert int(line_mask(ds, Origin.NEG_BAG, -1.0).sum()) == 100_000


def test_positive_line_geometry(small_spec):
    ds = generate(small_spec)
    pos = ds.features[ds.origin_mask(Origin.POS_BAG_POS)]
    assert np.all(pos[:, 1] == -0.5)
    assert np.all((pos[:, 0] >= -2.0) & (pos[:, 0] <= 2.0))
    negs = ds.features[ds.truth_labels == 0]
    assert set(np.unique(negs[:, 0])) == {-1.0, 1.0}
    assert np.all((negs[:, 1] >= 0.0) & (negs[:, 1] <= 5.0))


def test_skew_extremes(paper_config):
    half = generate(SynthSpec(config=paper_config, skew=0.5, seed=1, scale=0.02))
    n_pm = int(half.origin_mask(Origin.POS_BAG_NEG).sum())
    assert int(line_mask(half, Origin.POS_BAG_NEG, 1.0).sum()) == round(0.5 * n_pm)

    full = generate(SynthSpec(config=paper_config, skew=1.0, seed=1, scale=0.02))
    assert int(line_mask(full, Origin.POS_BAG_NEG, -1.0).sum()) == 0


def test_exact_counts_at_any_scale(paper_config):
    spec = SynthSpec(config=paper_config, skew=0.8, seed=3, scale=0.13)
    ds = generate(spec)
    cfg = spec.scaled_config
    assert cfg.n_pos_bags == 13
    assert len(ds) == cfg.n_instances
    assert int(line_mask(ds, Origin.POS_BAG_NEG, 1.0).sum()) == round(
        0.8 * cfg.n_pos_bag_neg
    )


def test_density_weights_and_values(paper_spec):
    mu_pbn, mu_nb = densities(paper_spec)
    assert mu_pbn.weights == (1 - 0.8, 0.8)
    assert mu_nb.weights == (0.5, 0.5)
    # weight / segment length: 0.8/5 and 0.5/5 on the right line
    assert mu_pbn.density_at((1.0, 2.5)) == pytest.approx(0.16)
    assert mu_nb.density_at((1.0, 2.5)) == pytest.approx(0.10)
    assert mu_pbn.density_at((-1.0, 2.5)) == pytest.approx(0.04)
    assert mu_pbn.density_at((0.0, 2.5)) == 0.0
    assert mu_pbn.density_at((1.0, 7.0)) == 0.0


def test_densities_equal_under_mixing(paper_config):
    spec = SynthSpec(config=paper_config, skew=0.5)
    mu_pbn, mu_nb = densities(spec)
    for pt in [(-1.0, 0.0), (-1.0, 4.9), (1.0, 2.0), (1.0, 5.0)]:
        assert mu_pbn.density_at(pt) == mu_nb.density_at(pt)


def test_density_integrates_to_one(paper_spec):
    mu_pbn, mu_nb = densities(paper_spec)
    assert mu_pbn.total_mass() == pytest.approx(1.0)
    assert mu_nb.total_mass() == pytest.approx(1.0)
    # numeric spot-check: midpoint rule along each segment
    for mu in (mu_pbn, mu_nb):
        total = 0.0
        for seg in mu.segments:
            ys = np.linspace(seg.y_min, seg.y_max, 2001)[:-1] + seg.length / 4000
            total += np.mean([mu.density_at((seg.abscissa, y)) for y in ys]) * seg.length
        assert total == pytest.approx(1.0, abs=1e-9)


def test_density_validation():
    seg = VerticalSegment(abscissa=1.0, y_min=0.0, y_max=5.0)
    with pytest.raises(ValidationError):
        PiecewiseUniformDensity((seg,), (0.5,))
    with pytest.raises(ValidationError):
        PiecewiseUniformDensity((seg, seg), (1.5, -0.5))
    with pytest.raises(ValidationError):
        VerticalSegment(abscissa=0.0, y_min=1.0, y_max=1.0)


def test_y_uniformity_chi_square(paper_config):
    # empirical y histograms on each line are uniform (alpha = 0.01)
    spec = SynthSpec(config=paper_config, skew=0.8, seed=11, scale=0.2)
    ds = generate(spec)
    for origin in (Origin.POS_BAG_NEG, Origin.NEG_BAG):
        for x in (-1.0, 1.0):
            y = ds.features[line_mask(ds, origin, x), 1]
            assert len(y) >= 396
            counts, _ = np.histogram(y, bins=10, range=(0.0, 5.0))
            _, pvalue = stats.chisquare(counts)
            assert pvalue > 0.01
    # and the big neg-bag partition with n >= 1e4
    y = ds.features[line_mask(ds, Origin.NEG_BAG, 1.0), 1]
    assert len(y) >= 10_000


def test_generation_deterministic(paper_config):
    spec = SynthSpec(config=paper_config, skew=0.8, seed=42, scale=0.03)
    a = generate(spec)
    b = generate(spec)
    np.testing.assert_array_equal(a.features, b.features)
    c = generate(replace(spec, seed=43))
    assert not np.array_equal(a.features, c.features)


def test_partition_streams_independent(paper_config):
    # widening the positive x interval must not move any vertical-line point
    spec1 = SynthSpec(config=paper_config, skew=0.8, seed=5, scale=0.03)
    spec2 = replace(spec1, x_range=(-3.0, 3.0))
    ds1, ds2 = generate(spec1), generate(spec2)
    neg = ds1.truth_labels == 0
    np.testing.assert_array_equal(ds1.features[neg], ds2.features[neg])

    # changing skew relabels lines but keeps the drawn y values
    ds3 = generate(replace(spec1, skew=0.3))
    pm1 = ds1.features[ds1.origin_mask(Origin.POS_BAG_NEG), 1]
    pm3 = ds3.features[ds3.origin_mask(Origin.POS_BAG_NEG), 1]
    np.testing.assert_array_equal(pm1, pm3)


def test_ground_truth_linearly_separable(small_spec):
    ds = generate(small_spec)
    y = ds.features[:, 1]
    predicted = (y < -0.25).astype(int)
    np.testing.assert_array_equal(predicted, ds.truth_labels)


def test_spec_validation(paper_config):
    with pytest.raises(ValidationError):
        SynthSpec(config=paper_config, skew=1.2)
    with pytest.raises(ValidationError):
        SynthSpec(config=paper_config, x_range=(2.0, -2.0))
    with pytest.raises(ValidationError):
        SynthSpec(config=paper_config, positive_y=1.0)  # inside y_range: not separable
    with pytest.raises(ValidationError):
        SynthSpec(config=paper_config, scale=0.0)


def test_spec_json_round_trip(tmp_path, paper_spec):
    path = tmp_path / "spec.json"
    paper_spec.save_json(path)
    loaded = SynthSpec.load_json(path)
    assert loaded == paper_spec
    materialized = paper_spec.to_json_dict()
    assert materialized["x_range"] == [-2.0, 2.0]
    assert materialized["positive_y"] == -0.5
    assert materialized["scale"] == 1.0
