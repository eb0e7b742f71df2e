import numpy as np
import pytest

from millab import MILConfig, SynthSpec


@pytest.fixture(scope="session")
def paper_config() -> MILConfig:
    """The benchmark constants used throughout: M=100, l=1, B=20, P=100."""
    return MILConfig(bag_size=100, positives_per_bag=1, imbalance=20.0, n_pos_bags=100)


@pytest.fixture(scope="session")
def paper_spec(paper_config) -> SynthSpec:
    return SynthSpec(config=paper_config, skew=0.8, seed=0)


@pytest.fixture(scope="session")
def small_spec(paper_config) -> SynthSpec:
    """Desk-scale version of the benchmark geometry (same densities)."""
    return SynthSpec(config=paper_config, skew=0.8, seed=0, scale=0.05)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
