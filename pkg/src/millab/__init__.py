"""Single-instance learning on unbalanced multi-instance data.

Data model and synthetic benchmark, the SI / soft-NOR / unbiased-cost
objectives with exact gradients, closed-form optima of the SI objective,
manual-backprop sigmoid networks with full-batch ADAM, ranking metrics,
and experiment drivers behind the ``millab`` CLI.
"""

__version__ = "0.1.0"

from .bags import (
    Bag,
    Instance,
    MILConfig,
    Origin,
    TrainingView,
    UnpackedDataset,
    balance,
    unpack,
)
from .errors import (
    ConsistencyError,
    MillabError,
    ShapeError,
    TrainingError,
    UndefinedMetricError,
    ValidationError,
)
from .losses import (
    CLAMP_EPS,
    LossReport,
    NoiseRates,
    analytic_si_rates,
    bag_cost_soft_nor,
    si_bag_cost,
    si_loss,
    soft_nor,
    uc_loss,
)
from .metrics import (
    MAPReport,
    PRCurve,
    average_precision,
    bag_max_score,
    map_over_labels,
)
from .nets import (
    Adam,
    LinearArch,
    MLPParams,
    MultiHeadArch,
    TrainConfig,
    TrainedModel,
    TwoLayerArch,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
    train_bag_objective,
)
from .synth import (
    PiecewiseUniformDensity,
    SynthSpec,
    VerticalSegment,
    densities,
    generate,
)
from .theory import (
    SegmentVerdict,
    f_prime_from_f,
    mixing_optimum,
    mixing_tolerance,
    nonmixing_optimum,
    scalar_profile_argmax,
)
