"""Strongly adaptive online metric learning.

Composite mirror-descent learners for time-varying Mahalanobis metrics run
in parallel on a dyadic set of intervals with scale-matched learning rates
and warm starts; a multiplicative-weight combiner fuses them into a single
estimate whose regret stays low on every subinterval at once. Includes the
synthetic drifting-clusters benchmark, fixed-rate and random-selection
baselines, an evaluation harness (kNN error, k-means NMI, regret and
envelope checks), and a CLI for running experiments.
"""

from .comid import ComidConfig, comid_step, prox_l1, prox_nuclear_psd, static_regret
from .combiner import (
    CombinerOutput,
    combine,
    ocelad_step,
    run_rice_ocelad,
    saol_select,
    spawn_weight,
    update_weights,
)
from .metric import (
    Constraint,
    InvalidInputError,
    LossParams,
    MetricState,
    NumericalError,
    mahalanobis_sq,
    margin_loss,
    margin_subgradient,
    regularizer_value,
)
from .rice import (
    DyadicInterval,
    LearnerSlot,
    RiceEnsemble,
    active_intervals,
    rice_advance,
    rice_step,
)
from .synthdata import (
    Dataset,
    ScenarioConfig,
    Segment,
    constraint_stream,
    generate_dataset,
    preset_scenario,
    rotation_init,
    rotation_step,
)

__version__ = "0.1.0"
