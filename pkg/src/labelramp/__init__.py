"""labelramp: curriculum training by staged label introduction.

Classes are revealed to the classifier a few at a time; samples of
still-hidden classes share a single pseudo-label and act as negatives, with
mini-batches balanced between the revealed and hidden portions. Once every
label is in play, samples the previous epoch's model misclassified train
against smoothed targets. The package ships the comparison baselines,
representation evaluation (linear probe, k-means + assignment matching),
and a config-driven experiment harness.
"""

from .baselines import dbs_batch, ls_table, ls_target, ra_balance, run_variant
from .compensation import ACConfig, ac_epoch, ac_table, ac_target, mark_misclassified
from .config import (
    AC_VARIANTS,
    IL_VARIANTS,
    LS_VARIANTS,
    VARIANTS,
    WINDOW_VARIANTS,
    ExperimentConfig,
    load_config,
)
from .curriculum import (
    Partition,
    Schedule,
    balance_batch,
    effective_label,
    effective_labels,
    init_partition,
    interval_count,
    reveal,
    run_il,
    window_epochs,
)
from .data import (
    BatchPlan,
    Dataset,
    load_cifar10,
    load_cifar100,
    load_dataset,
    make_blobs,
    sample_batch,
    save_dataset,
    shuffled_batches,
    stream_rng,
)
from .errors import ConfigError, DataError, NumericError, ShapeError
from .evaluation import (
    accuracy,
    cluster_accuracy,
    extract_features,
    hungarian,
    kmeans,
    linear_probe,
    save_features,
)
from .harness import build_datasets, run_experiment, sweep
from .nncore import (
    Layer,
    Model,
    ModelSnapshot,
    OptimHyper,
    backward,
    forward,
    init_model,
    lr_at_epoch,
    one_hot,
    one_hot_rows,
    sgd_step,
    snapshot,
    soft_ce,
    train_batches,
)
from .reporting import AggregateReport, EpochRow, TrialReport, aggregate

__version__ = "0.1.0"
