"""Bayesian active learning for on-device stress detection.

A compact MC-dropout 1D-CNN, acquisition functions over its predictive
samples, and a budgeted oracle-query loop with incremental retraining.
"""

from .acquisition import (
    AcquisitionKind,
    bald_score,
    max_entropy_score,
    random_score,
    rank_pool,
    variation_ratio_score,
)
from .data import Dataset, SynthConfig, load_ndjson, save_ndjson, synth_generate, window_signal, zscore_normalize
from .errors import BalmError, BlobError, ConfigError, DataError, NumericError
from .inference import PredictiveSamples, mc_predict, mc_predict_pool, predictive_label, predictive_mean
from .loop import (
    ALConfig,
    ALState,
    Seeds,
    SweepReport,
    al_step,
    eta_sweep,
    evaluate,
    pretrain,
    run_active_learning,
    simulation_oracle,
    split_dataset,
)
from .network import (
    OFF,
    Architecture,
    DropoutMode,
    ModelParams,
    Off,
    Stochastic,
    forward,
    grad,
    init_params,
    load,
    save,
)
from .optimizer import OptimizerHyper, adam_step, fit
from .window import Window

__version__ = "0.1.0"
