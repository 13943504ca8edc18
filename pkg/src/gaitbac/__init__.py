"""Blood alcohol estimation from smartphone gait recordings.

Pipeline pieces: ingest sensor logs and drink reports, label recordings
with estimated blood alcohol content, extract sliding-window gait
features, train a feedforward regression network (conjugate gradient,
Levenberg-Marquardt, or Bayesian-regularized LM) plus linear-regression
and SVR baselines, and report the comparison.
"""

from .ebac import EbacParams, EbacTrace, ebac_at_hour, ebac_instant, ebac_timeline
from .errors import GaitbacError
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    WindowConfig,
    extract,
    window_corr,
    window_energy,
    window_mean,
    window_std,
)
from .ingest import (
    EmaReport,
    EmaTimeline,
    GaitRecording,
    LabeledRecording,
    SubjectProfile,
    align,
    parse_ema,
    parse_sensor_log,
)
from .mlp import Dataset, MinMaxScale, MlpModel, fit_scaling, forward, init_model, jacobian, sigmoid
from .baselines import LinRegModel, SvrModel, SvrParams, fit_linreg, fit_svr
from .evaluation import ErrorHistogram, MetricsReport, evaluate, histogram, metrics
from .modelio import load_model, save_model
from .synth import BacEffect, SynthConfig, gen_recording, gen_timeline, generate_dataset
from .train import (
    BrState,
    LmConfig,
    TrainReport,
    split,
    sweep_hidden,
    train_br,
    train_cg,
    train_lm,
)

__version__ = "0.1.0"
