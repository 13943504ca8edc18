"""Shared fixtures and fixture builders for the test suite."""

import os

# Cap BLAS threading before numpy loads: the matrices in this suite are
# small enough that thread sync costs dominate any parallel gain.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from gaitbac.ingest import EmaTimeline, GaitRecording, SubjectProfile
from gaitbac.mlp import Dataset, MlpModel, init_model


def make_recording(n=3000, rate=100.0, subject="s01", date="2024-01-05",
                   hour=21, seed=0, lin_acc=None, attitude=None):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    if lin_acc is None:
        lin_acc = rng.normal(0.0, 0.5, size=(n, 3))
    if attitude is None:
        attitude = rng.normal(0.0, 0.2, size=(n, 3))
    return GaitRecording(subject_id=subject, session_date=date, hour_slot=hour,
                         sample_rate_hz=rate, t=t, lin_acc=lin_acc, attitude=attitude)


def make_generator_dataset(n_hidden=8, n=500, seed=2024, noise_sd=0.0,
                           scale_hidden=3.0, scale_output=2.0, n_in=24):
    """Dataset produced by a known network, optionally with label noise.

    Returns (dataset, generator_model). Generator weights are scaled up
    from the fresh-init range so the target function is meaningfully
    nonlinear but still reliably fittable.
    """
    gen = np.random.default_rng(seed)
    target = init_model(n_in, n_hidden, gen)
    target.hidden_weights *= scale_hidden
    target.hidden_bias *= scale_hidden
    target.output_weights *= scale_output
    X = gen.uniform(-1.0, 1.0, size=(n, n_in))
    y = target.predict(X)
    if noise_sd > 0:
        y = y + gen.normal(0.0, noise_sd, size=n)
    return Dataset(X, y), target


@pytest.fixture
def profile_male():
    return SubjectProfile("male01", 7.5, 180.0)


@pytest.fixture
def profile_female():
    return SubjectProfile("female01", 9.0, 120.0)


def make_timeline(drinks: dict, subject="s01", date="2024-01-05"):
    return EmaTimeline(subject, date, dict(drinks))
