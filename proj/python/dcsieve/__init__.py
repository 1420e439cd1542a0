"""Sieve pseudo-likelihood estimation of a marginal treatment effect under dependent censoring."""

import json

from ._core import (
    Dataset,
    censoring_rate,
    cox_fit,
    load_csv,
    naive_alpha,
    simulate,
    spline_basis,
)
from . import _core

__all__ = [
    "Dataset",
    "censoring_rate",
    "cox_fit",
    "fit",
    "load_csv",
    "naive_alpha",
    "run_study",
    "simulate",
    "spline_basis",
]


def fit(data, censor_covs="x1,x2,v", m=3, kn=5, penalty=1e-3, panels=64, scheme="gauss-legendre", v_mode="auto"):
    """Fit the sieve estimator and its variance; returns the report as a dict."""
    return json.loads(_core.fit_json(data, censor_covs, m, kn, penalty, panels, scheme, v_mode))


def run_study(config, workers=0):
    """Run a simulation study from a config dict or JSON string; workers=0 reads DCSIEVE_WORKERS."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_core.study_json(text, workers))
