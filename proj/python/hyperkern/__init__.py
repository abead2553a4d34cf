"""Python bindings for the hyperkern C++ library.

Report-producing functions return plain dicts parsed from the library's JSON
output, so the structure matches the files written by the command-line tool.
"""

import json as _json

from ._hyperkern import (
    HyperkernError,
    LearnedKernel,
    Method,
    fit_extend,
    fit_krr,
    fit_svr,
    gram_matrix,
    heldout_pair_rmse,
    hyper_gram,
    hyper_kernel,
    ingest_dataset,
    load_model,
    loglog_slope,
    model_from_json,
)
from . import _hyperkern

__all__ = [
    "HyperkernError",
    "LearnedKernel",
    "Method",
    "fit_extend",
    "fit_krr",
    "fit_svr",
    "gram_matrix",
    "heldout_pair_rmse",
    "hyper_gram",
    "hyper_kernel",
    "ingest_dataset",
    "learning_rate_study",
    "load_model",
    "loglog_slope",
    "model_from_json",
    "run_experiment",
]


def run_experiment(X, labels, Y, method=Method.KRR, cv_folds=5, seed=0, sigma_h2=None, reg=None):
    """Split, cross-validate, fit and score. Returns (report dict, LearnedKernel)."""
    text, kernel = _hyperkern.run_experiment(X, labels, Y, method, cv_folds, seed, sigma_h2, reg)
    return _json.loads(text), kernel


def learning_rate_study(m_values, trials=10, noise=0.1, method=Method.KRR, target="rbf", seed=0, eval_pairs=256):
    """Median out-of-sample error per sample size and the log-log slope."""
    return _json.loads(
        _hyperkern.learning_rate_study(list(m_values), trials, noise, method, target, seed, eval_pairs)
    )
