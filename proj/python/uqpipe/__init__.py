"""Python access to the uqpipe core: designs, HSIC screening, joint GP metamodels and the pipeline."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    JointModel,
    NumericalError,
    UqpipeError,
    bench_evaluate,
    bench_names,
    bench_sample,
    centered_l2_discrepancy,
    empirical_quantile,
    gamma_test,
    hsic,
    lhs,
    optimize_lhs,
    permutation_test,
    r2_hsic,
)

__version__ = _core.__version__


def bench_space(name):
    return _json.loads(_core.bench_space(name))


def screen(x, y, names=(), alpha=0.1, method="permutation", permutations=1000, seed=1):
    return _json.loads(_core.screen(x, y, list(names), alpha, method, permutations, seed))


def build_joint(x, y, pii, names=(), restarts=5, seed=1):
    """Returns (JointModel, trace dict). `pii` is the ranked list of explanatory column indices."""
    model, trace = _core.build_joint(x, y, list(pii), list(names), restarts, seed)
    return model, _json.loads(trace)


def run_pipeline(config, out_dir, stages=(), seed=None):
    """Runs the pipeline from a config dict and returns the report dict."""
    return _json.loads(_core.run_pipeline(_json.dumps(config), str(out_dir), list(stages), seed))


__all__ = [
    "ConfigError",
    "DataError",
    "JointModel",
    "NumericalError",
    "UqpipeError",
    "bench_evaluate",
    "bench_names",
    "bench_sample",
    "bench_space",
    "build_joint",
    "centered_l2_discrepancy",
    "empirical_quantile",
    "gamma_test",
    "hsic",
    "lhs",
    "optimize_lhs",
    "permutation_test",
    "r2_hsic",
    "run_pipeline",
    "screen",
]
