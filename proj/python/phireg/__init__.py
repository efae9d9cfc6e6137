"""Minimum Cressie-Read divergence estimators and Wald-type tests for clustered
multinomial survey data.

>>> import phireg
>>> data = phireg.generate(H=4, nh=10, m=20, beta=[[0, -0.9, 0.1], [0.6, -1.2, 0.8]], seed=1)
>>> res = phireg.fit(data, lam=-0.5)
>>> res.converged
True
"""

import json as _json

from ._core import (
    Dataset,
    FitResult,
    NumericalError,
    __version__,
    approximate_power,
    divergence,
    estimating_function,
    fit,
    generate,
    influence,
    required_sample_size,
    wald_test,
)
from ._core import simulate as _simulate


def simulate(plan, threads=0):
    """Run a Monte Carlo plan (dict or JSON text); returns a list of cell dicts."""
    text = plan if isinstance(plan, str) else _json.dumps(plan)
    return _json.loads(_simulate(text, threads))


__all__ = [
    "Dataset",
    "FitResult",
    "NumericalError",
    "__version__",
    "approximate_power",
    "divergence",
    "estimating_function",
    "fit",
    "generate",
    "influence",
    "required_sample_size",
    "simulate",
    "wald_test",
]
