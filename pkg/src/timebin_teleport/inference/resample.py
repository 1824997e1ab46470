"""Monte-Carlo uncertainty by Poisson resampling of measured counts.

Each trial draws from its own child of one ``SeedSequence``, so results do not
depend on how trials are split across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from ..errors import ConfigurationError, NumericalError

MIN_TRIALS = 100
MAX_FAILURE_FRACTION = 0.10


class ResampleResult(NamedTuple):
    std: float
    mean: float
    n_ok: int
    n_failed: int
    values: np.ndarray


def _trial(estimator, counts, seed_seq):
    rng = np.random.default_rng(seed_seq)
    draw = rng.poisson(counts)
    try:
        v = float(estimator(draw))
    except (ArithmeticError, ValueError, RuntimeError):
        return None
    return v if np.isfinite(v) else None


def poisson_resample_detailed(estimator, counts, n_trials: int = 1000, seed: int = 0, workers: int = 1) -> ResampleResult:
    if n_trials < MIN_TRIALS:
        raise ConfigurationError(f"n_trials must be >= {MIN_TRIALS}, got {n_trials}")
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0) or not np.all(np.isfinite(counts)):
        raise ConfigurationError("counts must be finite and non-negative")
    children = np.random.SeedSequence(seed).spawn(n_trials)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(lambda s: _trial(estimator, counts, s), children))
    else:
        vals = [_trial(estimator, counts, s) for s in children]
    ok = np.array([v for v in vals if v is not None])
    failed = n_trials - ok.size
    if failed > MAX_FAILURE_FRACTION * n_trials:
        raise NumericalError(f"estimator failed on {failed} of {n_trials} resamples")
    return ResampleResult(float(np.std(ok, ddof=1)), float(np.mean(ok)), int(ok.size), int(failed), ok)


def poisson_resample(estimator, counts, n_trials: int = 1000, seed: int = 0, workers: int = 1) -> float:
    """Standard deviation of ``estimator`` over Poisson redraws of ``counts``."""
    return poisson_resample_detailed(estimator, counts, n_trials, seed, workers).std
