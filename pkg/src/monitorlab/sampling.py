"""Monte-Carlo plumbing: per-sample streams, worker pools, error bars."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def map_samples(func: Callable, args: Sequence, workers: int = 1) -> list:
    """``[func(a) for a in args]``, optionally across processes.

    Results come back in argument order, so any reduction over them is
    independent of the worker count.
    """
    if workers <= 1 or len(args) <= 1:
        return [func(a) for a in args]
    chunk = max(1, len(args) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, args, chunksize=chunk))


def jackknife_stderr(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Delete-one jackknife standard error of the mean along ``axis``."""
    x = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = x.shape[0]
    if n < 2:
        return np.full(x.shape[1:], np.nan)
    loo = (x.sum(axis=0) - x) / (n - 1)
    return np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))


def mean_stderr(values, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(values, dtype=float)
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, x.std(axis=axis, ddof=1) / np.sqrt(n)
