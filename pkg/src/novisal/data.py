"""Deterministic dataset splitting and minibatch scheduling."""

import numpy as np

from .errors import DataError

__all__ = ["split_records", "minibatch_indices", "minibatches"]

DEFAULT_TRAIN_FRACTION = 0.8


def split_records(records, train_fraction=DEFAULT_TRAIN_FRACTION, seed=0):
    """Split manifest records into deterministic train/test subsets.

    The records are shuffled with a generator seeded by ``seed``; the first
    ``floor(train_fraction * n)`` shuffled records form the train set, the
    remainder the test set.  The two subsets partition the input.

    Returns
    -------
    (train, test) : tuple of list
    """
    records = list(records)
    if not records:
        raise DataError("cannot split an empty record list")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(records)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(n * train_fraction)
    train = [records[i] for i in perm[:n_train]]
    test = [records[i] for i in perm[n_train:]]
    return train, test


def minibatch_indices(n, batch_size, seed, epoch):
    """Index arrays for one epoch of shuffled minibatches.

    The shuffle is a pure function of ``(seed, epoch)``, so training loops
    are reproducible.  A short final batch is kept rather than dropped.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = np.random.default_rng([seed, epoch]).permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def minibatches(images, batch_size, seed, epoch=0):
    """Yield deterministic shuffled minibatches of a stacked image array."""
    arr = np.asarray(images)
    for idx in minibatch_indices(arr.shape[0], batch_size, seed, epoch):
        yield arr[idx]
