"""Novelty thresholding on the empirical CDF of calibration scores."""

import math
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import io as nvio

__all__ = ["NoveltyVerdict", "empirical_cutoff", "QuantileNoveltyDetector"]

ORIENTATIONS = ("high", "low")


class NoveltyVerdict(NamedTuple):
    """Classification of one score against a fitted threshold."""

    score: float
    novel: bool
    cutoff: float
    orientation: str


def _percentile_rank(percentile, n):
    # ceil(p * n) as a 1-indexed rank; the small slack absorbs float
    # representation error when p * n lands exactly on an integer.
    return max(1, math.ceil(percentile * n - 1e-9))


def empirical_cutoff(values, percentile=0.99, orientation="high"):
    """Order-statistic cutoff over calibration scores.

    For ``orientation="high"`` (e.g. MSE losses, large means novel) the
    cutoff is the ascending order statistic at rank ``ceil(p * n)``; for
    ``"low"`` (e.g. SSIM similarities, small means novel) it is the rank
    ``n + 1 - ceil(p * n)`` statistic, so both orientations flag the same
    fraction of a continuous score distribution.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    if not 0.0 < percentile < 1.0:
        raise ValueError(f"percentile must be in (0, 1), got {percentile}")
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot calibrate a threshold on an empty score set")
    if not np.all(np.isfinite(v)):
        raise ValueError("calibration scores contain non-finite values")
    v = np.sort(v)
    rank = _percentile_rank(percentile, v.size)
    if orientation == "high":
        return float(v[rank - 1])
    return float(v[v.size - rank])


class QuantileNoveltyDetector(BaseEstimator):
    """Flags scores beyond a percentile of the calibration distribution.

    Classification at the cutoff itself is not novel (strict inequality),
    so on the calibration set the flagged fraction is at most
    ``1 - percentile + 1/n``.

    Parameters
    ----------
    percentile : float
        Calibration percentile in (0, 1), 0.99 by default.
    orientation : {"high", "low"}
        "high" flags scores above the cutoff (reconstruction losses),
        "low" flags scores below it (similarities).

    Attributes
    ----------
    cutoff_ : float
        Fitted order-statistic threshold.
    n_calibration_ : int
        Number of calibration scores.
    """

    def __init__(self, percentile=0.99, orientation="high"):
        self.percentile = percentile
        self.orientation = orientation

    def fit(self, scores, y=None):
        self.cutoff_ = empirical_cutoff(scores, self.percentile, self.orientation)
        self.n_calibration_ = np.asarray(scores).size
        return self

    def predict(self, scores):
        """Boolean novelty flags for an array of scores."""
        check_is_fitted(self, "cutoff_")
        s = np.asarray(scores, dtype=np.float64)
        if not np.all(np.isfinite(s)):
            raise ValueError("scores contain non-finite values")
        if self.orientation == "high":
            return s > self.cutoff_
        return s < self.cutoff_

    def classify(self, score):
        """Verdict for a single score."""
        novel = bool(self.predict(np.asarray([score]))[0])
        return NoveltyVerdict(float(score), novel, self.cutoff_, self.orientation)

    def save(self, path):
        check_is_fitted(self, "cutoff_")
        nvio.write_threshold(path, self.orientation, self.percentile, self.cutoff_)

    @classmethod
    def from_file(cls, path):
        orientation, percentile, cutoff = nvio.read_threshold(path)
        det = cls(percentile=percentile, orientation=orientation)
        det.cutoff_ = cutoff
        det.n_calibration_ = 0
        return det
