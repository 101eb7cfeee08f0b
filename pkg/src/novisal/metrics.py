"""Image similarity metrics: pixel-wise MSE and windowed SSIM.

SSIM here is the uniform-window variant: statistics are unweighted means
over square patches slid with stride 1 and valid boundaries (no padding).
Variances and covariances are population (divide-by-n) moments, which makes
the three-factor luminance/contrast/structure form reduce exactly to the
single-fraction formula when all exponents are 1 and the structure
stabilizer is half the contrast stabilizer.

All metric functions accept a single image pair (h, w) or stacked pairs
(..., h, w); stacked inputs return one value per leading index.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "SsimParams",
    "WindowStats",
    "window_stats",
    "mse",
    "ssim_components",
    "ssim_from_stats",
    "ssim_map",
    "ssim_mean",
    "ssim_grad_wrt_y",
]

# Stabilizers follow the (k * L)^2 convention with k1=0.01, k2=0.03 and
# dynamic range L=1 for intensities in [0, 1].
DEFAULT_C1 = (0.01 * 1.0) ** 2
DEFAULT_C2 = (0.03 * 1.0) ** 2


@dataclass(frozen=True)
class SsimParams:
    """Window size, stabilizers, and exponents for SSIM.

    The structure term uses the derived stabilizer ``c3 = c2 / 2`` so that
    the component product collapses to the reduced single-fraction form.
    """

    window: int = 11
    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("stabilizers c1 and c2 must be positive")

    @property
    def c3(self):
        return self.c2 / 2.0


class WindowStats(NamedTuple):
    """Population moments of one aligned window pair."""

    mu_x: float
    mu_y: float
    var_x: float
    var_y: float
    cov_xy: float


def window_stats(xw, yw):
    """Population moments of two aligned windows of identical shape."""
    xw = np.asarray(xw, dtype=np.float64)
    yw = np.asarray(yw, dtype=np.float64)
    if xw.shape != yw.shape:
        raise ValueError(f"window shapes differ: {xw.shape} vs {yw.shape}")
    mu_x = xw.mean()
    mu_y = yw.mean()
    var_x = np.mean((xw - mu_x) ** 2)
    var_y = np.mean((yw - mu_y) ** 2)
    cov_xy = np.mean((xw - mu_x) * (yw - mu_y))
    return WindowStats(mu_x, mu_y, var_x, var_y, cov_xy)


def mse(x, y):
    """Pixel-wise mean squared error.

    ``mse(x, y) = (1/K) * sum_k (x[k] - y[k])^2`` over all K pixels; zero
    exactly when the images are identical.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim < 2:
        raise ValueError(f"images must be at least 2-D, got shape {x.shape}")
    d = x - y
    return np.mean(d * d, axis=(-2, -1))


def ssim_components(stats, params=SsimParams()):
    """Luminance, contrast, and structure terms for one window pair.

    Returns
    -------
    (luminance, contrast, structure) : tuple of float
        With unit exponents their product equals `ssim_from_stats`.
    """
    c1, c2, c3 = params.c1, params.c2, params.c3
    sx = np.sqrt(max(stats.var_x, 0.0))
    sy = np.sqrt(max(stats.var_y, 0.0))
    lum = (2.0 * stats.mu_x * stats.mu_y + c1) / (stats.mu_x**2 + stats.mu_y**2 + c1)
    con = (2.0 * sx * sy + c2) / (stats.var_x + stats.var_y + c2)
    struct = (stats.cov_xy + c3) / (sx * sy + c3)
    return lum, con, struct


def ssim_from_stats(stats, params=SsimParams()):
    """Reduced single-fraction SSIM of one window pair."""
    c1, c2 = params.c1, params.c2
    num = (2.0 * stats.mu_x * stats.mu_y + c1) * (2.0 * stats.cov_xy + c2)
    den = (stats.mu_x**2 + stats.mu_y**2 + c1) * (stats.var_x + stats.var_y + c2)
    return num / den


def _sliding_sum(a, k, axis):
    """Length-k sliding sum along axis -1 or -2 via doubling partial sums.

    Every window total is assembled by the same association tree over its
    own k elements, so windows with identical content produce bit-identical
    sums regardless of position or surrounding data.
    """

    def seg(arr, start, stop):
        if axis == -1:
            return arr[..., start:stop]
        return arr[..., start:stop, :]

    n = a.shape[axis]
    out_n = n - k + 1
    blocks = {1: a}
    p = 1
    while p * 2 <= k:
        b = blocks[p]
        m = b.shape[axis]
        blocks[p * 2] = seg(b, 0, m - p) + seg(b, p, m)
        p *= 2
    acc = None
    off = 0
    rem = k
    for pw in sorted(blocks, reverse=True):
        if rem >= pw:
            piece = seg(blocks[pw], off, off + out_n)
            if acc is None:
                acc = piece.copy()
            else:
                acc += piece
            off += pw
            rem -= pw
    return acc


def _box_sum(a, k):
    """Valid sliding-window sum of a k x k box over the last two axes."""
    return _sliding_sum(_sliding_sum(a, k, -1), k, -2)


def _box_scatter(g, k):
    """Adjoint of `_box_sum`: spread each window value over its k x k support."""
    pad = [(0, 0)] * (g.ndim - 2) + [(k - 1, k - 1), (k - 1, k - 1)]
    return _box_sum(np.pad(g, pad), k)


def _check_pair(x, y, window):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim < 2:
        raise ValueError(f"images must be at least 2-D, got shape {x.shape}")
    if x.shape[-2] < window or x.shape[-1] < window:
        raise ValueError(
            f"images of shape {x.shape[-2:]} are smaller than the "
            f"{window}x{window} window"
        )
    return x, y


def _first_moments(x, k):
    """Window means and variances of one image side; cacheable when the
    image is fixed across many metric evaluations (training inputs)."""
    n = float(k * k)
    mx = _box_sum(x, k) / n
    var_x = _box_sum(x * x, k) / n - mx * mx
    return mx, var_x


def _window_moments(x, y, k, x_moments=None):
    n = float(k * k)
    mx, var_x = _first_moments(x, k) if x_moments is None else x_moments
    my, var_y = _first_moments(y, k)
    cov = _box_sum(x * y, k) / n - mx * my
    return mx, my, var_x, var_y, cov


def ssim_map(x, y, params=SsimParams()):
    """Per-window SSIM scores over all stride-1 valid windows.

    For (..., h, w) inputs the result has shape
    (..., h - window + 1, w - window + 1); each score lies in [-1, 1].
    """
    x, y = _check_pair(x, y, params.window)
    mx, my, var_x, var_y, cov = _window_moments(x, y, params.window)
    num = (2.0 * mx * my + params.c1) * (2.0 * cov + params.c2)
    den = (mx * mx + my * my + params.c1) * (var_x + var_y + params.c2)
    return num / den


def ssim_mean(x, y, params=SsimParams()):
    """Mean of the SSIM map: the image-level similarity score in [-1, 1]."""
    return ssim_map(x, y, params).mean(axis=(-2, -1))


def ssim_grad_wrt_y(x, y, params=SsimParams()):
    """Analytic gradient of ``ssim_mean(x, y)`` with respect to ``y``.

    Each pixel accumulates the closed-form derivative of every window
    score whose support contains it; with stride-1 valid windows and
    dimensions >= window, every pixel belongs to at least one window.

    Returns an array shaped like ``y``.
    """
    x, y = _check_pair(x, y, params.window)
    return _ssim_mean_and_grad(x, y, params)[1]


def _ssim_mean_and_grad(x, y, params, x_moments=None):
    """Fused per-image mean SSIM and gradient wrt y, sharing window moments.

    Internal training path: inputs must already be validated and are used
    at their own dtype (float32 training stays float32 throughout).
    ``x_moments`` optionally carries precomputed `_first_moments` of x.
    """
    k = params.window
    n = float(k * k)
    c1, c2 = float(params.c1), float(params.c2)
    mx, my, var_x, var_y, cov = _window_moments(x, y, k, x_moments)

    a1 = 2.0 * mx * my + c1
    a2 = 2.0 * cov + c2
    b1 = mx * mx + my * my + c1
    b2 = var_x + var_y + c2
    b1b2 = b1 * b2
    value = (a1 * a2 / b1b2).mean(axis=(-2, -1))

    # Per-window derivatives of the score wrt the window's mean of y,
    # variance of y, and covariance; the mean/constant parts collapse into
    # a single scatter.
    g_mu = 2.0 * a2 * (mx * b1 - my * a1) / (b1 * b1b2)
    g_var = -a1 * a2 / (b1b2 * b2)
    g_cov = 2.0 * a1 / b1b2
    const = g_mu - 2.0 * g_var * my - g_cov * mx

    n_windows = mx.shape[-2] * mx.shape[-1]
    grad = (
        _box_scatter(const, k)
        + 2.0 * y * _box_scatter(g_var, k)
        + x * _box_scatter(g_cov, k)
    )
    grad /= n * n_windows
    return value, grad
