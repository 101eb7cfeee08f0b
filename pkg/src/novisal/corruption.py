"""Controlled corruptions: Gaussian noise, brightness shifts, MSE matching."""

import numpy as np

from .image import check_image
from .metrics import mse

__all__ = ["add_gaussian_noise", "adjust_brightness", "match_mse"]

MATCH_ITERATIONS = 40
MATCH_RELATIVE_TOL = 0.02


def add_gaussian_noise(img, sigma, seed=0):
    """Add clamped i.i.d. Gaussian noise: v' = clamp(v + sigma * n, 0, 1).

    The unit noise field is a pure function of the seed and image shape,
    so for a fixed seed the corruption strength scales monotonically with
    sigma (up to clamping).
    """
    arr = check_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return arr.copy()
    field = np.random.default_rng(seed).standard_normal(arr.shape)
    return np.clip(arr + sigma * field, 0.0, 1.0)


def adjust_brightness(img, delta):
    """Uniform brightness shift: v' = clamp(v + delta, 0, 1)."""
    arr = check_image(img)
    if not -1.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [-1, 1], got {delta}")
    if delta == 0:
        return arr.copy()
    return np.clip(arr + delta, 0.0, 1.0)


def match_mse(img, target_mse, kind, seed=0):
    """Corrupt an image so its MSE against the original hits a target.

    Bisects the corruption parameter (noise sigma or brightness delta) on
    [0, 1] for `MATCH_ITERATIONS` rounds; the noise field is frozen per
    seed so the achieved MSE is monotone in the parameter.  The result is
    within ``MATCH_RELATIVE_TOL`` (2%) of the target whenever the target
    is achievable on the parameter range.

    Parameters
    ----------
    img : array_like
        Source image.
    target_mse : float
        Desired pixel-wise MSE against ``img`` (>= 0).
    kind : {"noise", "brightness"}
        Corruption family.
    seed : int
        Noise seed (ignored for brightness).

    Returns
    -------
    (corrupted, achieved_mse) : (ndarray, float)
    """
    arr = check_image(img)
    if kind == "noise":
        apply = lambda p: add_gaussian_noise(arr, p, seed)  # noqa: E731
    elif kind == "brightness":
        apply = lambda p: adjust_brightness(arr, p)  # noqa: E731
    else:
        raise ValueError(f"kind must be 'noise' or 'brightness', got {kind!r}")
    if target_mse < 0:
        raise ValueError(f"target_mse must be >= 0, got {target_mse}")
    if target_mse == 0:
        return arr.copy(), 0.0

    hi_img = apply(1.0)
    hi_mse = float(mse(arr, hi_img))
    if target_mse > hi_mse:
        raise ValueError(
            f"target MSE {target_mse:g} unachievable with {kind}; "
            f"maximum achievable is {hi_mse:g}"
        )

    lo, hi = 0.0, 1.0
    best_img, best_mse = hi_img, hi_mse
    for _ in range(MATCH_ITERATIONS):
        mid = 0.5 * (lo + hi)
        cand = apply(mid)
        cand_mse = float(mse(arr, cand))
        if abs(cand_mse - target_mse) < abs(best_mse - target_mse):
            best_img, best_mse = cand, cand_mse
        if cand_mse < target_mse:
            lo = mid
        else:
            hi = mid
    return best_img, best_mse
