"""Grayscale image arrays and basic geometric operations.

Images are 2-D float64 arrays of intensities in [0, 1] (row-major,
``img[row, col]``).  RGB images are H x W x 3 arrays with the same value
range.  Batches stack images along a leading axis.
"""

import numpy as np

__all__ = [
    "check_image",
    "check_image_batch",
    "check_rgb",
    "to_grayscale",
    "resize_bilinear",
]

# ITU-R BT.601 luma weights; they sum to 1 so grayscale stays in [0, 1].
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def check_image(img, name="image"):
    """Validate a single grayscale image and return it as float64.

    Parameters
    ----------
    img : array_like
        2-D array of intensities.
    name : str
        Label used in error messages.

    Returns
    -------
    np.ndarray
        The validated float64 array.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} has a zero dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} has intensities outside [0, 1]")
    return arr


def check_image_batch(images, name="images"):
    """Validate a stack of grayscale images, returning an (n, h, w) array.

    Accepts a 3-D array, or a list of equally sized 2-D images.
    """
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"{name} must stack to 3-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} has intensities outside [0, 1]")
    return arr


def check_rgb(img, name="rgb image"):
    """Validate an RGB image (H x W x 3, channels in [0, 1])."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must be H x W x 3, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} has a zero dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} has channel values outside [0, 1]")
    return arr


def to_grayscale(img):
    """Convert an RGB image to grayscale with BT.601 luma weights.

    Per pixel: gray = 0.299 r + 0.587 g + 0.114 b.  The weights sum to 1,
    so the result is a convex combination of the channels and stays in
    [0, 1].

    Parameters
    ----------
    img : array_like
        H x W x 3 array with channels in [0, 1].

    Returns
    -------
    np.ndarray
        H x W grayscale image.
    """
    arr = check_rgb(img)
    return arr @ LUMA_WEIGHTS


def resize_bilinear(img, out_h, out_w):
    """Resize a grayscale image with corner-aligned bilinear interpolation.

    The source coordinate of output index ``i`` along an axis is
    ``i * (in_dim - 1) / (out_dim - 1)``, or 0 when ``out_dim == 1``, so
    the corner pixels of input and output coincide.

    Parameters
    ----------
    img : array_like
        2-D intensity array in [0, 1].
    out_h, out_w : int
        Output dimensions, both >= 1.

    Returns
    -------
    np.ndarray
        Resized (out_h, out_w) image, clipped to [0, 1].
    """
    arr = check_image(img)
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {(out_h, out_w)}")
    in_h, in_w = arr.shape

    def axis_coords(out_n, in_n):
        if out_n == 1 or in_n == 1:
            return np.zeros(out_n), np.zeros(out_n, dtype=np.intp)
        src = np.arange(out_n) * ((in_n - 1) / (out_n - 1))
        lo = np.minimum(src.astype(np.intp), in_n - 2)
        return src - lo, lo

    fy, y0 = axis_coords(out_h, in_h)
    fx, x0 = axis_coords(out_w, in_w)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)

    fy = fy[:, None]
    fx = fx[None, :]
    top = arr[np.ix_(y0, x0)] * (1.0 - fx) + arr[np.ix_(y0, x1)] * fx
    bot = arr[np.ix_(y1, x0)] * (1.0 - fx) + arr[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy) + bot * fy
    return np.clip(out, 0.0, 1.0)
