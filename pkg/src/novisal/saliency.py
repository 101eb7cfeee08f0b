"""Saliency masks from retained conv feature maps (VisualBackProp).

The mask combines channel-averaged post-ReLU feature maps of every conv
layer: starting from the deepest average, each step upsamples through the
layer's geometry with an all-ones transposed convolution and multiplies
pointwise into the next-shallower average, ending with one more upsample
to input resolution and a min-max normalization to [0, 1].
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .image import check_image_batch

__all__ = ["upsample_ones", "fit_to", "vbp_mask", "vbp_batch", "VisualBackprop"]


def upsample_ones(m, kernel, stride):
    """Transposed convolution with an all-ones kernel.

    Each input cell adds its value over a kernel x kernel patch placed at
    ``stride`` spacing; output side length is ``(in - 1) * stride + kernel``.
    Works on (..., h, w) arrays.
    """
    h, w = m.shape[-2:]
    out = np.zeros((*m.shape[:-2], (h - 1) * stride + kernel, (w - 1) * stride + kernel))
    for i in range(kernel):
        for j in range(kernel):
            out[..., i : i + (h - 1) * stride + 1 : stride,
                j : j + (w - 1) * stride + 1 : stride] += m
    return out


def fit_to(arr, target_h, target_w):
    """Center-crop and/or zero-pad the last two axes to a target size.

    On odd excess (or deficit) the content keeps a top/left bias: cropping
    removes the extra row/column at the bottom/right, padding adds it
    there.  Valid-padding conv geometry makes the transposed-convolution
    output undershoot the source layer by up to stride - 1; padding
    restores the exact size.
    """
    h, w = arr.shape[-2:]
    if h > target_h:
        start = (h - target_h) // 2
        arr = arr[..., start : start + target_h, :]
    if w > target_w:
        start = (w - target_w) // 2
        arr = arr[..., :, start : start + target_w]
    h, w = arr.shape[-2:]
    if h < target_h or w < target_w:
        dh, dw = target_h - h, target_w - w
        pad = [(0, 0)] * (arr.ndim - 2) + [(dh // 2, dh - dh // 2), (dw // 2, dw - dw // 2)]
        arr = np.pad(arr, pad)
    return arr


def _normalize_masks(m):
    """Per-image min-max normalization to [0, 1]; all-zero when flat."""
    lo = m.min(axis=(-2, -1), keepdims=True)
    hi = m.max(axis=(-2, -1), keepdims=True)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (m - lo) / safe, 0.0)


def vbp_mask(trace, conv_layers, input_shape):
    """Saliency mask(s) from a forward trace.

    Parameters
    ----------
    trace : list of ndarray
        Post-activation feature maps per conv layer, each
        (..., channels, h, w), shallowest first.
    conv_layers : sequence
        Objects with ``kernel`` and ``stride`` attributes, aligned with
        the trace.
    input_shape : (height, width)
        Resolution of the network input the trace came from.

    Returns
    -------
    ndarray
        Mask(s) of shape (..., height, width) with values in [0, 1].
    """
    if len(trace) != len(conv_layers) or not trace:
        raise ValueError(
            f"trace has {len(trace)} layers, model has {len(conv_layers)} conv layers"
        )
    averages = [t.mean(axis=-3) for t in trace]
    m = averages[-1]
    for i in range(len(conv_layers) - 1, 0, -1):
        layer = conv_layers[i]
        m = fit_to(upsample_ones(m, layer.kernel, layer.stride), *averages[i - 1].shape[-2:])
        m = m * averages[i - 1]
    m = fit_to(upsample_ones(m, conv_layers[0].kernel, conv_layers[0].stride), *input_shape)
    return _normalize_masks(m)


def vbp_batch(regressor, images):
    """Masks for a list/stack of images, with index-attributed errors."""
    images = list(images)
    if not images:
        return []
    expected = tuple(regressor.input_shape_)
    for i, img in enumerate(images):
        arr = np.asarray(img)
        if arr.shape != expected:
            raise ValueError(f"image {i}: shape {arr.shape}, model expects {expected}")
    masks = VisualBackprop(regressor).fit().transform(np.stack(images))
    return [masks[i] for i in range(masks.shape[0])]


class VisualBackprop(BaseEstimator, TransformerMixin):
    """Transformer mapping images to saliency masks of a fitted regressor.

    Parameters
    ----------
    regressor : SteeringRegressor
        Fitted steering model whose feature maps drive the masks.
    """

    def __init__(self, regressor=None):
        self.regressor = regressor

    def fit(self, X=None, y=None):
        if self.regressor is None:
            raise ValueError("VisualBackprop requires a fitted regressor")
        check_is_fitted(self.regressor, "conv_layers_")
        return self

    def transform(self, X):
        """Saliency masks for images X (n, h, w); output has the same shape."""
        self.fit()
        X = check_image_batch(X)
        trace = self.regressor.forward_trace(X)
        return vbp_mask(trace, self.regressor.conv_layers_, self.regressor.input_shape_)
