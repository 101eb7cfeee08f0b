"""Convolutional steering-angle regressor with retained feature maps."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import io as nvio
from .data import minibatch_indices
from .errors import DataError, NumericalError
from .image import check_image_batch
from .layers import Adam, ConvLayer, DenseLayer

DEFAULT_INPUT_SHAPE = (60, 160)


class SteeringRegressor(BaseEstimator, RegressorMixin):
    """Small CNN mapping grayscale road images to steering angles (radians).

    The network is a stack of strided valid-padding convolutions with ReLU
    activations, flattened into ReLU dense layers and a linear scalar
    output.  Training is minibatch gradient descent with the Adam update
    rule on the mean squared angle error; runs are bit-reproducible for a
    fixed seed.  Post-activation feature maps of every conv layer can be
    retained for saliency extraction (`forward_trace`).

    Parameters
    ----------
    conv_channels : tuple of int
        Output channels of each conv layer.
    conv_kernels : tuple of int
        Odd kernel side lengths, one per conv layer.
    conv_strides : tuple of int
        Strides, one per conv layer.
    hidden_dims : tuple of int
        Widths of the ReLU dense layers between flatten and the output.
    learning_rate : float
        Adam step size.
    epochs : int
        Passes over the training set.
    batch_size : int
        Minibatch size (a short final batch is kept).
    seed : int
        Seed for weight init and batch shuffling.
    dtype : {"float64", "float32"}
        Training arithmetic width; float64 keeps gradients exact enough
        for finite-difference verification.

    Attributes
    ----------
    conv_layers_ : list of ConvLayer
    dense_layers_ : list of DenseLayer
    input_shape_ : (height, width) accepted by `predict`
    loss_history_ : ndarray, per-epoch mean training loss
    """

    def __init__(
        self,
        conv_channels=(8, 12, 16),
        conv_kernels=(5, 5, 3),
        conv_strides=(2, 2, 2),
        hidden_dims=(64, 16),
        learning_rate=1e-3,
        epochs=30,
        batch_size=32,
        seed=0,
        dtype="float64",
    ):
        self.conv_channels = conv_channels
        self.conv_kernels = conv_kernels
        self.conv_strides = conv_strides
        self.hidden_dims = hidden_dims
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.dtype = dtype

    # -- construction -------------------------------------------------

    def _build(self, input_shape, rng):
        if not len(self.conv_channels) == len(self.conv_kernels) == len(self.conv_strides):
            raise ValueError("conv_channels/kernels/strides must have equal lengths")
        conv_layers = []
        in_ch = 1
        h, w = input_shape
        for out_ch, k, s in zip(self.conv_channels, self.conv_kernels, self.conv_strides):
            layer = ConvLayer.initialize(in_ch, out_ch, k, s, rng, activation="relu")
            h, w = layer.output_shape(h, w)
            conv_layers.append(layer)
            in_ch = out_ch
        dims = [in_ch * h * w, *self.hidden_dims]
        dense_layers = [
            DenseLayer.initialize(dims[i], dims[i + 1], rng, activation="relu")
            for i in range(len(self.hidden_dims))
        ]
        dense_layers.append(DenseLayer.initialize(dims[-1], 1, rng, activation="linear"))
        return conv_layers, dense_layers

    @property
    def layers_(self):
        return [*self.conv_layers_, *self.dense_layers_]

    def parameters(self):
        """Flat list of weight/bias arrays, updated in place by training."""
        out = []
        for layer in self.layers_:
            out.extend(layer.params())
        return out

    # -- forward / backward -------------------------------------------

    def _check_input(self, X):
        X = check_image_batch(X)
        if X.shape[1:] != tuple(self.input_shape_):
            raise ValueError(
                f"images are {X.shape[1:]}, model expects {tuple(self.input_shape_)}"
            )
        return X

    def _forward(self, X, keep_trace=False):
        model_dtype = self.conv_layers_[0].weights.dtype
        out = X[:, np.newaxis, :, :].astype(model_dtype, copy=False)
        caches = []
        trace = []
        for layer in self.conv_layers_:
            out, cache = layer.forward(out)
            caches.append(cache)
            if keep_trace:
                trace.append(out)
        conv_shape = out.shape
        out = out.reshape(out.shape[0], -1)
        for layer in self.dense_layers_:
            out, cache = layer.forward(out)
            caches.append(cache)
        return out[:, 0], caches, conv_shape, trace

    def _np_dtype(self):
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be 'float64' or 'float32', got {self.dtype!r}")
        return np.dtype(self.dtype)

    def loss_and_gradients(self, X, y):
        """Mean squared angle error on (X, y) and its parameter gradients.

        Gradients align with `parameters()`; used by `fit` and by the
        finite-difference checks in the test suite.
        """
        X = self._check_input(X)
        return self._loss_and_grads_prepared(X.astype(self._np_dtype()), y)

    def _loss_and_grads_prepared(self, X, y):
        y = np.asarray(y, dtype=X.dtype).ravel()
        preds, caches, conv_shape, _ = self._forward(X)
        resid = preds - y
        loss = float(np.mean(resid * resid))
        dout = (2.0 * resid / len(y))[:, np.newaxis]

        grads = [None] * len(self.layers_)
        n_conv = len(self.conv_layers_)
        d = dout
        for i in range(len(self.dense_layers_) - 1, -1, -1):
            d, dw, db = self.dense_layers_[i].backward(d, caches[n_conv + i])
            grads[n_conv + i] = (dw, db)
        d = d.reshape(conv_shape)
        for i in range(n_conv - 1, -1, -1):
            d, dw, db = self.conv_layers_[i].backward(d, caches[i], need_dx=i > 0)
            grads[i] = (dw, db)
        flat = []
        for dw, db in grads:
            flat.extend([dw, db])
        return loss, flat

    # -- estimator API -------------------------------------------------

    def fit(self, X, y):
        """Train on images X (n, h, w) and steering angles y (radians)."""
        X = check_image_batch(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(y) != X.shape[0]:
            raise ValueError(f"{X.shape[0]} images but {len(y)} angles")
        if not np.all(np.isfinite(y)):
            raise ValueError("angles contain non-finite values")

        rng = np.random.default_rng(self.seed)
        self.input_shape_ = X.shape[1:]
        self.conv_layers_, self.dense_layers_ = self._build(self.input_shape_, rng)
        for layer in self.layers_:
            layer.weights = layer.weights.astype(self._np_dtype())
            layer.biases = layer.biases.astype(self._np_dtype())
        X = X.astype(self._np_dtype())
        y = y.astype(self._np_dtype())
        params = self.parameters()
        adam = Adam(lr=self.learning_rate)
        n = X.shape[0]
        history = []
        for epoch in range(self.epochs):
            total = 0.0
            for idx in minibatch_indices(n, self.batch_size, self.seed, epoch):
                loss, grads = self._loss_and_grads_prepared(X[idx], y[idx])
                if not np.isfinite(loss):
                    raise NumericalError(
                        f"non-finite training loss at epoch {epoch}"
                    )
                adam.step(params, grads)
                total += loss * len(idx)
            history.append(total / n)
        self.loss_history_ = np.asarray(history)
        return self

    def fit_random_labels(self, X, label_seed=None):
        """Train against uniform random angles in [-0.5, 0.5] rad (control run)."""
        X = check_image_batch(X)
        seed = self.seed if label_seed is None else label_seed
        labels = np.random.default_rng(seed).uniform(-0.5, 0.5, X.shape[0])
        return self.fit(X, labels)

    def predict(self, X):
        """Predicted steering angles, shape (n,)."""
        check_is_fitted(self, "conv_layers_")
        X = self._check_input(X)
        preds, _, _, _ = self._forward(X)
        return preds

    def forward_trace(self, X):
        """Post-activation feature maps of each conv layer.

        Returns a list with one (n, channels, h, w) array per conv layer,
        in network order.
        """
        check_is_fitted(self, "conv_layers_")
        X = self._check_input(X)
        _, _, _, trace = self._forward(X, keep_trace=True)
        return trace

    # -- persistence ----------------------------------------------------

    def save_weights(self, path):
        check_is_fitted(self, "conv_layers_")
        records = []
        for layer in self.conv_layers_:
            records.append(
                {"kind": "conv", "weights": layer.weights, "biases": layer.biases,
                 "stride": layer.stride}
            )
        for layer in self.dense_layers_:
            records.append({"kind": "dense", "weights": layer.weights, "biases": layer.biases})
        nvio.save_weights(path, records)

    @classmethod
    def from_weights(cls, path, input_shape=DEFAULT_INPUT_SHAPE):
        """Rebuild a fitted regressor from an NVSM weights file.

        The file stores layer shapes but not the input geometry, so the
        expected image shape is supplied here (default 60x160).
        """
        records = nvio.load_weights(path)
        conv_recs = [r for r in records if r["kind"] == "conv"]
        dense_recs = [r for r in records if r["kind"] == "dense"]
        kinds = [r["kind"] for r in records]
        if not dense_recs or kinds != ["conv"] * len(conv_recs) + ["dense"] * len(dense_recs):
            raise DataError(f"{path}: expected conv layers followed by dense layers")
        est = cls(
            conv_channels=tuple(r["weights"].shape[0] for r in conv_recs),
            conv_kernels=tuple(r["weights"].shape[2] for r in conv_recs),
            conv_strides=tuple(r["stride"] for r in conv_recs),
            hidden_dims=tuple(r["weights"].shape[0] for r in dense_recs[:-1]),
        )
        est.conv_layers_ = [
            ConvLayer(r["weights"], r["biases"], r["stride"], activation="relu")
            for r in conv_recs
        ]
        est.dense_layers_ = [
            DenseLayer(r["weights"], r["biases"], activation="relu")
            for r in dense_recs[:-1]
        ]
        last = dense_recs[-1]
        est.dense_layers_.append(
            DenseLayer(last["weights"], last["biases"], activation="linear")
        )
        est.input_shape_ = tuple(input_shape)
        est._validate_geometry(path)
        return est

    def _validate_geometry(self, path):
        h, w = self.input_shape_
        in_ch = 1
        for layer in self.conv_layers_:
            if layer.in_channels != in_ch:
                raise DataError(f"{path}: conv channel chain inconsistent")
            h, w = layer.output_shape(h, w)
            in_ch = layer.out_channels
        flat = in_ch * h * w
        for layer in self.dense_layers_:
            if layer.in_dim != flat:
                raise DataError(
                    f"{path}: dense layer expects {layer.in_dim} inputs, got {flat}"
                )
            flat = layer.out_dim
        if flat != 1:
            raise DataError(f"{path}: final layer must output 1 value, got {flat}")
