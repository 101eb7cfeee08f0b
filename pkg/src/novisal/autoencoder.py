"""Fully connected reconstruction autoencoder, the one-class classifier."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import io as nvio
from . import metrics
from .data import minibatch_indices
from .errors import DataError, NumericalError
from .image import check_image_batch
from .layers import Adam, DenseLayer, backward_network, forward_network

LOSS_KINDS = ("mse", "ssim")


class ReconstructionAutoencoder(BaseEstimator, TransformerMixin):
    """Dense autoencoder over flattened grayscale images.

    Images are flattened row-major, passed through ReLU hidden layers and
    a sigmoid output layer of the input width, and reshaped back.  For the
    default 60x160 pipeline geometry the stack is 9600-64-16-64-9600.

    Training minimizes either the pixel-wise MSE or the structural
    dissimilarity ``1 - ssim_mean(input, reconstruction)``; SSIM is
    averaged over windows per image, then over the batch.  Gradients flow
    analytically through the sigmoid output for both losses.

    Parameters
    ----------
    hidden_dims : tuple of int
        Hidden layer widths, bottleneck in the middle.
    loss : {"mse", "ssim"}
        Reconstruction objective.
    ssim_window : int
        Window side length for the SSIM objective (images must be at
        least this large in both dimensions).
    learning_rate, epochs, batch_size, seed :
        Adam step size, passes over the data, minibatch size, RNG seed.
    dtype : {"float64", "float32"}
        Training arithmetic width.  float64 keeps gradients exact enough
        for finite-difference verification; float32 roughly halves the
        wall time of large runs with no measurable quality change.

    Attributes
    ----------
    layers_ : list of DenseLayer
    image_shape_ : (height, width) accepted after fitting
    loss_history_ : ndarray, per-epoch mean training loss
    """

    def __init__(
        self,
        hidden_dims=(64, 16, 64),
        loss="ssim",
        ssim_window=11,
        learning_rate=1e-3,
        epochs=200,
        batch_size=32,
        seed=0,
        dtype="float64",
    ):
        self.hidden_dims = hidden_dims
        self.loss = loss
        self.ssim_window = ssim_window
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.dtype = dtype

    def _ssim_params(self):
        return metrics.SsimParams(window=self.ssim_window)

    def _check_input(self, X, fitted=True):
        X = check_image_batch(X)
        if fitted and X.shape[1:] != tuple(self.image_shape_):
            raise ValueError(
                f"images are {X.shape[1:]}, model expects {tuple(self.image_shape_)}"
            )
        if self.loss == "ssim" and (
            X.shape[1] < self.ssim_window or X.shape[2] < self.ssim_window
        ):
            raise ValueError(
                f"images of shape {X.shape[1:]} are smaller than the "
                f"{self.ssim_window}x{self.ssim_window} SSIM window"
            )
        return X

    def parameters(self):
        out = []
        for layer in self.layers_:
            out.extend(layer.params())
        return out

    # -- forward --------------------------------------------------------

    def _reconstruct_with_caches(self, X):
        flat = X.reshape(X.shape[0], -1)
        out, caches = forward_network(self.layers_, flat)
        return out.reshape(X.shape), caches

    def reconstruct(self, X):
        """Reconstructions of X, same shape, values in (0, 1)."""
        check_is_fitted(self, "layers_")
        X = self._check_input(X)
        recon, _ = self._reconstruct_with_caches(X)
        return recon

    def transform(self, X):
        """Alias of `reconstruct` for transformer pipelines."""
        return self.reconstruct(X)

    def reconstruction_scores(self, X, metric=None):
        """Per-image similarity between each image and its reconstruction.

        ``metric`` defaults to the training loss kind: "mse" returns the
        mean squared error (lower is more familiar), "ssim" the mean SSIM
        (higher is more familiar).
        """
        check_is_fitted(self, "layers_")
        metric = self.loss if metric is None else metric
        if metric not in LOSS_KINDS:
            raise ValueError(f"metric must be one of {LOSS_KINDS}, got {metric!r}")
        X = self._check_input(X)
        recon = self.reconstruct(X)
        if metric == "mse":
            return np.atleast_1d(metrics.mse(X, recon))
        return np.atleast_1d(metrics.ssim_mean(X, recon, self._ssim_params()))

    def loss_values(self, X):
        """Per-image training-loss values (MSE, or 1 - mean SSIM)."""
        scores = self.reconstruction_scores(X)
        return scores if self.loss == "mse" else 1.0 - scores

    # -- training ---------------------------------------------------------

    def _loss_and_grads_prepared(self, X, x_moments=None):
        """Loss and gradients for an already validated, dtype-cast batch."""
        n = X.shape[0]
        recon, caches = self._reconstruct_with_caches(X)
        k = recon.shape[1] * recon.shape[2]
        if self.loss == "mse":
            diff = recon - X
            loss = float(np.mean(diff * diff))
            dout = 2.0 / (k * n) * diff
        else:
            sim, grad = metrics._ssim_mean_and_grad(
                X, recon, self._ssim_params(), x_moments
            )
            loss = float(np.mean(1.0 - sim))
            dout = grad
            dout *= -1.0 / n
        _, grads = backward_network(self.layers_, caches, dout.reshape(n, -1))
        flat = []
        for dw, db in grads:
            flat.extend([dw, db])
        return loss, flat

    def loss_and_gradients(self, X):
        """Mean per-image loss over the batch and its parameter gradients."""
        check_is_fitted(self, "layers_")
        X = self._check_input(X)
        return self._loss_and_grads_prepared(X.astype(self._np_dtype()))

    def _np_dtype(self):
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be 'float64' or 'float32', got {self.dtype!r}")
        return np.dtype(self.dtype)

    def fit(self, X, y=None):
        """Train the autoencoder on a stack of images (n, h, w)."""
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        X = self._check_input(X, fitted=False)
        self.image_shape_ = X.shape[1:]
        flat_dim = X.shape[1] * X.shape[2]
        X = X.astype(self._np_dtype())

        rng = np.random.default_rng(self.seed)
        dims = [flat_dim, *self.hidden_dims, flat_dim]
        self.layers_ = [
            DenseLayer.initialize(dims[i], dims[i + 1], rng, activation="relu")
            for i in range(len(dims) - 2)
        ]
        self.layers_.append(
            DenseLayer.initialize(dims[-2], dims[-1], rng, activation="sigmoid")
        )
        for layer in self.layers_:
            layer.weights = layer.weights.astype(self._np_dtype())
            layer.biases = layer.biases.astype(self._np_dtype())

        params = self.parameters()
        adam = Adam(lr=self.learning_rate)
        n = X.shape[0]
        # Input-side window moments never change during training; compute
        # them once and slice per batch.
        input_moments = None
        if self.loss == "ssim":
            mx, var_x = metrics._first_moments(X, self.ssim_window)
            input_moments = (mx, var_x)
        history = []
        for epoch in range(self.epochs):
            total = 0.0
            for idx in minibatch_indices(n, self.batch_size, self.seed, epoch):
                xm = None
                if input_moments is not None:
                    xm = (input_moments[0][idx], input_moments[1][idx])
                loss, grads = self._loss_and_grads_prepared(X[idx], xm)
                if not np.isfinite(loss):
                    raise NumericalError(f"non-finite training loss at epoch {epoch}")
                adam.step(params, grads)
                total += loss * len(idx)
            history.append(total / n)
        self.loss_history_ = np.asarray(history)
        return self

    # -- persistence --------------------------------------------------------

    def save_weights(self, path):
        check_is_fitted(self, "layers_")
        nvio.save_weights(
            path,
            [
                {"kind": "dense", "weights": layer.weights, "biases": layer.biases}
                for layer in self.layers_
            ],
        )

    @classmethod
    def from_weights(cls, path, image_shape, loss="ssim", ssim_window=11):
        """Rebuild a fitted autoencoder from an NVSM weights file.

        The dense records carry only layer widths; the 2-D image geometry
        they flatten is supplied here.
        """
        records = nvio.load_weights(path)
        if not records or any(r["kind"] != "dense" for r in records):
            raise DataError(f"{path}: autoencoder weights must be dense layers only")
        h, w = image_shape
        if records[0]["weights"].shape[1] != h * w:
            raise DataError(
                f"{path}: first layer expects {records[0]['weights'].shape[1]} "
                f"inputs, image shape {image_shape} flattens to {h * w}"
            )
        if records[-1]["weights"].shape[0] != h * w:
            raise DataError(f"{path}: output width does not match image shape")
        est = cls(
            hidden_dims=tuple(r["weights"].shape[0] for r in records[:-1]),
            loss=loss,
            ssim_window=ssim_window,
        )
        est.layers_ = [
            DenseLayer(r["weights"], r["biases"], activation="relu")
            for r in records[:-1]
        ]
        last = records[-1]
        est.layers_.append(DenseLayer(last["weights"], last["biases"], activation="sigmoid"))
        est.image_shape_ = (h, w)
        chain = h * w
        for layer in est.layers_:
            if layer.in_dim != chain:
                raise DataError(f"{path}: dense layer chain inconsistent")
            chain = layer.out_dim
        return est
