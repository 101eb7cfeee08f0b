"""Dense and convolutional layers with explicit backprop, plus Adam.

Everything is plain float64 numpy.  Convolutions are valid-padding
cross-correlations implemented via im2col so the inner loops run as BLAS
matrix products; gradients are exact (tests compare them against central
finite differences).
"""

import numpy as np

__all__ = ["DenseLayer", "ConvLayer", "Adam", "forward_network", "backward_network"]


def _sigmoid(z):
    # exp(-|z|) never overflows; both branches reuse it.
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return _sigmoid(z)
    if kind == "linear":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def _activation_grad(dout, out, kind):
    """Chain ``dout`` through the activation, given the post-activation output."""
    if kind == "relu":
        return dout * (out > 0)
    if kind == "sigmoid":
        return dout * out * (1.0 - out)
    if kind == "linear":
        return dout
    raise ValueError(f"unknown activation {kind!r}")


def glorot_uniform(shape, fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class DenseLayer:
    """Fully connected layer: out = act(x @ W.T + b), W shaped (out, in)."""

    kind = "dense"

    def __init__(self, weights, biases, activation="linear"):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.biases = np.asarray(biases, dtype=np.float64)
        self.activation = activation
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValueError("dense layer weight/bias shapes inconsistent")

    @classmethod
    def initialize(cls, in_dim, out_dim, rng, activation="linear"):
        w = glorot_uniform((out_dim, in_dim), in_dim, out_dim, rng)
        return cls(w, np.zeros(out_dim), activation)

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    def forward(self, x):
        z = x @ self.weights.T + self.biases
        out = _activate(z, self.activation)
        return out, (x, out)

    def backward(self, dout, cache, need_dx=True):
        x, out = cache
        dz = _activation_grad(dout, out, self.activation)
        dw = dz.T @ x
        db = dz.sum(axis=0)
        dx = dz @ self.weights if need_dx else None
        return dx, dw, db

    def params(self):
        return [self.weights, self.biases]


def conv_output_size(in_size, kernel, stride):
    """Valid-padding output length: floor((in - kernel) / stride) + 1."""
    if in_size < kernel:
        raise ValueError(f"input size {in_size} smaller than kernel {kernel}")
    return (in_size - kernel) // stride + 1


def _im2col(x, kernel, stride):
    """Unfold (n, c, h, w) into (n * oh * ow, c * k * k) patch rows."""
    n, c, h, w = x.shape
    oh = conv_output_size(h, kernel, stride)
    ow = conv_output_size(w, kernel, stride)
    windows = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kernel * kernel)
    return np.ascontiguousarray(cols), oh, ow


class ConvLayer:
    """Valid-padding 2-D cross-correlation, W shaped (out_ch, in_ch, k, k)."""

    kind = "conv"

    def __init__(self, weights, biases, stride, activation="relu"):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.biases = np.asarray(biases, dtype=np.float64)
        self.stride = int(stride)
        self.activation = activation
        if self.weights.ndim != 4 or self.weights.shape[2] != self.weights.shape[3]:
            raise ValueError(f"conv weights must be (out, in, k, k), got {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise ValueError("conv bias shape inconsistent with weights")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")

    @classmethod
    def initialize(cls, in_ch, out_ch, kernel, stride, rng, activation="relu"):
        if kernel % 2 == 0:
            raise ValueError(f"kernel must be odd, got {kernel}")
        fan_in = in_ch * kernel * kernel
        fan_out = out_ch * kernel * kernel
        w = glorot_uniform((out_ch, in_ch, kernel, kernel), fan_in, fan_out, rng)
        return cls(w, np.zeros(out_ch), stride, activation)

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def kernel(self):
        return self.weights.shape[2]

    def output_shape(self, in_h, in_w):
        return (
            conv_output_size(in_h, self.kernel, self.stride),
            conv_output_size(in_w, self.kernel, self.stride),
        )

    def forward(self, x):
        n = x.shape[0]
        cols, oh, ow = _im2col(x, self.kernel, self.stride)
        wmat = self.weights.reshape(self.out_channels, -1)
        z = (cols @ wmat.T).reshape(n, oh, ow, self.out_channels)
        z += self.biases
        z = z.transpose(0, 3, 1, 2)
        out = _activate(z, self.activation)
        return out, (x.shape, cols, out)

    def backward(self, dout, cache, need_dx=True):
        x_shape, cols, out = cache
        n, _, oh, ow = dout.shape
        k, s = self.kernel, self.stride
        dz = _activation_grad(dout, out, self.activation)
        dz_mat = dz.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        wmat = self.weights.reshape(self.out_channels, -1)
        dw = (dz_mat.T @ cols).reshape(self.weights.shape)
        db = dz_mat.sum(axis=0)
        if not need_dx:
            return None, dw, db
        dcols = (dz_mat @ wmat).reshape(n, oh, ow, self.in_channels, k, k)
        # One transpose copy up front so the scatter adds run over the
        # contiguous (oh, ow) trailing axes.
        dcols = np.ascontiguousarray(dcols.transpose(0, 3, 4, 5, 1, 2))
        dx = np.zeros(x_shape)
        for i in range(k):
            for j in range(k):
                dx[:, :, i : i + (oh - 1) * s + 1 : s, j : j + (ow - 1) * s + 1 : s] += (
                    dcols[:, :, i, j]
                )
        return dx, dw, db

    def params(self):
        return [self.weights, self.biases]


def forward_network(layers, x):
    """Run x through the layer stack; returns (output, per-layer caches)."""
    caches = []
    out = x
    for layer in layers:
        out, cache = layer.forward(out)
        caches.append(cache)
    return out, caches


def backward_network(layers, caches, dout, need_input_grad=False):
    """Backpropagate dout; returns (dx, [(dw, db) per layer]).

    ``dx`` is None unless ``need_input_grad`` (skipping the first layer's
    input gradient saves the largest scatter/matmul of the pass).
    """
    grads = [None] * len(layers)
    d = dout
    for i in range(len(layers) - 1, -1, -1):
        d, dw, db = layers[i].backward(d, caches[i], need_dx=i > 0 or need_input_grad)
        grads[i] = (dw, db)
    return d, grads


class Adam:
    """Adam optimizer updating a fixed list of parameter arrays in place.

    Uses the bias-corrected step-size form
    ``p -= lr * sqrt(1 - b2^t)/(1 - b1^t) * m / (sqrt(v) + eps * sqrt(1 - b2^t))``
    and works in place throughout; the gradient arrays passed to `step`
    are consumed as scratch space.
    """

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = None
        self._v = None
        self._scratch = None

    def step(self, params, grads):
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
            self._scratch = [np.empty_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        sq_bc2 = np.sqrt(1.0 - b2**self.t)
        lr_t = self.lr * sq_bc2 / (1.0 - b1**self.t)
        eps_t = self.eps * sq_bc2
        for p, g, m, v, d in zip(params, grads, self._m, self._v, self._scratch):
            g = np.asarray(g, dtype=p.dtype)
            m *= b1
            m += (1.0 - b1) * g
            np.multiply(g, g, out=g)
            g *= 1.0 - b2
            v *= b2
            v += g
            np.sqrt(v, out=d)
            d += eps_t
            np.divide(m, d, out=d)
            d *= lr_t
            p -= d
