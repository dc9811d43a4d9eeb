"""Fixed-architecture ReLU MLP with hand-written reverse mode.

Layers compute ``h_{k+1} = relu(h_k @ W_k + b_k)`` with weights stored as
``(fan_in, fan_out)``; the final layer is affine. The post-activation
output of the last hidden layer is exposed as the feature vector, so that
the network output equals ``features @ W_last + b_last``.
"""

from dataclasses import dataclass

import numpy as np

from coadapt.exceptions import NumericError, ShapeError

__all__ = [
    "HEAD_MODES",
    "MlpParams",
    "Gradients",
    "ForwardCache",
    "init_mlp",
    "mlp_forward",
    "mlp_forward_cache",
    "mlp_backward",
    "backward_from_cache",
    "central_difference",
    "finite_diff_grad",
]

HEAD_MODES = ("state_multihead", "state_action_scalar")


def _check_layers(weights, biases):
    if len(weights) == 0 or len(weights) != len(biases):
        raise ShapeError("need one bias vector per weight matrix and at least one layer")
    for k, (w, b) in enumerate(zip(weights, biases)):
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ShapeError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
        if k and weights[k - 1].shape[1] != w.shape[0]:
            raise ShapeError(
                f"layer {k} expects {w.shape[0]} inputs but layer {k - 1} "
                f"produces {weights[k - 1].shape[1]}"
            )


class _LayerStack:
    """Shared container behaviour for parameters and their gradients."""

    weights: tuple
    biases: tuple

    def arrays(self):
        return [*self.weights, *self.biases]

    def flatten(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    @property
    def size(self):
        return sum(a.size for a in self.arrays())

    def _split(self, arrays):
        k = len(self.weights)
        return tuple(arrays[:k]), tuple(arrays[k:])

    def unflatten(self, vector):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.size,):
            raise ShapeError(f"expected a vector of length {self.size}, got {vector.shape}")
        out = []
        offset = 0
        for a in self.arrays():
            out.append(vector[offset:offset + a.size].reshape(a.shape).copy())
            offset += a.size
        return self.with_arrays(out)


@dataclass(frozen=True, eq=False)
class MlpParams(_LayerStack):
    """Weights and biases of a ReLU network.

    ``head_mode`` records how the network is wired into a Q-function:
    ``"state_multihead"`` feeds the observation and emits one output per
    action (per head); ``"state_action_scalar"`` feeds the observation
    concatenated with a one-hot action and emits one output per head.
    """

    weights: tuple
    biases: tuple
    head_mode: str = "state_multihead"
    activation: str = "relu"

    def __post_init__(self):
        weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        _check_layers(weights, biases)
        if self.head_mode not in HEAD_MODES:
            raise ShapeError(f"unknown head mode {self.head_mode!r}")
        if self.activation != "relu":
            raise ShapeError("only the relu activation is supported")
        if not all(np.all(np.isfinite(a)) for a in (*weights, *biases)):
            raise NumericError("parameters contain non-finite entries")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    @property
    def output_dim(self):
        return self.weights[-1].shape[1]

    @property
    def feature_dim(self):
        return self.weights[-1].shape[0]

    def with_arrays(self, arrays):
        weights, biases = self._split(list(arrays))
        return MlpParams(weights, biases, self.head_mode, self.activation)

    def copy(self):
        return self.with_arrays([a.copy() for a in self.arrays()])

    def equals(self, other):
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


@dataclass(frozen=True, eq=False)
class Gradients(_LayerStack):
    """Per-parameter derivatives, shape-congruent with an :class:`MlpParams`."""

    weights: tuple
    biases: tuple

    def with_arrays(self, arrays):
        weights, biases = self._split(list(arrays))
        return Gradients(weights, biases)

    def __add__(self, other):
        return self.with_arrays([a + b for a, b in zip(self.arrays(), other.arrays())])

    def scale(self, c):
        return self.with_arrays([c * a for a in self.arrays()])

    def max_abs(self):
        return max(float(np.max(np.abs(a))) if a.size else 0.0 for a in self.arrays())


def init_mlp(layer_sizes, rng, head_mode="state_multihead"):
    """He-uniform initialisation: ``W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases."""
    sizes = list(layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ShapeError(f"invalid layer sizes {sizes}")
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(weights), tuple(biases), head_mode)


@dataclass(frozen=True, eq=False)
class ForwardCache:
    """Layer inputs recorded during a forward pass, consumed by backprop."""

    inputs: tuple  # input to each layer, post-activation
    outputs: np.ndarray
    squeeze: bool

    @property
    def features(self):
        return self.inputs[-1]


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeError(f"input of shape {x.shape[-1:]} does not match width {params.input_dim}")
    return x, squeeze


def mlp_forward_cache(params, x):
    x, squeeze = _as_batch(params, x)
    inputs = [x]
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        if k == last:
            return ForwardCache(tuple(inputs), z, squeeze)
        h = np.maximum(z, 0.0)
        inputs.append(h)
    raise AssertionError("unreachable")


def mlp_forward(params, x):
    """Evaluate the network.

    Parameters
    ----------
    params : MlpParams
    x : array_like, shape (input_dim,) or (batch, input_dim)

    Returns
    -------
    q_values : numpy.ndarray
        Network outputs, shape (output_dim,) or (batch, output_dim).
    features : numpy.ndarray
        Post-activation penultimate layer (the input itself for a
        single-layer network).
    """
    cache = mlp_forward_cache(params, x)
    if cache.squeeze:
        return cache.outputs[0], cache.features[0]
    return cache.outputs, cache.features


def backward_from_cache(params, cache, upstream, feature_upstream=None):
    upstream = np.asarray(upstream, dtype=np.float64)
    if cache.squeeze and upstream.ndim == 1:
        upstream = upstream[None, :]
    if upstream.shape != cache.outputs.shape:
        raise ShapeError(f"upstream shape {upstream.shape} != output shape {cache.outputs.shape}")
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    delta = upstream
    for k in range(n_layers - 1, -1, -1):
        h = cache.inputs[k]
        gw[k] = h.T @ delta
        gb[k] = delta.sum(axis=0)
        if k == 0:
            break
        dh = delta @ params.weights[k].T
        if k == n_layers - 1 and feature_upstream is not None:
            fu = np.asarray(feature_upstream, dtype=np.float64)
            if cache.squeeze and fu.ndim == 1:
                fu = fu[None, :]
            if fu.shape != h.shape:
                raise ShapeError(f"feature upstream {fu.shape} != feature shape {h.shape}")
            dh = dh + fu
        delta = dh * (h > 0.0)
    return Gradients(tuple(gw), tuple(gb))


def mlp_backward(params, x, upstream, feature_upstream=None):
    """Exact gradient of ``sum(upstream * q) + sum(feature_upstream * features)``.

    ``x`` and ``upstream`` may be single vectors or batches with matching
    leading dimension; batch contributions are summed.
    """
    return backward_from_cache(params, mlp_forward_cache(params, x), upstream, feature_upstream)


def central_difference(f, x, step=1e-5):
    """Central-difference gradient of a scalar function of an array (or float)."""
    if step <= 0:
        raise ValueError("step must be positive")
    scalar = np.isscalar(x)
    x = np.array(x, dtype=np.float64, ndmin=1)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        f_plus = f(x[0] if scalar else x)
        flat[k] = orig - step
        f_minus = f(x[0] if scalar else x)
        flat[k] = orig
        gflat[k] = (f_plus - f_minus) / (2.0 * step)
    return float(grad[0]) if scalar else grad


def finite_diff_grad(params, x, upstream, step=1e-5, feature_upstream=None):
    """Finite-difference counterpart of :func:`mlp_backward` (test oracle)."""
    upstream = np.asarray(upstream, dtype=np.float64)

    def objective(theta):
        q, feats = mlp_forward(params.unflatten(theta), x)
        val = np.sum(upstream * q)
        if feature_upstream is not None:
            val += np.sum(np.asarray(feature_upstream) * feats)
        return val

    flat = central_difference(objective, params.flatten(), step)
    g = params.unflatten(flat)
    return Gradients(g.weights, g.biases)
