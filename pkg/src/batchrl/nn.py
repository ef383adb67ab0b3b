"""Multilayer perceptrons with flat parameter storage, Adam, and checkpoint I/O."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    ConfigError,
    CorruptionError,
    FormatError,
    InputShapeError,
    TrainingDivergenceError,
    UsageError,
)
from .tensor import Tensor, as_tensor, dense

CHECKPOINT_MAGIC = b"BRLP"
CHECKPOINT_VERSION = 1


class ParamVector:
    """Flat parameter values with a gradient buffer of the same length."""

    def __init__(self, size):
        self.values = np.zeros(size, dtype=np.float64)
        self.grads = np.zeros(size, dtype=np.float64)

    def __len__(self):
        return self.values.shape[0]

    def zero_grads(self):
        self.grads[...] = 0.0


class Mlp:
    """Tanh-hidden MLP. Layer ``l`` stores ``W`` as (out, in) row-major then ``b``."""

    def __init__(self, layer_dims, output_activation="identity", rng=None):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or any(d <= 0 for d in layer_dims):
            raise ConfigError(f"layer_dims must list at least two positive sizes, got {layer_dims}")
        if output_activation not in kernels.ACTIVATIONS:
            raise ConfigError(f"unknown output activation {output_activation!r}")
        self.layer_dims = layer_dims
        self.output_activation = output_activation
        self.activations = [kernels.ACTIVATIONS["tanh"]] * (len(layer_dims) - 2) + [
            kernels.ACTIVATIONS[output_activation]
        ]
        size = sum(o * i + o for i, o in zip(layer_dims[:-1], layer_dims[1:]))
        self.params = ParamVector(size)
        self._weights = []
        self._biases = []
        self._wgrads = []
        self._bgrads = []
        offset = 0
        for n_in, n_out in zip(layer_dims[:-1], layer_dims[1:]):
            w_end = offset + n_in * n_out
            self._weights.append(self.params.values[offset:w_end].reshape(n_out, n_in))
            self._wgrads.append(self.params.grads[offset:w_end].reshape(n_out, n_in))
            self._biases.append(self.params.values[w_end : w_end + n_out])
            self._bgrads.append(self.params.grads[w_end : w_end + n_out])
            offset = w_end + n_out
        self._recorded = False
        if rng is not None:
            self.initialize(rng)

    def initialize(self, rng):
        for W, b in zip(self._weights, self._biases):
            bound = np.sqrt(1.0 / W.shape[1])
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)

    @property
    def in_dim(self):
        return self.layer_dims[0]

    @property
    def out_dim(self):
        return self.layer_dims[-1]

    @property
    def layers(self):
        """(W, b) views, one pair per affine layer."""
        return list(zip(self._weights, self._biases))

    def _check_input(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise InputShapeError(f"network expects inputs of width {self.in_dim}, got shape {x.shape}")

    def forward(self, x, frozen=False, raw_output=False):
        """Differentiable forward pass.

        ``frozen`` treats the parameters as constants (gradients still flow to
        the input). ``raw_output`` skips the final activation, e.g. to get
        logits from a softmax head.
        """
        x = as_tensor(x)
        if x.data.ndim == 1:
            x = x.reshape(1, -1)
        self._check_input(x.data)
        h = x
        last = len(self._weights) - 1
        for k, (W, b) in enumerate(zip(self._weights, self._biases)):
            if frozen:
                Wt, bt = Tensor(W), Tensor(b)
            else:
                Wt = Tensor(W, requires_grad=True, sink=self._wgrads[k])
                bt = Tensor(b, requires_grad=True, sink=self._bgrads[k])
            act = self.activations[k]
            if raw_output and k == last:
                act = kernels.ACTIVATIONS["identity"]
            h = dense(h, Wt, bt, act)
        if not frozen:
            self._recorded = True
        return h

    __call__ = forward

    def predict(self, x, raw_output=False):
        """Plain numpy forward pass with no graph recording."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x.reshape(1, -1)
        self._check_input(x)
        h = np.ascontiguousarray(x)
        last = len(self._weights) - 1
        for k, (W, b) in enumerate(zip(self._weights, self._biases)):
            act = self.activations[k]
            if raw_output and k == last:
                act = 0
            h = kernels.dense_forward(h, W, b, act)
        return h[0] if squeeze else h

    def zero_grads(self):
        self.params.zero_grads()

    def copy(self):
        other = Mlp(self.layer_dims, self.output_activation)
        other.params.values[...] = self.params.values
        return other

    def load_from(self, other):
        if other.layer_dims != self.layer_dims:
            raise ConfigError("cannot copy parameters between networks of different shapes")
        self.params.values[...] = other.params.values

    def polyak_update(self, source, tau):
        """target <- (1 - tau) * target + tau * source."""
        if not 0.0 <= tau <= 1.0:
            raise ConfigError(f"polyak tau must lie in [0, 1], got {tau}")
        if tau == 1.0:
            self.params.values[...] = source.params.values
        elif tau > 0.0:
            vals = self.params.values
            vals *= 1.0 - tau
            vals += tau * source.params.values

    def param_hash(self):
        return hashlib.sha256(self.params.values.tobytes()).hexdigest()

    def check_finite(self, step=None):
        if not np.all(np.isfinite(self.params.values)):
            raise TrainingDivergenceError("non-finite network parameters", step)


def mlp_forward(net, x):
    """Evaluate ``net`` on a single input vector or a batch, without recording."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and x.shape[0] != net.in_dim:
        raise InputShapeError(f"input length {x.shape[0]} does not match layer_dims[0]={net.in_dim}")
    return net.predict(x)


def mlp_backward(net, loss):
    """Zero ``net``'s gradients and backpropagate a scalar ``loss`` into them."""
    if not net._recorded:
        raise UsageError("mlp_backward called before a recorded forward pass")
    net.zero_grads()
    loss.backward()
    net._recorded = False
    return net.params


@dataclass
class AdamState:
    size: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)


def adam_step(params, state, step=None):
    """Apply one Adam update to ``params`` in place. Gradients are left untouched."""
    if len(params) != state.size:
        raise ConfigError("Adam state size does not match the parameter vector")
    if not np.all(np.isfinite(params.grads)):
        raise TrainingDivergenceError("non-finite gradient", step)
    state.step_count += 1
    kernels.adam_update(
        params.values, params.grads, state.m, state.v,
        state.lr, state.beta1, state.beta2, state.eps, state.step_count,
    )
    return params, state


class Adam:
    """Convenience wrapper binding an :class:`AdamState` to one network."""

    def __init__(self, net, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.net = net
        self.state = AdamState(len(net.params), lr, beta1, beta2, eps)

    def step(self, step=None):
        adam_step(self.net.params, self.state, step)


def minimize(loss, nets, optimizers, step=None):
    """Zero grads of ``nets``, backprop ``loss`` and take one Adam step for each net."""
    value = float(loss.data)
    if not np.isfinite(value):
        raise TrainingDivergenceError("non-finite loss", step)
    for net in nets:
        net.zero_grads()
    loss.backward()
    for net, opt in zip(nets, optimizers):
        opt.step(step)
        net._recorded = False
    return value


# -- checkpoints --------------------------------------------------------------


def _encode_net(net):
    dims = net.layer_dims
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<HH", CHECKPOINT_VERSION, len(dims)),
        struct.pack(f"<{len(dims)}I", *dims),
        bytes(net.activations),
        net.params.values.astype("<f4").tobytes(),
    ]
    return b"".join(parts)


def encode_networks(nets):
    return b"".join(_encode_net(net) for net in nets)


def decode_networks(blob):
    nets = []
    pos = 0
    view = memoryview(blob)
    while pos < len(blob):
        if bytes(view[pos : pos + 4]) != CHECKPOINT_MAGIC:
            raise FormatError("bad checkpoint magic")
        if pos + 8 > len(blob):
            raise CorruptionError("truncated checkpoint header")
        version, n_dims = struct.unpack_from("<HH", blob, pos + 4)
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        pos += 8
        n_layers = n_dims - 1
        if n_dims < 2 or pos + 4 * n_dims + n_layers > len(blob):
            raise CorruptionError("truncated checkpoint layer table")
        dims = list(struct.unpack_from(f"<{n_dims}I", blob, pos))
        pos += 4 * n_dims
        codes = list(blob[pos : pos + n_layers])
        pos += n_layers
        if any(c not in kernels.ACTIVATION_NAMES for c in codes):
            raise FormatError(f"unknown activation code in {codes}")
        if any(c != kernels.ACTIVATIONS["tanh"] for c in codes[:-1]):
            raise FormatError("hidden layers must use tanh")
        net = Mlp(dims, kernels.ACTIVATION_NAMES[codes[-1]])
        nbytes = 4 * len(net.params)
        if pos + nbytes > len(blob):
            raise CorruptionError("truncated checkpoint parameters")
        net.params.values[...] = np.frombuffer(blob, dtype="<f4", count=len(net.params), offset=pos)
        pos += nbytes
        nets.append(net)
    return nets


def save_networks(path, nets):
    with open(path, "wb") as fh:
        fh.write(encode_networks(nets))


def load_networks(path):
    with open(path, "rb") as fh:
        return decode_networks(fh.read())
