"""Pure numpy implementation of the dense-layer and Adam kernels.

Same signatures as the compiled ``_kernels`` module. Arrays are float64 and
C-contiguous; ``W`` has shape (out, in).
"""
import numpy as np

NAME = "numpy"

IDENTITY, TANH, SOFTMAX, SIGMOID = 0, 1, 2, 3


def dense_forward(x, W, b, act):
    z = x @ W.T
    z += b
    if act == TANH:
        np.tanh(z, out=z)
    elif act == SIGMOID:
        z *= 0.5
        np.tanh(z, out=z)
        z += 1.0
        z *= 0.5
    elif act == SOFTMAX:
        z -= z.max(axis=1, keepdims=True)
        np.exp(z, out=z)
        z /= z.sum(axis=1, keepdims=True)
    return z


def dense_backward(x, W, y, gy, act, gW, gb, need_gx):
    """Backprop through ``y = act(x @ W.T + b)``.

    Accumulates into ``gW``/``gb`` in place when they are not None and
    returns the input gradient (or None).
    """
    if act == IDENTITY:
        gz = gy
    elif act == TANH:
        gz = gy * (1.0 - y * y)
    elif act == SIGMOID:
        gz = gy * y * (1.0 - y)
    else:
        gz = y * (gy - (gy * y).sum(axis=1, keepdims=True))
    if gW is not None:
        gW += gz.T @ x
    if gb is not None:
        gb += gz.sum(axis=0)
    if need_gx:
        return gz @ W
    return None


def adam_update(values, grads, m, v, lr, beta1, beta2, eps, step):
    """One bias-corrected Adam step in place. ``step`` counts from 1."""
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * (grads * grads)
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    values -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
