"""Independent reference computations used by the tests.

Nothing here calls into the autodiff code paths under test: forward passes
are straight Python loops and gradients come from central differences.
"""
import math

import numpy as np


def loop_forward(layers, activations, x):
    """Reference MLP forward with explicit loops. ``layers`` is a list of (W, b)."""
    h = [float(v) for v in x]
    for (W, b), act in zip(layers, activations):
        out = []
        for i in range(W.shape[0]):
            s = float(b[i])
            for j in range(W.shape[1]):
                s += float(W[i, j]) * h[j]
            out.append(s)
        if act == "tanh":
            out = [math.tanh(v) for v in out]
        elif act == "sigmoid":
            out = [1.0 / (1.0 + math.exp(-v)) for v in out]
        elif act == "softmax":
            m = max(out)
            e = [math.exp(v - m) for v in out]
            z = sum(e)
            out = [v / z for v in e]
        h = out
    return np.array(h)


def central_difference(f, values, h=1e-4):
    """Gradient of scalar ``f()`` w.r.t. the array ``values`` (perturbed in place)."""
    grad = np.zeros_like(values)
    flat = values.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def normwise_relative_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def loop_fk(angles, link=0.2):
    x = y = total = 0.0
    for a in angles:
        total += a
        x += link * math.cos(total)
        y += link * math.sin(total)
    return np.array([x, y])


def loop_coverage(points, bins, low, high):
    """Nested-loop binning; returns the set of occupied cells."""
    cells = set()
    for p in points:
        cell = []
        for d, v in enumerate(p):
            span = high[d] - low[d]
            k = int(math.floor((v - low[d]) / span * bins)) if span > 0 else 0
            cell.append(min(max(k, 0), bins - 1))
        cells.add(tuple(cell))
    return cells


def loop_discounted_return(rewards, dones, gamma):
    total, discount = 0.0, 1.0
    for r, d in zip(rewards, dones):
        if not d:
            total += discount * r
        discount *= gamma
    return total


def fd_param_grad(net, loss_of_output, x, h=1e-4):
    """Central-difference gradient of ``loss_of_output(net.predict(x))`` w.r.t. all parameters."""
    return central_difference(lambda: float(loss_of_output(net.predict(x))), net.params.values, h)
