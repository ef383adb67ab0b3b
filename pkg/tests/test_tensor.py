import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from batchrl.errors import UsageError
from batchrl.tensor import Tensor, concat, maximum, minimum, where_rows
from oracles import central_difference

finite = st.floats(-2.0, 2.0, allow_nan=False)


def _leaf(a):
    return Tensor(np.array(a, dtype=np.float64), requires_grad=True)


def _check(fn, *arrays_, tol=1e-6):
    """Compare backprop through ``fn`` against central differences for every input."""
    leaves = [_leaf(a) for a in arrays_]
    fn(*leaves).backward()
    for k, leaf in enumerate(leaves):
        vals = [np.array(a, dtype=np.float64) for a in arrays_]
        fd = central_difference(lambda: float(fn(*[Tensor(v) for v in vals]).data), vals[k], h=1e-6)
        np.testing.assert_allclose(leaf.grad, fd, rtol=tol, atol=tol)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 2), elements=finite), arrays(np.float64, (3, 2), elements=finite))
def test_arithmetic_gradients(a, b):
    _check(lambda x, y: (x * y + x - y * 2.0).sum(), a, b)
    _check(lambda x, y: (x / (y.square() + 1.0)).mean(), a, b)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 3), elements=finite))
def test_unary_gradients(a):
    _check(lambda x: x.tanh().sum(), a)
    _check(lambda x: x.exp().mean(), a)
    _check(lambda x: x.softplus().sum(), a)
    _check(lambda x: (x.square() + 1.0).log().sum(), a)
    _check(lambda x: x.log_softmax()[:, 0].sum(), a)
    _check(lambda x: (x + 3.0).norm(axis=1).sum(), a)


def test_broadcast_gradients(rng):
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=3)
    _check(lambda x, y: (x * y + y).square().sum(), a, b)


def test_concat_and_getitem(rng):
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 1))
    _check(lambda x, y: (concat([x, y], axis=1)[:, 1:] * 2.0).square().sum(), a, b)


def test_minimum_maximum_route_gradient():
    a, b = _leaf([1.0, 5.0, 2.0]), _leaf([3.0, 4.0, 2.0])
    (minimum(a, b).sum() + maximum(a, b).sum() * 10.0).backward()
    # ties go to the first argument for both
    np.testing.assert_array_equal(a.grad, [1.0, 10.0, 11.0])
    np.testing.assert_array_equal(b.grad, [10.0, 1.0, 0.0])


def test_where_rows():
    a, b = _leaf(np.ones((3, 2))), _leaf(np.zeros((3, 2)))
    where_rows([True, False, True], a, b).sum().backward()
    np.testing.assert_array_equal(a.grad[:, 0], [1, 0, 1])
    np.testing.assert_array_equal(b.grad[:, 0], [0, 1, 0])


def test_clip_masks_gradient():
    x = _leaf([-2.0, 0.0, 2.0])
    x.clip(-1.0, 1.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])


def test_norm_gradient_at_zero_is_zero():
    x = _leaf(np.zeros((1, 3)))
    x.norm(axis=1).sum().backward()
    np.testing.assert_array_equal(x.grad, np.zeros((1, 3)))


def test_backward_errors():
    with pytest.raises(UsageError):
        Tensor(np.ones(2)).sum().backward()
    with pytest.raises(UsageError):
        (_leaf(np.ones(2)) * 2.0).backward()


def test_sink_accumulates():
    sink = np.zeros(2)
    w = Tensor(np.array([1.0, 2.0]), requires_grad=True, sink=sink)
    (w * 3.0).sum().backward()
    (w * 3.0).sum().backward()
    np.testing.assert_array_equal(sink, [6.0, 6.0])
