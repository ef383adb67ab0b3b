# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense-layer and Adam kernels.

GEMMs go through the BLAS that scipy links against; bias, activation and the
activation Jacobian are fused into single passes over the output buffer.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "cython"

cdef enum:
    IDENTITY = 0
    TANH = 1
    SOFTMAX = 2
    SIGMOID = 3


def dense_forward(double[:, ::1] x, double[:, ::1] W, double[::1] b, int act):
    cdef int batch = x.shape[0]
    cdef int n_in = x.shape[1]
    cdef int n_out = W.shape[0]
    if W.shape[1] != n_in or b.shape[0] != n_out:
        raise ValueError("dense_forward: shape mismatch")
    out = np.empty((batch, n_out), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef double alpha = 1.0, beta = 0.0
    cdef char ta = b'T', tb = b'N'
    cdef int i, j
    cdef double mx, s
    if batch == 0 or n_out == 0:
        return out
    if n_in > 0:
        # y^T (col-major, n_out x batch) = W (n_out x n_in) @ x^T
        dgemm(&ta, &tb, &n_out, &batch, &n_in, &alpha, &W[0, 0], &n_in,
              &x[0, 0], &n_in, &beta, &y[0, 0], &n_out)
    else:
        y[:, :] = 0.0
    with nogil:
        for i in range(batch):
            if act == SOFTMAX:
                mx = y[i, 0] + b[0]
                for j in range(n_out):
                    y[i, j] += b[j]
                    if y[i, j] > mx:
                        mx = y[i, j]
                for j in range(n_out):
                    y[i, j] -= mx
            elif act == SIGMOID:
                for j in range(n_out):
                    y[i, j] = 0.5 * (y[i, j] + b[j])
            else:
                for j in range(n_out):
                    y[i, j] += b[j]
    # numpy's SIMD tanh/exp are several times faster than the scalar libm ones
    if act == TANH:
        np.tanh(out, out=out)
    elif act == SIGMOID:
        np.tanh(out, out=out)
        out += 1.0
        out *= 0.5
    elif act == SOFTMAX:
        np.exp(out, out=out)
        with nogil:
            for i in range(batch):
                s = 0.0
                for j in range(n_out):
                    s += y[i, j]
                for j in range(n_out):
                    y[i, j] = y[i, j] / s
    return out


def dense_backward(double[:, ::1] x, double[:, ::1] W, double[:, ::1] y,
                   double[:, ::1] gy, int act, gW, gb, bint need_gx):
    cdef int batch = x.shape[0]
    cdef int n_in = x.shape[1]
    cdef int n_out = W.shape[0]
    cdef int i, j
    cdef double dot, yy
    cdef double alpha = 1.0, beta_acc = 1.0, beta0 = 0.0
    cdef char tn = b'N', tt = b'T'
    gz_arr = np.empty((batch, n_out), dtype=np.float64)
    cdef double[:, ::1] gz = gz_arr
    cdef double[:, ::1] gWv
    cdef double[::1] gbv
    with nogil:
        for i in range(batch):
            if act == IDENTITY:
                for j in range(n_out):
                    gz[i, j] = gy[i, j]
            elif act == TANH:
                for j in range(n_out):
                    yy = y[i, j]
                    gz[i, j] = gy[i, j] * (1.0 - yy * yy)
            elif act == SIGMOID:
                for j in range(n_out):
                    yy = y[i, j]
                    gz[i, j] = gy[i, j] * yy * (1.0 - yy)
            else:
                dot = 0.0
                for j in range(n_out):
                    dot += gy[i, j] * y[i, j]
                for j in range(n_out):
                    gz[i, j] = y[i, j] * (gy[i, j] - dot)
    if batch > 0 and n_out > 0:
        if gW is not None and n_in > 0:
            gWv = gW
            # gW^T (col-major, n_in x n_out) += x^T @ gz
            dgemm(&tn, &tt, &n_in, &n_out, &batch, &alpha, &x[0, 0], &n_in,
                  &gz[0, 0], &n_out, &beta_acc, &gWv[0, 0], &n_in)
        if gb is not None:
            gbv = gb
            with nogil:
                for i in range(batch):
                    for j in range(n_out):
                        gbv[j] += gz[i, j]
    if not need_gx:
        return None
    gx_arr = np.zeros((batch, n_in), dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    if batch > 0 and n_in > 0 and n_out > 0:
        # gx^T (col-major, n_in x batch) = W^T @ gz^T
        dgemm(&tn, &tn, &n_in, &batch, &n_out, &alpha, &W[0, 0], &n_in,
              &gz[0, 0], &n_out, &beta0, &gx[0, 0], &n_in)
    return gx_arr


def adam_update(double[::1] values, double[::1] grads, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps, long step):
    cdef Py_ssize_t i, n = values.shape[0]
    cdef double g
    cdef double c1 = 1.0 - pow(beta1, <double>step)
    cdef double c2 = 1.0 - pow(beta2, <double>step)
    with nogil:
        for i in range(n):
            g = grads[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g)
            values[i] -= lr * (m[i] / c1) / (sqrt(v[i] / c2) + eps)
