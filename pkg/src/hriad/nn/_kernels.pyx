# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense-network kernels.

Same API as ``_kernels_py``: matrix products go through BLAS dgemm, the
elementwise chains (batchnorm, relu, dropout masks, L1, Adam) are fused
C loops. All arrays are C-contiguous float64; masks are uint8.
"""

import numpy as np

from libc.math cimport fabs, sqrt
from scipy.linalg.cython_blas cimport dgemm

BACKEND = "cython"


cdef void _gemm(char *ta, char *tb, int m, int n, int k,
                double *a, int lda, double *b, int ldb,
                double *c, int ldc) noexcept nogil:
    cdef double one = 1.0, zero = 0.0
    dgemm(ta, tb, &m, &n, &k, &one, a, &lda, b, &ldb, &zero, c, &ldc)


def linear_forward(double[:, ::1] x, double[:, ::1] w, double[::1] b):
    cdef int m = x.shape[0], k = x.shape[1], n = w.shape[0]
    y = np.empty((m, n))
    cdef double[:, ::1] yv = y
    cdef Py_ssize_t i, j
    if m > 0 and n > 0 and k > 0:
        # y = x @ w.T: in Fortran view, y^T (n,m) = w (n,k) @ x^T (k,m)
        _gemm("T", "N", n, m, k, &w[0, 0], k, &x[0, 0], k, &yv[0, 0], n)
    for i in range(m):
        for j in range(n):
            yv[i, j] += b[j]
    return y


def linear_backward(double[:, ::1] x, double[:, ::1] w, double[:, ::1] gy):
    cdef int m = x.shape[0], k = x.shape[1], n = w.shape[0]
    gx = np.zeros((m, k))
    gw = np.zeros((n, k))
    gb = np.zeros(n)
    cdef double[:, ::1] gxv = gx
    cdef double[:, ::1] gwv = gw
    cdef double[::1] gbv = gb
    cdef Py_ssize_t i, j
    if m > 0 and n > 0 and k > 0:
        # gx = gy @ w: gx^T (k,m) = w^T (k,n) @ gy^T (n,m)
        _gemm("N", "N", k, m, n, &w[0, 0], k, &gy[0, 0], n, &gxv[0, 0], k)
        # gw = gy.T @ x: gw^T (k,n) = x^T (k,m) @ gy (m,n)
        _gemm("N", "T", k, n, m, &x[0, 0], k, &gy[0, 0], n, &gwv[0, 0], k)
    for i in range(m):
        for j in range(n):
            gbv[j] += gy[i, j]
    return gx, gw, gb


def bn_forward_train(double[:, ::1] x, double[::1] gamma, double[::1] beta,
                     double eps):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    y = np.empty((m, n))
    mean = np.zeros(n)
    var = np.zeros(n)
    xhat = np.empty((m, n))
    inv_std = np.empty(n)
    cdef double[:, ::1] yv = y, xhatv = xhat
    cdef double[::1] meanv = mean, varv = var, inv_stdv = inv_std
    cdef Py_ssize_t i, j
    cdef double d
    for i in range(m):
        for j in range(n):
            meanv[j] += x[i, j]
    for j in range(n):
        meanv[j] /= m
    for i in range(m):
        for j in range(n):
            d = x[i, j] - meanv[j]
            varv[j] += d * d
    for j in range(n):
        varv[j] /= m
        inv_stdv[j] = 1.0 / sqrt(varv[j] + eps)
    for i in range(m):
        for j in range(n):
            xhatv[i, j] = (x[i, j] - meanv[j]) * inv_stdv[j]
            yv[i, j] = gamma[j] * xhatv[i, j] + beta[j]
    return y, mean, var, xhat


def bn_forward_infer(double[:, ::1] x, double[::1] gamma, double[::1] beta,
                     double[::1] running_mean, double[::1] running_var,
                     double eps):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    y = np.empty((m, n))
    inv_std = np.empty(n)
    cdef double[:, ::1] yv = y
    cdef double[::1] inv_stdv = inv_std
    cdef Py_ssize_t i, j
    for j in range(n):
        inv_stdv[j] = 1.0 / sqrt(running_var[j] + eps)
    for i in range(m):
        for j in range(n):
            yv[i, j] = gamma[j] * (x[i, j] - running_mean[j]) * inv_stdv[j] + beta[j]
    return y


def bn_backward(double[:, ::1] gy, double[::1] gamma, double[:, ::1] xhat,
                double[::1] var, double eps):
    cdef Py_ssize_t m = gy.shape[0], n = gy.shape[1]
    gx = np.empty((m, n))
    ggamma = np.zeros(n)
    gbeta = np.zeros(n)
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    scale = np.empty(n)
    cdef double[:, ::1] gxv = gx
    cdef double[::1] ggammav = ggamma, gbetav = gbeta, s1v = s1, s2v = s2
    cdef double[::1] scalev = scale
    cdef Py_ssize_t i, j
    cdef double dxhat
    for i in range(m):
        for j in range(n):
            dxhat = gy[i, j] * gamma[j]
            s1v[j] += dxhat
            s2v[j] += dxhat * xhat[i, j]
            ggammav[j] += gy[i, j] * xhat[i, j]
            gbetav[j] += gy[i, j]
    for j in range(n):
        scalev[j] = (1.0 / sqrt(var[j] + eps)) / m
    for i in range(m):
        for j in range(n):
            dxhat = gy[i, j] * gamma[j]
            gxv[i, j] = scalev[j] * (m * dxhat - s1v[j] - xhat[i, j] * s2v[j])
    return gx, ggamma, gbeta


def relu_forward(double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    y = np.empty((m, n))
    cdef double[:, ::1] yv = y
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            yv[i, j] = x[i, j] if x[i, j] > 0.0 else 0.0
    return y


def relu_backward(double[:, ::1] gy, double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    gx = np.empty((m, n))
    cdef double[:, ::1] gxv = gx
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            gxv[i, j] = gy[i, j] if x[i, j] > 0.0 else 0.0
    return gx


def mask_scale(double[:, ::1] a, unsigned char[:, ::1] mask, double scale):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    out = np.empty((m, n))
    cdef double[:, ::1] outv = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            outv[i, j] = a[i, j] * scale if mask[i, j] else 0.0
    return out


def l1_loss(double[:, ::1] pred, double[:, ::1] target):
    cdef Py_ssize_t m = pred.shape[0], n = pred.shape[1]
    cdef double acc = 0.0
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            acc += fabs(pred[i, j] - target[i, j])
    return acc / (m * n)


def l1_grad(double[:, ::1] pred, double[:, ::1] target):
    cdef Py_ssize_t m = pred.shape[0], n = pred.shape[1]
    g = np.empty((m, n))
    cdef double[:, ::1] gv = g
    cdef double inv = 1.0 / (m * n), d
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            d = pred[i, j] - target[i, j]
            gv[i, j] = inv if d > 0.0 else (-inv if d < 0.0 else 0.0)
    return g


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps,
                double corr1, double corr2):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double mhat, vhat
    for i in range(n):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        mhat = m[i] / corr1
        vhat = v[i] / corr2
        p[i] -= lr * mhat / (sqrt(vhat) + eps)
