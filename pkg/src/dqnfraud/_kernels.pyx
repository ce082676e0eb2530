# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_pykernels`` operation for operation."""

import numpy as np
from libc.float cimport DBL_MIN
from libc.math cimport sqrt, fabs


def adam_update(double[::1] params, const double[::1] grads, double[::1] m,
                double[::1] v, double lr, double beta1, double beta2,
                double eps, double bias1, double bias2):
    cdef Py_ssize_t i, n = params.shape[0]
    cdef double g, mi, vi, m_hat, v_hat
    cdef double c1 = 1.0 - beta1
    cdef double c2 = 1.0 - beta2
    if grads.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam buffers must share one length")
    with nogil:
        for i in range(n):
            g = grads[i]
            mi = m[i] * beta1
            mi = mi + c1 * g
            vi = v[i] * beta2
            vi = vi + c2 * (g * g)
            if fabs(mi) < DBL_MIN:
                mi = 0.0
            if vi < DBL_MIN:
                vi = 0.0
            m[i] = mi
            v[i] = vi
            m_hat = mi / bias1
            v_hat = vi / bias2
            params[i] = params[i] - lr * m_hat / (sqrt(v_hat) + eps)


def huber(const double[::1] pred, const double[::1] target, double delta):
    cdef Py_ssize_t i, n = pred.shape[0]
    if target.shape[0] != n:
        raise ValueError("pred and target lengths differ")
    grad_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef double err, a, total = 0.0
    cdef double nd = <double>n
    with nogil:
        for i in range(n):
            err = pred[i] - target[i]
            a = fabs(err)
            if a <= delta:
                total += 0.5 * err * err
            else:
                total += delta * (a - 0.5 * delta)
            if err > delta:
                err = delta
            elif err < -delta:
                err = -delta
            grad[i] = err / nd
    return total / nd, grad_arr


def rolling_rates(actions, labels, Py_ssize_t window, Py_ssize_t episode_length,
                  bint reset_each_episode):
    cdef const long long[::1] act = np.ascontiguousarray(actions, dtype=np.int64)
    cdef const long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = act.shape[0]
    dr_arr = np.zeros(n, dtype=np.float64)
    fr_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] dr = dr_arr
    cdef double[::1] fr = fr_arr
    cdef Py_ssize_t t, lo = 0, ep_start
    cdef long long n_gen = 0, n_dec = 0, n_fr = 0, n_app = 0
    with nogil:
        for t in range(n):
            if lab[t] == 0:
                n_gen += 1
                if act[t] == 1:
                    n_dec += 1
            else:
                n_fr += 1
                if act[t] == 0:
                    n_app += 1
            ep_start = 0
            if reset_each_episode:
                ep_start = (t // episode_length) * episode_length
            while lo < t - window + 1 or lo < ep_start:
                if lab[lo] == 0:
                    n_gen -= 1
                    if act[lo] == 1:
                        n_dec -= 1
                else:
                    n_fr -= 1
                    if act[lo] == 0:
                        n_app -= 1
                lo += 1
            if n_gen > 0:
                dr[t] = <double>n_dec / <double>n_gen
            if n_fr > 0:
                fr[t] = <double>n_app / <double>n_fr
    return dr_arr, fr_arr
