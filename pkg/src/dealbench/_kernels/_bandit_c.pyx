# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bandit kernel. Keep operation order identical to ``_bandit_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND = "cython"


cdef void _softmax(const double[::1] theta, const long long[::1] active, double[::1] out) noexcept nogil:
    cdef Py_ssize_t k = active.shape[0]
    cdef Py_ssize_t j
    cdef double m = theta[active[0]]
    cdef double s = 0.0
    for j in range(k):
        if theta[active[j]] > m:
            m = theta[active[j]]
    for j in range(k):
        out[j] = exp(theta[active[j]] - m)
    for j in range(k):
        s += out[j]
    for j in range(k):
        out[j] = out[j] / s


cdef inline cnp.ndarray _as_active(active):
    return np.ascontiguousarray(active, dtype=np.int64)


cdef inline cnp.ndarray _as_theta(theta):
    return np.ascontiguousarray(theta, dtype=np.float64)


def softmax(theta, active):
    cdef cnp.ndarray act = _as_active(active)
    cdef cnp.ndarray th = _as_theta(theta)
    out = np.empty(act.shape[0], dtype=np.float64)
    _softmax(th, act, out)
    return out


def choose(theta, active, double eps, double u_explore, double u_pick):
    cdef cnp.ndarray act = _as_active(active)
    cdef const long long[::1] a = act
    cdef Py_ssize_t k = a.shape[0]
    cdef Py_ssize_t j
    cdef double cum = 0.0
    if u_explore < eps:
        j = <Py_ssize_t>(u_pick * k)
        if j >= k:
            j = k - 1
        return int(a[j]), True
    cdef double[::1] probs = np.empty(k, dtype=np.float64)
    _softmax(_as_theta(theta), a, probs)
    for j in range(k):
        cum += probs[j]
        if u_pick < cum:
            return int(a[j]), False
    return int(a[k - 1]), False


def update(cnp.ndarray[cnp.float64_t, ndim=1] theta, active, long long arm, double reward, double baseline, double eta):
    cdef cnp.ndarray act = _as_active(active)
    cdef const long long[::1] a = act
    cdef Py_ssize_t k = a.shape[0]
    cdef Py_ssize_t j, pos = -1
    cdef double b = 0.9 * baseline + 0.1 * reward
    cdef double adv = reward - b
    cdef double[::1] probs = np.empty(k, dtype=np.float64)
    _softmax(np.ascontiguousarray(theta), a, probs)
    for j in range(k):
        if a[j] == arm:
            pos = j
            break
    if pos < 0:
        raise ValueError(f"arm {arm} not in active set")
    cdef double pi = probs[pos]
    theta[arm] = theta[arm] + eta * adv * (1.0 - pi)
    return b, adv, pi
