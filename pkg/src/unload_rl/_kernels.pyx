# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused elementwise kernels over flat float64 parameter vectors.

Each loop evaluates exactly the same IEEE operation sequence as the NumPy
fallback in ``_kernels_py`` (the extension is built with
``-ffp-contract=off``), so both backends produce bit-identical results.
"""

from libc.math cimport sqrt


def adam_step(double[::1] params, const double[::1] grads,
              double[::1] m, double[::1] v,
              double lr, double beta1, double beta2, double eps,
              double bias1, double bias2):
    """In-place Adam update; ``bias1``/``bias2`` are ``1 - beta**t``."""
    cdef Py_ssize_t i, n = params.shape[0]
    cdef double g, mi, vi
    cdef double one_b1 = 1.0 - beta1
    cdef double one_b2 = 1.0 - beta2
    if grads.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_step: length mismatch")
    with nogil:
        for i in range(n):
            g = grads[i]
            mi = beta1 * m[i] + one_b1 * g
            vi = beta2 * v[i] + one_b2 * (g * g)
            m[i] = mi
            v[i] = vi
            params[i] = params[i] - lr * (mi / bias1) / (sqrt(vi / bias2) + eps)


def polyak(double[::1] target, const double[::1] online, double zeta):
    """In-place ``target = (1 - zeta) * target + zeta * online``."""
    cdef Py_ssize_t i, n = target.shape[0]
    cdef double keep = 1.0 - zeta
    if online.shape[0] != n:
        raise ValueError("polyak: length mismatch")
    with nogil:
        for i in range(n):
            target[i] = keep * target[i] + zeta * online[i]
